from pathlib import Path

from vnhodge.flatcw import CwComplexData, Subdivision
from vnhodge.io.parsers import Problem, ProblemParser, SubdivisionParser


def read_problem(
    file: str | Path,
    fibers: int | None = None,
    eps_d2: float | None = None,
) -> Problem:
    """
    Read a JSON input document describing an algebra, modules, morphisms and either
    an explicit Hilbert complex or a CW complex with a flat bundle (given by
    monodromy, a regular representation or a Čech cocycle).

    Parameters
    ----------
    file : str | Path
        Path to the JSON document.
    fibers : int, optional
        Number of sampled fibers for a ``sampled`` regular bundle. Overrides the value
        in the document. The default is None.
    eps_d2 : float, optional
        Tolerance for the d o d = 0 check of explicit complexes. The default is None,
        which scales the tolerance with the norms of the differentials.

    Returns
    -------
    :class:`~vnhodge.io.parsers.Problem`
        Parsed sections of the document. Use :meth:`Problem.cochain_complex` to get
        the complex to analyse.

    Raises
    ------
    ParseError
        If the document is malformed. The error names the JSON pointer of the
        offending value.

    Examples
    --------
    >>> problem = read_problem("z2_circle.json")
    >>> C = problem.cochain_complex()

    """
    return ProblemParser(file, fibers=fibers, eps_d2=eps_d2).problem


def read_subdivision(
    file: str | Path, coarse: CwComplexData | None = None
) -> Subdivision:
    """
    Read a subdivision file: a fine CW complex and the chain-level recipe mapping
    its cells to group-ring combinations of coarse cells.

    Parameters
    ----------
    file : str | Path
        Path to the JSON subdivision file.
    coarse : :class:`~vnhodge.flatcw.CwComplexData`, optional
        Coarse complex, used when the file has no ``coarse`` section.

    Returns
    -------
    :class:`~vnhodge.flatcw.Subdivision`

    """
    return SubdivisionParser(file, coarse).subdivision
