from typing import NamedTuple

# Parallelism degree for block-wise eigensolves and parameter sweeps. Results never
# depend on it: every map keeps input order and reductions run in block order.
N_JOBS = 1


class Tolerances(NamedTuple):
    """
    Numerical tolerances used throughout vnhodge. A value of None selects the
    relative default of the owning operation.

    Attributes
    ----------
    eps_null : float | None
        Kernel threshold for Betti numbers. Default 1e-8 * (1 + ||Δ||).
    eps_d2 : float | None
        Allowed max entry of d∘d. Default 1e-10 * max(1, ||d||^2).
    eps_hom : float | None
        Allowed residual of the homotopy identity. Default 1e-9 * (1 + ||d|| ||G||).
    gap_tol : float
        Minimal spectral gap above a cut-off for Green operators.
    tie_band : float
        Eigenvalues within this distance of a cut-off are boundary ties.
    eps_psd : float
        Negative eigenvalues down to -eps_psd * max(1, ||Δ||) are clamped to zero.
    """

    eps_null: float | None = None
    eps_d2: float | None = None
    eps_hom: float | None = None
    gap_tol: float = 1e-8
    tie_band: float = 1e-10
    eps_psd: float = 1e-10


DEFAULT_TOLERANCES = Tolerances()
