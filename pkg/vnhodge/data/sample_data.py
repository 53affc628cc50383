import importlib.resources
from pathlib import Path

from vnhodge.flatcw import Subdivision
from vnhodge.io.parsers import Problem
from vnhodge.read import read_problem, read_subdivision

SAMPLE_FILES = (
    "circle_trivial.json",
    "z2_circle.json",
    "z3_circle.json",
    "z5_circle.json",
    "sampled_circle.json",
    "wedge.json",
    "torus.json",
    "morse_circle.json",
    "two_patch_cocycle.json",
    "circle_subdivision.json",
)


def sample_path(name: str) -> Path:
    """
    Path of a packaged sample document.

    Parameters
    ----------
    name : str
        File name, one of ``SAMPLE_FILES``.

    """
    if name not in SAMPLE_FILES:
        raise FileNotFoundError(f"No sample document named {name!r}")
    return Path(importlib.resources.files("vnhodge.data") / name)


def circle_trivial() -> Problem:
    """Circle with one vertex and one edge and the trivial line bundle over C."""
    return read_problem(sample_path("circle_trivial.json"))


def cyclic_circle(order: int = 2) -> Problem:
    """
    Circle with the regular representation of Z_n, for n in 2, 3 or 5. Its Betti
    numbers are b0 = b1 = 1/n.

    Parameters
    ----------
    order : int, optional
        Order of the cyclic group. The default is 2.

    Returns
    -------
    :class:`~vnhodge.io.parsers.Problem`

    """
    return read_problem(sample_path(f"z{order}_circle.json"))


def sampled_circle(fibers: int | None = None) -> Problem:
    """
    Circle with the sampled regular representation of Z (4096 fibers unless
    ``fibers`` is given). Betti numbers vanish and the low spectral density grows
    like lambda^(1/2) in both degrees.
    """
    return read_problem(sample_path("sampled_circle.json"), fibers=fibers)


def wedge() -> Problem:
    """Wedge of two circles, both loops acting by the sign character of Z_2."""
    return read_problem(sample_path("wedge.json"))


def torus(fibers: int | None = None) -> Problem:
    """Torus with the sampled Z-cover pulled back along x, y -> 1."""
    return read_problem(sample_path("torus.json"), fibers=fibers)


def morse_circle() -> Problem:
    """
    Two-vertex circle with the sign representation of Z_2 and a discrete Morse
    function with one critical cell in each degree.
    """
    return read_problem(sample_path("morse_circle.json"))


def two_patch_cocycle() -> Problem:
    """Circle covered by two patches with a sign twist on one overlap component."""
    return read_problem(sample_path("two_patch_cocycle.json"))


def circle_subdivision() -> Subdivision:
    """Subdivision of the one-edge circle into two edges with its recipe."""
    return read_subdivision(sample_path("circle_subdivision.json"))
