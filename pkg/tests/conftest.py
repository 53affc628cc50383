import numpy as np
import pytest
from scipy.stats import unitary_group

from vnhodge import data
from vnhodge.flatcw import (
    CwComplexData,
    Incidence,
    Term,
    assemble_cochain_complex,
    regular_cyclic_bundle,
)
from vnhodge.hcomplex import make_complex
from vnhodge.hmodule import HilbertModule, ModuleMorphism
from vnhodge.vna_core import FactorBlock, make_algebra


def random_complex(algebra, ranks, harmonic, small_fraction=0.5, seed=0):
    """
    Random complex with known spectrum. Per block i the module in degree p is
    C^{r[p-1]} + C^{h[p]} + C^{r[p]}; d_p maps the last summand of C^p onto the first
    summand of C^{p+1} through diag(σ), and every module is rotated by a random
    unitary. Squared singular values lie in [0.05, 0.5] (small) or [2, 10] (large).

    ranks[i][p] is the rank of d_p on block i, harmonic[i][p] the harmonic
    multiplicity. Returns the complex and the squared singular values per block and
    degree.
    """
    rng = np.random.default_rng(seed)
    degrees = len(harmonic[0])
    mult = []
    sigmas = []
    for r, h in zip(ranks, harmonic):
        mult.append(
            [(r[p - 1] if p > 0 else 0) + h[p] + (r[p] if p < degrees - 1 else 0)
             for p in range(degrees)]
        )
        block_sigmas = []
        for p in range(degrees - 1):
            small = rng.uniform(0.05, 0.5, r[p])
            large = rng.uniform(2.0, 10.0, r[p])
            block_sigmas.append(np.where(rng.random(r[p]) < small_fraction, small, large))
        sigmas.append(block_sigmas)

    modules = [
        HilbertModule(algebra, tuple(m[p] for m in mult)) for p in range(degrees)
    ]
    unitaries = [
        [unitary_group.rvs(m[p], random_state=rng) if m[p] > 1 else np.eye(m[p])
         for m in mult]
        for p in range(degrees)
    ]
    differentials = []
    for p in range(degrees - 1):
        blocks = []
        for i, (r, h) in enumerate(zip(ranks, harmonic)):
            d = np.zeros((mult[i][p + 1], mult[i][p]), dtype=complex)
            start = mult[i][p] - r[p]
            d[: r[p], start:] = np.diag(np.sqrt(sigmas[i][p]))
            U_in, U_out = unitaries[p][i], unitaries[p + 1][i]
            blocks.append(U_out @ d @ U_in.conj().T)
        differentials.append(ModuleMorphism(modules[p], modules[p + 1], tuple(blocks)))
    return make_complex(modules, differentials), sigmas


@pytest.fixture
def two_block_algebra():
    return make_algebra([FactorBlock("a", 1, 0.5), FactorBlock("b", 2, 0.5)])


@pytest.fixture
def random_hilbert_complex(two_block_algebra):
    """
    Three-term complex over two blocks: block a has ranks (2, 1) and harmonic
    multiplicities (1, 0, 2), block b ranks (1, 2) and harmonic (0, 1, 1).
    """
    ranks = [(2, 1), (1, 2)]
    harmonic = [(1, 0, 2), (0, 1, 1)]
    C, sigmas = random_complex(two_block_algebra, ranks, harmonic, seed=42)
    return C, sigmas, ranks, harmonic


@pytest.fixture
def circle_cw():
    """One vertex v and one edge e with ∂e = v·g - v."""
    return CwComplexData(
        (("v",), ("e",)),
        (Incidence("e", "v", (Term(1, (("g", 1),)), Term(-1))),),
    )


@pytest.fixture
def torus_cw():
    return CwComplexData(
        (("v",), ("a", "b"), ("f",)),
        (
            Incidence("a", "v", (Term(1, (("x", 1),)), Term(-1))),
            Incidence("b", "v", (Term(1, (("y", 1),)), Term(-1))),
            Incidence("f", "a", (Term(1), Term(-1, (("y", 1),)))),
            Incidence("f", "b", (Term(1, (("x", 1),)), Term(-1))),
        ),
    )


@pytest.fixture
def z2_bundle():
    return regular_cyclic_bundle(2)


@pytest.fixture
def z2_circle(circle_cw, z2_bundle):
    return assemble_cochain_complex(circle_cw, z2_bundle)


@pytest.fixture
def morse_circle():
    return data.morse_circle()


@pytest.fixture
def morse_circle_complex(morse_circle):
    return morse_circle.cochain_complex()


@pytest.fixture
def sampled_circle():
    return data.sampled_circle()


@pytest.fixture
def complex_factory():
    return random_complex
