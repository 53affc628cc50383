"""
Finitely generated Hilbert modules over multi-matrix algebras.

A module is stored by its multiplicities: block i of the algebra acts on the fiber
C^{n_i} (x) C^{m_i} through the first leg, so every A-linear map acts on the
multiplicity leg only and is given by one m'_i x m_i matrix per block.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from vnhodge.errors import NotEndomorphismError, ShapeMismatchError, ValidationFailure
from vnhodge.mixins import JsonExportMixin, PandasExportMixin
from vnhodge.vna_core import FactorBlock, VnAlgebra, make_algebra, weighted_block_sum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HilbertModule:
    algebra: VnAlgebra
    mult: tuple[int, ...]

    def __post_init__(self):
        mult = tuple(int(m) for m in self.mult)
        if len(mult) != len(self.algebra):
            raise ShapeMismatchError(
                f"Module has {len(mult)} multiplicities for {len(self.algebra)} blocks",
                expected=len(self.algebra),
                got=len(mult),
            )
        if any(m < 0 for m in mult):
            raise ValidationFailure(
                f"Multiplicities must be nonnegative, got {mult}", mult=list(mult)
            )
        object.__setattr__(self, "mult", mult)

    def __eq__(self, other):
        # a fibered family is the same module read fiberwise
        if not isinstance(other, HilbertModule):
            return NotImplemented
        return self.algebra == other.algebra and self.mult == other.mult

    def __hash__(self):
        return hash((self.algebra, self.mult))

    def __repr__(self):
        name = self.__class__.__name__
        return f"{name}(mult={self.mult}, dim_tau={dim_tau(self):.6g})"

    @property
    def total_size(self) -> int:
        return sum(self.mult)

    @property
    def is_zero(self) -> bool:
        return self.total_size == 0


class FiberedModuleFamily(HilbertModule):
    """
    Hilbert module read fiberwise as the direct integral of the fiber modules M(omega)
    over the atoms of the algebra.
    """

    def fiber_dims(self) -> np.ndarray:
        """dim_{tau_omega} M(omega) = rho * m / n for every atom."""
        return np.array(
            [b.rho * m / b.n for b, m in zip(self.algebra.blocks, self.mult)],
            dtype=float,
        )


@dataclass(frozen=True, eq=False)
class ModuleMorphism:
    """
    A-linear map between Hilbert modules over the same algebra. Block i is the matrix
    B_i of shape (target.mult[i], source.mult[i]); the full map on the block is the
    tensor product of the identity on C^{n_i} with B_i.
    """

    source: HilbertModule
    target: HilbertModule
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.source.algebra != self.target.algebra:
            raise ShapeMismatchError("Source and target live over different algebras")
        if len(self.blocks) != len(self.source.mult):
            raise ShapeMismatchError(
                f"Morphism has {len(self.blocks)} blocks, algebra has "
                f"{len(self.source.mult)}",
            )
        for i, (block, m_in, m_out) in enumerate(
            zip(self.blocks, self.source.mult, self.target.mult)
        ):
            if np.shape(block) != (m_out, m_in):
                raise ShapeMismatchError(
                    f"Block {i} has shape {np.shape(block)}, expected {(m_out, m_in)}",
                    block=i,
                )

    @property
    def algebra(self) -> VnAlgebra:
        return self.source.algebra

    @property
    def is_endomorphism(self) -> bool:
        return self.source == self.target

    @property
    def H(self) -> "ModuleMorphism":
        return adjoint_morphism(self)

    def __add__(self, other: "ModuleMorphism") -> "ModuleMorphism":
        _check_parallel(self, other)
        return ModuleMorphism(
            self.source,
            self.target,
            tuple(a + b for a, b in zip(self.blocks, other.blocks)),
        )

    def __sub__(self, other: "ModuleMorphism") -> "ModuleMorphism":
        _check_parallel(self, other)
        return ModuleMorphism(
            self.source,
            self.target,
            tuple(a - b for a, b in zip(self.blocks, other.blocks)),
        )

    def __neg__(self) -> "ModuleMorphism":
        return ModuleMorphism(self.source, self.target, tuple(-a for a in self.blocks))

    def __mul__(self, scalar: complex) -> "ModuleMorphism":
        return ModuleMorphism(
            self.source, self.target, tuple(scalar * a for a in self.blocks)
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "ModuleMorphism") -> "ModuleMorphism":
        return compose(self, other)

    def max_entry(self) -> float:
        return max(
            (float(np.max(np.abs(b))) for b in self.blocks if b.size), default=0.0
        )


def _check_parallel(f: ModuleMorphism, g: ModuleMorphism):
    if f.source != g.source or f.target != g.target:
        raise ShapeMismatchError("Morphisms have different source or target")


def make_morphism(
    source: HilbertModule, target: HilbertModule, blocks: Iterable
) -> ModuleMorphism:
    """Build a morphism from array-likes, reshaping empty blocks to their fiber shape."""
    arrays = []
    for block, m_in, m_out in zip(blocks, source.mult, target.mult, strict=True):
        array = np.asarray(block, dtype=complex)
        if array.size == 0:
            array = np.zeros((m_out, m_in), dtype=complex)
        arrays.append(array)
    return ModuleMorphism(source, target, tuple(arrays))


def weighted_dimension(algebra: VnAlgebra, counts: Sequence[float]) -> float:
    """
    sum_i w_i * counts_i / n_i in block order. Module dimensions, Betti numbers,
    density values and truncated dimensions are all evaluated through this function,
    so equal counts give bit-identical results.
    """
    values = [c / b.n for c, b in zip(counts, algebra.blocks, strict=True)]
    return float(weighted_block_sum(algebra.weights, values))


def dim_tau(M: HilbertModule) -> float:
    """
    Von Neumann dimension of a finitely generated Hilbert module.

    Parameters
    ----------
    M : HilbertModule
        Module to measure.

    Returns
    -------
    float
        sum_i w_i * m_i / n_i.

    Examples
    --------
    The regular module has dimension tau(1) = 1:

    >>> A = regular_cyclic_algebra(2)
    >>> dim_tau(HilbertModule(A, (1, 1)))
    1.0

    """
    return weighted_dimension(M.algebra, M.mult)


def trace_endomorphism(T: ModuleMorphism) -> complex:
    """
    Extension of the trace to module endomorphisms: sum_i w_i * tr(B_i) / n_i.

    Raises
    ------
    NotEndomorphismError
        If source and target differ.
    """
    if not T.is_endomorphism:
        raise NotEndomorphismError(
            "Trace is only defined for endomorphisms",
            source=list(T.source.mult),
            target=list(T.target.mult),
        )
    values = [np.trace(b) / f.n for b, f in zip(T.blocks, T.algebra.blocks)]
    return complex(weighted_block_sum(T.algebra.weights, values))


def compose(g: ModuleMorphism, f: ModuleMorphism) -> ModuleMorphism:
    """Composite g after f, blockwise matrix product."""
    if f.target != g.source:
        raise ShapeMismatchError(
            "Cannot compose: target of the first map differs from source of the second",
            first_target=list(f.target.mult),
            second_source=list(g.source.mult),
        )
    return ModuleMorphism(
        f.source, g.target, tuple(b @ a for b, a in zip(g.blocks, f.blocks))
    )


def adjoint_morphism(f: ModuleMorphism) -> ModuleMorphism:
    """Hilbert adjoint for the standard inner product on every block."""
    return ModuleMorphism(f.target, f.source, tuple(b.conj().T for b in f.blocks))


def identity_morphism(M: HilbertModule) -> ModuleMorphism:
    return ModuleMorphism(M, M, tuple(np.eye(m, dtype=complex) for m in M.mult))


def zero_morphism(source: HilbertModule, target: HilbertModule) -> ModuleMorphism:
    return ModuleMorphism(
        source,
        target,
        tuple(
            np.zeros((m_out, m_in), dtype=complex)
            for m_in, m_out in zip(source.mult, target.mult)
        ),
    )


def random_morphism(
    source: HilbertModule, target: HilbertModule, rng: np.random.Generator
) -> ModuleMorphism:
    return ModuleMorphism(
        source,
        target,
        tuple(
            rng.standard_normal((m_out, m_in))
            + 1j * rng.standard_normal((m_out, m_in))
            for m_in, m_out in zip(source.mult, target.mult)
        ),
    )


def operator_norm(f: ModuleMorphism) -> float:
    """Operator (C*-) norm of a morphism: largest singular value over all blocks."""
    return max((float(np.linalg.norm(b, 2)) for b in f.blocks if b.size), default=0.0)


def free_module(A: VnAlgebra, rank: int = 1) -> HilbertModule:
    """The free module l^2(A) (x) C^rank, of von Neumann dimension ``rank``."""
    return HilbertModule(A, tuple(int(n) * rank for n in A.sizes))


def direct_sum(*modules: HilbertModule) -> HilbertModule:
    if not modules:
        raise ValidationFailure("direct_sum needs at least one module")
    algebra = modules[0].algebra
    if any(m.algebra != algebra for m in modules):
        raise ShapeMismatchError("Modules live over different algebras")
    return HilbertModule(algebra, tuple(map(sum, zip(*(m.mult for m in modules)))))


def block_diagonal_morphism(maps: Sequence[ModuleMorphism]) -> ModuleMorphism:
    """Direct sum of morphisms, acting on the direct sums of sources and targets."""
    source = direct_sum(*(f.source for f in maps))
    target = direct_sum(*(f.target for f in maps))
    blocks = []
    for i in range(len(source.algebra)):
        rows = target.mult[i]
        cols = source.mult[i]
        block = np.zeros((rows, cols), dtype=complex)
        r = c = 0
        for f in maps:
            b = f.blocks[i]
            block[r : r + b.shape[0], c : c + b.shape[1]] = b
            r += b.shape[0]
            c += b.shape[1]
        blocks.append(block)
    return ModuleMorphism(source, target, tuple(blocks))


class FiniteGenerationReport(NamedTuple):
    sup_value: float
    verdict: bool
    bound: float


def check_finitely_generated(
    F: FiberedModuleFamily, bound: float
) -> FiniteGenerationReport:
    """
    Finite-generation criterion for direct integrals of fiber modules: the module is
    finitely generated when ess sup rho^-1 * dim M(omega) stays finite. On the atomic
    model the supremum is a maximum, compared against ``bound``.

    Parameters
    ----------
    F : FiberedModuleFamily
        The fibered module.
    bound : float
        Positive bound on the supremum.

    Returns
    -------
    FiniteGenerationReport
        Named tuple (sup_value, verdict, bound).

    """
    if not bound > 0:
        raise ValidationFailure(f"bound must be positive, got {bound}")
    if not isinstance(F, FiberedModuleFamily):
        F = FiberedModuleFamily(F.algebra, F.mult)
    rho = np.array([b.rho for b in F.algebra.blocks])
    ratios = F.fiber_dims() / rho
    sup_value = float(np.max(ratios)) if ratios.size else 0.0
    return FiniteGenerationReport(sup_value, sup_value <= bound, float(bound))


def farber_example(K: int) -> tuple[VnAlgebra, FiberedModuleFamily]:
    """
    Truncation of the module over L^inf([0, 1]) whose fiber over the interval of
    measure 2^-k is C^k. Its dimension sum k / 2^k stays below 2 while the fiber
    dimensions are unbounded, so the untruncated module is not finitely generated.

    A remainder atom of measure 2^-K with zero multiplicity keeps the trace
    normalized.

    Parameters
    ----------
    K : int
        Number of intervals kept, K >= 1.

    Returns
    -------
    tuple[VnAlgebra, FiberedModuleFamily]

    Examples
    --------
    >>> A, M = farber_example(3)
    >>> dim_tau(M)
    1.375

    """
    if int(K) != K or K < 1:
        raise ValidationFailure(f"K must be a positive integer, got {K}")
    K = int(K)
    blocks = [FactorBlock(f"I{k}", 1, 2.0**-k, 1.0) for k in range(1, K + 1)]
    blocks.append(FactorBlock("rest", 1, 2.0**-K, 1.0))
    algebra = make_algebra(blocks)
    module = FiberedModuleFamily(algebra, tuple(range(1, K + 1)) + (0,))
    return algebra, module


def farber_dimension(K: int) -> float:
    """Closed form of the truncated sum: 2 - (K + 2) / 2^K."""
    return 2.0 - (K + 2) * 2.0**-K


@dataclass
class FiniteGenerationSweep(PandasExportMixin, JsonExportMixin):
    """
    Farber family evaluated on several truncation levels. ``growth`` is the fitted
    slope of sup_value against K; a nonzero slope means the sup grows without bound.
    """

    df: pd.DataFrame
    bound: float

    @property
    def growth(self) -> float:
        if len(self.df) < 2:
            return float("nan")
        return float(stats.linregress(self.df["K"], self.df["sup_value"]).slope)

    def to_dict(self) -> dict:
        return {
            "command": "farber",
            "bound": self.bound,
            "growth": self.growth,
            "rows": self.df.to_dict(orient="records"),
        }


def finite_generation_sweep(
    Ks: Iterable[int], bound: float = np.inf
) -> FiniteGenerationSweep:
    """
    Tabulate dim_tau, its closed form and the finite-generation supremum of the
    Farber family for every K.
    """
    records = []
    for K in Ks:
        algebra, module = farber_example(K)
        report = check_finitely_generated(module, bound)
        records.append(
            {
                "K": int(K),
                "dim_tau": dim_tau(module),
                "closed_form": farber_dimension(K),
                "sup_value": report.sup_value,
                "verdict": report.verdict,
                "is_factor": algebra.is_factor,
            }
        )
    return FiniteGenerationSweep(pd.DataFrame.from_records(records), float(bound))
