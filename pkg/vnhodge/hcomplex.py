"""
Hilbert cochain complexes of finite length over multi-matrix algebras: Laplacians,
their spectra, von Neumann Betti numbers, spectral density functions and checks for
chain maps and chain homotopies.
"""

import logging
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from vnhodge.errors import (
    EigensolveFailureError,
    EmptyWindowError,
    NonpositiveDensityError,
    NotAComplexError,
    ShapeMismatchError,
    ToleranceAmbiguousWarning,
    ValidationFailure,
)
from vnhodge.hmodule import (
    HilbertModule,
    ModuleMorphism,
    compose,
    dim_tau,
    identity_morphism,
    operator_norm,
    weighted_dimension,
    zero_morphism,
)
from vnhodge.mixins import PandasExportMixin
from vnhodge.utils import check_increasing, max_abs, parallel_map, warn_user
from vnhodge.vna_core import VnAlgebra

logger = logging.getLogger(__name__)

warn = warn_user(lambda warning_info: warning_info)

EPS_PSD = 1e-10
TIE_BAND = 1e-10


def zero_module(A: VnAlgebra) -> HilbertModule:
    return HilbertModule(A, (0,) * len(A))


@dataclass(frozen=True, eq=False)
class HilbertComplex:
    """
    Cochain complex C^0 -> C^1 -> ... -> C^n of Hilbert modules. Build with
    :func:`make_complex` so d o d = 0 is checked.
    """

    modules: tuple[HilbertModule, ...]
    differentials: tuple[ModuleMorphism, ...]

    def __repr__(self):
        name = self.__class__.__name__
        dims = ", ".join(f"{dim_tau(m):.4g}" for m in self.modules)
        return f"{name}(top_degree={self.top_degree}, dim_tau=({dims}))"

    @property
    def algebra(self) -> VnAlgebra:
        return self.modules[0].algebra

    @property
    def top_degree(self) -> int:
        return len(self.modules) - 1

    @property
    def degrees(self) -> range:
        return range(len(self.modules))

    def outgoing(self, p: int) -> ModuleMorphism:
        """d_p : C^p -> C^{p+1}, the zero map into the zero module at the top degree."""
        if p < self.top_degree:
            return self.differentials[p]
        return zero_morphism(self.modules[p], zero_module(self.algebra))

    def incoming(self, p: int) -> ModuleMorphism:
        """d_{p-1} : C^{p-1} -> C^p, the zero map from the zero module at degree 0."""
        if p > 0:
            return self.differentials[p - 1]
        return zero_morphism(zero_module(self.algebra), self.modules[0])

    def differential_norm(self) -> float:
        return max((operator_norm(d) for d in self.differentials), default=0.0)


def d2_tolerance(differentials: Sequence[ModuleMorphism], eps_d2: float | None) -> float:
    if eps_d2 is not None:
        return eps_d2
    norm = max((operator_norm(d) for d in differentials), default=0.0)
    return 1e-10 * max(1.0, norm**2)


def make_complex(
    modules: Sequence[HilbertModule],
    differentials: Sequence[ModuleMorphism],
    eps_d2: float | None = None,
) -> HilbertComplex:
    """
    Build and validate a Hilbert cochain complex.

    Parameters
    ----------
    modules : Sequence[HilbertModule]
        Cochain modules C^0, ..., C^n.
    differentials : Sequence[ModuleMorphism]
        Differentials d_i : C^i -> C^{i+1}, one fewer than there are modules.
    eps_d2 : float, optional
        Largest allowed entry of d_{i+1} d_i. Default 1e-10 * max(1, ||d||^2).

    Returns
    -------
    HilbertComplex

    Raises
    ------
    ShapeMismatchError
        If the differentials do not chain the modules.
    NotAComplexError
        If d_{i+1} d_i does not vanish, with the offending degree and residual.

    """
    modules = tuple(modules)
    differentials = tuple(differentials)
    if not modules:
        raise ValidationFailure("A complex needs at least one module")
    if len(differentials) != len(modules) - 1:
        raise ShapeMismatchError(
            f"{len(modules)} modules need {len(modules) - 1} differentials, "
            f"got {len(differentials)}"
        )
    for i, d in enumerate(differentials):
        if d.source != modules[i] or d.target != modules[i + 1]:
            raise ShapeMismatchError(
                f"Differential {i} does not map C^{i} to C^{i + 1}", degree=i
            )

    tolerance = d2_tolerance(differentials, eps_d2)
    for i in range(len(differentials) - 1):
        residual = compose(differentials[i + 1], differentials[i]).max_entry()
        if residual > tolerance:
            raise NotAComplexError(i, residual, tolerance)
        logger.debug(f"d{i + 1}∘d{i} residual {residual:.3e}")

    return HilbertComplex(modules, differentials)


def laplacian(C: HilbertComplex, p: int) -> ModuleMorphism:
    """
    Hodge Laplacian d_p* d_p + d_{p-1} d_{p-1}* on C^p. At the boundary degrees only
    the defined term enters.
    """
    if p not in C.degrees:
        raise ValidationFailure(f"Degree {p} outside 0..{C.top_degree}", degree=p)
    out = C.outgoing(p)
    inc = C.incoming(p)
    blocks = []
    for a, b in zip(out.blocks, inc.blocks):
        lap = a.conj().T @ a + b @ b.conj().T
        blocks.append(0.5 * (lap + lap.conj().T))
    return ModuleMorphism(C.modules[p], C.modules[p], tuple(blocks))


def block_eigh(
    blocks: Sequence[np.ndarray], vectors: bool = True, jobs: int | None = None
) -> list[tuple[np.ndarray, np.ndarray | None]]:
    """
    Hermitian eigensolve of every block. Blocks of equal shape are stacked and solved
    in one batched call; empty blocks give empty results.
    """
    groups = defaultdict(list)
    for i, block in enumerate(blocks):
        if block.size:
            groups[block.shape].append(i)

    def solve(indices: list[int]):
        stack = np.stack([blocks[i] for i in indices])
        try:
            if vectors:
                return np.linalg.eigh(stack)
            return np.linalg.eigvalsh(stack), None
        except np.linalg.LinAlgError as e:
            raise EigensolveFailureError(
                f"Hermitian eigensolve failed on blocks {indices}: {e}", blocks=indices
            )

    batches = list(groups.values())
    solved = parallel_map(solve, batches, jobs)

    results = [
        (np.zeros(0), np.zeros((0, 0), dtype=complex) if vectors else None)
        for _ in blocks
    ]
    for indices, (values, vecs) in zip(batches, solved):
        for k, i in enumerate(indices):
            results[i] = (values[k], vecs[k] if vectors else None)
    return results


@dataclass(eq=False)
class SpectralData(PandasExportMixin):
    """
    Spectrum of a Laplacian: sorted eigenvalues per block, each carrying the
    nu-weight w_i / n_i. Eigenvectors are kept when requested (used for truncation).
    """

    algebra: VnAlgebra
    degree: int
    eigenvalues: tuple[np.ndarray, ...]
    eigenvectors: tuple[np.ndarray, ...] | None = field(default=None, repr=False)

    @property
    def nu_weights(self) -> np.ndarray:
        return self.algebra.weights / self.algebra.sizes

    @property
    def norm(self) -> float:
        """Largest eigenvalue, i.e. the operator norm of the Laplacian."""
        return max((float(ev[-1]) for ev in self.eigenvalues if ev.size), default=0.0)

    def counts_at_most(self, cutoff: float) -> list[int]:
        return [int(np.searchsorted(ev, cutoff, side="right")) for ev in self.eigenvalues]

    def weighted_count(self, cutoff: float) -> float:
        """nu-weighted number of eigenvalues <= cutoff."""
        return weighted_dimension(self.algebra, self.counts_at_most(cutoff))

    def in_band(self, lower: float, upper: float) -> np.ndarray:
        """All eigenvalues in the open interval (lower, upper)."""
        values = np.concatenate([np.zeros(0), *self.eigenvalues])
        return values[(values > lower) & (values < upper)]

    def has_tie(self, cutoff: float, tie_band: float) -> bool:
        return any(np.any(np.abs(ev - cutoff) <= tie_band) for ev in self.eigenvalues)

    def min_above(self, cutoff: float) -> float:
        above = [ev[ev > cutoff] for ev in self.eigenvalues]
        return min((float(a[0]) for a in above if a.size), default=np.inf)

    def max_at_most(self, cutoff: float) -> float:
        below = [ev[ev <= cutoff] for ev in self.eigenvalues]
        return max((float(b[-1]) for b in below if b.size), default=np.nan)

    @property
    def df(self) -> pd.DataFrame:
        labels = self.algebra.labels
        rows = [
            (labels[i], float(value), float(self.nu_weights[i]))
            for i, ev in enumerate(self.eigenvalues)
            for value in ev
        ]
        return pd.DataFrame(rows, columns=["block", "eigenvalue", "nu_weight"])


def spectrum(
    C: HilbertComplex,
    p: int,
    eps_psd: float = EPS_PSD,
    vectors: bool = False,
    jobs: int | None = None,
) -> SpectralData:
    """
    Block-wise Hermitian eigensolve of the Laplacian in degree p.

    Eigenvalues are returned in ascending order per block. Negative eigenvalues down
    to -eps_psd * max(1, ||Δ||) are rounding noise and clamped to zero.

    Parameters
    ----------
    C : HilbertComplex
        The complex.
    p : int
        Degree.
    eps_psd : float, optional
        Relative clamping band. The default is 1e-10.
    vectors : bool, optional
        Also keep the orthonormal eigenvectors. The default is False.
    jobs : int, optional
        Worker threads for the eigensolves.

    Returns
    -------
    SpectralData

    Raises
    ------
    EigensolveFailureError
        If LAPACK fails or an eigenvalue is clearly negative.

    """
    lap = laplacian(C, p)
    solved = block_eigh(lap.blocks, vectors=vectors, jobs=jobs)
    eigenvalues = [np.asarray(values, dtype=float) for values, _ in solved]

    norm = max((float(ev[-1]) for ev in eigenvalues if ev.size), default=0.0)
    band = eps_psd * max(1.0, norm)
    for i, ev in enumerate(eigenvalues):
        if ev.size and ev[0] < -band:
            raise EigensolveFailureError(
                f"Laplacian block {i} has negative eigenvalue {ev[0]!r}",
                block=i,
                eigenvalue=float(ev[0]),
            )
        eigenvalues[i] = np.where(ev < 0.0, 0.0, ev)

    eigenvectors = tuple(vecs for _, vecs in solved) if vectors else None
    return SpectralData(C.algebra, p, tuple(eigenvalues), eigenvectors)


def null_tolerance(spec: SpectralData, eps_null: float | None) -> float:
    return eps_null if eps_null is not None else 1e-8 * (1.0 + spec.norm)


def betti(
    C: HilbertComplex,
    p: int,
    eps_null: float | None = None,
    spec: SpectralData | None = None,
) -> float:
    """
    Von Neumann Betti number: dim_tau of the kernel of the Laplacian in degree p.

    Eigenvalues <= eps_null count as kernel. A ToleranceAmbiguousWarning is issued when
    an eigenvalue lies in (eps_null, 10 eps_null), where the classification is
    unreliable.

    Parameters
    ----------
    C : HilbertComplex
        The complex.
    p : int
        Degree.
    eps_null : float, optional
        Kernel threshold. Default 1e-8 * (1 + ||Δ||).
    spec : SpectralData, optional
        Precomputed spectrum of degree p.

    Returns
    -------
    float

    Examples
    --------
    >>> C = assemble_cochain_complex(circle, regular_cyclic_bundle(2))
    >>> betti(C, 0)
    0.5

    """
    spec = spec if spec is not None else spectrum(C, p)
    tolerance = null_tolerance(spec, eps_null)
    if not tolerance > 0:
        raise ValidationFailure(f"eps_null must be positive, got {tolerance}")
    ambiguous = spec.in_band(tolerance, 10 * tolerance)
    if ambiguous.size:
        warn(
            f"Degree {p}: {ambiguous.size} eigenvalue(s) in ({tolerance:.2e}, "
            f"{10 * tolerance:.2e}), kernel classification is ambiguous",
            category=ToleranceAmbiguousWarning,
        )
    return spec.weighted_count(tolerance)


@dataclass(eq=False)
class DensityFunction(PandasExportMixin):
    """
    Spectral density function F(λ) = tau(E_λ) on a grid of cut-offs. ``ties`` flags
    grid points with an eigenvalue within the tie band of λ; such eigenvalues are
    counted.
    """

    lambdas: np.ndarray
    values: np.ndarray
    ties: np.ndarray
    total: float
    degree: int = 0

    @property
    def df(self) -> pd.DataFrame:
        return pd.DataFrame({"lambda": self.lambdas, "F": self.values})

    def __call__(self, lam: float) -> float:
        """Value at a grid point (the largest grid point <= lam)."""
        idx = int(np.searchsorted(self.lambdas, lam, side="right")) - 1
        if idx < 0:
            raise ValueError(f"{lam} lies below the grid")
        return float(self.values[idx])


def spectral_density(
    C: HilbertComplex,
    p: int,
    lambda_grid: Sequence[float],
    tie_band: float = TIE_BAND,
    spec: SpectralData | None = None,
) -> DensityFunction:
    """
    Spectral density function of the Laplacian in degree p: the nu-weighted number of
    eigenvalues in the closed interval [0, λ] for every λ of the grid.

    Parameters
    ----------
    C : HilbertComplex
        The complex.
    p : int
        Degree.
    lambda_grid : Sequence[float]
        Positive, strictly increasing cut-offs.
    tie_band : float, optional
        Eigenvalues within this distance of λ are counted and flagged. The default
        is 1e-10.
    spec : SpectralData, optional
        Precomputed spectrum of degree p.

    Returns
    -------
    DensityFunction

    """
    grid = np.asarray(lambda_grid, dtype=float)
    try:
        check_increasing(grid, "lambda grid", positive=True)
    except ValueError as e:
        raise ValidationFailure(str(e))

    spec = spec if spec is not None else spectrum(C, p)
    values = np.array([spec.weighted_count(lam + tie_band) for lam in grid])
    ties = np.array([spec.has_tie(lam, tie_band) for lam in grid], dtype=bool)
    return DensityFunction(grid, values, ties, dim_tau(C.modules[p]), p)


class NsFit(NamedTuple):
    slope: float
    r2: float
    points: int


def ns_exponent(F: DensityFunction, b: float, window: tuple[float, float]) -> NsFit:
    """
    Near-zero exponent of a density function: least-squares slope of log(F(λ) - b)
    against log λ over the grid points in ``window``. The raw density slope is
    reported (not its double).

    Parameters
    ----------
    F : DensityFunction
        Density function on a grid.
    b : float
        Kernel part to subtract, usually the Betti number.
    window : tuple[float, float]
        Closed interval (λ_lo, λ_hi) of grid points used in the fit.

    Returns
    -------
    NsFit
        Named tuple (slope, r2, points).

    Raises
    ------
    EmptyWindowError
        If fewer than two grid points fall in the window.
    NonpositiveDensityError
        If F(λ) - b <= 0 somewhere in the window.

    """
    lo, hi = window
    mask = (F.lambdas >= lo) & (F.lambdas <= hi)
    if mask.sum() < 2:
        raise EmptyWindowError(
            f"Window [{lo}, {hi}] holds {int(mask.sum())} grid point(s), need 2",
            window=[lo, hi],
        )
    excess = F.values[mask] - b
    if np.any(excess <= 0):
        raise NonpositiveDensityError(
            f"F(λ) - b is not positive on the window [{lo}, {hi}]",
            minimum=float(excess.min()),
        )
    x = np.log(F.lambdas[mask])
    y = np.log(excess)
    if np.ptp(y) == 0.0:
        return NsFit(0.0, 1.0, int(mask.sum()))
    fit = stats.linregress(x, y)
    return NsFit(float(fit.slope), float(fit.rvalue**2), int(mask.sum()))


@dataclass(frozen=True, eq=False)
class ChainMap:
    """Per-degree morphisms f_i : C^i -> C'^i."""

    source: HilbertComplex
    target: HilbertComplex
    maps: tuple[ModuleMorphism, ...]

    def __post_init__(self):
        if len(self.maps) != len(self.source.modules) or len(self.maps) != len(
            self.target.modules
        ):
            raise ShapeMismatchError("Chain map needs one morphism per degree")
        for i, f in enumerate(self.maps):
            if f.source != self.source.modules[i] or f.target != self.target.modules[i]:
                raise ShapeMismatchError(
                    f"Chain map component {i} does not map C^{i} to C'^{i}", degree=i
                )

    def __sub__(self, other: "ChainMap") -> "ChainMap":
        return ChainMap(
            self.source, self.target, tuple(a - b for a, b in zip(self.maps, other.maps))
        )

    def __matmul__(self, other: "ChainMap") -> "ChainMap":
        return ChainMap(
            other.source,
            self.target,
            tuple(compose(a, b) for a, b in zip(self.maps, other.maps)),
        )


@dataclass(frozen=True, eq=False)
class ChainHomotopy:
    """
    Per-degree morphisms T_i : C^i -> C'^{i-1}; T_0 maps into the zero module.
    """

    source: HilbertComplex
    target: HilbertComplex
    maps: tuple[ModuleMorphism, ...]

    def __post_init__(self):
        if len(self.maps) != len(self.source.modules):
            raise ShapeMismatchError("Homotopy needs one morphism per degree")
        for i, T in enumerate(self.maps):
            expected = (
                self.target.modules[i - 1]
                if i > 0
                else zero_module(self.target.algebra)
            )
            if T.source != self.source.modules[i] or T.target != expected:
                raise ShapeMismatchError(
                    f"Homotopy component {i} does not map C^{i} to C'^{i - 1}",
                    degree=i,
                )


def identity_chain_map(C: HilbertComplex) -> ChainMap:
    return ChainMap(C, C, tuple(identity_morphism(m) for m in C.modules))


def zero_homotopy(C: HilbertComplex, C_prime: HilbertComplex) -> ChainHomotopy:
    targets = (zero_module(C_prime.algebra),) + C_prime.modules[:-1]
    return ChainHomotopy(
        C, C_prime, tuple(zero_morphism(s, t) for s, t in zip(C.modules, targets))
    )


def verify_chain_map(
    f: ChainMap, C: HilbertComplex | None = None, C_prime: HilbertComplex | None = None
) -> float:
    """
    Largest entry of d'_i f_i - f_{i+1} d_i over all degrees.

    Raises
    ------
    ShapeMismatchError
        If the given complexes are not the source and target of ``f``.
    """
    C = C if C is not None else f.source
    C_prime = C_prime if C_prime is not None else f.target
    if C is not f.source and C.modules != f.source.modules:
        raise ShapeMismatchError("Chain map source differs from the given complex")
    if C_prime is not f.target and C_prime.modules != f.target.modules:
        raise ShapeMismatchError("Chain map target differs from the given complex")

    residual = 0.0
    for i in range(C.top_degree):
        lhs = compose(C_prime.differentials[i], f.maps[i])
        rhs = compose(f.maps[i + 1], C.differentials[i])
        residual = max(residual, (lhs - rhs).max_entry())
    return residual


def homotopy_residuals(f: ChainMap, g: ChainMap, T: ChainHomotopy) -> list[float]:
    """Per-degree largest entry of f_i - g_i - d'_{i-1} T_i - T_{i+1} d_i."""
    if f.source.modules != g.source.modules or f.target.modules != g.target.modules:
        raise ShapeMismatchError("Chain maps have different source or target")
    C, C_prime = f.source, f.target
    residuals = []
    for i in C.degrees:
        diff = f.maps[i] - g.maps[i]
        if i > 0:
            diff = diff - compose(C_prime.differentials[i - 1], T.maps[i])
        if i < C.top_degree:
            diff = diff - compose(T.maps[i + 1], C.differentials[i])
        residuals.append(diff.max_entry())
    return residuals


def verify_homotopy(f: ChainMap, g: ChainMap, T: ChainHomotopy) -> float:
    """
    Largest residual of the homotopy identity f - g = d'T + Td over all degrees.

    Raises
    ------
    ShapeMismatchError
        If the chain maps or the homotopy do not share source and target.
    """
    return max(homotopy_residuals(f, g, T), default=0.0)


class EulerCharacteristic(NamedTuple):
    from_modules: float
    from_betti: float


def euler_characteristic(
    C: HilbertComplex, eps_null: float | None = None
) -> EulerCharacteristic:
    """Alternating sums of dim_tau C^p and of the Betti numbers; equal by Hodge theory."""
    from_modules = sum((-1) ** p * dim_tau(m) for p, m in enumerate(C.modules))
    from_betti = sum((-1) ** p * betti(C, p, eps_null) for p in C.degrees)
    return EulerCharacteristic(float(from_modules), float(from_betti))


def hodge_symmetry_residual(C: HilbertComplex, p: int) -> float:
    """
    Largest difference between the nonzero spectra of d_p* d_p on C^p and of
    d_p d_p* on C^{p+1}. Per block the top min(m, m') eigenvalues of both coincide.
    """
    d = C.outgoing(p)
    residual = 0.0
    for block in d.blocks:
        if not block.size:
            continue
        rank_bound = min(block.shape)
        upper = np.linalg.eigvalsh(block.conj().T @ block)[::-1][:rank_bound]
        lower = np.linalg.eigvalsh(block @ block.conj().T)[::-1][:rank_bound]
        residual = max(residual, float(np.max(np.abs(upper - lower))))
    return residual


def conjugate_complex(
    C: HilbertComplex, maps: Sequence[ModuleMorphism], eps_d2: float | None = None
) -> HilbertComplex:
    """
    Isomorphic complex with differentials S_{p+1} d_p S_p^{-1} for invertible
    morphisms S_p : C^p -> D^p.
    """
    if len(maps) != len(C.modules):
        raise ShapeMismatchError("Need one invertible map per degree")
    inverses = []
    for p, S in enumerate(maps):
        if S.source != C.modules[p]:
            raise ShapeMismatchError(f"Map {p} does not start at C^{p}", degree=p)
        inverses.append(
            ModuleMorphism(
                S.target,
                S.source,
                tuple(np.linalg.inv(b) if b.size else b.T.copy() for b in S.blocks),
            )
        )
    differentials = [
        compose(maps[p + 1], compose(d, inverses[p]))
        for p, d in enumerate(C.differentials)
    ]
    return make_complex([S.target for S in maps], differentials, eps_d2)


def betti_numbers(C: HilbertComplex, eps_null: float | None = None) -> list[float]:
    return [betti(C, p, eps_null) for p in C.degrees]


def max_difference(a: Sequence[float], b: Sequence[float]) -> float:
    return max_abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
