"""
Finite von Neumann algebras as finite direct sums of matrix factors.

A block with matrix size n, atom measure mu and fiber trace normalization rho
contributes the weight w = rho * mu to the normalized trace

    tau(a) = sum_i w_i * tr(a_i) / n_i,

so tau(1) = sum_i w_i = 1 is required. Continuum direct integrals are represented by
sampled atom grids, see :func:`sampled_circle_algebra`.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from vnhodge.errors import (
    EmptyAlgebraError,
    NotNormalizedError,
    ShapeMismatchError,
    ValidationFailure,
)
from vnhodge.utils import inform_user

logger = logging.getLogger(__name__)

inform = inform_user(lambda info: info)

NORMALIZATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FactorBlock:
    """
    One atom of the direct integral: the factor M_n(C) with measure weight ``mu`` and
    fiber trace normalization ``rho``.
    """

    label: str
    n: int
    mu: float
    rho: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValidationFailure(
                f"Block {self.label!r}: matrix size must be a positive integer, got {self.n}",
                block=self.label,
            )
        if not self.mu > 0:
            raise ValidationFailure(
                f"Block {self.label!r}: mu must be positive, got {self.mu}",
                block=self.label,
            )
        if not self.rho > 0:
            raise ValidationFailure(
                f"Block {self.label!r}: rho must be positive, got {self.rho}",
                block=self.label,
            )

    @property
    def weight(self) -> float:
        return self.rho * self.mu


@dataclass(frozen=True)
class VnAlgebra:
    """
    Multi-matrix model of a finite von Neumann algebra. Construct with
    :func:`make_algebra` so the trace normalization is checked.
    """

    blocks: tuple[FactorBlock, ...]

    def __repr__(self):
        name = self.__class__.__name__
        sizes = ", ".join(str(b.n) for b in self.blocks[:8])
        more = ", ..." if len(self.blocks) > 8 else ""
        return f"{name}({len(self.blocks)} blocks, sizes=({sizes}{more}))"

    def __len__(self):
        return len(self.blocks)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(b.label for b in self.blocks)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b.n for b in self.blocks], dtype=int)

    @property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.blocks], dtype=float)

    @property
    def is_factor(self) -> bool:
        return len(self.blocks) == 1

    def identity(self) -> "AlgebraElement":
        return AlgebraElement(
            self, tuple(np.eye(b.n, dtype=complex) for b in self.blocks)
        )

    def zero(self) -> "AlgebraElement":
        return AlgebraElement(
            self, tuple(np.zeros((b.n, b.n), dtype=complex) for b in self.blocks)
        )

    def element(self, blocks: Iterable) -> "AlgebraElement":
        return AlgebraElement(
            self, tuple(np.asarray(b, dtype=complex) for b in blocks)
        )

    def diagonal(self, values: Sequence[complex]) -> "AlgebraElement":
        """Element acting as the scalar ``values[i]`` on block i."""
        return AlgebraElement(
            self,
            tuple(
                complex(v) * np.eye(b.n, dtype=complex)
                for v, b in zip(values, self.blocks, strict=True)
            ),
        )

    def random_element(self, rng: np.random.Generator) -> "AlgebraElement":
        return AlgebraElement(
            self,
            tuple(
                rng.standard_normal((b.n, b.n)) + 1j * rng.standard_normal((b.n, b.n))
                for b in self.blocks
            ),
        )


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    algebra: VnAlgebra
    blocks: tuple[np.ndarray, ...]

    def __post_init__(self):
        _check_block_shapes(self.algebra, self.blocks)

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(
            self.algebra, tuple(a + b for a, b in zip(self.blocks, other.blocks))
        )

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        return AlgebraElement(
            self.algebra, tuple(a - b for a, b in zip(self.blocks, other.blocks))
        )

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(-a for a in self.blocks))

    def __mul__(self, scalar: complex) -> "AlgebraElement":
        return AlgebraElement(self.algebra, tuple(scalar * a for a in self.blocks))

    __rmul__ = __mul__

    def __matmul__(self, other: "AlgebraElement") -> "AlgebraElement":
        _check_block_shapes(self.algebra, other.blocks)
        return AlgebraElement(
            self.algebra, tuple(a @ b for a, b in zip(self.blocks, other.blocks))
        )

    def max_entry(self) -> float:
        return max((float(np.max(np.abs(a))) for a in self.blocks), default=0.0)


def _check_block_shapes(algebra: VnAlgebra, blocks: Sequence[np.ndarray]):
    if len(blocks) != len(algebra.blocks):
        raise ShapeMismatchError(
            f"Expected {len(algebra.blocks)} blocks, got {len(blocks)}",
            expected=len(algebra.blocks),
            got=len(blocks),
        )
    for i, (factor, block) in enumerate(zip(algebra.blocks, blocks)):
        if np.shape(block) != (factor.n, factor.n):
            raise ShapeMismatchError(
                f"Block {i} ({factor.label!r}) has shape {np.shape(block)}, "
                f"expected {(factor.n, factor.n)}",
                block=i,
            )


def weighted_block_sum(weights: Sequence[float], values: Sequence) -> complex | float:
    """
    Sum ``weights[i] * values[i]`` in block order. The fixed order keeps results
    bit-identical between runs and parallelism settings.
    """
    total = 0.0
    for w, v in zip(weights, values, strict=True):
        total += w * v
    return total


def make_algebra(blocks: Iterable[FactorBlock], normalize: bool = False) -> VnAlgebra:
    """
    Build a finite von Neumann algebra from factor blocks and check the trace
    normalization sum_i rho_i * mu_i = 1.

    Parameters
    ----------
    blocks : Iterable[FactorBlock]
        Nonempty sequence of blocks with unique labels.
    normalize : bool, optional
        If True, rescale every mu by the same factor so the weights sum to 1 instead
        of rejecting the input. The default is False.

    Returns
    -------
    VnAlgebra

    Raises
    ------
    EmptyAlgebraError
        If no blocks are given.
    NotNormalizedError
        If the weights do not sum to 1 within 1e-12 and ``normalize`` is False.

    Examples
    --------
    The group von Neumann algebra of Z_2 as the direct sum of its two characters:

    >>> make_algebra([FactorBlock("chi0", 1, 0.5), FactorBlock("chi1", 1, 0.5)])

    """
    blocks = tuple(blocks)
    if not blocks:
        raise EmptyAlgebraError("An algebra needs at least one block")

    labels = [b.label for b in blocks]
    if len(set(labels)) != len(labels):
        duplicates = sorted({lab for lab in labels if labels.count(lab) > 1})
        raise ValidationFailure(
            f"Block labels must be unique, duplicated: {duplicates}",
            duplicates=duplicates,
        )

    total = math.fsum(b.weight for b in blocks)
    if normalize and total != 1.0:
        inform(f"Rescaling all block measures by 1/{total!r} to normalize the trace")
        blocks = tuple(
            FactorBlock(b.label, b.n, b.mu / total, b.rho) for b in blocks
        )
        total = math.fsum(b.weight for b in blocks)

    if abs(total - 1.0) > NORMALIZATION_TOLERANCE:
        raise NotNormalizedError(total)

    return VnAlgebra(blocks)


def trace(A: VnAlgebra, a: AlgebraElement) -> complex:
    """
    Normalized trace tau(a) = sum_i w_i * tr(a_i) / n_i.

    Parameters
    ----------
    A : VnAlgebra
        Algebra the element belongs to.
    a : AlgebraElement
        Element to take the trace of.

    Returns
    -------
    complex

    Raises
    ------
    ShapeMismatchError
        If the element's blocks do not match the algebra.

    """
    _check_block_shapes(A, a.blocks)
    values = [np.trace(block) / factor.n for factor, block in zip(A.blocks, a.blocks)]
    return complex(weighted_block_sum(A.weights, values))


def adjoint(A: VnAlgebra, a: AlgebraElement) -> AlgebraElement:
    """Involution a -> a*, the conjugate transpose of every block."""
    _check_block_shapes(A, a.blocks)
    return AlgebraElement(A, tuple(block.conj().T for block in a.blocks))


def cstar_norm(A: VnAlgebra, a: AlgebraElement) -> float:
    """
    C*-norm of an element: the largest singular value over all blocks, obtained from
    a Hermitian eigensolve of a*a per block.
    """
    _check_block_shapes(A, a.blocks)
    norm = 0.0
    for block in a.blocks:
        gram = block.conj().T @ block
        top = float(np.linalg.eigvalsh(gram)[-1])
        norm = max(norm, math.sqrt(max(top, 0.0)))
    return norm


def regular_cyclic_algebra(order: int) -> VnAlgebra:
    """
    Group von Neumann algebra of Z_n in its Fourier picture: ``order`` one-dimensional
    atoms (the characters) of weight 1/n.
    """
    if order < 1:
        raise ValidationFailure(f"Group order must be positive, got {order}")
    return make_algebra(
        [FactorBlock(f"chi{j}", 1, 1.0 / order, 1.0) for j in range(order)]
    )


def sample_frequencies(fibers: int) -> np.ndarray:
    """Midpoint grid omega_j = (j + 1/2) / N on the dual circle of Z."""
    return (np.arange(fibers) + 0.5) / fibers


def sampled_circle_algebra(fibers: int) -> VnAlgebra:
    """
    Sampled direct integral over the dual circle of Z (the group von Neumann algebra
    L^inf(S^1) of Z) on a midpoint grid of ``fibers`` atoms.
    """
    if fibers < 1:
        raise ValidationFailure(f"Number of fibers must be positive, got {fibers}")
    return make_algebra(
        [FactorBlock(f"w{j}", 1, 1.0 / fibers, 1.0) for j in range(fibers)]
    )
