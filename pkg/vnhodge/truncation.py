"""
Spectral truncation of Hilbert complexes.

For a cut-off λ the eigenvectors of the Laplacians with eigenvalue <= λ span a
subcomplex L_λ of finitely generated modules. The spectral projection E_λ is a chain
map, and the Green operator G (the inverse Laplacian off L_λ) yields the homotopy
K = d* G with I - E_λ = dK + Kd, so L_λ is a finite approximation of the complex.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from vnhodge.errors import (
    BoundaryTieError,
    BoundaryTieWarning,
    CertificateFailedError,
    GapTooSmallError,
    ValidationFailure,
)
from vnhodge.hcomplex import (
    TIE_BAND,
    ChainHomotopy,
    ChainMap,
    HilbertComplex,
    SpectralData,
    homotopy_residuals,
    identity_chain_map,
    make_complex,
    spectrum,
    zero_module,
)
from vnhodge.hmodule import (
    HilbertModule,
    ModuleMorphism,
    adjoint_morphism,
    compose,
    operator_norm,
    weighted_dimension,
    zero_morphism,
)
from vnhodge.mixins import JsonExportMixin
from vnhodge.utils import warn_user

logger = logging.getLogger(__name__)

warn = warn_user(lambda warning_info: warning_info)

GAP_TOL = 1e-8
CHAIN_MAP_TOLERANCE = 1e-8


def _check_cutoff(lam: float):
    if not lam > 0:
        raise ValidationFailure(f"Cut-off λ must be positive, got {lam}", lam=lam)


def _nearest_tie(spec: SpectralData, lam: float, tie_band: float) -> float:
    values = np.concatenate([np.zeros(0), *spec.eigenvalues])
    close = values[np.abs(values - lam) <= tie_band]
    return float(close[np.argmin(np.abs(close - lam))])


def _check_ties(spec: SpectralData, lam: float, tie_band: float, allow_ties: bool):
    if not spec.has_tie(lam, tie_band):
        return
    eigenvalue = _nearest_tie(spec, lam, tie_band)
    if not allow_ties:
        raise BoundaryTieError(eigenvalue, lam, spec.degree)
    warn(
        f"Degree {spec.degree}: eigenvalue {eigenvalue!r} ties with cut-off {lam!r}, "
        "counted as small",
        category=BoundaryTieWarning,
    )


def _small_basis(
    spec: SpectralData, lam: float, tie_band: float
) -> tuple[list[int], list[np.ndarray]]:
    counts = spec.counts_at_most(lam + tie_band)
    bases = [vecs[:, :k] for vecs, k in zip(spec.eigenvectors, counts)]
    return counts, bases


def _projection_from_basis(M: HilbertModule, bases: Sequence[np.ndarray]):
    return ModuleMorphism(M, M, tuple(V @ V.conj().T for V in bases))


def spectral_projection(
    C: HilbertComplex,
    p: int,
    lam: float,
    tie_band: float = TIE_BAND,
    spec: SpectralData | None = None,
) -> ModuleMorphism:
    """
    Orthogonal projection E_λ onto the eigenvectors of the Laplacian in degree p with
    eigenvalue in the closed interval [0, λ].

    Parameters
    ----------
    C : HilbertComplex
        The complex.
    p : int
        Degree.
    lam : float
        Positive cut-off.
    tie_band : float, optional
        Eigenvalues within this distance of λ count as small and raise a
        BoundaryTieWarning. The default is 1e-10.
    spec : SpectralData, optional
        Precomputed spectrum of degree p with eigenvectors.

    Returns
    -------
    ModuleMorphism
        Endomorphism of C^p.

    """
    _check_cutoff(lam)
    if spec is None or spec.eigenvectors is None:
        spec = spectrum(C, p, vectors=True)
    _check_ties(spec, lam, tie_band, allow_ties=True)
    _, bases = _small_basis(spec, lam, tie_band)
    return _projection_from_basis(C.modules[p], bases)


@dataclass(eq=False)
class TruncatedComplex:
    """
    Small-eigenvalue subcomplex L_λ in an explicit orthonormal eigenbasis.

    Attributes
    ----------
    parent : HilbertComplex
        The truncated complex.
    lam : float
        Cut-off.
    bases : tuple
        Per degree, per block the orthonormal basis of L_λ (columns).
    complex : HilbertComplex
        L_λ with the induced differentials V_{p+1}* d_p V_p.
    inclusion : ChainMap
        i_λ : L_λ -> C.
    restriction : ChainMap
        C -> L_λ, the adjoint of the inclusion.
    projection : ChainMap
        E_λ = i_λ i_λ* as a self map of C.
    dims : list[float]
        dim_tau L_λ^p per degree.
    chain_map_residual : float
        Residual of E_λ d - d E_λ.
    d_norms : list[float]
        Operator norm of the induced differential per degree.
    """

    parent: HilbertComplex
    lam: float
    bases: tuple
    complex: HilbertComplex
    inclusion: ChainMap
    restriction: ChainMap
    projection: ChainMap
    dims: list[float]
    chain_map_residual: float
    d_norms: list[float]


def degree_spectra(C: HilbertComplex, jobs: int | None = None) -> list[SpectralData]:
    return [spectrum(C, p, vectors=True, jobs=jobs) for p in C.degrees]


def _commutation_residuals(C: HilbertComplex, P: ChainMap) -> list[float]:
    """Largest entry of d_p P_p - P_{p+1} d_p for every differential."""
    return [
        (compose(d, P.maps[p]) - compose(P.maps[p + 1], d)).max_entry()
        for p, d in enumerate(C.differentials)
    ]


def truncate(
    C: HilbertComplex,
    lam: float,
    tie_band: float = TIE_BAND,
    allow_ties: bool = False,
    eps_d2: float | None = None,
    spectra: Sequence[SpectralData] | None = None,
    jobs: int | None = None,
    strict: bool = False,
) -> TruncatedComplex:
    """
    Restrict the complex to the span of Laplacian eigenvectors with eigenvalue <= λ.

    Parameters
    ----------
    C : HilbertComplex
        Complex to truncate.
    lam : float
        Positive cut-off.
    tie_band : float, optional
        Eigenvalues within this distance of λ are boundary ties. The default is 1e-10.
    allow_ties : bool, optional
        Count tied eigenvalues as small with a warning instead of raising. The
        default is False.
    eps_d2 : float, optional
        d o d tolerance for the induced complex.
    spectra : Sequence[SpectralData], optional
        Precomputed spectra with eigenvectors, one per degree.
    jobs : int, optional
        Worker threads for the eigensolves.
    strict : bool, optional
        Raise CertificateFailedError instead of warning when the spectral
        projection does not commute with d. The default is False.

    Returns
    -------
    TruncatedComplex

    Raises
    ------
    BoundaryTieError
        If an eigenvalue lies within the tie band of λ and ties are not allowed.
    NotAComplexError
        If the induced differentials do not square to zero.
    CertificateFailedError
        If ``strict`` and the projection fails to be a chain map.

    """
    _check_cutoff(lam)
    spectra = list(spectra) if spectra is not None else degree_spectra(C, jobs)
    A = C.algebra

    modules, bases, dims = [], [], []
    for spec in spectra:
        _check_ties(spec, lam, tie_band, allow_ties)
        counts, basis = _small_basis(spec, lam, tie_band)
        modules.append(HilbertModule(A, tuple(counts)))
        bases.append(tuple(basis))
        dims.append(weighted_dimension(A, counts))

    induced = []
    for p, d in enumerate(C.differentials):
        blocks = tuple(
            V_out.conj().T @ block @ V_in
            for block, V_in, V_out in zip(d.blocks, bases[p], bases[p + 1])
        )
        induced.append(ModuleMorphism(modules[p], modules[p + 1], blocks))
    small = make_complex(modules, induced, eps_d2)

    inclusion = ChainMap(
        small,
        C,
        tuple(ModuleMorphism(L, M, basis) for L, M, basis in zip(modules, C.modules, bases)),
    )
    restriction = ChainMap(C, small, tuple(adjoint_morphism(i) for i in inclusion.maps))
    projection = ChainMap(
        C,
        C,
        tuple(
            _projection_from_basis(M, basis) for M, basis in zip(C.modules, bases)
        ),
    )

    residuals = _commutation_residuals(C, projection)
    residual = max(residuals, default=0.0)
    if strict and residual > CHAIN_MAP_TOLERANCE:
        degree = int(np.argmax(residuals))
        raise CertificateFailedError(degree, residual, CHAIN_MAP_TOLERANCE)
    if residual > CHAIN_MAP_TOLERANCE:
        warn(
            f"Spectral projection at λ={lam!r} commutes with d only up to {residual:.3e}"
        )
    d_norms = [operator_norm(d) for d in induced]
    logger.debug(f"Truncated at λ={lam!r}: dims {dims}, induced norms {d_norms}")

    return TruncatedComplex(
        C,
        float(lam),
        tuple(bases),
        small,
        inclusion,
        restriction,
        projection,
        dims,
        residual,
        d_norms,
    )


def _green_from_spectrum(
    M: HilbertModule, spec: SpectralData, lam: float, gap_tol: float, tie_band: float
) -> tuple[ModuleMorphism, float]:
    cutoff = lam + tie_band
    min_large = spec.min_above(cutoff)
    gap = min_large - lam
    if gap < gap_tol:
        raise GapTooSmallError(gap, gap_tol)

    blocks = []
    for values, vecs in zip(spec.eigenvalues, spec.eigenvectors):
        large = values > cutoff
        V = vecs[:, large]
        blocks.append((V / values[large]) @ V.conj().T)
    return ModuleMorphism(M, M, tuple(blocks)), gap


def green_operator(
    C: HilbertComplex,
    p: int,
    lam: float,
    gap_tol: float = GAP_TOL,
    tie_band: float = TIE_BAND,
    spec: SpectralData | None = None,
) -> ModuleMorphism:
    """
    Green operator of the Laplacian in degree p: zero on the eigenspaces with
    eigenvalue <= λ and 1/μ on an eigenvector of eigenvalue μ > λ, so that
    GΔ = ΔG = I - E_λ.

    Raises
    ------
    GapTooSmallError
        If the smallest eigenvalue above λ is closer to λ than ``gap_tol``.
    """
    _check_cutoff(lam)
    if spec is None or spec.eigenvectors is None:
        spec = spectrum(C, p, vectors=True)
    green, _ = _green_from_spectrum(C.modules[p], spec, lam, gap_tol, tie_band)
    return green


@dataclass(eq=False)
class HomotopyCertificate(JsonExportMixin):
    """
    Certificate for the homotopy identity I - E_λ = dK + Kd with K^p = d_{p-1}* G^p.
    """

    lam: float
    green: tuple[ModuleMorphism, ...]
    homotopy: ChainHomotopy
    projection: ChainMap
    residuals: list[float]
    dims: list[float]
    gap: float
    tolerance: float

    @property
    def success(self) -> bool:
        return all(r <= self.tolerance for r in self.residuals)

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "residuals": list(self.residuals),
            "dims": list(self.dims),
            "gap": self.gap,
        }


def homotopy_certificate(
    C: HilbertComplex,
    lam: float,
    gap_tol: float = GAP_TOL,
    eps_hom: float | None = None,
    tie_band: float = TIE_BAND,
    allow_ties: bool = False,
    strict: bool = True,
    spectra: Sequence[SpectralData] | None = None,
    jobs: int | None = None,
) -> HomotopyCertificate:
    """
    Build the truncation homotopy K = d* G and measure the residual of
    I - E_λ - dK - Kd in every degree.

    Parameters
    ----------
    C : HilbertComplex
        The complex.
    lam : float
        Positive cut-off.
    gap_tol : float, optional
        Minimal gap above λ. The default is 1e-8.
    eps_hom : float, optional
        Residual tolerance. Default 1e-9 * (1 + ||d|| ||G||).
    tie_band : float, optional
        Boundary tie band around λ. The default is 1e-10.
    allow_ties : bool, optional
        Count tied eigenvalues as small instead of raising. The default is False.
    strict : bool, optional
        Raise CertificateFailedError when a residual exceeds the tolerance. The
        default is True.
    spectra : Sequence[SpectralData], optional
        Precomputed spectra with eigenvectors.
    jobs : int, optional
        Worker threads for the eigensolves.

    Returns
    -------
    HomotopyCertificate

    Raises
    ------
    GapTooSmallError
        If the spectral gap above λ is below ``gap_tol`` in some degree.
    CertificateFailedError
        If ``strict`` and the identity fails in some degree.

    Examples
    --------
    >>> certificate = homotopy_certificate(C, 1.0)
    >>> certificate.to_json()

    """
    _check_cutoff(lam)
    spectra = list(spectra) if spectra is not None else degree_spectra(C, jobs)
    A = C.algebra

    greens, gaps, dims, projections = [], [], [], []
    for M, spec in zip(C.modules, spectra):
        _check_ties(spec, lam, tie_band, allow_ties)
        green, gap = _green_from_spectrum(M, spec, lam, gap_tol, tie_band)
        counts, basis = _small_basis(spec, lam, tie_band)
        greens.append(green)
        gaps.append(gap)
        dims.append(weighted_dimension(A, counts))
        projections.append(_projection_from_basis(M, basis))

    homotopy_maps = [zero_morphism(C.modules[0], zero_module(A))]
    for p in range(1, len(C.modules)):
        homotopy_maps.append(compose(adjoint_morphism(C.differentials[p - 1]), greens[p]))
    homotopy = ChainHomotopy(C, C, tuple(homotopy_maps))
    projection = ChainMap(C, C, tuple(projections))

    residuals = homotopy_residuals(identity_chain_map(C), projection, homotopy)

    if eps_hom is None:
        green_norm = max((operator_norm(G) for G in greens), default=0.0)
        eps_hom = 1e-9 * (1.0 + C.differential_norm() * green_norm)

    certificate = HomotopyCertificate(
        float(lam),
        tuple(greens),
        homotopy,
        projection,
        residuals,
        dims,
        float(min(gaps, default=np.inf)),
        eps_hom,
    )
    logger.debug(f"Certificate at λ={lam!r}: residuals {residuals}, gap {certificate.gap}")
    if strict and not certificate.success:
        degree = int(np.argmax(residuals))
        raise CertificateFailedError(degree, residuals[degree], eps_hom)
    return certificate
