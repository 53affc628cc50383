"""
Witten deformation of cellular cochain complexes.

A cell function F deforms δ by conjugation with the diagonal weights e^{tF}, the
combinatorial shadow of d_t = e^{-tf} d e^{tf}. Entries between matched cells of a
Forman-style pairing stay large while the others decay, so for large t the spectrum
splits into a small cluster of the size of the Morse complex and a large part.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

import numpy as np
import pandas as pd
import xarray as xr
from scipy import stats

from vnhodge.errors import (
    MissingCellValueError,
    NonpositiveTError,
    ValidationFailure,
)
from vnhodge.flatcw import CellularComplex, CwComplexData
from vnhodge.hcomplex import (
    TIE_BAND,
    ChainMap,
    identity_chain_map,
    spectrum,
    verify_chain_map,
)
from vnhodge.hmodule import HilbertModule, ModuleMorphism, dim_tau, weighted_dimension
from vnhodge.mixins import PandasExportMixin
from vnhodge.truncation import (
    CHAIN_MAP_TOLERANCE,
    GAP_TOL,
    HomotopyCertificate,
    TruncatedComplex,
    degree_spectra,
    homotopy_certificate,
    truncate,
)
from vnhodge.utils import check_increasing, parallel_map, warn_user

logger = logging.getLogger(__name__)

warn = warn_user(lambda warning_info: warning_info)

RATIO_FLOOR = 1e-14
SELF_INDEXING_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MorseData:
    """
    Cell function with a Forman-style matching.

    Attributes
    ----------
    cells : tuple[tuple[str, ...], ...]
        Cells per dimension of the underlying complex.
    values : Mapping[str, float]
        F(cell) for every cell.
    matching : tuple[tuple[str, str], ...]
        Pairs (p-cell, (p+1)-cell); unmatched cells are critical.
    self_indexing : bool
        F(critical p-cell) = p was requested and checked.
    """

    cells: tuple[tuple[str, ...], ...]
    values: Mapping[str, float]
    matching: tuple[tuple[str, str], ...] = ()
    self_indexing: bool = False

    def critical_cells(self) -> list[list[str]]:
        matched = {cell for pair in self.matching for cell in pair}
        return [[c for c in dim_cells if c not in matched] for dim_cells in self.cells]

    @property
    def df(self) -> pd.DataFrame:
        matched = {cell for pair in self.matching for cell in pair}
        rows = [
            (label, p, float(self.values[label]), label not in matched)
            for p, dim_cells in enumerate(self.cells)
            for label in dim_cells
        ]
        return pd.DataFrame(rows, columns=["cell", "dimension", "value", "critical"])


def make_morse_data(
    X: CwComplexData,
    values: Mapping[str, float],
    matching: Sequence[tuple[str, str]] = (),
    self_indexing: bool = False,
) -> MorseData:
    """
    Validate a cell function and matching against a CW complex.

    Parameters
    ----------
    X : CwComplexData
        The complex.
    values : Mapping[str, float]
        Value of F on every cell.
    matching : Sequence[tuple[str, str]], optional
        Pairs (p-cell, (p+1)-cell) that are adjacent in the incidence data, each cell
        in at most one pair.
    self_indexing : bool, optional
        Require F(critical p-cell) = p. The default is False.

    Returns
    -------
    MorseData

    Raises
    ------
    MissingCellValueError
        If a cell has no value.
    ValidationFailure
        If the matching is not a partial injection of adjacent cells, or the
        self-indexing condition fails.

    """
    dims = X.cell_dimensions
    missing = [c for c in dims if c not in values]
    if missing:
        raise MissingCellValueError(f"No Morse value for cells {missing}", cells=missing)

    adjacent = {
        (inc.target, inc.source)
        for inc in X.incidence
        if any(t.coef != 0 for t in inc.terms)
    }
    seen = set()
    for lower, upper in matching:
        if lower not in dims or upper not in dims:
            raise ValidationFailure(f"Matching uses unknown cell in {(lower, upper)}")
        if dims[upper] != dims[lower] + 1:
            raise ValidationFailure(
                f"Matched cells {lower!r}, {upper!r} are not of dimension p, p+1"
            )
        if (lower, upper) not in adjacent:
            raise ValidationFailure(f"Matched cells {lower!r}, {upper!r} are not adjacent")
        if lower in seen or upper in seen:
            raise ValidationFailure(
                f"Cell in {(lower, upper)} appears in more than one matched pair"
            )
        seen.update((lower, upper))

    morse = MorseData(
        X.cells,
        {c: float(v) for c, v in values.items()},
        tuple((a, b) for a, b in matching),
        self_indexing,
    )
    if self_indexing:
        for p, critical in enumerate(morse.critical_cells()):
            for cell in critical:
                if abs(morse.values[cell] - p) > SELF_INDEXING_TOLERANCE:
                    raise ValidationFailure(
                        f"Critical {p}-cell {cell!r} has value {morse.values[cell]}, "
                        f"not {p}",
                        cell=cell,
                    )
    return morse


def _cell_values(C: CellularComplex, F: MorseData, p: int, block: int) -> np.ndarray:
    m = C.fiber.mult[block]
    return np.repeat([F.values[c] for c in C.cells[p]], m)


def deform(C: CellularComplex, F: MorseData, t: float) -> CellularComplex:
    """
    Witten deformation: entry (σ, τ) of δ is multiplied by e^{t(F(τ) - F(σ))}.

    At t = 0 every factor is exactly 1.0, so the input complex is reproduced bit for
    bit. For every t the result is isomorphic to C.

    Raises
    ------
    MissingCellValueError
        If F misses a cell of the complex.
    """
    if not isinstance(C, CellularComplex) or C.fiber is None:
        raise ValidationFailure("Witten deformation needs a complex assembled from cells")
    missing = [c for dim_cells in C.cells for c in dim_cells if c not in F.values]
    if missing:
        raise MissingCellValueError(f"No Morse value for cells {missing}", cells=missing)

    differentials = []
    for p, d in enumerate(C.differentials):
        blocks = []
        for i, block in enumerate(d.blocks):
            rows = _cell_values(C, F, p + 1, i)
            cols = _cell_values(C, F, p, i)
            factor = np.exp(t * (cols[None, :] - rows[:, None]))
            blocks.append(block * factor)
        differentials.append(ModuleMorphism(d.source, d.target, tuple(blocks)))
    return CellularComplex(C.modules, tuple(differentials), C.cells, C.fiber)


def scale_factor(t: float) -> float:
    """e^t (t/π)^{-1/2}."""
    return math.exp(t) * (t / math.pi) ** -0.5


def scaled_deform(C: CellularComplex, F: MorseData, t: float) -> CellularComplex:
    """
    Deformed complex with every differential multiplied by e^t (t/π)^{-1/2}.

    Raises
    ------
    NonpositiveTError
        If t <= 0.
    """
    if not t > 0:
        raise NonpositiveTError(f"Scaled deformation needs t > 0, got {t}", t=t)
    deformed = deform(C, F, t)
    s = scale_factor(t)
    differentials = tuple(s * d for d in deformed.differentials)
    return CellularComplex(deformed.modules, differentials, C.cells, C.fiber)


class GapReport(PandasExportMixin):
    """
    Small/large splitting of the deformed Laplacian spectra over a t grid.

    ``ds`` has dimensions (t, degree) and variables small_count (nu-weighted count of
    eigenvalues below the split), max_small, min_large and ratio
    (min_large / max(max_small, floor)).
    """

    def __init__(self, ds: xr.Dataset):
        self.ds = ds

    def __getitem__(self, item):
        return self.ds[item]

    def __repr__(self):
        instance = f"{self.__class__.__name__}"
        dimensions = f"Dimensions: {dict(self.ds.sizes)}"
        return f"{instance}\n{dimensions}\nsplit: {self.split}"

    @property
    def split(self) -> float:
        return float(self.ds.attrs["split"])

    @property
    def df(self) -> pd.DataFrame:
        df = self.ds.to_dataframe().reset_index()
        return df[["t", "degree", "small_count", "max_small", "min_large", "ratio"]]

    def decay_slopes(self) -> dict[int, float]:
        """
        Slope of log(max small eigenvalue) against t per degree, using the floored
        values. Negative slopes mean exponential decay of the small cluster.
        """
        slopes = {}
        t = self.ds["t"].values
        for degree in self.ds["degree"].values:
            small = self.ds["max_small"].sel(degree=degree).values
            valid = np.isfinite(small)
            if valid.sum() < 2:
                slopes[int(degree)] = float("nan")
                continue
            y = np.log(np.maximum(small[valid], float(self.ds.attrs["floor"])))
            slopes[int(degree)] = float(stats.linregress(t[valid], y).slope)
        return slopes

    def stable_from(self, expected: Sequence[float], atol: float = 1e-12) -> float:
        """
        Smallest t0 of the grid from which on the small counts equal ``expected`` in
        every degree; NaN if they never settle.
        """
        counts = self.ds["small_count"].values
        matches = np.all(np.abs(counts - np.asarray(expected)[None, :]) <= atol, axis=1)
        t = self.ds["t"].values
        for k in range(len(t)):
            if matches[k:].all():
                return float(t[k])
        return float("nan")

    def to_netcdf(self, file: str | Path, **xr_kwargs):
        """
        Write the report to a netcdf file.

        Parameters
        ----------
        file : str | Path
            Output file.
        **xr_kwargs
            xr.Dataset.to_netcdf keyword arguments.
        """
        self.ds.to_netcdf(file, **xr_kwargs)

    def to_dict(self) -> dict:
        return {
            "command": "witten",
            "split": self.split,
            "decay_slopes": {str(k): v for k, v in self.decay_slopes().items()},
            "rows": self.df.to_dict(orient="records"),
        }


def _scan_point(C, F, t, split, floor):
    Ct = deform(C, F, t)
    rows = []
    for p in Ct.degrees:
        spec = spectrum(Ct, p)
        below = [int(np.searchsorted(ev, split, side="left")) for ev in spec.eigenvalues]
        count = weighted_dimension(Ct.algebra, below)
        small = [ev[:k] for ev, k in zip(spec.eigenvalues, below)]
        large = [ev[k:] for ev, k in zip(spec.eigenvalues, below)]
        max_small = max((float(s[-1]) for s in small if s.size), default=np.nan)
        min_large = min((float(v[0]) for v in large if v.size), default=np.inf)
        denominator = max(0.0 if np.isnan(max_small) else max_small, floor)
        rows.append((count, max_small, min_large, min_large / denominator))
    return rows


def gap_scan(
    C: CellularComplex,
    F: MorseData,
    t_grid: Sequence[float],
    split: float = 1.0,
    floor: float = RATIO_FLOOR,
    jobs: int | None = None,
) -> GapReport:
    """
    Eigensolve the deformed Laplacians in every degree for every t of the grid and
    report the small/large splitting at ``split``.

    Parameters
    ----------
    C : CellularComplex
        Complex assembled from cells.
    F : MorseData
        Cell function.
    t_grid : Sequence[float]
        Strictly increasing deformation parameters.
    split : float, optional
        Eigenvalues below split are small. The default is 1.
    floor : float, optional
        Floor for the small eigenvalue in the gap ratio. The default is 1e-14.
    jobs : int, optional
        Worker threads; the t grid points are independent.

    Returns
    -------
    GapReport

    """
    grid = np.asarray(t_grid, dtype=float)
    try:
        check_increasing(grid, "t grid")
    except ValueError as e:
        raise ValidationFailure(str(e))

    points = parallel_map(lambda t: _scan_point(C, F, t, split, floor), grid, jobs)
    data = np.array(points, dtype=float)  # (t, degree, variable)
    coords = {"t": grid, "degree": np.arange(len(C.modules))}
    names = ["small_count", "max_small", "min_large", "ratio"]
    ds = xr.Dataset(
        {name: (("t", "degree"), data[:, :, k]) for k, name in enumerate(names)},
        coords=coords,
        attrs={"split": float(split), "floor": float(floor)},
    )
    return GapReport(ds)


class SmallSplit(NamedTuple):
    small: TruncatedComplex
    P_sm: ChainMap
    P_la: ChainMap
    certificate: HomotopyCertificate
    residuals: tuple[float, float]


def small_split(
    C: CellularComplex,
    F: MorseData,
    t: float,
    split: float = 1.0,
    gap_tol: float = GAP_TOL,
    eps_hom: float | None = None,
    tie_band: float = TIE_BAND,
    allow_ties: bool = False,
    jobs: int | None = None,
) -> SmallSplit:
    """
    Split the deformed complex into its small and large spectral parts at ``split``.

    Returns the truncated small subcomplex, the complementary chain projections
    P_sm and P_la = I - P_sm with their chain-map residuals, and the homotopy
    certificate of the splitting.

    Raises
    ------
    GapTooSmallError
        If no spectral gap straddles the split.
    BoundaryTieError
        If an eigenvalue ties with the split and ties are not allowed.
    """
    Ct = deform(C, F, t)
    spectra = degree_spectra(Ct, jobs)
    small = truncate(Ct, split, tie_band, allow_ties, spectra=spectra)
    certificate = homotopy_certificate(
        Ct,
        split,
        gap_tol=gap_tol,
        eps_hom=eps_hom,
        tie_band=tie_band,
        allow_ties=allow_ties,
        spectra=spectra,
    )
    P_sm = small.projection
    P_la = identity_chain_map(Ct) - P_sm
    residuals = (verify_chain_map(P_sm), verify_chain_map(P_la))
    if max(residuals) > CHAIN_MAP_TOLERANCE:
        warn(f"Spectral splitting at t={t!r} commutes with d only up to {max(residuals):.3e}")
    return SmallSplit(small, P_sm, P_la, certificate, residuals)


def morse_complex_dims(F: MorseData, M: HilbertModule) -> list[float]:
    """dim_tau of the Morse complex: (#critical p-cells) * dim_tau(M) per degree."""
    return [len(critical) * dim_tau(M) for critical in F.critical_cells()]
