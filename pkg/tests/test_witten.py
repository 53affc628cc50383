import numpy as np
import pytest
import xarray as xr
from numpy.testing import assert_allclose, assert_array_equal

from vnhodge.errors import MissingCellValueError, NonpositiveTError, ValidationFailure
from vnhodge.hcomplex import betti_numbers, spectrum
from vnhodge.witten import (
    GapReport,
    deform,
    gap_scan,
    make_morse_data,
    morse_complex_dims,
    scale_factor,
    scaled_deform,
    small_split,
)


class TestMorseData:
    @pytest.mark.unittest
    def test_critical_cells(self, morse_circle):
        F = morse_circle.morse
        assert F.critical_cells() == [["a"], ["e1"]]
        assert list(F.df.columns) == ["cell", "dimension", "value", "critical"]
        assert F.df["critical"].sum() == 2

    @pytest.mark.unittest
    def test_missing_value(self, morse_circle):
        with pytest.raises(MissingCellValueError):
            make_morse_data(morse_circle.cw, {"a": 0.0, "b": 0.5, "e1": 1.0})

    @pytest.mark.unittest
    @pytest.mark.parametrize(
        "matching, message",
        [
            ([("b", "x")], "unknown cell"),
            ([("b", "a")], "dimension"),
            ([("b", "e2"), ("b", "e1")], "more than one"),
        ],
    )
    def test_invalid_matching(self, morse_circle, matching, message):
        values = dict(morse_circle.morse.values)
        with pytest.raises(ValidationFailure, match=message):
            make_morse_data(morse_circle.cw, values, matching)

    @pytest.mark.unittest
    def test_self_indexing(self, morse_circle):
        values = {"a": 0.0, "b": 0.5, "e1": 1.0, "e2": 0.5}
        F = make_morse_data(morse_circle.cw, values, [("b", "e2")], self_indexing=True)
        assert F.self_indexing

        values["e1"] = 0.9
        with pytest.raises(ValidationFailure, match="not 1"):
            make_morse_data(morse_circle.cw, values, [("b", "e2")], self_indexing=True)

    @pytest.mark.unittest
    def test_morse_complex_dims(self, morse_circle):
        dims = morse_complex_dims(morse_circle.morse, morse_circle.bundle.fiber)
        assert_allclose(dims, [1.0, 1.0])

    @pytest.mark.unittest
    def test_morse_complex_dims_without_matching(self, morse_circle):
        values = {c: 0.0 for dim_cells in morse_circle.cw.cells for c in dim_cells}
        F = make_morse_data(morse_circle.cw, values)
        dims = morse_complex_dims(F, morse_circle.bundle.fiber)
        assert_allclose(dims, morse_circle.cw.cell_counts)


class TestDeform:
    @pytest.mark.unittest
    def test_zero_is_exact(self, morse_circle, morse_circle_complex):
        C0 = deform(morse_circle_complex, morse_circle.morse, 0.0)
        for d0, d in zip(C0.differentials, morse_circle_complex.differentials):
            for b0, b in zip(d0.blocks, d.blocks):
                assert_array_equal(b0, b)

    @pytest.mark.unittest
    def test_entries(self, morse_circle, morse_circle_complex):
        Ct = deform(morse_circle_complex, morse_circle.morse, 1.0)
        sign_block = Ct.differentials[0].blocks[1]
        # rows e1, e2; columns a, b
        expected = [[-np.exp(-1.0), np.exp(-0.5)], [-np.exp(-0.5), -1.0]]
        assert_allclose(sign_block, expected)

    @pytest.mark.unittest
    def test_betti_invariant(self, morse_circle, morse_circle_complex):
        for t in [0.5, 2.0]:
            Ct = deform(morse_circle_complex, morse_circle.morse, t)
            assert_allclose(betti_numbers(Ct), [0.5, 0.5])

    @pytest.mark.unittest
    def test_spectrum_at_one(self, morse_circle, morse_circle_complex):
        Ct = deform(morse_circle_complex, morse_circle.morse, 1.0)
        spec = spectrum(Ct, 0)
        assert_allclose(spec.eigenvalues[1], [0.357697, 1.513397], rtol=1e-4)

    @pytest.mark.unittest
    def test_needs_cells(self, morse_circle, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        with pytest.raises(ValidationFailure, match="cells"):
            deform(C, morse_circle.morse, 1.0)

    @pytest.mark.unittest
    def test_scaled_deform(self, morse_circle, morse_circle_complex):
        assert scale_factor(np.pi) == pytest.approx(np.exp(np.pi))
        Ct = deform(morse_circle_complex, morse_circle.morse, 2.0)
        scaled = scaled_deform(morse_circle_complex, morse_circle.morse, 2.0)
        assert_allclose(
            scaled.differentials[0].blocks[0],
            scale_factor(2.0) * Ct.differentials[0].blocks[0],
        )
        with pytest.raises(NonpositiveTError):
            scaled_deform(morse_circle_complex, morse_circle.morse, 0.0)


class TestGapScan:
    @pytest.fixture
    def report(self, morse_circle, morse_circle_complex):
        return gap_scan(morse_circle_complex, morse_circle.morse, np.arange(1.0, 11.0))

    @pytest.mark.unittest
    def test_dataset(self, report):
        assert isinstance(report, GapReport)
        assert isinstance(report.ds, xr.Dataset)
        assert dict(report.ds.sizes) == {"t": 10, "degree": 2}
        assert report.split == 1.0
        assert list(report.df.columns) == [
            "t",
            "degree",
            "small_count",
            "max_small",
            "min_large",
            "ratio",
        ]

    @pytest.mark.unittest
    def test_small_counts(self, report):
        assert_allclose(report["small_count"].values, np.ones((10, 2)))
        assert report.stable_from([1.0, 1.0]) == 1.0
        assert np.isnan(report.stable_from([2.0, 2.0]))

    @pytest.mark.unittest
    def test_separation(self, report):
        ratio = report["ratio"].sel(t=10.0).values
        assert np.all(ratio > 1e7)
        assert np.all(report["min_large"].values > 1.0)

    @pytest.mark.unittest
    def test_decay(self, report):
        slopes = report.decay_slopes()
        assert set(slopes) == {0, 1}
        assert all(-2.5 < s < -1.5 for s in slopes.values())

    @pytest.mark.unittest
    def test_to_dict(self, report):
        result = report.to_dict()
        assert result["command"] == "witten"
        assert len(result["rows"]) == 20

    @pytest.mark.unittest
    def test_invalid_grid(self, morse_circle, morse_circle_complex):
        with pytest.raises(ValidationFailure):
            gap_scan(morse_circle_complex, morse_circle.morse, [2.0, 1.0])

    @pytest.mark.unittest
    def test_constant_function_is_t_independent(self, morse_circle, morse_circle_complex):
        values = {c: 0.0 for dim_cells in morse_circle.cw.cells for c in dim_cells}
        F = make_morse_data(morse_circle.cw, values)
        report = gap_scan(morse_circle_complex, F, [0.5, 1.0, 4.0, 9.0])
        for name in ("small_count", "max_small", "min_large", "ratio"):
            rows = report[name].values
            for row in rows[1:]:
                assert_array_equal(row, rows[0])
        assert all(s == 0.0 for s in report.decay_slopes().values())


class TestSmallSplit:
    @pytest.mark.unittest
    def test_split(self, morse_circle, morse_circle_complex):
        result = small_split(morse_circle_complex, morse_circle.morse, 5.0)
        assert_allclose(result.small.dims, [1.0, 1.0])
        assert result.certificate.success
        assert max(result.residuals) < 1e-8
        for P_sm, P_la in zip(result.P_sm.maps, result.P_la.maps):
            total = P_sm + P_la
            for block in total.blocks:
                assert_allclose(block, np.eye(block.shape[0]), atol=1e-12)

    @pytest.mark.unittest
    def test_split_above_spectrum(self, morse_circle, morse_circle_complex):
        result = small_split(morse_circle_complex, morse_circle.morse, 1.0, split=1e3)
        assert_allclose(result.small.dims, [2.0, 2.0])
        assert result.certificate.gap == np.inf
        for P_la in result.P_la.maps:
            for block in P_la.blocks:
                assert_allclose(block, 0.0, atol=1e-12)
