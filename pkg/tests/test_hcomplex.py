import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from vnhodge import hcomplex
from vnhodge.errors import (
    EigensolveFailureError,
    EmptyWindowError,
    NonpositiveDensityError,
    NotAComplexError,
    ShapeMismatchError,
    ToleranceAmbiguousWarning,
    ValidationFailure,
)
from vnhodge.hcomplex import (
    DensityFunction,
    betti,
    betti_numbers,
    block_eigh,
    conjugate_complex,
    euler_characteristic,
    hodge_symmetry_residual,
    homotopy_residuals,
    identity_chain_map,
    laplacian,
    make_complex,
    ns_exponent,
    spectral_density,
    spectrum,
    verify_chain_map,
    zero_homotopy,
)
from vnhodge.hmodule import (
    HilbertModule,
    ModuleMorphism,
    identity_morphism,
    operator_norm,
    random_morphism,
)
from vnhodge.vna_core import FactorBlock, make_algebra
from vnhodge.witten import deform


@pytest.fixture
def scalar_algebra():
    return make_algebra([FactorBlock("C", 1, 1.0)])


def scalar_complex(algebra, value):
    """C -> C with d = sqrt(value), so both Laplacians equal value."""
    M = HilbertModule(algebra, (1,))
    d = ModuleMorphism(M, M, (np.array([[np.sqrt(value)]], dtype=complex),))
    return make_complex([M, M], [d])


def expected_betti(harmonic, algebra):
    return [
        sum(w * h[p] / n for w, n, h in zip(algebra.weights, algebra.sizes, harmonic))
        for p in range(len(harmonic[0]))
    ]


class TestMakeComplex:
    @pytest.mark.unittest
    def test_not_a_complex(self, scalar_algebra):
        M = HilbertModule(scalar_algebra, (1,))
        d = identity_morphism(M)
        with pytest.raises(NotAComplexError) as e:
            make_complex([M, M, M], [d, d])
        assert e.value.details["degree"] == 0

    @pytest.mark.unittest
    def test_shape_mismatch(self, scalar_algebra):
        M = HilbertModule(scalar_algebra, (1,))
        N = HilbertModule(scalar_algebra, (2,))
        with pytest.raises(ShapeMismatchError):
            make_complex([M, N], [identity_morphism(M)])
        with pytest.raises(ShapeMismatchError):
            make_complex([M, M], [])

    @pytest.mark.unittest
    def test_eps_d2(self, scalar_algebra):
        M = HilbertModule(scalar_algebra, (1,))
        d = ModuleMorphism(M, M, (np.array([[1e-4]], dtype=complex),))
        make_complex([M, M, M], [d, d], eps_d2=1e-7)
        with pytest.raises(NotAComplexError):
            make_complex([M, M, M], [d, d], eps_d2=1e-9)


class TestSpectrum:
    @pytest.mark.unittest
    def test_laplacian_is_hermitian(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        for p in C.degrees:
            for block in laplacian(C, p).blocks:
                assert_array_equal(block, block.conj().T)

    @pytest.mark.unittest
    def test_eigenvalues(self, random_hilbert_complex):
        C, sigmas, ranks, harmonic = random_hilbert_complex
        spec = spectrum(C, 1)
        for i in range(2):
            expected = np.sort(
                np.concatenate([np.zeros(harmonic[i][1]), sigmas[i][0], sigmas[i][1]])
            )
            assert_allclose(spec.eigenvalues[i], expected, atol=1e-10)

    @pytest.mark.unittest
    def test_spectral_data_df(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        df = spectrum(C, 0).df
        assert list(df.columns) == ["block", "eigenvalue", "nu_weight"]
        assert len(df) == sum(C.modules[0].mult)
        assert_allclose(df.loc[df["block"] == "b", "nu_weight"], 0.25)

    @pytest.mark.unittest
    def test_block_eigh_batches(self):
        rng = np.random.default_rng(0)
        blocks = []
        for n in (2, 3, 2, 0, 3):
            a = rng.standard_normal((n, n))
            blocks.append(a + a.T)
        results = block_eigh(blocks)
        for block, (values, vectors) in zip(blocks, results):
            if block.size:
                assert_allclose(values, np.linalg.eigvalsh(block), atol=1e-12)
                assert_allclose(vectors @ np.diag(values) @ vectors.T, block, atol=1e-12)
            else:
                assert values.size == 0

    @pytest.mark.unittest
    @pytest.mark.parametrize(
        "eigenvalues, clamped",
        [
            ([-5e-11, 1.0], True),
            ([-1e-9, 1.0], False),
            ([-1e-9, 1e3], True),
            ([-1e-6, 1e3], False),
        ],
    )
    def test_negative_band_scales_with_norm(
        self, monkeypatch, scalar_algebra, eigenvalues, clamped
    ):
        M = HilbertModule(scalar_algebra, (2,))
        C = make_complex([M, M], [identity_morphism(M)])

        def solved(blocks, vectors=True, jobs=None):
            return [(np.array(eigenvalues), None)]

        monkeypatch.setattr(hcomplex, "block_eigh", solved)
        if clamped:
            assert_array_equal(spectrum(C, 0).eigenvalues[0], [0.0, eigenvalues[1]])
        else:
            with pytest.raises(EigensolveFailureError):
                spectrum(C, 0)

    @pytest.mark.unittest
    def test_deformed_spectrum_is_clamped(self, morse_circle, morse_circle_complex):
        Ct = deform(morse_circle_complex, morse_circle.morse, 12.0)
        for p in Ct.degrees:
            assert all(np.all(ev >= 0.0) for ev in spectrum(Ct, p).eigenvalues)

    @pytest.mark.unittest
    def test_parallel_results_identical(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        for p in C.degrees:
            serial = spectrum(C, p, jobs=1)
            threaded = spectrum(C, p, jobs=4)
            for a, b in zip(serial.eigenvalues, threaded.eigenvalues):
                assert_array_equal(a, b)


class TestBetti:
    @pytest.mark.unittest
    def test_random_complex(self, random_hilbert_complex, two_block_algebra):
        C, _, _, harmonic = random_hilbert_complex
        assert_allclose(betti_numbers(C), expected_betti(harmonic, two_block_algebra))
        assert_allclose(betti_numbers(C), [0.5, 0.25, 1.25])

    @pytest.mark.unittest
    def test_ambiguous_tolerance(self, scalar_algebra):
        C = scalar_complex(scalar_algebra, 3e-8)
        with pytest.warns(ToleranceAmbiguousWarning):
            b = betti(C, 0, eps_null=1e-8)
        assert b == 0.0

    @pytest.mark.unittest
    def test_kernel_below_tolerance(self, scalar_algebra):
        C = scalar_complex(scalar_algebra, 1e-12)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assert betti(C, 0, eps_null=1e-8) == 1.0

    @pytest.mark.unittest
    def test_invalid_tolerance(self, scalar_algebra):
        C = scalar_complex(scalar_algebra, 1.0)
        with pytest.raises(ValidationFailure):
            betti(C, 0, eps_null=0.0)

    @pytest.mark.unittest
    def test_euler_characteristic(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        chi = euler_characteristic(C)
        assert_allclose(chi.from_modules, chi.from_betti, atol=1e-12)

    @pytest.mark.unittest
    def test_isomorphism_invariance(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        rng = np.random.default_rng(7)
        maps = []
        for M in C.modules:
            R = random_morphism(M, M, rng)
            maps.append(identity_morphism(M) + (0.3 / operator_norm(R)) * R)
        D = conjugate_complex(C, maps)
        assert_allclose(betti_numbers(D), betti_numbers(C), atol=1e-12)

    @pytest.mark.unittest
    def test_hodge_symmetry(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        for p in C.degrees:
            assert hodge_symmetry_residual(C, p) < 1e-10


class TestSpectralDensity:
    @pytest.mark.unittest
    def test_values(self, random_hilbert_complex, two_block_algebra):
        C, sigmas, _, harmonic = random_hilbert_complex
        grid = [0.01, 0.3, 1.0, 20.0]
        F = spectral_density(C, 0, grid)
        spec = spectrum(C, 0)
        for lam, value in zip(grid, F.values):
            assert value == spec.weighted_count(lam + 1e-10)
        assert F.values[0] == betti(C, 0)
        assert_allclose(F.values[-1], F.total)
        assert np.all(np.diff(F.values) >= 0)

    @pytest.mark.unittest
    def test_grid_checks(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        with pytest.raises(ValidationFailure):
            spectral_density(C, 0, [0.5, 0.1])
        with pytest.raises(ValidationFailure):
            spectral_density(C, 0, [])
        with pytest.raises(ValidationFailure):
            spectral_density(C, 0, [0.0, 1.0])

    @pytest.mark.unittest
    def test_ties_are_counted(self, scalar_algebra):
        C = scalar_complex(scalar_algebra, 0.5)
        F = spectral_density(C, 0, [0.25, 0.5, 0.75])
        assert_array_equal(F.ties, [False, True, False])
        assert_array_equal(F.values, [0.0, 1.0, 1.0])
        assert F(0.6) == 1.0
        assert list(F.df.columns) == ["lambda", "F"]


class TestNsExponent:
    @pytest.fixture
    def power_law(self):
        lambdas = np.logspace(-4, -1, 16)
        return DensityFunction(lambdas, 0.5 + 2 * lambdas**0.5, np.zeros(16, bool), 1.0)

    @pytest.mark.unittest
    def test_power_law(self, power_law):
        fit = ns_exponent(power_law, 0.5, (5e-5, 0.2))
        assert_allclose(fit.slope, 0.5)
        assert_allclose(fit.r2, 1.0)
        assert fit.points == 16

    @pytest.mark.unittest
    def test_constant_excess(self):
        lambdas = np.array([0.1, 0.2, 0.3])
        F = DensityFunction(lambdas, np.full(3, 0.75), np.zeros(3, bool), 1.0)
        fit = ns_exponent(F, 0.5, (0.1, 0.3))
        assert fit.slope == 0.0
        assert fit.r2 == 1.0

    @pytest.mark.unittest
    def test_empty_window(self, power_law):
        with pytest.raises(EmptyWindowError):
            ns_exponent(power_law, 0.5, (2.0, 3.0))

    @pytest.mark.unittest
    def test_nonpositive_density(self, power_law):
        with pytest.raises(NonpositiveDensityError):
            ns_exponent(power_law, 1.0, (5e-5, 0.2))


class TestChainMaps:
    @pytest.mark.unittest
    def test_identity_is_chain_map(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        assert verify_chain_map(identity_chain_map(C)) <= 1e-15

    @pytest.mark.unittest
    def test_zero_homotopy(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        f = identity_chain_map(C)
        residuals = homotopy_residuals(f, f, zero_homotopy(C, C))
        assert residuals == [0.0] * len(C.modules)

    @pytest.mark.unittest
    def test_identity_minus_zero(self, random_hilbert_complex):
        C, *_ = random_hilbert_complex
        f = identity_chain_map(C)
        zero = f - f
        assert max(homotopy_residuals(f, zero, zero_homotopy(C, C))) == 1.0
