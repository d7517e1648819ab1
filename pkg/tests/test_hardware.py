import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hwlsfp.exceptions import DomainError
from hwlsfp.hardware import (
    DISTORTION_TABLE,
    IDEAL,
    HardwareProfile,
    build_bussgang_matrices,
    bussgang_gain,
    conditional_diag_covariance,
    distortion_factor,
    equal_proportion_bits,
    export_distortion_table,
    lloyd_max_design,
    lloyd_max_quantize,
)

# classical Lloyd-Max table values for b = 2..5
MAX_TABLE = {2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}


class TestDistortion:
    def test_ideal(self):
        assert distortion_factor(IDEAL) == 0.0
        assert distortion_factor(None) == 0.0
        assert bussgang_gain("inf") == 1.0

    def test_one_bit_closed_form(self):
        assert distortion_factor(1) == pytest.approx(1 - 2 / np.pi, rel=1e-12)
        assert bussgang_gain(1) == pytest.approx(2 / np.pi, rel=1e-12)

    @pytest.mark.parametrize("bits", sorted(MAX_TABLE))
    def test_classical_table(self, bits):
        # the stored values are the converged fixed point; the classical table
        # is rounded in the fourth significant digit
        assert distortion_factor(bits) == pytest.approx(MAX_TABLE[bits], rel=5e-3)

    @pytest.mark.parametrize("bits", [1, 2, 3, 6])
    def test_table_matches_design(self, bits):
        _, _, rho = lloyd_max_design(bits, tol=1e-12, max_iter=20000)
        assert rho == pytest.approx(DISTORTION_TABLE[bits], rel=1e-9)

    def test_design_optimality_conditions(self):
        from scipy.stats import norm

        t, c, _ = lloyd_max_design(4, tol=1e-13, max_iter=50000)
        edges = np.r_[-np.inf, t, np.inf]
        cent = -np.diff(norm.pdf(edges)) / np.diff(norm.cdf(edges))
        np.testing.assert_allclose(c, cent, atol=1e-12)
        np.testing.assert_allclose(t, (c[:-1] + c[1:]) / 2, atol=1e-10)

    def test_strictly_decreasing(self):
        rho = [distortion_factor(b) for b in range(1, 16)]
        assert all(a > b for a, b in zip(rho, rho[1:]))
        gains = [bussgang_gain(b) for b in range(1, 7)]
        assert all(a < b for a, b in zip(gains, gains[1:]))

    @pytest.mark.parametrize("bad", [0, 16, -1, 2.5, "abc"])
    def test_unsupported(self, bad):
        with pytest.raises(DomainError):
            distortion_factor(bad)

    def test_export(self, tmp_path):
        path = export_distortion_table(tmp_path / "table.csv")
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["bits", "rho", "alpha"]
        assert len(rows) == 17
        assert float(rows[1][1]) == DISTORTION_TABLE[1]
        assert rows[-1] == ["ideal", "0.0", "1.0"]


class TestQuantizer:
    def test_one_bit_level(self):
        assert lloyd_max_quantize(0.3, 1) == pytest.approx(np.sqrt(2 / np.pi))
        assert lloyd_max_quantize(-0.3, 1) == pytest.approx(-np.sqrt(2 / np.pi))

    def test_tie_goes_up(self):
        q = lloyd_max_quantize(0.0, 2)
        assert q > 0
        t, c, _ = lloyd_max_design(2)
        assert q == pytest.approx(c[2], rel=1e-8)

    def test_complex_per_component(self):
        z = np.array([0.3 - 0.2j, -1.5 + 2.0j])
        q = lloyd_max_quantize(z, 3)
        np.testing.assert_allclose(q.real, lloyd_max_quantize(z.real, 3))
        np.testing.assert_allclose(q.imag, lloyd_max_quantize(z.imag, 3))

    def test_ideal_passthrough(self):
        x = np.array([0.1, -3.0])
        np.testing.assert_array_equal(lloyd_max_quantize(x, IDEAL), x)

    @pytest.mark.parametrize("bits", [1, 2, 3, 4, 5])
    def test_bussgang_gain_monte_carlo(self, bits):
        x = np.random.default_rng(bits).standard_normal(100_000)
        q = lloyd_max_quantize(x, bits)
        a = bussgang_gain(bits)
        assert np.mean(q * x) / np.mean(x * x) == pytest.approx(a, rel=0.02)
        assert np.var(q - a * x) == pytest.approx(a * (1 - a) * np.var(x), rel=0.03)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(-10, 10), st.integers(1, 6))
    def test_output_is_codeword(self, x, bits):
        _, c, _ = lloyd_max_design(bits, tol=1e-10, max_iter=5000)
        q = lloyd_max_quantize(x, bits)
        assert np.min(np.abs(c - q)) < 1e-9
        # nearest codeword
        assert abs(q - x) <= np.min(np.abs(c - x)) + 1e-9


class TestMatrices:
    def test_ideal_profile(self):
        bg = build_bussgang_matrices(HardwareProfile.ideal(8), 2, 3)
        assert np.all(bg.A_a == 1) and np.all(bg.A_d == 1)
        assert np.all(bg.B_a == 0) and np.all(bg.B_d == 0)
        assert bg.alpha_d.shape == (2, 3) and np.all(bg.alpha_a == 1)

    def test_mixed_equal_proportion(self):
        bits = equal_proportion_bits([1, 2, 4, 6], 8)
        assert bits == [1, 1, 2, 2, 4, 4, 6, 6]
        prof = HardwareProfile(bs_adc_bits=bits, bs_dac_bits=bits)
        bg = build_bussgang_matrices(prof)
        expected = np.repeat([bussgang_gain(b) for b in (1, 2, 4, 6)], 2)
        np.testing.assert_allclose(bg.A_a[0], expected)
        np.testing.assert_allclose(bg.B_a[0], expected * (1 - expected))
        assert np.all(bg.B_a <= 0.25)

    def test_single_antenna_one_bit(self):
        bg = build_bussgang_matrices(HardwareProfile(bs_adc_bits=(1,), bs_dac_bits=(1,)))
        assert bg.matrix("A_a", 0) == pytest.approx(np.array([[0.6366197723675814]]))

    def test_uneven_split(self):
        assert equal_proportion_bits([1, 2, 3], 7) == [1, 1, 1, 2, 2, 3, 3]

    def test_negative_kappa(self):
        with pytest.raises(ValueError):
            HardwareProfile(kappa_tb=-0.1)

    def test_alpha_tilde(self):
        prof = HardwareProfile.uniform(4, 0.1, 0.2, [3], 2)
        bg = build_bussgang_matrices(prof, 1, 1)
        assert bg.alpha_d_tilde[0, 0] == pytest.approx(bussgang_gain(2) * 1.04)
        assert (bg.kappa_tb, bg.kappa_rb, bg.kappa_tu, bg.kappa_ru) == (0.1, 0.1, 0.2, 0.2)


class TestConditionalCovariance:
    def test_deterministic_vector(self):
        x = np.array([1 + 1j, 2.0, 0.0])
        np.testing.assert_allclose(conditional_diag_covariance(x), np.diag([2.0, 4.0, 0.0]))

    def test_zero(self):
        assert not np.any(conditional_diag_covariance(np.zeros((5, 3))))

    def test_law_of_large_numbers(self, rng):
        z = (rng.standard_normal((10_000, 4)) + 1j * rng.standard_normal((10_000, 4))) / np.sqrt(2)
        d = np.diag(conditional_diag_covariance(z))
        np.testing.assert_allclose(d, 1.0, rtol=0.05)

    def test_empty(self):
        with pytest.raises(DomainError):
            conditional_diag_covariance(np.zeros((0, 3)))
