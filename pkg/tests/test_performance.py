from types import SimpleNamespace

import numpy as np
import pytest

from hwlsfp.exceptions import ConstraintError, NumericalError
from hwlsfp.hardware import HardwareProfile, build_bussgang_matrices
from hwlsfp.performance import (
    LsfpWeights,
    SinrTerms,
    equal_power_slp,
    estimate_sinr_terms,
    mc_validate_sinr,
    per_ue_se,
    sinr_closed_form,
    slp_weights,
    sum_se,
)
from hwlsfp.estimation import LmmseEstimator
from hwlsfp.scenario import SystemConfig, build_statistics_from_gains


@pytest.fixture(scope="module")
def severe_terms(desk_stats, desk_system, severe_bg):
    return estimate_sinr_terms(desk_stats, severe_bg, desk_system, "DA", n_mc=500)


def single_cell(K=1, M=8, kfactor=3.0, seed=0):
    beta = np.array([[[2e-9], [5e-10]][:K]])
    angles = np.array([[[0.3], [-0.6]][:K]])
    stats = build_statistics_from_gains(beta, kfactor, angles, M, asd_rad=np.deg2rad(20))
    cfg = SystemConfig(n_cells=1, n_ues=K, n_antennas=M, seed=seed)
    return stats, cfg


class TestWeights:
    def test_equal_split(self):
        cfg = SystemConfig(n_cells=3, n_ues=4)
        w = equal_power_slp(cfg)
        np.testing.assert_allclose(w.per_bs_power(), cfg.rho_d)
        assert w.is_feasible(cfg.rho_d)
        off = w.gamma.copy()
        off[np.arange(3), :, np.arange(3)] = 0
        assert not np.any(off)

    def test_single_ue(self):
        w = slp_weights([[2.0]], rho_d=2.0)
        assert w.gamma[0, 0, 0] == pytest.approx(np.sqrt(2.0))

    def test_budget_violation(self):
        with pytest.raises(ConstraintError):
            slp_weights([[0.6, 0.6]], rho_d=1.0)
        with pytest.raises(ConstraintError):
            slp_weights([[-0.1, 0.6]])

    def test_shape(self):
        with pytest.raises(ValueError):
            LsfpWeights(np.zeros((2, 3, 3)))

    def test_infeasible_detected(self):
        g = np.zeros((2, 1, 2))
        g[0, 0, 1] = 1.2
        assert not LsfpWeights(g).is_feasible(1.0)


class TestTerms:
    def test_pure_los_rank_one(self):
        M = 8
        stats = build_statistics_from_gains(np.full((1, 1, 1), 1e-8), np.inf, 0.4, M)
        cfg = SystemConfig(n_cells=1, n_ues=1, n_antennas=M)
        bg = build_bussgang_matrices(HardwareProfile.ideal(M), 1, 1)
        t = estimate_sinr_terms(stats, bg, cfg, "MR", n_mc=2000)
        norm2 = np.sum(np.abs(stats.h_bar) ** 2)
        assert abs(t.b[0, 0, 0]) == pytest.approx(t.omega[0, 0] * norm2, rel=0.02)
        est = LmmseEstimator(stats, bg, cfg)
        analytic = np.sqrt(np.real(np.trace(stats.R_bar[0, 0, 0] - est.C_err[0, 0, 0])))
        assert abs(t.b[0, 0, 0]) == pytest.approx(analytic, rel=0.02)

    def test_zero_channels(self):
        stats = build_statistics_from_gains(np.zeros((1, 2, 1)), 1.0, 0.0, 4)
        cfg = SystemConfig(n_cells=1, n_ues=2, n_antennas=4)
        bg = build_bussgang_matrices(HardwareProfile.uniform(4, 0.1, 0.1, [2], 2), 1, 2)
        for kind in ("MR", "DU", "DA"):
            t = estimate_sinr_terms(stats, bg, cfg, kind, n_mc=100)
            for arr in (t.b, t.C, t.e, t.f):
                assert not np.any(arr)
            assert not np.any(sinr_closed_form(t, equal_power_slp(cfg)))

    def test_jensen(self, severe_terms):
        t = severe_terms
        L, K = t.shape
        for l, k, m in np.ndindex(L, K, L):
            c = t.C[l, k, k, m, m]
            assert abs(c.imag) <= 1e-12 * abs(c)
            assert c.real >= abs(t.b[l, k, m]) ** 2 * (1 - 1e-9)

    def test_quadratic_forms_psd(self, severe_terms, rng):
        G = severe_terms.quadratic_matrices()
        C = severe_terms.C
        for _ in range(200):
            g = rng.standard_normal(2)
            assert np.all(np.einsum("a,lkjab,b->lkj", g, np.real(C), g) >= -1e-12 * np.abs(C).max())
            assert np.all(np.einsum("a,lkjab,b->lkj", g, G, g) >= 0)

    def test_hermitian(self, severe_terms):
        C = severe_terms.C
        np.testing.assert_allclose(C, np.conj(np.swapaxes(C, -1, -2)), atol=1e-14 * np.abs(C).max())

    def test_ideal_has_no_impairment_terms(self, desk_stats, desk_system, ideal_bg):
        t = estimate_sinr_terms(desk_stats, ideal_bg, desk_system, "DU", n_mc=200)
        assert not np.any(t.e)
        assert t.kappa_tb == 0 and t.kappa_ru == 0
        np.testing.assert_array_equal(t.alpha_a, 1.0)

    def test_determinism_and_parallel(self, desk_stats, desk_system, moderate_bg):
        a = estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "DA", n_mc=300, block_size=64)
        b = estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "DA", n_mc=300, block_size=64)
        c = estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "DA", n_mc=300, block_size=64, n_jobs=4)
        for x, y, z in ((a.b, b.b, c.b), (a.C, b.C, c.C), (a.e, b.e, c.e), (a.f, b.f, c.f)):
            assert x.tobytes() == y.tobytes()
            np.testing.assert_allclose(z, x, rtol=1e-10, atol=0)

    def test_seed_changes_terms(self, desk_stats, desk_system, moderate_bg):
        a = estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "MR", n_mc=100, seed=1)
        b = estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "MR", n_mc=100, seed=2)
        assert not np.array_equal(a.b, b.b)

    def test_min_samples(self, desk_stats, desk_system, moderate_bg):
        with pytest.raises(ValueError):
            estimate_sinr_terms(desk_stats, moderate_bg, desk_system, "MR", n_mc=10)

    def test_json_round_trip(self, severe_terms):
        back = SinrTerms.from_json(severe_terms.to_json())
        for name in ("b", "C", "e", "f", "alpha_a", "omega"):
            np.testing.assert_array_equal(getattr(back, name), getattr(severe_terms, name))
        assert back.kappa_ru == severe_terms.kappa_ru and back.precoder == "DA"


class TestClosedForm:
    def test_zero_weights(self, severe_terms):
        g = np.zeros((2, 2, 2))
        assert not np.any(sinr_closed_form(severe_terms, g))

    def test_single_cell_reduction(self):
        stats, cfg = single_cell()
        bg = build_bussgang_matrices(HardwareProfile.ideal(8), 1, 1)
        t = estimate_sinr_terms(stats, bg, cfg, "MR", n_mc=500)
        g = 0.8
        b, c = t.b[0, 0, 0], t.C[0, 0, 0, 0, 0].real
        expected = g**2 * abs(b) ** 2 / (g**2 * (c - abs(b) ** 2) + cfg.noise_power)
        assert sinr_closed_form(t, np.full((1, 1, 1), g))[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_monotone_in_power_single_ue(self):
        stats, cfg = single_cell()
        bg = build_bussgang_matrices(HardwareProfile.uniform(8, 0.1, 0.1, [3], 3), 1, 1)
        t = estimate_sinr_terms(stats, bg, cfg, "DA", n_mc=300)
        s = [sinr_closed_form(t, np.full((1, 1, 1), x))[0, 0] for x in np.linspace(0.01, 1, 25)]
        assert all(b >= a for a, b in zip(s, s[1:]))

    def test_nonpositive_denominator(self, severe_terms):
        broken = SinrTerms(**{**severe_terms.__dict__, "C": np.zeros_like(severe_terms.C), "noise_power": 0.0})
        with pytest.raises(NumericalError):
            sinr_closed_form(broken, equal_power_slp(SystemConfig(n_cells=2, n_ues=2)))


class TestSpectralEfficiency:
    def test_zero(self, severe_terms, desk_system):
        assert sum_se(severe_terms, np.zeros((2, 2, 2)), desk_system) == 0.0

    def test_prelog(self, severe_terms, desk_system):
        w = equal_power_slp(desk_system)
        base = sum_se(severe_terms, w, SimpleNamespace(prelog=0.4))
        assert sum_se(severe_terms, w, SimpleNamespace(prelog=0.8)) == pytest.approx(2 * base)
        assert sum_se(severe_terms, w, SimpleNamespace(prelog=0.0)) == 0.0

    def test_positive(self, severe_terms, desk_system):
        se = per_ue_se(severe_terms, equal_power_slp(desk_system), desk_system)
        assert np.all(se > 0)
        assert sum_se(severe_terms, equal_power_slp(desk_system), desk_system) == pytest.approx(se.sum())


class TestOracle:
    def test_single_cell_ideal(self):
        stats, cfg = single_cell(K=2)
        bg = build_bussgang_matrices(HardwareProfile.ideal(8), 1, 2)
        w = slp_weights([[0.7, 0.3]], 1.0)
        t = estimate_sinr_terms(stats, bg, cfg, "MR", n_mc=10_000)
        emp = mc_validate_sinr(stats, bg, cfg, w, "MR", n_mc=10_000)
        np.testing.assert_allclose(emp, sinr_closed_form(t, w), rtol=0.05)

    def test_no_symbols_no_signal(self, desk_stats, desk_system, severe_bg):
        emp = mc_validate_sinr(desk_stats, severe_bg, desk_system, np.zeros((2, 2, 2)), "DU", n_mc=1000)
        assert np.all(emp < 1e-3)
