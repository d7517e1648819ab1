"""Hardening-bound SINR terms, closed-form SINR/SE and a direct-simulation oracle.

Index conventions
-----------------
``gamma[l, k, r]``
    LSFP weight of UE ``(l, k)``'s symbol at BS ``r`` (real, non-negative).
``b[l, k, r]``
    ``E[h_lk^r^H A_d^r w_rk^r]``.
``C[l, k, j, r, s]``
    ``E[g_r g_s^*]`` with ``g_r = h_lk^r^H A_d^r w_rj^r``: second moment of the
    effective channel from BS ``r`` carrying precoder ``j``.
``e[l, k, j, r]``, ``f[l, k, j, r]``
    ``E[h_lk^r^H X diag(|w_rj^r|^2) h_lk^r]`` with ``X = B_d^r`` and ``A_d^r``.

With these, the received power of UE ``(l, k)`` before the UE-side
impairments is ``Q = sum_{n,j} gamma[n,j]^T G[l,k,j] gamma[n,j]`` where
``G = Re C + diag(e + kappa_tb^2 f)``, and the SINR is ``N / D`` with

``N = alpha_a^2 |gamma[l,k] . b[l,k]|^2``,
``D = alpha_a (1 + kappa_ru^2) Q + alpha_a sigma^2 - N``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channels import sample_channels
from .estimation import LmmseEstimator, simulate_pilot_reception
from .exceptions import ConstraintError, NumericalError
from .hardware import BussgangMatrices
from .precoding import PrecoderKind, build_directions
from .scenario import ChannelStatistics, SystemConfig
from .streams import ORACLE, TERMS, block_slices, crandn, make_rng


@dataclass
class LsfpWeights:
    """LSFP coefficients ``gamma[l, k, r]``."""

    gamma: np.ndarray

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.ndim != 3 or self.gamma.shape[0] != self.gamma.shape[2]:
            raise ValueError(f"gamma must have shape (L, K, L), got {self.gamma.shape}")

    def per_bs_power(self) -> np.ndarray:
        return np.sum(self.gamma**2, axis=(0, 1))

    def is_feasible(self, rho_d: float, rtol: float = 1e-9) -> bool:
        return bool(np.all(self.per_bs_power() <= rho_d * (1 + rtol)) and np.all(self.gamma >= 0))

    @property
    def flat(self) -> np.ndarray:
        return self.gamma.ravel()


def slp_weights(powers, rho_d: float | None = None) -> LsfpWeights:
    """Single-layer weights: ``gamma[l, k, l] = sqrt(p[l, k])``, zero elsewhere."""
    p = np.asarray(powers, dtype=float)
    if np.any(p < 0):
        raise ConstraintError("powers must be non-negative")
    if rho_d is not None and np.any(p.sum(axis=1) > rho_d * (1 + 1e-12)):
        raise ConstraintError(f"per-cell power {p.sum(axis=1)} exceeds budget {rho_d}")
    L, K = p.shape
    gamma = np.zeros((L, K, L))
    gamma[np.arange(L), :, np.arange(L)] = np.sqrt(p)
    return LsfpWeights(gamma)


def equal_power_slp(config: SystemConfig) -> LsfpWeights:
    p = np.full((config.n_cells, config.n_ues), config.rho_d / config.n_ues)
    return slp_weights(p, config.rho_d)


@dataclass
class SinrTerms:
    b: np.ndarray
    C: np.ndarray
    e: np.ndarray
    f: np.ndarray
    alpha_a: np.ndarray
    kappa_ru: float
    kappa_tb: float
    noise_power: float
    omega: np.ndarray | None = None
    n_samples: int = 0
    precoder: str = ""

    @property
    def shape(self) -> tuple[int, int]:
        return self.b.shape[:2]

    def quadratic_matrices(self) -> np.ndarray:
        """``G[l, k, j] = Re C[l, k, j] + diag(e + kappa_tb^2 f)``, shape (L, K, K, L, L)."""
        G = np.real(self.C).copy()
        L = self.b.shape[0]
        idx = np.arange(L)
        G[..., idx, idx] += self.e + self.kappa_tb**2 * self.f
        return (G + np.swapaxes(G, -1, -2)) / 2

    def to_json(self) -> str:
        def cplx(a):
            a = np.asarray(a)
            return {"re": np.real(a).tolist(), "im": np.imag(a).tolist()}

        return json.dumps(
            {
                "b": cplx(self.b),
                "C": cplx(self.C),
                "e": np.asarray(self.e).tolist(),
                "f": np.asarray(self.f).tolist(),
                "alpha_a": np.asarray(self.alpha_a).tolist(),
                "kappa_ru": self.kappa_ru,
                "kappa_tb": self.kappa_tb,
                "noise_power": self.noise_power,
                "omega": None if self.omega is None else np.asarray(self.omega).tolist(),
                "n_samples": self.n_samples,
                "precoder": self.precoder,
            },
            indent=1,
        )

    @classmethod
    def from_json(cls, text: str) -> "SinrTerms":
        d = json.loads(text)

        def cplx(v):
            return np.asarray(v["re"]) + 1j * np.asarray(v["im"])

        return cls(
            b=cplx(d["b"]),
            C=cplx(d["C"]),
            e=np.asarray(d["e"]),
            f=np.asarray(d["f"]),
            alpha_a=np.asarray(d["alpha_a"]),
            kappa_ru=d["kappa_ru"],
            kappa_tb=d["kappa_tb"],
            noise_power=d["noise_power"],
            omega=None if d["omega"] is None else np.asarray(d["omega"]),
            n_samples=d["n_samples"],
            precoder=d["precoder"],
        )


def _draw_block(stats, bg, config, estimator, kind, rng, n):
    """Channels and unnormalized precoder directions for one block of realizations."""
    h = sample_channels(stats, n, rng).h
    y = simulate_pilot_reception(h, bg, config, rng)
    h_hat = estimator.estimate_own(y)
    v = build_directions(kind, h_hat, estimator.C_err_own, stats, bg, config)
    return h, v


def _term_sums(stats, bg, config, estimator, kind, seed, start, stop, block_index):
    rng = make_rng(seed, TERMS, block_index)
    h, v = _draw_block(stats, bg, config, estimator, kind, rng, stop - start)
    g = np.einsum("nlkrm,rm,nrjm->nlkrj", h.conj(), bg.A_d, v, optimize=True)
    v2 = np.abs(v) ** 2
    h2 = np.abs(h) ** 2
    return {
        "v2": np.sum(v2, axis=(0, 3)),
        "b": np.einsum("nlkrk->lkr", g),
        "C": np.einsum("nlkrj,nlksj->lkjrs", g, g.conj(), optimize=True),
        "e": np.einsum("nrjm,nlkrm,rm->lkjr", v2, h2, bg.B_d, optimize=True),
        "f": np.einsum("nrjm,nlkrm,rm->lkjr", v2, h2, bg.A_d, optimize=True),
    }


def estimate_sinr_terms(
    stats: ChannelStatistics,
    bg: BussgangMatrices,
    config: SystemConfig,
    precoder="DA",
    n_mc: int = 500,
    seed: int | None = None,
    block_size: int = 250,
    n_jobs: int = 1,
) -> SinrTerms:
    """Monte-Carlo estimate of every expectation entering the SINR.

    All terms share one set of realizations (channels, pilot noises,
    estimates, precoders). Realizations are drawn in blocks, each from its own
    counter-derived stream, and block sums are reduced in block order, so the
    result does not depend on ``n_jobs``.
    """
    if n_mc < 100:
        raise ValueError(f"need at least 100 Monte-Carlo realizations, got {n_mc}")
    kind = PrecoderKind.parse(precoder)
    seed = config.seed if seed is None else seed
    estimator = LmmseEstimator(stats, bg, config)
    blocks = block_slices(n_mc, block_size)

    def work(item):
        i, (start, stop) = item
        return _term_sums(stats, bg, config, estimator, kind, seed, start, stop, i)

    if n_jobs == 1:
        parts = [work(item) for item in enumerate(blocks)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs if n_jobs > 0 else None) as pool:
            parts = list(pool.map(work, enumerate(blocks)))
    sums = {key: sum(part[key] for part in parts) for key in parts[0]}

    omega = _omega(sums["v2"] / n_mc)  # [r, k]
    wT = omega.T  # [k, r]
    return SinrTerms(
        b=sums["b"] / n_mc * wT[None],
        C=sums["C"] / n_mc * (wT[:, :, None] * wT[:, None, :])[None, None],
        e=np.real(sums["e"]) / n_mc * (wT**2)[None, None],
        f=np.real(sums["f"]) / n_mc * (wT**2)[None, None],
        alpha_a=bg.alpha_a.copy(),
        kappa_ru=bg.kappa_ru,
        kappa_tb=bg.kappa_tb,
        noise_power=config.noise_power,
        omega=omega,
        n_samples=n_mc,
        precoder=kind.value,
    )


def _omega(mean_power: np.ndarray) -> np.ndarray:
    """``1/sqrt(E||v||^2)``; a direction that is identically zero gets weight 0."""
    safe = np.where(mean_power > 0, mean_power, 1.0)
    return np.where(mean_power > 0, 1.0 / np.sqrt(safe), 0.0)


def _gamma(weights) -> np.ndarray:
    return weights.gamma if isinstance(weights, LsfpWeights) else np.asarray(weights, dtype=float)


def sinr_parts(terms: SinrTerms, weights) -> tuple[np.ndarray, np.ndarray]:
    """Numerator and denominator of the SINR of every UE, each (L, K)."""
    g = _gamma(weights)
    G = terms.quadratic_matrices()
    Q = np.einsum("nja,lkjab,njb->lk", g, G, g, optimize=True)
    u = np.einsum("lkr,lkr->lk", g, terms.b)
    a = terms.alpha_a
    num = a**2 * np.abs(u) ** 2
    den = a * (1 + terms.kappa_ru**2) * Q + a * terms.noise_power - num
    return num, den


def sinr_closed_form(terms: SinrTerms, weights) -> np.ndarray:
    num, den = sinr_parts(terms, weights)
    if np.any(den <= 0):
        raise NumericalError("non-positive SINR denominator; Monte-Carlo terms are inconsistent")
    return num / den


def per_ue_se(terms: SinrTerms, weights, config: SystemConfig) -> np.ndarray:
    return config.prelog * np.log2(1 + sinr_closed_form(terms, weights))


def sum_se(terms: SinrTerms, weights, config: SystemConfig) -> float:
    """Sum spectral efficiency in bit/s/Hz including the pilot-overhead prelog."""
    return float(np.sum(per_ue_se(terms, weights, config)))


def _qpsk(rng, shape):
    bits = rng.integers(0, 2, size=(*shape, 2))
    return ((2 * bits[..., 0] - 1) + 1j * (2 * bits[..., 1] - 1)) / np.sqrt(2)


def mc_validate_sinr(
    stats: ChannelStatistics,
    bg: BussgangMatrices,
    config: SystemConfig,
    weights,
    precoder="DA",
    n_mc: int = 10_000,
    seed: int | None = None,
    n_symbols: int = 8,
    block_size: int = 500,
) -> np.ndarray:
    """Empirical hardening SINR from a direct simulation of the downlink chain.

    Each realization runs the pilot phase, builds the precoders, then pushes
    ``n_symbols`` draws of QPSK data symbols through the BS DACs and transmit
    RF chains, the channel, the UE receive RF chain, AWGN and the UE ADC.
    Distortion noises are Gaussian with their conditional covariances. The
    desired amplitude is the sample mean of ``y s_lk^*`` and the effective
    noise power is ``E|y|^2`` minus its square.

    Realizations come from a stream disjoint from :func:`estimate_sinr_terms`.
    """
    kind = PrecoderKind.parse(precoder)
    seed = config.seed if seed is None else seed
    g_w = _gamma(weights)  # [l, k, r]
    estimator = LmmseEstimator(stats, bg, config)
    blocks = block_slices(n_mc, block_size)
    L, K, M = stats.shape

    v2 = np.zeros((L, K))
    for i, (start, stop) in enumerate(blocks):
        _, v = _draw_block(stats, bg, config, estimator, kind, make_rng(seed, ORACLE, i), stop - start)
        v2 += np.sum(np.abs(v) ** 2, axis=(0, 3))
    omega = _omega(v2 / n_mc)

    gamma_sq = np.sum(g_w**2, axis=0).T  # [r, j] = sum_l gamma[l, j, r]^2
    a_ue = bg.alpha_a
    cross = np.zeros((L, K), dtype=complex)
    power = np.zeros((L, K))
    count = 0
    for i, (start, stop) in enumerate(blocks):
        rng = make_rng(seed, ORACLE, i)
        h, v = _draw_block(stats, bg, config, estimator, kind, rng, stop - start)
        n = stop - start
        w = omega[None, :, :, None] * v  # [n, r, j, m]
        S = n_symbols
        s = _qpsk(rng, (n, S, L, K))
        coeff = np.einsum("ljr,nslj->nsrj", g_w, s)
        x = np.einsum("nsrj,nrjm->nsrm", coeff, w)
        Dd = np.einsum("rj,nrjm->nrm", gamma_sq, np.abs(w) ** 2)
        dac = np.sqrt(bg.B_d[None] * Dd)[:, None] * crandn(rng, (n, S, L, M))
        tb = np.sqrt(bg.kappa_tb**2 * bg.A_d[None] * Dd)[:, None] * crandn(rng, (n, S, L, M))
        x_rf = bg.A_d[None, None] * x + dac + tb
        u = np.einsum("nlkrm,nsrm->nslk", h.conj(), x_rf, optimize=True)
        # conditional received power given channels and precoders
        g = np.einsum("nlkrm,rm,nrjm->nlkrj", h.conj(), bg.A_d, w, optimize=True)
        coherent = np.abs(np.einsum("pjr,nlkrj->nlkpj", g_w, g, optimize=True)) ** 2
        delta = np.sum(coherent, axis=(3, 4))
        delta += np.einsum("rm,nrm,nlkrm->nlk", bg.B_d + bg.kappa_tb**2 * bg.A_d, Dd, np.abs(h) ** 2)
        ru = np.sqrt(bg.kappa_ru**2 * delta)[:, None] * crandn(rng, (n, S, L, K))
        z = np.sqrt(config.noise_power) * crandn(rng, (n, S, L, K))
        y_rf = u + ru + z
        eps = (1 + bg.kappa_ru**2) * delta + config.noise_power
        adc = np.sqrt(a_ue * (1 - a_ue) * eps)[:, None] * crandn(rng, (n, S, L, K))
        y = a_ue * y_rf + adc
        cross += np.sum(y * s.conj(), axis=(0, 1))
        power += np.sum(np.abs(y) ** 2, axis=(0, 1))
        count += n * S
    desired = np.abs(cross / count) ** 2
    return desired / (power / count - desired)
