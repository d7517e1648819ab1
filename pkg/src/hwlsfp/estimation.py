"""Uplink pilot phase through the impairment chain and phase-unaware LMMSE estimation.

Pilot ``k`` is shared by UE ``k`` of every cell. Observations are indexed
``y[..., j, k, :]`` (BS ``j``, pilot ``k``); estimates ``h_hat[..., l, k, j, :]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError, NumericalError
from .hardware import BussgangMatrices
from .scenario import ChannelStatistics, SystemConfig
from .streams import crandn


def pilot_book(tau_p: int, n_ues: int) -> np.ndarray:
    """Orthogonal unit-modulus pilots, shape (tau_p, K); ``phi_k^H phi_k' = tau_p delta``."""
    t = np.arange(tau_p)[:, None]
    k = np.arange(n_ues)[None, :]
    return np.exp(-2j * np.pi * t * k / tau_p)


def _pilot_powers(config: SystemConfig) -> np.ndarray:
    return np.full((config.n_cells, config.n_ues), float(config.pilot_power))


def expected_receive_diag(stats: ChannelStatistics, bg: BussgangMatrices, config: SystemConfig) -> np.ndarray:
    """``J^j = E[Wbar^j]`` as diagonals, shape (L, M).

    Cross terms between pilot-sharing UEs average out because the channels
    of different UEs are independent and zero-mean.
    """
    p = _pilot_powers(config)
    weight = (1 + bg.kappa_tu**2) * bg.alpha_d * p
    diag_rbar = np.real(np.diagonal(stats.R_bar, axis1=-2, axis2=-1))  # (L, K, L, M)
    return np.einsum("lk,lkjm->jm", weight, diag_rbar)


def compute_cyy(stats: ChannelStatistics, bg: BussgangMatrices, config: SystemConfig) -> np.ndarray:
    """Covariance of the correlated pilot observation, shape (L, K, M, M) as ``[j, k]``."""
    L, K, M = stats.shape
    tau = config.tau_p
    sigma2 = config.noise_power
    p = _pilot_powers(config)
    ad = bg.alpha_d
    J = expected_receive_diag(stats, bg, config)  # (L, M)

    # R_bar[l, k, j] reorganized to [j, k, l]
    rbar = np.transpose(stats.R_bar, (2, 1, 0, 3, 4))
    coherent = np.einsum("lk,jklab->jkab", ad**2 * p * tau**2, rbar)
    distortion = np.einsum("lk,lkjab->jab", tau * ad * (1 - ad + bg.kappa_tu**2) * p, stats.R_bar)
    inner = coherent + distortion[:, None]
    inner += (tau * bg.kappa_rb**2 * J + sigma2 * tau)[:, None, :, None] * np.eye(M)
    a = bg.A_a  # (L, M)
    cyy = inner * (a[:, None, :, None] * a[:, None, None, :])
    quant = tau * bg.B_a * ((1 + bg.kappa_rb**2) * J + sigma2)  # (L, M)
    cyy = cyy + quant[:, None, :, None] * np.eye(M)
    return (cyy + np.conj(np.swapaxes(cyy, -1, -2))) / 2


def simulate_pilot_reception(
    h: np.ndarray, bg: BussgangMatrices, config: SystemConfig, rng: np.random.Generator
) -> np.ndarray:
    """Simulate the full uplink pilot chain and correlate with every pilot.

    Parameters
    ----------
    h : (n, L, K, L, M) complex
        Channel realizations ``h[n, l, k, j]``.

    Returns
    -------
    y : (n, L, K, M) complex
        ``y[n, j, k] = Y^j phi_k^*``.
    """
    if h.ndim != 5:
        raise ContractError(f"expected channels of shape (n, L, K, L, M), got {h.shape}")
    n, L, K, Lj, M = h.shape
    if (L, K) != bg.alpha_d.shape or bg.A_a.shape != (Lj, M):
        raise ContractError("channel and hardware dimensions disagree")
    tau = config.tau_p
    sigma2 = config.noise_power
    p = _pilot_powers(config)
    ad = bg.alpha_d
    phi = pilot_book(tau, K)  # (tau, K)

    # UE transmit chain: DAC gain + quantization noise + transmit EVM
    tx = (ad * np.sqrt(p))[None, :, :, None] * phi.T[None, None, :, :]
    dac_std = np.sqrt(ad * (1 - ad) * p)
    evm_std = np.sqrt(bg.kappa_tu**2 * ad * p)
    tx = tx + (dac_std[None, :, :, None] * crandn(rng, (n, L, K, tau)))
    tx = tx + (evm_std[None, :, :, None] * crandn(rng, (n, L, K, tau)))

    coh = (ad * np.sqrt(p))[None, :, :, None]
    y = np.empty((n, Lj, K, M), dtype=complex)
    for j in range(Lj):
        hj = h[:, :, :, j, :]  # (n, L, K, M)
        Y = np.einsum("nlkm,nlkt->nmt", hj, tx)
        # time-averaged per-antenna received power given the channels
        own = np.einsum("lk,nlkm->nm", (1 + bg.kappa_tu**2) * ad * p, np.abs(hj) ** 2)
        shared = np.sum(np.abs(np.sum(coh * hj, axis=1)) ** 2 - np.sum(np.abs(coh * hj) ** 2, axis=1), axis=1)
        W = own + shared
        Y = Y + np.sqrt(bg.kappa_rb**2 * W)[..., None] * crandn(rng, (n, M, tau))
        Y = Y + np.sqrt(sigma2) * crandn(rng, (n, M, tau))
        S = (1 + bg.kappa_rb**2) * W + sigma2
        Y = bg.A_a[j][None, :, None] * Y + np.sqrt(bg.B_a[j][None, :] * S)[..., None] * crandn(rng, (n, M, tau))
        y[:, j] = np.einsum("nmt,tk->nkm", Y, phi.conj())
    return y


@dataclass
class ChannelEstimate:
    """Estimates ``h_hat[..., l, k, j, :]`` with their error and observation covariances.

    ``C_err[l, k, j]`` and ``C_yy[j, k]`` are M x M.
    """

    h_hat: np.ndarray
    C_err: np.ndarray
    C_yy: np.ndarray


class LmmseEstimator:
    """Precomputed phase-unaware LMMSE filters for every link.

    The filter of link ``(l, k, j)`` is
    ``F = alpha_d sqrt(p) tau_p R_bar A_a C_yy^{-1}``, applied to ``y[j, k]``.
    """

    def __init__(self, stats: ChannelStatistics, bg: BussgangMatrices, config: SystemConfig):
        L, K, M = stats.shape
        self.C_yy = compute_cyy(stats, bg, config)
        gain = bg.alpha_d * np.sqrt(config.pilot_power) * config.tau_p  # (L, K)
        # A_a R_bar for link (l, k, j) with the A_a of BS j
        ar = bg.A_a[None, None, :, :, None] * stats.R_bar
        cyy_lkj = np.broadcast_to(np.transpose(self.C_yy, (1, 0, 2, 3))[None], (L, K, L, M, M))
        try:
            sol = np.linalg.solve(cyy_lkj, ar)  # C_yy^{-1} A R_bar
        except np.linalg.LinAlgError as exc:
            raise NumericalError("pilot covariance is singular") from exc
        self.F = gain[:, :, None, None, None] * np.conj(np.swapaxes(sol, -1, -2))
        est_cov = gain[:, :, None, None, None] * np.matmul(self.F, ar)
        self.C_err = stats.R_bar - (est_cov + np.conj(np.swapaxes(est_cov, -1, -2))) / 2

    def estimate(self, y: np.ndarray) -> np.ndarray:
        """All links: ``h_hat[n, l, k, j] = F[l, k, j] y[n, j, k]``."""
        return np.einsum("lkjab,njkb->nlkja", self.F, y)

    def estimate_own(self, y: np.ndarray) -> np.ndarray:
        """Own-cell links only, ``h_hat[n, l, k] = F[l, k, l] y[n, l, k]``, shape (n, L, K, M)."""
        L = self.F.shape[0]
        F_own = self.F[np.arange(L), :, np.arange(L)]  # (L, K, M, M)
        return np.einsum("lkab,nlkb->nlka", F_own, y)

    @property
    def C_err_own(self) -> np.ndarray:
        L = self.F.shape[0]
        return self.C_err[np.arange(L), :, np.arange(L)]


def lmmse_estimate(y, stats: ChannelStatistics, bg: BussgangMatrices, config: SystemConfig) -> ChannelEstimate:
    """Phase-unaware LMMSE estimates of every link from observations ``y[..., j, k, :]``."""
    est = LmmseEstimator(stats, bg, config)
    y = np.asarray(y)
    squeeze = y.ndim == 3
    if squeeze:
        y = y[None]
    h_hat = est.estimate(y)
    return ChannelEstimate(h_hat[0] if squeeze else h_hat, est.C_err, est.C_yy)
