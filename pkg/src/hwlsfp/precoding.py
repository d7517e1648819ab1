"""Local precoders built from own-cell estimates and statistics.

Directions are computed per Monte-Carlo realization and normalized with a
common scalar per UE, ``omega = 1 / sqrt(E ||v||^2)``, so that the average
precoder power is one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import DegenerateInputError, NumericalError
from .hardware import BussgangMatrices
from .scenario import ChannelStatistics, SystemConfig


class PrecoderKind(str, Enum):
    MR = "MR"
    DU_MMSE = "DU"
    DA_MMSE = "DA"

    @classmethod
    def parse(cls, value) -> "PrecoderKind":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-MMSE", "").replace("_MMSE", "")
        for kind in cls:
            if kind.value == key or kind.name == key:
                return kind
        raise ValueError(f"unknown precoder {value!r}; expected MR, DU or DA")


@dataclass
class PrecoderSet:
    """Unnormalized directions ``v[n, l, k]`` and normalizers ``omega[l, k]``."""

    kind: PrecoderKind
    v: np.ndarray
    omega: np.ndarray

    @property
    def w(self) -> np.ndarray:
        return self.omega[None, :, :, None] * self.v


def normalize_precoders(v: np.ndarray) -> np.ndarray:
    """``omega[l, k] = 1 / sqrt(mean_n ||v[n, l, k]||^2)``."""
    power = np.mean(np.sum(np.abs(v) ** 2, axis=-1), axis=0)
    if np.any(power <= 0):
        raise DegenerateInputError("precoder direction has zero mean power")
    return 1.0 / np.sqrt(power)


def _other_cell_rbar(stats: ChannelStatistics, weights: np.ndarray) -> np.ndarray:
    """``sum_{l' != l} sum_i weights[l', i] R_bar[l', i, l]`` for every BS l, shape (L, M, M)."""
    L, K, M = stats.shape
    total = np.einsum("li,lijab->jab", weights, stats.R_bar)
    own = np.einsum("li,liab->lab", weights, stats.R_bar[np.arange(L), :, np.arange(L)])
    return total - own


def mr_directions(h_hat_own: np.ndarray, check: bool = True) -> np.ndarray:
    if check and not np.any(h_hat_own):
        raise DegenerateInputError("all channel estimates are zero")
    return h_hat_own.copy()


def du_mmse_directions(
    h_hat_own: np.ndarray, C_err_own: np.ndarray, stats: ChannelStatistics, config: SystemConfig
) -> np.ndarray:
    """Columns of ``(H P H^H + sum p C + sum_{l'!=l} p R_bar + sigma^2 I)^{-1} H P`` per BS."""
    n, L, K, M = h_hat_own.shape
    p = np.full((L, K), float(config.pilot_power))
    static = np.einsum("li,liab->lab", p, C_err_own) + _other_cell_rbar(stats, p)
    static = static + config.noise_power * np.eye(M)
    v = np.empty_like(h_hat_own)
    for l in range(L):
        H = np.swapaxes(h_hat_own[:, l], -1, -2)  # (n, M, K)
        HP = H * p[l]
        Z = static[l] + HP @ np.conj(np.swapaxes(H, -1, -2))
        try:
            v[:, l] = np.swapaxes(np.linalg.solve(Z, HP), -1, -2)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"DU-MMSE matrix of BS {l} is singular") from exc
    return v


def da_mmse_directions(
    h_hat_own: np.ndarray,
    C_err_own: np.ndarray,
    stats: ChannelStatistics,
    bg: BussgangMatrices,
    config: SystemConfig,
) -> np.ndarray:
    """Distortion-aware MMSE directions ``Vhat_l^{-1} H_l P_l``.

    ``Vhat_l = Mmat A_a + (I - A_a) Shat`` with
    ``Mmat = sum_i at p (h h^H + C) + sum_{l'!=l} at p R_bar + kappa_rb^2 What + sigma^2 I``,
    ``What`` its per-antenna received-power diagonal and
    ``Shat = (1 + kappa_rb^2) What + sigma^2 I``; ``at = alpha_d (1 + kappa_tu^2)``.
    """
    n, L, K, M = h_hat_own.shape
    p = np.full((L, K), float(config.pilot_power))
    wt = bg.alpha_d_tilde * p
    sigma2 = config.noise_power
    other = _other_cell_rbar(stats, wt)
    static = np.einsum("li,liab->lab", wt, C_err_own) + other
    static_diag = np.real(np.diagonal(static, axis1=-2, axis2=-1))  # (L, M)
    v = np.empty_like(h_hat_own)
    eye = np.eye(M)
    for l in range(L):
        H = np.swapaxes(h_hat_own[:, l], -1, -2)  # (n, M, K)
        dyn = (H * wt[l]) @ np.conj(np.swapaxes(H, -1, -2))
        W_diag = static_diag[l] + np.sum(wt[l] * np.abs(H) ** 2, axis=-1)  # (n, M)
        S_diag = (1 + bg.kappa_rb**2) * W_diag + sigma2
        Mmat = static[l] + dyn + (bg.kappa_rb**2 * W_diag)[..., None] * eye + sigma2 * eye
        a = bg.A_a[l]
        Vhat = Mmat * a[None, None, :] + ((1 - a)[None, :] * S_diag)[..., None] * eye
        try:
            v[:, l] = np.swapaxes(np.linalg.solve(Vhat, H * p[l]), -1, -2)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"DA-MMSE matrix of BS {l} is singular") from exc
    return v


def build_directions(kind, h_hat_own, C_err_own, stats, bg, config) -> np.ndarray:
    """Unnormalized directions of any kind; all-zero estimates give all-zero MR directions."""
    kind = PrecoderKind.parse(kind)
    if kind is PrecoderKind.MR:
        return mr_directions(h_hat_own, check=False)
    if kind is PrecoderKind.DU_MMSE:
        return du_mmse_directions(h_hat_own, C_err_own, stats, config)
    return da_mmse_directions(h_hat_own, C_err_own, stats, bg, config)


def mr_precoder(h_hat_own) -> PrecoderSet:
    v = mr_directions(h_hat_own)
    return PrecoderSet(PrecoderKind.MR, v, normalize_precoders(v))


def du_mmse_precoder(h_hat_own, C_err_own, stats, config) -> PrecoderSet:
    v = du_mmse_directions(h_hat_own, C_err_own, stats, config)
    return PrecoderSet(PrecoderKind.DU_MMSE, v, normalize_precoders(v))


def da_mmse_precoder(h_hat_own, C_err_own, stats, bg, config) -> PrecoderSet:
    v = da_mmse_directions(h_hat_own, C_err_own, stats, bg, config)
    return PrecoderSet(PrecoderKind.DA_MMSE, v, normalize_precoders(v))


def uplink_sinr_matrices(h_hat_own, C_err_own, stats, bg, config, l: int, k: int):
    """Signal vector and interference-plus-distortion matrix of the uplink SINR.

    ``h_hat_own`` is a single realization, shape (L, K, M). Returns
    ``(a_tilde, B_tilde)`` such that ``SINR(v) = |v^H a|^2 / v^H B v``.
    """
    L, K, M = h_hat_own.shape
    p = np.full((L, K), float(config.pilot_power))
    wt = bg.alpha_d_tilde * p
    a = bg.A_a[l]
    sigma2 = config.noise_power
    H = h_hat_own[l]  # (K, M)
    own = np.einsum("i,ia,ib->ab", wt[l], H, H.conj()) + np.einsum("i,iab->ab", wt[l], C_err_own[l])
    other = _other_cell_rbar(stats, wt)[l]
    W_diag = np.real(np.diagonal(own + other))
    S_diag = (1 + bg.kappa_rb**2) * W_diag + sigma2
    A = np.diag(a)
    desired = bg.alpha_d[l, k] * np.sqrt(p[l, k]) * (a * H[k])
    B = A @ (own + other) @ A - np.outer(desired, desired.conj())
    B = B + np.diag(bg.kappa_rb**2 * a * W_diag * a + bg.B_a[l] * S_diag + sigma2 * a**2)
    return desired, (B + B.conj().T) / 2


def uplink_sinr(v: np.ndarray, a_tilde: np.ndarray, B_tilde: np.ndarray) -> float:
    num = np.abs(np.vdot(v, a_tilde)) ** 2
    den = np.real(np.vdot(v, B_tilde @ v))
    return float(num / den)
