"""Network geometry, large-scale fading and second-order channel statistics.

Array layout used throughout the package: a quantity attached to the link
between UE ``k`` of cell ``l`` and BS ``j`` is stored at index ``[l, k, j]``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.linalg import toeplitz

from .exceptions import ConfigError, DomainError, ModelError, ScenarioInfeasibleError
from .streams import GEOMETRY, make_rng


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    """System dimensions, powers and propagation constants.

    Powers are in watts. ``pilot_power`` is the per-UE uplink pilot power and
    ``rho_d`` the per-BS downlink budget.
    """

    n_cells: int = 4
    n_ues: int = 5
    n_antennas: int = 100
    tau_p: int | None = None
    tau_c: int = 200
    pilot_power: float = dbm_to_watt(23.0)
    rho_d: float = 1.0
    noise_power: float = dbm_to_watt(-96.0)
    area_side: float = 1000.0
    min_distance: float = 35.0
    asd_deg: float = 30.0
    seed: int = 0
    pathloss_intercept_db: float = -30.5
    pathloss_slope_db: float = 36.7
    rician_intercept_db10: float = 1.3
    rician_slope_per_m: float = 0.003

    def __post_init__(self):
        if self.tau_p is None:
            object.__setattr__(self, "tau_p", self.n_ues)
        self.validate()

    def validate(self) -> None:
        for name in ("n_cells", "n_ues", "n_antennas"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.tau_p < self.n_ues:
            raise ConfigError(f"tau_p={self.tau_p} must be >= n_ues={self.n_ues}")
        if self.tau_c <= self.tau_p:
            raise ConfigError(f"tau_c={self.tau_c} must exceed tau_p={self.tau_p}")
        for name in ("pilot_power", "rho_d", "noise_power", "area_side"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.min_distance < 0 or self.asd_deg < 0:
            raise ConfigError("min_distance and asd_deg must be non-negative")

    @property
    def prelog(self) -> float:
        return (self.tau_c - self.tau_p) / self.tau_c

    def replace(self, **changes) -> "SystemConfig":
        values = asdict(self)
        values.update(changes)
        if "n_ues" in changes and "tau_p" not in changes:
            values["tau_p"] = None
        return SystemConfig(**values)


@dataclass(frozen=True)
class Scenario:
    """UE drop: positions plus BS-UE distances and nominal angles ``[l, k, j]``."""

    bs_positions: np.ndarray
    ue_positions: np.ndarray
    distances: np.ndarray
    angles: np.ndarray

    @property
    def n_cells(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def n_ues(self) -> int:
        return self.ue_positions.shape[1]

    def to_dict(self) -> dict:
        return {
            "bs_positions": self.bs_positions.tolist(),
            "ue_positions": self.ue_positions.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        bs = np.asarray(data["bs_positions"], dtype=float)
        ue = np.asarray(data["ue_positions"], dtype=float)
        d, a = _link_geometry(bs, ue)
        return cls(bs, ue, d, a)


@dataclass
class ChannelStatistics:
    """Second-order statistics for every (UE, BS) pair.

    Attributes
    ----------
    h_bar : (L, K, L, M) complex
        LoS mean including the ``sqrt(beta * Kbar)`` scaling.
    R : (L, K, L, M, M) complex
        NLoS covariance ``beta * (1 - Kbar) * Sigma``.
    R_bar : (L, K, L, M, M) complex
        ``R + h_bar h_bar^H``.
    beta, k_factor : (L, K, L)
        Linear large-scale gain and Rician factor.
    """

    h_bar: np.ndarray
    R: np.ndarray
    R_bar: np.ndarray
    beta: np.ndarray
    k_factor: np.ndarray
    _sqrt_R: np.ndarray | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int, int]:
        L, K, _, M = self.h_bar.shape
        return L, K, M

    @property
    def sqrt_R(self) -> np.ndarray:
        if self._sqrt_R is None:
            from .channels import psd_sqrt

            L, K, M = self.shape
            self._sqrt_R = np.stack([psd_sqrt(R) for R in self.R.reshape(-1, M, M)]).reshape(self.R.shape)
        return self._sqrt_R


def _grid_shape(n_cells: int) -> tuple[int, int]:
    cols = math.ceil(math.sqrt(n_cells))
    rows = math.ceil(n_cells / cols)
    return rows, cols


def _link_geometry(bs: np.ndarray, ue: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # delta[l, k, j] = ue[l, k] - bs[j]
    delta = ue[:, :, None, :] - bs[None, None, :, :]
    distances = np.hypot(delta[..., 0], delta[..., 1])
    angles = np.arctan2(delta[..., 1], delta[..., 0])
    return distances, angles


def generate_network(config: SystemConfig, max_tries: int = 1000) -> Scenario:
    """Place BSs on a regular grid and drop ``K`` UEs uniformly in each cell.

    The square area is split into ``rows x cols`` equal rectangular cells with
    the BS at each cell center. UEs closer than ``min_distance`` to any BS are
    redrawn, at most ``max_tries`` times each.
    """
    L, K = config.n_cells, config.n_ues
    rows, cols = _grid_shape(L)
    width, height = config.area_side / cols, config.area_side / rows
    rng = make_rng(config.seed, GEOMETRY)

    corners = np.array([((l % cols) * width, (l // cols) * height) for l in range(L)])
    bs = corners + np.array([width / 2, height / 2])

    ue = np.empty((L, K, 2))
    for l in range(L):
        for k in range(K):
            for _ in range(max_tries):
                p = corners[l] + rng.uniform(size=2) * (width, height)
                if np.min(np.hypot(*(p - bs).T)) >= config.min_distance:
                    ue[l, k] = p
                    break
            else:
                raise ScenarioInfeasibleError(
                    f"cell {l}: no position at >= {config.min_distance} m from every BS "
                    f"after {max_tries} draws"
                )
    distances, angles = _link_geometry(bs, ue)
    return Scenario(bs, ue, distances, angles)


def large_scale_fading(distance_m, intercept_db: float = -30.5, slope_db: float = 36.7):
    """Linear channel gain ``10^((intercept - slope*log10(d))/10)``."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    beta = 10.0 ** ((intercept_db - slope_db * np.log10(d)) / 10.0)
    return beta if beta.ndim else float(beta)


def rician_factor(distance_m, intercept: float = 1.3, slope_per_m: float = 0.003):
    """Linear Rician factor ``K = 10^(intercept - slope*d)``."""
    d = np.asarray(distance_m, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    k = 10.0 ** (intercept - slope_per_m * d)
    return k if k.ndim else float(k)


def los_fraction(k_factor):
    """``Kbar = K / (K + 1)``; ``inf`` maps to 1."""
    k = np.asarray(k_factor, dtype=float)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(k), 1.0, k / (k + 1.0))
    return out if out.ndim else float(out)


def _clip_psd(S: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    w, V = np.linalg.eigh(S)
    scale = max(np.max(np.abs(w)), np.finfo(float).tiny)
    if w.min() < -rel_tol * scale:
        raise ModelError(f"matrix is not PSD: min eigenvalue {w.min():.3e} vs scale {scale:.3e}")
    if w.min() >= 0:
        return S
    S = (V * np.clip(w, 0.0, None)) @ V.conj().T
    return (S + S.conj().T) / 2


def build_correlation_matrix(
    nominal_angle_rad: float, asd_rad: float, M: int, method: str = "quadrature"
) -> np.ndarray:
    """Gaussian local-scattering correlation matrix of a half-wavelength ULA.

    ``method="quadrature"`` integrates ``exp(i*pi*(m-n)*sin(theta + delta))``
    against a zero-mean Gaussian angular deviation of standard deviation
    ``asd_rad``. ``method="closed_form"`` uses the small-ASD approximation
    ``exp(i*pi*d*sin(theta)) * exp(-(asd^2/2) * (pi*d*cos(theta))^2)``,
    which degrades at large ASD. Both are Toeplitz, Hermitian and scaled so
    that ``trace == M``.
    """
    if M < 1:
        raise DomainError("M must be >= 1")
    if asd_rad < 0:
        raise DomainError("asd must be non-negative")
    d = np.arange(M)
    if asd_rad == 0:
        col = np.exp(1j * np.pi * d * np.sin(nominal_angle_rad))
    elif method == "closed_form":
        col = np.exp(1j * np.pi * d * np.sin(nominal_angle_rad)) * np.exp(
            -(asd_rad**2) / 2 * (np.pi * d * np.cos(nominal_angle_rad)) ** 2
        )
    elif method == "quadrature":
        # trapezoid on +-8 sigma, step resolving the fastest phase rotation pi*(M-1)
        step = min(asd_rad / 16, 1.0 / (4 * max(M - 1, 1)))
        n = 2 * int(math.ceil(8 * asd_rad / step)) + 1
        delta = np.linspace(-8 * asd_rad, 8 * asd_rad, n)
        weights = np.exp(-(delta**2) / (2 * asd_rad**2))
        weights /= weights.sum()
        col = np.exp(1j * np.pi * np.outer(d, np.sin(nominal_angle_rad + delta))) @ weights
    else:
        raise ValueError(f"unknown method {method!r}")
    S = toeplitz(col, col.conj())
    S *= M / np.real(np.trace(S))
    return _clip_psd(S)


def build_channel_statistics(
    scenario: Scenario, config: SystemConfig, method: str = "quadrature"
) -> ChannelStatistics:
    """Assemble ``h_bar``, ``R`` and ``R_bar`` for every ``(l, k, j)`` link."""
    from .channels import steering_vector

    L, K, M = config.n_cells, config.n_ues, config.n_antennas
    if scenario.distances.shape != (L, K, L):
        raise ConfigError(f"scenario shape {scenario.distances.shape} does not match config {(L, K, L)}")
    beta = large_scale_fading(scenario.distances, config.pathloss_intercept_db, config.pathloss_slope_db)
    kf = rician_factor(scenario.distances, config.rician_intercept_db10, config.rician_slope_per_m)
    kbar = los_fraction(kf)
    asd = np.deg2rad(config.asd_deg)

    h_bar = np.empty((L, K, L, M), dtype=complex)
    R = np.empty((L, K, L, M, M), dtype=complex)
    for idx in np.ndindex(L, K, L):
        theta = scenario.angles[idx]
        h_bar[idx] = np.sqrt(beta[idx] * kbar[idx]) * steering_vector(theta, M)
        R[idx] = beta[idx] * (1 - kbar[idx]) * build_correlation_matrix(theta, asd, M, method)
    R_bar = R + h_bar[..., :, None] * h_bar[..., None, :].conj()
    return ChannelStatistics(h_bar=h_bar, R=R, R_bar=R_bar, beta=np.asarray(beta), k_factor=np.asarray(kf))


def build_statistics_from_gains(
    beta, k_factor, angles, M: int, asd_rad: float = 0.0, method: str = "quadrature"
) -> ChannelStatistics:
    """Statistics from explicit ``(L, K, L)`` gains, Rician factors and angles.

    Useful for hand-built test networks that bypass the geometry.
    """
    from .channels import steering_vector

    beta = np.asarray(beta, dtype=float)
    kbar = los_fraction(k_factor)
    kbar = np.broadcast_to(kbar, beta.shape)
    angles = np.broadcast_to(np.asarray(angles, dtype=float), beta.shape)
    L, K, _ = beta.shape
    h_bar = np.empty((L, K, L, M), dtype=complex)
    R = np.empty((L, K, L, M, M), dtype=complex)
    for idx in np.ndindex(*beta.shape):
        h_bar[idx] = np.sqrt(beta[idx] * kbar[idx]) * steering_vector(angles[idx], M)
        R[idx] = beta[idx] * (1 - kbar[idx]) * build_correlation_matrix(angles[idx], asd_rad, M, method)
    R_bar = R + h_bar[..., :, None] * h_bar[..., None, :].conj()
    return ChannelStatistics(h_bar, R, R_bar, beta, np.broadcast_to(np.asarray(k_factor, float), beta.shape).copy())
