"""Converter and RF-chain impairment models.

Low-resolution converters are described by the Bussgang gain
``alpha = 1 - rho`` where ``rho`` is the normalized mean-squared error of an
MMSE-optimal (Lloyd-Max) scalar quantizer driven by a unit-variance Gaussian.
RF chains are described by error-vector-magnitude factors ``kappa``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.stats import norm

from .exceptions import ConfigError, DomainError

IDEAL = "ideal"
Resolution = Union[int, str]

MAX_BITS = 15

# Lloyd-Max distortion for unit-variance Gaussian input, b = 1..15 bits.
# Generated by scripts/make_distortion_table.py (fixed-point iteration,
# threshold change < 1e-12 or 20000 sweeps).
DISTORTION_TABLE = {
    1: 0.3633802276324186,
    2: 0.11748184782932891,
    3: 0.034547760788503856,
    4: 0.009501008008191647,
    5: 0.002504668355674755,
    6: 0.0006442396653171256,
    7: 0.0001634782299799742,
    8: 4.118509260975234e-05,
    9: 1.0336887332096367e-05,
    10: 2.589390932561386e-06,
    11: 6.480013322596179e-07,
    12: 1.6208278319496117e-07,
    13: 4.053107882651119e-08,
    14: 1.0134075578704937e-08,
    15: 2.5336825970612153e-09,
}


def _check_bits(bits) -> Resolution:
    if isinstance(bits, str):
        if bits.lower() in (IDEAL, "inf", "infinite"):
            return IDEAL
        try:
            bits = int(bits)
        except ValueError:
            raise DomainError(f"unsupported resolution {bits!r}") from None
    if bits is None or (isinstance(bits, float) and np.isinf(bits)):
        return IDEAL
    if int(bits) != bits or not 1 <= int(bits) <= MAX_BITS:
        raise DomainError(f"unsupported resolution {bits!r}; expected 1..{MAX_BITS} or 'ideal'")
    return int(bits)


def lloyd_max_design(bits: int, tol: float = 1e-12, max_iter: int = 20000):
    """Design a Lloyd-Max quantizer for a unit-variance Gaussian source.

    Starts from the asymptotically optimal companding point density and
    alternates the nearest-neighbour and centroid conditions.

    Returns
    -------
    thresholds : ndarray, shape (2**bits - 1,)
    levels : ndarray, shape (2**bits,)
    distortion : float
        Mean-squared error ``1 - sum(levels**2 * P(cell))``.
    """
    n = 2**bits
    t = norm.ppf(np.arange(1, n) / n, scale=np.sqrt(3.0))

    def centroids(t):
        edges = np.concatenate(([-np.inf], t, [np.inf]))
        prob = np.diff(norm.cdf(edges))
        return -np.diff(norm.pdf(edges)) / prob, prob

    for _ in range(max_iter):
        c, _ = centroids(t)
        t_new = (c[:-1] + c[1:]) / 2
        done = np.max(np.abs(t_new - t)) < tol
        t = t_new
        if done:
            break
    c, prob = centroids(t)
    return t, c, float(1.0 - np.sum(c**2 * prob))


@lru_cache(maxsize=None)
def _codebook(bits: int):
    t, c, _ = lloyd_max_design(bits, tol=1e-10, max_iter=5000)
    return t, c


def distortion_factor(bits) -> float:
    """Normalized MSE ``rho`` of the optimal quantizer; 0 for ideal resolution."""
    bits = _check_bits(bits)
    return 0.0 if bits == IDEAL else DISTORTION_TABLE[bits]


def bussgang_gain(bits) -> float:
    return 1.0 - distortion_factor(bits)


def lloyd_max_quantize(x, bits):
    """Quantize unit-variance input with the Lloyd-Max codebook.

    Complex input is quantized per real and imaginary part; the caller scales
    each part to unit variance beforehand. Inputs exactly on a threshold go to
    the upper cell.
    """
    bits = _check_bits(bits)
    x = np.asarray(x)
    if bits == IDEAL:
        return x.copy()
    t, c = _codebook(bits)
    if np.iscomplexobj(x):
        return c[np.searchsorted(t, x.real, side="right")] + 1j * c[np.searchsorted(t, x.imag, side="right")]
    out = c[np.searchsorted(t, x, side="right")]
    return out if out.ndim else float(out)


def equal_proportion_bits(levels: Sequence[Resolution], n_antennas: int) -> list[Resolution]:
    """Assign resolutions to contiguous, equally sized antenna blocks."""
    levels = [_check_bits(b) for b in levels]
    blocks = np.array_split(np.arange(n_antennas), len(levels))
    out: list[Resolution] = []
    for b, idx in zip(levels, blocks):
        out.extend([b] * len(idx))
    return out


@dataclass(frozen=True)
class HardwareProfile:
    """EVM factors and converter resolutions.

    ``bs_adc_bits`` and ``bs_dac_bits`` hold one resolution per BS antenna
    (shared by all BSs); UE resolutions are scalars.
    """

    kappa_tb: float = 0.0
    kappa_rb: float = 0.0
    kappa_tu: float = 0.0
    kappa_ru: float = 0.0
    bs_adc_bits: tuple = ()
    bs_dac_bits: tuple = ()
    ue_adc_bits: Resolution = IDEAL
    ue_dac_bits: Resolution = IDEAL

    def __post_init__(self):
        for name in ("kappa_tb", "kappa_rb", "kappa_tu", "kappa_ru"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        object.__setattr__(self, "bs_adc_bits", tuple(_check_bits(b) for b in self.bs_adc_bits))
        object.__setattr__(self, "bs_dac_bits", tuple(_check_bits(b) for b in self.bs_dac_bits))
        object.__setattr__(self, "ue_adc_bits", _check_bits(self.ue_adc_bits))
        object.__setattr__(self, "ue_dac_bits", _check_bits(self.ue_dac_bits))

    @classmethod
    def ideal(cls, n_antennas: int) -> "HardwareProfile":
        return cls(bs_adc_bits=(IDEAL,) * n_antennas, bs_dac_bits=(IDEAL,) * n_antennas)

    @classmethod
    def uniform(
        cls,
        n_antennas: int,
        kappa_bs: float,
        kappa_ue: float,
        bs_levels: Sequence[Resolution],
        ue_bits: Resolution,
    ) -> "HardwareProfile":
        """BS EVM on both directions, UE EVM on both directions, BS bits in equal blocks."""
        bs = tuple(equal_proportion_bits(bs_levels, n_antennas))
        return cls(kappa_bs, kappa_bs, kappa_ue, kappa_ue, bs, bs, ue_bits, ue_bits)

    @property
    def n_antennas(self) -> int:
        return len(self.bs_adc_bits)


@dataclass(frozen=True)
class BussgangMatrices:
    """Diagonals of the Bussgang gain/noise matrices.

    ``A_a``, ``B_a``, ``A_d``, ``B_d`` have shape (L, M) and hold the diagonal
    of the corresponding M x M matrix of each BS. ``alpha_d`` and ``alpha_a``
    are the UE DAC/ADC gains, shape (L, K).
    """

    A_a: np.ndarray
    B_a: np.ndarray
    A_d: np.ndarray
    B_d: np.ndarray
    alpha_d: np.ndarray
    alpha_a: np.ndarray
    kappa_tb: float = 0.0
    kappa_rb: float = 0.0
    kappa_tu: float = 0.0
    kappa_ru: float = 0.0
    profile: HardwareProfile | None = field(default=None, compare=False)

    @property
    def alpha_d_tilde(self) -> np.ndarray:
        return self.alpha_d * (1 + self.kappa_tu**2)

    def matrix(self, name: str, j: int) -> np.ndarray:
        return np.diag(getattr(self, name)[j])


def build_bussgang_matrices(profile: HardwareProfile, n_cells: int = 1, n_ues: int = 1) -> BussgangMatrices:
    """Gains and noise factors for every BS antenna and UE of the network."""
    if len(profile.bs_adc_bits) != len(profile.bs_dac_bits):
        raise ConfigError("BS ADC and DAC resolution lists must have equal length")
    a_adc = np.array([bussgang_gain(b) for b in profile.bs_adc_bits])
    a_dac = np.array([bussgang_gain(b) for b in profile.bs_dac_bits])
    A_a = np.tile(a_adc, (n_cells, 1))
    A_d = np.tile(a_dac, (n_cells, 1))
    return BussgangMatrices(
        A_a=A_a,
        B_a=A_a * (1 - A_a),
        A_d=A_d,
        B_d=A_d * (1 - A_d),
        alpha_d=np.full((n_cells, n_ues), bussgang_gain(profile.ue_dac_bits)),
        alpha_a=np.full((n_cells, n_ues), bussgang_gain(profile.ue_adc_bits)),
        kappa_tb=profile.kappa_tb,
        kappa_rb=profile.kappa_rb,
        kappa_tu=profile.kappa_tu,
        kappa_ru=profile.kappa_ru,
        profile=profile,
    )


def conditional_diag_covariance(samples) -> np.ndarray:
    """``diag(E[x x^H])`` estimated from samples stacked along axis 0.

    A single 1-D vector is treated as one deterministic sample.
    """
    x = np.asarray(samples)
    if x.size == 0:
        raise DomainError("need at least one sample")
    if x.ndim == 1:
        x = x[None, :]
    return np.diag(np.mean(np.abs(x) ** 2, axis=0))


def export_distortion_table(path, bits=range(1, MAX_BITS + 1)) -> Path:
    """Write ``bits,rho,alpha`` rows (plus the ideal row) as CSV."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bits", "rho", "alpha"])
        for b in bits:
            rho = distortion_factor(b)
            writer.writerow([b, repr(rho), repr(1.0 - rho)])
        writer.writerow([IDEAL, 0.0, 1.0])
    return path
