"""Rician channel realizations with a random LoS phase."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ModelError
from .streams import crandn


def steering_vector(theta: float, M: int) -> np.ndarray:
    """Half-wavelength ULA response ``exp(i*pi*m*sin(theta))``, m = 0..M-1."""
    return np.exp(1j * np.pi * np.arange(M) * np.sin(theta))


def psd_sqrt(R: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Eigenvalues in ``[-rel_tol * lambda_max, 0)`` are clipped to zero; more
    negative ones raise :class:`ModelError`.
    """
    w, V = np.linalg.eigh(R)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if scale == 0.0:
        return np.zeros_like(R)
    if w.min() < -rel_tol * scale:
        raise ModelError(f"covariance not PSD (min eigenvalue {w.min():.3e})")
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


@dataclass
class ChannelRealization:
    """Channel vectors ``h`` (..., M) and the LoS phases ``phi`` in [-pi, pi)."""

    h: np.ndarray
    phi: np.ndarray


def sample_channel(h_bar, R, rng: np.random.Generator, n: int | None = None, sqrt_R=None) -> ChannelRealization:
    """Draw ``h = h_bar * exp(i*phi) + R^(1/2) w`` for one link.

    With ``n`` given, returns ``n`` independent draws stacked along axis 0.
    """
    h_bar = np.asarray(h_bar, dtype=complex)
    S = psd_sqrt(np.asarray(R)) if sqrt_R is None else sqrt_R
    shape = () if n is None else (n,)
    phi = rng.uniform(-np.pi, np.pi, size=shape)
    w = crandn(rng, (*shape, h_bar.shape[-1]))
    h = h_bar * np.exp(1j * np.asarray(phi))[..., None] + w @ S.T
    return ChannelRealization(h=h, phi=phi)


def sample_channels(stats, n: int, rng: np.random.Generator) -> ChannelRealization:
    """Draw ``n`` joint realizations of every link, shape (n, L, K, L, M).

    Links are mutually independent; each gets its own LoS phase.
    """
    L, K, M = stats.shape
    phi = rng.uniform(-np.pi, np.pi, size=(n, L, K, L))
    w = crandn(rng, (n, L, K, L, M))
    h = stats.h_bar[None] * np.exp(1j * phi)[..., None]
    h = h + np.matmul(stats.sqrt_R[None], w[..., None])[..., 0]
    return ChannelRealization(h=h, phi=phi)
