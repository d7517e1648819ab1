"""Scikit-learn style wrapper around term estimation and LSFP optimization."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractError
from .hardware import BussgangMatrices, HardwareProfile, build_bussgang_matrices
from .optimizer import mm_optimize
from .performance import LsfpWeights, equal_power_slp, estimate_sinr_terms, per_ue_se, sinr_closed_form
from .precoding import PrecoderKind
from .scenario import ChannelStatistics, SystemConfig


def _check_problem(X):
    """Validate an ``(stats, hardware, config)`` triple.

    ``hardware`` may be a :class:`HardwareProfile` or prebuilt
    :class:`BussgangMatrices`.
    """
    try:
        stats, hw, config = X
    except (TypeError, ValueError):
        raise ContractError("X must be a (ChannelStatistics, hardware, SystemConfig) triple") from None
    if not isinstance(stats, ChannelStatistics) or not isinstance(config, SystemConfig):
        raise ContractError("X must be a (ChannelStatistics, hardware, SystemConfig) triple")
    if isinstance(hw, HardwareProfile):
        hw = build_bussgang_matrices(hw, config.n_cells, config.n_ues)
    if not isinstance(hw, BussgangMatrices):
        raise ContractError("hardware must be a HardwareProfile or BussgangMatrices")
    if stats.shape != (config.n_cells, config.n_ues, config.n_antennas):
        raise ContractError(f"statistics shape {stats.shape} does not match the configuration")
    return stats, hw, config


class LsfpPrecoder(BaseEstimator):
    """Fit LSFP weights for one precoder on a network.

    Parameters
    ----------
    precoder : {"MR", "DU", "DA"}
    scheme : {"LSFP", "SLP"}
        ``"SLP"`` keeps the equal-power single-layer weights.
    n_mc : int
        Monte-Carlo realizations for the SINR terms.
    eps, max_iters : float, int
        MM stopping rule.
    accelerate : bool
        Use Anderson-accelerated MM steps.
    seed : int or None
        Seed of the Monte-Carlo stream; ``None`` uses the configuration seed.

    Attributes
    ----------
    terms_ : SinrTerms
    weights_ : LsfpWeights
    trace_ : MmTrace or None
    n_iter_ : int
    """

    def __init__(self, precoder="DA", scheme="LSFP", n_mc=500, eps=1e-4, max_iters=50, accelerate=True, seed=None):
        self.precoder = precoder
        self.scheme = scheme
        self.n_mc = n_mc
        self.eps = eps
        self.max_iters = max_iters
        self.accelerate = accelerate
        self.seed = seed

    def _validate_params(self):
        PrecoderKind.parse(self.precoder)
        if self.scheme not in ("LSFP", "SLP"):
            raise ValueError(f"scheme must be 'LSFP' or 'SLP', got {self.scheme!r}")
        if int(self.n_mc) < 1 or int(self.max_iters) < 1 or not self.eps > 0:
            raise ValueError("n_mc and max_iters must be positive and eps > 0")

    def fit(self, X, y=None):
        """Estimate the SINR terms of ``X = (stats, hardware, config)`` and optimize the weights."""
        self._validate_params()
        stats, bg, config = _check_problem(X)
        self.config_ = config
        self.terms_ = estimate_sinr_terms(stats, bg, config, self.precoder, int(self.n_mc), seed=self.seed)
        if self.scheme == "SLP":
            self.weights_, self.trace_, self.n_iter_ = equal_power_slp(config), None, 0
        else:
            self.weights_, self.trace_ = mm_optimize(
                self.terms_,
                rho_d=config.rho_d,
                eps=self.eps,
                max_iters=int(self.max_iters),
                scale=config.prelog,
                accelerate=self.accelerate,
            )
            self.n_iter_ = self.trace_.n_iter
        return self

    def _weights(self, weights) -> LsfpWeights:
        if weights is None:
            return self.weights_
        return weights if isinstance(weights, LsfpWeights) else LsfpWeights(weights)

    def predict(self, weights=None) -> np.ndarray:
        """Per-UE spectral efficiency (L, K) for the fitted or the given weights."""
        check_is_fitted(self, "weights_")
        return per_ue_se(self.terms_, self._weights(weights), self.config_)

    def predict_sinr(self, weights=None) -> np.ndarray:
        check_is_fitted(self, "weights_")
        return sinr_closed_form(self.terms_, self._weights(weights))

    def score(self, X=None, y=None) -> float:
        """Sum spectral efficiency of the fitted weights."""
        return float(np.sum(self.predict()))
