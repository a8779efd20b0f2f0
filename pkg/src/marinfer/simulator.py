"""Sample-path generation for MAR(r,s) processes with Student-t innovations.

The noncausal half is solved by backward recursion from a zero-initialized
tail, the causal half by forward recursion from a zero-initialized head, and
burn-in segments on both sides absorb the transients.  With infinite-variance
innovations there is no second-moment stationary start, so zero initialization
plus a generous burn-in is the honest construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .estimator import MarModel
from .lagpoly import NonStationaryError, is_stationary
from .tdist import residual_filter, sample


@dataclass(frozen=True)
class SimConfig:
    T: int
    model: MarModel
    burn: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if self.burn < 0:
            raise ValueError("burn must be >= 0")


def mar_recursion(eps: np.ndarray, phi: np.ndarray, vphi: np.ndarray) -> np.ndarray:
    """Solve phi(L) vphi(L^-1) y = eps on the full innovation array.

    Backward pass: w_t = eps_t + sum_i vphi_i w_{t+i} (zero beyond the end).
    Forward pass:  y_t = w_t + sum_i phi_i y_{t-i} (zero before the start).
    """
    eps = np.asarray(eps, dtype=float)
    a_lead = np.concatenate(([1.0], -np.asarray(vphi, dtype=float)))
    a_lag = np.concatenate(([1.0], -np.asarray(phi, dtype=float)))
    w = lfilter([1.0], a_lead, eps[::-1])[::-1]
    return lfilter([1.0], a_lag, w)


def simulate_mar(cfg: SimConfig) -> np.ndarray:
    """Simulate a MAR path of length cfg.T; deterministic given cfg.seed."""
    model = cfg.model
    for poly in (model.phi_poly, model.vphi_poly):
        if not is_stationary(poly):
            raise NonStationaryError("simulation requires stationary polynomials")
    eps = sample(cfg.T + 2 * cfg.burn, model.dist, cfg.seed)
    y = mar_recursion(eps, model.phi, model.vphi)
    return y[cfg.burn : cfg.burn + cfg.T]


def residuals(y: np.ndarray, model: MarModel) -> np.ndarray:
    """eps_t = phi(L) vphi(L^-1) y_t for t = r+1 ... T-s (length T - p)."""
    return residual_filter(y, model.phi_poly, model.vphi_poly)


def spawn_seed(master_seed: int, *index) -> np.random.SeedSequence:
    """Counter-derived child seed: identical regardless of scheduling order."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=tuple(index))
