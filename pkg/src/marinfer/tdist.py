"""Generalized Student's-t density, approximate MAR log-likelihood, and
the information constants that scale the Fisher matrix blocks.

The density has degrees of freedom nu > 0 and scale eta > 0; its variance
eta^2 nu/(nu-2) exists only for nu > 2.  Everything here works in log space
(log-gamma, never raw gamma).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .lagpoly import LagPolynomial, filter_causal, filter_noncausal


class InfiniteVarianceError(ValueError):
    """Raised where a construction needs a finite error variance (nu > 2)."""


@dataclass(frozen=True)
class TParams:
    """Degrees of freedom and scale of the generalized Student's t."""

    nu: float
    eta: float

    def __post_init__(self):
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be positive and finite, got {self.nu}")
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise ValueError(f"eta must be positive and finite, got {self.eta}")


def log_density(eps, p: TParams):
    """Log density of the generalized Student's t at eps (scalar or array)."""
    eps = np.asarray(eps, dtype=float)
    if not np.all(np.isfinite(eps)):
        raise ValueError("eps must be finite")
    nu, eta = p.nu, p.eta
    const = gammaln((nu + 1.0) / 2.0) - gammaln(nu / 2.0) - 0.5 * math.log(nu * math.pi) - math.log(eta)
    out = const - (nu + 1.0) / 2.0 * np.log1p((eps / eta) ** 2 / nu)
    return out if out.ndim else float(out)


def residual_filter(y: np.ndarray, phi: LagPolynomial, vphi: LagPolynomial) -> np.ndarray:
    """Apply the causal and noncausal filters: eps_t for t = r+1 ... T-s."""
    return filter_causal(filter_noncausal(np.asarray(y, dtype=float), vphi), phi)


def loglik(y: np.ndarray, phi: LagPolynomial, vphi: LagPolynomial, p: TParams) -> float:
    """Approximate log-likelihood of a MAR(r,s) sample.

    The first r and last s observations are dropped by the filtering, so the
    constant term carries the multiplier T - p with p = r + s (the effective
    sample size), matching the number of residual terms in the sum.
    """
    y = np.asarray(y, dtype=float)
    r, s = phi.degree, vphi.degree
    if len(y) <= r + s:
        raise ValueError(f"need more than r+s={r + s} observations, got {len(y)}")
    eps = residual_filter(y, phi, vphi)
    nu, eta = p.nu, p.eta
    t_eff = len(y) - r - s
    const = gammaln((nu + 1.0) / 2.0) - math.log(math.sqrt(nu * math.pi) * eta) - gammaln(nu / 2.0)
    return float(t_eff * const - (nu + 1.0) / 2.0 * np.sum(np.log1p((eps / eta) ** 2 / nu)))


def sample(n: int, p: TParams, seed) -> np.ndarray:
    """n i.i.d. draws eta * Z / sqrt(G/nu), Z standard normal, G ~ Gamma(nu/2, 2).

    Deterministic given seed; seed may be anything ``numpy.random.default_rng``
    accepts (int, SeedSequence, Generator).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(n)
    g = rng.gamma(shape=p.nu / 2.0, scale=2.0, size=n)
    return p.eta * z / np.sqrt(g / p.nu)


def sample_gaussian(n: int, sigma: float, seed) -> np.ndarray:
    """n i.i.d. N(0, sigma^2) draws; the Gaussian limit of the error process."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    return sigma * rng.standard_normal(n)


def fisher_J(nu: float) -> float:
    """Information constant nu(nu+1)/((nu-2)(nu+3)); defined only for nu > 2."""
    if nu <= 2:
        raise InfiniteVarianceError(
            f"the scaled information constant requires nu > 2 (got nu={nu}): "
            "the error variance is infinite and the classical Fisher matrix is unavailable"
        )
    return nu * (nu + 1.0) / ((nu - 2.0) * (nu + 3.0))


def fisher_J_tilde(p: TParams) -> float:
    """Variance-free information constant (nu+1)/((nu+3) eta^2).

    Finite for every nu > 0, which is what keeps the robust Fisher matrix
    computable when the error variance does not exist.
    """
    return (p.nu + 1.0) / ((p.nu + 3.0) * p.eta**2)


def error_variance(p: TParams) -> float:
    """eta^2 nu/(nu-2) for nu > 2; math.inf otherwise (not an exception)."""
    if p.nu <= 2:
        return math.inf
    return p.eta**2 * p.nu / (p.nu - 2.0)
