"""Lag/lead polynomial arithmetic for mixed causal-noncausal autoregressions.

A polynomial with coefficient vector (c_1, ..., c_d) represents
1 - c_1 z - ... - c_d z^d.  The same object serves as a lag polynomial
(acting on past values) or a lead polynomial (acting on future values);
stationarity means all roots strictly outside the unit circle either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NonStationaryError(ValueError):
    """Polynomial has a root on or inside the unit circle."""


# Roots with modulus <= 1 + this margin count as non-stationary, so the
# optimizer can never sit numerically on the unit circle.
STATIONARITY_MARGIN = 1e-8


@dataclass(frozen=True)
class LagPolynomial:
    """Coefficients (c_1 ... c_d) of 1 - c_1 z - ... - c_d z^d."""

    coeffs: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).ravel()
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class MaExpansion:
    """Truncated MA(inf) weights psi_0=1, psi_1, ... with tail diagnostics."""

    weights: np.ndarray
    tail: float
    truncated: bool  # True when max_terms was hit before the tail fell below tol


def companion_matrix(poly: LagPolynomial) -> np.ndarray:
    """Companion matrix of the recursion psi_j = sum_i c_i psi_{j-i}.

    Its eigenvalues are the reciprocals of the polynomial roots, so
    stationarity is equivalent to spectral radius < 1.
    """
    d = poly.degree
    if d == 0:
        return np.empty((0, 0))
    top = poly.coeffs.reshape(1, -1)
    if d == 1:
        return top
    return np.vstack([top, np.hstack([np.eye(d - 1), np.zeros((d - 1, 1))])])


def is_stationary(poly: LagPolynomial) -> bool:
    """True iff every root of the polynomial has modulus > 1.

    Degree 0 (the identity polynomial) is stationary.  Root moduli within
    ``STATIONARITY_MARGIN`` of the unit circle are rejected.
    """
    if not np.all(np.isfinite(poly.coeffs)):
        raise ValueError("polynomial coefficients must be finite")
    if poly.degree == 0:
        return True
    rho = np.max(np.abs(np.linalg.eigvals(companion_matrix(poly))))
    return rho < 1.0 / (1.0 + STATIONARITY_MARGIN)


def ma_weights(poly: LagPolynomial, tol: float = 1e-12, max_terms: int = 4096) -> MaExpansion:
    """MA(inf) weights of 1/poly: psi_0 = 1, psi_j = sum_i c_i psi_{j-i}.

    Truncates once the last ``degree`` consecutive weights all fall below
    ``tol`` in magnitude (for degree 1 this is the first sub-tol weight;
    requiring a full window guards against oscillating expansions passing
    through zero), or at ``max_terms``, whichever comes first.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not is_stationary(poly):
        raise NonStationaryError("MA(inf) expansion requires a stationary polynomial")
    d = poly.degree
    if d == 0:
        return MaExpansion(weights=np.ones(1), tail=0.0, truncated=False)
    c = poly.coeffs
    psi = [1.0]
    window = max(d, 1)
    while len(psi) < max_terms:
        j = len(psi)
        lo = max(0, j - d)
        seg = psi[lo:j]
        nxt = float(np.dot(c[: j - lo], seg[::-1]))
        psi.append(nxt)
        if len(psi) > window and max(abs(v) for v in psi[-window:]) < tol:
            return MaExpansion(weights=np.array(psi), tail=abs(nxt), truncated=False)
    return MaExpansion(weights=np.array(psi), tail=abs(psi[-1]), truncated=abs(psi[-1]) >= tol)


def filter_causal(y: np.ndarray, poly: LagPolynomial) -> np.ndarray:
    """z_t = y_t - sum_i c_i y_{t-i} for t = d+1 ... T (length T - d)."""
    y = np.asarray(y, dtype=float)
    d = poly.degree
    if len(y) <= d:
        raise ValueError(f"series of length {len(y)} too short for degree {d} filter")
    if d == 0:
        return y.copy()
    z = y[d:].copy()
    for i, c in enumerate(poly.coeffs, start=1):
        z -= c * y[d - i : len(y) - i]
    return z


def filter_noncausal(y: np.ndarray, poly: LagPolynomial) -> np.ndarray:
    """z_t = y_t - sum_i c_i y_{t+i} for t = 1 ... T - d (length T - d)."""
    y = np.asarray(y, dtype=float)
    return filter_causal(y[::-1], poly)[::-1]
