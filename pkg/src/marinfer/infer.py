"""Standard errors for the causal/noncausal coefficients, three ways.

The classical expected-information matrix needs a finite error variance
(nu > 2).  The block-Hessian variant drops the cross blocks and stays
computable for any nu but underestimates the standard errors.  The robust
variant replaces the error variance with (k* MAD)^2 of the residuals and the
scaled information constant with its variance-free form, so it exists for
every tail index the estimator can produce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import FitResult, MarModel
from .lagpoly import LagPolynomial, NonStationaryError, is_stationary, ma_weights
from .robustscale import DegenerateSampleError, mad
from .tdist import TParams, fisher_J, fisher_J_tilde, loglik


class DegenerateHessianError(RuntimeError):
    """Observed-Hessian block is not positive definite; SEs are undefined."""


class SingularInformationError(np.linalg.LinAlgError):
    """Information matrix cannot be inverted."""


@dataclass(frozen=True)
class GammaBlocks:
    """Covariance blocks of the auxiliary AR processes driven by unit noise."""

    gamma_u: np.ndarray  # r x r
    gamma_v: np.ndarray  # s x s
    gamma_uv: np.ndarray  # r x s
    truncation: int

    @property
    def r(self) -> int:
        return self.gamma_u.shape[0]

    @property
    def s(self) -> int:
        return self.gamma_v.shape[0]


@dataclass(frozen=True)
class SeReport:
    method: str  # classic | block_hessian | robust
    se_phi: np.ndarray
    se_vphi: np.ndarray
    se_nu: float
    se_eta: float
    info_matrix: np.ndarray


def _autocov_from_weights(w: np.ndarray, n_lags: int) -> np.ndarray:
    return np.array([float(np.dot(w[: len(w) - lag], w[lag:])) for lag in range(n_lags)])


def _crosscov_from_weights(psi: np.ndarray, kappa: np.ndarray, lag: int) -> float:
    """sum_m psi_m kappa_{m+lag}; negative lags shift psi instead."""
    if lag >= 0:
        n = min(len(psi), len(kappa) - lag)
        return float(np.dot(psi[:n], kappa[lag : lag + n])) if n > 0 else 0.0
    return _crosscov_from_weights(kappa, psi, -lag)


def gamma_blocks(phi: LagPolynomial, vphi: LagPolynomial, tol: float = 1e-12, max_terms: int = 4096) -> GammaBlocks:
    """Covariances of the lagged auxiliary AR(r) and AR(s) processes.

    Both processes are driven by the same unit-variance noise, which is what
    produces the nonzero cross block.
    """
    for poly in (phi, vphi):
        if not is_stationary(poly):
            raise NonStationaryError("gamma blocks require stationary polynomials")
    r, s = phi.degree, vphi.degree
    psi = ma_weights(phi, tol=tol, max_terms=max_terms)
    kappa = ma_weights(vphi, tol=tol, max_terms=max_terms)
    acov_u = _autocov_from_weights(psi.weights, r)
    acov_v = _autocov_from_weights(kappa.weights, s)
    gamma_u = np.array([[acov_u[abs(i - j)] for j in range(r)] for i in range(r)]) if r else np.empty((0, 0))
    gamma_v = np.array([[acov_v[abs(i - j)] for j in range(s)] for i in range(s)]) if s else np.empty((0, 0))
    gamma_uv = np.array(
        [[_crosscov_from_weights(psi.weights, kappa.weights, i - j) for j in range(s)] for i in range(r)]
    ) if r and s else np.empty((r, s))
    return GammaBlocks(
        gamma_u=gamma_u,
        gamma_v=gamma_v,
        gamma_uv=gamma_uv,
        truncation=max(len(psi.weights), len(kappa.weights)),
    )


def _assemble(diag_scale: float, blocks: GammaBlocks) -> np.ndarray:
    r, s = blocks.r, blocks.s
    out = np.empty((r + s, r + s))
    out[:r, :r] = diag_scale * blocks.gamma_u
    out[:r, r:] = blocks.gamma_uv
    out[r:, :r] = blocks.gamma_uv.T
    out[r:, r:] = diag_scale * blocks.gamma_v
    return out


def sigma_classic(model: MarModel, blocks: GammaBlocks) -> np.ndarray:
    """Expected information of the coefficients: scaled diagonal blocks, bare
    cross blocks.  Only defined for nu > 2."""
    return _assemble(fisher_J(model.nu), blocks)


def sigma_robust(fit: FitResult, kstar: float, blocks: GammaBlocks) -> np.ndarray:
    """Robust information matrix: the error variance is replaced by
    (k* MAD(residuals))^2 and the information constant by its variance-free
    form, both evaluated at the estimates."""
    if kstar <= 0:
        raise ValueError("kstar must be positive")
    m = mad(fit.residuals)
    if m <= 0:
        raise DegenerateSampleError("residuals have zero MAD; robust scale undefined")
    sigma_hat = kstar * m
    return _assemble(sigma_hat**2 * fisher_J_tilde(fit.model.dist), blocks)


def numeric_hessian(f, x: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate steps step*max(1, |x_i|)."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    h = step * np.maximum(1.0, np.abs(x))
    H = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4.0 * h[i] * h[j])
    return H


def _prepare_series(y: np.ndarray, demean: bool) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return y - y.mean() if demean else y


def sigma_block_hessian(y: np.ndarray, fit: FitResult, step: float = 1e-4, demean: bool = True) -> np.ndarray:
    """Observed block-diagonal information of the coefficients.

    Numerically differentiates the log-likelihood at the estimates, keeps only
    the phi-phi and vphi-vphi blocks (distributional parameters held at their
    estimates), and normalizes by the effective sample size so the result is
    comparable to the expected-information matrix.
    """
    model = fit.model
    r, s = model.r, model.s
    yd = _prepare_series(y, demean)
    dist = model.dist

    def f(c):
        return loglik(yd, LagPolynomial(c[:r]), LagPolynomial(c[r:]), dist)

    H = numeric_hessian(f, np.concatenate([model.phi, model.vphi]), step=step)
    t_eff = fit.T - r - s
    out = np.zeros((r + s, r + s))
    out[:r, :r] = -H[:r, :r] / t_eff
    out[r:, r:] = -H[r:, r:] / t_eff
    for name, block in (("phi", out[:r, :r]), ("vphi", out[r:, r:])):
        if block.size and np.min(np.linalg.eigvalsh(block)) <= 0:
            raise DegenerateHessianError(f"observed {name} Hessian block is not positive definite")
    return out


def standard_errors(info: np.ndarray, T: int, p: int) -> np.ndarray:
    """sqrt of the diagonal of info^-1 divided by the effective sample T - p."""
    info = np.asarray(info, dtype=float)
    if info.size == 0:
        return np.empty(0)
    if T <= p:
        raise ValueError("need T > p")
    try:
        inv = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise SingularInformationError(f"information matrix is singular: {exc}") from exc
    d = np.diag(inv)
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise SingularInformationError("information matrix inverse has nonpositive diagonal")
    return np.sqrt(d / (T - p))


def omega_standard_errors(y: np.ndarray, fit: FitResult, step: float = 1e-4, demean: bool = True):
    """Standard errors of (nu, eta) from the observed distributional Hessian.

    This block has no finite-variance restriction, so it is available for any
    nu the estimator can return.
    """
    model = fit.model
    yd = _prepare_series(y, demean)
    phi_poly, vphi_poly = model.phi_poly, model.vphi_poly

    def f(q):
        return loglik(yd, phi_poly, vphi_poly, TParams(q[0], q[1]))

    H = numeric_hessian(f, np.array([model.nu, model.eta]), step=step)
    t_eff = fit.T - model.p
    omega = -H / t_eff
    if np.min(np.linalg.eigvalsh(omega)) <= 0:
        raise DegenerateHessianError("distributional Hessian is not positive definite")
    se = standard_errors(omega, fit.T, model.p)
    return float(se[0]), float(se[1])


def t_test(estimate: float, null_value: float, se: float):
    """Two-sided test at the 5% level: reject when |stat| > 1.96."""
    if not np.isfinite(se) or se <= 0:
        raise ValueError(f"standard error must be positive and finite, got {se}")
    stat = (estimate - null_value) / se
    return stat, abs(stat) > 1.96


def compute_se_report(
    y: np.ndarray,
    fit: FitResult,
    method: str,
    kstar: float | None = None,
    step: float = 1e-4,
    gamma_tol: float = 1e-12,
    blocks: GammaBlocks | None = None,
    demean: bool = True,
) -> SeReport:
    """Assemble one SeReport; raises the construction's own error when the
    method is unavailable (infinite variance, degenerate Hessian, zero MAD)."""
    model = fit.model
    if method in ("classic", "robust") and blocks is None:
        blocks = gamma_blocks(model.phi_poly, model.vphi_poly, tol=gamma_tol)
    if method == "classic":
        info = sigma_classic(model, blocks)
    elif method == "block_hessian":
        info = sigma_block_hessian(y, fit, step=step, demean=demean)
    elif method == "robust":
        if kstar is None:
            raise ValueError("robust method needs a calibrated kstar")
        info = sigma_robust(fit, kstar, blocks)
    else:
        raise ValueError(f"unknown method {method!r}")
    se = standard_errors(info, fit.T, model.p)
    se_nu, se_eta = omega_standard_errors(y, fit, step=step, demean=demean)
    return SeReport(
        method=method,
        se_phi=se[: model.r],
        se_vphi=se[model.r :],
        se_nu=se_nu,
        se_eta=se_eta,
        info_matrix=info,
    )
