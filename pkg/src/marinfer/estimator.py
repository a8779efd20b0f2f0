"""Approximate maximum likelihood estimation of MAR(r,s) models.

The likelihood is maximized over (phi, vphi, log nu, log eta) by Nelder-Mead
simplex search with multiple starting points.  Starts come from factoring an
OLS autoregression of order p = r + s into its inverse roots and assigning
them to the causal/noncausal sides in every feasible way; the likelihood is
multimodal across these splits, so each one seeds a separate search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .lagpoly import LagPolynomial, NonStationaryError, STATIONARITY_MARGIN, is_stationary
from .tdist import TParams, loglik, residual_filter


class NonConvergenceError(RuntimeError):
    """Every optimizer start failed; carries the best point found (maybe None)."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class MarModel:
    """A MAR(r,s) parameter point: lag/lead coefficients plus (nu, eta)."""

    phi: np.ndarray
    vphi: np.ndarray
    nu: float
    eta: float

    def __post_init__(self):
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, dtype=float)).ravel())
        object.__setattr__(self, "vphi", np.atleast_1d(np.asarray(self.vphi, dtype=float)).ravel())
        TParams(self.nu, self.eta)  # validates positivity
        for name, poly in (("phi", self.phi_poly), ("vphi", self.vphi_poly)):
            if not is_stationary(poly):
                raise NonStationaryError(f"{name} polynomial has a root on or inside the unit circle")

    @property
    def r(self) -> int:
        return len(self.phi)

    @property
    def s(self) -> int:
        return len(self.vphi)

    @property
    def p(self) -> int:
        return self.r + self.s

    @property
    def phi_poly(self) -> LagPolynomial:
        return LagPolynomial(self.phi)

    @property
    def vphi_poly(self) -> LagPolynomial:
        return LagPolynomial(self.vphi)

    @property
    def dist(self) -> TParams:
        return TParams(self.nu, self.eta)


@dataclass(frozen=True)
class FitResult:
    model: MarModel
    loglik: float
    residuals: np.ndarray
    T: int
    converged: bool
    n_starts_used: int


@dataclass(frozen=True)
class ArOlsFit:
    coeffs: np.ndarray
    sigma2: float
    aic: float
    bic: float
    residuals: np.ndarray


@dataclass(frozen=True)
class FitOptions:
    """Tuning knobs for fit_mar.

    nu is searched on [0.55, 100] through the log transform: the robust SE
    machinery targets nu > 1, but the optimizer must not fail when the data
    push the tail index lower, so the floor sits below that threshold.
    """

    n_random_starts: int = 4
    seed: int = 0
    xatol: float = 1e-8
    fatol: float = 1e-8
    maxiter: int = 5000
    demean: bool = True
    nu_start: float = 2.5
    nu_bounds: tuple = (0.55, 100.0)
    eta_bounds: tuple = (1e-8, 1e8)
    include_split_starts: bool = True
    extra_starts: tuple = ()  # iterable of (phi..., vphi..., nu, eta) vectors

# Simplex diameter below which a run counts as converged.
CONVERGENCE_DIAMETER = 1e-8


def fit_ar_ols(y: np.ndarray, p: int) -> ArOlsFit:
    """Least-squares AR(p) on the demeaned series, with Gaussian AIC/BIC.

    The residual variance is the maximum-likelihood one (RSS / n_eff), and the
    criteria count p coefficients plus the variance as free parameters.
    """
    y = np.asarray(y, dtype=float)
    if p < 0:
        raise ValueError("p must be nonnegative")
    if len(y) <= 2 * p + 1:
        raise ValueError(f"series of length {len(y)} too short for AR({p}) OLS")
    yd = y - y.mean()
    if p == 0:
        resid = yd
        coeffs = np.empty(0)
    else:
        X = np.column_stack([yd[p - i : len(yd) - i] for i in range(1, p + 1)])
        target = yd[p:]
        coeffs, *_ = np.linalg.lstsq(X, target, rcond=None)
        resid = target - X @ coeffs
    n_eff = len(resid)
    sigma2 = float(resid @ resid) / n_eff
    if sigma2 <= 0:
        raise ValueError("degenerate series: zero residual variance in OLS")
    ll = -0.5 * n_eff * (math.log(2 * math.pi * sigma2) + 1.0)
    k = p + 1
    aic = -2.0 * ll + 2.0 * k
    bic = -2.0 * ll + k * math.log(n_eff)
    return ArOlsFit(coeffs=coeffs, sigma2=sigma2, aic=aic, bic=bic, residuals=resid)


def select_p(y: np.ndarray, p_max: int, criterion: str = "bic") -> int:
    """Lag order minimizing the chosen criterion over p = 1 ... p_max.

    Ties break toward smaller p.  AIC may overfit on i.i.d. data (its usual
    behavior); BIC is the default downstream.  On heavy-tailed data both
    criteria tend to inflate p, since extra lags buy off single outliers
    under the Gaussian objective.
    """
    if criterion not in ("aic", "bic"):
        raise ValueError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    if p_max < 1:
        raise ValueError("p_max must be >= 1")
    best_p, best_val = None, math.inf
    for p in range(1, p_max + 1):
        fit = fit_ar_ols(y, p)
        val = fit.aic if criterion == "aic" else fit.bic
        if val < best_val:
            best_p, best_val = p, val
    return best_p


def _spectral_radius(coeffs: np.ndarray) -> float:
    """Spectral radius of the AR recursion (max inverse-root modulus)."""
    d = len(coeffs)
    if d == 0:
        return 0.0
    if d == 1:
        return abs(coeffs[0])
    if d == 2:
        c1, c2 = coeffs
        disc = c1 * c1 + 4.0 * c2
        if disc >= 0:
            sq = math.sqrt(disc)
            return max(abs(c1 + sq), abs(c1 - sq)) / 2.0
        return math.sqrt(abs(c2))
    from .lagpoly import companion_matrix

    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(LagPolynomial(coeffs))))))


def _stationary_coeffs(coeffs: np.ndarray) -> bool:
    return _spectral_radius(coeffs) < 1.0 / (1.0 + STATIONARITY_MARGIN)


def _shrink_to_stationary(coeffs: np.ndarray, target: float = 0.95) -> np.ndarray:
    """Rescale inverse roots toward zero until the spectral radius <= target."""
    coeffs = np.asarray(coeffs, dtype=float)
    rho = _spectral_radius(coeffs)
    if rho <= target:
        return coeffs
    alpha = target / rho
    return coeffs * alpha ** np.arange(1, len(coeffs) + 1)


def _coeffs_from_inverse_roots(lams) -> np.ndarray:
    """Coefficients (c_1...c_d) of prod_i (1 - lam_i z) = 1 - c_1 z - ..."""
    poly = np.poly(np.asarray(lams))  # [1, -e1, e2, ...] in increasing powers of z
    return -np.real(poly[1:])


def _split_starts(y: np.ndarray, r: int, s: int):
    """Map an OLS AR(r+s) fit to (phi, vphi) starts, one per root assignment."""
    p = r + s
    if p == 0:
        return [(np.empty(0), np.empty(0))]
    try:
        ols = fit_ar_ols(y, p)
    except ValueError:
        return [(np.zeros(r), np.zeros(s))]
    lams = np.linalg.eigvals(
        np.vstack([ols.coeffs.reshape(1, -1), np.hstack([np.eye(p - 1), np.zeros((p - 1, 1))])])
    ) if p > 1 else np.array([complex(ols.coeffs[0])])
    # keep inverse roots safely inside the unit disk
    mods = np.abs(lams)
    lams = np.where(mods > 0.97, lams * (0.97 / np.maximum(mods, 1e-12)), lams)

    starts = []
    for idx in itertools.combinations(range(p), r):
        chosen = lams[list(idx)]
        rest = lams[[i for i in range(p) if i not in idx]]
        # a split is usable only if both factors have real coefficients
        phi_c = _coeffs_from_inverse_roots(chosen) if r else np.empty(0)
        vphi_c = _coeffs_from_inverse_roots(rest) if s else np.empty(0)
        if r and np.max(np.abs(np.imag(np.poly(chosen)))) > 1e-8:
            continue
        if s and np.max(np.abs(np.imag(np.poly(rest)))) > 1e-8:
            continue
        starts.append((_shrink_to_stationary(phi_c), _shrink_to_stationary(vphi_c)))
    if not starts:
        # complex pairs forced apart: fall back to modulus-preserving real roots
        real_lams = np.sign(np.real(lams) + 1e-300) * np.abs(lams)
        for idx in itertools.combinations(range(p), r):
            chosen = real_lams[list(idx)]
            rest = real_lams[[i for i in range(p) if i not in idx]]
            phi_c = _coeffs_from_inverse_roots(chosen) if r else np.empty(0)
            vphi_c = _coeffs_from_inverse_roots(rest) if s else np.empty(0)
            starts.append((_shrink_to_stationary(phi_c), _shrink_to_stationary(vphi_c)))
    # drop duplicates (symmetric splits collapse when roots coincide)
    uniq = []
    for st in starts:
        if not any(np.allclose(st[0], u[0]) and np.allclose(st[1], u[1]) for u in uniq):
            uniq.append(st)
    return uniq


def _robust_scale(x: np.ndarray) -> float:
    med = np.median(x)
    m = np.median(np.abs(x - med))
    if m > 0:
        return 1.4826 * float(m)
    sd = float(np.std(x))
    return sd if sd > 0 else 1.0


def fit_mar(y: np.ndarray, r: int, s: int, opts: FitOptions | None = None) -> FitResult:
    """Maximize the approximate MAR(r,s) log-likelihood.

    Candidate points with a nonstationary polynomial (or nu/eta outside the
    clamped search region) are rejected outright, so the returned model always
    satisfies the stationarity invariants.  Deterministic given opts.seed.
    """
    opts = opts or FitOptions()
    y = np.asarray(y, dtype=float)
    if r < 0 or s < 0:
        raise ValueError("orders must be nonnegative")
    if not np.all(np.isfinite(y)):
        raise ValueError("series must be finite")
    if len(y) <= r + s + 2:
        raise ValueError(f"series of length {len(y)} too short for MAR({r},{s})")
    if opts.demean:
        y = y - y.mean()
    if np.ptp(y) == 0:
        raise ValueError("series is constant")

    T = len(y)
    t_eff = T - r - s
    log_nu_lo, log_nu_hi = math.log(opts.nu_bounds[0]), math.log(opts.nu_bounds[1])
    log_eta_lo, log_eta_hi = math.log(opts.eta_bounds[0]), math.log(opts.eta_bounds[1])

    def negloglik(x):
        # hot path: same arithmetic as tdist.loglik without object construction
        phi_c, vphi_c = x[:r], x[r : r + s]
        log_nu, log_eta = x[r + s], x[r + s + 1]
        if not (log_nu_lo <= log_nu <= log_nu_hi and log_eta_lo <= log_eta <= log_eta_hi):
            return math.inf
        if not (_stationary_coeffs(phi_c) and _stationary_coeffs(vphi_c)):
            return math.inf
        nu, eta = math.exp(log_nu), math.exp(log_eta)
        w = y[: T - s].copy()
        for i in range(s):
            w -= vphi_c[i] * y[i + 1 : T - s + i + 1]
        eps = w[r:].copy()
        for i in range(r):
            eps -= phi_c[i] * w[r - 1 - i : len(w) - 1 - i]
        const = math.lgamma((nu + 1.0) / 2.0) - math.lgamma(nu / 2.0) - 0.5 * math.log(nu * math.pi) - log_eta
        return -(t_eff * const - (nu + 1.0) / 2.0 * float(np.sum(np.log1p((eps / eta) ** 2 / nu))))

    splits = _split_starts(y, r, s) if opts.include_split_starts else []
    rng = np.random.default_rng(opts.seed)
    starts = []
    for phi0, vphi0 in splits:
        eta0 = _robust_scale(residual_filter(y, LagPolynomial(phi0), LagPolynomial(vphi0)))
        starts.append(np.concatenate([phi0, vphi0, [math.log(opts.nu_start), math.log(eta0)]]))
    base_pool = starts if starts else [np.concatenate([np.zeros(r + s), [math.log(opts.nu_start), math.log(_robust_scale(y))]])]
    for k in range(opts.n_random_starts):
        base = base_pool[k % len(base_pool)].copy()
        coeffs = base[: r + s] + rng.uniform(-0.15, 0.15, size=r + s)
        coeffs[:r] = _shrink_to_stationary(coeffs[:r])
        coeffs[r:] = _shrink_to_stationary(coeffs[r:])
        base[: r + s] = coeffs
        base[r + s] += rng.uniform(-0.4, 0.4)
        base[r + s + 1] += rng.uniform(-0.3, 0.3)
        starts.append(base)
    for extra in opts.extra_starts:
        extra = np.asarray(extra, dtype=float)
        starts.append(np.concatenate([extra[: r + s], np.log(extra[r + s :])]))
    if not starts:
        raise NonConvergenceError("no starting points supplied")

    best = None
    for x0 in starts:
        with np.errstate(invalid="ignore"):  # rejected points compare as inf-inf
            res = minimize(
                negloglik,
                x0,
                method="Nelder-Mead",
                options=dict(xatol=opts.xatol, fatol=opts.fatol, maxiter=opts.maxiter, maxfev=4 * opts.maxiter),
            )
        if not np.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NonConvergenceError("all optimizer starts failed to produce a finite likelihood", best=None)

    x = best.x
    verts = best.final_simplex[0]
    diameter = float(np.max(np.abs(verts - verts[0])))
    model = MarModel(phi=x[:r], vphi=x[r : r + s], nu=math.exp(x[r + s]), eta=math.exp(x[r + s + 1]))
    resid = residual_filter(y, model.phi_poly, model.vphi_poly)
    return FitResult(
        model=model,
        loglik=loglik(y, model.phi_poly, model.vphi_poly, model.dist),
        residuals=resid,
        T=T,
        converged=diameter < CONVERGENCE_DIAMETER,
        n_starts_used=len(starts),
    )


def select_rs(y: np.ndarray, p: int, opts: FitOptions | None = None):
    """Fit every (r, s) with r + s = p and return the likelihood maximizer.

    Ties break toward larger r.  With Gaussian-like errors (large nu) the
    causal and noncausal splits are nearly observationally equivalent, so the
    selection is only as sharp as the non-Gaussianity of the data.
    """
    if p < 0:
        raise ValueError("p must be nonnegative")
    best = None
    for r in range(p, -1, -1):
        fit = fit_mar(y, r, p - r, opts)
        if best is None or fit.loglik > best[2].loglik:
            best = (r, p - r, fit)
    return best
