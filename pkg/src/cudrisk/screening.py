"""Weighted Cox partial-likelihood screening with left truncation.

The risk set at an event age s is every subject with entry age strictly
below s and observed age at least s.  Ties are handled with the Breslow
approximation, and p-values come from model-based Wald statistics; the
loose 0.25 screening threshold does not warrant a robust correction.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .errors import ConvergenceError, SchemaError
from .hazard import profile_vector


@dataclass(frozen=True)
class CoxFit:
    """Coefficients, Wald statistics and the maximized partial log-likelihood."""

    covariates: tuple
    coef: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    loglik: float
    n_events: int
    iterations: int


@dataclass
class ScreenResult:
    """Univariate screening outcome with per-predictor diagnostics."""

    retained: list
    rows: list = field(default_factory=list)
    failed: dict = field(default_factory=dict)


def _design(data, covariates):
    n = len(data)
    X = np.zeros((n, len(covariates)))
    t0 = np.zeros(n)
    t = np.zeros(n)
    delta = np.zeros(n, dtype=bool)
    w = np.zeros(n)
    for j, rec in enumerate(data):
        X[j] = profile_vector(rec.covariates, covariates)
        t0[j] = rec.t0
        t[j] = rec.t
        delta[j] = bool(rec.delta)
        w[j] = rec.weight
    return X, t0, t, delta, w


def _partial_loglik_terms(beta, X, t0, t, delta, w):
    """Breslow partial log-likelihood with gradient and Hessian.

    Risk-set sums are accumulated incrementally over decreasing event
    ages: subjects join as their observed age passes the threshold and
    drop back out while their entry age still blocks membership.
    """
    p = X.shape[1]
    eta = X @ beta
    eta -= eta.max() if eta.size else 0.0
    r = w * np.exp(eta)
    rX = r[:, None] * X
    rXX = np.einsum("i,ij,ik->ijk", r, X, X)

    event_ages = np.unique(t[delta])
    order_t = np.argsort(t)[::-1]
    order_t0 = np.argsort(t0)[::-1]

    s0 = 0.0
    s1 = np.zeros(p)
    s2 = np.zeros((p, p))
    i_t = 0
    i_t0 = 0
    ll = 0.0
    grad = np.zeros(p)
    hess = np.zeros((p, p))
    n = len(t)
    for s in event_ages[::-1]:
        while i_t < n and t[order_t[i_t]] >= s:
            j = order_t[i_t]
            s0 += r[j]
            s1 += rX[j]
            s2 += rXX[j]
            i_t += 1
        while i_t0 < n and t0[order_t0[i_t0]] >= s:
            j = order_t0[i_t0]
            s0 -= r[j]
            s1 -= rX[j]
            s2 -= rXX[j]
            i_t0 += 1
        members = delta & (t == s)
        ew = float(w[members].sum())
        if s0 <= 0:
            raise ConvergenceError(
                f"empty risk set at event age {s} (entry age equals event age?)"
            )
        ll += float(w[members] @ eta[members]) - ew * math.log(s0)
        mean = s1 / s0
        grad += (w[members, None] * X[members]).sum(axis=0) - ew * mean
        hess -= ew * (s2 / s0 - np.outer(mean, mean))
    return ll, grad, hess


def fit_cox(data, covariates, max_iter: int = 50, tol: float = 1e-9) -> CoxFit:
    """Newton-Raphson fit of the weighted left-truncated Cox model."""
    covariates = tuple(covariates)
    if not covariates:
        raise SchemaError("at least one covariate required")
    X, t0, t, delta, w = _design(data, covariates)
    if int(delta.sum()) < 1:
        raise SchemaError("no events in the data")
    for j, name in enumerate(covariates):
        if np.all(X[:, j] == X[0, j]):
            raise SchemaError(f"covariate {name!r} is constant")

    beta = np.zeros(len(covariates))
    ll_old = -math.inf
    for iteration in range(1, max_iter + 1):
        ll, grad, hess = _partial_loglik_terms(beta, X, t0, t, delta, w)
        try:
            step = np.linalg.solve(-hess, grad)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular information matrix") from exc
        # damp oversized Newton steps, then backtrack on any decrease
        norm_step = float(np.max(np.abs(step)))
        if norm_step > 5.0:
            step *= 5.0 / norm_step
        shrink = 1.0
        for _ in range(30):
            candidate = beta + shrink * step
            ll_new, _, _ = _partial_loglik_terms(candidate, X, t0, t, delta, w)
            if ll_new >= ll - 1e-12:
                break
            shrink *= 0.5
        beta = beta + shrink * step
        if np.max(np.abs(beta)) > 40.0:
            raise ConvergenceError(
                "coefficients diverging: monotone partial likelihood (perfect separation?)"
            )
        if abs(ll_new - ll_old) < tol and float(np.max(np.abs(grad))) < 1e-6:
            ll_old = ll_new
            break
        ll_old = ll_new
    else:
        if float(np.max(np.abs(grad))) > 1e-4:
            raise ConvergenceError(f"no convergence after {max_iter} iterations")

    ll, grad, hess = _partial_loglik_terms(beta, X, t0, t, delta, w)
    try:
        cov = np.linalg.inv(-hess)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError("singular information matrix") from exc
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    spread = X.max(axis=0) - X.min(axis=0)
    if np.any(se * spread > 10.0):
        raise ConvergenceError(
            "information vanished (range-scaled SE > 10): "
            "monotone partial likelihood (perfect separation?)"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        zval = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pval = 2.0 * norm.sf(np.abs(zval))
    return CoxFit(covariates=covariates, coef=beta, se=se, z=zval, p=pval,
                  loglik=ll, n_events=int(delta.sum()), iterations=iteration)


def univariate_screen(data, predictors, alpha: float = 0.25) -> ScreenResult:
    """Retain predictors whose univariate Wald p-value is below ``alpha``."""
    retained = []
    rows = []
    failed = {}
    for name in predictors:
        try:
            fit = fit_cox(data, [name])
        except (ConvergenceError, SchemaError) as exc:
            failed[name] = str(exc)
            continue
        keep = bool(fit.p[0] < alpha)
        rows.append({
            "predictor": name,
            "coef": float(fit.coef[0]),
            "se": float(fit.se[0]),
            "p": float(fit.p[0]),
            "retained": keep,
        })
        if keep:
            retained.append(name)
    return ScreenResult(retained=retained, rows=rows, failed=failed)


def sign_flip_report(data, predictors) -> dict:
    """Flag covariates whose multivariate sign disagrees with the univariate fit."""
    multi = fit_cox(data, predictors)
    flags = {}
    for j, name in enumerate(predictors):
        uni = fit_cox(data, [name])
        flags[name] = bool(np.sign(multi.coef[j]) * np.sign(uni.coef[0]) < 0)
    return flags


def c_index(data, risk_scores):
    """Truncation-aware concordance over usable pairs; None when undefined.

    A pair is usable when the first subject has an event, the second is
    observed longer, and the second was already under observation when the
    first failed.  Ties in the score count one half.
    """
    scores = np.asarray(risk_scores, dtype=float)
    if scores.size != len(data):
        raise SchemaError("need one risk score per record")
    t0 = np.array([rec.t0 for rec in data])
    t = np.array([rec.t for rec in data])
    delta = np.array([bool(rec.delta) for rec in data])
    usable = 0.0
    concordant = 0.0
    for i in np.flatnonzero(delta):
        mask = (t > t[i]) & (t0 < t[i])
        n_pairs = int(mask.sum())
        if n_pairs == 0:
            continue
        usable += n_pairs
        concordant += float(np.sum(scores[i] > scores[mask]))
        concordant += 0.5 * float(np.sum(scores[i] == scores[mask]))
    if usable == 0:
        return None
    return concordant / usable
