"""Survey-weighted, left-truncated, right-censored log-likelihood and priors.

Each record contributes ``w * (delta * log lambda1(t) + log S1(t) -
log S1(t0))``; the truncation term conditions on being CUD-free at entry.
Priors: wide normal on the intercept, double-exponential (lasso) on the
slopes with a chi-squared(1) hyperprior on the rate, and a flat Dirichlet
on the baseline simplex.
"""

import math
import re

import numpy as np
from scipy.special import gammaln

from .errors import DomainError, SchemaError
from .hazard import ModelParams, profile_vector
from .splines import SplineBasis, ispline_matrix, mspline_matrix

BETA0_VARIANCE = 100.0
NEG_INF = float("-inf")

# these would collide with sampler parameter names in the diagnostics
_RESERVED_NAMES = re.compile(r"^(beta0|tau|gamma\[\d+\])$")


class CohortDesign:
    """Precomputed design matrices for repeated likelihood evaluation.

    The spline design at the observed ages never changes during sampling,
    so it is built once; every likelihood call is then a handful of dense
    vector operations.
    """

    def __init__(self, records, basis: SplineBasis, covariates):
        self.basis = basis
        self.covariates = tuple(covariates)
        for name in self.covariates:
            if _RESERVED_NAMES.match(name):
                raise SchemaError(f"covariate name {name!r} is reserved")
        if len(set(self.covariates)) != len(self.covariates):
            raise SchemaError("covariate names must be unique")
        n = len(records)
        self.n = n
        self.X = np.zeros((n, len(self.covariates)))
        self.t0 = np.zeros(n)
        self.t = np.zeros(n)
        self.delta = np.zeros(n, dtype=bool)
        self.w = np.zeros(n)
        for j, rec in enumerate(records):
            self.X[j] = profile_vector(rec.covariates, self.covariates)
            self.t0[j] = rec.t0
            self.t[j] = rec.t
            self.delta[j] = bool(rec.delta)
            self.w[j] = rec.weight
        lo, hi = basis.lower, basis.upper
        if n and (self.t0.min() < lo or self.t.max() > hi):
            raise DomainError(
                f"cohort ages outside the spline domain [{lo}, {hi}]"
            )
        self.M_t = mspline_matrix(basis, self.t) if n else np.zeros((0, basis.n_basis))
        I_t = ispline_matrix(basis, self.t) if n else np.zeros((0, basis.n_basis))
        I_t0 = ispline_matrix(basis, self.t0) if n else np.zeros((0, basis.n_basis))
        self.I_diff = I_t - I_t0
        self.w_delta = self.w[self.delta]
        self.X_delta = self.X[self.delta]
        self.M_delta = self.M_t[self.delta]

    def loglik(self, beta0: float, beta: np.ndarray, gamma: np.ndarray) -> float:
        eta = beta0 + self.X @ beta
        rr = np.exp(eta)
        m_ev = self.M_delta @ gamma
        # the 1e-300 floor keeps 1/m_ev finite; such states are rejected anyway
        if np.any(m_ev <= 1e-300) or not np.all(np.isfinite(rr)):
            return NEG_INF
        cum = self.I_diff @ gamma
        exposure = np.where(cum > 0, cum * rr, 0.0)
        value = float(self.w_delta @ (np.log(m_ev) + eta[self.delta]) - self.w @ exposure)
        return value if math.isfinite(value) else NEG_INF

    def loglik_grad(self, beta0, beta, gamma):
        """Value plus gradients w.r.t. (beta0, beta, gamma)."""
        p, L = self.X.shape[1], gamma.size
        eta = beta0 + self.X @ beta
        rr = np.exp(eta)
        m_ev = self.M_delta @ gamma
        if np.any(m_ev <= 1e-300) or not np.all(np.isfinite(rr)):
            return NEG_INF, 0.0, np.zeros(p), np.zeros(L)
        cum = self.I_diff @ gamma
        exposure = np.where(cum > 0, cum * rr, 0.0)
        value = float(self.w_delta @ (np.log(m_ev) + eta[self.delta]) - self.w @ exposure)
        if not math.isfinite(value):
            return NEG_INF, 0.0, np.zeros(p), np.zeros(L)
        resid = self.w * (self.delta - exposure)
        g_beta0 = float(resid.sum())
        g_beta = self.X.T @ resid
        g_gamma = self.M_delta.T @ (self.w_delta / m_ev) - self.I_diff.T @ (self.w * rr)
        return value, g_beta0, g_beta, g_gamma


def log_likelihood(data, params: ModelParams, basis: SplineBasis) -> float:
    """Weighted left-truncated log-likelihood of a cohort at one draw."""
    design = CohortDesign(data, basis, params.covariates)
    return design.loglik(params.beta0, params.beta, params.baseline_weights)


def _abs_smooth(x: np.ndarray, eps: float):
    """|x| and its derivative; optionally smoothed near zero.

    With ``eps == 0`` the subgradient convention sign(0) = 0 applies.
    """
    if eps > 0:
        root = np.sqrt(x * x + eps * eps)
        return root - eps, x / root
    return np.abs(x), np.sign(x)


def log_prior(params: ModelParams, smooth_eps: float = 0.0) -> float:
    """Joint log prior density at one draw; -inf outside the support."""
    gamma = params.baseline_weights
    tau = params.shrinkage_rate
    if tau <= 0 or np.any(gamma < 0) or abs(gamma.sum() - 1.0) > 1e-8:
        return NEG_INF
    beta = params.beta
    lp = -0.5 * math.log(2 * math.pi * BETA0_VARIANCE) - params.beta0 ** 2 / (2 * BETA0_VARIANCE)
    absb, _ = _abs_smooth(beta, smooth_eps)
    lp += beta.size * math.log(tau / 2.0) - tau * float(absb.sum())
    lp += -0.5 * math.log(2 * math.pi) - 0.5 * math.log(tau) - tau / 2.0
    lp += float(gammaln(gamma.size))
    return lp


def log_prior_grad(beta0, beta, gamma, tau, smooth_eps: float = 0.0):
    """Gradient pieces of the log prior w.r.t. (beta0, beta, gamma, tau)."""
    absb, dabs = _abs_smooth(beta, smooth_eps)
    g_beta0 = -beta0 / BETA0_VARIANCE
    g_beta = -tau * dabs
    g_gamma = np.zeros_like(gamma)
    g_tau = beta.size / tau - float(absb.sum()) - 0.5 / tau - 0.5
    return g_beta0, g_beta, g_gamma, g_tau
