"""Posterior summaries and Bayesian variable-selection rules.

Two selection rules are provided: keep a covariate when its equal-tailed
credible interval excludes zero, or drop it when too much posterior mass
sits within one posterior standard deviation of zero.  Higher interval
levels and lower mass thresholds are both stricter.
"""

import math
from dataclasses import dataclass

import numpy as np


def _nearest_rank(sorted_values: np.ndarray, level: float) -> float:
    n = sorted_values.size
    # the epsilon absorbs float noise in level so rank boundaries stay exact
    idx = max(1, math.ceil(level * n - 1e-9)) - 1
    return float(sorted_values[min(idx, n - 1)])


def equal_tailed_interval(values: np.ndarray, level: float) -> tuple[float, float]:
    """Nearest-rank equal-tailed interval at the given coverage level."""
    srt = np.sort(np.asarray(values, dtype=float))
    alpha = (1.0 - level) / 2.0
    return _nearest_rank(srt, alpha), _nearest_rank(srt, 1.0 - alpha)


@dataclass(frozen=True)
class SummaryRow:
    covariate: str
    hazard_ratio: float
    cri_low: float
    cri_high: float
    mean_coef: float
    sd_coef: float


def posterior_summary(draws, level: float = 0.95) -> list[SummaryRow]:
    """Per-covariate posterior-mean hazard ratios with credible intervals."""
    if len(draws) == 0:
        raise ValueError("posterior draws are empty")
    rows = []
    for j, name in enumerate(draws.covariates):
        coefs = draws.beta[:, j]
        hrs = np.exp(coefs)
        lo, hi = equal_tailed_interval(hrs, level)
        rows.append(SummaryRow(
            covariate=name,
            hazard_ratio=float(hrs.mean()),
            cri_low=lo,
            cri_high=hi,
            mean_coef=float(coefs.mean()),
            sd_coef=float(coefs.std(ddof=1)) if coefs.size > 1 else 0.0,
        ))
    return rows


def select_credible_interval(draws, level: float) -> set[str]:
    """Covariates whose equal-tailed interval at ``level`` excludes zero."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    included = set()
    for j, name in enumerate(draws.covariates):
        lo, hi = equal_tailed_interval(draws.beta[:, j], level)
        if lo > 0.0 or hi < 0.0:
            included.add(name)
    return included


def select_scaled_neighborhood(draws, threshold: float) -> set[str]:
    """Drop covariates with P(|beta| <= sd(beta)) above ``threshold``."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    included = set()
    for j, name in enumerate(draws.covariates):
        coefs = draws.beta[:, j]
        sd = float(coefs.std(ddof=1)) if coefs.size > 1 else 0.0
        if sd == 0.0:
            if np.any(coefs != 0.0):
                included.add(name)
            continue
        mass_near_zero = float(np.mean(np.abs(coefs) <= sd))
        if mass_near_zero <= threshold:
            included.add(name)
    return included


def scaled_neighborhood_probability(values: np.ndarray) -> float:
    """P(|x| <= sd(x)) under the empirical distribution of ``values``."""
    values = np.asarray(values, dtype=float)
    sd = float(values.std(ddof=1)) if values.size > 1 else 0.0
    if sd == 0.0:
        return 1.0 if np.all(values == 0.0) else 0.0
    return float(np.mean(np.abs(values) <= sd))
