"""Collapse multi-wave predictors to one value per subject.

Two summaries are supported: the shrunken random intercept (BLUP) from a
linear mixed model of the predictor against age, and the plain mean over
waves observed before a cutoff.  The mixed model is y = g0 + nu_i +
g1 * age + noise with the random intercept and noise both normal; it is
fitted by maximum likelihood, profiling the fixed effects in closed form
and searching the two log-variances numerically.
"""

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import SchemaError


@dataclass(frozen=True)
class PanelObservation:
    """One wave of one subject's longitudinal predictor."""

    subject_id: str
    wave: int
    age: float
    value: float


@dataclass(frozen=True)
class LmmFit:
    """ML estimates of the random-intercept model."""

    intercept: float
    age_slope: float
    var_subject: float
    var_noise: float


def read_panel_csv(path) -> list[PanelObservation]:
    """Parse a ``subject_id,wave,age,value`` CSV file."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["subject_id", "wave", "age", "value"]:
            raise SchemaError(f"{path}: expected header 'subject_id,wave,age,value'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                out.append(PanelObservation(row[0], int(row[1]), float(row[2]), float(row[3])))
            except (ValueError, IndexError) as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from exc
    return out


def _group(panel):
    groups: dict = {}
    for obs in panel:
        groups.setdefault(obs.subject_id, []).append(obs)
    return groups


def _profiled_negloglik(log_vars, groups_xy):
    """Negative profiled ML log-likelihood at the given log variances."""
    var_s, var_e = math.exp(log_vars[0]), math.exp(log_vars[1])
    xtvx = np.zeros((2, 2))
    xtvy = np.zeros(2)
    for Z, y in groups_xy:
        n_i = y.size
        c = var_s / (var_e + n_i * var_s)
        zsum = Z.sum(axis=0)
        ysum = y.sum()
        xtvx += (Z.T @ Z - c * np.outer(zsum, zsum)) / var_e
        xtvy += (Z.T @ y - c * zsum * ysum) / var_e
    coef = np.linalg.solve(xtvx, xtvy)
    nll = 0.0
    for Z, y in groups_xy:
        n_i = y.size
        r = y - Z @ coef
        c = var_s / (var_e + n_i * var_s)
        quad = (r @ r - c * r.sum() ** 2) / var_e
        logdet = (n_i - 1) * math.log(var_e) + math.log(var_e + n_i * var_s)
        nll += 0.5 * (logdet + quad + n_i * math.log(2 * math.pi))
    return nll, coef


def lmm_loglik(panel, fit: LmmFit) -> float:
    """Marginal ML log-likelihood of a panel at a given fit."""
    groups = _group(panel)
    ll = 0.0
    var_s, var_e = fit.var_subject, max(fit.var_noise, 1e-300)
    for obs_list in groups.values():
        y = np.array([o.value for o in obs_list])
        ages = np.array([o.age for o in obs_list])
        r = y - fit.intercept - fit.age_slope * ages
        n_i = y.size
        c = var_s / (var_e + n_i * var_s)
        quad = (r @ r - c * r.sum() ** 2) / var_e
        logdet = (n_i - 1) * math.log(var_e) + math.log(var_e + n_i * var_s)
        ll -= 0.5 * (logdet + quad + n_i * math.log(2 * math.pi))
    return ll


def fit_lmm(panel) -> LmmFit:
    """Maximum-likelihood random-intercept fit of value on age."""
    groups = _group(panel)
    if len(groups) < 2:
        raise SchemaError("need at least two subjects to fit a mixed model")
    groups_xy = []
    for obs_list in groups.values():
        if len(obs_list) < 2:
            raise SchemaError("every subject needs at least two waves")
        ages = np.array([o.age for o in obs_list], dtype=float)
        if np.any(np.diff(np.sort(ages)) < 0):
            raise SchemaError("ages must be orderable within subject")
        Z = np.column_stack([np.ones_like(ages), ages])
        y = np.array([o.value for o in obs_list], dtype=float)
        groups_xy.append((Z, y))

    values = np.concatenate([y for _, y in groups_xy])
    total_var = float(values.var())
    if total_var == 0.0:
        warnings.warn("all panel values identical: degenerate zero-variance fit")
        return LmmFit(intercept=float(values[0]), age_slope=0.0,
                      var_subject=0.0, var_noise=0.0)

    scale = math.log(total_var)
    lo, hi = scale - 30.0, scale + 5.0

    def objective(log_vars):
        return _profiled_negloglik(log_vars, groups_xy)[0]

    best = None
    for start in ((scale - 1.0, scale - 1.0), (scale - 4.0, scale - 0.5),
                  (scale - 0.5, scale - 4.0)):
        res = minimize(objective, np.array(start), method="L-BFGS-B",
                       bounds=[(lo, hi), (lo, hi)],
                       options={"maxiter": 200, "ftol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    _, coef = _profiled_negloglik(best.x, groups_xy)
    var_s, var_e = math.exp(best.x[0]), math.exp(best.x[1])
    if best.x[0] <= lo + 1e-6:
        var_s = 0.0
    return LmmFit(intercept=float(coef[0]), age_slope=float(coef[1]),
                  var_subject=var_s, var_noise=var_e)


def blup(panel_for_subject, fit: LmmFit) -> float:
    """Shrunken random-intercept prediction for one subject's panel."""
    obs_list = list(panel_for_subject)
    if not obs_list:
        raise SchemaError("no observations for subject")
    resid = np.array([
        o.value - fit.intercept - fit.age_slope * o.age for o in obs_list
    ])
    n_i = resid.size
    denom = fit.var_subject + fit.var_noise / n_i
    if denom == 0.0:
        return 0.0
    shrink = fit.var_subject / denom
    return float(shrink * resid.mean())


def mean_over_waves(panel_for_subject, cutoff_age: float):
    """Mean of values observed strictly before ``cutoff_age``; None if none."""
    eligible = [o.value for o in panel_for_subject if o.age < cutoff_age]
    if not eligible:
        return None
    return float(np.mean(eligible))
