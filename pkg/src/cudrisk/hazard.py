"""Cox proportional-hazards CUD hazard and survival with an M-spline baseline.

The baseline hazard is a convex combination of M-spline basis functions:
the weights live on the simplex so their integral over the knot span is
exactly one, and the intercept of the linear predictor carries the overall
hazard scale.  That split is what makes the parameterization identifiable.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SchemaError
from .splines import SplineBasis, ispline_eval, mspline_eval

SIMPLEX_TOL = 1e-8


@dataclass(frozen=True)
class ModelParams:
    """One set of hazard-model parameters (a single posterior draw).

    ``baseline_weights`` must lie on the simplex; ``beta`` is aligned with
    ``covariates`` by position.
    """

    beta0: float
    beta: np.ndarray
    baseline_weights: np.ndarray
    shrinkage_rate: float
    covariates: tuple = field(default=())

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        gamma = np.asarray(self.baseline_weights, dtype=float)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "baseline_weights", gamma)
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.covariates and len(self.covariates) != beta.size:
            raise SchemaError("coefficient vector and covariate names differ in length")
        if np.any(gamma < -SIMPLEX_TOL) or abs(gamma.sum() - 1.0) > SIMPLEX_TOL:
            raise SchemaError("baseline weights must be nonnegative and sum to 1")
        if not self.shrinkage_rate > 0:
            raise SchemaError("shrinkage rate must be positive")


def profile_vector(profile, covariates) -> np.ndarray:
    """Order a named covariate profile into the model's coefficient order."""
    missing = [name for name in covariates if name not in profile]
    if missing:
        raise SchemaError(f"profile missing covariate(s): {', '.join(missing)}")
    values = np.array([float(profile[name]) for name in covariates])
    if not np.all(np.isfinite(values)):
        bad = covariates[int(np.argmax(~np.isfinite(values)))]
        raise SchemaError(f"covariate {bad!r} is not finite")
    return values


def linear_predictor(profile, params: ModelParams) -> float:
    x = profile_vector(profile, params.covariates)
    return float(params.beta0 + x @ params.beta)


def relative_risk(profile, params: ModelParams) -> float:
    """exp(beta0 + x'beta); multiplicative in every covariate."""
    return math.exp(linear_predictor(profile, params))


def cud_hazard(t: float, profile, params: ModelParams, basis: SplineBasis) -> float:
    """Cause-specific CUD hazard rate at age ``t`` (events per year)."""
    baseline = float(mspline_eval(basis, t) @ params.baseline_weights)
    return baseline * relative_risk(profile, params)


def cud_survival(t: float, profile, params: ModelParams, basis: SplineBasis) -> float:
    """Probability of remaining CUD-free through age ``t`` from the left knot."""
    cumulative = float(ispline_eval(basis, t) @ params.baseline_weights)
    return math.exp(-cumulative * relative_risk(profile, params))
