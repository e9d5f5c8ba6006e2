"""Scikit-learn style estimator wrapping the fit/predict pipeline.

``AbsoluteRiskModel`` fits the Bayesian hazard model on a cohort frame
(or list of records) and predicts posterior-averaged absolute risks, so
the engine composes with the usual get_params/set_params ecosystem.
"""

import warnings

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator

from .cohort import RESERVED_COLUMNS, CohortRecord
from .errors import SchemaError
from .mcmc import McmcConfig, check_convergence, run_mcmc
from .mortality import LifeTableHazard
from .risk import Anchor, RiskEstimate, RiskQuery, posterior_risk
from .splines import make_knots


def records_from_frame(X: pd.DataFrame) -> tuple[list, list]:
    """Validate a cohort frame and convert it to records plus covariate names."""
    missing = [c for c in RESERVED_COLUMNS if c not in X.columns]
    if missing:
        raise SchemaError(f"cohort frame missing column(s): {', '.join(missing)}")
    covariates = [c for c in X.columns if c not in RESERVED_COLUMNS]
    if covariates and X[covariates].isna().any().any():
        raise SchemaError("cohort frame contains missing covariate values")
    records = []
    for row in X.itertuples(index=False):
        row = row._asdict()
        records.append(CohortRecord(
            id=str(row["id"]), t0=float(row["t0"]), t=float(row["t"]),
            delta=int(row["delta"]), weight=float(row["weight"]),
            covariates={c: float(row[c]) for c in covariates},
        ))
    return records, covariates


class AbsoluteRiskModel(BaseEstimator):
    """Bayesian absolute-risk model with an M-spline baseline hazard.

    Parameters mirror the fitting pipeline: spline shape, MCMC budget and
    prediction grid.  ``life_table`` supplies the competing mortality
    hazard and is required before any prediction.

    Examples
    --------
    >>> model = AbsoluteRiskModel(life_table=table, seed=7).fit(cohort_frame)
    >>> model.predict_risk(profile_frame, horizon=5.0)
    array([...])
    """

    def __init__(self, life_table: LifeTableHazard | None = None,
                 interior_knots: int = 5, degree: int = 3, domain=None,
                 chains: int = 4, warmup: int = 1000, iterations: int = 1000,
                 seed: int = 0, target_accept: float = 0.8,
                 max_leapfrog: int = 48, smooth_abs_eps: float = 0.0,
                 grid_step: float = 1.0, eval_point: str = "midpoint",
                 cri_level: float = 0.95, n_jobs: int = 1):
        self.life_table = life_table
        self.interior_knots = interior_knots
        self.degree = degree
        self.domain = domain
        self.chains = chains
        self.warmup = warmup
        self.iterations = iterations
        self.seed = seed
        self.target_accept = target_accept
        self.max_leapfrog = max_leapfrog
        self.smooth_abs_eps = smooth_abs_eps
        self.grid_step = grid_step
        self.eval_point = eval_point
        self.cri_level = cri_level
        self.n_jobs = n_jobs

    def _mcmc_config(self) -> McmcConfig:
        return McmcConfig(
            chains=self.chains, warmup=self.warmup, iterations=self.iterations,
            seed=self.seed, target_accept=self.target_accept,
            max_leapfrog=self.max_leapfrog, smooth_abs_eps=self.smooth_abs_eps,
            n_jobs=self.n_jobs,
        )

    def fit(self, X, y=None):
        """Fit on a cohort frame (or record list); returns self."""
        if isinstance(X, pd.DataFrame):
            records, covariates = records_from_frame(X)
        else:
            records = list(X)
            covariates = list(records[0].covariates.keys()) if records else []
        if not records:
            raise SchemaError("cohort is empty")
        events = [r.t for r in records if r.delta == 1]
        if self.domain is not None:
            bounds = (float(self.domain[0]), float(self.domain[1]))
        else:
            bounds = (min(r.t0 for r in records), max(r.t for r in records))
        self.basis_ = make_knots(events, self.interior_knots, self.degree, bounds)
        self.covariates_ = tuple(covariates)
        self.draws_ = run_mcmc(records, self.basis_, self._mcmc_config(), covariates)
        self.diagnostics_ = self.draws_.diagnostics
        ok, problems = check_convergence(self.draws_)
        self.converged_ = ok
        self.convergence_problems_ = problems
        if not ok:
            warnings.warn("convergence gate failed: " + "; ".join(problems[:3]))
        self.ranges_ = {
            name: (float(min(r.covariates[name] for r in records)),
                   float(max(r.covariates[name] for r in records)))
            for name in covariates
        }
        self.kinds_ = {
            name: ("binary" if all(r.covariates[name] in (0.0, 1.0) for r in records)
                   else "scale")
            for name in covariates
        }
        self.n_records_ = len(records)
        return self

    def _require_fitted(self):
        if not hasattr(self, "draws_"):
            raise SchemaError("model is not fitted")
        if self.life_table is None:
            raise SchemaError("a life table is required for prediction")

    def predict_estimate(self, profile: dict, a: float, b: float,
                         anchor=Anchor.AT_FIRST_USE) -> RiskEstimate:
        """Full posterior risk estimate for one profile over (a, b]."""
        self._require_fitted()
        query = RiskQuery(a=a, b=b, profile=profile, anchor=anchor)
        return posterior_risk(query, self.draws_, self.basis_, self.life_table,
                              grid=self.grid_step, eval_point=self.eval_point,
                              cri_level=self.cri_level)

    def predict_risk(self, X, horizon: float | None = None, b: float | None = None,
                     anchor=Anchor.AT_FIRST_USE) -> np.ndarray:
        """Posterior-mean risks for each profile row.

        ``X`` is a frame (or list of dicts) with one column per covariate
        plus ``a``, the age the prediction is made at.  The horizon sets
        b = a + horizon unless an absolute ``b`` is given.
        """
        self._require_fitted()
        if horizon is None and b is None:
            raise SchemaError("provide a horizon or an absolute age b")
        if isinstance(X, pd.DataFrame):
            rows = X.to_dict("records")
        else:
            rows = [dict(r) for r in X]
        out = np.empty(len(rows))
        for i, row in enumerate(rows):
            if "a" not in row:
                raise SchemaError("each profile row needs the prediction age 'a'")
            a = float(row["a"])
            end = a + float(horizon) if b is None else float(b)
            profile = {k: v for k, v in row.items() if k not in ("a", "id")}
            out[i] = self.predict_estimate(profile, a, end, anchor=anchor).mean_risk
        return out
