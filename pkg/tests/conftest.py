"""Shared fixtures: life tables, the ground-truth model, and expensive fits.

The ground truth uses a five-covariate structure (binary sex plus four
unit-interval scales) with known log hazard ratios, so estimation tests
can check recovery against it.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from cudrisk.hazard import ModelParams
from cudrisk.mcmc import McmcConfig, run_mcmc
from cudrisk.mortality import LifeTableHazard, load_life_table
from cudrisk.splines import SplineBasis, make_knots
from cudrisk.synthetic import SimConfig, simulate_cohort

FIXTURES = Path(__file__).parent / "fixtures"

TRUE_HAZARD_RATIOS = {
    "sex": 1.31,
    "conscientiousness": 0.34,
    "neuroticism": 5.64,
    "openness": 5.16,
    "delinquency": 19.89,
}
COVARIATE_NAMES = tuple(TRUE_HAZARD_RATIOS)

COVARIATE_DISTS = {
    "sex": {"kind": "bernoulli", "p": 0.5},
    "conscientiousness": {"kind": "uniform", "low": 0.0, "high": 1.0},
    "neuroticism": {"kind": "uniform", "low": 0.0, "high": 1.0},
    "openness": {"kind": "uniform", "low": 0.0, "high": 1.0},
    "delinquency": {"kind": "uniform", "low": 0.0, "high": 1.0},
}


def flat_life_table(rate: float, max_age: int = 110) -> LifeTableHazard:
    """Constant-hazard life table: q = 1 - exp(-rate) at every age."""
    q = 1.0 - math.exp(-rate)
    return load_life_table([(a, q) for a in range(max_age + 1)], name=f"flat-{rate:g}")


@pytest.fixture(scope="session")
def demo_table() -> LifeTableHazard:
    """Smooth synthetic table with mortality rising in age."""
    rows = [(a, min(0.00025 * math.exp(0.05 * a), 0.5)) for a in range(111)]
    return load_life_table(rows, name="synthetic-demo")


@dataclass(frozen=True)
class TruthModel:
    params: ModelParams
    basis: SplineBasis
    names: tuple


@pytest.fixture(scope="session")
def truth_model() -> TruthModel:
    lo, hi = 12.0, 42.0
    interior = [16.0, 19.0, 23.0, 28.0]
    knots = np.concatenate([np.full(4, lo), interior, np.full(4, hi)])
    basis = SplineBasis(knots=knots, degree=3)
    gamma = np.array([0.25, 0.30, 0.20, 0.10, 0.08, 0.04, 0.02, 0.01])
    gamma = gamma / gamma.sum()
    params = ModelParams(
        beta0=-2.6,
        beta=np.log([TRUE_HAZARD_RATIOS[n] for n in COVARIATE_NAMES]),
        baseline_weights=gamma,
        shrinkage_rate=1.0,
        covariates=COVARIATE_NAMES,
    )
    return TruthModel(params=params, basis=basis, names=COVARIATE_NAMES)


def make_sim_config(truth: TruthModel, table: LifeTableHazard, n: int, seed: int,
                    censor=(8.0, 20.0), t0=(13.0, 19.0)) -> SimConfig:
    return SimConfig(
        n=n, params=truth.params, basis=truth.basis, life_table=table,
        covariate_dists=COVARIATE_DISTS,
        t0_dist={"kind": "uniform", "low": t0[0], "high": t0[1]},
        censor_window=censor, seed=seed,
    )


@pytest.fixture(scope="session")
def recovery_cohort(truth_model, demo_table):
    cfg = make_sim_config(truth_model, demo_table, n=5000, seed=424243)
    records, truths = simulate_cohort(cfg)
    return records, truths


@pytest.fixture(scope="session")
def recovery_fit(recovery_cohort):
    """Full-budget fit on the recovery cohort; reused across test modules."""
    records, _ = recovery_cohort
    events = [r.t for r in records if r.delta == 1]
    basis = make_knots(events, 5, 3, (12.0, 42.0))
    draws = run_mcmc(records, basis,
                     McmcConfig(chains=4, warmup=1000, iterations=1000, seed=99),
                     covariates=list(COVARIATE_NAMES))
    return draws, basis


@pytest.fixture(scope="session")
def reference_artifact_path() -> Path:
    path = FIXTURES / "reference.artifact"
    if not path.exists():
        pytest.skip("reference artifact fixture not generated")
    return path
