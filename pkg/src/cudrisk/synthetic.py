"""Synthetic cohorts from a fully specified ground-truth model.

Event times are drawn by inverting the conditional survival with vectorized
bisection, so any spline baseline is supported.  Every subject gets an
independent counter-based RNG substream derived from the master seed, which
keeps cohorts reproducible no matter how generation is scheduled.  The
hidden truth (event type and uncensored times) is emitted separately from
the cohort so estimators cannot accidentally read it.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .cohort import CohortRecord
from .errors import SchemaError, SimulationError
from .hazard import ModelParams, profile_vector
from .mortality import LifeTableHazard
from .splines import SplineBasis, ispline_matrix

BISECT_TOL = 1e-10


@dataclass(frozen=True)
class SimConfig:
    """Ground truth plus sampling distributions for one synthetic cohort."""

    n: int
    params: ModelParams
    basis: SplineBasis
    life_table: LifeTableHazard
    covariate_dists: dict
    t0_dist: dict
    censor_window: tuple
    weight_dist: dict = field(default_factory=lambda: {"kind": "constant", "value": 1.0})
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise SchemaError("cohort size must be positive")
        cmin, cmax = self.censor_window
        if cmin > cmax:
            raise SchemaError("censoring window must satisfy cmin <= cmax")


@dataclass(frozen=True)
class TruthRecord:
    """What actually happened to a simulated subject, before censoring."""

    id: str
    event_type: str
    cud_time: float
    death_time: float
    censor_time: float


def constant_hazard_model(rate: float, bounds) -> tuple[ModelParams, SplineBasis]:
    """A degree-0 single-basis model whose CUD hazard is constant at ``rate``."""
    lo, hi = float(bounds[0]), float(bounds[1])
    basis = SplineBasis(knots=np.array([lo, hi]), degree=0)
    beta0 = math.log(rate * (hi - lo)) if rate > 0 else -745.0
    params = ModelParams(beta0=beta0, beta=np.empty(0), baseline_weights=np.array([1.0]),
                         shrinkage_rate=1.0, covariates=())
    return params, basis


def _draw(dist: dict, rng) -> float:
    kind = dist.get("kind")
    if kind == "constant":
        return float(dist["value"])
    if kind == "uniform":
        return float(rng.uniform(dist["low"], dist["high"]))
    if kind == "bernoulli":
        return float(rng.random() < dist["p"])
    if kind == "lognormal":
        return float(rng.lognormal(dist.get("mu", 0.0), dist.get("sigma", 1.0)))
    raise SchemaError(f"unknown distribution kind {kind!r}")


def _invert_spline_cumhaz(basis, gamma, rr, t0, targets):
    """Solve (I(t) - I(t0)) . gamma * rr = target for t, or inf if unreachable."""
    n = t0.size
    i_t0 = ispline_matrix(basis, t0) @ gamma
    with np.errstate(over="ignore", divide="ignore"):
        need = targets / rr
    available = 1.0 - i_t0
    reachable = need < available
    out = np.full(n, math.inf)
    if not reachable.any():
        return out
    lo = t0[reachable].copy()
    hi = np.full(lo.size, basis.upper)
    goal = (i_t0 + need)[reachable]
    while np.max(hi - lo) > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        value = ispline_matrix(basis, mid) @ gamma
        high_side = value >= goal
        hi = np.where(high_side, mid, hi)
        lo = np.where(high_side, lo, mid)
    out[reachable] = 0.5 * (lo + hi)
    return out


def _invert_mortality(table: LifeTableHazard, t0, targets):
    """Solve H2(t) - H2(t0) = target; extends past the table with the last rate."""
    end = table.max_age + 1.0
    h_t0 = table.cumulative_hazard(t0)
    h_end = table.cumulative_hazard(np.full(t0.size, end))
    out = np.full(t0.size, math.inf)
    inside = h_t0 + targets <= h_end
    if inside.any():
        lo = t0[inside].copy()
        hi = np.full(lo.size, end)
        goal = (h_t0 + targets)[inside]
        while np.max(hi - lo) > BISECT_TOL:
            mid = 0.5 * (lo + hi)
            value = table.cumulative_hazard(mid)
            high_side = value >= goal
            hi = np.where(high_side, mid, hi)
            lo = np.where(high_side, lo, mid)
        out[inside] = 0.5 * (lo + hi)
    tail = ~inside
    if tail.any() and table.hazard[-1] > 0:
        deficit = (h_t0 + targets - h_end)[tail]
        out[tail] = end + deficit / table.hazard[-1]
    return out


def simulate_cohort(config: SimConfig):
    """Generate ``(records, truths)`` from the configured ground truth."""
    params, basis = config.params, config.basis
    names = list(config.covariate_dists.keys())
    if set(names) != set(params.covariates):
        raise SchemaError("covariate distributions must match model covariates")
    cmin, cmax = config.censor_window
    n = config.n
    X = np.zeros((n, len(params.covariates)))
    t0 = np.zeros(n)
    u_cud = np.zeros(n)
    u_death = np.zeros(n)
    censor = np.zeros(n)
    weight = np.zeros(n)
    profiles = []
    for i in range(n):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(entropy=config.seed, spawn_key=(i,)))
        )
        values = {name: _draw(config.covariate_dists[name], rng) for name in names}
        profiles.append(values)
        X[i] = profile_vector(values, params.covariates)
        t0[i] = _draw(config.t0_dist, rng)
        u_cud[i] = rng.random()
        u_death[i] = rng.random()
        censor[i] = math.inf if math.isinf(cmax) else t0[i] + rng.uniform(cmin, cmax)
        weight[i] = _draw(config.weight_dist, rng)

    if np.any(t0 < basis.lower) or np.any(t0 > basis.upper):
        raise SchemaError("entry ages must fall inside the baseline-hazard domain")

    rr = np.exp(params.beta0 + X @ params.beta)
    cud_time = _invert_spline_cumhaz(basis, params.baseline_weights, rr, t0,
                                     -np.log(u_cud))
    death_time = _invert_mortality(config.life_table, t0, -np.log(u_death))

    records, truths = [], []
    for i in range(n):
        tmin = min(cud_time[i], death_time[i], censor[i])
        if math.isinf(tmin):
            raise SimulationError(
                f"subject {i}: zero hazard everywhere and no censoring bound; "
                "generation cannot terminate"
            )
        is_cud = cud_time[i] < death_time[i] and cud_time[i] < censor[i]
        if is_cud:
            event_type = "cud"
        elif death_time[i] < censor[i]:
            event_type = "death"
        else:
            event_type = "censored"
        records.append(CohortRecord(
            id=f"s{i + 1:06d}", t0=float(t0[i]), t=float(tmin),
            delta=1 if is_cud else 0, weight=float(weight[i]),
            covariates=profiles[i],
        ))
        truths.append(TruthRecord(
            id=f"s{i + 1:06d}", event_type=event_type,
            cud_time=float(cud_time[i]), death_time=float(death_time[i]),
            censor_time=float(censor[i]),
        ))
    return records, truths


def write_truth_csv(path, truths) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "event_type", "cud_time", "death_time", "censor_time"])
        for tr in truths:
            writer.writerow([tr.id, tr.event_type, repr(tr.cud_time),
                             repr(tr.death_time), repr(tr.censor_time)])
