"""Discrimination, calibration, recalibration and cross-validation.

Metrics follow the absolute-risk convention: for an interval (a, b] a
case is an event inside the interval, a control survives event-free
through b, and subjects censored inside the interval are excluded from
both the AUC and the E/O populations so that expected and observed counts
cover the same subjects.
"""

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceError, SchemaError
from .mcmc import McmcConfig, run_mcmc
from .risk import Anchor, RiskQuery, posterior_risk
from .splines import make_knots


class Outcome(enum.Enum):
    EVENT = "event"
    EVENT_FREE = "event_free"
    CENSORED = "censored"


@dataclass(frozen=True)
class PredictionOutcomePair:
    """A predicted interval risk joined with what actually happened."""

    id: str
    risk: float
    outcome: Outcome
    a: float = 0.0
    b: float = 0.0
    subgroups: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.outcome, str):
            object.__setattr__(self, "outcome", Outcome(self.outcome))


def _included(pairs):
    return [p for p in pairs if p.outcome is not Outcome.CENSORED]


def interval_auc(pairs):
    """Mann-Whitney probability that a case outranks a control; None if undefined."""
    cases = np.array([p.risk for p in pairs if p.outcome is Outcome.EVENT])
    controls = np.array([p.risk for p in pairs if p.outcome is Outcome.EVENT_FREE])
    if cases.size == 0 or controls.size == 0:
        return None
    wins = (cases[:, None] > controls[None, :]).sum()
    ties = (cases[:, None] == controls[None, :]).sum()
    return float((wins + 0.5 * ties) / (cases.size * controls.size))


def expected_observed(pairs) -> dict:
    """Expected vs observed event counts over the included population."""
    included = _included(pairs)
    expected = float(sum(p.risk for p in included))
    observed = sum(1 for p in included if p.outcome is Outcome.EVENT)
    ratio = expected / observed if observed > 0 else math.inf
    return {"E": expected, "O": observed, "ratio": ratio, "n": len(included)}


def quartile_calibration(pairs) -> list[dict]:
    """E/O within four nearest-rank risk quartiles (stable id tie-break)."""
    included = _included(pairs)
    if len(included) < 4:
        raise SchemaError("need at least four non-censored subjects for quartiles")
    ranked = sorted(included, key=lambda p: (p.risk, p.id))
    n = len(ranked)
    bounds = [0] + [math.ceil(n * k / 4) for k in (1, 2, 3)] + [n]
    out = []
    for g in range(4):
        group = ranked[bounds[g]:bounds[g + 1]]
        stats = expected_observed(group)
        stats["quartile"] = g + 1
        out.append(stats)
    return out


def subgroup_calibration(pairs, key: str) -> list[dict]:
    """E/O by the label a subgroup key takes across the included subjects."""
    included = _included(pairs)
    levels: dict = {}
    for p in included:
        levels.setdefault(str(p.subgroups.get(key, "")), []).append(p)
    out = []
    for label in sorted(levels):
        stats = expected_observed(levels[label])
        stats["level"] = label
        out.append(stats)
    return out


def recalibrate(risks, outcomes, tol: float = 1e-10, max_iter: int = 100) -> dict:
    """Intercept-only logistic update of logit risks to a new prevalence.

    Solves sum(sigmoid(logit(r) + c)) = sum(outcomes) by Newton iteration.
    The update is rank-preserving, so discrimination is untouched while
    the expected-to-observed ratio is driven to one.
    """
    risks = np.asarray(risks, dtype=float)
    y = np.asarray(outcomes, dtype=float)
    if risks.size != y.size or risks.size == 0:
        raise SchemaError("risks and outcomes must be equal-length and nonempty")
    if np.any((risks <= 0) | (risks >= 1)):
        raise SchemaError("risks must lie strictly inside (0, 1)")
    events = float(y.sum())
    if events == 0 or events == y.size:
        raise ConvergenceError("all outcomes identical: recalibration intercept diverges")
    lr = np.log(risks / (1.0 - risks))
    c = 0.0
    for _ in range(max_iter):
        p = 1.0 / (1.0 + np.exp(-(lr + c)))
        f = float(p.sum() - events)
        fprime = float((p * (1.0 - p)).sum())
        step = f / fprime
        c -= step
        if abs(step) < tol:
            break
    else:
        raise ConvergenceError("recalibration intercept did not converge")
    updated = 1.0 / (1.0 + np.exp(-(lr + c)))
    return {"intercept": float(c), "risks": updated}


@dataclass(frozen=True)
class PredictionInterval:
    """An interval spec: a horizon after first use, or a fixed age window."""

    anchor: Anchor
    horizon: float
    age: float | None = None

    def __post_init__(self):
        if isinstance(self.anchor, str):
            object.__setattr__(self, "anchor", Anchor(self.anchor))
        if self.anchor is Anchor.AT_AGE and self.age is None:
            raise SchemaError("at_age interval needs an age")

    def label(self) -> str:
        if self.anchor is Anchor.AT_FIRST_USE:
            return f"{self.horizon:g}y-after-first-use"
        return f"({self.age:g}, {self.age + self.horizon:g}]"

    def window(self, record):
        if self.anchor is Anchor.AT_FIRST_USE:
            return record.t0, record.t0 + self.horizon
        return self.age, self.age + self.horizon


def classify_outcome(record, a: float, b: float):
    """Outcome of one subject over (a, b]; None when not at risk at a."""
    if record.t0 > a or record.t <= a:
        return None
    if record.t > b:
        return Outcome.EVENT_FREE
    return Outcome.EVENT if record.delta == 1 else Outcome.CENSORED


def fold_assignments(n: int, folds: int, seed: int) -> np.ndarray:
    """Seeded shuffle partition; fold sizes differ by at most one."""
    if folds < 2:
        raise SchemaError("need at least two folds")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    out = np.empty(n, dtype=int)
    out[perm] = np.arange(n) % folds
    return out


@dataclass
class CrossValidationResult:
    table: list
    flagged_folds: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)


def cross_validate(data, life_table, intervals, folds: int = 5, seed: int = 0,
                   mcmc: McmcConfig | None = None, interior_knots: int = 5,
                   degree: int = 3, bounds=None, grid: float = 1.0,
                   eval_point: str = "midpoint", n_jobs: int = 1) -> CrossValidationResult:
    """K-fold refit-and-score harness over the given prediction intervals.

    Each fold refits the model on the training split (knots placed from
    the training events only) and predicts held-out subjects; predictions
    pool across folds, in fold order, before AUC and E/O are computed per
    interval.  Folds are independent, so ``n_jobs`` may run them in
    parallel without changing any result.
    """
    mcmc = mcmc or McmcConfig()
    n = len(data)
    assign = fold_assignments(n, folds, seed)
    if bounds is None:
        lo = min(r.t0 for r in data)
        hi = max(r.t for r in data)
        for iv in intervals:
            if iv.anchor is Anchor.AT_FIRST_USE:
                hi = max(hi, max(r.t0 for r in data) + iv.horizon)
            else:
                hi = max(hi, iv.age + iv.horizon)
        bounds = (lo - 1e-6, hi + 1e-6)

    chain_seeds = np.random.SeedSequence(seed).spawn(folds)

    def run_fold(f: int):
        train = [r for r, g in zip(data, assign) if g != f]
        test = [r for r, g in zip(data, assign) if g == f]
        events = [r.t for r in train if r.delta == 1]
        fold_pairs: dict = {iv.label(): [] for iv in intervals}
        fold_skipped: dict = {iv.label(): 0 for iv in intervals}
        if not events:
            return {"fold": f, "reason": "no events in training split"}, fold_pairs, fold_skipped
        basis = make_knots(events, interior_knots, degree, bounds)
        fold_cfg = replace(mcmc, seed=int(chain_seeds[f].generate_state(1)[0]))
        try:
            draws = run_mcmc(train, basis, fold_cfg)
        except ConvergenceError as exc:
            return {"fold": f, "reason": str(exc)}, fold_pairs, fold_skipped
        for iv in intervals:
            for rec in test:
                a, b = iv.window(rec)
                outcome = classify_outcome(rec, a, b)
                if outcome is None:
                    continue
                if a < basis.lower or b > basis.upper or b > life_table.max_age + 1:
                    fold_skipped[iv.label()] += 1
                    continue
                query = RiskQuery(a=a, b=b, profile=rec.covariates, anchor=iv.anchor)
                est = posterior_risk(query, draws, basis, life_table,
                                     grid=grid, eval_point=eval_point)
                fold_pairs[iv.label()].append(PredictionOutcomePair(
                    id=rec.id, risk=est.mean_risk, outcome=outcome, a=a, b=b,
                ))
        return None, fold_pairs, fold_skipped

    if n_jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(run_fold, range(folds)))
    else:
        results = [run_fold(f) for f in range(folds)]

    pooled: dict = {iv.label(): [] for iv in intervals}
    flagged = []
    skipped: dict = {iv.label(): 0 for iv in intervals}
    for flag, fold_pairs, fold_skipped in results:
        if flag is not None:
            flagged.append(flag)
        for label, pairs in fold_pairs.items():
            pooled[label].extend(pairs)
        for label, count in fold_skipped.items():
            skipped[label] += count

    table = []
    for iv in intervals:
        pairs = pooled[iv.label()]
        stats = expected_observed(pairs) if pairs else {"E": 0.0, "O": 0, "ratio": math.inf, "n": 0}
        table.append({
            "interval": iv.label(),
            "anchor": iv.anchor.value,
            "n": stats["n"],
            "auc": interval_auc(pairs) if pairs else None,
            "E": stats["E"],
            "O": stats["O"],
            "EO": stats["ratio"],
        })
    return CrossValidationResult(table=table, flagged_folds=flagged, skipped=skipped)


def read_predictions_csv(path) -> list[PredictionOutcomePair]:
    """Parse the ``id,a,b,risk,outcome[,subgroup...]`` interchange file."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:5]] != ["id", "a", "b", "risk", "outcome"]:
            raise SchemaError(f"{path}: expected header 'id,a,b,risk,outcome[,subgroup...]'")
        subgroup_keys = [h.strip() for h in header[5:]]
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                out.append(PredictionOutcomePair(
                    id=row[0], a=float(row[1]), b=float(row[2]), risk=float(row[3]),
                    outcome=Outcome(row[4].strip()),
                    subgroups={k: v for k, v in zip(subgroup_keys, row[5:])},
                ))
            except (ValueError, IndexError) as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from exc
    return out


def write_predictions_csv(path, pairs, subgroup_keys=()) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "a", "b", "risk", "outcome", *subgroup_keys])
        for p in pairs:
            writer.writerow([
                p.id, repr(p.a), repr(p.b), repr(p.risk), p.outcome.value,
                *[p.subgroups.get(k, "") for k in subgroup_keys],
            ])
