"""Command-line front end.

Exit codes: 0 success, 2 input/schema problem, 3 numeric or convergence
failure.  Subcommands are thin wrappers over the library modules; all
tabular output is plain CSV on stdout so results pipe cleanly.
"""

import csv
import json
import math
import os
import sys

import click
import numpy as np

from . import artifact as artifact_io
from .cohort import read_cohort_csv, write_cohort_csv
from .config import read_fit_config
from .errors import ConvergenceError, CudriskError, DomainError, SchemaError
from .hazard import ModelParams
from .mcmc import check_convergence
from .model import AbsoluteRiskModel
from .mortality import read_life_table_csv
from .risk import Anchor, RiskQuery, posterior_risk
from .screening import sign_flip_report, univariate_screen
from .splines import SplineBasis
from .synthetic import SimConfig, simulate_cohort, write_truth_csv
from .validation import (Outcome, PredictionInterval, cross_validate,
                         expected_observed, interval_auc, quartile_calibration,
                         read_predictions_csv, recalibrate, subgroup_calibration,
                         write_predictions_csv)

EXIT_INPUT = 2
EXIT_NUMERIC = 3


def _run(fn):
    try:
        fn()
    except (SchemaError, DomainError, FileNotFoundError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except (ConvergenceError, CudriskError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)


@click.group()
def main():
    """Absolute-risk engine for CUD: fit, predict, validate, simulate, serve."""


@main.command("fit")
@click.argument("cohort", type=click.Path(exists=True))
@click.argument("config", type=click.Path(exists=True))
@click.option("--life-table", "life_table_path", required=True,
              type=click.Path(exists=True), help="CSV life table (age,q).")
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Artifact output path.")
@click.option("--force", is_flag=True,
              help="Write the artifact even if the convergence gate fails.")
def fit_cmd(cohort, config, life_table_path, out, force):
    """Fit the Bayesian model on COHORT using CONFIG; write a model artifact."""

    def body():
        records, covariates = read_cohort_csv(cohort)
        cfg = read_fit_config(config)
        table = read_life_table_csv(life_table_path)
        model = AbsoluteRiskModel(
            life_table=table, interior_knots=cfg.interior_knots, degree=cfg.degree,
            domain=cfg.domain, chains=cfg.chains, warmup=cfg.warmup,
            iterations=cfg.iterations, seed=cfg.seed, target_accept=cfg.target_accept,
            max_leapfrog=cfg.max_leapfrog, smooth_abs_eps=cfg.smooth_abs_eps,
            grid_step=cfg.grid_step, eval_point=cfg.eval_point,
            cri_level=cfg.cri_level, n_jobs=cfg.n_jobs,
        )
        model.fit(records)
        ok, problems = check_convergence(model.draws_)
        if not ok and not force:
            for line in problems:
                click.echo(f"convergence: {line}", err=True)
            raise ConvergenceError(
                "convergence gate failed; re-run with --force to write anyway"
            )
        art = artifact_io.from_model(model, config_digest=cfg.digest)
        artifact_io.save_artifact(out, art)
        click.echo(f"wrote {out}: {len(art.draws)} draws over "
                   f"{len(art.covariates)} covariates "
                   f"(rhat_max={art.diagnostics.get('rhat_max', float('nan')):.4f}, "
                   f"ess_min={art.diagnostics.get('ess_min', float('nan')):.0f})")

    _run(body)


def _read_profiles(path, covariates):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty profile file")
        header = [h.strip() for h in header]
        if "a" not in header:
            raise SchemaError(f"{path}: profile file needs an 'a' column (prediction age)")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            try:
                named = dict(zip(header, row))
                profile = {}
                for name in covariates:
                    if name not in named or named[name].strip() == "":
                        raise ValueError(f"missing covariate {name!r}")
                    profile[name] = float(named[name])
                rows.append((named.get("id", f"row{lineno}"), float(named["a"]), profile))
            except ValueError as exc:
                raise SchemaError(f"{path}: row {lineno}: {exc}") from exc
        return rows


@main.command("predict")
@click.argument("model_file", type=click.Path(exists=True))
@click.argument("profiles", type=click.Path(exists=True))
@click.option("--anchor", type=click.Choice([a.value for a in Anchor]),
              default=Anchor.AT_FIRST_USE.value, show_default=True)
@click.option("--horizon", type=float, required=True,
              help="Years ahead: b = a + horizon.")
@click.option("--grid", type=float, default=1.0, show_default=True,
              help="Subinterval width in years.")
@click.option("--eval-point", type=click.Choice(["midpoint", "left"]),
              default="midpoint", show_default=True)
@click.option("--curve/--no-curve", default=True, show_default=True,
              help="Also print the per-year cumulative risk curve.")
def predict_cmd(model_file, profiles, anchor, horizon, grid, eval_point, curve):
    """Predict absolute risk for each profile row (columns: id,a,<covariates>)."""

    def body():
        art = artifact_io.load_artifact(model_file)
        rows = _read_profiles(profiles, art.covariates)
        estimates = []
        for pid, a, profile in rows:
            query = RiskQuery(a=a, b=a + horizon, profile=profile, anchor=anchor)
            estimates.append((pid, a, posterior_risk(
                query, art.draws, art.basis, art.life_table,
                grid=grid, eval_point=eval_point)))
        writer = csv.writer(sys.stdout)
        writer.writerow(["id", "a", "b", "mean_risk", "cri_low", "cri_high"])
        for pid, a, est in estimates:
            writer.writerow([pid, repr(a), repr(a + horizon), repr(est.mean_risk),
                             repr(est.cri_low), repr(est.cri_high)])
        if curve:
            click.echo("")
            writer.writerow(["id", "age", "cum_risk", "cri_low", "cri_high"])
            for pid, _, est in estimates:
                band = {age: (lo, hi) for age, lo, hi in est.per_year_band}
                for age, risk in est.per_year_curve:
                    lo, hi = band.get(age, (risk, risk))
                    writer.writerow([pid, repr(age), repr(risk), repr(lo), repr(hi)])

    _run(body)


def _sim_config_from_json(payload: dict) -> SimConfig:
    try:
        model = payload["model"]
        knots_spec = model["knots"]
        lo, hi = (float(v) for v in knots_spec["bounds"])
        degree = int(knots_spec.get("degree", 3))
        order = degree + 1
        interior = [float(v) for v in knots_spec.get("interior", [])]
        knots = np.concatenate([np.full(order, lo), np.asarray(interior), np.full(order, hi)])
        basis = SplineBasis(knots=knots, degree=degree)
        beta_map = model.get("beta", {})
        names = tuple(beta_map.keys())
        params = ModelParams(
            beta0=float(model["beta0"]),
            beta=np.array([float(beta_map[name]) for name in names]),
            baseline_weights=np.asarray(model["gamma"], dtype=float),
            shrinkage_rate=float(model.get("tau", 1.0)),
            covariates=names,
        )
        table = read_life_table_csv(payload["life_table"])
        censor = payload["censor"]
        return SimConfig(
            n=int(payload["n"]),
            params=params,
            basis=basis,
            life_table=table,
            covariate_dists=payload["covariates"],
            t0_dist=payload["t0"],
            censor_window=(float(censor[0]), float(censor[1])),
            weight_dist=payload.get("weight", {"kind": "constant", "value": 1.0}),
            seed=int(payload.get("seed", 0)),
        )
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"simulation config: missing or malformed field {exc}") from exc


@main.command("simulate")
@click.argument("sim_config", type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Cohort CSV output path.")
@click.option("--truth-out", type=click.Path(), default=None,
              help="Hidden-truth CSV path (defaults to OUT with .truth.csv).")
def simulate_cmd(sim_config, out, truth_out):
    """Generate a synthetic cohort (and its hidden truth) from SIM_CONFIG JSON."""

    def body():
        with open(sim_config) as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{sim_config}: invalid JSON: {exc}") from exc
        cfg = _sim_config_from_json(payload)
        records, truths = simulate_cohort(cfg)
        write_cohort_csv(out, records, cfg.params.covariates)
        truth_path = truth_out or (os.path.splitext(out)[0] + ".truth.csv")
        write_truth_csv(truth_path, truths)
        n_events = sum(r.delta for r in records)
        click.echo(f"wrote {out} ({len(records)} subjects, {n_events} events) "
                   f"and {truth_path}")

    _run(body)


@main.command("screen")
@click.argument("cohort", type=click.Path(exists=True))
@click.option("--alpha", type=float, default=0.25, show_default=True)
@click.option("--predictors", default=None,
              help="Comma-separated subset (default: all covariates).")
@click.option("--sign-flips/--no-sign-flips", default=True, show_default=True,
              help="Flag multivariate sign disagreements.")
def screen_cmd(cohort, alpha, predictors, sign_flips):
    """Univariate Cox screening report for COHORT."""

    def body():
        records, covariates = read_cohort_csv(cohort)
        names = predictors.split(",") if predictors else covariates
        for name in names:
            if name not in covariates:
                raise SchemaError(f"unknown predictor {name!r}")
        result = univariate_screen(records, names, alpha=alpha)
        flips = {}
        if sign_flips and len(result.retained) >= 2:
            flips = sign_flip_report(records, result.retained)
        writer = csv.writer(sys.stdout)
        writer.writerow(["predictor", "coef", "se", "p", "retained", "sign_flip"])
        for row in result.rows:
            writer.writerow([
                row["predictor"], f"{row['coef']:.6g}", f"{row['se']:.6g}",
                f"{row['p']:.6g}", int(row["retained"]),
                int(flips.get(row["predictor"], False)),
            ])
        for name, reason in result.failed.items():
            click.echo(f"failed: {name}: {reason}", err=True)

    _run(body)


@main.command("validate")
@click.argument("predictions", type=click.Path(exists=True))
@click.option("--quartiles/--no-quartiles", default=True, show_default=True)
@click.option("--subgroups", default=None,
              help="Comma-separated subgroup columns to break E/O down by.")
def validate_cmd(predictions, quartiles, subgroups):
    """AUC and E/O report for a predictions/outcomes file."""

    def body():
        pairs = read_predictions_csv(predictions)
        writer = csv.writer(sys.stdout)
        auc = interval_auc(pairs)
        stats = expected_observed(pairs)
        writer.writerow(["metric", "value"])
        writer.writerow(["n", stats["n"]])
        writer.writerow(["auc", "NA" if auc is None else f"{auc:.6f}"])
        writer.writerow(["E", f"{stats['E']:.6f}"])
        writer.writerow(["O", stats["O"]])
        writer.writerow(["EO", "inf" if math.isinf(stats["ratio"]) else f"{stats['ratio']:.6f}"])
        if quartiles:
            click.echo("")
            writer.writerow(["quartile", "n", "E", "O", "EO"])
            for row in quartile_calibration(pairs):
                writer.writerow([row["quartile"], row["n"], f"{row['E']:.6f}",
                                 row["O"], _ratio_str(row["ratio"])])
        for key in (subgroups.split(",") if subgroups else []):
            click.echo("")
            writer.writerow([f"subgroup:{key}", "n", "E", "O", "EO"])
            for row in subgroup_calibration(pairs, key):
                writer.writerow([row["level"], row["n"], f"{row['E']:.6f}",
                                 row["O"], _ratio_str(row["ratio"])])

    _run(body)


def _ratio_str(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.6f}"


@main.command("recalibrate")
@click.argument("predictions", type=click.Path(exists=True))
@click.option("-o", "--out", required=True, type=click.Path(),
              help="Updated predictions file.")
def recalibrate_cmd(predictions, out):
    """Logistic intercept recalibration of a predictions/outcomes file."""

    def body():
        pairs = read_predictions_csv(predictions)
        usable = [p for p in pairs if p.outcome is not Outcome.CENSORED]
        risks = [p.risk for p in usable]
        outcomes = [1.0 if p.outcome is Outcome.EVENT else 0.0 for p in usable]
        result = recalibrate(risks, outcomes)
        updated_by_id = {p.id: r for p, r in zip(usable, result["risks"])}
        rewritten = []
        subgroup_keys = sorted({k for p in pairs for k in p.subgroups})
        for p in pairs:
            new_risk = updated_by_id.get(p.id, p.risk)
            rewritten.append(type(p)(id=p.id, risk=float(new_risk), outcome=p.outcome,
                                     a=p.a, b=p.b, subgroups=p.subgroups))
        write_predictions_csv(out, rewritten, subgroup_keys)
        click.echo(f"intercept: {result['intercept']!r}")
        click.echo(f"wrote {out}")

    _run(body)


@main.command("cv")
@click.argument("cohort", type=click.Path(exists=True))
@click.argument("config", type=click.Path(exists=True))
@click.option("--life-table", "life_table_path", required=True,
              type=click.Path(exists=True))
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--horizons", default="5",
              help="Comma-separated years-after-first-use horizons.")
@click.option("--at-age", "at_ages", default=None,
              help="Comma-separated 'age:horizon' fixed-age intervals.")
@click.option("--seed", type=int, default=0, show_default=True)
def cv_cmd(cohort, config, life_table_path, folds, horizons, at_ages, seed):
    """K-fold cross-validated AUC and E/O per prediction interval."""

    def body():
        records, _ = read_cohort_csv(cohort)
        cfg = read_fit_config(config)
        table = read_life_table_csv(life_table_path)
        intervals = [PredictionInterval(anchor=Anchor.AT_FIRST_USE, horizon=float(h))
                     for h in horizons.split(",") if h.strip()]
        for spec in (at_ages.split(",") if at_ages else []):
            age, _, horizon = spec.partition(":")
            intervals.append(PredictionInterval(
                anchor=Anchor.AT_AGE, age=float(age), horizon=float(horizon)))
        result = cross_validate(
            records, table, intervals, folds=folds, seed=seed, mcmc=cfg.mcmc(),
            interior_knots=cfg.interior_knots, degree=cfg.degree,
            bounds=cfg.domain, grid=cfg.grid_step, eval_point=cfg.eval_point,
        )
        writer = csv.writer(sys.stdout)
        writer.writerow(["interval", "anchor", "n", "auc", "E", "O", "EO"])
        for row in result.table:
            writer.writerow([
                row["interval"], row["anchor"], row["n"],
                "NA" if row["auc"] is None else f"{row['auc']:.6f}",
                f"{row['E']:.6f}", row["O"], _ratio_str(row["EO"]),
            ])
        for item in result.flagged_folds:
            click.echo(f"flagged fold {item['fold']}: {item['reason']}", err=True)

    _run(body)


@main.command("serve")
@click.argument("model_file", required=False,
                type=click.Path(exists=True), default=None)
@click.option("--port", type=int, default=None,
              help="Port (default: CUDRISK_PORT or 8000).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--thin", type=int, default=None,
              help="Serve a thinned draw subset (Monte Carlo error only).")
@click.option("--grid", type=float, default=1.0, show_default=True)
@click.option("--ui", "ui_dir", type=click.Path(exists=True), default=None,
              help="Directory with the built counseling UI to host at /.")
def serve_cmd(model_file, port, host, thin, grid, ui_dir):
    """Serve the HTTP prediction API for MODEL_FILE (or $CUDRISK_MODEL)."""

    def body():
        import uvicorn

        from .service import create_app

        path = model_file or os.environ.get("CUDRISK_MODEL")
        if not path:
            raise SchemaError("no model file given and CUDRISK_MODEL is unset")
        chosen_port = port if port is not None else int(os.environ.get("CUDRISK_PORT", "8000"))
        app = create_app(artifact_path=path, thin=thin, grid=grid, ui_dir=ui_dir)
        uvicorn.run(app, host=host, port=chosen_port)

    _run(body)


if __name__ == "__main__":
    main()
