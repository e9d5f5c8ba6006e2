"""CLI: exit codes, file flows, determinism, exact agreement with the library."""

import csv
import io
import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from cudrisk.artifact import load_artifact, payload_digest
from cudrisk.cli import main
from cudrisk.risk import RiskQuery, posterior_risk
from conftest import FIXTURES


@pytest.fixture()
def runner():
    return CliRunner()


def invoke(runner, args, code=0):
    result = runner.invoke(main, [str(a) for a in args])
    assert result.exit_code == code, result.output
    return result


def parse_csv_block(text):
    return list(csv.reader(io.StringIO(text)))


class TestFit:
    def test_corrupt_row_exit_2_with_row_number(self, runner, tmp_path):
        cohort = tmp_path / "bad.csv"
        cohort.write_text(
            "id,t0,t,delta,weight,x\n"
            "a,13,15,1,1.0,0.5\n"
            "b,13,16,0,1.0,\n"
        )
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("chains = 1\nwarmup = 10\niterations = 10\n")
        result = runner.invoke(main, [
            "fit", str(cohort), str(cfg),
            "--life-table", str(FIXTURES / "life_table.csv"),
            "-o", str(tmp_path / "m.artifact")])
        assert result.exit_code == 2
        assert "row 3" in result.output

    def test_convergence_gate_exit_3_and_force(self, runner, tmp_path):
        # 40 draws can never clear the ESS>100 gate
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("chains = 1\nwarmup = 40\niterations = 40\nseed = 4\n"
                       "interior_knots = 1\ndomain_low = 12\ndomain_high = 42\n")
        out = tmp_path / "m.artifact"
        result = runner.invoke(main, [
            "fit", str(FIXTURES / "reference_cohort.csv"), str(cfg),
            "--life-table", str(FIXTURES / "life_table.csv"), "-o", str(out)])
        assert result.exit_code == 3
        assert "convergence" in result.output
        assert not out.exists()
        invoke(runner, ["fit", FIXTURES / "reference_cohort.csv", cfg,
                        "--life-table", FIXTURES / "life_table.csv",
                        "-o", out, "--force"])
        assert out.exists()

    def test_same_seed_byte_identical_draw_section(self, runner, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("chains = 1\nwarmup = 60\niterations = 50\nseed = 9\n"
                       "interior_knots = 1\ndomain_low = 12\ndomain_high = 42\n")
        out1, out2 = tmp_path / "m1.artifact", tmp_path / "m2.artifact"
        for out in (out1, out2):
            invoke(runner, ["fit", FIXTURES / "reference_cohort.csv", cfg,
                            "--life-table", FIXTURES / "life_table.csv",
                            "-o", out, "--force"])
        assert payload_digest(out1) == payload_digest(out2)

    def test_unknown_config_key_exit_2(self, runner, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("chains = 1\nwarmup = 10\niterations = 10\nbogus = 3\n")
        result = runner.invoke(main, [
            "fit", str(FIXTURES / "reference_cohort.csv"), str(cfg),
            "--life-table", str(FIXTURES / "life_table.csv"),
            "-o", str(tmp_path / "m.artifact")])
        assert result.exit_code == 2
        assert "bogus" in result.output


class TestPredict:
    def test_matches_library_exactly(self, runner, reference_artifact_path):
        art = load_artifact(reference_artifact_path)
        result = invoke(runner, ["predict", reference_artifact_path,
                                 FIXTURES / "reference_profiles.csv",
                                 "--horizon", "5", "--no-curve"])
        rows = parse_csv_block(result.output)
        assert rows[0] == ["id", "a", "b", "mean_risk", "cri_low", "cri_high"]
        with open(FIXTURES / "reference_profiles.csv") as fh:
            profile_rows = list(csv.DictReader(fh))
        for out_row, prof in zip(rows[1:], profile_rows):
            a = float(prof["a"])
            profile = {k: float(v) for k, v in prof.items() if k not in ("id", "a")}
            est = posterior_risk(RiskQuery(a=a, b=a + 5.0, profile=profile),
                                 art.draws, art.basis, art.life_table)
            assert float(out_row[3]) == est.mean_risk
            assert float(out_row[4]) == est.cri_low
            assert float(out_row[5]) == est.cri_high

    def test_zero_horizon_zero_risk(self, runner, reference_artifact_path):
        result = invoke(runner, ["predict", reference_artifact_path,
                                 FIXTURES / "reference_profiles.csv",
                                 "--horizon", "0", "--no-curve"])
        rows = parse_csv_block(result.output)
        assert all(float(r[3]) == 0.0 for r in rows[1:])

    def test_curve_section_monotone(self, runner, reference_artifact_path):
        result = invoke(runner, ["predict", reference_artifact_path,
                                 FIXTURES / "reference_profiles.csv",
                                 "--horizon", "10"])
        blocks = result.output.split("\n\n")
        assert len(blocks) == 2
        curve_rows = parse_csv_block(blocks[1])[1:]
        ref1 = [float(r[2]) for r in curve_rows if r[0] == "ref1"]
        assert ref1 == sorted(ref1)
        assert len(ref1) == 10

    def test_missing_covariate_named(self, runner, tmp_path, reference_artifact_path):
        profile = tmp_path / "p.csv"
        profile.write_text("id,a,sex\np1,16,1\n")
        result = runner.invoke(main, ["predict", str(reference_artifact_path),
                                      str(profile), "--horizon", "5"])
        assert result.exit_code == 2
        assert "conscientiousness" in result.output

    def test_frozen_fixture_values(self, runner, reference_artifact_path):
        frozen = json.loads((FIXTURES / "frozen.json").read_text())
        risks = {}
        for label, block in frozen.items():
            horizon = block["b"] - block["a"]
            result = invoke(runner, ["predict", reference_artifact_path,
                                     FIXTURES / "reference_profiles.csv",
                                     "--horizon", repr(horizon), "--no-curve"])
            row = parse_csv_block(result.output)[1]
            assert abs(float(row[3]) - block["mean_risk"]) < 1e-12
            assert abs(float(row[4]) - block["cri_low"]) < 1e-12
            assert abs(float(row[5]) - block["cri_high"]) < 1e-12
            risks[label] = float(row[3])
        # longer horizon, same start: risk can only accumulate
        assert risks["15y"] >= risks["5y"]


class TestSimulate:
    def test_deterministic_output(self, runner, tmp_path):
        out1, out2 = tmp_path / "c1.csv", tmp_path / "c2.csv"
        for out in (out1, out2):
            invoke(runner, ["simulate", FIXTURES / "sim_config.json", "-o", out])
        assert out1.read_bytes() == out2.read_bytes()
        truth = tmp_path / "c1.truth.csv"
        assert truth.exists()
        assert truth.read_text().startswith("id,event_type")

    def test_bad_json_exit_2(self, runner, tmp_path):
        bad = tmp_path / "sim.json"
        bad.write_text("{not json")
        result = runner.invoke(main, ["simulate", str(bad), "-o",
                                      str(tmp_path / "c.csv")])
        assert result.exit_code == 2


class TestScreen:
    def test_report_shape(self, runner):
        result = invoke(runner, ["screen", FIXTURES / "reference_cohort.csv"])
        rows = parse_csv_block(result.output)
        assert rows[0] == ["predictor", "coef", "se", "p", "retained", "sign_flip"]
        assert {r[0] for r in rows[1:]} == {
            "sex", "conscientiousness", "neuroticism", "openness", "delinquency"}
        delinquency = next(r for r in rows[1:] if r[0] == "delinquency")
        assert delinquency[4] == "1"  # strongly associated, retained


def make_predictions_file(path, n=120, seed=6):
    rng = np.random.default_rng(seed)
    lines = ["id,a,b,risk,outcome,sex"]
    for i in range(n):
        risk = float(rng.uniform(0.05, 0.5))
        outcome = "event" if rng.random() < risk * 1.3 else "event_free"
        if rng.random() < 0.08:
            outcome = "censored"
        lines.append(f"p{i},16.0,21.0,{risk!r},{outcome},{i % 2}")
    path.write_text("\n".join(lines) + "\n")


class TestValidateRecalibrate:
    def test_validate_report_passes_module_values_through(self, runner, tmp_path):
        from cudrisk.validation import (expected_observed, interval_auc,
                                        quartile_calibration,
                                        read_predictions_csv)

        preds = tmp_path / "preds.csv"
        make_predictions_file(preds)
        result = invoke(runner, ["validate", preds, "--subgroups", "sex"])
        assert "subgroup:sex" in result.output

        pairs = read_predictions_csv(preds)
        blocks = result.output.split("\n\n")
        overall = dict(row[:2] for row in parse_csv_block(blocks[0])[1:])
        assert overall["auc"] == f"{interval_auc(pairs):.6f}"
        stats = expected_observed(pairs)
        assert overall["E"] == f"{stats['E']:.6f}"
        assert overall["O"] == str(stats["O"])
        assert overall["EO"] == f"{stats['ratio']:.6f}"
        quartile_rows = parse_csv_block(blocks[1])[1:]
        for printed, computed in zip(quartile_rows, quartile_calibration(pairs)):
            assert printed[1] == str(computed["n"])
            assert printed[2] == f"{computed['E']:.6f}"
            assert printed[3] == str(computed["O"])

    def test_recalibrate_idempotent(self, runner, tmp_path):
        preds = tmp_path / "preds.csv"
        make_predictions_file(preds)
        out1 = tmp_path / "preds1.csv"
        r1 = invoke(runner, ["recalibrate", preds, "-o", out1])
        intercept1 = float(r1.output.split("intercept: ")[1].splitlines()[0])
        out2 = tmp_path / "preds2.csv"
        r2 = invoke(runner, ["recalibrate", out1, "-o", out2])
        intercept2 = float(r2.output.split("intercept: ")[1].splitlines()[0])
        assert abs(intercept2) < 1e-6
        assert not math.isclose(intercept1, 0.0, abs_tol=1e-9)


class TestCv:
    def test_smoke_run_both_anchor_types(self, runner, tmp_path):
        cfg = tmp_path / "cfg.txt"
        cfg.write_text("chains = 1\nwarmup = 80\niterations = 80\nseed = 3\n"
                       "interior_knots = 1\ndomain_low = 12\ndomain_high = 47\n")
        result = invoke(runner, [
            "cv", FIXTURES / "reference_cohort.csv", cfg,
            "--life-table", FIXTURES / "life_table.csv",
            "--folds", "2", "--horizons", "5", "--at-age", "16:3"])
        rows = parse_csv_block(result.output)
        assert rows[0] == ["interval", "anchor", "n", "auc", "E", "O", "EO"]
        assert rows[1][0] == "5y-after-first-use"
        assert rows[1][1] == "at_first_use"
        assert int(rows[1][2]) > 0
        assert rows[2][0] == "(16, 19]"
        assert rows[2][1] == "at_age"
        assert int(rows[2][2]) > 0
