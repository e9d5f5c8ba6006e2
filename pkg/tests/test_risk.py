"""Risk engine: closed-form oracles, partition, coherence, posterior averaging."""

import math

import numpy as np
import pytest

from cudrisk.errors import DomainError
from cudrisk.hazard import ModelParams
from cudrisk.mcmc import PosteriorDraws
from cudrisk.risk import (Anchor, RiskQuery, absolute_risk,
                          competing_death_risk, posterior_risk)
from cudrisk.splines import SplineBasis
from cudrisk.synthetic import constant_hazard_model
from conftest import flat_life_table


@pytest.fixture(scope="module")
def constant_setup():
    params, basis = constant_hazard_model(0.1, (0.0, 40.0))
    table = flat_life_table(0.02)
    return params, basis, table


CONSTANT_TRUTH = (0.1 / 0.12) * (1.0 - math.exp(-0.6))
DEATH_TRUTH = (0.02 / 0.12) * (1.0 - math.exp(-0.6))


class TestConstantHazardOracle:
    def test_unit_grid(self, constant_setup):
        params, basis, table = constant_setup
        risk = absolute_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table)
        assert risk == pytest.approx(CONSTANT_TRUTH, abs=0.01)
        assert risk == pytest.approx(0.375990, abs=1e-5)

    def test_fine_grid_converges(self, constant_setup):
        params, basis, table = constant_setup
        risk = absolute_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table,
                             grid=0.01)
        assert risk == pytest.approx(CONSTANT_TRUTH, abs=1e-4)

    def test_competing_death(self, constant_setup):
        params, basis, table = constant_setup
        risk = competing_death_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table)
        assert risk == pytest.approx(DEATH_TRUTH, abs=0.01)
        assert risk == pytest.approx(0.075198, abs=1e-5)

    def test_empty_interval(self, constant_setup):
        params, basis, table = constant_setup
        q = RiskQuery(a=3.0, b=3.0, profile={})
        assert absolute_risk(q, params, basis, table) == 0.0
        assert competing_death_risk(q, params, basis, table) == 0.0

    def test_left_endpoint_variant(self, constant_setup):
        params, basis, table = constant_setup
        risk = absolute_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table,
                             eval_point="left")
        assert risk == pytest.approx(CONSTANT_TRUTH, abs=0.01)


def test_zero_cause_hazard_gives_zero(constant_setup):
    _, basis, table = constant_setup
    params, _ = constant_hazard_model(0.0, (0.0, 40.0))
    risk = absolute_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table)
    assert risk == pytest.approx(0.0, abs=1e-300)


def test_zero_mortality_death_risk_is_zero():
    params, basis = constant_hazard_model(0.1, (0.0, 40.0))
    table = flat_life_table(0.0)
    risk = competing_death_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table)
    assert risk == 0.0


def test_competing_mortality_lowers_risk_below_pure_risk():
    """Absolute risk sits below the pure (mortality-free) event probability."""
    params, basis = constant_hazard_model(0.1, (0.0, 40.0))
    q = RiskQuery(a=0, b=10, profile={})
    pure = absolute_risk(q, params, basis, flat_life_table(0.0))
    assert pure == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    lowered = absolute_risk(q, params, basis, flat_life_table(0.08))
    assert lowered < pure
    # heavier mortality removes more people before they can develop the event
    heavier = absolute_risk(q, params, basis, flat_life_table(0.3))
    assert heavier < lowered


def test_disjoint_support_gives_zero(flat_table=flat_life_table(0.0)):
    # mass on [30, 40] only; query ends before the support begins
    basis = SplineBasis(knots=np.array([0.0, 30.0, 40.0]), degree=0)
    params = ModelParams(beta0=0.0, beta=np.empty(0),
                         baseline_weights=np.array([0.0, 1.0]),
                         shrinkage_rate=1.0, covariates=())
    risk = absolute_risk(RiskQuery(a=0, b=20, profile={}), params, basis,
                         flat_table)
    assert risk == 0.0


class TestInvariants:
    def make_random_model(self, rng, n_basis=6):
        knots = np.concatenate([np.full(4, 10.0), np.sort(rng.uniform(14, 36, n_basis - 4)),
                                np.full(4, 40.0)])
        basis = SplineBasis(knots=knots, degree=3)
        params = ModelParams(beta0=rng.normal(-2, 0.5), beta=rng.normal(0, 0.8, 2),
                             baseline_weights=rng.dirichlet(np.ones(n_basis)),
                             shrinkage_rate=1.0, covariates=("u", "v"))
        return params, basis

    def test_partition_constant_regime(self):
        """Degree-0 spline: hazards truly constant per year, partition is exact."""
        rng = np.random.default_rng(5)
        knots = np.concatenate([[10.0], np.arange(11.0, 40.0), [40.0]])
        basis = SplineBasis(knots=knots, degree=0)
        table = flat_life_table(0.015)
        for _ in range(10):
            params = ModelParams(beta0=rng.normal(-1, 0.5), beta=rng.normal(0, 0.5, 1),
                                 baseline_weights=rng.dirichlet(np.ones(basis.n_basis)),
                                 shrinkage_rate=1.0, covariates=("x",))
            profile = {"x": rng.random()}
            a, b = 12.0, 31.0
            q = RiskQuery(a=a, b=b, profile=profile)
            r1 = absolute_risk(q, params, basis, table)
            r2 = competing_death_risk(q, params, basis, table)
            lam_total = params.baseline_weights / np.diff(np.unique(knots)).mean()
            # survivors from the true model survival functions
            from cudrisk.hazard import cud_survival
            from cudrisk.mortality import mortality_survival_ratio
            surv = (cud_survival(b, profile, params, basis)
                    / cud_survival(a, profile, params, basis)
                    * mortality_survival_ratio(a, b, table))
            assert r1 + r2 + surv == pytest.approx(1.0, abs=1e-10)

    def test_partition_smooth_hazard(self, demo_table):
        rng = np.random.default_rng(6)
        for _ in range(10):
            params, basis = self.make_random_model(rng)
            profile = {"u": rng.random(), "v": rng.random()}
            a, b = 13.0, 39.0
            q = RiskQuery(a=a, b=b, profile=profile)
            r1 = absolute_risk(q, params, basis, demo_table)
            r2 = competing_death_risk(q, params, basis, demo_table)
            from cudrisk.hazard import cud_survival
            from cudrisk.mortality import mortality_survival_ratio
            surv = (cud_survival(b, profile, params, basis)
                    / cud_survival(a, profile, params, basis)
                    * mortality_survival_ratio(a, b, demo_table))
            assert r1 + r2 + surv == pytest.approx(1.0, abs=1e-10)

    def test_monotone_in_horizon(self, demo_table):
        rng = np.random.default_rng(7)
        params, basis = self.make_random_model(rng)
        profile = {"u": 0.4, "v": 0.9}
        bs = np.concatenate([np.arange(14.0, 40.0), rng.uniform(14, 40, 40)])
        risks = [absolute_risk(RiskQuery(a=13.0, b=b, profile=profile),
                               params, basis, demo_table) for b in np.sort(bs)]
        assert (np.diff(risks) >= -1e-12).all()

    def test_conditioning_coherence(self):
        """r(a,c) = r(a,b) + S(b)/S(a) * r(b,c) in the constant-per-year regime."""
        rng = np.random.default_rng(8)
        knots = np.concatenate([[10.0], np.arange(11.0, 40.0), [40.0]])
        basis = SplineBasis(knots=knots, degree=0)
        table = flat_life_table(0.01)
        from cudrisk.hazard import cud_survival
        from cudrisk.mortality import mortality_survival_ratio
        for _ in range(10):
            params = ModelParams(beta0=rng.normal(-1, 0.5), beta=np.empty(0),
                                 baseline_weights=rng.dirichlet(np.ones(basis.n_basis)),
                                 shrinkage_rate=1.0, covariates=())
            a, b, c = 12.0, 20.0, 33.0
            r_ac = absolute_risk(RiskQuery(a=a, b=c, profile={}), params, basis, table)
            r_ab = absolute_risk(RiskQuery(a=a, b=b, profile={}), params, basis, table)
            r_bc = absolute_risk(RiskQuery(a=b, b=c, profile={}), params, basis, table)
            ratio = (cud_survival(b, {}, params, basis) / cud_survival(a, {}, params, basis)
                     * mortality_survival_ratio(a, b, table))
            assert r_ac == pytest.approx(r_ab + ratio * r_bc, abs=1e-10)

    def test_positive_coefficient_raises_risk(self, demo_table):
        rng = np.random.default_rng(9)
        for _ in range(10):
            params, basis = self.make_random_model(rng)
            raised = ModelParams(beta0=params.beta0,
                                 beta=params.beta + np.array([0.5, 0.0]),
                                 baseline_weights=params.baseline_weights,
                                 shrinkage_rate=1.0, covariates=params.covariates)
            profile = {"u": rng.uniform(0.1, 1.0), "v": rng.random()}
            q = RiskQuery(a=13.0, b=30.0, profile=profile)
            low = absolute_risk(q, params, basis, demo_table)
            high = absolute_risk(q, raised, basis, demo_table)
            assert high >= low - 1e-15

    def test_fractional_endpoints(self, constant_setup=None):
        params, basis = constant_hazard_model(0.08, (0.0, 40.0))
        table = flat_life_table(0.01)
        risk = absolute_risk(RiskQuery(a=16.5, b=21.25, profile={}), params, basis, table)
        lam = 0.09
        expected = (0.08 / lam) * (1.0 - math.exp(-lam * 4.75))
        assert risk == pytest.approx(expected, abs=1e-12)

    def test_bad_arguments(self, demo_table):
        params, basis = constant_hazard_model(0.1, (10.0, 40.0))
        with pytest.raises(ValueError):
            RiskQuery(a=20.0, b=19.0, profile={})
        with pytest.raises(DomainError):
            absolute_risk(RiskQuery(a=5.0, b=20.0, profile={}), params, basis, demo_table)


class TestPosteriorRisk:
    def make_draws(self, rng, n, basis, names=()):
        p = len(names)
        return PosteriorDraws(
            beta0=rng.normal(-2.0, 0.3, n),
            beta=rng.normal(0, 0.4, (n, p)),
            gamma=rng.dirichlet(np.ones(basis.n_basis), size=n),
            tau=np.abs(rng.normal(1, 0.2, n)),
            chain=np.zeros(n, dtype=int),
            iteration=np.arange(n),
            covariates=tuple(names),
        )

    def test_single_draw_degenerate(self, constant_setup):
        params, basis, table = constant_setup
        est = posterior_risk(RiskQuery(a=0, b=5, profile={}), [params], basis, table)
        point = absolute_risk(RiskQuery(a=0, b=5, profile={}), params, basis, table)
        assert est.mean_risk == point
        assert est.cri_low == est.cri_high == point

    def test_identical_draws_zero_width(self, constant_setup):
        params, basis, table = constant_setup
        est = posterior_risk(RiskQuery(a=0, b=5, profile={}),
                             [params] * 64, basis, table)
        assert est.cri_low == est.cri_high == est.mean_risk

    def test_percentiles_match_sort_oracle(self, demo_table):
        rng = np.random.default_rng(12)
        knots = np.concatenate([np.full(4, 10.0), [18.0, 24.0], np.full(4, 40.0)])
        basis = SplineBasis(knots=knots, degree=3)
        draws = self.make_draws(rng, 1000, basis, names=("x",))
        q = RiskQuery(a=14.0, b=30.0, profile={"x": 0.5})
        est = posterior_risk(q, draws, basis, demo_table)
        per_draw = np.array([
            absolute_risk(q, draws[i], basis, demo_table) for i in range(1000)
        ])
        srt = np.sort(per_draw)
        assert est.mean_risk == pytest.approx(per_draw.mean(), rel=1e-12)
        assert est.cri_low == srt[math.ceil(0.025 * 1000) - 1]
        assert est.cri_high == srt[math.ceil(0.975 * 1000) - 1]
        assert est.cri_low <= est.mean_risk <= est.cri_high

    def test_curve_monotone_and_ends_at_horizon(self, demo_table):
        rng = np.random.default_rng(13)
        knots = np.concatenate([np.full(4, 10.0), [20.0], np.full(4, 40.0)])
        basis = SplineBasis(knots=knots, degree=3)
        draws = self.make_draws(rng, 200, basis)
        est = posterior_risk(RiskQuery(a=14.5, b=29.25, profile={}), draws, basis,
                             demo_table)
        ages = [age for age, _ in est.per_year_curve]
        values = [v for _, v in est.per_year_curve]
        assert ages == sorted(ages)
        assert ages[-1] == 29.25
        assert all(float(a).is_integer() for a in ages[:-1])
        assert (np.diff(values) >= -1e-15).all()
        assert values[-1] == pytest.approx(est.mean_risk, rel=1e-12)
        for (age, lo, hi), (_, mid) in zip(est.per_year_band, est.per_year_curve):
            assert lo <= mid + 1e-12 and mid <= hi + 1e-12

    def test_empty_draws_error(self, constant_setup):
        _, basis, table = constant_setup
        with pytest.raises(ValueError, match="empty"):
            posterior_risk(RiskQuery(a=0, b=5, profile={}), [], basis, table)

    def test_anchor_enum_round_trip(self):
        q = RiskQuery(a=16, b=21, profile={}, anchor="at_age")
        assert q.anchor is Anchor.AT_AGE
