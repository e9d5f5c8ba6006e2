"""Hazard core: relative risk, proportional hazards, survival identities."""

import math

import numpy as np
import pytest

from cudrisk.errors import SchemaError
from cudrisk.hazard import (ModelParams, cud_hazard, cud_survival,
                            relative_risk)
from cudrisk.splines import make_knots
from test_splines import gauss_segments


@pytest.fixture(scope="module")
def basis():
    return make_knots([16, 18, 20, 22, 26], 2, 3, (12, 40))


def params_for(basis, beta0=-2.0, beta=(0.4, -0.7), gamma=None, names=("x1", "x2")):
    L = basis.n_basis
    if gamma is None:
        gamma = np.arange(1, L + 1, dtype=float)
        gamma /= gamma.sum()
    return ModelParams(beta0=beta0, beta=np.asarray(beta, dtype=float),
                       baseline_weights=np.asarray(gamma), shrinkage_rate=1.0,
                       covariates=names)


class TestModelParams:
    def test_simplex_enforced(self):
        with pytest.raises(SchemaError, match="simplex|sum to 1"):
            ModelParams(beta0=0.0, beta=np.zeros(1),
                        baseline_weights=np.array([0.5, 0.6]),
                        shrinkage_rate=1.0, covariates=("x",))

    def test_name_alignment(self):
        with pytest.raises(SchemaError, match="length"):
            ModelParams(beta0=0.0, beta=np.zeros(2),
                        baseline_weights=np.array([1.0]),
                        shrinkage_rate=1.0, covariates=("only_one",))


class TestRelativeRisk:
    def test_all_zero_is_one(self, basis):
        params = params_for(basis, beta0=0.0)
        assert relative_risk({"x1": 0.0, "x2": 0.0}, params) == 1.0

    def test_delinquency_ratio_multiplicative(self, basis):
        hr = 19.89
        params = ModelParams(beta0=-1.0, beta=np.array([math.log(hr)]),
                             baseline_weights=np.full(basis.n_basis, 1.0 / basis.n_basis),
                             shrinkage_rate=1.0, covariates=("delinquency",))
        low = relative_risk({"delinquency": 0.0}, params)
        high = relative_risk({"delinquency": 1.0}, params)
        assert high / low == pytest.approx(hr, rel=1e-12)

    def test_intercept_shift(self, basis):
        params = params_for(basis)
        shifted = params_for(basis, beta0=params.beta0 + 0.8)
        profile = {"x1": 0.3, "x2": 0.9}
        ratio = relative_risk(profile, shifted) / relative_risk(profile, params)
        assert ratio == pytest.approx(math.exp(0.8), rel=1e-12)

    def test_missing_covariate(self, basis):
        with pytest.raises(SchemaError, match="x2"):
            relative_risk({"x1": 0.0}, params_for(basis))


class TestHazardSurvival:
    def test_hazard_zero_outside_support(self, basis):
        # all mass on the last basis function: support starts at its left knot
        L = basis.n_basis
        gamma = np.zeros(L)
        gamma[-1] = 1.0
        params = params_for(basis, gamma=gamma)
        t_before = float(basis.knots[L - 1]) - 0.5
        assert cud_hazard(t_before, {"x1": 0, "x2": 0}, params, basis) == 0.0

    def test_proportional_hazards(self, basis):
        params = params_for(basis)
        profile_a = {"x1": 0.2, "x2": 1.0}
        profile_b = {"x1": 0.9, "x2": 0.0}
        ts = np.linspace(basis.lower + 0.2, basis.upper - 0.2, 50)
        log_ratios = [
            math.log(cud_hazard(t, profile_a, params, basis))
            - math.log(cud_hazard(t, profile_b, params, basis))
            for t in ts
        ]
        assert np.ptp(log_ratios) < 1e-12

    def test_doubling_relative_risk_doubles_hazard(self, basis):
        params = params_for(basis)
        boosted = params_for(basis, beta0=params.beta0 + math.log(2.0))
        profile = {"x1": 0.5, "x2": 0.5}
        for t in np.linspace(basis.lower, basis.upper, 20):
            assert cud_hazard(t, profile, boosted, basis) == pytest.approx(
                2.0 * cud_hazard(t, profile, params, basis), rel=1e-12)

    def test_survival_boundaries(self, basis):
        params = params_for(basis)
        profile = {"x1": 0.1, "x2": 0.7}
        assert cud_survival(basis.lower, profile, params, basis) == 1.0
        lp = params.beta0 + 0.1 * 0.4 + 0.7 * (-0.7)
        expected_end = math.exp(-math.exp(lp))
        assert cud_survival(basis.upper, profile, params, basis) == pytest.approx(
            expected_end, rel=1e-12)

    def test_survival_nonincreasing(self, basis):
        rng = np.random.default_rng(17)
        ts = np.linspace(basis.lower, basis.upper, 1000)
        for _ in range(20):
            gamma = rng.dirichlet(np.ones(basis.n_basis))
            params = params_for(basis, beta0=rng.normal(-1, 1),
                                beta=rng.normal(0, 1, 2), gamma=gamma)
            profile = {"x1": rng.random(), "x2": rng.random()}
            surv = [cud_survival(t, profile, params, basis) for t in ts]
            assert (np.diff(surv) <= 1e-15).all()

    def test_hazard_is_slope_of_cumulative_hazard(self, basis):
        """Central differences of -log S1 recover the hazard at random ages."""
        params = params_for(basis)
        profile = {"x1": 0.35, "x2": 1.0}
        rng = np.random.default_rng(41)
        ts = rng.uniform(basis.lower + 0.05, basis.upper - 0.05, size=50)
        h = 1e-6
        for t in ts:
            fd = (math.log(cud_survival(t - h, profile, params, basis))
                  - math.log(cud_survival(t + h, profile, params, basis))) / (2 * h)
            assert fd == pytest.approx(
                cud_hazard(t, profile, params, basis), abs=1e-5)

    def test_neg_log_survival_is_integrated_hazard(self, basis):
        params = params_for(basis)
        profile = {"x1": 0.8, "x2": 0.2}
        for t in (17.0, 21.3, 33.0):
            breaks = np.unique(np.append(basis.knots[basis.knots < t], [basis.lower, t]))
            oracle = gauss_segments(
                lambda u: cud_hazard(u, profile, params, basis), breaks)
            assert -math.log(cud_survival(t, profile, params, basis)) == pytest.approx(
                oracle, abs=1e-8)

    def test_reparameterization_invariance(self, basis):
        """Scaling gamma by c while shifting beta0 by -log(c) is a no-op.

        This identity is why the simplex constraint is needed: without it
        the overall scale is shared between gamma and the intercept.
        """
        from cudrisk.splines import ispline_eval, mspline_eval

        rng = np.random.default_rng(29)
        gamma = rng.dirichlet(np.ones(basis.n_basis))
        beta0, c = -1.3, 2.5
        for t in np.linspace(basis.lower, basis.upper, 30):
            m, integ = mspline_eval(basis, t), ispline_eval(basis, t)
            hazard_orig = float(m @ gamma) * math.exp(beta0)
            hazard_scaled = float(m @ (c * gamma)) * math.exp(beta0 - math.log(c))
            assert hazard_scaled == pytest.approx(hazard_orig, rel=1e-12, abs=1e-300)
            surv_orig = math.exp(-float(integ @ gamma) * math.exp(beta0))
            surv_scaled = math.exp(-float(integ @ (c * gamma))
                                   * math.exp(beta0 - math.log(c)))
            assert surv_scaled == pytest.approx(surv_orig, rel=1e-12)
