import math

import numpy as np
import pytest

import oracles
from nnclass import construct, distlab, nnet, risk
from nnclass.errors import UnsupportedDimensionError, ValidationError


def anti(spec):
    return lambda x: 1.0 - spec.eta(x)


class TestPlugin:
    def test_boundary_is_label_one(self):
        assert risk.plugin_classify(0.5, 0.3, 0.5) == 1
        assert np.all(risk.plugin_classify(0.5, np.linspace(0, 1, 11), 0.5) == 1)

    def test_eta_gives_bayes_rule(self, ramp1):
        x = np.linspace(0, 1, 101)[:, None]
        assert np.array_equal(risk.plugin_classify(ramp1.eta, x), (x[:, 0] >= 0.5).astype(int))

    def test_threshold_shift_identity(self, rng):
        net = nnet.Network(((rng.normal(size=(4, 2)), rng.normal(size=4)), (rng.normal(size=(1, 4)), rng.normal(size=1))))
        x = rng.random((500, 2))
        raw = risk.plugin_classify(net, x, 0.0)
        shifted = risk.plugin_classify(lambda z: net(z) + 0.5, x, 0.5)
        assert np.array_equal(raw, shifted)
        again = risk.plugin_classify(lambda z: net(z) - 0.5, x, -0.5)
        assert np.array_equal(raw, again)


class TestQuadratureClosedForms:
    def test_bayes_rule_risk(self, ramp1):
        assert risk.classification_risk(ramp1.eta, 0.5, ramp1).value == pytest.approx(oracles.RAMP_BAYES, abs=1e-6)

    def test_anti_bayes(self, ramp1):
        assert risk.classification_risk(anti(ramp1), 0.5, ramp1).value == pytest.approx(oracles.RAMP_ANTI_BAYES, abs=1e-6)
        assert risk.excess_risk_exact(anti(ramp1), 0.5, ramp1).value == pytest.approx(oracles.RAMP_ANTI_EXCESS, abs=1e-6)

    def test_deterministic_labels(self):
        one = distlab.constant(1.0)
        assert risk.classification_risk(1.0, 0.5, one).value == 0.0

    def test_excess_of_constant_one(self, ramp1):
        assert risk.excess_risk_exact(1.0, 0.5, ramp1).value == pytest.approx(oracles.RAMP_CONST1_EXCESS, abs=1e-6)

    def test_excess_of_bayes_is_zero(self, ramp1):
        assert risk.excess_risk_exact(ramp1.eta, 0.5, ramp1).value == 0.0

    def test_lp(self, ramp1):
        assert risk.lp_risk(ramp1.eta, ramp1, 1).value == 0.0
        assert risk.lp_risk(0.5, ramp1, 2).value == pytest.approx(oracles.RAMP_HALF_L2, abs=1e-9)
        assert risk.lp_risk(0.5, ramp1, 1).value == pytest.approx(0.25, abs=1e-9)

    def test_raw_score_lp_is_shifted(self, ramp1):
        raw = risk.lp_risk(0.0, ramp1, 2, threshold=0.0).value
        assert raw == pytest.approx(oracles.RAMP_HALF_L2, abs=1e-9)

    def test_2d(self, ramp2):
        assert risk.classification_risk(anti(ramp2), 0.5, ramp2).value == pytest.approx(0.75, abs=1e-6)


class TestMonteCarlo:
    def test_closed_forms_within_3_sigma(self, ramp1):
        cases = [
            (risk.classification_risk(ramp1.eta, 0.5, ramp1, "montecarlo", 10**6, 1), 0.25),
            (risk.classification_risk(anti(ramp1), 0.5, ramp1, "montecarlo", 10**6, 1), 0.75),
            (risk.excess_risk_exact(anti(ramp1), 0.5, ramp1, "montecarlo", 10**6, 1), 0.5),
            (risk.lp_risk(0.5, ramp1, 2, "montecarlo", 10**6, 1), 1 / math.sqrt(12)),
        ]
        for est, truth in cases:
            assert est.stderr > 0
            assert abs(est.value - truth) <= 3 * est.stderr

    def test_budget_floor(self, ramp1):
        with pytest.raises(ValidationError):
            risk.classification_risk(ramp1.eta, 0.5, ramp1, "montecarlo", 999)

    def test_quadrature_limit(self):
        with pytest.raises(UnsupportedDimensionError):
            risk.classification_risk(0.5, 0.5, distlab.ramp(4), "quadrature")

    def test_default_method_high_dimension(self):
        spec = distlab.ramp(5)
        est = risk.classification_risk(spec.eta, 0.5, spec, budget=10**4, seed=2)
        assert est.stderr > 0 and abs(est.value - 0.25) <= 3 * est.stderr

    def test_streams_independent_of_training_data(self, ramp1):
        data = distlab.sample(ramp1, 1000, 5)
        draws = distlab.eval_rng(5, risk.STREAM_RISK).random((1000, 1))
        assert not np.array_equal(np.sort(data.x[:, 0]), np.sort(draws[:, 0]))

    def test_excess_identity_on_random_cases(self, ramp2):
        rng = np.random.default_rng(17)
        bayes = distlab.bayes_risk(ramp2, "montecarlo", 10**5, seed=100)
        for k in range(50):
            w, c = rng.normal(size=2), rng.normal(scale=0.5)
            f = lambda x, w=w, c=c: x @ w + c
            cls = risk.classification_risk(f, 0.0, ramp2, "montecarlo", 10**5, seed=k)
            exc = risk.excess_risk_exact(f, 0.0, ramp2, "montecarlo", 10**5, seed=k)
            assert cls.value >= bayes.value - 3 * math.hypot(cls.stderr, bayes.stderr)
            sigma = math.sqrt(cls.stderr**2 + bayes.stderr**2 + exc.stderr**2)
            assert abs((cls.value - bayes.value) - exc.value) <= 3 * sigma


class TestLpJensen:
    def test_l1_below_l2(self):
        rng = np.random.default_rng(3)
        specs = [distlab.ramp(1), distlab.margin(0.5), distlab.margin(2.0, dim=2), distlab.ramp(2, marginal="tilted")]
        for k in range(20):
            spec = specs[k % len(specs)]
            a = rng.normal(size=spec.dim)
            f = lambda x, a=a: np.sin(x @ a)
            assert risk.lp_risk(f, spec, 1).value <= risk.lp_risk(f, spec, 2).value + 1e-12

    def test_invalid_p(self, ramp1):
        with pytest.raises(ValidationError):
            risk.lp_risk(0.5, ramp1, 3)


class TestComparison:
    def test_exponent(self):
        assert risk.comparison_exponent(1.0, 1) == 1.0
        assert risk.comparison_exponent(2.0, 2) == pytest.approx(1.5)
        assert risk.comparison_exponent(0.0, 1) == 1.0

    def test_bayes_no_violation(self, ramp1):
        rep = risk.comparison_check(ramp1.eta, 0.5, ramp1)
        assert rep.lhs == 0.0 and not rep.violation

    def test_anti_bayes_ratio_one(self, ramp1):
        rep = risk.comparison_check(anti(ramp1), 0.5, ramp1, p=1)
        assert rep.exponent == 1.0
        assert rep.lhs == pytest.approx(0.5, abs=1e-6)
        assert rep.rhs_base == pytest.approx(0.5, abs=1e-6)
        assert rep.ratio == pytest.approx(1.0, abs=1e-5)

    def test_shifted_threshold_has_finite_ratio(self, ramp1):
        rep = risk.comparison_check(ramp1.eta, 0.75, ramp1, p=1)
        assert rep.lhs > 0 and rep.rhs_base > 0 and not rep.violation

    def test_violation_flag_when_rhs_vanishes(self, ramp1, monkeypatch):
        monkeypatch.setattr(risk, "lp_risk", lambda *a, **k: distlab.Estimate(0.0, 0.0))
        rep = risk.comparison_check(anti(ramp1), 0.5, ramp1, p=1)
        assert rep.violation and rep.ratio == math.inf

    def test_margin_sweep_bounded(self):
        spec = distlab.margin(2.0)
        rng = np.random.default_rng(8)
        ratios = []
        for _ in range(50):
            k, phase, amp = rng.integers(1, 6), rng.random(), rng.uniform(0.01, 0.3)
            f = lambda x, k=k, phase=phase, amp=amp: spec.eta(x) + amp * np.sin(2 * np.pi * (k * x[:, 0] + phase))
            rep = risk.comparison_check(f, 0.5, spec, p=1)
            assert not rep.violation
            ratios.append(rep.ratio)
        assert np.isfinite(max(ratios)) and max(ratios) < 10.0

    def test_shrinking_perturbations(self):
        spec = distlab.margin(2.0)
        ratios = []
        for k in range(2, 12):
            eps = 2.0**-k
            for sign in (1, -1):
                rep = risk.comparison_check(lambda x, e=sign * eps: spec.eta(x) + e, 0.5, spec, p=1)
                ratios.append(rep.ratio)
        assert max(ratios) < 2.0


class TestReport:
    def test_row_and_csv(self, ramp1):
        rep = risk.risk_report(anti(ramp1), 0.5, ramp1)
        assert rep.classification_risk - rep.bayes_risk == pytest.approx(rep.excess_risk, abs=1e-6)
        text = rep.to_csv().splitlines()
        assert text[0] == ",".join(risk.RISK_COLUMNS)
        assert len(text) == 2 and rep.n_eval == 0

    def test_network_score(self, ramp1):
        data = distlab.sample(ramp1, 40, 1)
        net = construct.shallow_interpolant(data, construct.interp_targets(data.y))
        rep = risk.risk_report(net, 0.0, ramp1, "montecarlo", 10**4, 3)
        assert 0 <= rep.bayes_risk <= rep.classification_risk + 3 * rep.stderr <= 1 + 3 * rep.stderr
        assert rep.excess_risk >= -3 * rep.stderr
        assert 0 <= rep.lp_risks[1] <= rep.lp_risks[2] and rep.n_eval == 10**4

    def test_probability_scale_bounds(self, ramp2):
        rep = risk.risk_report(lambda x: np.sin(7 * x[:, 0]) ** 2, 0.5, ramp2)
        for v in (rep.bayes_risk, rep.classification_risk, rep.excess_risk):
            assert 0 <= v <= 1
        assert 0 <= rep.lp_risks[1] <= rep.lp_risks[2] <= 2
