"""Plug-in classifiers and their risks under a known distribution.

Score functions are any callable mapping an ``(m, d)`` array to ``m`` scores
(networks, ``spec.eta``, lambdas) or a plain number for a constant score.
Every estimator returns an :class:`~nnclass.distlab.Estimate`; quadrature
estimates carry a zero standard error. Monte Carlo draws come from evaluation
streams that never overlap the training-data stream of the same seed.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .distlab import DistributionSpec, Estimate, as_points, bayes_risk, expectation
from .errors import ValidationError

# Evaluation stream ids (stream 2 is the Bayes-risk stream in distlab).
STREAM_RISK = 3
STREAM_EXCESS = 4
STREAM_LP = 5

RISK_COLUMNS = ("bayes_risk", "classification_risk", "excess_risk", "lp1", "lp2", "stderr", "n_eval")


def as_score(f):
    if callable(f):
        return f
    value = float(f)
    return lambda x: np.full(len(x), value)


def plugin_classify(f, x, threshold: float = 0.5, dim: int | None = None):
    """Label ``1`` iff ``f(x) >= threshold``.

    ``dim`` defaults to the column count of a 2-d ``x`` and to 1 otherwise.
    """
    arr = np.asarray(x, dtype=float)
    if dim is None:
        dim = arr.shape[1] if arr.ndim == 2 else 1
    pts, single = as_points(arr, dim)
    labels = (np.asarray(as_score(f)(pts), dtype=float) >= threshold).astype(np.int64)
    return int(labels[0]) if single else labels


def _labels(f, x, threshold):
    return np.asarray(as_score(f)(x), dtype=float) >= threshold


def _default_method(spec: DistributionSpec, method: str | None) -> str:
    if method is None:
        return "quadrature" if spec.dim <= 3 else "montecarlo"
    return method


def _check_budget(method: str, budget: int) -> None:
    if method == "montecarlo" and budget < 1000:
        raise ValidationError("Monte Carlo risk estimates need a budget of at least 1000")


def classification_risk(f, threshold: float, spec: DistributionSpec, method: str | None = None, budget: int = 10**6, seed: int = 0) -> Estimate:
    """``P(p_f(X) != Y)``, averaging the conditional error ``eta 1{p=0} + (1-eta) 1{p=1}`` over ``X``."""
    method = _default_method(spec, method)
    _check_budget(method, budget)

    def integrand(x):
        p = _labels(f, x, threshold)
        e = spec.eta(x)
        return np.where(p, 1.0 - e, e)

    return expectation(spec, integrand, method, budget, seed, STREAM_RISK)


def excess_risk_exact(f, threshold: float, spec: DistributionSpec, method: str | None = None, budget: int = 10**6, seed: int = 0) -> Estimate:
    """``E[|2 eta(X) - 1| 1{p_f(X) != g*(X)}]`` with ``g* = 1{eta >= 1/2}``."""
    method = _default_method(spec, method)
    _check_budget(method, budget)

    def integrand(x):
        e = spec.eta(x)
        disagree = _labels(f, x, threshold) != (e >= 0.5)
        return np.abs(2.0 * e - 1.0) * disagree

    return expectation(spec, integrand, method, budget, seed, STREAM_EXCESS)


def lp_risk(f, spec: DistributionSpec, p: int = 2, method: str | None = None, budget: int = 10**6, seed: int = 0, threshold: float = 0.5) -> Estimate:
    """``(E|f(X) - eta(X)|^p)^(1/p)`` for ``p`` in {1, 2}.

    A raw score with decision threshold ``t`` is compared on the probability
    scale as ``f - t + 1/2``. The standard error is propagated through the
    ``1/p`` power by the delta method.
    """
    if p not in (1, 2):
        raise ValidationError("p must be 1 or 2")
    method = _default_method(spec, method)
    _check_budget(method, budget)
    score = as_score(f)

    def integrand(x):
        diff = np.asarray(score(x), dtype=float) - threshold + 0.5 - spec.eta(x)
        return np.abs(diff) ** p

    est = expectation(spec, integrand, method, budget, seed, STREAM_LP)
    value = max(est.value, 0.0) ** (1.0 / p)
    if p == 1 or est.stderr == 0.0:
        return Estimate(value, est.stderr)
    se = est.stderr / (2.0 * value) if value > 0 else math.sqrt(est.stderr)
    return Estimate(value, se)


@dataclass(frozen=True)
class ComparisonReport:
    lhs: float
    rhs_base: float
    exponent: float
    ratio: float
    violation: bool
    stderr: float


def comparison_exponent(alpha: float, p: float) -> float:
    return p * (1.0 + alpha) / (p + alpha)


def comparison_check(
    f,
    threshold: float,
    spec: DistributionSpec,
    alpha: float | None = None,
    c0: float | None = None,
    p: int = 1,
    method: str | None = None,
    budget: int = 10**6,
    seed: int = 0,
) -> ComparisonReport:
    """Excess risk against ``lp_risk ** (p (1 + alpha) / (p + alpha))``.

    ``c0`` is accepted for symmetry with the margin condition; the inequality's
    constant is what the ratio measures, so it is not used here.
    """
    alpha = spec.alpha if alpha is None else alpha
    lhs = excess_risk_exact(f, threshold, spec, method, budget, seed)
    lp = lp_risk(f, spec, p, method, budget, seed, threshold)
    exponent = comparison_exponent(alpha, p)
    rhs = lp.value**exponent
    noise = 3.0 * lhs.stderr
    if rhs < 1e-12:
        violation = lhs.value > noise if lhs.stderr > 0 else lhs.value > 1e-12
        ratio = math.inf if violation else 0.0
    else:
        violation = False
        ratio = lhs.value / rhs
    return ComparisonReport(lhs.value, rhs, exponent, ratio, violation, lhs.stderr)


@dataclass(frozen=True)
class RiskReport:
    bayes_risk: float
    classification_risk: float
    excess_risk: float
    lp_risks: dict
    stderr: float
    n_eval: int

    def row(self) -> dict:
        return {
            "bayes_risk": self.bayes_risk,
            "classification_risk": self.classification_risk,
            "excess_risk": self.excess_risk,
            "lp1": self.lp_risks[1],
            "lp2": self.lp_risks[2],
            "stderr": self.stderr,
            "n_eval": self.n_eval,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RISK_COLUMNS)
        w.writerow([repr(v) if isinstance(v, float) else v for v in self.row().values()])
        return buf.getvalue()


def risk_report(f, threshold: float, spec: DistributionSpec, method: str | None = None, budget: int = 10**6, seed: int = 0) -> RiskReport:
    """All risks of one score function; ``excess_risk`` uses the disagreement identity."""
    method = _default_method(spec, method)
    bayes = bayes_risk(spec, method, max(budget, 10**4), seed)
    risk = classification_risk(f, threshold, spec, method, budget, seed)
    excess = excess_risk_exact(f, threshold, spec, method, budget, seed)
    lps = {p: lp_risk(f, spec, p, method, budget, seed, threshold).value for p in (1, 2)}
    n_eval = budget if method == "montecarlo" else 0
    return RiskReport(bayes.value, risk.value, excess.value, lps, excess.stderr, n_eval)

