"""Rate experiments: size rules, condition calculators and excess-risk decay fits."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .distlab import DistributionSpec, sample
from .erm import TrainConfig, sieve_schedule, sieve_weight_bound, train_erm
from .errors import ExperimentError, TrainingDivergenceError, ValidationError
from .fitting import RateFit, fit_rate
from .nnet import Architecture, SieveSpec
from .risk import excess_risk_exact

VARIANTS = ("rate1", "rate2")
SIEVE_MODES = ("wide", "deep", "theorem-rule")
DEEP_WIDTH = 8
RECORD_COLUMNS = (
    "n",
    "seed",
    "status",
    "conn_budget",
    "architecture",
    "train_surrogate",
    "train_01",
    "excess_risk",
    "excess_stderr",
)
SUMMARY_COLUMNS = ("n", "mean_excess", "stderr", "eval_stderr", "cells", "used")


def default_constant(d: int) -> float:
    return 8.0 * (d + 2)


@dataclass(frozen=True)
class SizeRule:
    conn_budget: int
    depth_cap: int | None
    exponent: float


def _check_exponents(alpha: float, gamma_star: float, m_star: float) -> None:
    if not alpha >= 0:
        raise ValidationError("alpha must be nonnegative")
    if not gamma_star > 0:
        raise ValidationError("gamma_star must be positive")
    if not 0 < m_star < 1:
        raise ValidationError("m_star must lie in (0, 1)")


def size_exponent(alpha: float, gamma_star: float, m_star: float) -> float:
    """``(2 + alpha) m* / (2 (1 + alpha) gamma*)``; zero in the ``gamma* -> inf`` limit."""
    _check_exponents(alpha, gamma_star, m_star)
    if math.isinf(gamma_star):
        return 0.0
    return (2.0 + alpha) * m_star / (2.0 * (1.0 + alpha) * gamma_star)


def _ceil(x: float) -> int:
    # Absorb rounding noise so that e.g. 24 * 1024^0.2 counts as exactly 96.
    return math.ceil(x * (1.0 - 1e-12))


def theorem_size_rule(
    n: int,
    alpha: float,
    gamma_star: float,
    m_star: float,
    variant: str = "rate1",
    d: int = 1,
    C: float | None = None,
) -> SizeRule:
    """Connectivity budget ``ceil(C n^e)``; ``rate2`` multiplies by ``log(n + 1)`` and caps depth likewise."""
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}")
    if n < 1:
        raise ValidationError("n must be at least 1")
    C = default_constant(d) if C is None else float(C)
    if not C > 0:
        raise ValidationError("the size constant must be positive")
    e = size_exponent(alpha, gamma_star, m_star)
    base = C * float(n) ** e
    if variant == "rate1":
        return SizeRule(_ceil(base), None, e)
    size = _ceil(base * math.log(n + 1))
    return SizeRule(size, size, e)


def condition_check(alpha: float, gamma_star: float, m_star: float, variant: str = "rate1") -> bool:
    """``k (1 + alpha) gamma* (1 - m*) >= (2 + alpha) m*`` with ``k = 2`` (rate1) or ``1`` (rate2)."""
    _check_exponents(alpha, gamma_star, m_star)
    if variant not in VARIANTS:
        raise ValidationError(f"variant must be one of {VARIANTS}")
    if math.isinf(gamma_star):
        return True
    k = 2.0 if variant == "rate1" else 1.0
    return k * (1.0 + alpha) * gamma_star * (1.0 - m_star) >= (2.0 + alpha) * m_star


def condition_margin(alpha: float, gamma_star: float, m_star: float, variant: str = "rate1") -> float:
    """Left side minus right side of :func:`condition_check`."""
    k = 2.0 if variant == "rate1" else 1.0
    return k * (1.0 + alpha) * gamma_star * (1.0 - m_star) - (2.0 + alpha) * m_star


# -- closed-form examples -------------------------------------------------------


def holder_mstar(beta: float, alpha: float, d: int = 1) -> float:
    if beta < 1 or alpha < 0 or d < 1:
        raise ValidationError("need beta >= 1, alpha >= 0, d >= 1")
    return beta * (1.0 + alpha) / (2.0 * beta + d)


def holder_gammastar(beta: float) -> float:
    """Optimal exponent of the Hoelder-``beta`` unit ball on ``[0, 1]``."""
    if beta < 1:
        raise ValidationError("need beta >= 1")
    return float(beta)


def besov_mstar(m: float, d: int) -> float:
    if m <= 0 or d < 1:
        raise ValidationError("need m > 0 and d >= 1")
    return m / (2.0 * m + d)


def besov_gammastar(m: float, d: int) -> float:
    if m <= 0 or d < 1:
        raise ValidationError("need m > 0 and d >= 1")
    return m / d


def holder_condition(beta: float, alpha: float, variant: str = "rate1") -> bool:
    """One-dimensional closed forms ``beta - 1 >= (alpha/2)(1 + 2 beta)`` and ``beta - 1 >= alpha (1 + beta)``."""
    if variant == "rate1":
        return beta - 1.0 >= alpha / 2.0 * (1.0 + 2.0 * beta)
    if variant == "rate2":
        return beta - 1.0 >= alpha * (1.0 + beta)
    raise ValidationError(f"variant must be one of {VARIANTS}")


def holder_condition_exact(beta: float, alpha: float, variant: str = "rate1") -> bool:
    """Generic condition after substituting the Hoelder exponents, solved for ``beta`` (d = 1).

    For ``rate1`` this reads ``beta >= (alpha/2)(1 + 2 beta)``, which is weaker
    than :func:`holder_condition` by one unit on the left.
    """
    if variant == "rate1":
        return beta >= alpha / 2.0 * (1.0 + 2.0 * beta)
    return holder_condition(beta, alpha, "rate2")


def besov_condition(m: float, d: int, variant: str = "rate1") -> bool:
    """``2(m + d) >= 2d`` (always true) and ``m + d >= 2d``."""
    if variant == "rate1":
        return 2.0 * (m + d) >= 2.0 * d
    if variant == "rate2":
        return m + d >= 2.0 * d
    raise ValidationError(f"variant must be one of {VARIANTS}")


# -- experiments ----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    spec: DistributionSpec
    n_grid: tuple[int, ...]
    seeds: tuple[int, ...]
    sieve_mode: str = "theorem-rule"
    train: TrainConfig = field(default_factory=TrainConfig)
    eval_budget: int = 10**5
    threshold: float = 0.0
    variant: str = "rate1"
    size_constant: float | None = None
    eval_method: str | None = None
    n_boot: int = 1000

    def __post_init__(self):
        grid = tuple(int(n) for n in self.n_grid)
        object.__setattr__(self, "n_grid", grid)
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise ValidationError("n_grid must be a nonempty ascending list of positive counts")
        if not self.seeds:
            raise ValidationError("seeds must be nonempty")
        if self.sieve_mode not in SIEVE_MODES:
            raise ValidationError(f"sieve_mode must be one of {SIEVE_MODES}")
        if self.variant not in VARIANTS:
            raise ValidationError(f"variant must be one of {VARIANTS}")
        if self.sieve_mode == "theorem-rule" and (self.spec.gamma_star is None or self.spec.m_star is None):
            raise ValidationError("theorem-rule sieves need gamma_star and m_star on the distribution")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown experiment options {sorted(unknown)}")
        if "spec" not in doc or "n_grid" not in doc or "seeds" not in doc:
            raise ValidationError("experiment config needs spec, n_grid and seeds")
        doc["spec"] = DistributionSpec.from_dict(doc["spec"])
        doc["train"] = TrainConfig.from_dict(doc.get("train") or {})
        return cls(**doc)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["spec"] = self.spec.to_dict()
        out["n_grid"] = list(self.n_grid)
        out["seeds"] = list(self.seeds)
        return out


def theorem_sieve(n: int, spec: DistributionSpec, variant: str = "rate1", C: float | None = None) -> SieveSpec:
    """Sieve sized by :func:`theorem_size_rule`.

    ``rate1`` uses one hidden layer as wide as the budget allows. ``rate2``
    stacks hidden layers of width 8 up to the depth cap and the budget.
    """
    d = spec.dim
    rule = theorem_size_rule(n, spec.alpha, spec.gamma_star, spec.m_star, variant, d, C)
    M = rule.conn_budget
    if variant == "rate1":
        dims = (d, max(1, (M - 1) // (d + 2)), 1)
    else:
        w = DEEP_WIDTH
        first = (d + 1) * w + w + 1
        extra = w * w + w
        layers = 1 + max(0, (M - first) // extra)
        layers = max(1, min(layers, rule.depth_cap))
        dims = (d,) + (w,) * layers + (1,)
    return SieveSpec(Architecture(dims), conn_budget=M, weight_bound=sieve_weight_bound(M), depth_cap=rule.depth_cap)


def build_sieve(cfg: ExperimentConfig, n: int) -> SieveSpec:
    if cfg.sieve_mode == "theorem-rule":
        return theorem_sieve(n, cfg.spec, cfg.variant, cfg.size_constant)
    return sieve_schedule(n, cfg.sieve_mode, cfg.spec.dim)


@dataclass
class ExperimentResult:
    fit: RateFit
    records: list[dict]
    summary: list[dict]


def _run_cell(cfg: ExperimentConfig, n: int, seed: int) -> dict:
    sieve = build_sieve(cfg, n)
    row = {
        "n": n,
        "seed": seed,
        "status": "ok",
        "conn_budget": sieve.conn_budget,
        "architecture": str(sieve.arch),
        "train_surrogate": math.nan,
        "train_01": math.nan,
        "excess_risk": math.nan,
        "excess_stderr": math.nan,
    }
    data = sample(cfg.spec, n, seed)
    train_cfg = TrainConfig(**{**asdict(cfg.train), "seed": seed})
    try:
        res = train_erm(sieve, data, train_cfg, threshold=cfg.threshold)
    except TrainingDivergenceError:
        row["status"] = "diverged"
        return row
    ex = excess_risk_exact(res.net, cfg.threshold, cfg.spec, cfg.eval_method, cfg.eval_budget, seed)
    row.update(train_surrogate=res.final_surrogate_risk, train_01=res.final_01_risk, excess_risk=ex.value, excess_stderr=ex.stderr)
    return row


def summarise(records: list[dict], n_grid) -> list[dict]:
    """Per-``n`` mean excess risk, its between-seed standard error and the evaluation error."""
    out = []
    for n in n_grid:
        rows = [r for r in records if r["n"] == n and r["status"] == "ok"]
        vals = np.array([r["excess_risk"] for r in rows])
        evals = np.array([r["excess_stderr"] for r in rows])
        k = len(vals)
        mean = float(vals.mean()) if k else math.nan
        se = float(vals.std(ddof=1) / math.sqrt(k)) if k > 1 else 0.0
        eval_se = float(math.sqrt(np.sum(evals**2)) / k) if k else math.nan
        floor = not k or mean <= 3.0 * eval_se
        out.append({"n": n, "mean_excess": mean, "stderr": se, "eval_stderr": eval_se, "cells": k, "used": not floor})
    return out


def run_rate_experiment(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> ExperimentResult:
    """Train on every ``(n, seed)`` cell, measure excess risk, and fit its decay exponent.

    Cells are visited in ``(n, seed)`` order. Diverged cells are skipped when
    they are fewer than 10% of all cells; otherwise :class:`ExperimentError`
    is raised. Means within three evaluation standard errors of zero are
    marked as noise floor and left out of the fit.
    """
    records = [_run_cell(cfg, n, s) for n in cfg.n_grid for s in cfg.seeds]
    bad = sum(r["status"] != "ok" for r in records)
    if bad and bad >= 0.1 * len(records):
        if out_dir is not None:
            _write_records(Path(out_dir), records)
        raise ExperimentError(f"{bad} of {len(records)} training cells diverged")
    summary = summarise(records, cfg.n_grid)
    fit = _fit_summary(summary, cfg)
    result = ExperimentResult(fit, records, summary)
    if out_dir is not None:
        write_results(result, cfg, out_dir)
    return result


def _fit_summary(summary: list[dict], cfg: ExperimentConfig) -> RateFit:
    used = [(s["n"], s["mean_excess"], s["stderr"]) for s in summary if s["used"]]
    flags = ["noise-floor"] if len(used) < len(summary) else []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            fit = fit_rate(used, n_boot=cfg.n_boot, seed=cfg.seeds[0], theoretical_m=cfg.spec.m_star)
        except Exception:
            fit = None
    if fit is None:
        pts = tuple((s["n"], s["mean_excess"], s["stderr"]) for s in summary)
        return RateFit(0.0, (0.0, 0.0), pts, cfg.spec.m_star, 0.0, tuple(flags + ["degenerate-flat"]))
    pts = tuple((s["n"], s["mean_excess"], s["stderr"]) for s in summary)
    return RateFit(fit.m_hat, fit.band, pts, fit.theoretical_m, fit.intercept, tuple(flags))


# -- persistence ------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows: list[dict], columns) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def _write_records(out: Path, records: list[dict]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "records.csv").write_text(to_csv(records, RECORD_COLUMNS))


def write_manifest(out: Path, config: dict, seeds) -> None:
    doc = {"artifact": "nnclass", "version": __version__, "seeds": list(seeds), "config": config}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_results(result: ExperimentResult, cfg: ExperimentConfig, out_dir: str | Path) -> None:
    out = Path(out_dir)
    _write_records(out, result.records)
    fit_row = result.fit.to_row()
    (out / "summary.csv").write_text(to_csv(result.summary, SUMMARY_COLUMNS))
    (out / "fit.csv").write_text(to_csv([fit_row], tuple(fit_row)))
    write_manifest(out, cfg.to_dict(), cfg.seeds)
