"""``nnclass`` command line.

Every subcommand reads a YAML config (``--config``), takes a seed
(``--seed``, overriding any ``seed`` key in the config) and writes CSV files
plus a ``manifest.json`` into ``--out``. Exit status: 0 on success, 2 for
invalid input, 3 when a computation fails.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
import yaml

from . import __version__, bench, construct, distlab, erm, kdrate, nnet, risk
from .errors import ExperimentError, ValidationError


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from None
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ValidationError(f"config {path} must be a mapping")
    return doc


def _spec(cfg: dict) -> distlab.DistributionSpec:
    doc = cfg.get("spec")
    if not isinstance(doc, dict):
        raise ValidationError("config needs a 'spec' mapping")
    return distlab.DistributionSpec.from_dict(doc)


def _write_csv(path: Path, rows: list[dict], columns) -> None:
    path.write_text(bench.to_csv(rows, columns))


def _manifest(out: Path, command: str, cfg: dict, seed: int) -> None:
    doc = {"artifact": "nnclass", "version": __version__, "command": command, "seed": seed, "config": cfg}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=str) + "\n")


def _int(cfg: dict, key: str, default=None) -> int:
    v = cfg.get(key, default)
    if v is None:
        raise ValidationError(f"config needs '{key}'")
    try:
        return int(v)
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}' must be an integer") from None


# -- subcommands ----------------------------------------------------------------


def cmd_sample(cfg: dict, seed: int, out: Path) -> None:
    spec = _spec(cfg)
    data = distlab.sample(spec, _int(cfg, "n"), seed)
    distlab.save_dataset(data, out / "data.csv")
    distlab.dump_spec(spec, out / "spec.yaml")


def _sieve(cfg: dict, spec, n: int) -> nnet.SieveSpec:
    mode = cfg.get("sieve_mode", "wide")
    if mode == "theorem-rule":
        return bench.theorem_sieve(n, spec, cfg.get("variant", "rate1"), cfg.get("size_constant"))
    return erm.sieve_schedule(n, mode, spec.dim)


def cmd_train(cfg: dict, seed: int, out: Path) -> None:
    spec = _spec(cfg)
    n = _int(cfg, "n")
    data = distlab.sample(spec, n, seed)
    tc = erm.TrainConfig.from_dict({**(cfg.get("train") or {}), "seed": seed})
    sieve = _sieve(cfg, spec, n)
    threshold = float(cfg.get("threshold", 0.0))
    if cfg.get("objective", "logistic") == "zero-one":
        res = erm.erm_01_approx(sieve, data, tc, threshold)
    else:
        res = erm.train_erm(sieve, data, tc, threshold=threshold)
    erm.write_telemetry(res, out / "telemetry.csv")
    nnet.save(res.net, out / "net.txt")
    row = {
        "n": n,
        "architecture": str(sieve.arch),
        "restart": res.restart,
        "epochs_used": res.epochs_used,
        "final_surrogate_risk": res.final_surrogate_risk,
        "final_01_risk": res.final_01_risk,
        "interpolated": res.interpolated,
        "weight_magnitude": nnet.weight_magnitude(res.net),
        "connectivity": nnet.connectivity(res.net),
    }
    _write_csv(out / "result.csv", [row], tuple(row))


def cmd_interp(cfg: dict, seed: int, out: Path) -> None:
    spec = _spec(cfg)
    n = _int(cfg, "n")
    data = distlab.sample(spec, n, seed)
    h = construct.interp_targets(data.y)
    kinds = cfg.get("kinds", ["shallow", "deep"])
    rows = []
    for kind in kinds:
        if kind not in ("shallow", "deep"):
            raise ValidationError(f"unknown interpolant kind {kind!r}")
        build = construct.shallow_interpolant if kind == "shallow" else construct.deep_interpolant
        net = build(data, h, seed)
        scores = net(data.x)
        losses = erm.logistic_loss(scores, data.y)
        rows.append(
            {
                "kind": kind,
                "n": n,
                "max_target_error": float(np.max(np.abs(scores - h))),
                "max_loss_excess": float(np.max(losses) - math.log(2.0) / n),
                "train_01": float(np.mean(erm.zero_one_loss(scores, data.y))),
                "depth": nnet.depth(net),
                "width": nnet.width(net),
                "connectivity": nnet.connectivity(net),
            }
        )
        nnet.save(net, out / f"{kind}.net.txt")
    _write_csv(out / "interp.csv", rows, tuple(rows[0]) if rows else ("kind",))


def _score(cfg: dict, spec):
    name = str(cfg.get("score", "eta"))
    if name == "eta":
        return spec.eta
    if name == "anti-bayes":
        return lambda x: 1.0 - spec.eta(x)
    if name.startswith("constant:"):
        return float(name.split(":", 1)[1])
    if name.startswith("net:"):
        return nnet.load(name.split(":", 1)[1])
    raise ValidationError(f"unknown score {name!r}; use eta, anti-bayes, constant:<v> or net:<path>")


def cmd_risk(cfg: dict, seed: int, out: Path) -> None:
    spec = _spec(cfg)
    f = _score(cfg, spec)
    report = risk.risk_report(
        f, float(cfg.get("threshold", 0.5)), spec, cfg.get("method"), _int(cfg, "budget", 10**5), seed
    )
    (out / "risk.csv").write_text(report.to_csv())


def cmd_rates(cfg: dict, seed: int, out: Path) -> None:
    doc = dict(cfg)
    doc.setdefault("seeds", [seed])
    exp = bench.ExperimentConfig.from_dict(doc)
    bench.run_rate_experiment(exp, out)


def _kd_function(doc: dict):
    kind = doc.get("type", "polynomial")
    if kind == "polynomial":
        return kdrate.PiecewisePolynomial.polynomial(doc.get("coeffs", [0.0, 1.0]))
    if kind == "piecewise-polynomial":
        return kdrate.PiecewisePolynomial(tuple(doc["breaks"]), tuple(tuple(c) for c in doc["coeffs"]))
    if kind == "piecewise-constant":
        return kdrate.DyadicPiecewiseConstant(np.asarray(doc["values"], dtype=float))
    raise ValidationError(f"unknown function type {kind!r}")


def cmd_kd(cfg: dict, seed: int, out: Path) -> None:
    f = _kd_function(cfg.get("function") or {})
    dictionary = kdrate.HaarDictionary(int(getattr(f, "dim", 1)), _int(cfg, "level", 8))
    deg = _int(cfg, "pi_degree", 2)
    Ms = [int(m) for m in cfg.get("M_grid", range(1, 33))]
    qs = [int(q) for q in cfg.get("q_grid", [8, 12, 16])]
    c = kdrate.analyze(f, dictionary)
    n2 = kdrate.norm_sq(f, dictionary)
    mrows, srows = [], []
    for M in Ms:
        approx = kdrate.best_m_term(f, dictionary, M, deg, c, n2)
        mrows.append({"M": M, "error": approx.l2_error})
        for q in qs:
            dec = kdrate.decode(kdrate.encode(f, dictionary, M, q, deg, approx), dictionary)
            srows.append({"M": M, "q": q, "bits": kdrate.code_length(M, q, deg, dictionary), "error": kdrate.roundtrip_error(c, n2, dec)})
    _write_csv(out / "mterm.csv", mrows, ("M", "error"))
    _write_csv(out / "sweep.csv", srows, ("M", "q", "bits", "error"))
    eps = [float(e) for e in cfg.get("epsilons", [])]
    crows = [asdict(kdrate.min_code_length(f, dictionary, e, pi_degree=_int(cfg, "code_pi_degree", 1))) for e in eps]
    _write_csv(out / "code.csv", crows, ("epsilon", "bits", "M", "q", "error"))
    if len(mrows) >= 4:
        g = kdrate.fit_gamma([(r["M"], r["error"]) for r in mrows if r["error"] > 0], seed=seed)
        row = {"gamma_hat": g.gamma_hat, "band_lo": g.band[0], "band_hi": g.band[1], "intercept": g.intercept}
        _write_csv(out / "gamma.csv", [row], tuple(row))


def cmd_check(cfg: dict, seed: int, out: Path) -> None:
    rows = []
    for case in cfg.get("conditions", []):
        a, g, m = float(case["alpha"]), float(case["gamma_star"]), float(case["m_star"])
        n = int(case.get("n", 1024))
        d = int(case.get("d", 1))
        rows.append(
            {
                "alpha": a,
                "gamma_star": g,
                "m_star": m,
                "rate1": bench.condition_check(a, g, m, "rate1"),
                "rate2": bench.condition_check(a, g, m, "rate2"),
                "n": n,
                "budget_rate1": bench.theorem_size_rule(n, a, g, m, "rate1", d).conn_budget,
                "budget_rate2": bench.theorem_size_rule(n, a, g, m, "rate2", d).conn_budget,
            }
        )
    _write_csv(out / "conditions.csv", rows, ("alpha", "gamma_star", "m_star", "rate1", "rate2", "n", "budget_rate1", "budget_rate2"))
    hrows = []
    for case in cfg.get("holder", []):
        b, a, d = float(case["beta"]), float(case["alpha"]), int(case.get("d", 1))
        hrows.append(
            {
                "beta": b,
                "alpha": a,
                "d": d,
                "m_star": bench.holder_mstar(b, a, d),
                "rate1": bench.holder_condition(b, a, "rate1"),
                "rate1_generic": bench.holder_condition_exact(b, a, "rate1"),
                "rate2": bench.holder_condition(b, a, "rate2"),
            }
        )
    _write_csv(out / "holder.csv", hrows, ("beta", "alpha", "d", "m_star", "rate1", "rate1_generic", "rate2"))
    brows = []
    for case in cfg.get("besov", []):
        m, d = float(case["m"]), int(case["d"])
        brows.append(
            {
                "m": m,
                "d": d,
                "m_star": bench.besov_mstar(m, d),
                "gamma_star": bench.besov_gammastar(m, d),
                "rate1": bench.besov_condition(m, d, "rate1"),
                "rate2": bench.besov_condition(m, d, "rate2"),
            }
        )
    _write_csv(out / "besov.csv", brows, ("m", "d", "m_star", "gamma_star", "rate1", "rate2"))
    if "tsybakov" in cfg:
        tdoc = cfg["tsybakov"]
        spec = distlab.DistributionSpec.from_dict(tdoc["spec"])
        rep = distlab.verify_tsybakov(spec, tdoc["t_grid"], tdoc.get("method"), int(tdoc.get("budget", 10**6)), seed)
        trows = [{"t": t, "probability": p, "bound": b, "slack": s} for t, p, b, s in zip(rep.t, rep.probabilities, rep.bounds, rep.slack)]
        _write_csv(out / "tsybakov.csv", trows, ("t", "probability", "bound", "slack"))
        _write_csv(out / "tsybakov_summary.csv", [{"holds": rep.holds, "fitted_alpha": rep.fitted_alpha}], ("holds", "fitted_alpha"))


def cmd_sep(cfg: dict, seed: int, out: Path) -> None:
    d = _int(cfg, "d", 2)
    grid = [int(n) for n in cfg.get("n_grid", [16, 64, 256, 1024])]
    reps = _int(cfg, "reps", 100)
    rows = construct.separation_records(d, grid, reps, seed)
    _write_csv(out / "records.csv", [{"n": n, "rep": r, "T_n": t} for n, r, t in rows], ("n", "rep", "T_n"))
    fit = construct.separation_scaling(d, grid, reps, seed)
    row = fit.to_row() | {"slope": fit.slope}
    _write_csv(out / "fit.csv", [row], tuple(row))


COMMANDS = {
    "sample": (cmd_sample, "draw a labelled dataset"),
    "train": (cmd_train, "sieve ERM on a fresh sample"),
    "interp": (cmd_interp, "build interpolating networks"),
    "risk": (cmd_risk, "risks of a score function"),
    "rates": (cmd_rates, "excess-risk rate experiment"),
    "kd": (cmd_kd, "Haar M-term and code-length sweeps"),
    "check": (cmd_check, "condition calculators and margin checks"),
    "sep": (cmd_sep, "minimum-separation scaling"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nnclass", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"nnclass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML configuration file")
        p.add_argument("--seed", type=int, default=None, help="64-bit seed (overrides the config)")
        p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args.config)
        seed = distlab.check_seed(args.seed if args.seed is not None else int(cfg.pop("seed", 0)))
        cfg.pop("seed", None)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, seed, out)
        if args.command != "rates":
            _manifest(out, args.command, cfg, seed)
    except ValidationError as exc:
        print(f"nnclass: error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError) as exc:
        print(f"nnclass: error: bad configuration ({exc})", file=sys.stderr)
        return 2
    except ExperimentError as exc:
        print(f"nnclass: experiment failed: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
