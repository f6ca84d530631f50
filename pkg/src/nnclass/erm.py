"""Empirical risk minimisation over sieve classes of dense ReLU networks.

Training is full-batch gradient descent (optionally heavy-ball momentum) with
exact backpropagation, projected onto the sieve every ``project_every`` steps
and at termination. Restart ``r`` draws its initial weights from the seed
``cfg.seed ^ r``; the restart with the lowest final surrogate risk wins, ties
going to the lower index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .distlab import Dataset, check_seed
from .errors import StructuralError, TrainingDivergenceError, ValidationError
from .nnet import (
    Architecture,
    Network,
    SieveSpec,
    connectivity,
    dense,
    project_to_sieve,
    weight_magnitude,
)

OPTIMIZERS = ("plain", "momentum")
LOSSES = ("logistic", "squared")
WEIGHT_CAP = 1e6
# Perturbation menu of the 0-1 local search: 8 log-spaced magnitudes, both signs.
LOCAL_SEARCH_MENU = np.concatenate([np.geomspace(1e-4, 1.0, 8), -np.geomspace(1e-4, 1.0, 8)])
TELEMETRY_COLUMNS = ("epoch", "surrogate_risk", "zero_one_risk", "weight_magnitude", "connectivity")


def logistic_loss(t, y):
    """``log(1 + exp(-t (2y - 1)))``, evaluated stably in the margin ``m = t (2y - 1)``."""
    m = np.asarray(t, dtype=float) * (2.0 * np.asarray(y, dtype=float) - 1.0)
    out = np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)
    return float(out) if out.ndim == 0 else out


def zero_one_loss(t, y, threshold: float = 0.0):
    """1 where the plug-in label ``1{t >= threshold}`` differs from ``y``."""
    label = (np.asarray(t, dtype=float) >= threshold).astype(np.int64)
    out = (label != np.asarray(y)).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def empirical_risk(net: Network, data: Dataset, loss: str = "logistic", threshold: float = 0.0) -> float:
    scores = net(data.x)
    if loss == "logistic":
        return float(np.mean(logistic_loss(scores, data.y)))
    if loss in ("zero-one", "01"):
        return float(np.mean(zero_one_loss(scores, data.y, threshold)))
    raise ValidationError(f"unknown loss {loss!r}")


# -- sieve schedule -----------------------------------------------------------


def sieve_weight_bound(M: int) -> float:
    """Increasing weight bound ``max(M, exp(sqrt(M)))`` capped at 10^6."""
    return float(min(max(M, math.exp(min(math.sqrt(M), 50.0))), WEIGHT_CAP))


def sieve_schedule(n: int, mode: str = "wide", d: int = 1) -> SieveSpec:
    """Sieve for sample size ``n``: width ``n`` (wide) or ``n - 1`` hidden layers of width 3 (deep).

    The connectivity budget is ``c_d n`` with ``c_d = 4(d + 2)``.
    """
    if n < 1:
        raise ValidationError("n must be at least 1")
    if mode == "wide":
        dims = (d, n, 1)
    elif mode == "deep":
        dims = (d,) + (3,) * (n - 1) + (1,)
    else:
        raise ValidationError(f"unknown sieve mode {mode!r}")
    budget = 4 * (d + 2) * n
    return SieveSpec(Architecture(dims), conn_budget=budget, weight_bound=sieve_weight_bound(budget))


# -- training -----------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "momentum"
    step_size: float = 0.1
    momentum: float = 0.9
    epochs: int = 2000
    restarts: int = 10
    init_scale: float = 1.0
    seed: int = 0
    project_every: int = 25
    stop_when_interpolated: bool = False

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValidationError(f"optimizer must be one of {OPTIMIZERS}")
        if not self.step_size > 0:
            raise ValidationError("step_size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValidationError("momentum must lie in [0, 1)")
        if self.epochs < 1 or self.restarts < 1 or self.project_every < 1:
            raise ValidationError("epochs, restarts and project_every must be >= 1")
        if not self.init_scale > 0:
            raise ValidationError("init_scale must be positive")
        check_seed(self.seed)

    @classmethod
    def from_dict(cls, doc: dict) -> "TrainConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown training options {sorted(unknown)}")
        return cls(**doc)


@dataclass
class TrainResult:
    net: Network
    final_surrogate_risk: float
    final_01_risk: float
    per_point_losses: np.ndarray
    epochs_used: int
    interpolated: bool
    restart: int = 0
    telemetry: list[tuple] = field(default_factory=list, repr=False)
    logistic_01_risk: float | None = None


def forward(params: list[np.ndarray], x: np.ndarray):
    """Dense ReLU forward pass; returns scores and the cached pre-/post-activations."""
    hs = [x]
    zs = []
    L = len(params) // 2
    for l in range(L):
        z = hs[-1] @ params[2 * l].T + params[2 * l + 1]
        zs.append(z)
        if l < L - 1:
            hs.append(np.maximum(z, 0.0))
    return zs[-1][:, 0], hs, zs


def loss_and_grad(params: list[np.ndarray], x: np.ndarray, target: np.ndarray, loss: str = "logistic"):
    """Mean loss and its exact gradient w.r.t. ``[A_1, b_1, ..., A_L, b_L]``.

    ``target`` holds labels for the logistic loss and real targets for the
    squared loss. The ReLU derivative at 0 is taken as 0.
    """
    scores, hs, zs = forward(params, x)
    n = len(scores)
    if loss == "logistic":
        sign = 2.0 * target - 1.0
        m = scores * sign
        value = float(np.mean(np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)))
        g = (-sign * expit(-m) / n)[:, None]
    elif loss == "squared":
        r = scores - target
        value = float(np.mean(r * r))
        g = (2.0 * r / n)[:, None]
    else:
        raise ValidationError(f"unknown loss {loss!r}")
    L = len(params) // 2
    grads: list[np.ndarray] = [None] * len(params)  # type: ignore[list-item]
    for l in range(L - 1, -1, -1):
        grads[2 * l] = g.T @ hs[l]
        grads[2 * l + 1] = g.sum(axis=0)
        if l > 0:
            g = (g @ params[2 * l]) * (zs[l - 1] > 0)
    return value, grads, scores


def _flat_params(net: Network) -> list[np.ndarray]:
    if net.skips or any(a != "relu" for a in net.activations):
        raise StructuralError("training supports dense ReLU networks without skips")
    out = []
    for A, b in net.layers:
        out += [A.copy(), b.copy()]
    return out


def _init_params(arch: Architecture, scale: float, rng: np.random.Generator) -> list[np.ndarray]:
    dims = arch.layer_dims
    params = []
    for l in range(1, len(dims)):
        params.append(rng.uniform(-scale, scale, size=(dims[l], dims[l - 1])))
        params.append(rng.uniform(-scale, scale, size=dims[l]))
    return params


def _project(params, arch: Architecture, sieve: SieveSpec):
    net = project_to_sieve(dense(arch.layer_dims, params), sieve)
    return _flat_params(net)


def _run(params, x, target, sieve, cfg, loss, threshold, restart):
    arch = sieve.arch
    params = _project(params, arch, sieve)
    velocity = [np.zeros_like(p) for p in params]
    telemetry = []
    mu = cfg.momentum if cfg.optimizer == "momentum" else 0.0
    epochs_used = 0
    for epoch in range(cfg.epochs):
        value, grads, scores = loss_and_grad(params, x, target, loss)
        if not math.isfinite(value):
            raise TrainingDivergenceError(restart, epoch)
        if loss == "logistic":
            err = float(np.mean((scores >= threshold) != (target == 1)))
            telemetry.append((epoch, value, err, _magnitude(params), _count(params)))
            if cfg.stop_when_interpolated and err == 0.0:
                break
        else:
            telemetry.append((epoch, value, math.nan, _magnitude(params), _count(params)))
        for p, v, g in zip(params, velocity, grads):
            v *= mu
            v -= cfg.step_size * g
            p += v
        epochs_used = epoch + 1
        if epochs_used % cfg.project_every == 0:
            params = _project(params, arch, sieve)
    params = _project(params, arch, sieve)
    value, _, scores = loss_and_grad(params, x, target, loss)
    if not math.isfinite(value):
        raise TrainingDivergenceError(restart, epochs_used)
    return params, value, scores, epochs_used, telemetry


def _magnitude(params) -> float:
    return max(float(np.max(np.abs(p))) for p in params)


def _count(params) -> int:
    return int(sum(np.count_nonzero(p) for p in params))


def train(sieve: SieveSpec, x: np.ndarray, target: np.ndarray, cfg: TrainConfig, loss: str = "logistic", threshold: float = 0.0):
    """Run all restarts; return ``(net, surrogate, scores, epochs, restart, telemetry)`` of the best."""
    if len(x) == 0:
        raise ValidationError("training data is empty")
    if sieve.arch.input_dim != x.shape[1] or sieve.arch.layer_dims[-1] != 1:
        raise StructuralError(f"sieve architecture {sieve.arch} does not fit inputs of dimension {x.shape[1]}")
    best = None
    for r in range(cfg.restarts):
        rng = np.random.default_rng(cfg.seed ^ r)
        init = _init_params(sieve.arch, cfg.init_scale, rng)
        out = _run(init, x, target, sieve, cfg, loss, threshold, r)
        if best is None or out[1] < best[1][1]:
            best = (r, out)
    r, (params, value, scores, epochs_used, telemetry) = best
    net = dense(sieve.arch.layer_dims, params)
    return net, value, scores, epochs_used, r, telemetry


def train_erm(sieve: SieveSpec, data: Dataset, cfg: TrainConfig, loss: str = "logistic", threshold: float = 0.0) -> TrainResult:
    if loss != "logistic":
        raise ValidationError("train_erm minimises the logistic loss; use train() for regression")
    net, value, scores, epochs_used, r, telemetry = train(sieve, data.x, data.y, cfg, "logistic", threshold)
    err = float(np.mean(zero_one_loss(scores, data.y, threshold)))
    return TrainResult(
        net=net,
        final_surrogate_risk=value,
        final_01_risk=err,
        per_point_losses=logistic_loss(scores, data.y),
        epochs_used=epochs_used,
        interpolated=err == 0.0,
        restart=r,
        telemetry=telemetry,
    )


# -- approximate 0-1 ERM ------------------------------------------------------


def refine_01(net: Network, data: Dataset, sieve: SieveSpec, threshold: float = 0.0) -> Network:
    """Coordinate-wise local search on the empirical 0-1 risk.

    Sweeps the parameters (output bias first, then output weights, then the
    hidden layers from the top down, biases before weights), trying every
    step of :data:`LOCAL_SEARCH_MENU`; the best strictly improving step is
    kept. Stops when a full sweep changes nothing. Moves that would leave the
    sieve are skipped.
    """
    params = _flat_params(net)
    x, y = data.x, data.y
    L = len(params) // 2
    bound = sieve.weight_bound

    def errors_from_hidden(h, A, b):
        return int(np.count_nonzero(((h @ A.T + b)[:, 0] >= threshold) != (y == 1)))

    def errors_full():
        scores, _, _ = forward(params, x)
        return int(np.count_nonzero((scores >= threshold) != (y == 1)))

    coords = [(2 * (L - 1) + 1, (0,))] + [(2 * (L - 1), (0, j)) for j in range(params[-2].shape[1])]
    for l in range(L - 2, -1, -1):
        A, b = params[2 * l], params[2 * l + 1]
        coords += [(2 * l + 1, (i,)) for i in range(b.shape[0])]
        coords += [(2 * l, (i, j)) for i in range(A.shape[0]) for j in range(A.shape[1])]

    errors = errors_full()
    conn = _count(params)
    while errors > 0:
        improved = False
        _, hs, _ = forward(params, x)
        top = hs[-1]
        for k, idx in coords:
            if errors == 0:
                break
            arr = params[k]
            current = arr[idx]
            is_output = k >= 2 * (L - 1)
            best_err, best_val = errors, None
            for delta in LOCAL_SEARCH_MENU:
                new = float(np.clip(current + delta, -bound, bound))
                if new == current or (current == 0.0 and conn >= sieve.conn_budget):
                    continue
                arr[idx] = new
                e = errors_from_hidden(top, params[-2], params[-1]) if is_output else errors_full()
                arr[idx] = current
                if e < best_err:
                    best_err, best_val = e, new
            if best_val is not None:
                conn += int(best_val != 0.0) - int(current != 0.0)
                arr[idx] = best_val
                errors = best_err
                improved = True
                if not is_output:
                    _, hs, _ = forward(params, x)
                    top = hs[-1]
        if not improved:
            break
    return dense(sieve.arch.layer_dims, params)


def erm_01_approx(sieve: SieveSpec, data: Dataset, cfg: TrainConfig, threshold: float = 0.0) -> TrainResult:
    """Logistic ERM followed by :func:`refine_01`; never worse in 0-1 risk than the logistic phase."""
    stage = train_erm(sieve, data, cfg, threshold=threshold)
    net = stage.net if stage.interpolated else refine_01(stage.net, data, sieve, threshold)
    scores = net(data.x)
    err = float(np.mean(zero_one_loss(scores, data.y, threshold)))
    losses = logistic_loss(scores, data.y)
    return replace(
        stage,
        net=net,
        final_surrogate_risk=float(np.mean(losses)),
        final_01_risk=err,
        per_point_losses=losses,
        interpolated=err == 0.0,
        logistic_01_risk=stage.final_01_risk,
    )


def write_telemetry(result: TrainResult, path: str | Path) -> None:
    lines = [",".join(TELEMETRY_COLUMNS)]
    for epoch, s, z, w, c in result.telemetry:
        lines.append(f"{epoch},{s!r},{z!r},{w!r},{c}")
    Path(path).write_text("\n".join(lines) + "\n")


def weight_report(net: Network) -> tuple[float, int]:
    return weight_magnitude(net), connectivity(net)
