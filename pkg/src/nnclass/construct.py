"""Explicit interpolating ReLU networks and the minimum-separation statistic.

Both interpolants reduce scattered data in ``[0,1]^d`` to one dimension with a
random unit direction ``a``; the data then sit at distinct abscissas
``u_i = a . x_i`` and the network realises the continuous piecewise-linear
function through ``(u_i, h_i)``, constant beyond the extreme knots.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .distlab import Dataset, check_seed
from .errors import DegenerateDirectionError, InterpolationInfeasibleError, ValidationError
from .fitting import RateFit, fit_rate
from .nnet import Network, realize

MAX_DIRECTION_TRIES = 64
EVAL_CHUNK = 4096
# Below this many points the pairwise scan beats bucketing.
GRID_MIN_POINTS = 32


def interp_targets(labels, n: int | None = None) -> np.ndarray:
    """Targets ``+-(-log(2^(1/n) - 1))`` whose logistic loss is exactly ``log 2 / n``."""
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if n is None:
        n = len(y)
    if n < 1 or len(y) != n:
        raise ValidationError(f"expected {n} labels, got {len(y)}")
    if np.any((y != 0) & (y != 1)):
        raise ValidationError("labels must be 0 or 1")
    mag = 0.0 - math.log(math.expm1(math.log(2.0) / n))
    return mag * (2.0 * y - 1.0)


@dataclass(frozen=True, eq=False)
class InterpolationPlan:
    direction: np.ndarray
    projected_knots: np.ndarray  # (n, 2): sorted abscissas and their targets
    targets: np.ndarray
    order: np.ndarray

    @property
    def knots(self) -> np.ndarray:
        return self.projected_knots[:, 0]

    @property
    def values(self) -> np.ndarray:
        return self.projected_knots[:, 1]

    def hinge_coefficients(self) -> np.ndarray:
        """Coefficients ``c_k`` of ``g(u) = h_(1) + sum_k c_k relu(u - u_(k))``."""
        u, h = self.knots, self.values
        n = len(u)
        if n == 1:
            return np.zeros(1)
        s = np.diff(h) / np.diff(u)
        c = np.empty(n)
        c[0] = s[0]
        c[1:-1] = np.diff(s)
        c[-1] = -s[-1]
        return c

    def evaluate(self, u) -> np.ndarray:
        """Reference evaluation of the piecewise-linear function (clamped interpolation)."""
        return np.interp(u, self.knots, self.values)


def _as_xy(data, targets):
    x = data.x if isinstance(data, Dataset) else np.atleast_2d(np.asarray(data, dtype=float))
    h = np.asarray(targets, dtype=float).reshape(-1)
    if len(h) != len(x):
        raise ValidationError(f"{len(x)} points but {len(h)} targets")
    return x, h


def interpolation_plan(data, targets, seed: int = 0) -> InterpolationPlan:
    x, h = _as_xy(data, targets)
    n, d = x.shape
    if n == 0:
        raise ValidationError("no data points")
    if len(np.unique(x, axis=0)) < n:
        raise InterpolationInfeasibleError("duplicate sample points cannot be interpolated")
    rng = np.random.default_rng(check_seed(seed))
    for _ in range(MAX_DIRECTION_TRIES):
        a = rng.standard_normal(d)
        a /= np.linalg.norm(a)
        u = x @ a
        order = np.argsort(u, kind="stable")
        if n == 1 or np.all(np.diff(u[order]) > 0):
            break
    else:
        raise DegenerateDirectionError(f"no direction with distinct projections after {MAX_DIRECTION_TRIES} draws")
    knots = np.column_stack([u[order], h[order]])
    return InterpolationPlan(direction=a, projected_knots=knots, targets=h, order=order)


def _constant(d: int, value: float) -> Network:
    return Network(((np.zeros((1, d)), np.array([value])),))


def shallow_interpolant(data, targets, seed: int = 0) -> Network:
    """One hidden layer of exactly ``n`` ReLU units, one hinge per projected knot."""
    plan = interpolation_plan(data, targets, seed)
    d = len(plan.direction)
    u, h = plan.knots, plan.values
    n = len(u)
    if n == 1:
        return _constant(d, h[0])
    A1 = np.tile(plan.direction, (n, 1))
    b1 = -u
    A2 = plan.hinge_coefficients()[None, :]
    return Network(((A1, b1), (A2, np.array([h[0]]))))


def _partial_sum_minima(u: np.ndarray, c: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """``min_{u in [lo, hi]} sum_{k<=m} c_k relu(u - u_k)`` for every ``m``."""
    probe = np.concatenate([[lo], u, [hi]])
    terms = c[:, None] * np.maximum(probe[None, :] - u[:, None], 0.0)
    return np.cumsum(terms, axis=0).min(axis=1)


def deep_interpolant(data, targets, seed: int = 0) -> Network:
    """Width-3 network with ``n - 1`` hidden layers realising the same function as the shallow one.

    Channels are ``(p, q, r)``: ``p = u - lo`` carries the projection, ``q``
    accumulates the partial hinge sum shifted by a nonnegative offset so that
    the ReLU passes it unchanged, and ``r`` holds the next hinge. The first
    layer opens two hinges, every later layer one more.
    """
    plan = interpolation_plan(data, targets, seed)
    a = plan.direction
    d = len(a)
    u, h = plan.knots, plan.values
    n = len(u)
    if n == 1:
        return _constant(d, h[0])
    c = plan.hinge_coefficients()
    lo = float(np.sum(np.minimum(a, 0.0)))
    hi = float(np.sum(np.maximum(a, 0.0)))
    A1 = np.tile(a, (3, 1))
    b1 = np.array([-lo, -u[1], -u[0]])
    if n == 2:
        return Network(((A1, b1), (np.array([[0.0, c[1], c[0]]]), np.array([h[0]]))))
    mins = _partial_sum_minima(u, c, lo, hi)
    # offset[m] keeps B_m + S_m >= 0 on the cube, m = 2..n-1 (1-based).
    offsets = np.maximum(0.0, -mins) + 1.0
    layers = [(A1, b1)]
    prev = 0.0
    for m in range(2, n):
        B = offsets[m - 1]
        if m == 2:
            q_row, q_bias = [0.0, c[1], c[0]], B
        else:
            q_row, q_bias = [0.0, 1.0, c[m - 1]], B - prev
        A = np.array([[1.0, 0.0, 0.0], q_row, [1.0, 0.0, 0.0]])
        b = np.array([0.0, q_bias, lo - u[m]])
        layers.append((A, b))
        prev = B
    layers.append((np.array([[0.0, 1.0, c[-1]]]), np.array([h[0] - prev])))
    return Network(tuple(layers))


# -- minimum separation -------------------------------------------------------


def _sq_dist(x: np.ndarray, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    # Fixed coordinate summation order so both search paths agree bit for bit.
    diff = x[i] - x[j]
    out = diff[:, 0] * diff[:, 0]
    for k in range(1, x.shape[1]):
        out = out + diff[:, k] * diff[:, k]
    return out


def _check_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if len(x) < 2:
        raise ValidationError("minimum separation needs at least two points")
    return x


def min_separation_bruteforce(points) -> float:
    x = _check_points(points)
    best = math.inf
    for i in range(len(x) - 1):
        j = np.arange(i + 1, len(x))
        best = min(best, float(_sq_dist(x, np.full(len(j), i), j).min()))
    return math.sqrt(best)


def _half_offsets(d: int) -> np.ndarray:
    offs = [o for o in itertools.product((-1, 0, 1), repeat=d) if any(o) and next(v for v in o if v) > 0]
    return np.array(offs, dtype=np.int64).reshape(-1, d)


def _grid_candidates(x: np.ndarray, side: float):
    """Index pairs lying in the same or adjacent cells of a grid with the given side."""
    n, d = x.shape
    cells = np.floor((x - x.min(axis=0)) / side).astype(np.int64) + 1
    radix = int(cells.max()) + 2
    if radix ** d >= 2**62:
        return None
    weights = radix ** np.arange(d, dtype=np.int64)
    keys = cells @ weights
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    right = np.searchsorted(sk, sk, "right")
    # Same cell: later positions within the run.
    pos = np.arange(n)
    cnt = right - pos - 1
    ii = [np.repeat(pos, cnt)]
    jj = [_ranges(pos + 1, cnt)]
    for off in _half_offsets(d):
        target = sk + off @ weights
        lo = np.searchsorted(sk, target, "left")
        hi = np.searchsorted(sk, target, "right")
        cnt = hi - lo
        ii.append(np.repeat(pos, cnt))
        jj.append(_ranges(lo, cnt))
    i = order[np.concatenate(ii)]
    j = order[np.concatenate(jj)]
    return i, j


def _ranges(starts: np.ndarray, counts: np.ndarray) -> np.ndarray:
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64)
    base = np.repeat(starts - np.cumsum(counts) + counts, counts)
    return base + np.arange(total)


def min_separation(points, method: str = "grid") -> float:
    """Exact ``min_{i<j} |x_i - x_j|``; ``method`` is ``"grid"`` (bucketed) or ``"brute"``."""
    x = _check_points(points)
    if method == "brute":
        return min_separation_bruteforce(x)
    if method != "grid":
        raise ValidationError(f"unknown method {method!r}")
    n, d = x.shape
    if n <= GRID_MIN_POINTS:
        return min_separation_bruteforce(x)
    span = float(np.max(x.max(axis=0) - x.min(axis=0)))
    if span == 0.0:
        return 0.0
    side = 0.5 * span * n ** (-1.0 / d)
    while side < 2 * span:
        pairs = _grid_candidates(x, side)
        if pairs is None:
            break
        i, j = pairs
        if len(i):
            best = float(_sq_dist(x, i, j).min())
            # Any pair closer than `side` shares or neighbours a cell.
            if math.sqrt(best) <= side:
                return math.sqrt(best)
        side *= 2.0
    return min_separation_bruteforce(x)


def separation_scaling(d: int, n_grid, reps: int = 100, seed: int = 0, n_boot: int = 1000) -> RateFit:
    """Median of ``log T_n`` over ``reps`` uniform samples per ``n``; fitted against ``log n``.

    The returned fit's ``slope`` estimates the exponent of ``T_n ~ n^slope``
    (``-2/d`` in theory).
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValidationError("n_grid must be strictly ascending")
    if reps < 30:
        raise ValidationError("reps must be at least 30")
    points = []
    for n in n_grid:
        logs = np.empty(reps)
        for r in range(reps):
            rng = np.random.default_rng([seed, n, r])
            logs[r] = math.log(min_separation(rng.random((n, d))))
        med = float(np.median(logs))
        # Large-sample standard error of a median, carried on the log scale.
        se_log = 1.2533 * float(np.std(logs, ddof=1)) / math.sqrt(reps)
        points.append((n, math.exp(med), math.exp(med) * se_log))
    return fit_rate(points, n_boot=n_boot, seed=seed, theoretical_m=2.0 / d, min_points=2)


def separation_records(d: int, n_grid, reps: int, seed: int = 0) -> list[tuple[int, int, float]]:
    """Raw ``(n, rep, T_n)`` rows with the same per-cell seeds as :func:`separation_scaling`."""
    rows = []
    for n in n_grid:
        for r in range(reps):
            rng = np.random.default_rng([seed, int(n), r])
            rows.append((int(n), r, min_separation(rng.random((int(n), d)))))
    return rows


# -- Lipschitz diagnostics ----------------------------------------------------


def lipschitz_estimate(net: Network, probes: int = 1000, seed: int = 0, data=None, local_scale: float = 1e-3) -> float:
    """Lower bound on the Lipschitz constant of ``net`` on the unit cube.

    Maximises difference quotients over ``probes`` random pairs, the same
    number of short-range pairs (offsets of size about ``local_scale``), and
    every pair of data points when ``data`` is given.
    """
    if probes < 1000:
        raise ValidationError("use at least 1000 probes")
    d = net.arch.input_dim
    rng = np.random.default_rng(check_seed(seed))
    u = rng.random((probes, d))
    v = rng.random((probes, d))
    w = np.clip(u + local_scale * rng.standard_normal((probes, d)), 0.0, 1.0)
    left = [u, u]
    right = [v, w]
    if data is not None:
        x = data.x if isinstance(data, Dataset) else np.asarray(data, dtype=float).reshape(-1, d)
        i, j = np.triu_indices(len(x), k=1)
        left.append(x[i])
        right.append(x[j])
    a = np.concatenate(left)
    b = np.concatenate(right)
    dist = np.sqrt(np.sum((a - b) ** 2, axis=1))
    keep = dist > 0
    if not np.any(keep):
        return 0.0
    a, b, dist = a[keep], b[keep], dist[keep]
    best = 0.0
    for start in range(0, len(a), EVAL_CHUNK):
        sl = slice(start, start + EVAL_CHUNK)
        q = np.abs(realize(net, a[sl]) - realize(net, b[sl])) / dist[sl]
        best = max(best, float(np.max(q)))
    return best
