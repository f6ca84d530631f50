"""Synthetic classification laws on ``[0,1]^d x {0,1}`` with exact Bayes oracles.

A :class:`DistributionSpec` fixes a marginal law for ``X`` and a closed-form
regression function ``eta(x) = P(Y = 1 | X = x)``. Four families are shipped:

``constant``
    ``eta == value`` (default 1/2).
``ramp``
    ``eta(x) = x_1``.
``margin``
    ``eta(x) = 1/2 + 1/2 * sgn(2 x_1 - 1) * |2 x_1 - 1|^(1/alpha)``, for which
    ``P(|eta - 1/2| <= t) = (2t)^alpha`` under the uniform marginal.
``bump``
    ``eta = 1/2 + sum_k h_k * b(|x - c_k| / r_k)`` with the C-infinity bump
    ``b(s) = exp(1 - 1/(1 - s^2))`` on ``s < 1``.

Marginals are ``uniform`` or ``tilted`` (density ``1 + sin(2 pi x_1)/2``).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, NamedTuple

import numpy as np
import yaml
from scipy.stats import qmc

from .errors import DomainError, UnsupportedDimensionError, ValidationError

FAMILIES = ("constant", "ramp", "margin", "bump")
MARGINALS = ("uniform", "tilted")
MAX_DIM = 16
SEED_LIMIT = 2**64

# Simpson nodes per axis. 2^12 + 1 is kept for d = 1; the tensor grid is
# thinned in higher dimensions so it stays near 10^6 points.
QUAD_NODES = {1: 2**12 + 1, 2: 2**10 + 1, 3: 2**7 + 1}
# Cells of the 1-d midpoint rule used for level-set probabilities.
LEVEL_SET_CELLS = 2**20
_CHUNK = 2**20
_FAMILY_ALIASES = {"margin-alpha": "margin", "margin-α": "margin", "smooth-bump": "bump"}


class Estimate(NamedTuple):
    """A numerical estimate with its normal-approximation standard error."""

    value: float
    stderr: float


class LabeledSample(NamedTuple):
    x: np.ndarray
    y: int


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < SEED_LIMIT:
        raise ValidationError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """Joint law of ``(X, Y)``; validated on construction.

    ``alpha`` and ``c0`` are the declared Tsybakov parameters. ``gamma_star``
    and ``m_star`` are optional declared rate parameters used by the
    theorem-rule sieve in :mod:`nnclass.bench`.
    """

    family: str
    dim: int = 1
    alpha: float = 1.0
    c0: float = 1.0
    marginal: str = "uniform"
    params: dict[str, Any] = field(default_factory=dict)
    gamma_star: float | None = None
    m_star: float | None = None

    def __post_init__(self):
        family = _FAMILY_ALIASES.get(self.family, self.family)
        object.__setattr__(self, "family", family)
        if family not in FAMILIES:
            raise ValidationError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.marginal not in MARGINALS:
            raise ValidationError(f"unknown marginal {self.marginal!r}")
        if not (isinstance(self.dim, (int, np.integer)) and 1 <= self.dim <= MAX_DIM):
            raise ValidationError(f"dim must be an integer in [1, {MAX_DIM}], got {self.dim!r}")
        if not self.alpha >= 0:
            raise ValidationError("alpha must be nonnegative")
        if not self.c0 > 0:
            raise ValidationError("c0 must be positive")
        if family == "margin" and not self.alpha > 0:
            raise ValidationError("the margin family needs alpha > 0")
        if family == "bump":
            self._check_bumps()
        values = self.eta(validation_grid(self.dim))
        if not (np.all(np.isfinite(values)) and values.min() >= 0.0 and values.max() <= 1.0):
            raise ValidationError("eta leaves [0, 1] on the validation grid")

    def _check_bumps(self):
        centers = np.asarray(self.params.get("centers", []), dtype=float)
        heights = np.asarray(self.params.get("heights", []), dtype=float)
        radii = np.asarray(self.params.get("radii", []), dtype=float)
        if centers.ndim != 2 or centers.shape[1] != self.dim:
            raise ValidationError("bump centers must be a list of points of length dim")
        if not (len(heights) == len(radii) == len(centers)):
            raise ValidationError("bump centers, heights and radii must have equal length")
        if np.any(radii <= 0):
            raise ValidationError("bump radii must be positive")

    @property
    def spec_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    @property
    def density_bound(self) -> float:
        return 1.0 if self.marginal == "uniform" else 1.5

    @property
    def first_coordinate_only(self) -> bool:
        """True when both eta and the marginal density depend on ``x_1`` alone."""
        return self.family != "bump"

    def eta(self, x: np.ndarray) -> np.ndarray:
        """Vectorised regression function on an ``(m, d)`` array (no domain check)."""
        x = np.asarray(x, dtype=float)
        lead = x[:, 0]
        if self.family == "constant":
            return np.full(len(x), float(self.params.get("value", 0.5)))
        if self.family == "ramp":
            return lead.copy()
        if self.family == "margin":
            s = 2.0 * lead - 1.0
            return 0.5 + 0.5 * np.sign(s) * np.abs(s) ** (1.0 / self.alpha)
        out = np.full(len(x), 0.5)
        for c, h, r in zip(self.params["centers"], self.params["heights"], self.params["radii"]):
            s2 = np.sum((x - np.asarray(c, dtype=float)) ** 2, axis=1) / float(r) ** 2
            inside = s2 < 1.0
            bump = np.zeros(len(x))
            bump[inside] = np.exp(1.0 - 1.0 / (1.0 - s2[inside]))
            out += float(h) * bump
        return out

    def density(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.marginal == "uniform":
            return np.ones(len(x))
        return 1.0 + 0.5 * np.sin(2.0 * np.pi * x[:, 0])

    def sample_x(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.marginal == "uniform":
            return rng.random((n, self.dim))
        out = np.empty((0, self.dim))
        while len(out) < n:
            batch = rng.random((2 * (n - len(out)) + 16, self.dim))
            keep = rng.random(len(batch)) * self.density_bound < self.density(batch)
            out = np.concatenate([out, batch[keep]])
        return out[:n]

    def to_dict(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "family": self.family,
            "dim": int(self.dim),
            "alpha": float(self.alpha),
            "c0": float(self.c0),
            "marginal": self.marginal,
        }
        if self.gamma_star is not None:
            doc["gamma_star"] = float(self.gamma_star)
        if self.m_star is not None:
            doc["m_star"] = float(self.m_star)
        doc.update(self.params)
        return doc

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "DistributionSpec":
        doc = dict(doc)
        try:
            family = doc.pop("family")
        except KeyError:
            raise ValidationError("distribution spec needs a 'family' field") from None
        known = {k: doc.pop(k) for k in ("dim", "alpha", "c0", "marginal", "gamma_star", "m_star") if k in doc}
        if "dim" in known:
            known["dim"] = int(known["dim"])
        family = _FAMILY_ALIASES.get(family, family)
        # Route through the factories so omitted fields get the same defaults.
        if family == "constant":
            return constant(float(doc.pop("value", 0.5)), **known, params_extra=doc)
        if family == "ramp":
            return ramp(**known, params=doc)
        if family == "margin":
            if "alpha" not in known:
                raise ValidationError("the margin family needs 'alpha'")
            return margin(**known, params=doc)
        return cls(family=family, params=doc, **known)


def constant(value: float = 0.5, dim: int = 1, params_extra: dict | None = None, **kw) -> DistributionSpec:
    # |eta - 1/2| is the constant delta; any alpha works with c0 = delta^-alpha.
    delta = abs(value - 0.5)
    kw.setdefault("c0", 1.0 / delta if delta > 0 else 1.0)
    params = {**(params_extra or {}), "value": value}
    return DistributionSpec("constant", dim=dim, alpha=kw.pop("alpha", 1.0), params=params, **kw)


def ramp(dim: int = 1, marginal: str = "uniform", **kw) -> DistributionSpec:
    bound = 1.0 if marginal == "uniform" else 1.5
    kw.setdefault("c0", 2.0 * bound)
    # eta(x) = x_1 has unit C^{1,1} norm, i.e. lies in the Hoelder-2 unit ball.
    kw.setdefault("gamma_star", 2.0)
    kw.setdefault("m_star", 2.0 * 2.0 / (2 * 2.0 + dim))
    kw.setdefault("alpha", 1.0)
    return DistributionSpec("ramp", dim=dim, marginal=marginal, **kw)


def margin(alpha: float, dim: int = 1, marginal: str = "uniform", **kw) -> DistributionSpec:
    bound = 1.0 if marginal == "uniform" else 1.5
    kw.setdefault("c0", 2.0**alpha * bound)
    return DistributionSpec("margin", dim=dim, alpha=alpha, marginal=marginal, **kw)


def smooth_bump(centers, heights, radii, dim: int | None = None, **kw) -> DistributionSpec:
    centers = [list(map(float, c)) for c in centers]
    dim = dim or len(centers[0])
    params = {"centers": centers, "heights": list(map(float, heights)), "radii": list(map(float, radii))}
    return DistributionSpec("bump", dim=dim, params=params, **kw)


def validation_grid(dim: int, size: int = 10**4) -> np.ndarray:
    """Deterministic dense point set used for range checks."""
    if dim == 1:
        return np.linspace(0.0, 1.0, size)[:, None]
    pts = qmc.Halton(d=dim, scramble=False).random(size)
    corners = np.array(np.meshgrid(*[[0.0, 1.0]] * min(dim, 10), indexing="ij")).reshape(min(dim, 10), -1).T
    if dim > 10:
        corners = np.hstack([corners, np.zeros((len(corners), dim - 10))])
    return np.vstack([pts, corners])


def as_points(x, dim: int) -> tuple[np.ndarray, bool]:
    """Coerce a point or batch into an ``(m, dim)`` array; flag single points."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 0 or (arr.ndim == 1 and (dim > 1 or len(arr) == 1))
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1) if single else arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValidationError(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def eta_eval(spec: DistributionSpec, x) -> float | np.ndarray:
    """Evaluate the regression function; returns a float for a single point."""
    pts, single = as_points(x, spec.dim)
    if not np.all(np.isfinite(pts)) or np.any(pts < 0.0) or np.any(pts > 1.0):
        raise DomainError("point outside the unit cube")
    values = spec.eta(pts)
    return float(values[0]) if single else values


@dataclass(frozen=True, eq=False)
class Dataset:
    """An i.i.d. labelled sample, reproducible from ``(spec, seed, n)``."""

    x: np.ndarray
    y: np.ndarray
    seed: int
    spec_id: str

    def __post_init__(self):
        if len(self.x) < 1 or len(self.x) != len(self.y):
            raise ValidationError("dataset needs n >= 1 points with one label each")

    def __len__(self) -> int:
        return len(self.y)

    def __iter__(self) -> Iterator[LabeledSample]:
        for xi, yi in zip(self.x, self.y):
            yield LabeledSample(xi, int(yi))

    @property
    def samples(self) -> list[LabeledSample]:
        return list(self)

    @property
    def dim(self) -> int:
        return self.x.shape[1]


def sample(spec: DistributionSpec, n: int, seed: int) -> Dataset:
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = np.random.default_rng(check_seed(seed))
    x = spec.sample_x(n, rng)
    y = (rng.random(n) < spec.eta(x)).astype(np.int64)
    return Dataset(x=x, y=y, seed=int(seed), spec_id=spec.spec_id)


def eval_rng(seed: int, stream: int = 1) -> np.random.Generator:
    """Generator for evaluation draws, disjoint from the data stream of ``seed``."""
    return np.random.default_rng([check_seed(seed), 0x9E3779B9, stream])


# -- quadrature ---------------------------------------------------------------


def simpson_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if nodes < 3 or nodes % 2 == 0:
        raise ValidationError("Simpson's rule needs an odd node count >= 3")
    x = np.linspace(0.0, 1.0, nodes)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w / (3.0 * (nodes - 1))


def integrate(spec: DistributionSpec, func: Callable[[np.ndarray], np.ndarray], nodes: int | None = None) -> float:
    """``E[func(X)]`` by tensor-product composite Simpson quadrature (d <= 3)."""
    d = spec.dim
    if d > 3:
        raise UnsupportedDimensionError(f"quadrature is offered for d <= 3, got d = {d}")
    x1, w1 = simpson_rule(nodes or QUAD_NODES[d])
    total = 0.0
    for pts, w in _tensor_chunks(x1, w1, d):
        total += float(np.dot(w * spec.density(pts), func(pts)))
    return total


def _tensor_chunks(x1, w1, d):
    m = len(x1)
    rows = max(1, _CHUNK // m ** (d - 1))
    for start in range(0, m, rows):
        axes = [x1[start : start + rows]] + [x1] * (d - 1)
        waxes = [w1[start : start + rows]] + [w1] * (d - 1)
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        w = np.prod(np.stack(np.meshgrid(*waxes, indexing="ij"), axis=-1).reshape(-1, d), axis=1)
        yield pts, w


def monte_carlo(spec: DistributionSpec, func: Callable[[np.ndarray], np.ndarray], budget: int, rng) -> Estimate:
    """Sample mean of ``func(X)`` with its standard error, in fixed-size batches."""
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < budget:
        m = min(_CHUNK, budget - done)
        vals = np.asarray(func(spec.sample_x(m, rng)), dtype=float)
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        done += m
    mean = total / budget
    var = max(total_sq / budget - mean * mean, 0.0)
    return Estimate(mean, math.sqrt(var / budget))


def expectation(spec, func, method: str, budget: int, seed: int, stream: int = 1) -> Estimate:
    if method == "quadrature":
        return Estimate(integrate(spec, func), 0.0)
    if method == "montecarlo":
        return monte_carlo(spec, func, budget, eval_rng(seed, stream))
    raise ValidationError(f"unknown method {method!r}; expected 'quadrature' or 'montecarlo'")


def bayes_risk(spec: DistributionSpec, method: str = "quadrature", budget: int = 10**6, seed: int = 0) -> Estimate:
    """``L* = E[min(eta(X), 1 - eta(X))]``."""
    if method == "montecarlo" and budget < 10**4:
        raise ValidationError("Monte Carlo Bayes risk needs a budget of at least 10^4")

    def integrand(x):
        e = spec.eta(x)
        return np.minimum(e, 1.0 - e)

    return expectation(spec, integrand, method, budget, seed, stream=2)


# -- Tsybakov margin condition --------------------------------------------------


@dataclass(frozen=True)
class TsybakovReport:
    holds: bool
    fitted_alpha: float
    t: tuple[float, ...]
    probabilities: tuple[float, ...]
    bounds: tuple[float, ...]
    slack: tuple[float, ...]


def margin_probabilities(spec: DistributionSpec, t_grid, method: str | None = None, budget: int = 10**6, seed: int = 0):
    """``P_X(0 < |eta(X) - 1/2| <= t)`` for each ``t``, with an error allowance.

    The quadrature path is a 1-d midpoint rule over ``x_1`` and only exists
    for first-coordinate families; its allowance covers the cells that can
    straddle the (at most two) level-set boundaries.
    """
    t = np.asarray(t_grid, dtype=float)
    if method is None:
        method = "quadrature" if spec.first_coordinate_only else "montecarlo"
    if method == "quadrature":
        if not spec.first_coordinate_only:
            raise UnsupportedDimensionError("level-set quadrature needs a first-coordinate family")
        cells = LEVEL_SET_CELLS
        mids = ((np.arange(cells) + 0.5) / cells)[:, None]
        pts = np.hstack([mids, np.full((cells, spec.dim - 1), 0.5)]) if spec.dim > 1 else mids
        gap = np.abs(spec.eta(pts) - 0.5)
        w = spec.density(pts) / cells
        order = np.argsort(gap, kind="stable")
        gap_sorted = gap[order]
        cum = np.concatenate([[0.0], np.cumsum(w[order])])
        zero_mass = cum[np.searchsorted(gap_sorted, 0.0, side="right")]
        probs = cum[np.searchsorted(gap_sorted, t, side="right")] - zero_mass
        slack = np.full(len(t), 4.0 * spec.density_bound / cells)
        return probs, slack
    rng = eval_rng(seed, stream=3)
    gap = np.abs(spec.eta(spec.sample_x(budget, rng)) - 0.5)
    gap = np.sort(gap[gap > 0])
    probs = np.searchsorted(gap, t, side="right") / budget
    slack = 3.0 * np.sqrt(probs * (1.0 - probs) / budget)
    return probs, slack


def verify_tsybakov(spec: DistributionSpec, t_grid, method: str | None = None, budget: int = 10**6, seed: int = 0) -> TsybakovReport:
    """Check ``P_X(0 < |eta - 1/2| <= t) <= c0 t^alpha`` on a grid of ``t``.

    ``fitted_alpha`` is the least-squares log-log slope over the points with
    ``t <= 10 min(t)`` and positive probability; it is ``inf`` when the event
    has probability zero everywhere (a hard margin).
    """
    t = np.asarray(list(t_grid), dtype=float)
    if t.size == 0:
        raise ValidationError("t_grid is empty")
    if np.any(t <= 0) or np.any(t > 0.5) or np.any(np.diff(t) < 0):
        raise ValidationError("t_grid must be sorted and inside (0, 1/2]")
    probs, slack = margin_probabilities(spec, t, method, budget, seed)
    bounds = spec.c0 * t**spec.alpha
    holds = bool(np.all(probs <= bounds + slack))
    decade = (t <= 10.0 * t[0]) & (probs > 0)
    if not np.any(probs > 0):
        fitted = math.inf
    elif decade.sum() >= 2:
        fitted = float(np.polyfit(np.log(t[decade]), np.log(probs[decade]), 1)[0])
    else:
        fitted = math.nan
    return TsybakovReport(
        holds=holds,
        fitted_alpha=fitted,
        t=tuple(map(float, t)),
        probabilities=tuple(map(float, probs)),
        bounds=tuple(map(float, bounds)),
        slack=tuple(map(float, slack)),
    )


# -- persistence --------------------------------------------------------------


def load_spec(path: str | Path) -> DistributionSpec:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a key-value document")
    return DistributionSpec.from_dict(doc)


def dump_spec(spec: DistributionSpec, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(spec.to_dict(), sort_keys=False))


def save_dataset(data: Dataset, path: str | Path) -> Path:
    """Write ``x_1..x_d,y`` CSV plus a ``.manifest.json`` sidecar; returns the sidecar path."""
    path = Path(path)
    header = ",".join([f"x_{j + 1}" for j in range(data.dim)] + ["y"])
    lines = [header]
    for xi, yi in zip(data.x, data.y):
        lines.append(",".join([repr(float(v)) for v in xi] + [str(int(yi))]))
    path.write_text("\n".join(lines) + "\n")
    sidecar = path.with_suffix(".manifest.json")
    sidecar.write_text(json.dumps({"spec_id": data.spec_id, "seed": data.seed, "n": len(data)}, indent=2) + "\n")
    return sidecar


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    rows = path.read_text().strip().splitlines()
    header = rows[0].split(",")
    if header[-1] != "y" or not all(h == f"x_{j + 1}" for j, h in enumerate(header[:-1])):
        raise ValidationError(f"{path}: bad dataset header {rows[0]!r}")
    table = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    meta = json.loads(path.with_suffix(".manifest.json").read_text())
    return Dataset(x=table[:, :-1], y=table[:, -1].astype(np.int64), seed=int(meta["seed"]), spec_id=meta["spec_id"])
