"""Feed-forward networks, their realisations and complexity measures.

A network is a tuple of affine layers ``(A_l, b_l)``, ``l = 1..L``. Hidden
layers apply an activation (ReLU or the triangle-wave periodic activation);
the output layer is affine. Optional skip edges feed the output of an earlier
layer ``x_s`` (``x_0`` is the input) into the pre-activation of a later layer
``t > s``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .distlab import as_points
from .errors import StructuralError, ValidationError

ACTIVATIONS = ("relu", "periodic")
PERIOD = 2.0


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def triangle_wave(z: np.ndarray) -> np.ndarray:
    """Odd, 2-periodic, 2-Lipschitz wave: positive on (0, 1), negative on (1, 2), range [-1, 1]."""
    u = np.asarray(z, dtype=float) % PERIOD
    return np.where(u < 1.0, 1.0 - np.abs(2.0 * u - 1.0), np.abs(2.0 * u - 3.0) - 1.0)


_ACT_FN = {"relu": relu, "periodic": triangle_wave}


@dataclass(frozen=True)
class Architecture:
    """Layer dimensions ``(N_0, N_1, ..., N_L)``."""

    layer_dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(n) for n in self.layer_dims)
        object.__setattr__(self, "layer_dims", dims)
        if len(dims) < 2 or any(n < 1 for n in dims):
            raise StructuralError(f"architecture needs L >= 1 and positive widths, got {dims}")

    @property
    def depth(self) -> int:
        """Number of affine layers ``L``."""
        return len(self.layer_dims) - 1

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    def __str__(self) -> str:
        return "(" + ",".join(map(str, self.layer_dims)) + ")"


def arch_leq(s1: Architecture, s2: Architecture) -> bool:
    """Partial order: ``L_1 <= L_2`` and ``N_i <= M_i`` for ``i = 0..L_1``."""
    a, b = s1.layer_dims, s2.layer_dims
    return len(a) <= len(b) and all(x <= y for x, y in zip(a, b))


@dataclass(frozen=True, eq=False)
class Skip:
    source: int
    target: int
    matrix: np.ndarray


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable network; ``net(x)`` evaluates the realisation."""

    layers: tuple[tuple[np.ndarray, np.ndarray], ...]
    activations: tuple[str, ...] = ()
    skips: tuple[Skip, ...] = ()

    def __post_init__(self):
        layers = tuple(
            (np.array(A, dtype=float, ndmin=2), np.array(b, dtype=float).reshape(-1)) for A, b in self.layers
        )
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "skips", tuple(self.skips))
        if not layers:
            raise StructuralError("a network needs at least one layer")
        acts = tuple(self.activations) or ("relu",) * (len(layers) - 1)
        object.__setattr__(self, "activations", acts)
        if len(acts) != len(layers) - 1 or any(a not in ACTIVATIONS for a in acts):
            raise StructuralError(f"need one activation tag from {ACTIVATIONS} per hidden layer")
        for l, (A, b) in enumerate(layers, start=1):
            if A.shape[0] != b.shape[0]:
                raise StructuralError(f"layer {l}: A has {A.shape[0]} rows but b has {b.shape[0]} entries")
            if l > 1 and A.shape[1] != layers[l - 2][0].shape[0]:
                raise StructuralError(f"layer {l}: A expects {A.shape[1]} inputs, previous layer has {layers[l - 2][0].shape[0]}")
        dims = self.arch.layer_dims
        for s in self.skips:
            if not 0 <= s.source < s.target <= len(layers):
                raise StructuralError(f"skip {s.source}->{s.target} must go from an earlier to a strictly later layer")
            if np.shape(s.matrix) != (dims[s.target], dims[s.source]):
                raise StructuralError(f"skip {s.source}->{s.target} matrix must be {dims[s.target]}x{dims[s.source]}")

    @property
    def arch(self) -> Architecture:
        return Architecture((self.layers[0][0].shape[1],) + tuple(A.shape[0] for A, _ in self.layers))

    def __call__(self, x) -> float | np.ndarray:
        return realize(self, x)

    def scaled(self, lam: float) -> "Network":
        return self.map_params(lambda p: lam * p)

    def map_params(self, fn) -> "Network":
        return Network(
            tuple((fn(A), fn(b)) for A, b in self.layers),
            self.activations,
            tuple(Skip(s.source, s.target, fn(np.asarray(s.matrix, dtype=float))) for s in self.skips),
        )

    def param_arrays(self) -> list[np.ndarray]:
        """All parameter arrays in canonical order: per layer ``[A_l | b_l]``, then skips."""
        out = [np.hstack([A, b[:, None]]) for A, b in self.layers]
        out += [np.asarray(s.matrix, dtype=float) for s in self.skips]
        return out


def dense(layer_dims: Sequence[int], params: Sequence[np.ndarray], activations=()) -> Network:
    """Build a network from a flat ``[A_1, b_1, ..., A_L, b_L]`` list."""
    layers = tuple((params[2 * i], params[2 * i + 1]) for i in range(len(layer_dims) - 1))
    net = Network(layers, tuple(activations))
    if net.arch.layer_dims != tuple(layer_dims):
        raise StructuralError(f"parameters do not match architecture {tuple(layer_dims)}")
    return net


def zeros(arch: Architecture | Sequence[int], bias_out: float = 0.0) -> Network:
    dims = arch.layer_dims if isinstance(arch, Architecture) else tuple(arch)
    layers = [(np.zeros((dims[l], dims[l - 1])), np.zeros(dims[l])) for l in range(1, len(dims))]
    layers[-1][1][:] = bias_out
    return Network(tuple(layers))


def realize(net: Network, x) -> float | np.ndarray:
    """Forward pass; a float for a single point, else an ``(m,)`` array."""
    pts, single = as_points(x, net.arch.input_dim)
    outs = [pts]
    by_target: dict[int, list[Skip]] = {}
    for s in net.skips:
        by_target.setdefault(s.target, []).append(s)
    L = len(net.layers)
    for l, (A, b) in enumerate(net.layers, start=1):
        z = outs[-1] @ A.T + b
        for s in by_target.get(l, ()):
            z = z + outs[s.source] @ np.asarray(s.matrix, dtype=float).T
        outs.append(z if l == L else _ACT_FN[net.activations[l - 1]](z))
    y = outs[-1][:, 0]
    return float(y[0]) if single else y


# -- complexity measures ------------------------------------------------------


def connectivity(net: Network) -> int:
    """Number of nonzero weights and biases (exact zero test)."""
    return int(sum(np.count_nonzero(p) for p in net.param_arrays()))


def width(net: Network) -> int:
    return max(net.arch.layer_dims)


def depth(net: Network) -> int:
    """Number of hidden layers, ``L - 1``."""
    return net.arch.depth - 1


def weight_magnitude(net: Network) -> float:
    return max(float(np.max(np.abs(p))) if p.size else 0.0 for p in net.param_arrays())


def nn_norm(net: Network) -> float:
    """``max_l ||A_l||_max + max_l ||b_l||_max``; skip matrices count as weights."""
    mats = [A for A, _ in net.layers] + [np.asarray(s.matrix, dtype=float) for s in net.skips]
    a = max(float(np.max(np.abs(A))) if A.size else 0.0 for A in mats)
    b = max(float(np.max(np.abs(v))) if v.size else 0.0 for _, v in net.layers)
    return a + b


# -- sieve classes ------------------------------------------------------------


@dataclass(frozen=True)
class SieveSpec:
    """Constraint set ``{arch fixed, connectivity <= M, weights <= pi(M)}``.

    ``pi_degree`` is the degree of a polynomial ``pi``; ``None`` when the
    weight bound comes from a non-polynomial schedule.
    """

    arch: Architecture
    conn_budget: int
    weight_bound: float
    pi_degree: int | None = None
    depth_cap: int | None = field(default=None)

    def __post_init__(self):
        if self.conn_budget < 1:
            raise ValidationError("conn_budget must be >= 1")
        if not self.weight_bound > 0:
            raise ValidationError("weight_bound must be positive")


def in_sieve(net: Network, sieve: SieveSpec) -> bool:
    return (
        net.arch == sieve.arch
        and connectivity(net) <= sieve.conn_budget
        and weight_magnitude(net) <= sieve.weight_bound
    )


def project_to_sieve(net: Network, sieve: SieveSpec) -> Network:
    """Clamp every parameter into ``[-pi(M), pi(M)]``, then zero the smallest
    entries until the connectivity budget holds.

    Ties in magnitude are zeroed in canonical (layer, row, column) order, the
    bias of a row counting as the column after its weights.
    """
    if net.arch != sieve.arch:
        raise StructuralError(f"network architecture {net.arch} differs from sieve architecture {sieve.arch}")
    bound = sieve.weight_bound
    arrays = [np.clip(p, -bound, bound) for p in net.param_arrays()]
    flat = np.concatenate([p.ravel() for p in arrays])
    excess = np.count_nonzero(flat) - sieve.conn_budget
    if excess > 0:
        nz = np.flatnonzero(flat)
        order = nz[np.lexsort((nz, np.abs(flat[nz])))]
        flat[order[:excess]] = 0.0
    return _unflatten(net, flat)


def _unflatten(net: Network, flat: np.ndarray) -> Network:
    pos = 0
    layers = []
    for A, _ in net.layers:
        r, c = A.shape
        block = flat[pos : pos + r * (c + 1)].reshape(r, c + 1)
        layers.append((block[:, :c].copy(), block[:, c].copy()))
        pos += r * (c + 1)
    skips = []
    for s in net.skips:
        size = np.size(s.matrix)
        skips.append(Skip(s.source, s.target, flat[pos : pos + size].reshape(np.shape(s.matrix)).copy()))
        pos += size
    return Network(tuple(layers), net.activations, tuple(skips))


# -- serialisation ------------------------------------------------------------
#
#   nnet 1 dims N_0 ... N_L act a_1 ... a_{L-1} skips s:t ...
#   A_1 entries, row-major          (one line per matrix / vector)
#   b_1 entries
#   ...
#   skip matrices in header order
#
# Floats are written with repr(), which round-trips binary64 exactly.


def dumps(net: Network) -> str:
    dims = " ".join(map(str, net.arch.layer_dims))
    acts = " ".join(net.activations)
    skips = " ".join(f"{s.source}:{s.target}" for s in net.skips)
    lines = [f"nnet 1 dims {dims} act {acts} skips {skips}".rstrip()]
    for A, b in net.layers:
        lines.append(_fmt(A))
        lines.append(_fmt(b))
    lines += [_fmt(np.asarray(s.matrix, dtype=float)) for s in net.skips]
    return "\n".join(lines) + "\n"


def _fmt(a: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a).ravel())


def loads(text: str) -> Network:
    lines = text.rstrip("\n").split("\n")
    head = lines[0].split()
    if head[:2] != ["nnet", "1"] or "dims" not in head or "act" not in head or "skips" not in head:
        raise ValidationError("not a nnet v1 document")
    i_dims, i_act, i_skip = head.index("dims"), head.index("act"), head.index("skips")
    dims = [int(v) for v in head[i_dims + 1 : i_act]]
    acts = tuple(head[i_act + 1 : i_skip])
    skip_pairs = [tuple(map(int, tok.split(":"))) for tok in head[i_skip + 1 :]]
    body = lines[1:]
    expected = 2 * (len(dims) - 1) + len(skip_pairs)
    if len(body) != expected:
        raise ValidationError(f"expected {expected} parameter lines, found {len(body)}")

    def vec(line: str) -> np.ndarray:
        return np.array([float(v) for v in line.split()], dtype=float)

    layers = []
    for l in range(1, len(dims)):
        A = vec(body[2 * (l - 1)])
        b = vec(body[2 * (l - 1) + 1])
        if A.size != dims[l] * dims[l - 1] or b.size != dims[l]:
            raise StructuralError(f"layer {l} entry count does not match dims")
        layers.append((A.reshape(dims[l], dims[l - 1]), b))
    skips = []
    for k, (s, t) in enumerate(skip_pairs):
        m = vec(body[2 * (len(dims) - 1) + k])
        if m.size != dims[t] * dims[s]:
            raise StructuralError(f"skip {s}:{t} entry count does not match dims")
        skips.append(Skip(s, t, m.reshape(dims[t], dims[s])))
    return Network(tuple(layers), acts, tuple(skips))


def save(net: Network, path: str | Path) -> None:
    Path(path).write_text(dumps(net))


def load(path: str | Path) -> Network:
    return loads(Path(path).read_text())
