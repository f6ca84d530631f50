"""Haar dictionaries, constrained best M-term approximation and a bit-exact coefficient codec.

Canonical enumeration (1-based)
-------------------------------
1-d, ``J`` detail levels: index 1 is the constant function; the wavelet at
level ``j`` and shift ``k`` has index ``2^j + k + 1`` (``0 <= k < 2^j``). The
dictionary holds ``2^J`` elements.

2-d tensor: index 1 is the constant; level ``j`` occupies indices
``4^j + 1 .. 4^(j+1)``, ordered by shift ``(k1, k2)`` (row-major, ``k1``
first) and then orientation ``0: psi(x1) phi(x2)``, ``1: phi(x1) psi(x2)``,
``2: psi(x1) psi(x2)``. The dictionary holds ``4^J`` elements.

The mother wavelet is ``+1`` on ``[0, 1/2)`` and ``-1`` on ``[1/2, 1)``.

Bitstream layout (most significant bit first)
---------------------------------------------
``M`` (32 bits) | ``q`` (6 bits) | ``pi_degree`` (4 bits) | bitmap over the
first ``P = min(M^pi_degree, size)`` indices | ``M`` coefficient codes of
``q`` bits each, in increasing index order. Coefficients are clamped to
``[-R, R]`` with ``R = M^pi_degree`` and mapped to the midpoint of one of
``2^q`` equal cells, so each quantised value is within ``R 2^-q`` of the
clamped one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DecodeError, InfeasibleBudgetError, ValidationError
from .fitting import fit_rate

MAX_LEVEL = {1: 14, 2: 7}
HEADER_BITS = 32 + 6 + 4
Q_RANGE = (4, 32)
GAUSS_ORDER = 8


# -- dictionaries -------------------------------------------------------------


@dataclass(frozen=True)
class HaarDictionary:
    dim: int
    max_level: int

    def __post_init__(self):
        if self.dim not in MAX_LEVEL:
            raise ValidationError("Haar dictionaries are offered for d = 1 and d = 2")
        if not 0 <= self.max_level <= MAX_LEVEL[self.dim]:
            raise ValidationError(f"level {self.max_level} exceeds the limit {MAX_LEVEL[self.dim]} for d = {self.dim}")

    @property
    def kind(self) -> str:
        return "haar-1d" if self.dim == 1 else "haar-tensor-2d"

    @property
    def size(self) -> int:
        return 2 ** (self.dim * self.max_level)

    @property
    def cells(self) -> int:
        """Finest cells per axis."""
        return 2**self.max_level

    def describe(self, index: int) -> tuple:
        """``(level, shift[, orientation])`` of a 1-based index; level -1 marks the constant."""
        if not 1 <= index <= self.size:
            raise ValidationError(f"index {index} outside 1..{self.size}")
        pos = index - 1
        if pos == 0:
            return (-1, 0) if self.dim == 1 else (-1, (0, 0), -1)
        if self.dim == 1:
            j = pos.bit_length() - 1
            return (j, pos - 2**j)
        j = (pos.bit_length() - 1) // 2
        rel = pos - 4**j
        shift, o = divmod(rel, 3)
        return (j, divmod(shift, 2**j), o)

    def index_of(self, level: int, shift, orientation: int | None = None) -> int:
        if level < 0:
            return 1
        if self.dim == 1:
            return 2**level + int(shift) + 1
        k1, k2 = shift
        return 4**level + 3 * (k1 * 2**level + k2) + int(orientation) + 1

    def evaluate(self, index: int, x) -> np.ndarray:
        """Values of one dictionary element at points ``x`` of shape ``(m, d)``."""
        x = _points(x, self.dim)
        desc = self.describe(index)
        if self.dim == 1:
            j, k = desc
            return _haar_1d(j, k, x[:, 0])
        j, (k1, k2), o = desc
        if j < 0:
            return np.ones(len(x))
        f1 = _haar_1d(j, k1, x[:, 0], wavelet=o in (0, 2))
        f2 = _haar_1d(j, k2, x[:, 1], wavelet=o in (1, 2))
        return f1 * f2


def _haar_1d(j: int, k: int, t: np.ndarray, wavelet: bool = True) -> np.ndarray:
    if j < 0:
        return np.ones_like(t)
    scale = 2.0**j
    s = t * scale - k
    inside = (s >= 0) & ((s < 1) | ((k == 2**j - 1) & (s <= 1)))
    amp = math.sqrt(scale)
    if not wavelet:
        return np.where(inside, amp, 0.0)
    return np.where(inside, np.where(s < 0.5, amp, -amp), 0.0)


def _points(x, dim: int) -> np.ndarray:
    a = np.asarray(x, dtype=float)
    if a.ndim <= 1:
        a = a.reshape(-1, dim)
    if a.shape[1] != dim:
        raise ValidationError(f"expected points of dimension {dim}")
    return a


# -- function descriptors -----------------------------------------------------


@dataclass(frozen=True, eq=False)
class PiecewisePolynomial:
    """1-d function ``sum_i coeffs[p][i] x^i`` on ``[breaks[p], breaks[p+1])``."""

    breaks: tuple[float, ...]
    coeffs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        b = np.asarray(self.breaks, dtype=float)
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0 or np.any(np.diff(b) <= 0):
            raise ValidationError("breaks must increase from 0 to 1")
        if len(self.coeffs) != len(b) - 1:
            raise ValidationError("need one coefficient list per piece")
        object.__setattr__(self, "breaks", tuple(float(v) for v in b))
        object.__setattr__(self, "coeffs", tuple(tuple(float(c) for c in p) for p in self.coeffs))

    @classmethod
    def polynomial(cls, coeffs) -> "PiecewisePolynomial":
        return cls((0.0, 1.0), (tuple(coeffs),))

    dim = 1

    def __call__(self, x) -> np.ndarray:
        t = _points(x, 1)[:, 0]
        piece = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.coeffs) - 1)
        out = np.empty_like(t)
        for p, c in enumerate(self.coeffs):
            sel = piece == p
            out[sel] = np.polynomial.polynomial.polyval(t[sel], c)
        return out

    def cell_integrals(self, cells: int) -> np.ndarray:
        edges = np.linspace(0.0, 1.0, cells + 1)
        pts = np.union1d(edges, self.breaks)
        lo, hi = pts[:-1], pts[1:]
        mid = 0.5 * (lo + hi)
        piece = np.clip(np.searchsorted(self.breaks, mid, side="right") - 1, 0, len(self.coeffs) - 1)
        cell = np.clip(np.searchsorted(edges, mid, side="right") - 1, 0, cells - 1)
        part = np.empty(len(lo))
        for p, c in enumerate(self.coeffs):
            sel = piece == p
            anti = np.polynomial.polynomial.polyint(c)
            part[sel] = np.polynomial.polynomial.polyval(hi[sel], anti) - np.polynomial.polynomial.polyval(lo[sel], anti)
        return np.bincount(cell, weights=part, minlength=cells)

    def norm_sq(self) -> float:
        total = 0.0
        for (a, b), c in zip(zip(self.breaks, self.breaks[1:]), self.coeffs):
            anti = np.polynomial.polynomial.polyint(np.polynomial.polynomial.polymul(c, c))
            total += float(np.polynomial.polynomial.polyval(b, anti) - np.polynomial.polynomial.polyval(a, anti))
        return total


@dataclass(frozen=True, eq=False)
class DyadicPiecewiseConstant:
    """Constant on the cells of a ``2^L`` (1-d) or ``2^L x 2^L`` (2-d) grid."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        side = v.shape[0]
        if v.ndim not in (1, 2) or side & (side - 1) or (v.ndim == 2 and v.shape[1] != side):
            raise ValidationError("values must be a 2^L vector or 2^L x 2^L array")
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.values.ndim

    def __call__(self, x) -> np.ndarray:
        pts = _points(x, self.dim)
        side = self.values.shape[0]
        idx = np.clip(np.floor(pts * side).astype(np.int64), 0, side - 1)
        return self.values[tuple(idx.T)]

    def cell_integrals(self, cells: int) -> np.ndarray:
        side = self.values.shape[0]
        vol = (1.0 / cells) ** self.dim
        if side <= cells:
            rep = cells // side
            v = self.values
            for ax in range(self.dim):
                v = np.repeat(v, rep, axis=ax)
            return v * vol
        block = side // cells
        shape = []
        for _ in range(self.dim):
            shape += [cells, block]
        sums = self.values.reshape(shape).sum(axis=tuple(range(1, 2 * self.dim, 2)))
        return sums * (1.0 / side) ** self.dim

    def norm_sq(self) -> float:
        return float(np.mean(self.values**2))


def _gauss_cell_integrals(f: Callable, dim: int, cells: int) -> np.ndarray:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    nodes = 0.5 * (nodes + 1.0) / cells
    weights = 0.5 * weights / cells
    starts = np.arange(cells) / cells
    t = (starts[:, None] + nodes[None, :]).reshape(-1)
    if dim == 1:
        vals = np.asarray(f(t[:, None]), dtype=float).reshape(cells, GAUSS_ORDER)
        return vals @ weights
    out = np.empty((cells, cells))
    for i in range(cells):
        x1 = starts[i] + nodes
        g1, g2 = np.meshgrid(x1, t, indexing="ij")
        vals = np.asarray(f(np.column_stack([g1.ravel(), g2.ravel()])), dtype=float)
        vals = vals.reshape(GAUSS_ORDER, cells, GAUSS_ORDER)
        out[i] = np.einsum("a,acb,b->c", weights, vals, weights)
    return out


def _gauss_norm_sq(f: Callable, dim: int, cells: int) -> float:
    return float(np.sum(_gauss_cell_integrals(lambda x: np.asarray(f(x), dtype=float) ** 2, dim, cells)))


def _descriptor_dim(f, dictionary: HaarDictionary) -> int:
    d = getattr(f, "dim", dictionary.dim)
    if d != dictionary.dim:
        raise ValidationError(f"function of dimension {d} against a {dictionary.dim}-d dictionary")
    return d


def cell_integrals(f, dictionary: HaarDictionary) -> np.ndarray:
    _descriptor_dim(f, dictionary)
    if hasattr(f, "cell_integrals"):
        return f.cell_integrals(dictionary.cells)
    if not callable(f):
        raise ValidationError("f must be a descriptor or a vectorised callable")
    return _gauss_cell_integrals(f, dictionary.dim, dictionary.cells)


def norm_sq(f, dictionary: HaarDictionary, cells: int | None = None) -> float:
    if hasattr(f, "norm_sq"):
        return f.norm_sq()
    return _gauss_norm_sq(f, dictionary.dim, cells or max(dictionary.cells, 256 if dictionary.dim == 1 else 64))


# -- transforms ---------------------------------------------------------------


def haar_forward(integrals: np.ndarray) -> np.ndarray:
    """Coefficients in canonical order from finest-cell integrals."""
    s = np.asarray(integrals, dtype=float)
    if s.ndim == 1:
        J = int(round(math.log2(len(s))))
        out = np.empty(len(s))
        for j in range(J - 1, -1, -1):
            left, right = s[0::2], s[1::2]
            out[2**j : 2 ** (j + 1)] = 2.0 ** (j / 2) * (left - right)
            s = left + right
        out[0] = s[0]
        return out
    J = int(round(math.log2(s.shape[0])))
    out = np.empty(s.size)
    for j in range(J - 1, -1, -1):
        a, b, c, d = s[0::2, 0::2], s[0::2, 1::2], s[1::2, 0::2], s[1::2, 1::2]
        amp = 2.0**j
        block = np.stack([amp * (a + b - c - d), amp * (a - b + c - d), amp * (a - b - c + d)], axis=-1)
        out[4**j : 4 ** (j + 1)] = block.reshape(-1)
        s = a + b + c + d
    out[0] = s[0, 0]
    return out


def haar_inverse(coeffs: np.ndarray, dim: int) -> np.ndarray:
    """Finest-cell averages of the expansion with the given canonical coefficients."""
    c = np.asarray(coeffs, dtype=float)
    if dim == 1:
        J = int(round(math.log2(len(c))))
        s = np.array([c[0]])
        for j in range(J):
            det = c[2**j : 2 ** (j + 1)] * 2.0 ** (-j / 2)
            nxt = np.empty(2 * len(s))
            nxt[0::2] = 0.5 * (s + det)
            nxt[1::2] = 0.5 * (s - det)
            s = nxt
        return s * len(s)
    J = int(round(math.log(c.size, 4)))
    s = np.array([[c[0]]])
    for j in range(J):
        blk = c[4**j : 4 ** (j + 1)].reshape(2**j, 2**j, 3) * 2.0 ** (-j)
        h, v, dg = blk[..., 0], blk[..., 1], blk[..., 2]
        nxt = np.empty((2 * s.shape[0], 2 * s.shape[1]))
        nxt[0::2, 0::2] = 0.25 * (s + h + v + dg)
        nxt[0::2, 1::2] = 0.25 * (s + h - v - dg)
        nxt[1::2, 0::2] = 0.25 * (s - h + v - dg)
        nxt[1::2, 1::2] = 0.25 * (s - h - v + dg)
        s = nxt
    return s * s.size


def analyze(f, dictionary: HaarDictionary) -> np.ndarray:
    """``<f, psi_i>`` for every dictionary element (array position ``i - 1``).

    Exact for :class:`PiecewisePolynomial` and :class:`DyadicPiecewiseConstant`;
    vectorised callables use Gauss-Legendre rules on the finest cells.
    """
    return haar_forward(cell_integrals(f, dictionary))


@dataclass(frozen=True, eq=False)
class HaarExpansion:
    """Finite Haar expansion; callable on points."""

    dictionary: HaarDictionary
    indices: tuple[int, ...]
    coeffs: tuple[float, ...]

    def full_coefficients(self) -> np.ndarray:
        c = np.zeros(self.dictionary.size)
        for i, v in zip(self.indices, self.coeffs):
            c[i - 1] = v
        return c

    def cell_values(self) -> np.ndarray:
        return haar_inverse(self.full_coefficients(), self.dictionary.dim)

    def __call__(self, x) -> np.ndarray:
        return DyadicPiecewiseConstant(self.cell_values())(x)


# -- best M-term approximation ------------------------------------------------


def pi_bound(M: int, pi_degree: int) -> int:
    return int(M) ** int(pi_degree)


@dataclass(frozen=True)
class MTermApprox:
    indices: tuple[int, ...]
    coeffs: tuple[float, ...]
    l2_error: float
    pi_M: int

    def expansion(self, dictionary: HaarDictionary) -> HaarExpansion:
        return HaarExpansion(dictionary, self.indices, self.coeffs)


def _constrained_error(norm2: float, kept: np.ndarray, clamped: np.ndarray) -> float:
    err2 = norm2 - float(np.sum(kept * kept)) + float(np.sum((kept - clamped) ** 2))
    return math.sqrt(max(err2, 0.0))


def best_m_term(f, dictionary: HaarDictionary, M: int, pi_degree: int = 2, coeffs: np.ndarray | None = None, norm2: float | None = None) -> MTermApprox:
    """Keep the ``M`` largest coefficients among the first ``min(M^pi_degree, size)`` indices.

    Kept coefficients are clamped to ``[-M^pi_degree, M^pi_degree]``. For an
    orthonormal dictionary this greedy choice is optimal.
    """
    if M < 1:
        raise ValidationError("M must be at least 1")
    c = analyze(f, dictionary) if coeffs is None else np.asarray(coeffs, dtype=float)
    norm2 = norm_sq(f, dictionary) if norm2 is None else norm2
    R = pi_bound(M, pi_degree)
    P = min(R, dictionary.size)
    if M > P:
        raise InfeasibleBudgetError(f"M = {M} exceeds the admissible index range {P}")
    head = c[:P]
    # Stable ordering: larger magnitude first, lower index on ties.
    order = np.lexsort((np.arange(P), -np.abs(head)))[:M]
    chosen = np.sort(order)
    kept = head[chosen]
    clamped = np.clip(kept, -R, R)
    return MTermApprox(tuple(int(i) + 1 for i in chosen), tuple(float(v) for v in clamped), _constrained_error(norm2, kept, clamped), R)


def m_term_curve(f, dictionary: HaarDictionary, Ms, pi_degree: int = 2) -> list[tuple[int, float]]:
    c = analyze(f, dictionary)
    n2 = norm_sq(f, dictionary)
    return [(int(M), best_m_term(f, dictionary, int(M), pi_degree, c, n2).l2_error) for M in Ms]


@dataclass(frozen=True)
class GammaFit:
    gamma_hat: float
    band: tuple[float, float]
    intercept: float


def fit_gamma(points, n_boot: int = 1000, seed: int = 0) -> GammaFit:
    """Slope of ``-log error`` against ``log M``."""
    pts = [(float(M), float(e)) for M, e in points]
    if len(pts) < 4:
        raise ValidationError("fit_gamma needs at least 4 points")
    if any(e <= 0 or M <= 0 for M, e in pts):
        raise ValidationError("M and errors must be positive")
    fit = fit_rate(pts, n_boot=n_boot, seed=seed, min_points=4)
    return GammaFit(fit.m_hat, fit.band, fit.intercept)


# -- codec --------------------------------------------------------------------


def _quantise(c: np.ndarray, R: float, q: int) -> np.ndarray:
    levels = 2**q
    width = 2.0 * R / levels
    return np.clip(np.floor((np.clip(c, -R, R) + R) / width), 0, levels - 1).astype(np.int64)


def _dequantise(codes: np.ndarray, R: float, q: int) -> np.ndarray:
    width = 2.0 * R / 2**q
    return -R + (codes.astype(float) + 0.5) * width


def _bits(value: int, width: int) -> str:
    return format(int(value), f"0{width}b")


def encode(f, dictionary: HaarDictionary, M: int, q: int, pi_degree: int = 2, approx: MTermApprox | None = None) -> str:
    """Bitstring of the quantised best ``M``-term approximation of ``f`` (``M = 0`` encodes zero)."""
    if not Q_RANGE[0] <= q <= Q_RANGE[1]:
        raise ValidationError(f"q must lie in {Q_RANGE[0]}..{Q_RANGE[1]}")
    if not 0 <= pi_degree < 16 or M < 0 or M >= 2**32:
        raise ValidationError("M or pi_degree outside the header range")
    header = _bits(M, 32) + _bits(q, 6) + _bits(pi_degree, 4)
    if M == 0:
        return header
    approx = approx or best_m_term(f, dictionary, M, pi_degree)
    R = approx.pi_M
    P = min(R, dictionary.size)
    bitmap = ["0"] * P
    for i in approx.indices:
        bitmap[i - 1] = "1"
    codes = _quantise(np.asarray(approx.coeffs), R, q)
    return header + "".join(bitmap) + "".join(_bits(v, q) for v in codes)


def decode(bits: str, dictionary: HaarDictionary) -> HaarExpansion:
    if any(ch not in "01" for ch in bits):
        pos = next(i for i, ch in enumerate(bits) if ch not in "01")
        raise DecodeError("bitstring may only contain '0' and '1'", pos)
    if len(bits) < HEADER_BITS:
        raise DecodeError("truncated header", len(bits))
    M = int(bits[:32], 2)
    q = int(bits[32:38], 2)
    deg = int(bits[38:42], 2)
    if M == 0:
        if len(bits) != HEADER_BITS:
            raise DecodeError("trailing bits after an empty code", HEADER_BITS)
        return HaarExpansion(dictionary, (), ())
    if not Q_RANGE[0] <= q <= Q_RANGE[1]:
        raise DecodeError(f"invalid coefficient width {q}", 32)
    R = pi_bound(M, deg)
    P = min(R, dictionary.size)
    end_map = HEADER_BITS + P
    if len(bits) < end_map:
        raise DecodeError("truncated index bitmap", len(bits))
    bitmap = bits[HEADER_BITS:end_map]
    indices = tuple(i + 1 for i, ch in enumerate(bitmap) if ch == "1")
    if len(indices) != M:
        raise DecodeError(f"bitmap selects {len(indices)} indices, header says {M}", HEADER_BITS)
    expected = end_map + M * q
    if len(bits) != expected:
        raise DecodeError(f"expected {expected} bits, got {len(bits)}", min(len(bits), expected))
    codes = np.array([int(bits[end_map + k * q : end_map + (k + 1) * q], 2) for k in range(M)], dtype=np.int64)
    return HaarExpansion(dictionary, indices, tuple(float(v) for v in _dequantise(codes, R, q)))


def code_length(M: int, q: int, pi_degree: int, dictionary: HaarDictionary) -> int:
    if M == 0:
        return HEADER_BITS
    return HEADER_BITS + min(pi_bound(M, pi_degree), dictionary.size) + M * q


def quantisation_bound(M: int, q: int, pi_degree: int) -> float:
    """``M^(1/2) pi(M) 2^-q``."""
    return math.sqrt(M) * pi_bound(M, pi_degree) * 2.0**-q


def roundtrip_error(coeffs: np.ndarray, norm2: float, decoded: HaarExpansion) -> float:
    """Exact ``L^2`` distance between ``f`` and a decoded expansion, by orthonormality."""
    c = np.asarray(coeffs, dtype=float)
    idx = np.array(decoded.indices, dtype=np.int64) - 1
    kept = c[idx] if len(idx) else np.zeros(0)
    return _constrained_error(norm2, kept, np.asarray(decoded.coeffs))


@dataclass(frozen=True)
class CodeRecord:
    epsilon: float
    bits: int
    M: int
    q: int
    error: float


def min_code_length(f, dictionary: HaarDictionary, epsilon: float, M_grid=None, q_grid=None, pi_degree: int = 1) -> CodeRecord:
    """Shortest code over an ``(M, q)`` grid whose round trip is within ``epsilon``."""
    c = analyze(f, dictionary)
    n2 = norm_sq(f, dictionary)
    if math.sqrt(n2) <= epsilon:
        return CodeRecord(epsilon, HEADER_BITS, 0, Q_RANGE[0], math.sqrt(n2))
    M_grid = M_grid or range(1, dictionary.size + 1)
    q_grid = q_grid or range(Q_RANGE[0], Q_RANGE[1] + 1)
    best = None
    for M in M_grid:
        try:
            approx = best_m_term(f, dictionary, M, pi_degree, c, n2)
        except InfeasibleBudgetError:
            continue
        if approx.l2_error > epsilon:
            continue
        for q in q_grid:
            bits = code_length(M, q, pi_degree, dictionary)
            if best is not None and bits >= best.bits:
                break
            dec = decode(encode(f, dictionary, M, q, pi_degree, approx), dictionary)
            err = roundtrip_error(c, n2, dec)
            if err <= epsilon:
                best = CodeRecord(epsilon, bits, M, q, err)
                break
    if best is None:
        raise InfeasibleBudgetError(f"no (M, q) on the grid reaches epsilon = {epsilon}")
    return best


# -- network approximation ----------------------------------------------------


def nn_mweight_error(f, M_budget: int, pi_degree: int = 2, cfg=None, dim: int = 1, nodes: int = 256, eval_nodes: int = 4096) -> float:
    """Upper bound on the best ``L^2`` error of ReLU networks with ``M_budget`` nonzero weights.

    A single-hidden-layer network of the largest width fitting the budget is
    trained by squared-loss gradient descent on a midpoint grid, its output
    layer is then refitted by least squares, and the result is projected to
    connectivity ``<= M_budget`` and weights ``<= M_budget^pi_degree``. The
    error is measured on a finer midpoint grid.
    """
    from .erm import TrainConfig, forward, train
    from .nnet import Architecture, SieveSpec, dense, project_to_sieve

    if M_budget < dim + 2:
        raise ValidationError(f"M_budget must be at least {dim + 2}")
    cfg = cfg or TrainConfig(step_size=0.2, epochs=2000, restarts=10)
    width = max(1, (M_budget - 1) // (dim + 2))
    sieve = SieveSpec(Architecture((dim, width, 1)), conn_budget=M_budget, weight_bound=float(pi_bound(M_budget, pi_degree)))
    x = _midpoints(nodes, dim)
    y = np.asarray(f(x), dtype=float)
    net, *_ = train(sieve, x, y, cfg, loss="squared")
    params = [p.copy() for A, b in net.layers for p in (A, b)]
    _, hs, _ = forward(params, x)
    design = np.column_stack([hs[-1], np.ones(len(x))])
    sol, *_ = np.linalg.lstsq(design, y, rcond=None)
    params[-2] = sol[:-1][None, :]
    params[-1] = sol[-1:]
    net = project_to_sieve(dense((dim, width, 1), params), sieve)
    xe = _midpoints(eval_nodes if dim == 1 else int(math.sqrt(eval_nodes)) * 2, dim)
    r = net(xe) - np.asarray(f(xe), dtype=float)
    return float(math.sqrt(np.mean(r * r)))


def _midpoints(n: int, dim: int) -> np.ndarray:
    t = (np.arange(n) + 0.5) / n
    if dim == 1:
        return t[:, None]
    g = np.meshgrid(*([t] * dim), indexing="ij")
    return np.column_stack([a.ravel() for a in g])
