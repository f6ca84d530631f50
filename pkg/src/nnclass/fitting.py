"""Log-log power-law fitting with bootstrap bands."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError

DEFAULT_LEVEL = 0.99


@dataclass(frozen=True)
class RateFit:
    """Fitted decay exponent ``m_hat`` of ``mean ~ A n^(-m_hat)``.

    ``points`` holds ``(n, mean, stderr)`` triples in increasing ``n``; the
    ``band`` always contains ``m_hat``.
    """

    m_hat: float
    band: tuple[float, float]
    points: tuple[tuple[float, float, float], ...]
    theoretical_m: float | None = None
    intercept: float = 0.0
    flags: tuple[str, ...] = field(default=())

    @property
    def slope(self) -> float:
        return -self.m_hat

    def to_row(self) -> dict:
        return {
            "m_hat": self.m_hat,
            "band_lo": self.band[0],
            "band_hi": self.band[1],
            "intercept": self.intercept,
            "theoretical_m": "" if self.theoretical_m is None else self.theoretical_m,
            "n_points": len(self.points),
            "flags": ";".join(self.flags),
        }


def _slope(logn: np.ndarray, logy: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(logn, logy, 1)
    return float(slope), float(intercept)


def _normalise(points) -> list[tuple[float, float, float]]:
    out = []
    for p in points:
        p = tuple(p)
        if len(p) == 2:
            p = (p[0], p[1], 0.0)
        n, mean, se = (float(v) for v in p)
        out.append((n, mean, se))
    return sorted(out, key=lambda t: t[0])


def fit_rate(
    points,
    n_boot: int = 1000,
    seed: int = 0,
    theoretical_m: float | None = None,
    level: float = DEFAULT_LEVEL,
    min_points: int = 3,
) -> RateFit:
    """Least-squares fit of ``log mean`` against ``log n``.

    Parameters
    ----------
    points
        Iterable of ``(n, mean)`` or ``(n, mean, stderr)``.
    n_boot
        Bootstrap resamples. When standard errors are available the
        bootstrap is parametric (log-means perturbed by their delta-method
        errors); otherwise residuals of the fit are resampled.
    level
        Two-sided percentile level of the band.

    Nonpositive means are dropped with a warning. Fewer than ``min_points``
    usable abscissas raise :class:`FitError`.
    """
    pts = _normalise(points)
    kept = [p for p in pts if p[1] > 0 and math.isfinite(p[1])]
    if len(kept) < len(pts):
        warnings.warn(f"dropped {len(pts) - len(kept)} nonpositive mean(s) from the rate fit", stacklevel=2)
    if len({p[0] for p in kept}) < min_points:
        raise FitError(f"need at least {min_points} distinct positive points, got {len(kept)}")
    n = np.array([p[0] for p in kept])
    y = np.array([p[1] for p in kept])
    se = np.array([p[2] for p in kept])
    logn, logy = np.log(n), np.log(y)
    slope, intercept = _slope(logn, logy)

    rng = np.random.default_rng(seed)
    if np.all(se > 0):
        sigma = se / y
        sims = logy + rng.standard_normal((n_boot, len(y))) * sigma
    else:
        fitted = intercept + slope * logn
        resid = logy - fitted
        # Inflate residuals to undo the shrinkage of least squares.
        resid = resid * math.sqrt(len(y) / max(len(y) - 2, 1))
        sims = fitted + resid[rng.integers(0, len(y), size=(n_boot, len(y)))]
    X = np.vstack([logn, np.ones_like(logn)]).T
    coef, *_ = np.linalg.lstsq(X, sims.T, rcond=None)
    boot = -coef[0]
    tail = (1.0 - level) / 2.0
    lo, hi = np.quantile(boot, [tail, 1.0 - tail])
    m_hat = -slope
    band = (float(min(lo, m_hat)), float(max(hi, m_hat)))
    return RateFit(
        m_hat=m_hat,
        band=band,
        points=tuple(pts),
        theoretical_m=theoretical_m,
        intercept=intercept,
    )
