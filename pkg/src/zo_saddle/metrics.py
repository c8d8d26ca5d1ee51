"""Log-log rate fits, plateau detection and multi-seed aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSeries, SeriesTooShort


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    points: tuple


def fit_rate(series) -> RateFit:
    """Least squares of ``log gap`` on ``log N``."""
    pts = [(float(n), float(g)) for n, g in series]
    if len(pts) < 3:
        raise DegenerateSeries("need at least 3 points for a rate fit")
    n = np.array([p[0] for p in pts])
    g = np.array([p[1] for p in pts])
    if np.any(g <= 0) or np.any(n <= 0) or not np.all(np.isfinite(g)):
        raise DegenerateSeries("rate fit needs strictly positive, finite values")
    lx, ly = np.log(n), np.log(g)
    X = np.column_stack([lx, np.ones_like(lx)])
    (slope, intercept), *_ = np.linalg.lstsq(X, ly, rcond=None)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    if ss_tot == 0:
        r2 = 1.0
    else:
        r2 = float(np.clip(1.0 - np.sum(resid ** 2) / ss_tot, 0.0, 1.0))
    return RateFit(float(slope), float(intercept), r2, tuple(pts))


def detect_plateau(series, window: int) -> float:
    """Median of the last ``window`` gap values; ``series`` holds gaps or ``(N, gap)`` pairs."""
    if window < 1:
        raise SeriesTooShort("window must be >= 1")
    vals = [v[1] if isinstance(v, (tuple, list)) else v for v in series]
    if len(vals) < window:
        raise SeriesTooShort(f"series has {len(vals)} values, window needs {window}")
    return float(np.median(np.asarray(vals[-window:], dtype=float)))


def median_gap(reports) -> float:
    return float(np.median([r.final_gap for r in reports]))


def quantiles(values, qs=(0.5, 0.9, 0.99)) -> dict:
    v = np.asarray(values, dtype=float)
    return {q: float(np.quantile(v, q)) for q in qs}
