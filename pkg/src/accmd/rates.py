"""Least-squares fits of geometric and polynomial decay laws."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

MIN_POINTS = 10


class RateFit(NamedTuple):
    slope: float
    contraction: float
    loglog_slope: float
    points: int
    inconclusive: bool

    def as_dict(self):
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in self._asdict().items()}


def fit_rate(values, reference_value=0.0, window=None, steps=None) -> RateFit:
    """Fit ``log(values - reference_value)`` against the step index.

    ``slope`` is the geometric fit (vs ``k``) and ``contraction`` is
    ``exp(slope)``; ``loglog_slope`` fits against ``log k`` over ``k > 0``.
    ``window`` is a ``(start, stop)`` slice into the series.  Points not
    strictly above the reference are dropped; fewer than ten remaining
    points makes the fit inconclusive.
    """
    v = np.asarray(values, dtype=np.float64)
    k = np.arange(v.size, dtype=np.float64) if steps is None else np.asarray(steps, dtype=np.float64)
    if window is not None:
        sl = slice(*window)
        v, k = v[sl], k[sl]
    gap = v - reference_value
    keep = np.isfinite(gap) & (gap > 0)
    v_gap, k = gap[keep], k[keep]
    if v_gap.size < MIN_POINTS:
        return RateFit(math.nan, math.nan, math.nan, int(v_gap.size), True)
    logv = np.log(v_gap)
    slope = float(np.polyfit(k, logv, 1)[0])
    pos = k > 0
    loglog = float(np.polyfit(np.log(k[pos]), logv[pos], 1)[0]) if pos.sum() >= 2 else math.nan
    return RateFit(slope, math.exp(slope), loglog, int(v_gap.size), False)
