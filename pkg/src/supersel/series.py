"""Sweep results and straight-line fits on log axes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

SEMILOG = "semilog"  # x = parameter, y = log(value)
LOGLOG = "loglog"    # x = log(parameter), y = log(value)


class FitError(ValueError):
    pass


def fit_log_slope(points: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """Ordinary least squares slope and its standard error for ``(x, y)`` pairs.

    Points with a non-finite coordinate are skipped.  The caller chooses the
    axes (log or linear); this function only fits a line.
    """
    pts = [(float(x), float(y)) for x, y in points if math.isfinite(x) and math.isfinite(y)]
    if len(pts) < 2:
        raise FitError(f"need at least 2 finite points, got {len(pts)}")
    xs, ys = np.array(pts).T
    if np.ptp(xs) == 0:
        raise FitError("all x values coincide")
    dx = xs - xs.mean()
    sxx = float(dx @ dx)
    slope = float(dx @ (ys - ys.mean()) / sxx)
    if len(pts) == 2:
        return slope, 0.0
    resid = ys - ys.mean() - slope * dx
    return slope, math.sqrt(float(resid @ resid) / (len(pts) - 2) / sxx)


@dataclass(frozen=True)
class ScalingSeries:
    """``(parameter, value, log_value)`` rows with the fitted slope.

    ``log_value`` is authoritative: ``value`` may underflow to zero where the
    log is still finite.  ``slope`` is ``None`` unless at least two rows have a
    finite log.  ``exact_zero`` marks a series whose every value is exactly 0.
    """

    points: tuple[tuple[float, float, float], ...]
    axis: str = SEMILOG
    slope: float | None = None
    slope_stderr: float | None = None
    exact_zero: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def build(cls, rows: Iterable[tuple[float, float, float]], axis: str = SEMILOG,
              **extra) -> "ScalingSeries":
        if axis not in (SEMILOG, LOGLOG):
            raise ValueError(f"unknown axis convention {axis!r}")
        pts = tuple(sorted((float(p), float(v), float(lv)) for p, v, lv in rows))
        if not pts:
            raise ValueError("empty series")
        finite = [(p, lv) for p, _, lv in pts if math.isfinite(lv)]
        exact_zero = not finite and all(v == 0 for _, v, _ in pts)
        slope = stderr = None
        if len(finite) >= 2:
            xy = [(math.log(p) if axis == LOGLOG else p, lv) for p, lv in finite]
            slope, stderr = fit_log_slope(xy)
        return cls(pts, axis, slope, stderr, exact_zero, dict(extra))

    @property
    def parameters(self) -> np.ndarray:
        return np.array([p for p, _, _ in self.points])

    @property
    def values(self) -> np.ndarray:
        return np.array([v for _, v, _ in self.points])

    @property
    def log_values(self) -> np.ndarray:
        return np.array([lv for _, _, lv in self.points])


def safe_log(value: float) -> float:
    return math.log(value) if value > 0 else -math.inf
