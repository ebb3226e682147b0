"""Segmented-regression location of the slope transition in a linewidth curve."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

SIGNIFICANCE = 0.01
MIN_SIDE = 2


@dataclass(frozen=True)
class Segmented:
    """Continuous two-segment fit y = a + b x + c max(x - knee, 0)."""

    knee: float
    intercept: float
    slope_below: float
    slope_above: float
    sse: float
    sse_line: float
    r2_line: float
    p_value: float

    @property
    def slope_ratio(self) -> float:
        return self.slope_above / self.slope_below if self.slope_below else float("inf")

    @property
    def concave(self) -> bool:
        return self.slope_above < self.slope_below


def _lstsq_sse(design, y):
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    r = y - design @ coef
    return coef, float(r @ r)


def line_fit(x, y) -> tuple[float, float, float]:
    """(intercept, slope, R^2) of an ordinary least-squares line."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    coef, sse = _lstsq_sse(np.column_stack([np.ones_like(x), x]), y)
    sst = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - sse / sst if sst > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def segmented_regression(x, y) -> Segmented:
    """Best continuous hinge with the knee scanned over interior data points.

    At least ``MIN_SIDE`` points lie strictly on each side of the knee.  The
    p-value is an F-test of the hinge against a single line, counting the
    knee position as a fitted parameter.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    x, y = x[order], y[order]
    n = x.size
    if n < 2 * MIN_SIDE + 2:
        raise ValueError(f"segmented regression needs at least {2 * MIN_SIDE + 2} points, got {n}")
    if np.any(np.diff(x) <= 0):
        raise ValueError("x values must be distinct")
    a0, b0, r2 = line_fit(x, y)
    sse_line = float(np.sum((y - a0 - b0 * x) ** 2))

    best = None
    for k in range(MIN_SIDE, n - MIN_SIDE):
        design = np.column_stack([np.ones(n), x, np.maximum(x - x[k], 0.0)])
        coef, sse = _lstsq_sse(design, y)
        if best is None or sse < best[2] - 1e-15 * max(sse_line, 1e-300):
            best = (x[k], coef, sse)
    knee, coef, sse = best
    dof = n - 4
    scale = max(sse_line, 1e-300)
    if sse <= 1e-24 * scale:
        p = 0.0 if sse_line > 1e-24 * max(float(y @ y), 1e-300) else 1.0
    else:
        f = ((sse_line - sse) / 2) / (sse / dof)
        p = float(stats.f.sf(f, 2, dof))
    return Segmented(
        knee=float(knee),
        intercept=float(coef[0]),
        slope_below=float(coef[1]),
        slope_above=float(coef[1] + coef[2]),
        sse=sse,
        sse_line=sse_line,
        r2_line=r2,
        p_value=p,
    )


def transition_locator(records, delta_cx: float | None = None, y=None, alpha: float = SIGNIFICANCE):
    """|Omega/2pi|^2 (GHz^2) of the linewidth slope transition, or None.

    ``records`` is either a sequence of sweep records (anything with
    ``omega_sq`` and ``lower_fwhm`` attributes or keys) or, with ``y``
    given, the x values.  A transition is reported only when the hinge
    beats a single line at level ``alpha`` and the slope drops across it;
    an upward kink is ordinary convex power broadening, not a transition.
    ``delta_cx`` identifies the curve; the breakpoint itself is data-driven
    and never seeded from it.
    """
    if y is None:
        pts = [(_get(r, "omega_sq"), _get(r, "lower_fwhm")) for r in records]
        pts = [(a, b) for a, b in pts if a is not None and b is not None and np.isfinite(b)]
        x = np.array([a for a, _ in pts], dtype=float)
        y = np.array([b for _, b in pts], dtype=float)
    else:
        x = np.asarray(records, dtype=float)
        y = np.asarray(y, dtype=float)
    seg = segmented_regression(x, y)
    if seg.p_value < alpha and seg.concave:
        return seg.knee
    return None


def _get(rec, name):
    if isinstance(rec, dict):
        v = rec.get(name)
    else:
        v = getattr(rec, name, None)
    return None if v is None or v == "" else float(v)
