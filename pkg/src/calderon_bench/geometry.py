"""Closed curves in R^2 given by piecewise-smooth regular parametrizations.

A geometry is a list of charts over pairwise disjoint parameter intervals,
glued cyclically into a single closed curve.  The chart speed |chi'(t)| is
the one-dimensional Jacobian entering every arc-length integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .quadrature import adaptive_integrate


class CoercivityRiskError(ValueError):
    """Geometry too large for the log-kernel single layer operator.

    The single layer operator with kernel -log|x-y|/(2*pi) is positive
    definite only for curves of logarithmic capacity < 1; we enforce
    diameter <= 1, which is sufficient for the shipped shapes.
    """


@dataclass(frozen=True)
class AffineChart:
    t0: float
    t1: float
    p0: np.ndarray
    p1: np.ndarray

    def point(self, t):
        s = (np.asarray(t, dtype=float) - self.t0) / (self.t1 - self.t0)
        return self.p0 + np.multiply.outer(s, self.p1 - self.p0)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        v = (self.p1 - self.p0) / (self.t1 - self.t0)
        return np.broadcast_to(v, t.shape + (2,)).copy()


@dataclass(frozen=True)
class EllipticChart:
    """Chart (a cos t, b sin t) + center; a == b gives a circle."""

    t0: float
    t1: float
    a: float
    b: float
    center: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def point(self, t):
        t = np.asarray(t, dtype=float)
        return self.center + np.stack(
            [self.a * np.cos(t), self.b * np.sin(t)], axis=-1
        )

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        return np.stack([-self.a * np.sin(t), self.b * np.cos(t)], axis=-1)


@dataclass(frozen=True)
class Geometry:
    """Closed curve: charts in cyclic order; chart i's end glues to chart
    (i+1)'s start.  ``corners`` lists the refinement anchor points, each as a
    tuple of (chart, parameter) aliases naming the same curve point.
    ``chart_scales`` holds each chart's average speed (arc length over
    parameter length), the per-chart unit used by the mesh grading."""

    kind: str
    scale: float
    charts: tuple
    corners: tuple
    diameter: float
    chart_scales: tuple

    @property
    def n_charts(self):
        return len(self.charts)


def make_geometry(kind: str, scale: float = 0.5, ellipse_ratio: float = 2.0) -> Geometry:
    """Build one of the shipped closed curves.

    square  -> boundary of an axis-aligned square of side ``scale``
               (4 affine charts, diameter scale*sqrt(2))
    circle  -> circle of radius scale/2 (one angle chart)
    ellipse -> (a cos t, b sin t) with a/b = ellipse_ratio and 2a = scale
    """
    if scale <= 0:
        raise ValueError("scale must be positive")
    if kind == "square":
        a = scale
        diameter = a * math.sqrt(2.0)
        corners_xy = [np.array(p) for p in [(0, 0), (a, 0), (a, a), (0, a)]]
        # disjoint closed parameter intervals: gaps of one unit between charts
        charts = tuple(
            AffineChart(2.0 * i, 2.0 * i + 1.0, corners_xy[i], corners_xy[(i + 1) % 4])
            for i in range(4)
        )
        corners = tuple(
            ((i, charts[i].t0), ((i - 1) % 4, charts[(i - 1) % 4].t1)) for i in range(4)
        )
    elif kind == "circle":
        r = scale / 2.0
        diameter = scale
        charts = (EllipticChart(0.0, 2.0 * math.pi, r, r),)
        corners = _equispaced_corners()
    elif kind == "ellipse":
        if ellipse_ratio <= 0:
            raise ValueError("ellipse_ratio must be positive")
        a = scale / 2.0
        b = a / ellipse_ratio
        diameter = 2.0 * max(a, b)
        charts = (EllipticChart(0.0, 2.0 * math.pi, a, b),)
        corners = _equispaced_corners()
    else:
        raise ValueError(f"unknown geometry kind {kind!r}")
    if diameter > 1.0 + 1e-14:
        raise CoercivityRiskError(
            f"diameter {diameter:.4g} > 1: single layer coercivity is not "
            f"guaranteed (logarithmic capacity must stay below 1); reduce scale"
        )
    scales = tuple(_chart_arc_length(c) / (c.t1 - c.t0) for c in charts)
    return Geometry(kind, scale, charts, corners, diameter, scales)


def _chart_arc_length(chart, max_piece=0.25, n=16):
    """Composite Gauss arc length of a full chart (machine accurate for the
    shipped analytic-speed charts)."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    pieces = max(1, int(math.ceil((chart.t1 - chart.t0) / max_piece)))
    edges = np.linspace(chart.t0, chart.t1, pieces + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        speed = np.linalg.norm(chart.velocity(a + (b - a) * x), axis=-1)
        total += (b - a) * np.dot(w, speed)
    return total


def _equispaced_corners():
    two_pi = 2.0 * math.pi
    out = [((0, 0.0), (0, two_pi))]  # chart junction with itself (closed chart)
    out += [((0, k * math.pi / 2.0),) for k in (1, 2, 3)]
    return tuple(out)


def _check_param(chart, t):
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * (chart.t1 - chart.t0)
    if np.any(t < chart.t0 - tol) or np.any(t > chart.t1 + tol):
        raise ValueError(
            f"parameter outside chart interval [{chart.t0}, {chart.t1}]"
        )
    return t


def chart_eval(g: Geometry, chart: int, t):
    """Point on the curve for a parameter in the chart's closed interval."""
    c = g.charts[chart]
    return c.point(_check_param(c, t))


def chart_speed(g: Geometry, chart: int, t):
    """|chi'(t)|, the d=1 Jacobian; constant on affine charts."""
    c = g.charts[chart]
    v = c.velocity(_check_param(c, t))
    return np.linalg.norm(v, axis=-1)


def total_length(g: Geometry, tol: float = 1e-13) -> float:
    """Arc length of the whole curve by adaptive quadrature of the speed."""
    total = 0.0
    for i, c in enumerate(g.charts):
        total += adaptive_integrate(
            lambda t, i=i: chart_speed(g, i, t), (c.t0, c.t1), tol=tol
        )
    return total
