"""Conforming partitions of a closed curve into panels.

Panels are parameter sub-intervals of the geometry charts, kept in cyclic
order.  Refinement bisects panels at the parameter midpoint; a uniform
K-mesh property (neighbouring sizes within a factor 2) is enforced by
recursive closure bisections after every local refinement.

The closure compares speed-normalized sizes (parameter length times the
chart's average speed).  These are exactly dyadic under midpoint bisection,
so a graded profile sitting at ratio 2 is stable; an arc-length threshold
would let curvature wobble push at-cap pairs over the limit and unwind the
entire grading.  On constant-speed charts (square, circle) the normalized
and arc-length ratios coincide, so arc ratios obey the factor 2 exactly;
on the ellipse they obey 2 * (1 + O(h)).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Geometry
from .quadrature import gauss_rule

# neighbour size-ratio cap for the closure; the tiny slack absorbs roundoff
# on pairs whose exact ratio is 2
KMESH_RATIO = 2.0
_RATIO_CAP = KMESH_RATIO * (1.0 + 1e-9)

_LEN_RULE = gauss_rule(16)
_MAX_PIECE = 0.25  # composite piece size (parameter units) for length quadrature


@dataclass(frozen=True)
class Panel:
    chart: int
    t0: float
    t1: float
    length: float       # arc length |T|
    qlength: float      # parameter length times chart average speed
    generation: int


@dataclass(frozen=True)
class Mesh:
    geometry: Geometry
    panels: tuple

    @property
    def n_panels(self):
        return len(self.panels)

    @property
    def h_min(self):
        return min(p.length for p in self.panels)

    @property
    def h_max(self):
        return max(p.length for p in self.panels)

    def total_length(self):
        return sum(p.length for p in self.panels)


def panel_length(g: Geometry, chart: int, t0: float, t1: float) -> float:
    """Arc length of a parameter sub-interval, machine accurate for the
    shipped (analytic-speed) charts."""
    c = g.charts[chart]
    pieces = max(1, int(np.ceil((t1 - t0) / _MAX_PIECE)))
    edges = np.linspace(t0, t1, pieces + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        t = a + (b - a) * _LEN_RULE.nodes
        speed = np.linalg.norm(c.velocity(t), axis=-1)
        total += (b - a) * np.dot(_LEN_RULE.weights, speed)
    return total


def _make_panel(g, chart, t0, t1, generation):
    qlen = (t1 - t0) * g.chart_scales[chart]
    return Panel(chart, t0, t1, panel_length(g, chart, t0, t1), qlen, generation)


def _bisect(g, p: Panel):
    tm = 0.5 * (p.t0 + p.t1)
    return (
        _make_panel(g, p.chart, p.t0, tm, p.generation + 1),
        _make_panel(g, p.chart, tm, p.t1, p.generation + 1),
    )


def _bisect_marked(g, panels, marked):
    out = []
    for i, p in enumerate(panels):
        if i in marked:
            out.extend(_bisect(g, p))
        else:
            out.append(p)
    return out


def _kmesh_close(g, panels):
    # repeated sweeps: bisect the larger panel of every violating neighbour
    # pair until the ratio cap holds everywhere
    for _ in range(10000):
        P = len(panels)
        marked = set()
        for i in range(P):
            j = (i + 1) % P
            if panels[i].qlength > _RATIO_CAP * panels[j].qlength:
                marked.add(i)
            elif panels[j].qlength > _RATIO_CAP * panels[i].qlength:
                marked.add(j)
        if not marked:
            return panels
        panels = _bisect_marked(g, panels, marked)
    raise RuntimeError("K-mesh closure did not terminate")


def initial_mesh(g: Geometry, panels_per_chart: int) -> Mesh:
    """Split every chart into equal parameter sub-intervals."""
    if panels_per_chart < 1:
        raise ValueError("panels_per_chart must be >= 1")
    panels = []
    for ci, c in enumerate(g.charts):
        edges = np.linspace(c.t0, c.t1, panels_per_chart + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            panels.append(_make_panel(g, ci, a, b, 0))
    return Mesh(g, tuple(_kmesh_close(g, panels)))


def refine(m: Mesh, marked) -> Mesh:
    """Bisect the marked panels (by id) and restore the K-mesh property."""
    marked = set(marked)
    if not marked:
        raise ValueError("refine: marked set is empty")
    if not marked <= set(range(m.n_panels)):
        raise ValueError("refine: invalid panel ids")
    panels = _bisect_marked(m.geometry, list(m.panels), marked)
    return Mesh(m.geometry, tuple(_kmesh_close(m.geometry, panels)))


def uniform_refine(m: Mesh) -> Mesh:
    """Bisect every panel."""
    return refine(m, range(m.n_panels))


def corner_panels(m: Mesh):
    """Ids of the panels whose closure touches a geometry corner point."""
    ids = set()
    for corner in m.geometry.corners:
        for ci, tc in corner:
            for i, p in enumerate(m.panels):
                if p.chart != ci:
                    continue
                tol = 1e-12 * (p.t1 - p.t0)
                if p.t0 - tol <= tc <= p.t1 + tol:
                    ids.add(i)
    return sorted(ids)


def corner_schedule(g: Geometry, k: int, panels_per_chart: int | None = None,
                    rounds_per_level: int = 4) -> Mesh:
    """Benchmark mesh family: k uniform bisections of the initial partition,
    then ``rounds_per_level * k`` rounds of bisecting every panel that
    touches a corner point.  h_max halves per level while h_min shrinks like
    2**(-(1+rounds_per_level)*k) up to closure effects."""
    if k < 1:
        raise ValueError("corner_schedule: k must be >= 1")
    if panels_per_chart is None:
        panels_per_chart = 2 if g.kind == "square" else 8
    m = initial_mesh(g, panels_per_chart)
    for _ in range(k):
        m = uniform_refine(m)
    for _ in range(rounds_per_level * k):
        m = refine(m, corner_panels(m))
    return m


def neighbor_ratios(m: Mesh, normalized: bool = False):
    """Size ratio (>= 1) for every cyclic neighbour pair.

    ``normalized`` selects the speed-normalized sizes that the closure
    enforces; the default reports arc-length ratios.
    """
    attr = "qlength" if normalized else "length"
    P = m.n_panels
    out = np.empty(P)
    for i in range(P):
        a, b = getattr(m.panels[i], attr), getattr(m.panels[(i + 1) % P], attr)
        out[i] = max(a, b) / min(a, b)
    return out


def is_conforming(m: Mesh) -> bool:
    """Consecutive panels share exactly one endpoint (allowing chart jumps)."""
    P = m.n_panels
    for i in range(P):
        p, q = m.panels[i], m.panels[(i + 1) % P]
        cp, cq = m.geometry.charts[p.chart], m.geometry.charts[q.chart]
        if p.chart == q.chart and np.isclose(p.t1, q.t0, rtol=0, atol=1e-12):
            continue
        # chart junction (possibly the chart gluing back onto itself)
        if not (np.isclose(p.t1, cp.t1) and np.isclose(q.t0, cq.t0)):
            return False
        if not np.allclose(cp.point(p.t1), cq.point(q.t0), atol=1e-12):
            return False
    return True


def dump_mesh(m: Mesh, path):
    """Text dump: one line ``panel_id chart t0 t1 length`` per panel."""
    with open(path, "w") as fh:
        for i, p in enumerate(m.panels):
            fh.write(f"{i} {p.chart} {p.t0:.17g} {p.t1:.17g} {p.length:.17g}\n")
