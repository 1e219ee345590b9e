"""Continuous piecewise-polynomial spaces on a mesh.

Degree-l Lagrange elements with equispaced nodes per panel; vertex nodes are
shared between neighbouring panels, so on a closed curve the space has
l * n_panels degrees of freedom.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .mesh import Mesh


@lru_cache(maxsize=None)
def _lagrange_coeffs(degree: int) -> np.ndarray:
    """Monomial coefficients of the Lagrange basis on equispaced nodes of
    [0, 1]; column a holds the coefficients of basis function a."""
    nodes = np.linspace(0.0, 1.0, degree + 1)
    V = np.vander(nodes, degree + 1, increasing=True)
    return np.linalg.inv(V)


def reference_basis(degree: int, x):
    """Values of the l+1 reference basis functions, shape (l+1, len(x))."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = _lagrange_coeffs(degree)
    powers = x[None, :] ** np.arange(degree + 1)[:, None]
    return C.T @ powers


def reference_basis_deriv(degree: int, x):
    """Derivatives (w.r.t. the local coordinate) of the reference basis."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = _lagrange_coeffs(degree)
    k = np.arange(degree + 1)
    dpowers = np.vstack(
        [np.zeros_like(x)] + [k[p] * x ** (p - 1) for p in range(1, degree + 1)]
    )
    return C.T @ dpowers


@dataclass(frozen=True)
class FeSpace:
    mesh: Mesh
    degree: int
    conn: np.ndarray        # (n_panels, degree+1) global node ids, left to right
    node_chart: np.ndarray  # (ndof,) canonical chart per node
    node_param: np.ndarray  # (ndof,) canonical parameter per node

    @property
    def ndof(self):
        return self.node_param.size

    def node_point(self, nu):
        g = self.mesh.geometry
        return g.charts[self.node_chart[nu]].point(self.node_param[nu])


def build_space(m: Mesh, degree: int) -> FeSpace:
    """Continuous Lagrange space of the given degree on the mesh.

    Vertex node i sits at the start of panel i (equivalently the end of
    panel i-1); interior nodes are equispaced in parameter.
    """
    if degree < 1:
        raise ValueError("degree must be >= 1")
    P = m.n_panels
    if P < 3:
        raise ValueError("need at least 3 panels on a closed curve")
    conn = np.empty((P, degree + 1), dtype=int)
    node_chart = np.empty(P * degree, dtype=int)
    node_param = np.empty(P * degree)
    for i, p in enumerate(m.panels):
        node_chart[i] = p.chart
        node_param[i] = p.t0
        conn[i, 0] = i
        conn[i, degree] = (i + 1) % P
        for j in range(1, degree):
            nid = P + i * (degree - 1) + (j - 1)
            conn[i, j] = nid
            node_chart[nid] = p.chart
            node_param[nid] = p.t0 + (j / degree) * (p.t1 - p.t0)
    return FeSpace(m, degree, conn, node_chart, node_param)


def eval_basis(s: FeSpace, panel: int, x):
    """Basis data on one panel at local coordinates x in [0, 1].

    Returns (node ids, values, derivative values w.r.t. x); exactly
    degree+1 entries, values summing to 1 and derivatives summing to 0.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-14) or np.any(x > 1 + 1e-14):
        raise ValueError("local coordinate outside [0, 1]")
    ids = s.conn[panel]
    return ids, reference_basis(s.degree, x), reference_basis_deriv(s.degree, x)


def node_supports(s: FeSpace):
    """For each node, the list of (panel, local index) pairs carrying it."""
    supports = [[] for _ in range(s.ndof)]
    for p in range(s.mesh.n_panels):
        for a, nu in enumerate(s.conn[p]):
            supports[nu].append((p, a))
    return supports
