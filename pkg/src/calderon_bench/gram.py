"""Mass matrix, lumped (diagonal) coupling matrix, and the scaled-basis
transform.

Two inner products are supported: the exact L2 product on the curve and the
mesh-dependent product in which the Jacobian (speed) is replaced by its
per-panel average |T| / |parameter interval|.  On affine charts the two
coincide; the averaged product makes every lumped entry exactly computable
on curved geometries.
"""

from __future__ import annotations

import numpy as np

from .fespace import FeSpace, reference_basis
from .quadrature import gauss_rule

KINDS = ("exact", "mesh-averaged")


def _check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"inner-product kind must be one of {KINDS}, got {kind!r}")


def mass_matrix(s: FeSpace, kind: str = "exact", n_quad: int = 12) -> np.ndarray:
    """Dense symmetric Gram matrix <phi_nu, phi_nu'> in the chosen product."""
    _check_kind(kind)
    g = gauss_rule(n_quad)
    V = reference_basis(s.degree, g.nodes)          # (l+1, n)
    N = s.ndof
    M = np.zeros((N, N))
    geom = s.mesh.geometry
    for p, panel in enumerate(s.mesh.panels):
        dt = panel.t1 - panel.t0
        if kind == "exact":
            t = panel.t0 + dt * g.nodes
            jac = np.linalg.norm(geom.charts[panel.chart].velocity(t), axis=-1) * dt
        else:
            jac = np.full(g.nodes.size, panel.length)
        block = (V * (g.weights * jac)) @ V.T
        idx = s.conn[p]
        M[np.ix_(idx, idx)] += block
    return M


def lumped_matrix(s: FeSpace, kind: str = "exact", n_quad: int = 12) -> np.ndarray:
    """Diagonal entries <1, phi_nu>, computed as mass-matrix row sums.

    The basis is a partition of unity, so row sums and the defining
    integrals agree identically; one code path keeps the lumping identity
    exact by construction.
    """
    return mass_matrix(s, kind, n_quad).sum(axis=1)


def scaled_basis(A: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Similarity rescaling D^{-1/2} A D^{-1/2} for a diagonal D given by
    its entries; maps D itself to the identity."""
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("diagonal entries must be positive")
    r = 1.0 / np.sqrt(d)
    return A * np.outer(r, r)
