"""Shared cached builders for the heavy benchmark artifacts.

Everything is memoized so the expensive assemblies (corner families up to
level 6, the 128-panel circle) are computed once per pytest session and
shared between the module tests and the acceptance suite.  Returned arrays
are treated as read-only by convention.
"""

from functools import lru_cache

import numpy as np

from calderon_bench.boundary_operators import assemble_operator_pair
from calderon_bench.fespace import build_space
from calderon_bench.geometry import make_geometry
from calderon_bench.gram import lumped_matrix, mass_matrix
from calderon_bench.mesh import corner_schedule, initial_mesh

ALPHA = 0.05
QUAD_N = 12


@lru_cache(maxsize=None)
def geom(kind):
    return make_geometry(kind, 0.5, 2.0)


@lru_cache(maxsize=None)
def corner_mesh(kind, k):
    return corner_schedule(geom(kind), k)


@lru_cache(maxsize=None)
def corner_space(kind, k, ell):
    return build_space(corner_mesh(kind, k), ell)


@lru_cache(maxsize=None)
def corner_operators(kind, k, ell):
    return assemble_operator_pair(corner_space(kind, k, ell), QUAD_N, ALPHA)


@lru_cache(maxsize=None)
def corner_gram(kind, k, ell, inner="exact"):
    s = corner_space(kind, k, ell)
    return mass_matrix(s, inner, n_quad=QUAD_N), lumped_matrix(s, inner, n_quad=QUAD_N)


@lru_cache(maxsize=None)
def circle_uniform_space(n_panels, ell):
    m = initial_mesh(geom("circle"), n_panels)
    return build_space(m, ell)


@lru_cache(maxsize=None)
def circle_uniform_operators(n_panels, ell):
    return assemble_operator_pair(circle_uniform_space(n_panels, ell), QUAD_N, ALPHA)


def faddeev_leverrier(A):
    """Characteristic polynomial coefficients (monic, descending powers)
    via trace recursion; independent of any eigensolver."""
    n = A.shape[0]
    coeffs = [1.0]
    Mk = np.zeros_like(A)
    c = 1.0
    I = np.eye(n)
    for k in range(1, n + 1):
        Mk = A @ Mk + c * I
        c = -np.trace(A @ Mk) / k
        coeffs.append(c)
    return np.array(coeffs)
