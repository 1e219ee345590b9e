import numpy as np
import pytest
from scipy.special import ellipe

from calderon_bench.geometry import make_geometry
from calderon_bench.mesh import initial_mesh, refine
from calderon_bench.quadrature import adaptive_integrate, gauss_rule, pair_rule

rng = np.random.RandomState(20240817)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 12, 16, 32, 64])
def test_gauss_rule_basics(n):
    g = gauss_rule(n)
    assert g.nodes.size == n
    assert np.all(g.weights > 0)
    assert abs(g.weights.sum() - 1.0) < 1e-14
    # declared polynomial exactness
    for p in range(g.degree + 1):
        assert abs(np.dot(g.weights, g.nodes ** p) - 1 / (p + 1)) < 1e-13 / (p + 1)


def test_gauss_rule_midpoint_and_cubics():
    g1 = gauss_rule(1)
    assert g1.nodes[0] == pytest.approx(0.5) and g1.weights[0] == pytest.approx(1.0)
    g2 = gauss_rule(2)
    assert np.dot(g2.weights, g2.nodes ** 3) == pytest.approx(0.25, abs=1e-15)
    g16 = gauss_rule(16)
    assert np.dot(g16.weights, g16.nodes ** 15) == pytest.approx(1 / 16, abs=1e-14)


def test_gauss_rule_rejects_out_of_range():
    with pytest.raises(ValueError):
        gauss_rule(0)
    with pytest.raises(ValueError):
        gauss_rule(65)


def test_pair_rule_separated_is_tensor_gauss():
    r = pair_rule("separated", 8)
    assert r.weights.size == 64
    assert abs(r.weights.sum() - 1.0) < 1e-14


def test_pair_rule_rejects_bad_input():
    with pytest.raises(ValueError):
        pair_rule("separated", 3)
    with pytest.raises(ValueError):
        pair_rule("diagonal", 8)


def test_identical_rule_log_kernel():
    # int_0^1 int_0^1 log|t-u| = -3/2 (closed form)
    r = pair_rule("identical", 16)
    val = np.dot(r.weights, np.log(np.abs(r.tnodes - r.unodes)))
    assert abs(val / -1.5 - 1) < 1e-10


def test_adjacent_rule_log_kernel():
    # panels [0,1] and [1,2]: int int log(u+1-t) = 2 ln 2 - 3/2
    r = pair_rule("adjacent", 16)
    val = np.dot(r.weights, np.log(np.abs(1.0 + r.unodes - r.tnodes)))
    exact = 2 * np.log(2) - 1.5
    assert abs(val / exact - 1) < 1e-9
    oracle = adaptive_integrate(
        lambda t, u: np.log(np.abs(1.0 + u - t)), ((0, 1), (0, 1)), tol=1e-11
    )
    assert abs(val / oracle - 1) < 1e-9


def test_adaptive_basics():
    assert adaptive_integrate(lambda x: np.ones_like(x), (0, 1)) == pytest.approx(1.0)
    assert adaptive_integrate(np.log, (0.0, 1.0), tol=1e-11) == pytest.approx(-1.0, abs=1e-10)


def test_adaptive_ellipse_arc_length():
    g = make_geometry("ellipse", 0.5, 2.0)
    c = g.charts[0]
    val = adaptive_integrate(
        lambda t: np.linalg.norm(c.velocity(t), axis=-1), (c.t0, c.t1), tol=1e-12
    )
    series = 4 * 0.25 * ellipe(1 - (0.125 / 0.25) ** 2)
    assert abs(val / series - 1) < 1e-10


# ---------------------------------------------------------------------------
# certification of the pair rules against the adaptive oracle on realistic
# panel-pair configurations drawn from locally refined meshes


def _random_meshes():
    out = []
    for kind in ("square", "ellipse"):
        g = make_geometry(kind, 0.5, 2.0)
        m = initial_mesh(g, 8 if kind == "ellipse" else 2)
        for _ in range(3):
            marked = rng.choice(m.n_panels, size=max(1, m.n_panels // 4), replace=False)
            m = refine(m, marked.tolist())
        out.append(m)
    return out


def _pair_integrand(m, p, q):
    """log-kernel integrand over the unit square for panels p, q, including
    speeds and interval lengths (the full change of variables)."""
    g = m.geometry
    pa, pb = m.panels[p], m.panels[q]
    ca, cb = g.charts[pa.chart], g.charts[pb.chart]
    dta, dtb = pa.t1 - pa.t0, pb.t1 - pb.t0

    def f(t, u):
        ta = pa.t0 + dta * np.asarray(t)
        tb = pb.t0 + dtb * np.asarray(u)
        x, y = ca.point(ta), cb.point(tb)
        r2 = ((x - y) ** 2).sum(axis=-1)
        sp = np.linalg.norm(ca.velocity(ta), axis=-1) * np.linalg.norm(
            cb.velocity(tb), axis=-1
        )
        return 0.5 * np.log(np.maximum(r2, 1e-300)) * sp * dta * dtb

    return f


def _rule_value(rule, f):
    return np.dot(rule.weights, f(rule.tnodes, rule.unodes))


_INNER = gauss_rule(20)


def _composite_line(f_of_t, lo, hi, pieces=4):
    """Fixed composite Gauss for an analytic integrand; noise-free so the
    outer adaptive pass sees clean values."""
    edges = np.linspace(lo, hi, pieces + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        total += (b - a) * np.dot(_INNER.weights, f_of_t(a + (b - a) * _INNER.nodes))
    return total


def _oracle_separated(f, tol=3e-11):
    def outer(us):
        us = np.atleast_1d(us)
        return np.array(
            [_composite_line(lambda t, u=u: f(t, np.full_like(t, u)), 0.0, 1.0)
             for u in us]
        )

    return adaptive_integrate(outer, (0.0, 1.0), tol=tol)


def _oracle_identical(f, tol=3e-11):
    # difference variable d = u - t: the inner t-integral is analytic while
    # the singularity becomes a 1-D endpoint singularity at d = 0
    def gfun(ds):
        ds = np.atleast_1d(ds)
        out = np.empty(ds.size)
        for i, d in enumerate(ds):
            lo, hi = max(0.0, -d), min(1.0, 1.0 - d)
            out[i] = (
                _composite_line(lambda t, d=d: f(t, t + d), lo, hi) if hi > lo else 0.0
            )
        return out

    return adaptive_integrate(gfun, (-1.0, 0.0), tol=tol) + adaptive_integrate(
        gfun, (0.0, 1.0), tol=tol
    )


def test_pair_rules_match_adaptive_oracle():
    meshes = _random_meshes()
    rules = {rel: pair_rule(rel, 12) for rel in ("separated", "adjacent", "identical")}
    checked = 0
    for m in meshes:
        P = m.n_panels
        # separated pairs (cyclic distance >= 2)
        count = 0
        while count < 35:
            p, q = rng.randint(0, P, size=2)
            if min((p - q) % P, (q - p) % P) < 2:
                continue
            f = _pair_integrand(m, p, q)
            val = _rule_value(rules["separated"], f)
            ref = _oracle_separated(f)
            assert abs(val - ref) <= 1e-9 * max(abs(ref), 1e-6), (m.geometry.kind, p, q)
            count += 1
            checked += 1
        # adjacent pairs (p, p+1): singular corner (1, 0)
        for p in rng.choice(P, size=10, replace=False):
            q = (p + 1) % P
            f = _pair_integrand(m, p, q)
            val = _rule_value(rules["adjacent"], f)
            ref = adaptive_integrate(f, ((0, 1), (0, 1)), tol=1e-11)
            assert abs(val - ref) <= 1e-9 * max(abs(ref), 1e-6), (m.geometry.kind, p)
            checked += 1
        # identical pairs
        for p in rng.choice(P, size=5, replace=False):
            f = _pair_integrand(m, int(p), int(p))
            val = _rule_value(rules["identical"], f)
            ref = _oracle_identical(f)
            assert abs(val - ref) <= 1e-9 * max(abs(ref), 1e-6), (m.geometry.kind, p)
            checked += 1
    assert checked >= 100
