import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cellfree_urllc.socp import ConeSpec, Scaling, _Soc, dense_kkt, max_step, min_eigenvalue, solve_conic


def random_problem(rng, n=6, n_lin=3, dims=(4, 3, 5), radius=3.0):
    """Strictly feasible, bounded SOCP: random cones plus ||x|| <= radius."""
    dims = tuple(dims) + (n + 1,)
    m = n_lin + sum(dims)
    G = rng.standard_normal((m, n))
    x0 = 0.1 * rng.standard_normal(n)
    s0 = np.zeros(m)
    s0[:n_lin] = rng.uniform(0.5, 1.5, n_lin)
    pos = n_lin
    for d in dims[:-1]:
        tail = rng.standard_normal(d - 1)
        s0[pos] = np.linalg.norm(tail) + rng.uniform(0.5, 1.5)
        s0[pos + 1 : pos + d] = tail
        pos += d
    # last cone: (radius, x)
    G[pos:] = 0.0
    G[pos + 1 :, :] = -np.eye(n)
    s0[pos] = radius
    s0[pos + 1 :] = x0
    h = G @ x0 + s0
    c = rng.standard_normal(n)
    return c, G, h, ConeSpec(n_lin, dims)


def in_cone(u, spec, tol):
    soc = _Soc(spec)
    return np.all(min_eigenvalue(soc, u) >= -tol)


def test_box_lp_closed_form(rng):
    n = 5
    c = rng.standard_normal(n)
    G = np.vstack([np.eye(n), -np.eye(n)])
    h = np.ones(2 * n)
    res = solve_conic(c, G, h, ConeSpec(2 * n))
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, -np.sign(c), atol=1e-6)
    assert res.primal_objective == pytest.approx(-np.abs(c).sum(), rel=1e-7)


def test_ball_closed_form(rng):
    n = 4
    c = rng.standard_normal(n)
    G = np.vstack([np.zeros((1, n)), -np.eye(n)])
    h = np.zeros(n + 1)
    h[0] = 2.0
    res = solve_conic(c, G, h, ConeSpec(0, (n + 1,)))
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, -2.0 * c / np.linalg.norm(c), atol=1e-6)


def test_rotated_cone_closed_form():
    # minimize r subject to r * y >= 1, y <= 4  ->  r = 1/4
    # (r + y, 2, r - y) in SOC  <=>  r y >= 1, r + y >= 0
    c = np.array([1.0, 0.0])
    G = np.array([[0.0, 1.0], [-1.0, -1.0], [0.0, 0.0], [-1.0, 1.0]])
    h = np.array([4.0, 0.0, 2.0, 0.0])
    res = solve_conic(c, G, h, ConeSpec(1, (3,)))
    assert res.status == "optimal"
    np.testing.assert_allclose(res.x, [0.25, 4.0], atol=1e-6)


@pytest.mark.parametrize("seed", range(8))
def test_kkt_certificate(seed):
    rng = np.random.default_rng(seed)
    c, G, h, spec = random_problem(rng)
    res = solve_conic(c, G, h, spec, tol=1e-9)
    assert res.status == "optimal"
    assert in_cone(res.s, spec, 1e-12) and in_cone(res.z, spec, 1e-12)
    assert np.linalg.norm(G.T @ res.z + c) < 1e-7
    assert np.linalg.norm(G @ res.x + res.s - h) < 1e-7 * max(1, np.linalg.norm(h))
    # weak duality gap closes
    assert abs(c @ res.x + h @ res.z) < 1e-7 * max(1.0, abs(c @ res.x))
    assert res.kkt_residual <= 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_matches_cvxpy(seed):
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(100 + seed)
    c, G, h, spec = random_problem(rng, n=7, n_lin=4, dims=(3, 6, 2))
    x = cp.Variable(G.shape[1])
    cons = [G[: spec.n_lin] @ x <= h[: spec.n_lin]]
    pos = spec.n_lin
    for d in spec.soc_dims:
        r = slice(pos, pos + d)
        u = h[r] - G[r] @ x
        cons.append(cp.SOC(u[0], u[1:]))
        pos += d
    prob = cp.Problem(cp.Minimize(c @ x), cons)
    prob.solve(solver=cp.CLARABEL)
    res = solve_conic(c, G, h, spec, tol=1e-9)
    assert res.primal_objective == pytest.approx(prob.value, abs=1e-6)


def test_warm_start_and_custom_factory(rng):
    c, G, h, spec = random_problem(rng)
    cold = solve_conic(c, G, h, spec)
    warm = solve_conic(c, G, h, spec, x0=cold.x * 0.99)
    hooked = solve_conic(c, G, h, spec, kkt=lambda soc: dense_kkt(G, soc))
    assert warm.status == hooked.status == "optimal"
    assert warm.primal_objective == pytest.approx(cold.primal_objective, abs=1e-6)
    assert hooked.primal_objective == pytest.approx(cold.primal_objective, abs=1e-9)


def test_dimension_checks():
    with pytest.raises(ValueError):
        solve_conic(np.ones(2), np.ones((3, 2)), np.ones(2), ConeSpec(3))
    with pytest.raises(ValueError):
        ConeSpec(-1)
    with pytest.raises(ValueError):
        ConeSpec(0, (0,))


def interior_point(rng, spec):
    soc = _Soc(spec)
    u = np.empty(spec.m)
    u[: spec.n_lin] = rng.uniform(0.1, 2.0, spec.n_lin)
    pos = spec.n_lin
    for d in spec.soc_dims:
        tail = rng.standard_normal(d - 1)
        u[pos] = np.linalg.norm(tail) + rng.uniform(0.05, 1.0)
        u[pos + 1 : pos + d] = tail
        pos += d
    return u


@given(st.integers(0, 10_000))
def test_nt_scaling_identities(seed):
    rng = np.random.default_rng(seed)
    spec = ConeSpec(2, (3, 1 + rng.integers(1, 5), 4))
    s, z = interior_point(rng, spec), interior_point(rng, spec)
    soc = _Soc(spec)
    W = Scaling(soc, s, z)
    np.testing.assert_allclose(W.apply(z), W.apply_inv(s), rtol=1e-8, atol=1e-10)
    x = rng.standard_normal(spec.m)
    np.testing.assert_allclose(W.apply_inv(W.apply(x)), x, rtol=1e-8, atol=1e-10)
    X = rng.standard_normal((spec.m, 3))
    np.testing.assert_allclose(W.apply(X)[:, 1], W.apply(X[:, 1]), rtol=1e-12)
    # dense W^-2 blocks of the first SOC
    idx = spec.n_lin + np.arange(3)
    block = W.soc_inv_square_blocks(np.array([0]))[0]
    E = np.zeros((spec.m, 3))
    E[idx, np.arange(3)] = 1.0
    dense = W.apply_inv(W.apply_inv(E))[idx]
    np.testing.assert_allclose(block, dense, rtol=1e-8, atol=1e-10)


@given(st.integers(0, 10_000))
def test_max_step_hits_boundary(seed):
    rng = np.random.default_rng(seed)
    spec = ConeSpec(2, (3, 4))
    soc = _Soc(spec)
    u = interior_point(rng, spec)
    du = 3.0 * rng.standard_normal(spec.m)
    t = max_step(soc, u, du)
    if np.isfinite(t):
        assert min_eigenvalue(soc, u + t * du).min() == pytest.approx(0.0, abs=1e-8 * (1 + np.abs(u + t * du).max()))
        assert np.all(min_eigenvalue(soc, u + 0.999 * t * du) > -1e-12)
    else:
        assert np.all(min_eigenvalue(soc, u + 1e6 * du) >= 0)
