import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ranimport.dg import (DgSpace, FaceQuadrature, eval_basis, interpolate, jump_and_mean, l2_error,
                          line_rule, n_basis, triangle_rule)
from ranimport.geometry import FaceKind, build_disk_mesh

finite = st.floats(-1e3, 1e3, allow_nan=False)


def _random_ref_points(rng, n):
    p = rng.random((n, 2))
    flip = p.sum(1) > 1
    p[flip] = 1 - p[flip]
    return p


@pytest.mark.parametrize("order", range(0, 9))
def test_triangle_rule_exactness(order):
    rule = triangle_rule(order)
    assert rule.weights.sum() == pytest.approx(0.5, abs=1e-14)
    assert np.all(rule.weights > 0)
    x, y = rule.points.T
    for i in range(order + 1):
        for j in range(order + 1 - i):
            exact = math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)
            assert (rule.weights * x**i * y**j).sum() == pytest.approx(exact, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("order", range(0, 9))
def test_line_rule_exactness(order):
    rule = line_rule(order)
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    for k in range(order + 1):
        assert (rule.weights * rule.points**k).sum() == pytest.approx(1 / (k + 1), rel=1e-13)


def test_basis_sizes():
    assert [n_basis(m) for m in range(4)] == [1, 3, 6, 10]
    with pytest.raises(ValueError):
        eval_basis(-1, np.zeros((1, 2)))


def test_degree_zero_basis(rng=np.random.default_rng(0)):
    vals, grads = eval_basis(0, _random_ref_points(rng, 7))
    np.testing.assert_allclose(vals, 1.0)
    np.testing.assert_allclose(grads, 0.0)


@pytest.mark.parametrize("degree", [1, 2, 3])
def test_basis_orthonormal_in_mean_inner_product(degree):
    rule = triangle_rule(2 * degree)
    vals, _ = eval_basis(degree, rule.points)
    gram = 2.0 * np.einsum("q,qi,qj->ij", rule.weights, vals, vals)
    np.testing.assert_allclose(gram, np.eye(n_basis(degree)), atol=1e-12)


def test_degree_one_reproduces_x():
    rng = np.random.default_rng(1)
    rule = triangle_rule(4)
    vals, _ = eval_basis(1, rule.points)
    coeff = 2.0 * np.einsum("q,qi,q->i", rule.weights, vals, rule.points[:, 0])
    pts = _random_ref_points(rng, 5)
    v, _ = eval_basis(1, pts)
    np.testing.assert_allclose(v @ coeff, pts[:, 0], atol=1e-13)


def test_degree_two_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    pts = _random_ref_points(rng, 10) * 0.9 + 0.03
    _, g = eval_basis(2, pts)
    h = 1e-6
    for d in range(2):
        e = np.zeros(2)
        e[d] = h
        fd = (eval_basis(2, pts + e)[0] - eval_basis(2, pts - e)[0]) / (2 * h)
        np.testing.assert_allclose(g[..., d], fd, atol=1e-6)


def test_jump_and_mean_examples():
    j, m = jump_and_mean(5.0, 5.0, [1.0, 0.0])
    np.testing.assert_allclose(j, [0.0, 0.0])
    assert m == 5.0
    j, m = jump_and_mean(2.0, 0.0, [1.0, 0.0])
    np.testing.assert_allclose(j, [2.0, 0.0])
    assert m == 1.0


@settings(max_examples=100, deadline=None)
@given(finite, finite, st.floats(0, 2 * math.pi))
def test_jump_side_swap_symmetry(a, b, angle):
    n = np.array([math.cos(angle), math.sin(angle)])
    j1, m1 = jump_and_mean(a, b, n)
    j2, m2 = jump_and_mean(b, a, -n)
    np.testing.assert_allclose(j1, j2, rtol=1e-14, atol=1e-12)
    assert m1 == pytest.approx(m2)


def test_layout(coarse_mesh):
    space = DgSpace(coarse_mesh, n_species=6)
    assert space.n_dof == 3 * coarse_mesh.n_elements
    assert space.size == 6 * space.n_dof
    idx = space.dof_index[space.active]
    assert len(np.unique(idx)) == idx.size == space.n_dof


def test_mixed_degree_layout(geometry):
    mesh = build_disk_mesh(geometry, 2.0, 1)
    deg = mesh.degree.copy()
    deg[::2] = 2
    mixed = type(mesh)(mesh.vertices, mesh.elements, mesh.subdomain, deg, mesh.geometry)
    space = DgSpace(mixed)
    assert space.n_dof == int(sum(n_basis(int(m)) for m in deg))
    u = interpolate(space, lambda x, y: x * y)
    quadratic = deg == 2
    err = l2_error(space, u, lambda x, y: x * y, mask=quadratic)
    assert err < 1e-11


def test_interpolate_constant_and_linear(coarse_space):
    u = interpolate(coarse_space, lambda x, y: 3.0 + 0 * x)
    vol = coarse_space.volume()
    np.testing.assert_allclose(vol.values(coarse_space.padded(u)), 3.0, atol=1e-13)
    assert l2_error(coarse_space, interpolate(coarse_space, lambda x, y: x), lambda x, y: x) < 1e-12


def test_interpolate_rejects_nan(coarse_space):
    with pytest.raises(ValueError):
        interpolate(coarse_space, lambda x, y: np.full_like(x, np.nan))


@pytest.mark.parametrize("degree", [1, 2])
def test_projection_converges_at_order_m_plus_one(geometry, degree):
    errs, hs = [], []
    for h in (1.0, 0.5):
        mesh = build_disk_mesh(geometry, h, degree)
        space = DgSpace(mesh)
        errs.append(l2_error(space, interpolate(space, lambda x, y: np.sin(x)), lambda x, y: np.sin(x)))
        hs.append(math.sqrt(mesh.element_areas.sum() / mesh.n_elements))
    rate = math.log(errs[0] / errs[1]) / math.log(hs[0] / hs[1])
    assert rate > degree + 1 - 0.2


def test_continuous_function_has_no_jump(coarse_mesh):
    space = DgSpace(build_disk_mesh(coarse_mesh.geometry, 2.0, 2))
    u = interpolate(space, lambda x, y: 1 + x - 0.5 * x * y)
    fq = FaceQuadrature(space, space.mesh.faces_of_kind(FaceKind.INTERIOR))
    vals, _ = fq.traces(space.padded(u))
    np.testing.assert_allclose(vals[0], vals[1], atol=1e-12)


def test_face_points_agree_from_both_sides(coarse_space):
    fq = FaceQuadrature(coarse_space, coarse_space.mesh.faces_of_kind(FaceKind.INTERIOR))
    # trace evaluation of the element-wise linear field x from both neighbours
    u = interpolate(coarse_space, lambda x, y: x)
    vals, _ = fq.traces(coarse_space.padded(u))
    np.testing.assert_allclose(vals[0], fq.points[..., 0], atol=1e-12)
    np.testing.assert_allclose(vals[1], fq.points[..., 0], atol=1e-12)


def test_integrate_matches_area(coarse_space):
    one = interpolate(coarse_space, lambda x, y: 1.0 + 0 * x)
    assert coarse_space.integrate(one) == pytest.approx(coarse_space.mesh.element_areas.sum(), rel=1e-13)
