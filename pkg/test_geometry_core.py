import numpy as np
import pytest

from conegeom.core.errors import ChartDegeneracyError, DomainError
from conegeom.geometry import jets
from conegeom.geometry.cone import PerturbedCapDomain, build_cone
from conegeom.geometry.core import (
    Orientation,
    PlanarChart,
    PointChart,
    chart_jet,
    curvature_at,
    evaluate_points,
    jet_geometry,
    orthonormal_frame,
    tangential_divergence,
)
from conegeom.geometry.quadrature import random_interior_params
from conegeom.geometry.surfaces import build_polar_graph, build_profile, spherical_sector

rng = np.random.default_rng(7)


# --- Jets ---


def test_jet_partials_of_a_product():
    u = rng.uniform(-1.0, 1.0, (6, 2))
    a, b = jets.variables(u, order=3)
    f = jets.sin(a) * jets.exp(b) + a**2 * b
    s, c, e = np.sin(u[:, 0]), np.cos(u[:, 0]), np.exp(u[:, 1])
    x, y = u[:, 0], u[:, 1]
    assert np.allclose(f.value, s * e + x**2 * y, atol=1e-14)
    assert np.allclose(f.derivative((1, 0)), c * e + 2 * x * y, atol=1e-13)
    assert np.allclose(f.derivative((0, 1)), s * e + x**2, atol=1e-13)
    assert np.allclose(f.derivative((1, 1)), c * e + 2 * x, atol=1e-13)
    assert np.allclose(f.derivative((2, 1)), -s * e + 2, atol=1e-12)
    assert np.allclose(f.derivative((0, 3)), s * e, atol=1e-12)


def test_jet_division_and_powers():
    u = rng.uniform(0.2, 2.0, (5, 1))
    (t,) = jets.variables(u, order=2)
    x = u[:, 0]
    g = 1.0 / (1.0 + t * t)
    assert np.allclose(g.derivative((1,)), -2 * x / (1 + x**2) ** 2, atol=1e-13)
    r = jets.sqrt(t)
    assert np.allclose(r.derivative((2,)), -0.25 * x**-1.5, atol=1e-12)
    assert np.allclose((t**-2).derivative((1,)), -2 * x**-3, atol=1e-12)


def test_mixed_order_jets_truncate_to_the_lower_order():
    u = rng.uniform(-1.0, 1.0, (3, 2))
    high = jets.variables(u, order=3)[0]
    low = jets.variables(u, order=1)[1]
    assert (high * low).order == 1
    assert (high + low).order == 1


def test_series_helpers_match_closed_forms():
    q = np.linspace(0.0, 6.0, 13)
    root = np.sqrt(q)
    expected = np.where(q > 0, np.sin(root) / np.where(q > 0, root, 1.0), 1.0)
    assert np.allclose(jets.sin_root_over_root(q), expected, atol=1e-13)
    assert np.allclose(jets.cos_root(q), np.cos(root), atol=1e-13)


# --- Charts and curvature ---


def test_sphere_curvature(convex_cone):
    surface = spherical_sector(convex_cone, 2.0)
    params = random_interior_params(surface.domain, 50, seed=1)
    point = curvature_at(chart_jet(surface, params))
    assert np.allclose(point.mean_curvature, 0.5, atol=1e-12)
    assert np.allclose(point.sigma2, 0.25, atol=1e-12)
    assert np.allclose(point.support, 2.0, atol=1e-12)
    assert np.allclose(point.principal_curvatures(), 0.5, atol=1e-12)
    assert np.allclose(point.nu, point.x / 2.0, atol=1e-12)


def test_reversed_orientation_flips_mean_curvature(convex_bump):
    params = random_interior_params(convex_bump.domain, 20, seed=2)
    jet = chart_jet(convex_bump, params)
    outward = curvature_at(jet)
    reversed_ = curvature_at(jet, Orientation.REVERSED)
    chart = curvature_at(jet, Orientation.CHART)
    assert np.allclose(reversed_.mean_curvature, -chart.mean_curvature, atol=1e-13)
    assert np.all(outward.support > 0)


def test_planar_chart_is_flat():
    u = rng.uniform(0.0, 1.0, (10, 2))
    point = curvature_at(chart_jet(PlanarChart(3), u))
    assert np.allclose(point.second_form, 0.0)
    assert np.allclose(point.mean_curvature, 0.0)
    assert np.allclose(point.area_weight, 1.0)


def _lateral_nodes(count: int, seed: int) -> np.ndarray:
    nodes = np.random.default_rng(seed)
    return np.stack([nodes.uniform(0.5, 2.0, count), nodes.uniform(0.0, 2 * np.pi, count)], axis=-1)


@pytest.mark.parametrize("family", ["convex_sector", "convex_bump", "linear_violation", "perturbed_lateral"])
def test_point_chart_agrees_with_closed_form(request, family):
    if family == "perturbed_lateral":
        chart = build_cone(PerturbedCapDomain(1.2, 0.2, 3)).lateral_chart()
        params = _lateral_nodes(120, seed=3)
    else:
        chart = request.getfixturevalue(family)
        params = random_interior_params(chart.domain, 120, seed=3)
    sampled = PointChart(lambda u: evaluate_points(chart, u), ambient_dim=3, step=1e-3)
    exact = chart_jet(chart, params)
    approx = chart_jet(sampled, params)
    assert np.abs(approx.dx - exact.dx).max() <= 1e-6 * np.abs(exact.dx).max()
    assert np.abs(approx.ddx - exact.ddx).max() <= 1e-6 * np.abs(exact.ddx).max()
    if family != "perturbed_lateral":
        assert np.allclose(curvature_at(approx).mean_curvature, curvature_at(exact).mean_curvature, atol=1e-6)


def test_degenerate_chart_is_rejected():
    chart = PointChart(lambda u: np.stack([u[:, 0], u[:, 0], 0 * u[:, 0]], axis=-1), ambient_dim=3)
    with pytest.raises(ChartDegeneracyError):
        chart_jet(chart, rng.uniform(0.0, 1.0, (4, 2)))


def test_points_outside_the_domain_are_rejected(convex_sector):
    with pytest.raises(DomainError):
        chart_jet(convex_sector, np.array([[3.0, 0.0]]))


# --- Field calculus ---


def test_divergence_of_the_position_field_is_the_dimension(nonconvex_bump):
    params = random_interior_params(nonconvex_bump.domain, 40, seed=4)
    jet = chart_jet(nonconvex_bump, params, order=2)
    assert np.allclose(tangential_divergence(list(jet.position), jet), 2.0, atol=1e-12)


def test_jet_geometry_matches_pointwise_curvature(convex_bump):
    params = random_interior_params(convex_bump.domain, 40, seed=5)
    jet = chart_jet(convex_bump, params, order=3)
    geometry = jet_geometry(jet)
    point = curvature_at(jet)
    assert np.allclose(geometry.mean_curvature.value, point.mean_curvature, atol=1e-12)
    assert np.allclose(jets.values(geometry.normal), point.nu, atol=1e-13)


def test_orthonormal_frame(convex_bump):
    params = random_interior_params(convex_bump.domain, 25, seed=6)
    frame = orthonormal_frame(chart_jet(convex_bump, params))
    gram = np.einsum("bki,bkj->bij", frame.vectors, frame.vectors)
    assert np.allclose(gram, np.eye(2)[None], atol=1e-13)


def test_frame_gradient_of_a_constant_vanishes(convex_bump):
    params = random_interior_params(convex_bump.domain, 25, seed=8)
    jet = chart_jet(convex_bump, params)
    constant = jet.position[0] * 0.0 + 3.0
    assert np.allclose(orthonormal_frame(jet).gradient(constant), 0.0, atol=1e-14)


def test_frame_gradient_of_a_linear_function_on_the_sphere(convex_sector):
    c = np.array([0.3, -1.0, 2.0])
    params = random_interior_params(convex_sector.domain, 40, seed=9)
    jet = chart_jet(convex_sector, params)
    f = jet.position[0] * c[0] + jet.position[1] * c[1] + jet.position[2] * c[2]
    nu = curvature_at(jet).nu
    expected = c[None, :] - (nu @ c)[:, None] * nu
    assert np.allclose(orthonormal_frame(jet).gradient(f), expected, atol=1e-13)


# --- Scaling ---


@pytest.mark.parametrize("R", [0.5, 2.0, 3.0])
def test_curvature_scales_with_the_surface(convex_cone, R):
    params = random_interior_params(convex_cone.domain, 30, seed=10)
    base = curvature_at(chart_jet(build_polar_graph(convex_cone, build_profile("bump", R=1.0, eps=0.1, k=2)), params))
    scaled = curvature_at(chart_jet(build_polar_graph(convex_cone, build_profile("bump", R=R, eps=0.1, k=2)), params))
    assert np.allclose(scaled.mean_curvature, base.mean_curvature / R, rtol=1e-12, atol=1e-14)
    assert np.allclose(scaled.sigma2, base.sigma2 / R**2, rtol=1e-12, atol=1e-14)
    assert np.allclose(scaled.area_weight, base.area_weight * R**2, rtol=1e-12, atol=1e-14)
    assert np.allclose(scaled.support, base.support * R, rtol=1e-12, atol=1e-14)
