import math

import numpy as np
import pytest

from conegeom.core.errors import QuadratureError
from conegeom.geometry.quadrature import (
    build_rule,
    convergence_table,
    integrate_surface,
    refinement_levels,
    sphere_rule,
    tabulate,
)
from conegeom.geometry.surfaces import spherical_sector

from conftest import desk_rule


@pytest.mark.parametrize("alpha_fixture,alpha", [("convex_sector", 1.2), ("nonconvex_sector", 2.0)])
def test_sector_area(request, alpha_fixture, alpha):
    sector = request.getfixturevalue(alpha_fixture)
    area = integrate_surface(sector, desk_rule(sector), lambda p: 1.0)
    assert area == pytest.approx(2 * math.pi * (1 - math.cos(alpha)), rel=1e-12)


def test_wedge_arc_length(wedge_cone):
    arc = spherical_sector(wedge_cone, 3.0)
    rule = build_rule(arc.domain, n_s=16)
    assert rule.boundary_weights.sum() == 2.0
    assert integrate_surface(arc, rule, lambda p: 1.0) == pytest.approx(3.0, rel=1e-13)


def test_refinement_doubles_resolution(convex_cone):
    rules = refinement_levels(convex_cone.domain, 3, n_phi=8, n_s=4, n_b=16)
    assert [r.resolution for r in rules] == ["8x4/16", "16x8/32", "32x16/64"]
    assert [r.level for r in rules] == [0, 1, 2]
    assert len(rules[2].params) == 32 * 16


def test_sphere_rule_averages():
    for dim in (2, 3):
        rule = sphere_rule(dim)
        assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.allclose(np.linalg.norm(rule.directions, axis=1), 1.0)
        second_moment = np.einsum("b,bi,bj->ij", rule.weights, rule.directions, rule.directions)
        assert np.allclose(second_moment, np.eye(dim) / dim, atol=1e-13)


def test_nonfinite_integrand_is_an_error(convex_sector):
    with pytest.raises(QuadratureError):
        integrate_surface(convex_sector, desk_rule(convex_sector, 8, 4, 16), lambda p: np.full(len(p.x), np.nan))


def test_integration_is_independent_of_node_order(convex_bump):
    rule = desk_rule(convex_bump, 16, 8, 32)
    forward = integrate_surface(convex_bump, rule, lambda p: p.mean_curvature)
    order = np.random.default_rng(3).permutation(len(rule.weights))
    shuffled = type(rule)(
        params=rule.params[order],
        weights=rule.weights[order],
        boundary_angles=rule.boundary_angles,
        boundary_weights=rule.boundary_weights,
        n_phi=rule.n_phi,
        n_s=rule.n_s,
        n_b=rule.n_b,
    )
    assert integrate_surface(convex_bump, shuffled, lambda p: p.mean_curvature) == pytest.approx(forward, rel=1e-14)


# --- Refinement tables ---


def test_tabulate_reports_second_order():
    values = [1 + 4.0**-k for k in range(4)]
    table = tabulate("synthetic", ["a", "b", "c", "d"], values)
    assert table.observed_order == pytest.approx(2.0)
    assert table.rows[0].order is None and table.rows[1].order is None
    exact = tabulate("synthetic", ["a", "b", "c", "d"], values, reference=1.0)
    assert [r.order for r in exact.rows[1:]] == pytest.approx([2.0, 2.0, 2.0])


def test_tabulate_needs_three_levels():
    assert tabulate("two", ["a", "b"], [1.5, 1.1]).observed_order is None


def test_tabulate_skips_orders_at_roundoff():
    table = tabulate("flat", ["a", "b", "c"], [2.0, 2.0, 2.0], reference=2.0)
    assert all(r.order is None for r in table.rows)
    assert table.observed_order is None


def test_convergence_table_of_cap_area(convex_sector):
    rules = refinement_levels(convex_sector.domain, 3, n_phi=4, n_s=2, n_b=8)
    table = convergence_table(
        lambda rule: integrate_surface(convex_sector, rule, lambda p: 1.0),
        rules,
        reference=2 * math.pi * (1 - math.cos(1.2)),
        quantity="area",
    )
    assert table.quantity == "area"
    errors = [row.error for row in table.rows]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-8
