import numpy as np
import pytest

from conegeom.core.errors import DimensionError
from conegeom.services.stability_service import frame_energy_check, reilly_average_check, stability_report

from conftest import desk_rule


# --- Second variation and the eigenvalue inequality ---


@pytest.mark.parametrize("sector_fixture", ["convex_sector", "nonconvex_sector"])
def test_sectors_are_stable_critical_points(request, sector_fixture):
    sector = request.getfixturevalue(sector_fixture)
    report = stability_report(sector, desk_rule(sector), lambda1=2.5)
    assert report.label == "theorem-applicable"
    assert report.mean_curvature_bar == pytest.approx(1.0, rel=1e-12)
    assert abs(report.rel_lhs) < 1e-9
    assert abs(report.rel_rhs) < 1e-9
    assert abs(report.q_form) < 1e-9
    assert abs(report.variation_integral) < 1e-12
    assert report.chain_error < 1e-12


def test_convex_sector_flags(convex_sector):
    report = stability_report(convex_sector, desk_rule(convex_sector), lambda1=2.5)
    assert report.convex_cone and report.half_space
    assert report.convex_rel_lhs_nonpositive
    assert report.convex_lambda1_bound
    assert report.corollary_applicable


def test_nonconvex_cone_leaves_convex_flags_unset(nonconvex_sector):
    report = stability_report(nonconvex_sector, desk_rule(nonconvex_sector), lambda1=1.0)
    assert report.convex_rel_lhs_nonpositive is None
    assert report.convex_lambda1_bound is None
    assert not report.corollary_applicable


def test_bump_is_diagnostic(convex_bump):
    report = stability_report(convex_bump, desk_rule(convex_bump), lambda1=2.0, lambda1_delta=0.01)
    assert report.label == "diagnostic"
    assert report.cmc_deviation > 1e-3
    assert report.chain_error < 1e-12
    assert report.poincare_margin > 0
    assert report.margin_low <= report.margin <= report.margin_high
    assert len(report.field_average) == 3


def test_stability_needs_three_dimensions(wedge_graph):
    with pytest.raises(DimensionError):
        stability_report(wedge_graph, desk_rule(wedge_graph), lambda1=1.0)


# --- Algebraic identities ---


@pytest.mark.parametrize("w", [[1.0, 2.0, 3.0], [3.0, -1.0], [0.0, 0.0, 0.0]])
def test_sphere_average_of_squared_projection(w):
    assert reilly_average_check(w) < 1e-13


def test_frame_energy_on_a_sector(convex_sector):
    flat = frame_energy_check(convex_sector, 1.0, count=30, seed=1)
    assert flat.max_error < 1e-12
    assert flat.max_cmc_form_error is not None and flat.max_cmc_form_error < 1e-12
    normal_only = frame_energy_check(convex_sector, 0.0, count=30, seed=1)
    assert normal_only.max_error < 1e-12
    assert normal_only.max_cmc_form_error is None


def test_frame_energy_on_a_bump(nonconvex_bump):
    record = frame_energy_check(nonconvex_bump, 0.5, count=40, seed=2)
    assert record.nodes == 40
    assert record.max_error < 1e-10
    assert record.max_cmc_form_error is None
    assert np.isfinite(record.max_error)
