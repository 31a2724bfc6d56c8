import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.sparse.linalg import eigsh
from scipy.special import lpmv

from conegeom.core.errors import DimensionError, MeshError
from conegeom.geometry.cone import CapDomain, PerturbedCapDomain, build_cone
from conegeom.geometry.core import PlanarChart
from conegeom.geometry.surfaces import spherical_sector
from conegeom.services.spectral_service import (
    SurfaceMesh,
    assemble_operators,
    audit_mesh,
    build_mesh,
    lambda1_neumann,
    lambda1_refinement,
    polar_mesh,
    square_mesh,
)


@pytest.fixture(scope="session")
def hemisphere():
    return spherical_sector(build_cone(CapDomain(math.pi / 2)), 1.0)


def cap_lambda1(alpha: float) -> float:
    """First Neumann eigenvalue of a geodesic cap from the zero of d/ds P_nu^1(cos s) at s = alpha."""

    def slope(nu: float) -> float:
        h = 1e-6
        return (lpmv(1, nu, math.cos(alpha + h)) - lpmv(1, nu, math.cos(alpha - h))) / (2 * h)

    nu = brentq(slope, 1.01, 3.0, xtol=1e-14)
    return nu * (nu + 1)


# --- Meshes ---


def test_polar_mesh_counts(convex_sector):
    for rings in (1, 4, 7):
        mesh = polar_mesh(convex_sector, rings)
        assert len(mesh.vertices) == 1 + 3 * rings * (rings + 1)
        assert len(mesh.triangles) == 6 * rings**2
        assert mesh.boundary.sum() == 6 * rings
        assert np.all(mesh.signed_areas() > 0)


@pytest.fixture(scope="module")
def wavy_sphere():
    return spherical_sector(build_cone(PerturbedCapDomain(1.0, 0.2, 3)), 1.0)


@pytest.mark.parametrize("target_h", [0.2, 0.1, 0.05])
def test_build_mesh_honours_the_edge_bound(wavy_sphere, target_h):
    mesh = build_mesh(wavy_sphere, target_h)
    assert mesh.h <= target_h
    assert 2.0 < len(mesh.vertices) * (target_h / 1.2) ** 2 < 30.0


def test_build_mesh_vertex_count_is_quadratic(wavy_sphere):
    coarse, fine = build_mesh(wavy_sphere, 0.2), build_mesh(wavy_sphere, 0.1)
    assert 3.0 < len(fine.vertices) / len(coarse.vertices) < 5.0


def test_build_mesh_boundary_follows_the_cone(wavy_sphere):
    mesh = build_mesh(wavy_sphere, 0.1)
    u = mesh.vertices[mesh.boundary]
    s = np.hypot(u[:, 0], u[:, 1])
    phi = np.arctan2(u[:, 1], u[:, 0])
    assert np.max(np.abs(s - (1.0 + 0.2 * np.cos(3 * phi)))) < 1e-10


def test_build_mesh_rejects_nonpositive_size(wavy_sphere):
    with pytest.raises(MeshError):
        build_mesh(wavy_sphere, 0.0)


def test_meshes_are_built_for_surfaces_only(wedge_graph):
    with pytest.raises(DimensionError):
        polar_mesh(wedge_graph, 4)


def test_inverted_triangles_are_rejected():
    mesh = square_mesh(2)
    flipped = mesh.triangles.copy()
    flipped[0] = mesh.triangles[0][::-1]
    with pytest.raises(MeshError):
        audit_mesh(SurfaceMesh(vertices=mesh.vertices, triangles=flipped, boundary=mesh.boundary, rings=2))


def test_mass_matrix_integrates_area(convex_sector):
    _, mass = assemble_operators(convex_sector, polar_mesh(convex_sector, 16))
    ones = np.ones(mass.shape[0])
    assert ones @ (mass @ ones) == pytest.approx(2 * math.pi * (1 - math.cos(1.2)), rel=5e-3)


# --- Eigenvalues ---


def test_flat_square():
    mode = lambda1_neumann(PlanarChart(3), square_mesh(24))
    assert mode.result.lambda1 == pytest.approx(math.pi**2, rel=1e-2)
    assert mode.result.constant_overlap < 1e-8


def test_hemisphere_converges_to_two(hemisphere):
    study = lambda1_refinement(hemisphere, [8, 16, 32])
    assert study.lambda1_extrapolated == pytest.approx(2.0, rel=1e-2)
    assert study.lambda1_domain == pytest.approx(study.lambda1_extrapolated)
    assert 1.3 < study.observed_order < 2.7
    assert all(r.constant_overlap < 1e-8 for r in study.levels)


def test_cap_against_legendre_oracle():
    sector = spherical_sector(build_cone(CapDomain(1.0)), 1.0)
    study = lambda1_refinement(sector, [8, 16, 32])
    assert study.lambda1_extrapolated == pytest.approx(cap_lambda1(1.0), rel=2e-3)


def test_matches_shift_invert_lanczos(convex_bump):
    mesh = polar_mesh(convex_bump, 10)
    mode = lambda1_neumann(convex_bump, mesh)
    stiffness, mass = assemble_operators(convex_bump, mesh)
    values = np.sort(eigsh(stiffness, k=3, M=mass, sigma=-0.01, return_eigenvectors=False))
    assert mode.result.lambda1 == pytest.approx(values[1], rel=1e-8)
    assert mode.result.residual < 1e-4


def test_eigenvalue_scales_with_radius(convex_cone):
    small_sector, large_sector = spherical_sector(convex_cone, 1.0), spherical_sector(convex_cone, 2.0)
    small = lambda1_neumann(small_sector, polar_mesh(small_sector, 8))
    large = lambda1_neumann(large_sector, polar_mesh(large_sector, 8))
    assert 4 * large.result.lambda1 == pytest.approx(small.result.lambda1, rel=1e-8)


def test_convex_caps_respect_the_lower_bound(convex_sector):
    study = lambda1_refinement(convex_sector, [8, 16])
    assert study.lambda1_domain >= 1.98
    assert study.observed_order is None


def test_refinement_accepts_a_mapper(convex_sector):
    calls = []

    def recording_map(fn, meshes):
        calls.extend(mesh.rings for mesh in meshes)
        return map(fn, meshes)

    study = lambda1_refinement(convex_sector, [4, 8], mapper=recording_map)
    assert calls == [4, 8]
    assert [r.rings for r in study.levels] == [4, 8]


def test_refinement_from_target_edge_lengths(hemisphere):
    study = lambda1_refinement(hemisphere, target_h=[0.3, 0.15])
    assert [r.h <= h for r, h in zip(study.levels, [0.3, 0.15])] == [True, True]
    assert study.levels[0].rings < study.levels[1].rings
    assert study.lambda1_extrapolated == pytest.approx(2.0, rel=2e-2)


def test_refinement_must_refine(convex_sector):
    with pytest.raises(MeshError):
        lambda1_refinement(convex_sector, [8, 8])
