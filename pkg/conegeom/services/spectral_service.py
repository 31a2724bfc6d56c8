"""
First nonzero Neumann eigenvalue of the Laplace-Beltrami operator on Gamma, by piecewise-linear
finite elements on the parameter domain with the pulled-back metric.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import splu

from conegeom.core.config import settings
from conegeom.core.errors import ConvergenceError, DimensionError, MeshError
from conegeom.geometry.core import Chart, chart_jet, metric_tensor
from conegeom.geometry.quadrature import tabulate
from conegeom.geometry.surfaces import ConstantProfile, PolarGraphSurface
from conegeom.models.report_schema import SpectralResult, SpectralStudy

log = logging.getLogger(__name__)

_AREA_TOL = 1e-12


# --- Meshes ---


@dataclass(frozen=True)
class SurfaceMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    rings: int

    @property
    def h(self) -> float:
        """Longest edge in parameter space."""
        p = self.vertices[self.triangles]
        edges = np.concatenate([p[:, 1] - p[:, 0], p[:, 2] - p[:, 1], p[:, 0] - p[:, 2]])
        return float(np.linalg.norm(edges, axis=1).max())

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


def audit_mesh(mesh: SurfaceMesh) -> SurfaceMesh:
    areas = mesh.signed_areas()
    bad = areas <= _AREA_TOL * mesh.h**2
    if np.any(bad):
        raise MeshError(f"{int(np.count_nonzero(bad))} degenerate or inverted triangle(s)")
    return mesh


def _zip_rings(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the annulus between two closed rings whose vertices start at angle 0."""
    n_in, n_out = len(inner), len(outer)
    triangles = []
    i = k = 0
    while i < n_in or k < n_out:
        next_in = (i + 1) / n_in
        next_out = (k + 1) / n_out
        if k < n_out and (i == n_in or next_out <= next_in):
            triangles.append((inner[i % n_in], outer[k], outer[(k + 1) % n_out]))
            k += 1
        else:
            triangles.append((inner[i], outer[k % n_out], inner[(i + 1) % n_in]))
            i += 1
    return triangles


def polar_mesh(surface: PolarGraphSurface, rings: int) -> SurfaceMesh:
    """
    Polar fan over D: a vertex at the pole and ring j (of 6 j vertices) at xi = j / rings, with
    the outer ring placed on the boundary curve s = b(phi).
    """
    if surface.ambient_dim != 3:
        raise DimensionError("Finite element meshes are built for surfaces in R^3")
    domain = surface.domain
    vertices = [np.zeros((1, 2))]
    ring_indices = [np.array([0])]
    start = 1
    for j in range(1, rings + 1):
        count = 6 * j
        phi = 2 * np.pi * np.arange(count) / count
        vertices.append(domain.interior_params(phi, np.full(count, j / rings)))
        ring_indices.append(np.arange(start, start + count))
        start += count
    triangles = []
    first = ring_indices[1]
    for k in range(len(first)):
        triangles.append((0, first[k], first[(k + 1) % len(first)]))
    for j in range(2, rings + 1):
        triangles.extend(_zip_rings(ring_indices[j - 1], ring_indices[j]))
    boundary = np.zeros(start, dtype=bool)
    boundary[ring_indices[-1]] = True
    mesh = SurfaceMesh(
        vertices=np.concatenate(vertices),
        triangles=np.array(triangles, dtype=int),
        boundary=boundary,
        rings=rings,
    )
    return audit_mesh(mesh)


def build_mesh(surface: PolarGraphSurface, target_h: float) -> SurfaceMesh:
    """
    Polar mesh whose longest parameter-space edge is at most ``target_h``. The ring count starts
    from the radial spacing and grows until the edge bound holds; the vertex count is O((b_max / h)^2).
    """
    if not target_h > 0:
        raise MeshError(f"Target edge length must be positive, got {target_h}")
    rings = max(2, math.ceil(surface.domain.max_radius / target_h))
    mesh = polar_mesh(surface, rings)
    while mesh.h > target_h:
        rings = max(rings + 1, math.ceil(rings * mesh.h / target_h))
        mesh = polar_mesh(surface, rings)
    log.debug(f"build_mesh: h = {mesh.h:.4g} <= {target_h} with {rings} rings")
    return mesh


def square_mesh(n: int) -> SurfaceMesh:
    """Uniform triangulation of the unit square (for the flat chart)."""
    grid = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    vertices = np.stack([xx.ravel(), yy.ravel()], axis=-1)
    index = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00, v10 = index[:-1, :-1].ravel(), index[1:, :-1].ravel()
    v01, v11 = index[:-1, 1:].ravel(), index[1:, 1:].ravel()
    triangles = np.concatenate([np.stack([v00, v10, v11], axis=-1), np.stack([v00, v11, v01], axis=-1)])
    boundary = (vertices == 0.0).any(axis=1) | (vertices == 1.0).any(axis=1)
    return audit_mesh(SurfaceMesh(vertices=vertices, triangles=triangles, boundary=boundary, rings=n))


# --- Assembly ---

_REFERENCE_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def assemble_operators(surface: Chart, mesh: SurfaceMesh) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """
    Stiffness K and mass M of P1 elements with the metric g sampled at each triangle centroid:
    K_e = |T| sqrt(det g) G g^-1 G^T and M_e = |T| sqrt(det g) (1 + delta_ab) / 12. Neumann
    conditions are natural, so no boundary terms appear.
    """
    p = mesh.vertices[mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
    area = 0.5 * np.abs(np.linalg.det(jac))
    grads = _REFERENCE_GRADIENTS[None, :, :] @ np.linalg.inv(jac)
    jet = chart_jet(surface, p.mean(axis=1), order=1, check_domain=False)
    g = metric_tensor(jet.dx)
    weight = area * np.sqrt(np.linalg.det(g))
    local_k = weight[:, None, None] * (grads @ np.linalg.inv(g) @ np.swapaxes(grads, 1, 2))
    local_m = weight[:, None, None] * (np.ones((3, 3)) + np.eye(3))[None] / 12.0
    rows = np.repeat(mesh.triangles[:, :, None], 3, axis=2).ravel()
    cols = np.repeat(mesh.triangles[:, None, :], 3, axis=1).ravel()
    size = len(mesh.vertices)
    stiffness = sparse.coo_matrix((local_k.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    mass = sparse.coo_matrix((local_m.ravel(), (rows, cols)), shape=(size, size)).tocsr()
    return stiffness, mass


# --- Eigensolver ---


@dataclass(frozen=True)
class NeumannMode:
    result: SpectralResult
    eigenfunction: np.ndarray


def lambda1_neumann(
    surface: Chart,
    mesh: SurfaceMesh,
    shift: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
    block_size: Optional[int] = None,
    seed: int = 0,
) -> NeumannMode:
    """
    Smallest eigenvalue of K v = lambda M v on the M-orthogonal complement of the constants.
    Shifted block inverse iteration with constant deflation and a Rayleigh-Ritz step per sweep,
    so nearly degenerate pairs do not stall it; stops when the Ritz value stagnates.
    """
    shift = settings.EIGEN_SHIFT if shift is None else shift
    tol = tol or settings.EIGEN_TOL
    max_iter = max_iter or settings.EIGEN_MAX_ITER
    stiffness, mass = assemble_operators(surface, mesh)
    size = stiffness.shape[0]
    block = min(block_size or settings.EIGEN_BLOCK_SIZE, size - 1)

    ones = np.ones(size)
    mass_ones = mass @ ones
    total_mass = float(ones @ mass_ones)

    def deflate(block_vectors: np.ndarray) -> np.ndarray:
        return block_vectors - np.outer(ones, mass_ones @ block_vectors) / total_mass

    solver = splu((stiffness - shift * mass).tocsc())
    rng = np.random.default_rng(seed)
    vectors = deflate(rng.standard_normal((size, block)))
    previous = math.inf
    for iteration in range(1, max_iter + 1):
        candidate = deflate(solver.solve(mass @ vectors))
        candidate /= np.linalg.norm(candidate, axis=0)
        ritz, coeffs = scipy.linalg.eigh(candidate.T @ (stiffness @ candidate), candidate.T @ (mass @ candidate))
        vectors = candidate @ coeffs
        value = float(ritz[0])
        if abs(value - previous) <= tol * abs(value):
            break
        previous = value
    else:
        raise ConvergenceError(f"Inverse iteration did not converge in {max_iter} iterations (last {value:.12g})")

    mode = vectors[:, 0]
    mode /= math.sqrt(float(mode @ (mass @ mode)))
    mass_mode = mass @ mode
    residual = float(np.linalg.norm(stiffness @ mode - value * mass_mode) / np.linalg.norm(mass_mode))
    result = SpectralResult(
        lambda1=value,
        residual=residual,
        iterations=iteration,
        vertices=size,
        triangles=len(mesh.triangles),
        h=mesh.h,
        rings=mesh.rings,
        constant_overlap=abs(float(mass_ones @ mode)) / math.sqrt(total_mass),
    )
    log.debug(f"lambda1 = {value:.12g} on {size} vertices after {iteration} iterations")
    return NeumannMode(result=result, eigenfunction=mode)


def lambda1_refinement(
    surface: PolarGraphSurface,
    ring_levels: Sequence[int] = (),
    seed: int = 0,
    mapper: Callable = map,
    target_h: Sequence[float] = (),
) -> SpectralStudy:
    """
    lambda1 over successively refined polar meshes with a Richardson value from the two finest
    (order 2). Meshes come from ``target_h`` edge lengths when given, otherwise from ring counts.
    """
    if target_h:
        meshes = [build_mesh(surface, h) for h in target_h]
    else:
        meshes = [polar_mesh(surface, rings) for rings in ring_levels]
    if not meshes:
        raise MeshError("No mesh levels requested")
    ring_levels = [mesh.rings for mesh in meshes]
    if any(a >= b for a, b in zip(ring_levels, ring_levels[1:])):
        raise MeshError(f"Mesh levels must refine strictly, got ring counts {ring_levels}")

    def solve(mesh: SurfaceMesh) -> SpectralResult:
        return lambda1_neumann(surface, mesh, seed=seed).result

    results = list(mapper(solve, meshes))
    values = [r.lambda1 for r in results]
    table = tabulate("lambda1", [f"rings={r}" for r in ring_levels], values)
    finest = values[-1]
    extrapolated = None
    gap = 0.0
    if len(values) >= 2:
        ratio = ring_levels[-1] / ring_levels[-2]
        extrapolated = finest + (finest - values[-2]) / (ratio**2 - 1)
        gap = abs(extrapolated - finest) / abs(finest)
    domain_value = None
    if isinstance(surface.profile, ConstantProfile):
        domain_value = (extrapolated if extrapolated is not None else finest) * surface.profile.R**2
    log.info(f"lambda1 refinement: finest {finest:.10g}, extrapolated {extrapolated}, gap {gap:.3e}")
    return SpectralStudy(
        levels=results,
        table=table,
        lambda1=finest,
        lambda1_extrapolated=extrapolated,
        observed_order=table.observed_order,
        relative_gap=gap,
        lambda1_domain=domain_value,
    )
