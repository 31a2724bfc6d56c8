"""
Quadrature over the parameter domain D and its boundary, and refinement tables.

Interior rule: trapezoid in the periodic angle phi times Gauss-Legendre in xi in (0, 1), with
u = xi b(phi) (cos phi, sin phi); the polar Jacobian xi b(phi)^2 is folded into the weights and
the pole carries no node. Boundary rule: trapezoid in phi. For N = 2 the interior rule is
Gauss-Legendre on the arc and the boundary "integral" is the sum over its two endpoints.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from conegeom.core.config import settings
from conegeom.core.errors import QuadratureError
from conegeom.geometry.cone import ArcDomain, SphericalDomain
from conegeom.geometry.core import Chart, ChartJet, CurvaturePoint, chart_jet, curvature_at
from conegeom.geometry.surfaces import BoundaryData, boundary_angles, boundary_data_at
from conegeom.models.report_schema import ConvergenceRow, ConvergenceTable

log = logging.getLogger(__name__)

_ORDER_FLOOR = 1e-14


def _unit_gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights


@dataclass(frozen=True)
class QuadratureRule:
    params: np.ndarray
    weights: np.ndarray
    boundary_angles: np.ndarray
    boundary_weights: np.ndarray
    n_phi: int
    n_s: int
    n_b: int
    level: int = 0

    @property
    def resolution(self) -> str:
        return f"{self.n_phi}x{self.n_s}/{self.n_b}"


def build_rule(
    domain: SphericalDomain,
    n_phi: Optional[int] = None,
    n_s: Optional[int] = None,
    n_b: Optional[int] = None,
    level: int = 0,
) -> QuadratureRule:
    n_phi = n_phi or settings.DEFAULT_N_PHI
    n_s = n_s or settings.DEFAULT_N_S
    n_b = n_b or settings.DEFAULT_N_B
    xi, w_xi = _unit_gauss(n_s)
    if isinstance(domain, ArcDomain):
        params = domain.interior_params(np.zeros_like(xi), xi)
        return QuadratureRule(
            params=params,
            weights=w_xi * domain.width,
            boundary_angles=boundary_angles(domain, n_b),
            boundary_weights=np.ones(2),
            n_phi=1,
            n_s=n_s,
            n_b=2,
            level=level,
        )
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    pp, xx = np.meshgrid(phi, xi, indexing="ij")
    ww = np.outer(np.full(n_phi, 2 * np.pi / n_phi), w_xi)
    pp, xx, ww = pp.ravel(), xx.ravel(), ww.ravel()
    b = np.asarray(domain.boundary_radius(pp), dtype=float)
    return QuadratureRule(
        params=domain.interior_params(pp, xx),
        weights=ww * xx * b**2,
        boundary_angles=boundary_angles(domain, n_b),
        boundary_weights=np.full(n_b, 2 * np.pi / n_b),
        n_phi=n_phi,
        n_s=n_s,
        n_b=n_b,
        level=level,
    )


def refinement_levels(
    domain: SphericalDomain,
    levels: int,
    n_phi: Optional[int] = None,
    n_s: Optional[int] = None,
    n_b: Optional[int] = None,
) -> list[QuadratureRule]:
    """Rules whose resolutions double from one level to the next."""
    n_phi = n_phi or settings.DEFAULT_N_PHI
    n_s = n_s or settings.DEFAULT_N_S
    n_b = n_b or settings.DEFAULT_N_B
    return [build_rule(domain, n_phi * 2**i, n_s * 2**i, n_b * 2**i, level=i) for i in range(levels)]


def random_interior_params(domain: SphericalDomain, count: int, seed: int) -> np.ndarray:
    """Seeded interior parameter points with xi in (0.02, 0.98)."""
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 2 * np.pi, count)
    xi = rng.uniform(0.02, 0.98, count)
    return domain.interior_params(phi, xi)


@dataclass(frozen=True)
class SphereRule:
    directions: np.ndarray
    weights: np.ndarray


def sphere_rule(ambient_dim: int, n: int = 16) -> SphereRule:
    """Averaging rule on S^{N-1} (weights sum to 1)."""
    if ambient_dim == 2:
        phi = 2 * np.pi * np.arange(n) / n
        return SphereRule(np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.full(n, 1.0 / n))
    z, w_z = np.polynomial.legendre.leggauss(n)
    phi = 2 * np.pi * np.arange(2 * n) / (2 * n)
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    r = np.sqrt(1.0 - zz**2)
    directions = np.stack([r * np.cos(pp), r * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = (np.outer(w_z, np.full(2 * n, 2 * np.pi / (2 * n))) / (4 * np.pi)).ravel()
    return SphereRule(directions, weights)


# --- Integration ---


def weighted_sum(weights: np.ndarray, values: np.ndarray) -> float:
    """Correctly rounded sum of weights * values; independent of node order."""
    return math.fsum((np.asarray(weights) * np.asarray(values)).tolist())


def _checked(values, count: int, what: str) -> np.ndarray:
    values = np.broadcast_to(np.asarray(values, dtype=float), (count,))
    bad = ~np.isfinite(values)
    if np.any(bad):
        raise QuadratureError(f"{what} integrand is not finite at {int(np.count_nonzero(bad))} node(s)")
    return values


@dataclass(frozen=True)
class SurfaceSample:
    """Chart jets and curvature of a surface at the interior nodes of a rule."""

    jet: ChartJet
    curvature: CurvaturePoint
    weights: np.ndarray


def sample_surface(surface: Chart, rule: QuadratureRule, order: int = 2) -> SurfaceSample:
    jet = chart_jet(surface, rule.params, order=order)
    curvature = curvature_at(jet)
    return SurfaceSample(jet=jet, curvature=curvature, weights=rule.weights * curvature.area_weight)


def integrate_surface(
    surface: Chart,
    rule: QuadratureRule,
    integrand: Callable[[CurvaturePoint], np.ndarray],
    sample: Optional[SurfaceSample] = None,
) -> float:
    sample = sample or sample_surface(surface, rule)
    values = _checked(integrand(sample.curvature), len(sample.weights), "Surface")
    return weighted_sum(sample.weights, values)


def integrate_boundary(
    surface: Chart,
    rule: QuadratureRule,
    integrand: Callable[[BoundaryData], np.ndarray],
    cone=None,
    data: Optional[BoundaryData] = None,
) -> float:
    data = data or boundary_data_at(surface, rule.boundary_angles, cone)
    values = _checked(integrand(data), len(rule.boundary_weights), "Boundary")
    return weighted_sum(rule.boundary_weights * data.length_weight, values)


# --- Refinement tables ---


def _log2_ratio(coarse: float, fine: float, floor: float) -> Optional[float]:
    if coarse > floor and fine > floor:
        return math.log2(coarse / fine)
    return None


def tabulate(
    quantity: str,
    resolutions: Sequence[str],
    values: Sequence[float],
    reference: Optional[float] = None,
    floor: Optional[float] = None,
) -> ConvergenceTable:
    """
    Refinement table for values computed at successively doubled resolutions. Orders are log2
    ratios of successive errors (against ``reference`` when given, otherwise of successive
    differences) and are only reported with at least three levels.
    """
    values = [float(v) for v in values]
    scale = max([1.0] + [abs(v) for v in values])
    floor = _ORDER_FLOOR * scale if floor is None else floor
    finest = values[-1]
    rows = [
        ConvergenceRow(
            level=i,
            resolution=resolutions[i],
            value=v,
            delta_from_finest=abs(v - finest),
            error=None if reference is None else abs(v - reference),
        )
        for i, v in enumerate(values)
    ]
    if len(values) >= 3:
        if reference is not None:
            errors = [row.error for row in rows]
            for i in range(1, len(rows)):
                rows[i].order = _log2_ratio(errors[i - 1], errors[i], floor)
        else:
            diffs = [abs(values[i] - values[i + 1]) for i in range(len(values) - 1)]
            for i in range(1, len(diffs)):
                rows[i + 1].order = _log2_ratio(diffs[i - 1], diffs[i], floor)
    orders = [row.order for row in rows if row.order is not None]
    return ConvergenceTable(quantity=quantity, rows=rows, observed_order=orders[-1] if orders else None)


def convergence_table(
    evaluator: Callable[[QuadratureRule], float],
    levels: Sequence[QuadratureRule],
    reference: Optional[float] = None,
    quantity: str = "value",
) -> ConvergenceTable:
    values = []
    for rule in levels:
        values.append(evaluator(rule))
        log.debug(f"{quantity} at {rule.resolution}: {values[-1]:.15g}")
    return tabulate(quantity, [rule.resolution for rule in levels], values, reference)
