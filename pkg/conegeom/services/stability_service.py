"""
Stability diagnostics for surfaces in cones: the second variation along u = 1 - H_bar <x,nu>,
the eigenvalue inequality it implies for stable critical points, and the two algebraic
identities its proof rests on (averaging <w,v>^2 over the sphere, and the frame energy of c x - nu).
"""

import logging
from typing import Optional, Sequence

import numpy as np

from conegeom.core.config import settings
from conegeom.core.errors import DimensionError
from conegeom.geometry.cone import convexity_probe
from conegeom.geometry.core import chart_jet, curvature_at, normal_jets, orthonormal_frame
from conegeom.geometry.quadrature import (
    QuadratureRule,
    SphereRule,
    SurfaceSample,
    integrate_boundary,
    random_interior_params,
    sample_surface,
    sphere_rule,
    weighted_sum,
)
from conegeom.geometry.surfaces import BoundaryData, PolarGraphSurface, boundary_data_at
from conegeom.models.report_schema import FrameEnergyRecord, StabilityReport

log = logging.getLogger(__name__)


def _frame_energy(jet, c: float) -> np.ndarray:
    """sum_j |D_{e_j} (c x - nu)|^2 at every node of the jet."""
    nu = normal_jets(jet)
    field = [x * c - n for x, n in zip(jet.position, nu)]
    derivatives = orthonormal_frame(jet).covariant(field)
    return np.einsum("bjk,bjk->b", derivatives, derivatives)


def stability_report(
    surface: PolarGraphSurface,
    rule: QuadratureRule,
    lambda1: float,
    lambda1_delta: float = 0.0,
    sample: Optional[SurfaceSample] = None,
    boundary: Optional[BoundaryData] = None,
) -> StabilityReport:
    """
    Evaluates Q(u, u) = -(N-1)(N-2) int (H_bar^2 - sigma_2) - int_{dGamma} II^Sigma(nu, nu) for
    u = 1 - H_bar <x,nu>, and both sides of
        -int_{dGamma} II^Sigma(nu_T, nu_T) >= lambda1 int |F - F_0|^2,   F = H_bar x - nu,
    which holds for stable constant mean curvature surfaces. The eigenvalue uncertainty
    lambda1_delta (relative) is propagated to the margin.
    """
    n = surface.ambient_dim
    if n < 3:
        raise DimensionError("Stability diagnostics need N >= 3")
    sample = sample or sample_surface(surface, rule)
    point = sample.curvature
    data = boundary if boundary is not None else boundary_data_at(surface, rule.boundary_angles)

    def integral(values: np.ndarray) -> float:
        return weighted_sum(sample.weights, values)

    area = integral(np.ones(len(sample.weights)))
    h_bar = area / integral(point.support)
    cmc_deviation = float(np.abs(point.mean_curvature - h_bar).max())
    variation_integral = integral(1.0 - h_bar * point.support)
    yuppy = (n - 1) * (n - 2) * integral(h_bar**2 - point.sigma2)

    form = data.cone_form
    nu_nu = integrate_boundary(surface, rule, lambda d: form.evaluate(d.nu, d.nu), data=data)
    tangential = integrate_boundary(
        surface, rule, lambda d: form.evaluate(d.nu_tangential, d.nu_tangential), data=data
    )
    q_form = -yuppy - nu_nu
    rel_lhs = -tangential

    field = h_bar * point.x - point.nu
    average = np.array([integral(field[:, k]) for k in range(n)]) / area
    deviation = integral(np.sum((field - average) ** 2, axis=1))
    rel_rhs = lambda1 * deviation
    margin = rel_lhs - rel_rhs
    flatness = nu_nu - tangential
    chain_error = abs(margin - (q_form + yuppy + flatness - rel_rhs))

    dirichlet = integral(_frame_energy(sample.jet, h_bar))
    probe = convexity_probe(surface.cone)
    label = "theorem-applicable" if cmc_deviation < settings.CMC_TOL else "diagnostic"
    report = StabilityReport(
        label=label,
        mean_curvature_bar=h_bar,
        cmc_deviation=cmc_deviation,
        variation_integral=variation_integral,
        q_form=q_form,
        rel_lhs=rel_lhs,
        rel_rhs=rel_rhs,
        margin=margin,
        margin_low=rel_lhs - lambda1 * (1 + lambda1_delta) * deviation,
        margin_high=rel_lhs - lambda1 * (1 - lambda1_delta) * deviation,
        lambda1=lambda1,
        lambda1_delta=lambda1_delta,
        field_average=average.tolist(),
        field_deviation_integral=deviation,
        yuppy_lhs=yuppy,
        flatness_correction=flatness,
        chain_error=chain_error,
        dirichlet_energy=dirichlet,
        poincare_margin=dirichlet - rel_rhs,
        corollary_condition=tangential,
        corollary_applicable=probe.half_space and tangential >= -settings.CONVEXITY_TOL,
        half_space=probe.half_space,
        convex_cone=probe.convex,
    )
    if probe.convex:
        report.convex_rel_lhs_nonpositive = rel_lhs <= settings.CONVEXITY_TOL
        report.convex_lambda1_bound = lambda1 * (1 + lambda1_delta) >= (n - 1) * h_bar**2
    if label == "diagnostic":
        log.warning(f"Surface is not CMC (deviation {cmc_deviation:.3e}); stability report is diagnostic only")
    return report


def reilly_average_check(w: Sequence[float], rule: Optional[SphereRule] = None) -> float:
    """|mean over the unit sphere of <w, v>^2 - |w|^2 / N|."""
    w = np.asarray(w, dtype=float)
    rule = rule or sphere_rule(len(w))
    average = weighted_sum(rule.weights, (rule.directions @ w) ** 2)
    return abs(average - float(w @ w) / len(w))


def frame_energy_check(
    surface, c: float, count: Optional[int] = None, seed: Optional[int] = None
) -> FrameEnergyRecord:
    """
    Compares sum_j |D_{e_j}(c x - nu)|^2, computed by differentiating the field along an orthonormal
    frame, with (N-1) c^2 - 2 c (N-1) H + tr S^2 from the curvature data.
    """
    count = count or settings.NODE_SAMPLE_SIZE
    seed = settings.DEFAULT_SEED if seed is None else seed
    m = surface.ambient_dim - 1
    jet = chart_jet(surface, random_interior_params(surface.domain, count, seed), order=2)
    point = curvature_at(jet)
    lhs = _frame_energy(jet, c)
    rhs = m * c**2 - 2 * c * m * point.mean_curvature + point.shape_squared_trace
    cmc_error = None
    if m >= 2 and np.abs(point.mean_curvature - c).max() < settings.CMC_TOL:
        cmc_error = float(np.abs(lhs - m * (m - 1) * (c**2 - point.sigma2)).max())
    return FrameEnergyRecord(c=c, nodes=count, max_error=float(np.abs(lhs - rhs).max()), max_cmc_form_error=cmc_error)
