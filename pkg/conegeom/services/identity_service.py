"""
Integral and pointwise identities for hypersurfaces Gamma in a cone: the two Minkowski formulas,
the divergence theorem with the intrinsic conormal, the pointwise divergence and flux identities,
the first-order expansion along normal offsets, and the rigidity chain.
"""

import logging
from dataclasses import dataclass
from functools import reduce
from operator import add
from typing import Callable, Optional, Union

import numpy as np

from conegeom.core.config import settings
from conegeom.core.errors import DimensionError, NonTangentFieldError
from conegeom.geometry import jets
from conegeom.geometry.cone import convexity_probe
from conegeom.geometry.core import JetGeometry, chart_jet, curvature_at, jet_geometry, tangential_divergence
from conegeom.geometry.jets import Jet
from conegeom.geometry.quadrature import (
    QuadratureRule,
    SurfaceSample,
    build_rule,
    integrate_boundary,
    integrate_surface,
    random_interior_params,
    sample_surface,
    weighted_sum,
)
from conegeom.geometry.surfaces import BoundaryData, PolarGraphSurface, boundary_data_at, normal_offset
from conegeom.models.report_schema import FlowExpansionRecord, IdentityReport, PointwiseReport, RigidityReport

log = logging.getLogger(__name__)

FieldSpec = Union[str, Callable[[JetGeometry], list[Jet]]]

_SCALE_FLOOR = 1e-12


# --- Tangent fields F1 and F2 ---


@dataclass(frozen=True)
class IdentityFields:
    """F1 = x - <x,nu> nu and F2 = (N-1) H F1 - II(F1, .), as jets over the chart."""

    f1: list[Jet]
    f2: list[Jet]


def identity_fields(geometry: JetGeometry) -> IdentityFields:
    x = list(geometry.position)
    nu = geometry.normal
    n, m = len(x), len(geometry.tangents)
    support = jets.dot(x, nu)
    f1 = [xk - support * nk for xk, nk in zip(x, nu)]
    # F1 = sum_i a_i x_i, so II(F1, .) = sum_i a_i d_i nu
    b = [jets.dot(geometry.tangents[i], f1) for i in range(m)]
    a = [reduce(add, [geometry.metric_inverse[i][j] * b[j] for j in range(m)]) for i in range(m)]
    dnu = [geometry.normal_derivative(i) for i in range(m)]
    shape_f1 = [reduce(add, [a[i] * dnu[i][k] for i in range(m)]) for k in range(n)]
    f2 = [geometry.mean_curvature * f1[k] * float(n - 1) - shape_f1[k] for k in range(n)]
    return IdentityFields(f1=f1, f2=f2)


def _field(spec: FieldSpec) -> Callable[[JetGeometry], list[Jet]]:
    if callable(spec):
        return spec
    if spec == "F1":
        return lambda geo: identity_fields(geo).f1
    if spec == "F2":
        return lambda geo: identity_fields(geo).f2
    if spec == "zero":
        return lambda geo: [c * 0.0 for c in geo.position]
    raise ValueError(f"Unknown field '{spec}'")


def _normal_components(field: list[Jet], geometry: JetGeometry) -> np.ndarray:
    return np.abs(np.einsum("bk,bk->b", jets.values(field), jets.values(geometry.normal)))


# --- Minkowski formulas ---


def _boundary(surface, rule: QuadratureRule, data: Optional[BoundaryData]) -> BoundaryData:
    return data if data is not None else boundary_data_at(surface, rule.boundary_angles)


def mink1_report(
    surface,
    rule: QuadratureRule,
    sample: Optional[SurfaceSample] = None,
    boundary: Optional[BoundaryData] = None,
) -> IdentityReport:
    """
    lhs = int (1 - H <x,nu>), rhs = 0. The boundary term (1/(N-1)) int <F1, conormal> is reported
    as well; it equals lhs on every surface and vanishes on orthogonal ones.
    """
    n = surface.ambient_dim
    lhs = integrate_surface(surface, rule, lambda p: 1.0 - p.mean_curvature * p.support, sample)
    data = _boundary(surface, rule, boundary)

    def flux(d: BoundaryData) -> np.ndarray:
        f1 = d.x - d.support[:, None] * d.nu
        return np.einsum("bk,bk->b", f1, d.conormal)

    boundary_term = integrate_boundary(surface, rule, flux, data=data) / (n - 1)
    return IdentityReport(
        name="mink1",
        lhs=lhs,
        rhs=0.0,
        residual=lhs,
        level=rule.level,
        resolution=rule.resolution,
        details={"boundary_term": boundary_term, "boundary_residual": lhs - boundary_term},
    )


def mink2_boundary_term(
    surface, rule: QuadratureRule, boundary: Optional[BoundaryData] = None, tangential: bool = True
) -> float:
    """int_{dGamma} II^Sigma(nu_T, nu_T) <x,nu>; identically 0 for N = 2."""
    data = _boundary(surface, rule, boundary)
    if data.cone_form is None:
        raise ValueError("Boundary term needs a surface lying in the cone wall")

    def integrand(d: BoundaryData) -> np.ndarray:
        v = d.nu_tangential if tangential else d.nu
        return d.cone_form.evaluate(v, v) * d.support

    return integrate_boundary(surface, rule, integrand, data=data)


def mink2_report(
    surface,
    rule: QuadratureRule,
    sample: Optional[SurfaceSample] = None,
    boundary: Optional[BoundaryData] = None,
) -> IdentityReport:
    """lhs = int (H - sigma_2 <x,nu>), rhs = -1/((N-1)(N-2)) int_{dGamma} II^Sigma(nu_T, nu_T) <x,nu>."""
    n = surface.ambient_dim
    if n < 3:
        raise DimensionError("The second Minkowski identity needs N >= 3")
    data = _boundary(surface, rule, boundary)
    lhs = integrate_surface(surface, rule, lambda p: p.mean_curvature - p.sigma2 * p.support, sample)
    scale = -1.0 / ((n - 1) * (n - 2))
    rhs = scale * mink2_boundary_term(surface, rule, data, tangential=True)
    rhs_with_nu = scale * mink2_boundary_term(surface, rule, data, tangential=False)
    defect = np.abs(np.einsum("bk,bk->b", data.nu_tangential, data.cone_normal)).max()
    return IdentityReport(
        name="mink2",
        lhs=lhs,
        rhs=rhs,
        residual=lhs - rhs,
        level=rule.level,
        resolution=rule.resolution,
        details={
            "rhs_with_nu": rhs_with_nu,
            "consistency": abs(rhs - rhs_with_nu) / max(abs(rhs), 1.0),
            "projection_defect": float(defect),
        },
    )


# --- Divergence theorem ---


def divergence_theorem_check(
    surface,
    rule: QuadratureRule,
    field: FieldSpec = "F1",
    sample: Optional[SurfaceSample] = None,
) -> IdentityReport:
    """
    lhs = int div_Gamma F, rhs = int_{dGamma} <F, conormal> with the intrinsic conormal, so the
    identity holds whether or not Gamma meets the cone orthogonally.
    """
    make_field = _field(field)
    if sample is None or sample.jet.order < 3:
        sample = sample_surface(surface, rule, order=3)
    geometry = jet_geometry(sample.jet)
    values = make_field(geometry)
    normal_part = _normal_components(values, geometry).max()
    if normal_part > settings.TANGENCY_TOL:
        raise NonTangentFieldError(f"Field has a normal component of size {normal_part:.3e}")
    divergence = tangential_divergence(values, sample.jet)
    lhs = weighted_sum(sample.weights, divergence)

    params = surface.boundary_parameters(rule.boundary_angles)
    boundary_jet = chart_jet(surface, params.u, order=3)
    boundary_values = jets.values(make_field(jet_geometry(boundary_jet)))
    rhs = integrate_boundary(surface, rule, lambda d: np.einsum("bk,bk->b", boundary_values, d.conormal))
    name = field if isinstance(field, str) else getattr(field, "__name__", "custom")
    return IdentityReport(
        name=f"divergence_{name}",
        lhs=lhs,
        rhs=rhs,
        residual=lhs - rhs,
        level=rule.level,
        resolution=rule.resolution,
        details={"tangency_defect": float(normal_part)},
    )


# --- Pointwise identities ---


def pointwise_identity_suite(surface, count: Optional[int] = None, seed: Optional[int] = None) -> PointwiseReport:
    """
    Max errors over seeded random nodes of
      div F1 = (N-1)(1 - H <x,nu>),  div F2 = (N-1)(N-2)(H - sigma_2 <x,nu>),
    and, on the boundary of orthogonal surfaces, <F2, n> = -<x,nu> II^Sigma(nu, nu).
    """
    count = count or settings.NODE_SAMPLE_SIZE
    seed = settings.DEFAULT_SEED if seed is None else seed
    n = surface.ambient_dim
    params = random_interior_params(surface.domain, count, seed)
    jet = chart_jet(surface, params, order=3)
    point = curvature_at(jet)
    geometry = jet_geometry(jet)
    fields = identity_fields(geometry)
    div_f1 = tangential_divergence(fields.f1, jet)
    div_f2 = tangential_divergence(fields.f2, jet)
    f1_error = np.abs(div_f1 - (n - 1) * (1.0 - point.mean_curvature * point.support)).max()
    if n >= 3:
        f2_target = (n - 1) * (n - 2) * (point.mean_curvature - point.sigma2 * point.support)
    else:
        f2_target = np.zeros(len(div_f2))
    f2_error = np.abs(div_f2 - f2_target).max()
    tangency = max(_normal_components(fields.f1, geometry).max(), _normal_components(fields.f2, geometry).max())

    flux_error = None
    angles = surface.boundary_angles(count)
    if surface.on_cone and surface.is_orthogonal:
        data = boundary_data_at(surface, angles)
        boundary_jet = chart_jet(surface, surface.boundary_parameters(angles).u, order=3)
        f2 = jets.values(identity_fields(jet_geometry(boundary_jet)).f2)
        flux = np.einsum("bk,bk->b", f2, data.cone_normal)
        target = -data.support * data.cone_form.evaluate(data.nu, data.nu)
        flux_error = float(np.abs(flux - target).max())
    else:
        log.warning("Boundary flux identity skipped: surface is not orthogonal to the cone")
    return PointwiseReport(
        nodes=count,
        boundary_nodes=len(angles),
        max_div_f1_error=float(f1_error),
        max_div_f2_error=float(f2_error),
        max_tangency_defect=float(tangency),
        max_flux_error=flux_error,
    )


# --- Normal offsets ---


def _offset_functional(surface, t: float, rule: QuadratureRule) -> float:
    offset = normal_offset(surface, t)
    return (surface.ambient_dim - 1) * integrate_surface(
        offset, rule, lambda p: 1.0 - p.mean_curvature * p.support
    )


def _conormal_velocity(surface, t: float, angles: np.ndarray) -> np.ndarray:
    plus = boundary_data_at(normal_offset(surface, t), angles)
    minus = boundary_data_at(normal_offset(surface, -t), angles)
    return (plus.conormal - minus.conormal) / (2 * t)


def flow_expansion_check(
    surface: PolarGraphSurface, rule: Optional[QuadratureRule] = None, t_step: Optional[float] = None
) -> FlowExpansionRecord:
    """
    Differentiates G(t) = (N-1) int_{Gamma_t} (1 - H_t <x_t, nu>) along normal offsets by centered
    differences (with a Richardson value from t/2), compares with (N-1)(N-2) int (H - sigma_2 <x,nu>),
    and checks <x, d/dt conormal> = -<x,nu> II^Sigma(nu, nu) on the boundary.
    """
    rule = rule or build_rule(surface.domain)
    t = t_step or settings.FLOW_T_STEP
    n = surface.ambient_dim

    def slope(step: float) -> float:
        return (_offset_functional(surface, step, rule) - _offset_functional(surface, -step, rule)) / (2 * step)

    slope_lhs = slope(t)
    slope_half = slope(t / 2)
    if n >= 3:
        slope_rhs = (n - 1) * (n - 2) * integrate_surface(
            surface, rule, lambda p: p.mean_curvature - p.sigma2 * p.support
        )
    else:
        slope_rhs = 0.0
    slope_error = abs(slope_lhs - slope_rhs)

    data = boundary_data_at(surface, rule.boundary_angles)
    velocity = _conormal_velocity(surface, t, rule.boundary_angles)
    expected = -data.support * data.cone_form.evaluate(data.nu, data.nu)
    claim = np.abs(np.einsum("bk,bk->b", data.x, velocity) - expected)
    scale = float(np.abs(expected).max())
    record = FlowExpansionRecord(
        t_step=t,
        slope_lhs=slope_lhs,
        slope_lhs_half=slope_half,
        slope_lhs_richardson=(4 * slope_half - slope_lhs) / 3,
        slope_rhs=slope_rhs,
        slope_error=slope_error,
        slope_relative_error=slope_error / abs(slope_rhs) if abs(slope_rhs) > _SCALE_FLOOR else None,
        conormal_claim_error=float(claim.max()),
        conormal_claim_scale=scale,
        conormal_claim_relative_error=float(claim.max()) / scale if scale > _SCALE_FLOOR else None,
    )
    log.debug(f"Flow expansion: {record}")
    return record


# --- Rigidity ---


def rigidity_report(
    surface: PolarGraphSurface,
    rule: QuadratureRule,
    sample: Optional[SurfaceSample] = None,
    boundary: Optional[BoundaryData] = None,
) -> RigidityReport:
    """
    Defects measuring how far Gamma is from the constant mean curvature sector case:
    H_bar = |Gamma| / int <x,nu>, umbilicity defects of S - H_bar Id, and the sign condition
    int_{dGamma} II^Sigma(nu_T, nu_T) <x,nu>. The chain
      int (H_bar^2 - sigma_2) s = int (H_bar - sigma_2 s) - H_bar int (1 - H_bar s)
    is recomputed from separate quadratures as a consistency check.
    """
    n = surface.ambient_dim
    if n < 3:
        raise DimensionError("Rigidity diagnostics need N >= 3")
    sample = sample or sample_surface(surface, rule)
    point = sample.curvature
    data = _boundary(surface, rule, boundary)

    def integral(values) -> float:
        return integrate_surface(surface, rule, lambda p: values, sample)

    area = integral(np.ones(len(sample.weights)))
    support_integral = integral(point.support)
    h_bar = area / support_integral
    umbilicity_integral = integral((h_bar**2 - point.sigma2) * point.support)
    first = integral(h_bar - point.sigma2 * point.support)
    second = integral(1.0 - h_bar * point.support)
    chain_error = abs(umbilicity_integral - (first - h_bar * second))

    m = n - 1
    deviation = point.symmetric_shape - h_bar * np.eye(m)[None, :, :]
    umbilicity_pointwise = float(np.linalg.norm(deviation, axis=(1, 2)).max())
    cmc_deviation = float(np.abs(point.mean_curvature - h_bar).max())
    sign_condition = mink2_boundary_term(surface, rule, data)

    consistency = None
    if cmc_deviation < settings.CMC_TOL:
        consistency = abs(umbilicity_integral + sign_condition / ((n - 1) * (n - 2)))

    probe = convexity_probe(surface.cone)
    starshaped_min = float(min(point.support.min(), data.support.min()))
    return RigidityReport(
        mean_curvature_bar=h_bar,
        area=area,
        support_integral=support_integral,
        cmc_deviation=cmc_deviation,
        sign_condition=sign_condition,
        umbilicity_defect_integral=umbilicity_integral,
        umbilicity_defect_pointwise=umbilicity_pointwise,
        starshaped_min=starshaped_min,
        starshaped=starshaped_min > 0,
        half_space=probe.half_space,
        convex_cone=probe.convex,
        chain_error=chain_error,
        mink2_consistency=consistency,
    )
