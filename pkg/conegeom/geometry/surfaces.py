"""
Hypersurfaces Gamma inside a cone: polar graphs x = rho(u) theta(u) over the domain D (spherical
sectors are the constant-profile case), their normal offsets x + t nu, and boundary data along
the relative boundary dGamma.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Optional, Sequence

import numpy as np

from conegeom.core.config import settings
from conegeom.core.errors import DomainError, FocalDistanceError
from conegeom.geometry import jets
from conegeom.geometry.cone import ArcDomain, ConeBoundaryForm, ConeGeometry, SphericalDomain, exp_pole
from conegeom.geometry.core import (
    Chart,
    ChartJet,
    ClosedFormChart,
    Orientation,
    chart_jet,
    curvature_at,
    normal_jets,
    unit_normal,
)
from conegeom.geometry.jets import Jet
from conegeom.models.report_schema import SurfaceSummary

log = logging.getLogger(__name__)


# --- Radial profiles ---


class RadialProfile(ABC):
    """
    A positive radius function rho over the parameter domain. Profiles are written in terms of
    the geodesic distance s from the pole (for N = 2, from the middle of the arc) relative to the
    reference radius alpha of the domain.
    """

    family: ClassVar[str]

    def __init__(self, R: float = 1.0, eps: float = 0.0, k: int = 0):
        if R <= 0:
            raise DomainError(f"Profile scale R must be positive, got {R}")
        self.R = float(R)
        self.eps = float(eps)
        self.k = int(k)

    @abstractmethod
    def evaluate(self, u: Sequence, domain: SphericalDomain):
        ...

    def describe(self) -> dict:
        return {"family": self.family, "R": self.R, "eps": self.eps, "k": self.k}

    @staticmethod
    def _offset(u: Sequence, domain: SphericalDomain):
        # N = 2 profiles are centered on the middle of the arc
        return u[0] - domain.mid


class ConstantProfile(RadialProfile):
    family = "constant"

    def evaluate(self, u, domain):
        return u[0] * 0.0 + self.R


class AxisymProfile(RadialProfile):
    """rho = R (1 + eps cos(pi s / alpha)): zero radial slope at the pole and at s = alpha."""

    family = "axisym"

    def evaluate(self, u, domain):
        alpha = domain.half_width
        if len(u) == 1:
            wave = jets.cos(self._offset(u, domain) * (math.pi / alpha))
        else:
            wave = jets.cos_root((u[0] * u[0] + u[1] * u[1]) * (math.pi / alpha) ** 2)
        return (wave * self.eps + 1.0) * self.R


class BumpProfile(RadialProfile):
    """rho = R (1 + eps (s/alpha)^k exp(k (1 - s^2/alpha^2) / 2) cos(k phi)), analytic at the pole."""

    family = "bump"

    def __init__(self, R: float = 1.0, eps: float = 0.0, k: int = 2):
        if k < 1:
            raise DomainError(f"Bump frequency must be >= 1, got {k}")
        super().__init__(R, eps, k)

    def evaluate(self, u, domain):
        alpha = domain.half_width
        if len(u) == 1:
            s = self._offset(u, domain)
            angular = (s * (1.0 / alpha)) ** self.k
            q = s * s
        else:
            # Re((u1 + i u2)^k)
            re, im = u[0], u[1]
            for _ in range(self.k - 1):
                re, im = re * u[0] - im * u[1], re * u[1] + im * u[0]
            angular = re * (1.0 / alpha**self.k)
            q = u[0] * u[0] + u[1] * u[1]
        envelope = jets.exp((1.0 - q * (1.0 / alpha**2)) * (0.5 * self.k))
        return (angular * envelope * self.eps + 1.0) * self.R


class LinearViolationProfile(RadialProfile):
    """rho = R (1 + eps s^2 / (2 alpha)): rim slope R eps, so the surface is not orthogonal to the cone."""

    family = "linear_violation"

    def evaluate(self, u, domain):
        alpha = domain.half_width
        if len(u) == 1:
            s = self._offset(u, domain)
            q = s * s
        else:
            q = u[0] * u[0] + u[1] * u[1]
        return (q * (self.eps / (2 * alpha)) + 1.0) * self.R


PROFILE_FAMILIES: dict[str, type[RadialProfile]] = {
    cls.family: cls for cls in (ConstantProfile, AxisymProfile, BumpProfile, LinearViolationProfile)
}


def build_profile(family: str, **params) -> RadialProfile:
    try:
        return PROFILE_FAMILIES[family](**params)
    except KeyError:
        raise DomainError(f"Unknown profile family '{family}'")


# --- Boundary parametrization ---


@dataclass(frozen=True)
class BoundaryParams:
    """Parameter points on dD, the parameter tangent (None for N = 2) and an outward parameter direction."""

    u: np.ndarray
    tangent: Optional[np.ndarray]
    outward: np.ndarray


def domain_boundary(domain: SphericalDomain, phi: np.ndarray) -> BoundaryParams:
    phi = np.asarray(phi, dtype=float)
    if isinstance(domain, ArcDomain):
        return BoundaryParams(
            u=phi[:, None],
            tangent=None,
            outward=np.where(phi > domain.mid, 1.0, -1.0)[:, None],
        )
    b = np.asarray(domain.boundary_radius(phi), dtype=float)
    db = domain.boundary_radius_derivative(phi)
    c, s = np.cos(phi), np.sin(phi)
    return BoundaryParams(
        u=np.stack([b * c, b * s], axis=-1),
        tangent=np.stack([db * c - b * s, db * s + b * c], axis=-1),
        outward=np.stack([b * c + db * s, b * s - db * c], axis=-1),
    )


def boundary_angles(domain: SphericalDomain, n_b: int) -> np.ndarray:
    if isinstance(domain, ArcDomain):
        return np.array([domain.lower, domain.upper])
    return 2 * np.pi * np.arange(n_b) / n_b


def diagnostic_params(domain: SphericalDomain, n_phi: int = 32, n_xi: int = 8) -> np.ndarray:
    """A small interior sample used for construction-time checks."""
    xi, _ = np.polynomial.legendre.leggauss(n_xi)
    xi = 0.5 * (xi + 1.0)
    if isinstance(domain, ArcDomain):
        return domain.interior_params(np.zeros_like(xi), xi)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    pp, xx = np.meshgrid(phi, xi, indexing="ij")
    return domain.interior_params(pp.ravel(), xx.ravel())


# --- Surfaces ---


class PolarGraphSurface(ClosedFormChart):
    """
    The polar graph u -> rho(u) theta(u) over a cone domain. Starshapedness and the orthogonality
    residual max |<nu, n>| along the boundary are measured on construction; non-orthogonal
    surfaces are still built but flagged.
    """

    on_cone = True

    def __init__(self, cone: ConeGeometry, profile: RadialProfile):
        self.cone = cone
        self.domain = cone.domain
        self.profile = profile
        self.ambient_dim = cone.ambient_dim
        self.starshaped_min, self.orthogonality_residual = self._diagnose()
        self.is_orthogonal = self.orthogonality_residual <= settings.ORTHOGONALITY_TOL

    def evaluate(self, u: list[Jet]) -> list[Jet]:
        rho = self.profile.evaluate(u, self.domain)
        return [rho * c for c in exp_pole(u)]

    def contains(self, u: np.ndarray) -> np.ndarray:
        return self.domain.contains(u)

    def boundary_parameters(self, phi: np.ndarray) -> BoundaryParams:
        return domain_boundary(self.domain, phi)

    def boundary_angles(self, n_b: int) -> np.ndarray:
        return boundary_angles(self.domain, n_b)

    def _diagnose(self) -> tuple[float, float]:
        params = diagnostic_params(self.domain)
        rho = self.profile.evaluate(jets.variables(params, 0), self.domain).value
        if np.any(rho <= 0):
            raise DomainError(f"Profile radius is nonpositive somewhere (min {rho.min():.3e})")
        point = curvature_at(chart_jet(self, params, order=2))
        boundary = boundary_data_at(self, self.boundary_angles(256))
        support = np.concatenate([point.support, boundary.support])
        return float(support.min()), float(np.abs(boundary.nu_dot_n).max())

    def summary(self) -> SurfaceSummary:
        return SurfaceSummary(
            family=self.profile.family,
            ambient_dim=self.ambient_dim,
            starshaped_min=self.starshaped_min,
            orthogonality_residual=self.orthogonality_residual,
            is_orthogonal=self.is_orthogonal,
        )


class OffsetSurface(Chart):
    """Normal offset x + t nu of a base surface, with nu the outward normal of the base."""

    on_cone = False

    def __init__(self, base: Chart, t: float):
        self.base = base
        self.t = float(t)
        self.ambient_dim = base.ambient_dim
        self.cone = base.cone
        self.domain = base.domain

    def contains(self, u: np.ndarray) -> np.ndarray:
        return self.base.contains(u)

    def position_jets(self, u: np.ndarray, order: int) -> list[Jet]:
        base_jet = ChartJet(u, tuple(self.base.position_jets(u, order + 1)))
        nu = normal_jets(base_jet, Orientation.OUTWARD)
        return [p.truncate(order) + n * self.t for p, n in zip(base_jet.position, nu)]

    def boundary_parameters(self, phi: np.ndarray) -> BoundaryParams:
        return self.base.boundary_parameters(phi)

    def boundary_angles(self, n_b: int) -> np.ndarray:
        return self.base.boundary_angles(n_b)


def spherical_sector(cone: ConeGeometry, R: float = 1.0) -> PolarGraphSurface:
    return PolarGraphSurface(cone, ConstantProfile(R))


def build_polar_graph(cone: ConeGeometry, profile: RadialProfile) -> PolarGraphSurface:
    surface = PolarGraphSurface(cone, profile)
    if surface.starshaped_min <= 0:
        log.warning(f"Surface is not strictly starshaped (min <x, nu> = {surface.starshaped_min:.3e})")
    if not surface.is_orthogonal:
        log.warning(
            f"Surface '{profile.family}' is not orthogonal to the cone: residual {surface.orthogonality_residual:.3e}"
        )
    return surface


def focal_margin(surface: Chart, t: float) -> float:
    """min over a node sample and principal curvatures of 1 + t kappa (offset regular iff > 0)."""
    params = diagnostic_params(surface.domain)
    kappa = curvature_at(chart_jet(surface, params, order=2)).principal_curvatures()
    return float((1.0 + t * kappa).min())


def normal_offset(surface: Chart, t: float) -> OffsetSurface:
    margin = focal_margin(surface, t)
    if margin <= 0:
        raise FocalDistanceError(f"Offset distance {t} crosses the focal set (min 1 + t kappa = {margin:.3e})")
    return OffsetSurface(surface, t)


# --- Boundary data ---


@dataclass(frozen=True)
class BoundaryData:
    """
    Geometry along dGamma at a batch of boundary nodes. The conormal is intrinsic (tangent to
    Gamma, normal to dGamma, outward); cone fields are None for surfaces not lying in the cone wall.
    """

    x: np.ndarray
    nu: np.ndarray
    conormal: np.ndarray
    length_weight: np.ndarray
    support: np.ndarray
    nu_tangential: np.ndarray
    cone_form: Optional[ConeBoundaryForm] = None

    @property
    def cone_normal(self) -> Optional[np.ndarray]:
        return None if self.cone_form is None else self.cone_form.normal

    @property
    def nu_dot_n(self) -> Optional[np.ndarray]:
        if self.cone_form is None:
            return None
        return np.einsum("bk,bk->b", self.nu, self.cone_form.normal)


def boundary_data_at(surface: Chart, phi: np.ndarray, cone: Optional[ConeGeometry] = None) -> BoundaryData:
    params = surface.boundary_parameters(phi)
    jet = chart_jet(surface, params.u, order=1)
    x, dx = jet.x, jet.dx
    nu = unit_normal(dx, x, Orientation.OUTWARD)
    if params.tangent is None:
        conormal = dx[:, :, 0] * params.outward
        length_weight = np.ones(len(x))
    else:
        tangent = np.einsum("bki,bi->bk", dx, params.tangent)
        length_weight = np.linalg.norm(tangent, axis=1)
        tangent = tangent / length_weight[:, None]
        outward = np.einsum("bki,bi->bk", dx, params.outward)
        conormal = outward - np.einsum("bk,bk->b", outward, tangent)[:, None] * tangent
    conormal = conormal / np.linalg.norm(conormal, axis=1, keepdims=True)
    support = np.einsum("bk,bk->b", x, nu)
    nu_tangential = nu - (support / np.einsum("bk,bk->b", x, x))[:, None] * x
    if cone is None and getattr(surface, "on_cone", False):
        cone = surface.cone
    form = cone.second_form(x) if cone is not None else None
    return BoundaryData(
        x=x,
        nu=nu,
        conormal=conormal,
        length_weight=length_weight,
        support=support,
        nu_tangential=nu_tangential,
        cone_form=form,
    )
