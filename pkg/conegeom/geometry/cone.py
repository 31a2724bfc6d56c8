"""
Cones over spherical domains: the domain D on the unit sphere, the exponential-map
parametrization around the pole e_N, the lateral boundary of the cone C_D = {t p : t > 0, p in D}
with its exterior unit normal n, and the second fundamental form of that boundary.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from conegeom.core.config import settings
from conegeom.core.errors import BoundaryPointError, DomainError
from conegeom.geometry import jets
from conegeom.geometry.core import ClosedFormChart, chart_jet, curvature_at
from conegeom.geometry.jets import Jet
from conegeom.models.report_schema import ConvexityProbe

log = logging.getLogger(__name__)

JetOrArray = Union[Jet, np.ndarray, float]

_CONTAINS_SLACK = 1e-12


# --- Spherical domains ---


class SphericalDomain(ABC):
    """A domain D on the unit sphere S^{N-1}, described in exponential coordinates about e_N."""

    ambient_dim: int

    @property
    @abstractmethod
    def half_width(self) -> float:
        """Reference angular radius (alpha for caps, half the opening for arcs)."""

    @property
    @abstractmethod
    def half_space(self) -> bool:
        """True when the cone lies in the open half-space {x_N > 0}."""

    @abstractmethod
    def contains(self, u: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def interior_params(self, phi: np.ndarray, xi: np.ndarray) -> np.ndarray:
        """Parameter points for polar coordinates (phi, xi), xi in [0, 1] from center to boundary."""

    @abstractmethod
    def describe(self) -> dict:
        ...


class CapDomain(SphericalDomain):
    """Geodesic cap of radius ``alpha`` about the pole; D is {s <= b(phi)} with b = alpha."""

    ambient_dim = 3

    def __init__(self, alpha: float):
        if not 0.0 < alpha < math.pi:
            raise DomainError(f"Cap radius must lie in (0, pi), got {alpha}")
        self.alpha = float(alpha)

    def boundary_radius(self, phi: JetOrArray) -> JetOrArray:
        return phi * 0.0 + self.alpha

    def boundary_radius_derivative(self, phi: np.ndarray) -> np.ndarray:
        return np.zeros_like(np.asarray(phi, dtype=float))

    @property
    def half_width(self) -> float:
        return self.alpha

    @property
    def max_radius(self) -> float:
        return self.alpha

    @property
    def half_space(self) -> bool:
        return self.max_radius < math.pi / 2

    def contains(self, u: np.ndarray) -> np.ndarray:
        s = np.hypot(u[:, 0], u[:, 1])
        phi = np.arctan2(u[:, 1], u[:, 0])
        return s <= self.boundary_radius(phi) * (1 + _CONTAINS_SLACK) + _CONTAINS_SLACK

    def boundary_params(self, phi: np.ndarray) -> np.ndarray:
        b = np.asarray(self.boundary_radius(phi), dtype=float)
        return np.stack([b * np.cos(phi), b * np.sin(phi)], axis=-1)

    def interior_params(self, phi: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.boundary_params(phi) * np.asarray(xi)[:, None]

    def describe(self) -> dict:
        return {"kind": "cap", "alpha": self.alpha}


class PerturbedCapDomain(CapDomain):
    """Star-shaped cap with boundary radius b(phi) = alpha + delta cos(k phi)."""

    def __init__(self, alpha: float, delta: float, k: int):
        super().__init__(alpha)
        if k < 1:
            raise DomainError(f"Perturbation frequency must be a positive integer, got {k}")
        if not (alpha - abs(delta) > 0.0 and alpha + abs(delta) < math.pi):
            raise DomainError(f"Boundary radius alpha +- |delta| must stay in (0, pi), got alpha={alpha}, delta={delta}")
        self.delta = float(delta)
        self.k = int(k)

    def boundary_radius(self, phi: JetOrArray) -> JetOrArray:
        return jets.cos(phi * float(self.k)) * self.delta + self.alpha

    def boundary_radius_derivative(self, phi: np.ndarray) -> np.ndarray:
        return -self.delta * self.k * np.sin(self.k * np.asarray(phi, dtype=float))

    @property
    def max_radius(self) -> float:
        return self.alpha + abs(self.delta)

    def describe(self) -> dict:
        return {"kind": "perturbed_cap", "alpha": self.alpha, "delta": self.delta, "k": self.k}


class ArcDomain(SphericalDomain):
    """Arc (lower, upper) of the unit circle, angle measured from e_2 toward e_1 (N = 2)."""

    ambient_dim = 2

    def __init__(self, lower: float, upper: float):
        if not 0.0 < upper - lower < math.pi:
            raise DomainError(f"Arc width must lie in (0, pi), got {upper - lower}")
        self.lower = float(lower)
        self.upper = float(upper)

    @classmethod
    def wedge(cls, angle: float) -> "ArcDomain":
        return cls(-angle / 2, angle / 2)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        return 0.5 * self.width

    @property
    def half_space(self) -> bool:
        return max(abs(self.lower), abs(self.upper)) < math.pi / 2

    def contains(self, u: np.ndarray) -> np.ndarray:
        t = u[:, 0]
        slack = _CONTAINS_SLACK * max(1.0, abs(self.lower), abs(self.upper))
        return (t >= self.lower - slack) & (t <= self.upper + slack)

    def interior_params(self, phi: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return (self.lower + np.asarray(xi) * self.width)[:, None]

    def describe(self) -> dict:
        return {"kind": "wedge", "lower": self.lower, "upper": self.upper}


# --- Exponential map about the pole ---


def exp_pole(u: Sequence[JetOrArray]) -> list:
    """theta(u) = cos|u| e_N + sin|u| u/|u|, written through even power series so it is smooth at u = 0."""
    if len(u) == 1:
        return [jets.sin(u[0]), jets.cos(u[0])]
    q = u[0] * u[0] + u[1] * u[1]
    s = jets.sin_root_over_root(q)
    return [u[0] * s, u[1] * s, jets.cos_root(q)]


def log_pole(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of t * theta(u): returns (t, angle) with angle = (s, phi) for N = 3 or u for N = 2."""
    t = np.linalg.norm(x, axis=1)
    if x.shape[1] == 2:
        return t, np.arctan2(x[:, 0], x[:, 1])
    s = np.arctan2(np.hypot(x[:, 0], x[:, 1]), x[:, 2])
    phi = np.arctan2(x[:, 1], x[:, 0])
    return t, np.stack([s, phi], axis=-1)


# --- The cone ---


class LateralChart(ClosedFormChart):
    """(t, phi) -> t * theta(b(phi) (cos phi, sin phi)) for a polar cap domain."""

    ambient_dim = 3

    def __init__(self, domain: CapDomain):
        self.domain = domain

    def contains(self, u: np.ndarray) -> np.ndarray:
        return u[:, 0] > 0

    def evaluate(self, u: list[Jet]) -> list[Jet]:
        t, phi = u
        b = self.domain.boundary_radius(phi)
        theta = exp_pole([b * jets.cos(phi), b * jets.sin(phi)])
        return [t * c for c in theta]


@dataclass(frozen=True)
class ConeBoundaryForm:
    """Exterior normal n and the ambient matrix A of II^Sigma (A v = D_v n projected) at boundary points."""

    normal: np.ndarray
    matrix: np.ndarray

    def evaluate(self, v: np.ndarray, w: np.ndarray) -> np.ndarray:
        return np.einsum("bi,bij,bj->b", v, self.matrix, w)


class ConeGeometry:
    """The cone C_D over a spherical domain, with its lateral boundary."""

    def __init__(self, domain: SphericalDomain):
        self.domain = domain
        self.ambient_dim = domain.ambient_dim

    @property
    def half_space(self) -> bool:
        return self.domain.half_space

    def locate(self, x: np.ndarray, tol: float = None) -> tuple[np.ndarray, np.ndarray]:
        """
        Polar coordinates of lateral boundary points. Returns (t, angle), where angle is phi for caps and
        the endpoint value for arcs. Raises BoundaryPointError for the vertex or off-boundary points.
        """
        tol = settings.BOUNDARY_TOL if tol is None else tol
        x = np.atleast_2d(np.asarray(x, dtype=float))
        t, angle = log_pole(x)
        if np.any(t <= tol):
            raise BoundaryPointError("The cone vertex has no exterior normal")
        if self.ambient_dim == 2:
            to_lower = np.abs(np.angle(np.exp(1j * (angle - self.domain.lower))))
            to_upper = np.abs(np.angle(np.exp(1j * (angle - self.domain.upper))))
            gap = np.minimum(to_lower, to_upper)
            if np.any(gap > tol):
                raise BoundaryPointError(f"Point is {gap.max():.3e} rad away from the lateral boundary")
            return t, np.where(to_upper <= to_lower, self.domain.upper, self.domain.lower)
        s, phi = angle[:, 0], angle[:, 1]
        gap = np.abs(s - np.asarray(self.domain.boundary_radius(phi), dtype=float))
        if np.any(gap > tol):
            raise BoundaryPointError(f"Point is {gap.max():.3e} rad away from the lateral boundary")
        return t, phi

    def lateral_chart(self) -> LateralChart:
        return LateralChart(self.domain)

    def exterior_direction(self, phi: np.ndarray) -> np.ndarray:
        """d/ds theta at the boundary: transverse to the boundary and pointing out of D."""
        b = np.asarray(self.domain.boundary_radius(phi), dtype=float)
        return np.stack([np.cos(b) * np.cos(phi), np.cos(b) * np.sin(phi), -np.sin(b)], axis=-1)

    def second_form(self, x: np.ndarray) -> ConeBoundaryForm:
        t, angle = self.locate(x)
        if self.ambient_dim == 2:
            sign = np.where(angle == self.domain.upper, 1.0, -1.0)
            normal = sign[:, None] * np.stack([np.cos(angle), -np.sin(angle)], axis=-1)
            return ConeBoundaryForm(normal=normal, matrix=np.zeros((len(t), 2, 2)))
        jet = chart_jet(self.lateral_chart(), np.stack([t, angle], axis=-1), order=2)
        point = curvature_at(jet, orientation=self.exterior_direction(angle))
        dx = point.dx
        ginv = np.linalg.inv(point.metric)
        matrix = dx @ ginv @ point.second_form @ ginv @ np.swapaxes(dx, 1, 2)
        return ConeBoundaryForm(normal=point.nu, matrix=matrix)


def cone_normal_at(cone: ConeGeometry, x: np.ndarray) -> np.ndarray:
    return cone.second_form(x).normal


@dataclass(frozen=True)
class ConeFormValue:
    value: np.ndarray
    projection_defect: np.ndarray


def cone_II_at(cone: ConeGeometry, x: np.ndarray, v: np.ndarray, w: np.ndarray) -> ConeFormValue:
    """II^Sigma(v, w); v and w are projected onto T(dSigma) and the size of the removed part is reported."""
    form = cone.second_form(x)
    n = form.normal
    defect = np.maximum(np.abs(np.einsum("bk,bk->b", v, n)), np.abs(np.einsum("bk,bk->b", w, n)))
    return ConeFormValue(value=form.evaluate(v, w), projection_defect=defect)


def convexity_probe(
    cone: ConeGeometry, density: int = 64, radii: Sequence[float] = (0.5, 1.0, 2.0)
) -> ConvexityProbe:
    """
    Sample II^Sigma on the lateral boundary. The cone is convex iff II^Sigma >= 0; the radial
    direction always gives a zero eigenvalue, so the transverse eigenvalue is reported separately.
    """
    domain = cone.domain
    if cone.ambient_dim == 2:
        return ConvexityProbe(
            min_eigenvalue=0.0,
            min_transverse_eigenvalue=None,
            convex=domain.width <= math.pi,
            half_space=cone.half_space,
            samples=2 * len(radii),
        )
    phi = 2 * np.pi * np.arange(density) / density
    t = np.repeat(np.asarray(radii, dtype=float), density)
    phi = np.tile(phi, len(radii))
    jet = chart_jet(cone.lateral_chart(), np.stack([t, phi], axis=-1), order=2)
    point = curvature_at(jet, orientation=cone.exterior_direction(phi))
    eigen = point.principal_curvatures()
    x_phi = point.dx[:, :, 1]
    radial = point.x / np.linalg.norm(point.x, axis=1, keepdims=True)
    tau = x_phi - np.einsum("bk,bk->b", x_phi, radial)[:, None] * radial
    tau /= np.linalg.norm(tau, axis=1, keepdims=True)
    ginv = np.linalg.inv(point.metric)
    matrix = point.dx @ ginv @ point.second_form @ ginv @ np.swapaxes(point.dx, 1, 2)
    transverse = np.einsum("bi,bij,bj->b", tau, matrix, tau)
    min_eigen = float(eigen.min())
    probe = ConvexityProbe(
        min_eigenvalue=min_eigen,
        min_transverse_eigenvalue=float(transverse.min()),
        convex=min_eigen >= -settings.CONVEXITY_TOL,
        half_space=cone.half_space,
        samples=len(t),
    )
    log.debug(f"Convexity probe: {probe}")
    return probe


def build_cone(domain: SphericalDomain) -> ConeGeometry:
    return ConeGeometry(domain)
