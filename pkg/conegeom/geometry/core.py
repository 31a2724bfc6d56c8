"""
Charts, chart jets and the pointwise extrinsic geometry of hypersurfaces in R^N.

Everything here is batched: a chart is evaluated at B parameter points at once and every
returned array carries the batch on its leading axis.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Sequence, Union

import numpy as np

from conegeom.core.errors import ChartDegeneracyError, DimensionError, DomainError
from conegeom.geometry import jets
from conegeom.geometry.jets import Jet

log = logging.getLogger(__name__)

_RANK_TOL = 1e-14


class Orientation(str, Enum):
    CHART = "chart"  # the cofactor normal of the chart as it comes
    OUTWARD = "outward"  # flipped per node so that <x, nu> > 0
    REVERSED = "reversed"


OrientationLike = Union[Orientation, np.ndarray]


# --- Charts ---


class Chart(ABC):
    """A parametrization of an (N-1)-dimensional patch in R^N."""

    ambient_dim: int

    @property
    def param_dim(self) -> int:
        return self.ambient_dim - 1

    def contains(self, u: np.ndarray) -> np.ndarray:
        return np.ones(len(u), dtype=bool)

    @abstractmethod
    def position_jets(self, u: np.ndarray, order: int) -> list[Jet]:
        """Jets of the N position components at the parameter points ``u`` (shape (B, m))."""


class ClosedFormChart(Chart):
    """A chart written as a composition of jet-aware elementary functions."""

    def position_jets(self, u: np.ndarray, order: int) -> list[Jet]:
        return list(self.evaluate(jets.variables(u, order)))

    @abstractmethod
    def evaluate(self, u: list[Jet]) -> Sequence[Jet]:
        ...


class PlanarChart(ClosedFormChart):
    """The flat chart u -> (u, 0) of a coordinate hyperplane."""

    def __init__(self, ambient_dim: int = 3):
        self.ambient_dim = ambient_dim

    def evaluate(self, u: list[Jet]) -> list[Jet]:
        return list(u) + [u[0] * 0.0]


class PointChart(Chart):
    """
    A chart only known through point evaluations. Derivatives up to order 2 come from
    central differences with step ``step`` and one level of Richardson extrapolation.
    """

    def __init__(
        self,
        evaluate_points: Callable[[np.ndarray], np.ndarray],
        ambient_dim: int,
        step: float = 1e-3,
        domain: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    ):
        self.evaluate_points = evaluate_points
        self.ambient_dim = ambient_dim
        self.step = step
        self._domain = domain

    def contains(self, u: np.ndarray) -> np.ndarray:
        if self._domain is None:
            return super().contains(u)
        return self._domain(u)

    def _differences(self, u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
        f = self.evaluate_points
        m = u.shape[1]
        f0 = f(u)
        grad = np.zeros(f0.shape + (m,))
        hess = np.zeros(f0.shape + (m, m))
        unit = np.eye(m)
        for i in range(m):
            fp, fm = f(u + h * unit[i]), f(u - h * unit[i])
            grad[..., i] = (fp - fm) / (2 * h)
            hess[..., i, i] = (fp - 2 * f0 + fm) / h**2
            for j in range(i):
                e = h * (unit[i] + unit[j])
                d = h * (unit[i] - unit[j])
                mixed = (f(u + e) - f(u + d) - f(u - d) + f(u - e)) / (4 * h**2)
                hess[..., i, j] = hess[..., j, i] = mixed
        return grad, hess

    def position_jets(self, u: np.ndarray, order: int) -> list[Jet]:
        if order > 2:
            raise ValueError("Finite-difference charts provide derivatives up to order 2")
        value = self.evaluate_points(u)
        coarse_grad, coarse_hess = self._differences(u, self.step)
        fine_grad, fine_hess = self._differences(u, self.step / 2)
        grad = (4 * fine_grad - coarse_grad) / 3
        hess = (4 * fine_hess - coarse_hess) / 3
        return [
            Jet.from_derivatives(value[:, k], grad[:, k], hess[:, k]).truncate(order)
            for k in range(self.ambient_dim)
        ]


@dataclass(frozen=True)
class ChartJet:
    """Position jets of a chart at a batch of parameter points."""

    u: np.ndarray
    position: tuple[Jet, ...]

    @property
    def order(self) -> int:
        return self.position[0].order

    @property
    def ambient_dim(self) -> int:
        return len(self.position)

    @property
    def param_dim(self) -> int:
        return self.u.shape[1]

    def _partials(self, degree: int) -> np.ndarray:
        if self.order < degree:
            raise ValueError(f"Chart jet of order {self.order} has no derivatives of order {degree}")
        m = self.param_dim
        out = np.zeros((len(self.u), self.ambient_dim) + (m,) * degree)
        for idx in np.ndindex(*((m,) * degree)):
            alpha = [0] * m
            for i in idx:
                alpha[i] += 1
            for k, comp in enumerate(self.position):
                out[(slice(None), k) + idx] = comp.derivative(alpha)
        return out

    @cached_property
    def x(self) -> np.ndarray:
        return jets.values(self.position)

    @cached_property
    def dx(self) -> np.ndarray:
        """First derivatives, shape (B, N, m)."""
        return self._partials(1)

    @cached_property
    def ddx(self) -> np.ndarray:
        return self._partials(2)

    @cached_property
    def tangents(self) -> list[list[Jet]]:
        """``tangents[i]`` is the jet vector of the i-th coordinate tangent."""
        return [[comp.diff(i) for comp in self.position] for i in range(self.param_dim)]


def _as_params(chart: Chart, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None] if chart.param_dim == 1 else u[None, :]
    return u


def chart_jet(chart: Chart, u: np.ndarray, order: int = 2, check_domain: bool = True) -> ChartJet:
    """Evaluate a chart with derivatives through ``order`` at the points ``u``."""
    u = _as_params(chart, u)
    if check_domain:
        inside = chart.contains(u)
        if not np.all(inside):
            raise DomainError(f"{int(np.count_nonzero(~inside))} parameter point(s) lie outside the chart domain")
    result = ChartJet(u, tuple(chart.position_jets(u, order)))
    if order >= 1:
        g = metric_tensor(result.dx)
        scale = np.prod(np.diagonal(g, axis1=1, axis2=2), axis=1)
        det = np.linalg.det(g)
        bad = ~(det > _RANK_TOL * scale)
        if np.any(bad):
            raise ChartDegeneracyError(f"Chart derivative matrix is rank deficient at {int(np.count_nonzero(bad))} node(s)")
    return result


def evaluate_points(chart: Chart, u: np.ndarray) -> np.ndarray:
    return chart_jet(chart, u, order=0).x


# --- Pointwise geometry ---


def metric_tensor(dx: np.ndarray) -> np.ndarray:
    return np.einsum("bki,bkj->bij", dx, dx)


def _cofactor_normal(dx: np.ndarray) -> np.ndarray:
    n = dx.shape[1]
    cols = []
    for k in range(n):
        minor = np.delete(dx, k, axis=1)
        cols.append((-1) ** k * np.linalg.det(minor))
    return np.stack(cols, axis=-1)


def _orientation_sign(nu: np.ndarray, x: np.ndarray, orientation: OrientationLike) -> np.ndarray:
    if isinstance(orientation, np.ndarray):
        probe = np.einsum("bk,bk->b", nu, orientation)
    elif orientation == Orientation.OUTWARD:
        probe = np.einsum("bk,bk->b", nu, x)
    elif orientation == Orientation.REVERSED:
        return -np.ones(len(nu))
    else:
        return np.ones(len(nu))
    return np.where(probe < 0, -1.0, 1.0)


def unit_normal(dx: np.ndarray, x: np.ndarray, orientation: OrientationLike = Orientation.OUTWARD) -> np.ndarray:
    nu = _cofactor_normal(dx)
    nu = nu / np.linalg.norm(nu, axis=1, keepdims=True)
    return nu * _orientation_sign(nu, x, orientation)[:, None]


@dataclass(frozen=True)
class CurvaturePoint:
    """
    Extrinsic geometry at a batch of nodes: position, oriented unit normal, metric g, second
    fundamental form ii (sign fixed so a sphere with outward normal has H = 1/R), shape operator
    S = g^-1 ii, normalized mean curvature H = tr(S)/(N-1), normalized sigma_2 (None when N = 2),
    the area weight sqrt(det g) and the support function <x, nu>.
    """

    x: np.ndarray
    nu: np.ndarray
    dx: np.ndarray
    metric: np.ndarray
    second_form: np.ndarray
    shape: np.ndarray
    mean_curvature: np.ndarray
    sigma2: Optional[np.ndarray]
    area_weight: np.ndarray
    support: np.ndarray

    @property
    def ambient_dim(self) -> int:
        return self.x.shape[1]

    @cached_property
    def shape_squared_trace(self) -> np.ndarray:
        return np.einsum("bij,bji->b", self.shape, self.shape)

    @cached_property
    def symmetric_shape(self) -> np.ndarray:
        """The shape operator in a g-orthonormal basis (symmetric)."""
        chol = np.linalg.cholesky(self.metric)
        inv = np.linalg.inv(chol)
        return inv @ self.second_form @ np.swapaxes(inv, 1, 2)

    def principal_curvatures(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.symmetric_shape)


def curvature_at(jet: ChartJet, orientation: OrientationLike = Orientation.OUTWARD) -> CurvaturePoint:
    if jet.order < 2:
        raise ValueError("Curvature needs a chart jet of order >= 2")
    x, dx, ddx = jet.x, jet.dx, jet.ddx
    nu = unit_normal(dx, x, orientation)
    g = metric_tensor(dx)
    ii = -np.einsum("bkij,bk->bij", ddx, nu)
    shape = np.linalg.solve(g, ii)
    m = dx.shape[2]
    trace = np.trace(shape, axis1=1, axis2=2)
    mean = trace / m
    sigma2 = None
    if m >= 2:
        trace_sq = np.einsum("bij,bji->b", shape, shape)
        sigma2 = (trace**2 - trace_sq) / (m * (m - 1))
    return CurvaturePoint(
        x=x,
        nu=nu,
        dx=dx,
        metric=g,
        second_form=ii,
        shape=shape,
        mean_curvature=mean,
        sigma2=sigma2,
        area_weight=np.sqrt(np.linalg.det(g)),
        support=np.einsum("bk,bk->b", x, nu),
    )


# --- Jet-level geometry (for fields that must be differentiated again) ---


def _jet_det(rows: list[list]) -> Jet:
    if len(rows) == 1:
        return rows[0][0]
    total = None
    for j, head in enumerate(rows[0]):
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        term = head * _jet_det(minor)
        if j % 2:
            term = -term
        total = term if total is None else total + term
    return total


def _jet_inverse(matrix: list[list[Jet]]) -> list[list[Jet]]:
    m = len(matrix)
    if m == 1:
        return [[jets.reciprocal(matrix[0][0])]]
    if m == 2:
        inv_det = jets.reciprocal(matrix[0][0] * matrix[1][1] - matrix[0][1] * matrix[1][0])
        return [
            [matrix[1][1] * inv_det, -matrix[0][1] * inv_det],
            [-matrix[1][0] * inv_det, matrix[0][0] * inv_det],
        ]
    raise DimensionError(f"Jet metric inverse is implemented for surfaces of dimension <= 2, got {m}")


@dataclass(frozen=True)
class JetGeometry:
    """Normal, metric, second fundamental form and mean curvature as jets (orders drop by 1 per derivative)."""

    position: tuple[Jet, ...]
    tangents: list[list[Jet]]
    normal: list[Jet]
    metric: list[list[Jet]]
    metric_inverse: list[list[Jet]]
    second_form: list[list[Jet]]
    mean_curvature: Jet

    def normal_derivative(self, i: int) -> list[Jet]:
        return [c.diff(i) for c in self.normal]


def normal_jets(jet: ChartJet, orientation: OrientationLike = Orientation.OUTWARD) -> list[Jet]:
    """Unit normal as jets of order ``jet.order - 1``; the orientation sign is fixed per node."""
    if jet.order < 1:
        raise ValueError("Normal jets need a chart jet of order >= 1")
    tangents = jet.tangents
    n, m = jet.ambient_dim, jet.param_dim
    raw = []
    for k in range(n):
        rows = [[tangents[i][l] for i in range(m)] for l in range(n) if l != k]
        comp = _jet_det(rows)
        raw.append(comp if k % 2 == 0 else -comp)
    inv_len = jets.reciprocal(jets.norm(raw))
    unit = [c * inv_len for c in raw]
    sign = _orientation_sign(jets.values(unit), jet.x, orientation)
    return [c * sign for c in unit]


def jet_geometry(jet: ChartJet, orientation: OrientationLike = Orientation.OUTWARD) -> JetGeometry:
    if jet.order < 2:
        raise ValueError("Jet geometry needs a chart jet of order >= 2")
    tangents = jet.tangents
    m = jet.param_dim
    normal = normal_jets(jet, orientation)
    metric = [[jets.dot(tangents[i], tangents[j]) for j in range(m)] for i in range(m)]
    metric_inverse = _jet_inverse(metric)
    dnu = [[c.diff(i) for c in normal] for i in range(m)]
    second_form = [[jets.dot(dnu[i], tangents[j]) for j in range(m)] for i in range(m)]
    trace = None
    for i in range(m):
        for j in range(m):
            term = metric_inverse[i][j] * second_form[j][i]
            trace = term if trace is None else trace + term
    return JetGeometry(
        position=jet.position,
        tangents=tangents,
        normal=normal,
        metric=metric,
        metric_inverse=metric_inverse,
        second_form=second_form,
        mean_curvature=trace / m,
    )


def field_derivatives(field: Sequence[Jet]) -> np.ndarray:
    """Parameter derivatives of a jet vector field, shape (B, N, m)."""
    m = field[0].nvars
    return np.stack([np.stack([c.diff(i).value for i in range(m)], axis=-1) for c in field], axis=1)


def tangential_divergence(field: Sequence[Jet], jet: ChartJet) -> np.ndarray:
    """div_Sigma F = g^{ij} <d_i F, x_j> at every node."""
    dF = field_derivatives(field)
    dx = jet.dx
    ginv = np.linalg.inv(metric_tensor(dx))
    return np.einsum("bij,bki,bkj->b", ginv, dF, dx)


@dataclass(frozen=True)
class OrthonormalFrame:
    """Tangent frame e_j = sum_i dx_i E_ij obtained by Gram-Schmidt on the coordinate tangents."""

    vectors: np.ndarray
    coefficients: np.ndarray

    def directional(self, f: Jet) -> np.ndarray:
        """e_j(f) for every frame vector, shape (B, m)."""
        grad = np.stack([f.diff(i).value for i in range(f.nvars)], axis=-1)
        return np.einsum("bi,bij->bj", grad, self.coefficients)

    def gradient(self, f: Jet) -> np.ndarray:
        return np.einsum("bj,bkj->bk", self.directional(f), self.vectors)

    def covariant(self, field: Sequence[Jet]) -> np.ndarray:
        """Ambient derivatives D_{e_j} F, shape (B, m, N)."""
        return np.einsum("bki,bij->bjk", field_derivatives(field), self.coefficients)


def orthonormal_frame(jet: ChartJet) -> OrthonormalFrame:
    q, r = np.linalg.qr(jet.dx)
    signs = np.sign(np.diagonal(r, axis1=1, axis2=2))
    signs[signs == 0] = 1.0
    q = q * signs[:, None, :]
    r = r * signs[:, :, None]
    return OrthonormalFrame(vectors=q, coefficients=np.linalg.inv(r))
