"""Exception hierarchy shared by the geometry engine, the services and the CLI."""


class ConeGeomError(Exception):
    """Base error. ``detail`` is the human-readable reason reported by the CLI."""

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ChartDegeneracyError(ConeGeomError):
    """The first-derivative matrix of a chart is rank deficient (or the metric is singular)."""


class DomainError(ConeGeomError):
    """A parameter point lies outside a chart domain, or a domain / profile spec is invalid."""


class BoundaryPointError(ConeGeomError):
    """A point is not on the lateral boundary of the cone (or sits at the vertex)."""


class DimensionError(ConeGeomError):
    """The requested quantity does not exist in this ambient dimension (e.g. sigma_2 for N = 2)."""


class FocalDistanceError(ConeGeomError):
    """A normal offset crosses the focal set of the base surface."""


class NonTangentFieldError(ConeGeomError):
    """A vector field handed to a divergence check is not tangent to the surface."""


class QuadratureError(ConeGeomError):
    """An integrand produced non-finite values at some node."""


class MeshError(ConeGeomError):
    """Degenerate or inverted triangles in a parameter-space mesh."""


class ConvergenceError(ConeGeomError):
    """The eigensolver did not reach the requested tolerance."""


class ConfigError(ConeGeomError):
    """An experiment config failed schema validation or could not be read."""


class SuiteFailure(ConeGeomError):
    """One or more threshold checks failed; ``failed`` lists their names."""

    def __init__(self, detail: str, failed: list[str]):
        super().__init__(detail)
        self.failed = failed
