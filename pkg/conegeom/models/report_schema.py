from typing import Literal, Optional

from pydantic import BaseModel, Field


class ConvexityProbe(BaseModel):
    min_eigenvalue: float
    min_transverse_eigenvalue: Optional[float] = None
    convex: bool
    half_space: bool
    samples: int


class SurfaceSummary(BaseModel):
    """Construction diagnostics of a surface: starshapedness and orthogonality to the cone wall."""

    family: str
    ambient_dim: int
    starshaped_min: float
    orthogonality_residual: float
    is_orthogonal: bool
    area: Optional[float] = None


# --- Identities ---


class IdentityReport(BaseModel):
    """
    One integral identity evaluated at one quadrature resolution.
    residual is lhs - rhs exactly as computed.
    """

    name: str
    lhs: float
    rhs: float
    residual: float
    level: int = 0
    resolution: str = ""
    details: dict[str, float] = Field(default_factory=dict)


class PointwiseReport(BaseModel):
    nodes: int
    boundary_nodes: int
    max_div_f1_error: float
    max_div_f2_error: Optional[float] = None
    max_tangency_defect: float
    max_flux_error: Optional[float] = None


class FlowExpansionRecord(BaseModel):
    t_step: float
    slope_lhs: float
    slope_lhs_half: float
    slope_lhs_richardson: float
    slope_rhs: float
    slope_error: float
    slope_relative_error: Optional[float] = None
    conormal_claim_error: float
    conormal_claim_scale: float
    conormal_claim_relative_error: Optional[float] = None


class RigidityReport(BaseModel):
    mean_curvature_bar: float
    area: float
    support_integral: float
    cmc_deviation: float
    sign_condition: float
    umbilicity_defect_integral: float
    umbilicity_defect_pointwise: float
    starshaped_min: float
    starshaped: bool
    half_space: bool
    convex_cone: bool
    chain_error: float
    mink2_consistency: Optional[float] = None


# --- Refinement ---


class ConvergenceRow(BaseModel):
    level: int
    resolution: str
    value: float
    delta_from_finest: Optional[float] = None
    error: Optional[float] = None
    order: Optional[float] = None


class ConvergenceTable(BaseModel):
    quantity: str
    rows: list[ConvergenceRow]
    observed_order: Optional[float] = None

    @property
    def values(self) -> list[float]:
        return [row.value for row in self.rows]


# --- Spectral ---


class SpectralResult(BaseModel):
    lambda1: float
    residual: float
    iterations: int
    vertices: int
    triangles: int
    h: float
    rings: int
    constant_overlap: float


class SpectralStudy(BaseModel):
    levels: list[SpectralResult]
    table: ConvergenceTable
    lambda1: float
    lambda1_extrapolated: Optional[float] = None
    observed_order: Optional[float] = None
    relative_gap: float = 0.0
    lambda1_domain: Optional[float] = None


# --- Stability ---


class StabilityReport(BaseModel):
    label: Literal["theorem-applicable", "diagnostic"]
    mean_curvature_bar: float
    cmc_deviation: float
    variation_integral: float
    q_form: float
    rel_lhs: float
    rel_rhs: float
    margin: float
    margin_low: float
    margin_high: float
    lambda1: float
    lambda1_delta: float
    field_average: list[float]
    field_deviation_integral: float
    yuppy_lhs: float
    flatness_correction: float
    chain_error: float
    dirichlet_energy: float
    poincare_margin: float
    corollary_condition: float
    corollary_applicable: bool
    half_space: bool
    convex_cone: bool
    convex_rel_lhs_nonpositive: Optional[bool] = None
    convex_lambda1_bound: Optional[bool] = None


class FrameEnergyRecord(BaseModel):
    c: float
    nodes: int
    max_error: float
    max_cmc_form_error: Optional[float] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    skipped: bool = False
    note: str = ""


class Provenance(BaseModel):
    version: str
    config_sha256: str
    seed: int
    command: str


class ResultBundle(BaseModel):
    """What one CLI run produced: written files and the outcome of every threshold check."""

    command: str
    output_dir: str
    files: list[str]
    checks: list[CheckResult]

    @property
    def failed(self) -> list[str]:
        return [check.name for check in self.checks if not check.passed and not check.skipped]

    @property
    def passed(self) -> bool:
        return not self.failed
