import enum
import math
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from conegeom.core.config import settings


class Suite(str, enum.Enum):
    MINK1 = "mink1"
    MINK1_STRICT = "mink1-strict"
    MINK2 = "mink2"
    DIVERGENCE = "divergence"
    POINTWISE = "pointwise"
    FLOW = "flow"
    RIGIDITY = "rigidity"


class SweepAxis(str, enum.Enum):
    EPS = "eps"
    ALPHA = "alpha"
    DELTA = "delta"


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


# --- Cone specs ---


class CapSpec(StrictModel):
    alpha: float = Field(gt=0, lt=math.pi)


class PerturbedCapSpec(StrictModel):
    alpha: float = Field(gt=0, lt=math.pi)
    delta: float
    k: int = Field(ge=1)


class WedgeSpec(StrictModel):
    angle: float = Field(gt=0, lt=math.pi)


class ConeSpec(StrictModel):
    """Exactly one cone family."""

    cap: Optional[CapSpec] = None
    perturbed_cap: Optional[PerturbedCapSpec] = None
    wedge: Optional[WedgeSpec] = None

    @model_validator(mode="after")
    def exactly_one(self):
        chosen = [name for name in ("cap", "perturbed_cap", "wedge") if getattr(self, name) is not None]
        if len(chosen) != 1:
            raise ValueError(f"cone must name exactly one of cap, perturbed_cap, wedge (got {chosen or 'none'})")
        return self

    @property
    def family(self) -> str:
        return next(name for name in ("cap", "perturbed_cap", "wedge") if getattr(self, name) is not None)

    @property
    def dimension(self) -> int:
        return 2 if self.wedge is not None else 3


# --- Profile specs ---


class ConstantProfileSpec(StrictModel):
    R: float = Field(1.0, gt=0)


class AxisymProfileSpec(StrictModel):
    R: float = Field(1.0, gt=0)
    eps: float = Field(0.0, gt=-1, lt=1)


class BumpProfileSpec(StrictModel):
    R: float = Field(1.0, gt=0)
    eps: float = Field(0.0, gt=-1, lt=1)
    k: int = Field(2, ge=1)


class LinearViolationProfileSpec(StrictModel):
    R: float = Field(1.0, gt=0)
    eps: float = Field(0.1, gt=-1, lt=1)


class ProfileSpec(StrictModel):
    """Exactly one radial profile family."""

    constant: Optional[ConstantProfileSpec] = None
    axisym: Optional[AxisymProfileSpec] = None
    bump: Optional[BumpProfileSpec] = None
    linear_violation: Optional[LinearViolationProfileSpec] = None

    @model_validator(mode="after")
    def exactly_one(self):
        names = ("constant", "axisym", "bump", "linear_violation")
        chosen = [name for name in names if getattr(self, name) is not None]
        if len(chosen) != 1:
            raise ValueError(f"profile must name exactly one of {', '.join(names)} (got {chosen or 'none'})")
        return self

    @property
    def family(self) -> str:
        return next(
            name for name in ("constant", "axisym", "bump", "linear_violation") if getattr(self, name) is not None
        )

    @property
    def params(self) -> BaseModel:
        return getattr(self, self.family)


# --- Thresholds ---


class Thresholds(StrictModel):
    """Pass/fail tolerances; defaults follow the acceptance values of each check."""

    divergence: float = 1e-7
    mink1: float = 1e-8
    mink1_negative_control: float = 1e-7
    mink2: float = 1e-6
    mink2_consistency: float = 1e-9
    pointwise: float = 1e-7
    flow_slope: float = 1e-3
    flow_claim: float = 1e-4
    flow_absolute: float = 1e-8
    rigidity_chain: float = 1e-12
    stability_chain: float = 1e-12
    reilly: float = 1e-12
    frame_energy: float = 1e-7
    poincare: float = 1e-9
    sign_condition: float = 1e-10
    constant_overlap: float = 1e-8
    lambda1_convex_slack: float = 0.01


class SweepSpec(StrictModel):
    axis: Optional[SweepAxis] = None
    values: list[float] = Field(default_factory=list)


class ExperimentConfig(StrictModel):
    """One experiment: a cone, a surface profile over it, resolutions and the suites to run."""

    cone: ConeSpec
    profile: ProfileSpec = Field(default_factory=lambda: ProfileSpec(constant=ConstantProfileSpec()))
    dimension: Optional[int] = Field(None, ge=2, le=3)
    n_phi: int = Field(settings.DEFAULT_N_PHI, ge=4)
    n_s: int = Field(settings.DEFAULT_N_S, ge=2)
    n_b: int = Field(settings.DEFAULT_N_B, ge=4)
    levels: int = Field(settings.DEFAULT_LEVELS, ge=1, le=6)
    mesh_levels: list[int] = Field(default_factory=lambda: list(settings.DEFAULT_MESH_LEVELS))
    mesh_h: list[float] = Field(default_factory=list)
    suites: list[Suite] = Field(
        default_factory=lambda: [s for s in Suite if s != Suite.MINK1_STRICT]
    )
    thresholds: Thresholds = Field(default_factory=Thresholds)
    output_dir: Optional[str] = None
    seed: int = settings.DEFAULT_SEED
    node_samples: int = Field(settings.NODE_SAMPLE_SIZE, ge=1)
    t_step: float = Field(settings.FLOW_T_STEP, gt=0)
    sweep: SweepSpec = Field(default_factory=SweepSpec)

    @model_validator(mode="after")
    def dimension_matches_cone(self):
        if self.dimension is None:
            self.dimension = self.cone.dimension
        elif self.dimension != self.cone.dimension:
            raise ValueError(f"dimension {self.dimension} does not match a {self.cone.family} cone")
        if any(level < 2 for level in self.mesh_levels):
            raise ValueError("mesh_levels are ring counts and must be >= 2")
        if any(h <= 0 for h in self.mesh_h) or any(a <= b for a, b in zip(self.mesh_h, self.mesh_h[1:])):
            raise ValueError("mesh_h are target edge lengths and must be positive and strictly decreasing")
        return self
