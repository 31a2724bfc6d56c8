"""
Experiment driver behind the CLI: builds the cone and surface named by an ExperimentConfig, runs
the requested suites over refinement levels, evaluates threshold checks and hands everything to
the ReportService. Levels and sweep points may run on a thread pool; results are collected in
input order before anything is written, so outputs only depend on config and seed.
"""

import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterator, Optional

import numpy as np
import orjson
from pydantic import ValidationError

from conegeom import __version__
from conegeom.core.errors import ConfigError, DimensionError, DomainError, SuiteFailure
from conegeom.geometry.cone import ArcDomain, CapDomain, PerturbedCapDomain, SphericalDomain, build_cone, convexity_probe
from conegeom.geometry.quadrature import QuadratureRule, build_rule, refinement_levels, sample_surface, tabulate
from conegeom.geometry.surfaces import PolarGraphSurface, boundary_data_at, build_polar_graph, build_profile
from conegeom.models.experiment_schema import ConeSpec, ExperimentConfig, Suite, SweepAxis
from conegeom.models.report_schema import CheckResult, ConvergenceTable, IdentityReport, Provenance, ResultBundle
from conegeom.services import identity_service, stability_service
from conegeom.services.report_service import ReportService
from conegeom.services.spectral_service import lambda1_refinement

log = logging.getLogger(__name__)

_CONVERGENCE_COLUMNS = ["quantity", "level", "resolution", "value", "delta_from_finest", "error", "order"]
_CHECK_COLUMNS = ["name", "passed", "skipped", "value", "threshold", "note"]
_SWEEP_COLUMNS = [
    "value",
    "mink2_lhs",
    "mink2_rhs",
    "mink2_residual",
    "correction_magnitude",
    "sign_condition",
    "umbilicity_defect_integral",
    "umbilicity_defect_pointwise",
    "cmc_deviation",
    "orthogonality_residual",
    "convex_cone",
    "half_space",
]
_SPECTRUM_COLUMNS = ["rings", "vertices", "triangles", "h", "lambda1", "residual", "iterations", "order"]


# --- Config ---


def load_experiment_config(path: str) -> ExperimentConfig:
    try:
        raw = orjson.loads(Path(path).read_bytes())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"Config file {path} does not match the experiment schema: {problems}")


def config_digest(config: ExperimentConfig) -> str:
    """sha256 of the canonical config, ignoring where results are written."""
    payload = config.model_dump(mode="json", exclude={"output_dir"})
    return hashlib.sha256(orjson.dumps(payload, option=orjson.OPT_SORT_KEYS)).hexdigest()


def build_domain(spec: ConeSpec) -> SphericalDomain:
    if spec.cap is not None:
        return CapDomain(spec.cap.alpha)
    if spec.perturbed_cap is not None:
        p = spec.perturbed_cap
        return PerturbedCapDomain(p.alpha, p.delta, p.k)
    return ArcDomain.wedge(spec.wedge.angle)


def build_surface(config: ExperimentConfig) -> PolarGraphSurface:
    cone = build_cone(build_domain(config.cone))
    profile = build_profile(config.profile.family, **config.profile.params.model_dump())
    return build_polar_graph(cone, profile)


def require_passed(bundle: ResultBundle) -> ResultBundle:
    if not bundle.passed:
        notes = [f"{c.name} ({c.note})" if c.note else c.name for c in bundle.checks if c.name in bundle.failed]
        raise SuiteFailure(f"Failed checks: {', '.join(notes)}", bundle.failed)
    return bundle


# --- Checks ---


def _below(name: str, value: Optional[float], threshold: float, note: str = "") -> CheckResult:
    if value is None or not math.isfinite(value):
        return CheckResult(name=name, passed=False, value=value, threshold=threshold, note=note or "not computed")
    return CheckResult(name=name, passed=abs(value) <= threshold, value=value, threshold=threshold, note=note)


def _skipped(name: str, note: str) -> CheckResult:
    log.warning(f"Check '{name}' skipped: {note}")
    return CheckResult(name=name, passed=False, skipped=True, note=note)


class ExperimentService:
    def __init__(self, config: ExperimentConfig, output_dir: Optional[str] = None, threads: int = 1):
        self.config = config
        self.threads = max(1, threads)
        try:
            self.surface = build_surface(config)
        except DomainError as e:
            raise ConfigError(f"Config describes an invalid cone or surface: {e.detail}")
        self.summary = self.surface.summary()
        self.report = ReportService(output_dir or config.output_dir)
        self.checks: list[CheckResult] = []

    @contextmanager
    def _mapper(self) -> Iterator[Callable]:
        if self.threads == 1:
            yield map
            return
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            yield pool.map

    def _provenance(self, command: str) -> Provenance:
        return Provenance(version=__version__, config_sha256=config_digest(self.config), seed=self.config.seed, command=command)

    def _bundle(self, command: str) -> ResultBundle:
        self.report.write_csv(f"{command}_checks.csv", [c.model_dump() for c in self.checks], _CHECK_COLUMNS)
        self.report.write_summary(
            f"{command}_summary.html",
            command=command,
            provenance=self._provenance(command),
            surface=self.summary,
            checks=self.checks,
            plots=[path.name for path in self.report.written if path.suffix == ".svg"],
        )
        bundle = ResultBundle(
            command=command,
            output_dir=str(self.report.output_dir),
            files=[path.name for path in self.report.written],
            checks=self.checks,
        )
        log.info(f"{command}: {len(self.checks) - len(bundle.failed)}/{len(self.checks)} checks passed or skipped")
        return bundle

    def _require_three_dimensions(self, what: str) -> None:
        if self.surface.ambient_dim != 3:
            raise DimensionError(f"{what} needs a cone in R^3 (got N = {self.surface.ambient_dim})")

    # --- verify ---

    def _evaluate_level(self, rule: QuadratureRule) -> dict[str, IdentityReport]:
        suites = set(self.config.suites)
        surface = self.surface
        sample = sample_surface(surface, rule, order=3)
        boundary = boundary_data_at(surface, rule.boundary_angles)
        reports: dict[str, IdentityReport] = {}
        if suites & {Suite.MINK1, Suite.MINK1_STRICT}:
            reports["mink1"] = identity_service.mink1_report(surface, rule, sample, boundary)
        if Suite.MINK2 in suites:
            if surface.ambient_dim >= 3:
                reports["mink2"] = identity_service.mink2_report(surface, rule, sample, boundary)
            else:
                term = identity_service.mink2_boundary_term(surface, rule, boundary)
                reports["mink2"] = IdentityReport(
                    name="mink2_boundary_term",
                    lhs=term,
                    rhs=0.0,
                    residual=term,
                    level=rule.level,
                    resolution=rule.resolution,
                )
        if Suite.DIVERGENCE in suites:
            for field in ("F1", "F2"):
                report = identity_service.divergence_theorem_check(surface, rule, field, sample)
                reports[report.name] = report
        log.debug(f"Level {rule.level} ({rule.resolution}) done")
        return reports

    def _identity_checks(self, finest: dict[str, IdentityReport]) -> None:
        th = self.config.thresholds
        summary = self.summary
        suites = set(self.config.suites)
        not_orthogonal = f"orthogonality residual {summary.orthogonality_residual:.3e}"

        if "mink1" in finest:
            report = finest["mink1"]
            if Suite.MINK1 in suites and summary.is_orthogonal:
                self.checks.append(_below("mink1", report.residual, th.mink1))
            elif Suite.MINK1 in suites:
                self.checks.append(_skipped("mink1", f"surface not orthogonal to the cone, {not_orthogonal}"))
                self.checks.append(
                    _below("mink1_negative_control", report.details["boundary_residual"], th.mink1_negative_control)
                )
            if Suite.MINK1_STRICT in suites:
                note = "" if summary.is_orthogonal else f"surface not orthogonal to the cone, {not_orthogonal}"
                check = _below("mink1-strict", report.residual, th.mink1, note)
                if not summary.is_orthogonal:
                    check.passed = False
                self.checks.append(check)

        if "mink2" in finest:
            report = finest["mink2"]
            if self.surface.ambient_dim < 3:
                check = _below("mink2_boundary_term", report.residual, 0.0)
                self.checks.append(check)
            elif not summary.is_orthogonal:
                self.checks.append(_skipped("mink2", f"identity assumes orthogonality, {not_orthogonal}"))
            else:
                self.checks.append(_below("mink2", report.residual, th.mink2))
                self.checks.append(_below("mink2_consistency", report.details["consistency"], th.mink2_consistency))

        for name in ("divergence_F1", "divergence_F2"):
            if name in finest:
                self.checks.append(_below(name, finest[name].residual, th.divergence))

    def _pointwise_checks(self, report) -> None:
        th = self.config.thresholds
        self.checks.append(_below("pointwise_div_f1", report.max_div_f1_error, th.pointwise))
        self.checks.append(_below("pointwise_div_f2", report.max_div_f2_error, th.pointwise))
        if report.max_flux_error is None:
            self.checks.append(_skipped("pointwise_flux", "surface not orthogonal to the cone"))
        else:
            self.checks.append(_below("pointwise_flux", report.max_flux_error, th.pointwise))

    def _flow_checks(self, record) -> None:
        th = self.config.thresholds
        if record.slope_relative_error is not None:
            self.checks.append(_below("flow_slope", record.slope_relative_error, th.flow_slope))
        else:
            self.checks.append(_below("flow_slope", record.slope_error, th.flow_absolute))
        if not self.summary.is_orthogonal:
            self.checks.append(_skipped("flow_conormal_claim", "surface not orthogonal to the cone"))
        elif record.conormal_claim_relative_error is not None:
            self.checks.append(_below("flow_conormal_claim", record.conormal_claim_relative_error, th.flow_claim))
        else:
            self.checks.append(_below("flow_conormal_claim", record.conormal_claim_error, th.flow_absolute))

    def _rigidity_checks(self, report) -> None:
        th = self.config.thresholds
        self.checks.append(_below("rigidity_chain", report.chain_error, th.rigidity_chain))
        if report.convex_cone and report.starshaped and self.summary.is_orthogonal:
            self.checks.append(_below("sign_condition", min(report.sign_condition, 0.0), th.sign_condition))
        else:
            self.checks.append(_skipped("sign_condition", "needs a convex cone and a starshaped orthogonal surface"))
        if report.mink2_consistency is not None:
            self.checks.append(_below("rigidity_mink2_consistency", report.mink2_consistency, th.mink2_consistency))

    def run_verify(self) -> ResultBundle:
        config = self.config
        suites = set(config.suites)
        rules = refinement_levels(self.surface.domain, config.levels, config.n_phi, config.n_s, config.n_b)
        log.info(f"verify: {self.summary.family} surface, {len(rules)} level(s), suites {sorted(s.value for s in suites)}")
        with self._mapper() as mapper:
            levels = list(mapper(self._evaluate_level, rules))

        tables: list[ConvergenceTable] = []
        for name in levels[0]:
            tables.append(tabulate(name, [r.resolution for r in rules], [lv[name].residual for lv in levels]))
        self._identity_checks(levels[-1])

        payload: dict = {
            "provenance": self._provenance("verify"),
            "surface": self.summary,
            "levels": [list(lv.values()) for lv in levels],
            "tables": tables,
        }
        base = rules[0]
        if Suite.POINTWISE in suites:
            pointwise = identity_service.pointwise_identity_suite(self.surface, config.node_samples, config.seed)
            self._pointwise_checks(pointwise)
            payload["pointwise"] = pointwise
        if Suite.FLOW in suites:
            flow = identity_service.flow_expansion_check(self.surface, base, config.t_step)
            self._flow_checks(flow)
            payload["flow"] = flow
        if Suite.RIGIDITY in suites:
            if self.surface.ambient_dim >= 3:
                rigidity = identity_service.rigidity_report(self.surface, rules[-1])
                self._rigidity_checks(rigidity)
                payload["rigidity"] = rigidity
            else:
                self.checks.append(_skipped("rigidity_chain", "rigidity needs N >= 3"))
        payload["checks"] = self.checks

        self.report.write_json("verify_report.json", payload)
        rows = [{"quantity": t.quantity, **row.model_dump()} for t in tables for row in t.rows]
        self.report.write_csv("verify_convergence.csv", rows, _CONVERGENCE_COLUMNS)
        self.report.write_line_plot(
            "verify_residuals.svg",
            "Identity residuals under refinement",
            "n_s",
            "|residual|",
            {t.quantity: ([r.n_s for r in rules], [abs(v) for v in t.values]) for t in tables},
            log_log=True,
        )
        return self._bundle("verify")

    # --- spectrum / stability ---

    def _spectral_study(self):
        self._require_three_dimensions("Finite element spectra")
        with self._mapper() as mapper:
            return lambda1_refinement(
                self.surface, self.config.mesh_levels, self.config.seed, mapper, target_h=self.config.mesh_h
            )

    def _write_spectrum(self, command: str, study) -> None:
        rows = [
            {**level.model_dump(exclude={"constant_overlap"}), "order": row.order}
            for level, row in zip(study.levels, study.table.rows)
        ]
        self.report.write_csv(f"{command}_spectrum.csv", rows, _SPECTRUM_COLUMNS)
        self.report.write_line_plot(
            f"{command}_spectrum.svg",
            "lambda1 under mesh refinement",
            "h",
            "lambda1",
            {"lambda1": ([r.h for r in study.levels], [r.lambda1 for r in study.levels])},
        )

    def run_spectrum(self) -> ResultBundle:
        th = self.config.thresholds
        study = self._spectral_study()
        for level in study.levels:
            self.checks.append(_below(f"constant_overlap_rings_{level.rings}", level.constant_overlap, th.constant_overlap))
        probe = convexity_probe(self.surface.cone)
        if study.lambda1_domain is not None and probe.convex:
            # lambda1(omega) >= N - 1 on convex cones, up to the discretization slack
            bound = (self.surface.ambient_dim - 1) * (1 - th.lambda1_convex_slack)
            deficit = max(0.0, bound - study.lambda1_domain)
            self.checks.append(_below("lambda1_convex_bound", deficit, 0.0))
        self.report.write_json(
            "spectrum_report.json", {"provenance": self._provenance("spectrum"), "spectrum": study, "checks": self.checks}
        )
        self._write_spectrum("spectrum", study)
        return self._bundle("spectrum")

    def run_stability(self) -> ResultBundle:
        config = self.config
        th = config.thresholds
        study = self._spectral_study()
        lambda1 = study.lambda1_extrapolated if study.lambda1_extrapolated is not None else study.lambda1
        rule = build_rule(self.surface.domain, config.n_phi, config.n_s, config.n_b)
        report = stability_service.stability_report(self.surface, rule, lambda1, study.relative_gap)

        rng = np.random.default_rng(config.seed)
        reilly = max(stability_service.reilly_average_check(rng.standard_normal(3)) for _ in range(3))
        frames = [
            stability_service.frame_energy_check(self.surface, c, config.node_samples, config.seed)
            for c in (0.0, report.mean_curvature_bar, 1.0)
        ]

        self.checks.append(_below("stability_chain", report.chain_error, th.stability_chain))
        if self.summary.is_orthogonal:
            self.checks.append(_below("volume_preservation", report.variation_integral, th.mink1))
        self.checks.append(_below("reilly_average", reilly, th.reilly))
        for record in frames:
            self.checks.append(_below(f"frame_energy_c={record.c:.6g}", record.max_error, th.frame_energy))
        poincare = report.dirichlet_energy - lambda1 * (1 - study.relative_gap) * report.field_deviation_integral
        self.checks.append(_below("poincare_margin", min(poincare, 0.0), th.poincare))
        if report.label == "diagnostic":
            log.warning("Stability margin recorded as a diagnostic: surface is not CMC")

        self.report.write_json(
            "stability_report.json",
            {
                "provenance": self._provenance("stability"),
                "spectrum": study,
                "stability": report,
                "reilly_average_error": reilly,
                "frame_energy": frames,
                "checks": self.checks,
            },
        )
        row = report.model_dump(exclude={"field_average"})
        self.report.write_csv("stability_summary.csv", [row], list(row))
        self._write_spectrum("stability", study)
        return self._bundle("stability")

    # --- sweep ---

    def _sweep_config(self, axis: SweepAxis, value: float) -> ExperimentConfig:
        data = self.config.model_dump(mode="json")
        cone, profile = data["cone"], data["profile"]
        if axis == SweepAxis.EPS:
            params = profile[self.config.profile.family]
            if "eps" not in params:
                raise ConfigError(f"Profile '{self.config.profile.family}' has no eps parameter to sweep")
            params["eps"] = value
        elif axis == SweepAxis.ALPHA:
            family = self.config.cone.family
            if family not in ("cap", "perturbed_cap"):
                raise ConfigError("An alpha sweep needs a cap or perturbed_cap cone")
            cone[family]["alpha"] = value
        else:
            if self.config.cone.perturbed_cap is None:
                raise ConfigError("A delta sweep needs a perturbed_cap cone")
            cone["perturbed_cap"]["delta"] = value
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Sweep value {axis.value}={value} gives an invalid config: {e.errors()[0]['msg']}")

    def _sweep_surface(self, axis: SweepAxis, value: float) -> tuple[ExperimentConfig, PolarGraphSurface]:
        config = self._sweep_config(axis, value)
        try:
            return config, build_surface(config)
        except DomainError as e:
            raise ConfigError(f"Sweep value {axis.value}={value} gives an invalid cone or surface: {e.detail}")

    def _sweep_point(self, item: tuple[float, ExperimentConfig, PolarGraphSurface]) -> dict:
        value, config, surface = item
        rule = build_rule(surface.domain, config.n_phi, config.n_s, config.n_b)
        sample = sample_surface(surface, rule)
        boundary = boundary_data_at(surface, rule.boundary_angles)
        mink2 = identity_service.mink2_report(surface, rule, sample, boundary)
        rigidity = identity_service.rigidity_report(surface, rule, sample, boundary)
        log.debug(f"Sweep point {value}: mink2 rhs {mink2.rhs:.6e}")
        return {
            "value": value,
            "mink2_lhs": mink2.lhs,
            "mink2_rhs": mink2.rhs,
            "mink2_residual": mink2.residual,
            "correction_magnitude": abs(mink2.rhs),
            "sign_condition": rigidity.sign_condition,
            "umbilicity_defect_integral": rigidity.umbilicity_defect_integral,
            "umbilicity_defect_pointwise": rigidity.umbilicity_defect_pointwise,
            "cmc_deviation": rigidity.cmc_deviation,
            "orthogonality_residual": surface.orthogonality_residual,
            "convex_cone": rigidity.convex_cone,
            "half_space": rigidity.half_space,
        }

    def run_sweep(self, axis: Optional[SweepAxis] = None) -> ResultBundle:
        axis = axis or self.config.sweep.axis
        if axis is None:
            raise ConfigError("No sweep axis given (use --axis or sweep.axis in the config)")
        if self.surface.ambient_dim != 3:
            raise ConfigError("Sweeps quantify the Mink2 correction term, which needs a cone in R^3")
        values = list(self.config.sweep.values)
        points = [(value, *self._sweep_surface(axis, value)) for value in values]
        log.info(f"sweep over {axis.value}: {len(points)} point(s)")
        with self._mapper() as mapper:
            rows = list(mapper(self._sweep_point, points))

        self.report.write_json(
            "sweep_report.json", {"provenance": self._provenance("sweep"), "axis": axis.value, "rows": rows}
        )
        self.report.write_csv("sweep.csv", rows, _SWEEP_COLUMNS)
        if rows:
            self.report.write_line_plot(
                "sweep_correction.svg",
                f"Mink2 boundary correction against {axis.value}",
                axis.value,
                "|int II(nu_T, nu_T) <x,nu>|",
                {"correction": ([r["value"] for r in rows], [r["correction_magnitude"] for r in rows])},
            )
        return self._bundle("sweep")
