import logging
from pathlib import Path

import orjson
import pandas as pd
import pytest
from typer.testing import CliRunner

from conegeom.commands.runner import LogLevel, configure_logging
from conegeom.core.config import settings
from conegeom.main import app
from conegeom.services.experiment_service import _SWEEP_COLUMNS, load_experiment_config

runner = CliRunner()

# --- CONFIGURATION ---
SMALL = {"n_phi": 16, "n_s": 8, "n_b": 32, "levels": 2, "node_samples": 20}

SECTOR_VERIFY = {"cone": {"cap": {"alpha": 1.2}}, "profile": {"constant": {"R": 1.0}}, **SMALL}

LINEAR_VIOLATION_STRICT = {
    "cone": {"cap": {"alpha": 1.2}},
    "profile": {"linear_violation": {"R": 1.0, "eps": 0.1}},
    "suites": ["mink1-strict"],
    **SMALL,
}

HEMISPHERE_SPECTRUM = {"cone": {"cap": {"alpha": 1.5707963267948966}}, "mesh_levels": [8, 16]}

SECTOR_STABILITY = {
    "cone": {"cap": {"alpha": 1.2}},
    "n_phi": 32,
    "n_s": 16,
    "n_b": 64,
    "mesh_levels": [6, 12],
    "node_samples": 20,
}

EPS_SWEEP = {
    "cone": {"cap": {"alpha": 2.0}},
    "profile": {"bump": {"R": 1.0, "eps": 0.1, "k": 2}},
    "n_phi": 64,
    "n_s": 32,
    "n_b": 128,
    "sweep": {"axis": "eps", "values": [0.0, 0.025, 0.05, 0.1]},
}

WEDGE = {"cone": {"wedge": {"angle": 1.0}}, "profile": {"axisym": {"eps": 0.1}}, **SMALL}


def write_config(directory, name: str, payload) -> str:
    path = directory / name
    path.write_bytes(payload if isinstance(payload, bytes) else orjson.dumps(payload))
    return str(path)


def invoke(*args: str):
    return runner.invoke(app, list(args))


# --- Schema and config errors ---


def test_01_schema_prints_the_config_schema():
    result = invoke("schema")
    assert result.exit_code == 0
    assert orjson.loads(result.stdout)["title"] == "ExperimentConfig"


def test_02_unknown_key_is_a_config_error(tmp_path):
    config = write_config(tmp_path, "bad.json", {**SECTOR_VERIFY, "colour": "blue"})
    result = invoke("verify", "--config", config, "--out", str(tmp_path / "out"))
    assert result.exit_code == 2


def test_03_invalid_json_is_a_config_error(tmp_path):
    config = write_config(tmp_path, "broken.json", b'{"cone": {"cap": ')
    assert invoke("verify", "--config", config, "--out", str(tmp_path / "out")).exit_code == 2


def test_04_missing_config_is_a_config_error(tmp_path):
    result = invoke("verify", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path / "out"))
    assert result.exit_code == 2


def test_05_invalid_domain_is_a_config_error(tmp_path):
    payload = {**SECTOR_VERIFY, "cone": {"perturbed_cap": {"alpha": 1.0, "delta": 1.5, "k": 2}}}
    config = write_config(tmp_path, "domain.json", payload)
    assert invoke("verify", "--config", config, "--out", str(tmp_path / "out")).exit_code == 2


# --- verify ---


def test_06_sector_verify_passes(tmp_path):
    config = write_config(tmp_path, "sector.json", SECTOR_VERIFY)
    out = tmp_path / "sector"
    result = invoke("verify", "-c", config, "-o", str(out))
    assert result.exit_code == 0, result.output
    assert (out / "verify_report.json").exists()
    assert (out / "verify_convergence.csv").exists()
    checks = pd.read_csv(out / "verify_checks.csv")
    assert checks["passed"].sum() + checks["skipped"].sum() == len(checks)
    report = orjson.loads((out / "verify_report.json").read_bytes())
    assert report["surface"]["is_orthogonal"]
    assert len(report["provenance"]["config_sha256"]) == 64
    summary = (out / "verify_summary.html").read_text()
    assert "mink2_consistency" in summary
    assert all(plot.name in summary for plot in out.glob("*.svg"))


def test_07_verify_outputs_are_byte_identical(tmp_path):
    config = write_config(tmp_path, "sector.json", SECTOR_VERIFY)
    first, second = tmp_path / "first", tmp_path / "second"
    assert invoke("verify", "-c", config, "-o", str(first)).exit_code == 0
    assert invoke("verify", "-c", config, "-o", str(second), "--threads", "2").exit_code == 0
    names = sorted(p.name for p in first.iterdir())
    assert names == sorted(p.name for p in second.iterdir())
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes(), name


def test_08_strict_mink1_fails_off_orthogonality(tmp_path):
    config = write_config(tmp_path, "violation.json", LINEAR_VIOLATION_STRICT)
    result = invoke("verify", "-c", config, "-o", str(tmp_path / "out"))
    assert result.exit_code == 1
    assert "orthogonality residual" in result.output
    assert "mink1-strict" in result.output


def test_09_relaxed_mink1_skips_off_orthogonality(tmp_path):
    payload = {**LINEAR_VIOLATION_STRICT, "suites": ["mink1", "divergence"]}
    out = tmp_path / "out"
    result = invoke("verify", "-c", write_config(tmp_path, "relaxed.json", payload), "-o", str(out))
    assert result.exit_code == 0, result.output
    checks = pd.read_csv(out / "verify_checks.csv").set_index("name")
    assert bool(checks.loc["mink1", "skipped"])
    assert bool(checks.loc["mink1_negative_control", "passed"])


# --- spectrum and stability ---


def test_10_hemisphere_spectrum(tmp_path):
    out = tmp_path / "spectrum"
    config = write_config(tmp_path, "hemisphere.json", HEMISPHERE_SPECTRUM)
    result = invoke("spectrum", "-c", config, "-o", str(out))
    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / "spectrum_spectrum.csv")
    assert list(table["rings"]) == [8, 16]
    assert table["lambda1"].iloc[-1] == pytest.approx(2.0, rel=2e-2)


def test_11_sector_stability(tmp_path):
    out = tmp_path / "stability"
    config = write_config(tmp_path, "stability.json", SECTOR_STABILITY)
    result = invoke("stability", "-c", config, "-o", str(out))
    assert result.exit_code == 0, result.output
    summary = pd.read_csv(out / "stability_summary.csv")
    assert summary["label"].iloc[0] == "theorem-applicable"


def test_12_stability_needs_three_dimensions(tmp_path):
    config = write_config(tmp_path, "wedge.json", WEDGE)
    assert invoke("stability", "-c", config, "-o", str(tmp_path / "out")).exit_code == 3


# --- sweep ---


def test_13_eps_sweep_grows_the_correction(tmp_path):
    out = tmp_path / "sweep"
    config = write_config(tmp_path, "sweep.json", EPS_SWEEP)
    result = invoke("sweep", "-c", config, "-o", str(out), "-t", "2")
    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / "sweep.csv")
    correction = table["correction_magnitude"].tolist()
    assert correction[0] < 1e-12
    assert all(a < b for a, b in zip(correction, correction[1:]))
    assert not table["convex_cone"].any()


def test_14_empty_sweep_writes_a_header(tmp_path):
    out = tmp_path / "empty"
    payload = {**EPS_SWEEP, "sweep": {"axis": "eps", "values": []}}
    result = invoke("sweep", "-c", write_config(tmp_path, "empty.json", payload), "-o", str(out))
    assert result.exit_code == 0, result.output
    assert (out / "sweep.csv").read_text() == ",".join(_SWEEP_COLUMNS) + "\n"
    assert not (out / "sweep_correction.svg").exists()


def test_15_axis_option_overrides_the_config(tmp_path):
    payload = {**EPS_SWEEP, "sweep": {"values": []}}
    config = write_config(tmp_path, "axis.json", payload)
    assert invoke("sweep", "-c", config, "-o", str(tmp_path / "none")).exit_code == 2
    assert invoke("sweep", "-c", config, "-o", str(tmp_path / "eps"), "--axis", "eps").exit_code == 0


def test_16_wedge_sweep_is_rejected(tmp_path):
    payload = {**WEDGE, "sweep": {"axis": "eps", "values": [0.1]}}
    assert invoke("sweep", "-c", write_config(tmp_path, "wedge.json", payload), "-o", str(tmp_path / "o")).exit_code == 2


# --- Shipped configs ---


@pytest.mark.parametrize("path", sorted(Path(__file__).parent.joinpath("configs").glob("*.json")), ids=lambda p: p.stem)
def test_17_example_configs_validate(path):
    config = load_experiment_config(str(path))
    assert config.dimension == config.cone.dimension


# --- Sweep validation and logging ---


def test_18_invalid_sweep_point_is_a_config_error(tmp_path):
    payload = {
        "cone": {"perturbed_cap": {"alpha": 1.0, "delta": 0.2, "k": 3}},
        "n_phi": 32,
        "n_s": 16,
        "n_b": 64,
        "sweep": {"axis": "delta", "values": [0.1, 1.5]},
    }
    result = invoke("sweep", "-c", write_config(tmp_path, "delta.json", payload), "-o", str(tmp_path / "out"))
    assert result.exit_code == 2
    assert "delta=1.5" in result.output


def test_19_log_level_defaults_to_settings(monkeypatch):
    monkeypatch.setattr(settings, "LOG_LEVEL", "WARNING")
    configure_logging()
    assert logging.getLogger().level == logging.WARNING
    configure_logging(LogLevel.DEBUG)
    assert logging.getLogger().level == logging.DEBUG


def test_20_spectrum_from_target_edge_lengths(tmp_path):
    out = tmp_path / "spectrum"
    payload = {**HEMISPHERE_SPECTRUM, "mesh_h": [0.3, 0.15]}
    result = invoke("spectrum", "-c", write_config(tmp_path, "mesh_h.json", payload), "-o", str(out))
    assert result.exit_code == 0, result.output
    table = pd.read_csv(out / "spectrum_spectrum.csv")
    assert list(table["h"] <= [0.3, 0.15]) == [True, True]


def test_21_mesh_sizes_must_decrease(tmp_path):
    payload = {**HEMISPHERE_SPECTRUM, "mesh_h": [0.15, 0.3]}
    assert invoke("spectrum", "-c", write_config(tmp_path, "bad.json", payload), "-o", str(tmp_path / "o")).exit_code == 2


def test_22_spectrum_thresholds_come_from_the_config(tmp_path):
    out = tmp_path / "spectrum"
    payload = {**HEMISPHERE_SPECTRUM, "thresholds": {"constant_overlap": 1e-3, "lambda1_convex_slack": 0.05}}
    result = invoke("spectrum", "-c", write_config(tmp_path, "thresholds.json", payload), "-o", str(out))
    assert result.exit_code == 0, result.output
    checks = pd.read_csv(out / "spectrum_checks.csv")
    overlap = checks[checks["name"].str.startswith("constant_overlap_rings_")]
    assert len(overlap) == 2
    assert list(overlap["threshold"]) == [1e-3, 1e-3]
    assert "lambda1_convex_bound" in set(checks["name"])
