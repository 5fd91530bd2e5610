"""
Test script for the configuration, validation and error modules.
This script tests configuration precedence, command parameter validation and the exit-code mapping.
"""

import logging

import pytest

from routers.command_router import CommandRouter
from utils.config import FitterConfig
from utils.configuration_validator import ConfigurationValidator
from utils.errors import (
    BehindCamera,
    ConfigurationError,
    DegenerateSpectrum,
    MissingKey,
    SensorProjectionError,
    TooFewPoints,
    error_response,
    exit_code_for,
)

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("RPCFIT_GRID_LENGTH", "RPCFIT_ALT_LAYERS", "RPCFIT_THREADS", "RPCFIT_LCURVE_SAMPLES", "RPCFIT_ICCV_RIDGE_RATIO", "VERBOSE"):
        monkeypatch.delenv(name, raising=False)


def test_config_defaults():
    """Test the configuration module defaults."""
    logger.info("Testing configuration module...")
    config = FitterConfig().get_config()
    assert config["n_lonlat"] == 50
    assert config["n_alt"] == 10
    assert config["threads"] == 1
    assert config["max_wls_iterations"] == 20
    assert config["iccv_ridge_ratio"] == 0.1
    assert config["verbose"] is False
    assert "schema_dir" in config


def test_config_precedence(monkeypatch):
    monkeypatch.setenv("RPCFIT_GRID_LENGTH", "30")
    monkeypatch.setenv("RPCFIT_ALT_LAYERS", "6")
    config = FitterConfig(file_values={"n_lonlat": 40, "lcurve_samples": 50}, config_override={"n_lonlat": 20, "threads": None})
    assert config.get("n_lonlat") == 20
    assert config.get("n_alt") == 6
    assert config.get("lcurve_samples") == 50
    assert config.get("threads") == 1
    assert config.fit_config().lcurve_samples == 50


def test_config_rejects_bad_values(monkeypatch):
    with pytest.raises(ConfigurationError):
        FitterConfig(config_override={"n_alt": 1})
    with pytest.raises(ConfigurationError):
        FitterConfig(config_override={"lcurve_samples": 2})
    with pytest.raises(ConfigurationError):
        FitterConfig(config_override={"iccv_ridge_ratio": 0.0})
    monkeypatch.setenv("RPCFIT_THREADS", "two")
    with pytest.raises(ConfigurationError):
        FitterConfig()


def test_config_update():
    config = FitterConfig()
    config.update("threads", 4)
    assert config.fit_config().threads == 4
    with pytest.raises(ConfigurationError):
        config.update("max_iccv_iterations", -1)


def test_configuration_validator(tmp_path):
    """Test command parameter and path validation."""
    logger.info("Testing configuration validator...")
    validator = ConfigurationValidator(FitterConfig().get_config())
    sensor = tmp_path / "sensor.json"
    sensor.write_text("{}")

    result = validator.validate_command("fit", {"sensor": str(sensor), "out_rpc": str(tmp_path / "out.rpc")})
    assert result["status"] == "valid"

    result = validator.validate_command("fit", {"sensor": str(tmp_path / "missing.json"), "out_rpc": str(tmp_path / "out.rpc")})
    assert result["status"] == "invalid"
    assert result["missing_inputs"] == [str(tmp_path / "missing.json")]

    result = validator.validate_command("fit", {"sensor": str(sensor), "out_rpc": str(sensor)})
    assert any("overwrite" in e for e in result["errors"])

    result = validator.validate_command("fit", {"sensor": str(sensor), "out_rpc": str(tmp_path / "nodir" / "out.rpc")})
    assert any("does not exist" in e for e in result["errors"])

    result = validator.validate_command("fit", {"sensor": str(sensor), "out_rpc": str(tmp_path / "out.rpc"), "bounds": [1, 0, 0, 1, 0, 1]})
    assert any("increasing" in e for e in result["errors"])

    result = validator.validate_command("sweep", {"out": str(tmp_path / "sweep.json")})
    assert result["status"] == "invalid"

    assert validator.validate_command("teleport", {})["status"] == "invalid"


def test_ensure_valid_raises(tmp_path):
    validator = ConfigurationValidator(FitterConfig().get_config())
    with pytest.raises(FileNotFoundError):
        validator.ensure_valid("project", {"rpc": str(tmp_path / "a.rpc"), "points": str(tmp_path / "p.csv"), "out": str(tmp_path / "o.csv")})
    with pytest.raises(ConfigurationError):
        validator.ensure_valid("evaluate", {"rpc": None, "out": str(tmp_path / "o.json")})


def test_exit_codes():
    assert exit_code_for(ConfigurationError("x")) == 2
    assert exit_code_for(FileNotFoundError("x")) == 3
    assert exit_code_for(MissingKey("LINE_OFF")) == 4
    assert exit_code_for(TooFewPoints(10, 39)) == 5
    assert exit_code_for(DegenerateSpectrum(0.0, 1.0)) == 6
    assert exit_code_for(SensorProjectionError(3, BehindCamera("x"))) == 7
    assert exit_code_for(RuntimeError("x")) == 1


def test_error_response():
    response = error_response(TooFewPoints(10, 39), "Failed to fit RPC model")
    assert response["status"] == "error"
    assert response["error"] == "TooFewPoints"
    assert response["exit_code"] == 5
    assert response["message"].startswith("Failed to fit RPC model: ")
    assert CommandRouter.exit_code(response) == 5
    assert CommandRouter.exit_code({"status": "success"}) == 0


def test_router_reports_missing_input(tmp_path):
    router = CommandRouter(FitterConfig())
    response = router.route("localize", {"rpc": str(tmp_path / "a.rpc"), "pixels": str(tmp_path / "p.csv"), "out": str(tmp_path / "o.csv")})
    assert response["status"] == "error"
    assert response["error"] == "FileNotFoundError"
    assert router.exit_code(response) == 3


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
