"""
Configuration module for the RPC fitter.
This module handles loading and managing configuration settings.
"""

import os
import logging
from typing import Dict, Any, Optional
from dotenv import load_dotenv
from pydantic import ValidationError

from tools.fit import FitConfig
from utils.errors import ConfigurationError

# Set up logging
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[logging.StreamHandler()]
)
logger = logging.getLogger(__name__)

FIT_KEYS = ("rmse_tolerance", "max_wls_iterations", "max_iccv_iterations", "lcurve_samples", "denominator_floor", "iccv_ridge_ratio", "threads")


def _env(name: str, default: str, cast):
    raw = os.getenv(name, default)
    try:
        return cast(raw)
    except ValueError:
        raise ConfigurationError(f"environment variable {name}={raw!r} is not a valid {cast.__name__}")


class FitterConfig:
    """
    Manages configuration settings for the RPC fitter.

    Precedence: overrides (command-line flags) > JSON file values > environment (.env) > defaults.
    """

    def __init__(self, file_values: Optional[Dict[str, Any]] = None, config_override: Optional[Dict[str, Any]] = None):
        """
        Initialize the configuration manager.

        Args:
            file_values: Optional values read from a JSON configuration file
            config_override: Optional dictionary to override all other settings
        """
        # Load environment variables
        load_dotenv()

        # Default configuration
        self.config = {
            # Fit configuration
            "rmse_tolerance": _env("RPCFIT_RMSE_TOLERANCE", "1e-10", float),
            "max_wls_iterations": _env("RPCFIT_MAX_WLS_ITERATIONS", "20", int),
            "max_iccv_iterations": _env("RPCFIT_MAX_ICCV_ITERATIONS", "20", int),
            "lcurve_samples": _env("RPCFIT_LCURVE_SAMPLES", "100", int),
            "denominator_floor": _env("RPCFIT_DENOMINATOR_FLOOR", "1e-12", float),
            "iccv_ridge_ratio": _env("RPCFIT_ICCV_RIDGE_RATIO", "0.1", float),

            # Grid configuration
            "n_lonlat": _env("RPCFIT_GRID_LENGTH", "50", int),
            "n_alt": _env("RPCFIT_ALT_LAYERS", "10", int),

            # Runtime
            "threads": _env("RPCFIT_THREADS", "1", int),
            "verbose": os.getenv("VERBOSE", "False").lower() == "true",

            # Paths
            "schema_dir": os.path.join(os.path.dirname(os.path.dirname(__file__)), "schemas"),
        }

        if file_values:
            self.config.update(file_values)

        # Override with provided configuration; None means "flag not given"
        if config_override:
            self.config.update({k: v for k, v in config_override.items() if v is not None})

        # Validate configuration
        self._validate_config()

        logger.debug("Configuration loaded")

    def _validate_config(self):
        """
        Validate the configuration settings.
        """
        self.fit_config()
        for key in ("n_lonlat", "n_alt"):
            if int(self.config[key]) < 2:
                raise ConfigurationError(f"{key} must be >= 2, got {self.config[key]}")

    def fit_config(self) -> FitConfig:
        """
        Build the typed fit configuration.

        Returns:
            FitConfig
        """
        try:
            return FitConfig(**{key: self.config[key] for key in FIT_KEYS})
        except ValidationError as e:
            raise ConfigurationError(f"invalid fit configuration: {str(e)}")

    def get_config(self) -> Dict[str, Any]:
        """
        Get the complete configuration dictionary.

        Returns:
            Configuration dictionary
        """
        return self.config

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a specific configuration value.

        Args:
            key: Configuration key
            default: Default value if key is not found

        Returns:
            Configuration value
        """
        return self.config.get(key, default)

    def update(self, key: str, value: Any):
        """
        Update a specific configuration value.

        Args:
            key: Configuration key
            value: New value
        """
        self.config[key] = value
        self._validate_config()
        logger.info(f"Configuration updated: {key}")
