"""
Configuration utilities for the manipulator pipeline.

ConfigManager loads YAML (or JSON) over the bundled defaults; ProjectConfig
validates the merged result. Unknown keys are rejected and every violation is
reported with its dotted field name.
"""
import copy
import json
import logging
import math
import os
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from manipulator import fixtures
from manipulator.errors import ConfigSemanticError, ConfigSyntaxError

from .common import atomic_write

logger = logging.getLogger(__name__)


DEFAULT_CONFIG: Dict[str, Any] = {
    "beam": dict(fixtures.BEAM_PARAMS),
    "modes": {
        "source": "table",
        "n_design": 2,
        "n_plant": 5,
        "normalization": "mean_square",
    },
    "controller": {
        "gamma": None,
        "k1": fixtures.K1,
        "k2": fixtures.K2,
        "boundary_layer": None,
        "theta_d": fixtures.THETA_REGULATION,
    },
    "observer": {
        "v": 2,
        "N": None,
        "L": None,
        "escalate": True,
        "escalation_shift": 1.0,
    },
    "simulation": {
        "dt": 1e-4,
        "t_final": 20.0,
        "scenario": "regulation",
        "mode": "observer_fed",
        "x0": None,
        "eta0": None,
        "band_sigma": 1e-3,
        "settle_band": 0.02,
    },
    "output": {
        "directory": "output",
        "emit_plot_data": True,
    },
    "logging": {
        "level": "INFO",
        "file": None,
        "to_console": True,
        "to_file": False,
    },
}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BeamConfig(_Section):
    rho: float = Field(fixtures.BEAM_PARAMS["rho"], gt=0)
    l: float = Field(fixtures.BEAM_PARAMS["l"], gt=0)
    EI: float = Field(fixtures.BEAM_PARAMS["EI"], gt=0)
    J0: float = Field(fixtures.BEAM_PARAMS["J0"], ge=0)
    mp: float = Field(fixtures.BEAM_PARAMS["mp"], ge=0)
    Jp: float = Field(fixtures.BEAM_PARAMS["Jp"], ge=0)
    zeta: float = Field(fixtures.BEAM_PARAMS["zeta"], ge=0)


class ModesConfig(_Section):
    source: Literal["table", "computed"] = "table"
    n_design: int = Field(2, ge=1)
    n_plant: int = Field(5, ge=1)
    normalization: Literal["mean_square", "unit_hub_slope", "unit_modal_mass"] = "mean_square"

    @model_validator(mode="after")
    def _check_counts(self) -> "ModesConfig":
        if self.n_plant < self.n_design:
            raise ValueError(f"n_plant ({self.n_plant}) must be >= n_design ({self.n_design})")
        if self.source == "table" and self.n_plant > len(fixtures.TABLE_OMEGA):
            raise ValueError(
                f"n_plant ({self.n_plant}) exceeds the {len(fixtures.TABLE_OMEGA)} tabulated modes"
            )
        return self


class ControllerConfig(_Section):
    gamma: Optional[List[float]] = None
    k1: float = Field(fixtures.K1, gt=0)
    k2: float = Field(fixtures.K2, gt=0)
    boundary_layer: Optional[float] = Field(None, gt=0)
    theta_d: float = fixtures.THETA_REGULATION


class ObserverConfig(_Section):
    v: int = Field(2, ge=1)
    N: Optional[List[List[float]]] = None
    L: Optional[List[List[float]]] = None
    escalate: bool = True
    escalation_shift: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _check_shapes(self) -> "ObserverConfig":
        if self.N is not None and (len(self.N) != self.v or any(len(row) != self.v for row in self.N)):
            raise ValueError(f"N must be {self.v}x{self.v}")
        if self.L is not None and (len(self.L) != self.v or any(len(row) != 2 for row in self.L)):
            raise ValueError(f"L must be {self.v}x2")
        return self


class SimulationConfig(_Section):
    dt: float = Field(1e-4, gt=0)
    t_final: float = Field(20.0, gt=0)
    scenario: Literal["regulation", "tracking"] = "regulation"
    mode: Literal["full_state", "observer_fed"] = "observer_fed"
    x0: Optional[List[float]] = None
    eta0: Optional[List[float]] = None
    band_sigma: float = Field(1e-3, gt=0)
    settle_band: float = Field(0.02, gt=0)

    @model_validator(mode="after")
    def _check_horizon(self) -> "SimulationConfig":
        if self.t_final < self.dt:
            raise ValueError(f"t_final ({self.t_final}) must be >= dt ({self.dt})")
        return self


class OutputConfig(_Section):
    directory: str = "output"
    emit_plot_data: bool = True


class LoggingConfig(_Section):
    level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    file: Optional[str] = None
    to_console: bool = True
    to_file: bool = False


class ProjectConfig(_Section):
    """Validated project configuration."""
    beam: BeamConfig = Field(default_factory=BeamConfig)
    modes: ModesConfig = Field(default_factory=ModesConfig)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    observer: ObserverConfig = Field(default_factory=ObserverConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    @model_validator(mode="after")
    def _check_lengths(self) -> "ProjectConfig":
        design_dim = 2 * self.modes.n_design + 2
        plant_dim = 2 * self.modes.n_plant + 2
        gamma = self.controller.gamma
        if gamma is not None and len(gamma) != design_dim:
            raise ValueError(f"controller.gamma has {len(gamma)} entries, expected {design_dim}")
        x0 = self.simulation.x0
        if x0 is not None and len(x0) != plant_dim:
            raise ValueError(f"simulation.x0 has {len(x0)} entries, expected {plant_dim}")
        if any(not math.isfinite(value) for value in (x0 or [])):
            raise ValueError("simulation.x0 must be finite")
        return self


def format_validation_error(error: ValidationError) -> str:
    """One `dotted.field: message` line per violation."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"])
        message = item["msg"]
        if message.startswith("Value error, "):
            message = message[len("Value error, "):]
        lines.append(f"{location}: {message}" if location else message)
    return "; ".join(lines)


class ConfigManager:
    """
    Configuration manager for the manipulator pipeline.

    Holds a nested dictionary of settings, starting from DEFAULT_CONFIG and
    updated recursively from YAML or JSON files.
    """

    def __init__(
        self,
        config_file: Optional[str] = None,
        defaults: Optional[Dict[str, Any]] = None
    ):
        """
        Initialize the configuration manager.

        Args:
            config_file: Path to configuration file (YAML or JSON)
            defaults: Default configuration values (DEFAULT_CONFIG if None)

        Raises:
            ConfigSyntaxError: If the file is missing or cannot be parsed
        """
        self.config: Dict[str, Any] = copy.deepcopy(defaults if defaults is not None else DEFAULT_CONFIG)
        if config_file:
            self.load_config(config_file)

    def load_config(self, config_file: str) -> None:
        """
        Merge a configuration file into the current settings.

        Args:
            config_file: Path to configuration file (YAML or JSON)

        Raises:
            ConfigSyntaxError: If the file is missing, has an unsupported
                extension, cannot be parsed or is not a mapping
        """
        if not os.path.exists(config_file):
            raise ConfigSyntaxError(f"Configuration file not found: {config_file}")

        _, ext = os.path.splitext(config_file)
        try:
            with open(config_file, "r") as f:
                if ext.lower() in (".yaml", ".yml"):
                    file_config = yaml.safe_load(f)
                elif ext.lower() == ".json":
                    text = f.read()
                    file_config = json.loads(text) if text.strip() else None
                else:
                    raise ConfigSyntaxError(f"Unsupported configuration file format: {ext}")
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigSyntaxError(f"Cannot parse {config_file}: {e}")

        if file_config is None:
            logger.info(f"{config_file} is empty; using bundled defaults")
            return
        if not isinstance(file_config, dict):
            raise ConfigSyntaxError(
                f"{config_file}: top level must be a mapping of sections, got {type(file_config).__name__}"
            )
        self._update_config_recursive(self.config, file_config)
        logger.info(f"Loaded configuration from {config_file}")

    def _update_config_recursive(self, target: Dict[str, Any], source: Dict[str, Any]) -> None:
        for key, value in source.items():
            if isinstance(value, dict) and key in target and isinstance(target[key], dict):
                self._update_config_recursive(target[key], value)
            else:
                target[key] = value

    def get(self, key: str, default: Any = None) -> Any:
        """
        Get a configuration value.

        Args:
            key: Configuration key (dot notation for nested keys)
            default: Default value if key not found

        Returns:
            Configuration value or default
        """
        current: Any = self.config
        for part in key.split("."):
            if not isinstance(current, dict) or part not in current:
                return default
            current = current[part]
        return current

    def set(self, key: str, value: Any) -> None:
        """
        Set a configuration value.

        Args:
            key: Configuration key (dot notation for nested keys)
            value: Configuration value
        """
        parts = key.split(".")
        current = self.config
        for part in parts[:-1]:
            if part not in current or not isinstance(current[part], dict):
                current[part] = {}
            current = current[part]
        current[parts[-1]] = value

    def validate(self) -> ProjectConfig:
        """
        Validate the merged settings.

        Raises:
            ConfigSemanticError: With one `field: message` entry per violation
        """
        try:
            return ProjectConfig.model_validate(self.config)
        except ValidationError as e:
            raise ConfigSemanticError(format_validation_error(e))

    def save_config(self, config_file: str) -> None:
        """
        Save the current settings to a YAML or JSON file.

        Args:
            config_file: Destination path
        """
        save_project_config(self.config, config_file)

    def get_all(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)

    def __getitem__(self, key: str) -> Any:
        value = self.get(key, _MISSING)
        if value is _MISSING:
            raise KeyError(key)
        return value

    def __contains__(self, key: str) -> bool:
        return self.get(key, _MISSING) is not _MISSING


_MISSING = object()


def save_project_config(config: Dict[str, Any], config_file: str) -> None:
    """Write a settings dictionary as YAML or JSON, chosen by extension."""
    _, ext = os.path.splitext(config_file)
    with atomic_write(config_file) as f:
        if ext.lower() == ".json":
            json.dump(config, f, indent=2)
        else:
            yaml.safe_dump(config, f, default_flow_style=None, sort_keys=False)
    logger.info(f"Saved configuration to {config_file}")
