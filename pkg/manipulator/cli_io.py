"""
Configuration loading and subcommand dispatch.

Turns a validated ProjectConfig into models, controllers and observers, runs
one of the subcommands and writes its outputs. Library errors are converted
into exit codes here and nowhere else.
"""
import copy
import logging
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError
from tqdm import tqdm

from utils.common import ensure_directory
from utils.config import ConfigManager, ProjectConfig, format_validation_error, save_project_config
from utils.logger import get_logger_with_context
from utils.report_writer import load_matrices, save_matrices, save_report, save_table_csv

from . import fixtures
from .errors import (
    ConfigError,
    ConfigSemanticError,
    ManipulatorError,
    SimulationError,
)
from .functional_observer import (
    ObserverSpec,
    build_F,
    compare_with_printed,
    synthesize_with_escalation,
    verify_observer,
)
from .modal_analysis import (
    BeamParams,
    ModalData,
    compare_with_table,
    compute_modal_data,
    tabulated_modal_data,
)
from .plant_model import PlantModel, build_plant
from .simulator import (
    Controller,
    SimConfig,
    SimResult,
    closed_loop_matrix,
    predicted_stable,
    simulate,
)
from .smc_control import REGULATION, SlidingSpec, regulation, tracking_reference

logger = logging.getLogger(__name__)

SUBCOMMANDS = ("modes", "synth", "simulate", "verify", "sweep")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_SYNTHESIS = 2
EXIT_SIMULATION = 3

VERIFY_TOL = 0.05


@dataclass
class CommandOptions:
    """Per-subcommand flags from the command line."""
    state_space: bool = False
    report: Optional[str] = None
    scenario: Optional[str] = None
    mode: Optional[str] = None
    matrices: Optional[str] = None
    param: Optional[str] = None
    values: List[float] = field(default_factory=list)
    workers: int = 4


def load_config(path: Optional[str] = None) -> ProjectConfig:
    """
    Load and validate a configuration file.

    An empty file, or no file at all, yields the bundled defaults.

    Raises:
        ConfigSyntaxError: If the file is missing or cannot be parsed
        ConfigSemanticError: If a value violates a model invariant
    """
    return ConfigManager(path).validate()


def dump_config(config: ProjectConfig, path: str) -> str:
    """Write a config as YAML that reloads to an identical ProjectConfig."""
    save_project_config(config.model_dump(mode="python"), path)
    return path


def exit_code_for(error: BaseException) -> int:
    """Exit code for a library error."""
    if isinstance(error, (ConfigError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, SimulationError):
        return EXIT_SIMULATION
    if isinstance(error, ManipulatorError):
        return EXIT_SYNTHESIS
    return EXIT_CONFIG


def beam_params(config: ProjectConfig) -> BeamParams:
    return BeamParams(**config.beam.model_dump())


def build_modal(config: ProjectConfig, n: int) -> ModalData:
    """Modal data with n modes from the configured source."""
    params = beam_params(config)
    if config.modes.source == "table":
        return tabulated_modal_data(
            params,
            fixtures.TABLE_OMEGA[:n],
            fixtures.TABLE_PHI_PRIME_0[:n],
            fixtures.TABLE_PHI_L[:n],
        )
    return compute_modal_data(params, n, config.modes.normalization)


def build_models(config: ProjectConfig) -> Tuple[PlantModel, PlantModel]:
    """
    Plant and design models.

    Returns:
        Tuple (plant with n_plant modes, design model with n_design modes)
    """
    modal = build_modal(config, config.modes.n_plant)
    plant = build_plant(modal)
    if config.modes.n_design == config.modes.n_plant:
        return plant, plant
    return plant, build_plant(modal.truncated(config.modes.n_design))


def build_sliding(config: ProjectConfig, design: PlantModel) -> SlidingSpec:
    """
    Sliding spec from the controller section.

    Raises:
        ConfigSemanticError: If gamma is omitted for a design model other
            than the bundled 2-mode one
    """
    gamma = config.controller.gamma
    if gamma is None:
        if design.n != 2:
            raise ConfigSemanticError(
                f"controller.gamma: required when modes.n_design is {design.n} (defaults exist for 2)"
            )
        gamma = fixtures.GAMMA
    return SlidingSpec.create(
        np.asarray(gamma, dtype=float),
        config.controller.k1,
        config.controller.k2,
        design,
        boundary_layer=config.controller.boundary_layer,
    )


def build_controller(
    config: ProjectConfig, design: PlantModel, scenario: Optional[str] = None
) -> Controller:
    scenario = scenario or config.simulation.scenario
    reference = (
        regulation(config.controller.theta_d) if scenario == REGULATION else tracking_reference()
    )
    return Controller(design=design, sliding=build_sliding(config, design), reference=reference)


def build_observer(config: ProjectConfig, design: PlantModel, sliding: SlidingSpec) -> ObserverSpec:
    """
    Synthesize the observer from the observer section.

    Raises:
        ConfigSemanticError: If N or L is omitted for an order other than 2
        SynthesisError: If synthesis fails
    """
    section = config.observer
    if (section.N is None or section.L is None) and section.v != 2:
        raise ConfigSemanticError(f"observer.N, observer.L: required when observer.v is {section.v}")
    N = np.asarray(section.N if section.N is not None else fixtures.OBSERVER_N, dtype=float)
    L = np.asarray(section.L if section.L is not None else fixtures.OBSERVER_L, dtype=float)
    return synthesize_with_escalation(
        design, sliding, N, L, escalate=section.escalate, shift=section.escalation_shift,
    )


def build_sim_config(
    config: ProjectConfig, scenario: Optional[str] = None, mode: Optional[str] = None
) -> SimConfig:
    section = config.simulation
    n_plant = config.modes.n_plant
    x0 = section.x0 if section.x0 is not None else fixtures.default_x0(n_plant)
    return SimConfig(
        dt=section.dt,
        t_final=section.t_final,
        x0=np.asarray(x0, dtype=float),
        eta0=None if section.eta0 is None else np.asarray(section.eta0, dtype=float),
        n_plant=n_plant,
        scenario=scenario or section.scenario,
        mode=mode or section.mode,
        band_sigma=section.band_sigma,
        settle_band=section.settle_band,
    )


def run_simulation(
    config: ProjectConfig, scenario: Optional[str] = None, mode: Optional[str] = None
) -> Tuple[SimResult, Optional[ObserverSpec]]:
    """Build everything a run needs from the config and simulate."""
    plant, design = build_models(config)
    controller = build_controller(config, design, scenario)
    sim_config = build_sim_config(config, scenario, mode)
    observer = None
    if sim_config.mode == "observer_fed":
        observer = build_observer(config, design, controller.sliding)
    result = simulate(plant, controller, sim_config, observer)
    if observer is not None:
        result.summary["observer_order"] = observer.v
        result.summary["spillover_predicted_stable"] = predicted_stable(
            closed_loop_matrix(plant, observer)
        )
    return result, observer


def _output_path(config: ProjectConfig, filename: str) -> str:
    return os.path.join(ensure_directory(config.output.directory), filename)


def cmd_modes(config: ProjectConfig, options: CommandOptions) -> int:
    """Computed modes, the table comparison and (optionally) the state-space model."""
    params = beam_params(config)
    n = config.modes.n_plant
    computed = compute_modal_data(params, n, config.modes.normalization)
    frame = pd.DataFrame([
        {
            "mode": i + 1,
            "beta": mode.beta,
            "omega": mode.omega,
            "phi_prime_0": mode.phi_prime_0,
            "phi_l": mode.phi_l,
            "ratio": mode.tip_to_slope_ratio,
            "norm_tag": mode.norm_tag,
        }
        for i, mode in enumerate(computed.modes)
    ])
    save_table_csv(frame, _output_path(config, "modes.csv"))

    count = min(n, len(fixtures.TABLE_OMEGA))
    comparison = compare_with_table(
        computed.truncated(count),
        fixtures.TABLE_OMEGA[:count],
        fixtures.TABLE_PHI_PRIME_0[:count],
        fixtures.TABLE_PHI_L[:count],
    )
    save_table_csv(comparison, _output_path(config, "modes_vs_table.csv"))

    if options.state_space:
        plant = build_plant(build_modal(config, n))
        save_matrices(
            {"A": plant.A, "B": plant.B, "C": plant.C},
            _output_path(config, "state_space.yaml"),
        )
    return EXIT_OK


def cmd_synth(config: ProjectConfig, options: CommandOptions) -> int:
    """Synthesize the observer and write its matrices and verification report."""
    _, design = build_models(config)
    sliding = build_sliding(config, design)
    observer = build_observer(config, design, sliding)

    report: Dict[str, Any] = {"v": observer.v, "n_design": observer.n_design}
    report["escalated"] = observer.v != config.observer.v
    if observer.report is not None:
        report.update(observer.report.as_dict())

    comparison = compare_with_printed(observer, fixtures.PRINTED_MATRICES)
    save_matrices(observer.matrices(), _output_path(config, "observer.yaml"))
    save_table_csv(comparison, _output_path(config, "printed_comparison.csv"))
    save_report(report, options.report or _output_path(config, "synth_report.txt"))
    return EXIT_OK


def cmd_simulate(config: ProjectConfig, options: CommandOptions) -> int:
    """Simulate and write the trace and summary."""
    result, _ = run_simulation(config, options.scenario, options.mode)
    tag = f"{result.config.scenario}_{result.config.mode}" if result.config else "run"
    if config.output.emit_plot_data:
        save_table_csv(result.trace, _output_path(config, f"trace_{tag}.csv"))
    save_report(result.summary, _output_path(config, f"summary_{tag}.txt"))
    return EXIT_OK


def cmd_verify(config: ProjectConfig, options: CommandOptions) -> int:
    """
    Recheck user-supplied observer matrices at print-rounding tolerance.

    F is recomputed from the config when the file does not provide it.
    Returns EXIT_SYNTHESIS if any condition fails.
    """
    if not options.matrices:
        raise ConfigSemanticError("verify: --matrices is required")
    try:
        matrices = load_matrices(options.matrices)
    except (OSError, ValueError) as e:
        raise ConfigSemanticError(f"verify: {e}")
    missing = [name for name in ("N", "L", "H", "G", "D_obs", "T") if name not in matrices]
    if missing:
        raise ConfigSemanticError(f"verify: {options.matrices} lacks matrices {missing}")

    _, design = build_models(config)
    F = matrices.get("F")
    if F is None:
        sliding = build_sliding(config, design)
        F = build_F(design, sliding.Gamma, sliding.k1).F
    report = verify_observer(
        design, F, matrices["N"], matrices["L"], matrices["H"].reshape(-1),
        matrices["G"], matrices["D_obs"], matrices["T"], tol=VERIFY_TOL,
    )
    for name, ok in report.passed.items():
        if not ok:
            logger.warning(f"Condition {name} fails: residual {report.residuals[name]:.4g}")
    save_report(report.as_dict(), options.report or _output_path(config, "verify_report.txt"))
    return EXIT_OK if report.all_passed else EXIT_SYNTHESIS


def _is_integer_key(base: Dict[str, Any], param: str) -> bool:
    current = ConfigManager(defaults=base).get(param)
    return isinstance(current, int) and not isinstance(current, bool)


def _sweep_member(
    base: Dict[str, Any], param: str, value: float, index: int, config: ProjectConfig
) -> Dict[str, Any]:
    log = get_logger_with_context(__name__, {"param": param, "value": value})
    member = copy.deepcopy(base)
    manager = ConfigManager(defaults=member)
    manager.set(param, int(value) if _is_integer_key(base, param) else value)
    row: Dict[str, Any] = {"index": index, "param": param, "value": value}
    try:
        member_config = manager.validate()
        result, _ = run_simulation(member_config)
        if config.output.emit_plot_data:
            save_table_csv(result.trace, _output_path(config, f"sweep_{param}_{index}.csv"))
        row.update(result.summary)
        row["status"] = "ok"
        row["exit_code"] = EXIT_OK
    except ManipulatorError as e:
        log.error(f"Sweep member failed: {e}")
        row["status"] = type(e).__name__
        row["exit_code"] = exit_code_for(e)
    return row


def cmd_sweep(config: ProjectConfig, options: CommandOptions) -> int:
    """
    Run one simulation per value of a dotted numeric parameter.

    Members run concurrently and write distinct files; a summary CSV lists
    every member. The exit code is the worst member exit code.
    """
    if not options.param or not options.values:
        raise ConfigSemanticError("sweep: --param and --values are required")
    base = config.model_dump(mode="python")
    if options.param not in ConfigManager(defaults=base):
        raise ConfigSemanticError(f"sweep: unknown parameter {options.param}")
    if _is_integer_key(base, options.param):
        fractional = [value for value in options.values if not float(value).is_integer()]
        if fractional:
            raise ConfigSemanticError(
                f"sweep: {options.param} takes integers, got {fractional}"
            )

    rows = []
    with ThreadPoolExecutor(max_workers=options.workers) as executor:
        future_to_index = {
            executor.submit(_sweep_member, base, options.param, value, i, config): i
            for i, value in enumerate(options.values)
        }
        for future in tqdm(as_completed(future_to_index), total=len(future_to_index), desc="sweep"):
            rows.append(future.result())

    frame = pd.DataFrame(sorted(rows, key=lambda row: row["index"]))
    save_table_csv(frame, _output_path(config, f"sweep_{options.param}.csv"))
    return int(frame["exit_code"].max())


COMMANDS = {
    "modes": cmd_modes,
    "synth": cmd_synth,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def run_subcommand(
    name: str, config: ProjectConfig, options: Optional[CommandOptions] = None
) -> int:
    """
    Run a subcommand and map failures onto exit codes.

    Returns:
        0 on success, 1 for configuration errors, 2 for modelling and
        synthesis failures, 3 for simulation failures
    """
    if name not in COMMANDS:
        logger.error(f"Unknown subcommand {name!r}; expected one of {SUBCOMMANDS}")
        return EXIT_CONFIG
    options = options or CommandOptions()
    try:
        code = COMMANDS[name](config, options)
    except ValidationError as e:
        logger.error(f"Invalid configuration: {format_validation_error(e)}")
        return EXIT_CONFIG
    except (ManipulatorError, ValueError) as e:
        logger.error(f"{name} failed: {type(e).__name__}: {e}")
        return exit_code_for(e)
    logger.info(f"{name} finished with exit code {code}")
    return code
