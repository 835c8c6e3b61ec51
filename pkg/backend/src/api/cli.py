"""
Command-line interface: argument parsing, configuration merging and command dispatch.
"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import orjson
from pydantic import ValidationError

from src.config.settings import settings
from src.database.report_sink import export_reports_csv, write_bound_record, write_report_record
from src.database.snapshot_store import read_snapshot, write_snapshot
from src.models.configuration import BoundaryCondition, Configuration, ModelParams
from src.models.errors import ConfigurationError, GeometryError, HardSphereError, PreconditionError
from src.models.schemas import BoundResult, Command, ExperimentReport, Kernel, RunConfig, Verdict
from src.services import bounds_service as bounds
from src.services import experiments_service as experiments
from src.services.dynamics_service import ChainState, heat_bath_kernel, run_chain, single_center_step
from src.services.hard_sphere_service import sample_hard_sphere_rejection, single_sphere_side
from src.utils.geometry import Ball, Box
from src.utils.rng import entropy_seed, rng_stream

logger = logging.getLogger(__name__)

Record = Union[ExperimentReport, BoundResult]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


class UsageError(HardSphereError, ValueError):
    """Invalid command line or configuration file."""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hslab",
        description="Hard sphere Markov-chain laboratory: samplers, coupled-chain experiments and bound calculators.",
        argument_default=argparse.SUPPRESS,
    )
    parser.add_argument("command", choices=[c.value for c in Command], help="Command to run")
    parser.add_argument("--config", dest="config_file", help="JSON file of RunConfig fields (flags override it)")
    parser.add_argument("--d", type=int, help="Dimension (default 2)")
    parser.add_argument("--lambda", dest="lam", type=float, help="Fugacity lambda")
    parser.add_argument("--box-side", dest="box_side", type=float, help="Cube side of Lambda (default 10)")
    parser.add_argument("--lambda-list", dest="lam_list", type=float, nargs="+", help="Fugacities of a density sweep")
    parser.add_argument("--box-sides", dest="box_sides", type=float, nargs="+", help="Cube sides of a density sweep")
    parser.add_argument("--tau-shell", dest="tau_shell", type=float, help="Forbidden shell width inside Lambda_Int")
    parser.add_argument(
        "--tau-ball",
        dest="tau_balls",
        action="append",
        help="Forbidden ball as comma-separated center coordinates followed by the radius; repeatable",
    )
    parser.add_argument("--kernel", choices=[k.value for k in Kernel], help="Chain kernel (default single-center)")
    parser.add_argument("--l-over-r", dest="l_over_r", type=float, help="Heat-bath radius L in units of r (default 2)")
    parser.add_argument("--steps", type=int, help="Chain steps (default 10000)")
    parser.add_argument("--burn-in", dest="burn_in", type=int, help="Burn-in steps (default 10 n (1 + lambda))")
    parser.add_argument("--trials", type=int, help="Trials, edges or boxes (default 1000)")
    parser.add_argument("--replicas", type=int, help="Independent replicas (default 4)")
    parser.add_argument("--gamma", type=float, help="Slack gamma in (0,1) below 2^(1-d) (default 0.5)")
    parser.add_argument("--epsilon", type=float, help="Total variation target (default 0.05)")
    parser.add_argument("--eta", type=float, help="Time as a fraction of n")
    parser.add_argument("--samples", type=int, help="Monte Carlo samples per volume estimate")
    parser.add_argument("--seed", type=int, help="64-bit seed (default HSLAB_SEED, else drawn and printed)")
    parser.add_argument("--output", help="Report file (JSON Lines); stdout when absent")
    parser.add_argument("--csv", help="Also export the report file as CSV")
    parser.add_argument("--snapshot-in", dest="snapshot_in", help="Start the chain from this snapshot")
    parser.add_argument("--snapshot-out", dest="snapshot_out", help="Write the final state to this snapshot")
    parser.add_argument("--workers", type=int, help="Replica worker processes")
    parser.add_argument("--log-level", dest="log_level", help="Logging level")
    return parser


def _parse_ball(text: str) -> Dict[str, object]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as e:
        raise UsageError(f"--tau-ball expects numbers, got {text!r}") from e
    if len(values) < 2:
        raise UsageError(f"--tau-ball needs center coordinates and a radius, got {text!r}")
    return {"center": values[:-1], "radius": values[-1]}


def _validation_message(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        location = ".".join(str(p) for p in item["loc"])
        message = item["msg"].removeprefix("Value error, ")
        parts.append(f"{location}: {message}" if location else message)
    return "; ".join(parts)


def parse_config(argv: Sequence[str], config_file: Optional[str] = None) -> RunConfig:
    """
    Merge a JSON configuration file with command-line flags into a RunConfig.

    Args:
        argv: Command-line arguments without the program name
        config_file: JSON file of RunConfig fields; ``--config`` takes precedence

    Returns:
        Validated RunConfig

    Raises:
        UsageError: Unreadable file, unknown keys or invalid values
    """
    flags = vars(build_parser().parse_args(list(argv)))
    config_file = flags.pop("config_file", config_file)
    values: Dict[str, object] = {}
    if config_file is not None:
        try:
            loaded = orjson.loads(Path(config_file).read_bytes())
        except (OSError, orjson.JSONDecodeError) as e:
            raise UsageError(f"cannot read config file {config_file}: {e}") from e
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {config_file} must hold a JSON object")
        values.update(loaded)
    if "tau_balls" in flags:
        flags["tau_balls"] = [_parse_ball(text) for text in flags["tau_balls"]]
    if "lam" in flags:
        values.pop("lambda", None)
    values.update(flags)
    try:
        return RunConfig.model_validate(values)
    except ValidationError as e:
        raise UsageError(_validation_message(e)) from e


def resolve_seed(config: RunConfig) -> RunConfig:
    """Fill a missing seed from HSLAB_SEED or entropy and print it to stderr."""
    if config.seed is not None:
        return config
    seed = settings.SEED if settings.SEED is not None else entropy_seed()
    print(f"seed: {seed}", file=sys.stderr)
    return config.model_copy(update={"seed": seed})


def _tau(config: RunConfig) -> BoundaryCondition:
    return BoundaryCondition(
        forbidden_balls=tuple(Ball(tuple(b.center), b.radius) for b in config.tau_balls),
        forbid_shell=config.tau_shell,
    )


def _params(config: RunConfig, lam: Optional[float] = None, side: Optional[float] = None) -> ModelParams:
    lam = config.lam if lam is None else lam
    side = config.box_side if side is None else side
    return ModelParams(lam, config.d, Box.cube(side, config.d), _tau(config))


def _explicit(config: RunConfig, field: str) -> bool:
    return field in config.model_fields_set


def _lam_or_critical(config: RunConfig) -> float:
    return config.lam if config.lam is not None else bounds.critical_fugacity(config.gamma, config.d)


# --- Command handlers ---


def run_bounds(config: RunConfig) -> List[Record]:
    return bounds.bounds_table(config.d, config.lam)


def run_sample(config: RunConfig) -> List[Record]:
    params = _params(config)
    rng = rng_stream(config.seed, 0)
    samples = [sample_hard_sphere_rejection(params, rng) for _ in range(config.trials)]
    if config.snapshot_out:
        write_snapshot(ChainState(samples[-1], params, rng), config.snapshot_out)
    return [
        experiments.density_report(
            "sample_density",
            [len(x) / params.n for x in samples],
            params,
            config.seed,
            sampler="rejection",
            draws=config.trials,
        )
    ]


def run_chain_command(config: RunConfig) -> List[Record]:
    if config.snapshot_in:
        state = read_snapshot(config.snapshot_in)
        params = state.params
    else:
        params = _params(config)
        state = ChainState(Configuration(params.domain), params, rng_stream(config.seed, 0))
    kernel = single_center_step
    if config.kernel is Kernel.HEAT_BATH:
        kernel = heat_bath_kernel(config.l_over_r * params.r)
    burn_in = config.effective_burn_in(params.n, params.lam)
    run_chain(state, burn_in, kernel)
    _, (densities,) = run_chain(state, config.steps, kernel, observers=[lambda s: len(s.config) / params.n])
    if config.snapshot_out:
        write_snapshot(state, config.snapshot_out)
    return [
        experiments.density_report(
            "chain_density",
            densities,
            params,
            config.seed,
            kernel=config.kernel.value,
            steps=config.steps,
            burn_in=burn_in,
        )
    ]


def run_contraction(config: RunConfig) -> List[Record]:
    params = _params(config, lam=bounds.critical_fugacity(config.gamma, config.d))
    report, _ = experiments.contraction_experiment(
        params,
        config.trials,
        burn_in=config.burn_in,
        seed=config.seed,
        samples=config.samples if _explicit(config, "samples") else 256,
        replicas=config.replicas,
        workers=config.workers,
    )
    return [report]


def run_disagreement(config: RunConfig) -> List[Record]:
    params = _params(config, lam=_lam_or_critical(config))
    s = 8.0 * params.r
    a_box, b_box = experiments.separated_boxes(params.domain, s)
    eta = config.eta if config.eta is not None else bounds.max_eta(s, config.d)
    return [
        experiments.disagreement_experiment(
            params, a_box, b_box, eta, config.trials, seed=config.seed, replicas=config.replicas, workers=config.workers
        )
    ]


def run_density(config: RunConfig) -> List[Record]:
    return experiments.density_sweep(
        config.d,
        config.lam_list,
        config.box_sides,
        config.steps,
        burn_in=config.burn_in,
        replicas=config.replicas,
        seed=config.seed,
        workers=config.workers,
        tau=_tau(config),
    )


def run_stationarity(config: RunConfig) -> List[Record]:
    side = config.box_side if _explicit(config, "box_side") else single_sphere_side(config.d)
    params = _params(config, lam=config.lam if config.lam is not None else 1.0, side=side)
    return [
        experiments.stationarity_check(
            params,
            config.kernel,
            config.steps,
            length=config.l_over_r * params.r,
            burn_in=config.burn_in,
            replicas=config.replicas,
            seed=config.seed,
            workers=config.workers,
        )
    ]


def ssm_tau_pairs(
    params: ModelParams, subregion: Box, count: int = 6
) -> List[Tuple[BoundaryCondition, BoundaryCondition]]:
    """(free, ball of radius r at distance k r from the subregion) for k = 0, 1, ..."""
    r = params.r
    interior = params.interior
    pairs = []
    for k in range(count):
        center = list(subregion.center)
        center[0] = subregion.high[0] + k * r + r
        if interior is None or not interior.contains(center):
            break
        pairs.append((params.tau, params.tau.with_balls([Ball(tuple(center), r)])))
    return pairs


def run_ssm_scan(config: RunConfig) -> List[Record]:
    params = _params(config)
    r = params.r
    side = max(2.0 * r + 1.0, config.box_side / 5.0)
    low = tuple(c - side / 2.0 for c in params.domain.center)
    subregion = Box(low, tuple(c + side for c in low))
    return experiments.spatial_mixing_scan(
        params,
        subregion,
        ssm_tau_pairs(params, subregion),
        config.samples,
        seed=config.seed,
        burn_in=config.burn_in,
        workers=config.workers,
    )


def run_free_volume(config: RunConfig) -> List[Record]:
    return [
        experiments.free_volume_identity_check(
            _params(config),
            config.steps,
            burn_in=config.burn_in,
            samples=config.samples if _explicit(config, "samples") else 256,
            replicas=config.replicas,
            seed=config.seed,
            workers=config.workers,
        )
    ]


def run_mixing(config: RunConfig) -> List[Record]:
    return [
        experiments.mixing_time_check(
            config.d,
            config.gamma,
            config.epsilon,
            side=config.box_side if _explicit(config, "box_side") else None,
            replicas=config.trials,
            seed=config.seed,
            workers=config.workers,
        )
    ]


def run_parallel_set(config: RunConfig) -> List[Record]:
    return experiments.parallel_set_check(config.d, config.trials if _explicit(config, "trials") else 100, config.seed)


def run_premetric(config: RunConfig) -> List[Record]:
    return experiments.premetric_range_check(
        config.d,
        config.trials,
        seed=config.seed,
        samples=config.samples,
        side=config.box_side if _explicit(config, "box_side") else 6.0,
        burn_in=config.burn_in,
    )


def run_heat_bath_coupling(config: RunConfig) -> List[Record]:
    params = _params(config)
    return experiments.heat_bath_coupling_experiment(
        params,
        config.l_over_r * params.r,
        config.trials,
        seed=config.seed,
        burn_in=config.burn_in,
        replicas=config.replicas,
        workers=config.workers,
    )


def run_projected_mixing(config: RunConfig) -> List[Record]:
    params = _params(config, lam=_lam_or_critical(config))
    eta = config.eta if config.eta is not None else 2.0 * math.exp(-2.0) * 4.0 ** -(config.d + 1)
    side = config.box_side / 2.0
    low = tuple(c - side / 2.0 for c in params.domain.center)
    subregion = Box(low, tuple(c + side for c in low))
    return [
        experiments.projected_mixing_experiment(
            params, subregion, eta, config.trials, seed=config.seed, replicas=config.replicas, workers=config.workers
        )
    ]


COMMAND_HANDLERS: Dict[Command, Callable[[RunConfig], List[Record]]] = {
    Command.BOUNDS: run_bounds,
    Command.SAMPLE: run_sample,
    Command.CHAIN: run_chain_command,
    Command.CONTRACTION: run_contraction,
    Command.DISAGREEMENT: run_disagreement,
    Command.DENSITY: run_density,
    Command.STATIONARITY: run_stationarity,
    Command.SSM_SCAN: run_ssm_scan,
    Command.FREE_VOLUME: run_free_volume,
    Command.MIXING: run_mixing,
    Command.PARALLEL_SET: run_parallel_set,
    Command.PREMETRIC: run_premetric,
    Command.HEAT_BATH_COUPLING: run_heat_bath_coupling,
    Command.PROJECTED_MIXING: run_projected_mixing,
}


def dispatch(config: RunConfig) -> List[Record]:
    logger.info(f"Running {config.command.value} with seed {config.seed}")
    return COMMAND_HANDLERS[config.command](config)


def emit(records: Sequence[Record], config: RunConfig) -> None:
    """Write every record to the output file (or stdout), then export CSV if asked."""
    sink = open(config.output, "wb") if config.output else sys.stdout.buffer
    try:
        for record in records:
            if isinstance(record, ExperimentReport):
                write_report_record(record, sink)
            else:
                write_bound_record(record, sink)
    finally:
        if config.output:
            sink.close()
    if config.csv:
        export_reports_csv(config.output, config.csv)


def exit_status(records: Sequence[Record]) -> int:
    failed = any(isinstance(r, ExperimentReport) and r.verdict is Verdict.FAIL for r in records)
    return EXIT_FAIL if failed else EXIT_OK


def run(argv: Sequence[str], configure: Optional[Callable[[str], None]] = None) -> int:
    """
    Parse, run and emit one command.

    Args:
        argv: Command-line arguments without the program name
        configure: Logging setup called with the configured level

    Returns:
        0 when no report failed, 1 when one did, 2 for usage errors
    """
    try:
        config = parse_config(argv)
    except UsageError as e:
        print(f"hslab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    if configure is not None:
        configure(config.log_level)
    config = resolve_seed(config)
    try:
        records = dispatch(config)
    except (PreconditionError, GeometryError, ConfigurationError) as e:
        logger.error(f"{config.command.value}: {e}")
        print(f"hslab: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except HardSphereError as e:
        logger.error(f"{config.command.value} failed: {e}")
        print(f"hslab: error: {e}", file=sys.stderr)
        return EXIT_FAIL
    emit(records, config)
    return exit_status(records)
