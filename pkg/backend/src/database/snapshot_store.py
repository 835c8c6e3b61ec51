"""
Snapshot Store
Lossless JSON snapshots of chain states.
"""

import logging
import math
from itertools import combinations
from pathlib import Path
from typing import Optional, Union

import orjson
from pydantic import ValidationError

from src.models.configuration import BoundaryCondition, Configuration, ModelParams, StateClass
from src.models.errors import ConfigurationError, GeometryError, SnapshotError
from src.models.schemas import SnapshotRecord
from src.services.dynamics_service import ChainState
from src.services.hard_sphere_service import is_star_configuration
from src.utils.geometry import Box
from src.utils.rng import rng_stream

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

_DUMP_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS


def snapshot_record(state: ChainState, seed: Optional[int] = None, stream_id: Optional[int] = None) -> SnapshotRecord:
    """SnapshotRecord of a state; seed and stream id default to those of its stream."""
    params = state.params
    return SnapshotRecord(
        d=params.d,
        box=params.domain.as_dict(),
        **{"lambda": params.lam},
        tau=params.tau.as_dict(),
        centers=[list(x) for x in state.config],
        step=state.step,
        seed=state.rng.seed if seed is None else seed,
        stream_id=state.rng.stream_id if stream_id is None else stream_id,
        state_class=state.state_class,
    )


def dumps_snapshot(record: SnapshotRecord) -> bytes:
    """Indented, key-sorted JSON; floats in shortest round-trip form."""
    return orjson.dumps(record.model_dump(mode="json", by_alias=True), option=_DUMP_OPTIONS)


def write_snapshot(
    state: ChainState, path: PathLike, seed: Optional[int] = None, stream_id: Optional[int] = None
) -> Path:
    """
    Write a chain state to ``path``.

    Args:
        state: Chain state to persist
        path: Destination file
        seed: Seed recorded with the state; defaults to the stream seed
        stream_id: Stream id recorded with the state; defaults to the stream id

    Returns:
        The written path
    """
    path = Path(path)
    path.write_bytes(dumps_snapshot(snapshot_record(state, seed, stream_id)))
    logger.info(f"Snapshot with {len(state.config)} centers written to {path}")
    return path


def _check_state_class(config: Configuration, tau: BoundaryCondition) -> None:
    two_r = 2.0 * config.r
    for x in config:
        if tau.contains(x, config.interior):
            raise SnapshotError(f"center {x} lies in the forbidden region tau")
    if config.state_class is StateClass.OMEGA:
        for x, y in combinations(config, 2):
            if math.dist(x, y) < two_r:
                raise SnapshotError(
                    f"invariant 'pairwise distance >= 2r' of Omega violated by {x} and {y} "
                    f"(distance {math.dist(x, y):.6g} < {two_r:.6g})"
                )
    elif not is_star_configuration(config).valid:
        raise SnapshotError("invariant 'no point covered by three radius-r balls' of Omega* violated")


def loads_snapshot(data: bytes) -> ChainState:
    """
    Rebuild a chain state from snapshot bytes, re-validating every invariant.

    Args:
        data: Snapshot document

    Returns:
        ChainState whose stream is reset to (seed, stream_id)
    """
    try:
        record = SnapshotRecord.model_validate(orjson.loads(data))
    except (orjson.JSONDecodeError, ValidationError) as e:
        raise SnapshotError(f"snapshot rejected: {e}") from e
    try:
        domain = Box(tuple(record.box.low), tuple(record.box.high))
        params = ModelParams(record.lam, record.d, domain, BoundaryCondition.from_dict(record.tau.model_dump()))
        config = Configuration(domain, record.centers, record.state_class)
    except (GeometryError, ConfigurationError) as e:
        raise SnapshotError(f"snapshot rejected: {e}") from e
    _check_state_class(config, params.tau)
    return ChainState(config=config, params=params, rng=rng_stream(record.seed, record.stream_id), step=record.step)


def read_snapshot(path: PathLike) -> ChainState:
    path = Path(path)
    try:
        state = loads_snapshot(path.read_bytes())
    except SnapshotError as e:
        logger.error(f"Refused to load {path}: {e}")
        raise
    logger.info(f"Snapshot {path} loaded: {len(state.config)} centers, step {state.step}")
    return state
