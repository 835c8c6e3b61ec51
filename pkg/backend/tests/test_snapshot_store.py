import math

import orjson
import pytest

from src.database.snapshot_store import dumps_snapshot, loads_snapshot, read_snapshot, snapshot_record, write_snapshot
from src.models.configuration import BoundaryCondition, Configuration, ModelParams, StateClass
from src.models.errors import SnapshotError
from src.services.dynamics_service import chain_state, run_chain
from src.utils.geometry import Ball


def _record(square, centers, /, **overrides):
    record = {
        "format_version": 1,
        "d": 2,
        "box": square.as_dict(),
        "lambda": 0.5,
        "tau": {"balls": [], "shell": None, "allowed_box": None},
        "centers": centers,
        "step": 0,
        "seed": 1,
        "stream_id": 0,
        "state_class": "omega",
    }
    record.update(overrides)
    return orjson.dumps(record)


def test_snapshot_round_trip_is_byte_identical(square, tmp_path):
    tau = BoundaryCondition(forbidden_balls=(Ball((2.0, 2.0), 1.0),), forbid_shell=0.25)
    state = chain_state(ModelParams(0.3, 2, square, tau), seed=21, stream_id=4)
    run_chain(state, 500)
    first = write_snapshot(state, tmp_path / "a.json")
    loaded = read_snapshot(first)
    second = write_snapshot(loaded, tmp_path / "b.json")
    assert first.read_bytes() == second.read_bytes()
    assert loaded.config == state.config
    assert loaded.step == 500
    assert loaded.params == state.params


def test_loaded_stream_restarts_from_seed_and_stream_id(square):
    state = chain_state(ModelParams(0.3, 2, square), seed=21, stream_id=4)
    loaded = loads_snapshot(dumps_snapshot(snapshot_record(state)))
    assert (loaded.rng.seed, loaded.rng.stream_id) == (21, 4)


def test_empty_configuration_round_trips(square):
    state = chain_state(ModelParams(0.3, 2, square))
    data = dumps_snapshot(snapshot_record(state, seed=7, stream_id=2))
    assert orjson.loads(data)["centers"] == []
    assert loads_snapshot(data).config == Configuration(square)


def test_lambda_is_written_under_its_own_name(square):
    document = orjson.loads(dumps_snapshot(snapshot_record(chain_state(ModelParams(0.3, 2, square)))))
    assert document["lambda"] == 0.3
    assert "lam" not in document


def test_overlapping_centers_are_refused(square, r2):
    data = _record(square, [[5.0, 5.0], [5.0 + 1.5 * r2, 5.0]])
    with pytest.raises(SnapshotError, match="pairwise distance >= 2r"):
        loads_snapshot(data)


def test_overlaps_are_allowed_in_omega_star_but_triple_covers_are_not(square, r2):
    assert len(loads_snapshot(_record(square, [[5.0, 5.0], [5.0 + 1.5 * r2, 5.0]], state_class="omega_star")).config) == 2
    side = 0.5 * r2
    triangle = [[5.0, 5.0], [5.0 + side, 5.0], [5.0 + side / 2.0, 5.0 + side * math.sqrt(3.0) / 2.0]]
    with pytest.raises(SnapshotError, match="Omega\\*"):
        loads_snapshot(_record(square, triangle, state_class="omega_star"))


def test_centers_in_tau_are_refused(square):
    tau = {"balls": [{"center": [5.0, 5.0], "radius": 1.0}], "shell": None, "allowed_box": None}
    with pytest.raises(SnapshotError, match="forbidden region"):
        loads_snapshot(_record(square, [[5.5, 5.0]], tau=tau))


@pytest.mark.parametrize(
    "overrides",
    [{"format_version": 2}, {"unexpected": True}, {"lambda": -1.0}, {"centers": [[0.1, 0.1]]}],
)
def test_malformed_snapshots_are_refused(square, overrides):
    with pytest.raises(SnapshotError, match="snapshot rejected"):
        loads_snapshot(_record(square, [], **overrides))


def test_invalid_json_is_refused():
    with pytest.raises(SnapshotError):
        loads_snapshot(b"{not json")


def test_state_class_survives(square):
    state = chain_state(ModelParams(0.3, 2, square), state_class=StateClass.OMEGA_STAR)
    assert loads_snapshot(dumps_snapshot(snapshot_record(state))).state_class is StateClass.OMEGA_STAR
