"""
Coupling Metrics Service
Pre-metric edge weights on Omega*, explicit-path bounds on the path metric,
Hamming distance, projections and total-variation estimates from statistics.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Dict, Hashable, Iterable, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from src.config.constant import OCCUPANCY_GRID_CELLS
from src.config.settings import settings
from src.models.configuration import BoundaryCondition, Configuration, StateClass
from src.models.errors import ConfigurationError, GeometryError
from src.services.bounds_service import vigoda_c
from src.services.hard_sphere_service import in_blocked_set, is_star_configuration
from src.utils.geometry import Box, Point, box_interior, estimate_region_volume
from src.utils.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PreMetricParams:
    """Fugacity, dimension and the blocked-volume weight c of the pre-metric."""

    lam: float
    d: int
    blocked_volume_samples: int = field(default_factory=lambda: settings.VOLUME_SAMPLES)

    @property
    def c(self) -> float:
        return vigoda_c(self.lam, self.d)

    @property
    def full_weight(self) -> float:
        return 2.0**self.d


@dataclass(frozen=True)
class OccupancyStatistic:
    """
    Maps a configuration to (count in subregion_Int, occupied-cell bitmask).

    The bitmask indexes a ``grid_cells``-per-axis grid over the subregion in
    row-major order. Only centers of the projected configuration count.
    """

    subregion: Box
    grid_cells: int = OCCUPANCY_GRID_CELLS

    def __call__(self, config: Configuration) -> Tuple[int, int]:
        projected = project_to_subregion(config, self.subregion)
        mask = 0
        for x in projected:
            index = 0
            for c, lo, side in zip(x, self.subregion.low, self.subregion.sides):
                cell = min(int((c - lo) / side * self.grid_cells), self.grid_cells - 1)
                index = index * self.grid_cells + cell
            mask |= 1 << index
        return len(projected), mask

    def coarsened(self) -> "OccupancyStatistic":
        """Statistic on a grid with half as many cells per axis (at least one)."""
        return OccupancyStatistic(self.subregion, max(1, self.grid_cells // 2))


def occupancy_statistic(config: Configuration, stat: OccupancyStatistic) -> Tuple[int, int]:
    return stat(config)


def count_statistic(config: Configuration) -> int:
    return len(config)


def blocked_set_volumes(
    config: Configuration,
    tau: BoundaryCondition,
    v: Sequence[float],
    samples: int,
    rng: RngStream,
) -> Tuple[float, float, float]:
    """
    Split B_2r(v) into the blocked part O_X(v) and the free part U_X(v).

    Args:
        config: Configuration X
        tau: Boundary condition
        v: Point of Lambda
        samples: Hit-or-miss sample count
        rng: Random stream

    Returns:
        (|O_X(v)|, |U_X(v)|, standard error); the two volumes sum to 2^d
    """
    if not config.domain.contains(v):
        raise GeometryError(f"point {tuple(v)} lies outside the domain")
    full = 2.0**config.d
    blocked, error = estimate_region_volume(
        lambda y: in_blocked_set(y, config, tau), v, 2.0 * config.r, samples, rng
    )
    return blocked, full - blocked, error


def _union(config: Configuration, extra: Iterable[Point]) -> Configuration:
    union = config.with_state_class(StateClass.OMEGA_STAR)
    for x in extra:
        if x not in union:
            union.add(x)
    return union


def premetric_edge_estimate(
    config: Configuration,
    v: Point,
    params: PreMetricParams,
    rng: RngStream,
    tau: Optional[BoundaryCondition] = None,
    check_edge: bool = True,
) -> Tuple[float, float]:
    """D-hat(X, X ∪ {v}) = 2^d - c |O_X(v)| with its standard error."""
    tau = tau or BoundaryCondition.free()
    if check_edge:
        if v in config:
            raise ConfigurationError(f"{v} is already a center of X; not an edge")
        if config.interior is None or not config.interior.contains(v):
            raise ConfigurationError(f"{v} lies outside Lambda_Int; not an edge")
        if not is_star_configuration(_union(config, [v]), rng.spawn(0)).valid:
            raise ConfigurationError("X ∪ {v} is not in Omega*")
    blocked, _, error = blocked_set_volumes(config, tau, v, params.blocked_volume_samples, rng)
    return params.full_weight - params.c * blocked, params.c * error


def premetric_edge_weight(
    config: Configuration,
    v: Point,
    params: PreMetricParams,
    rng: RngStream,
    tau: Optional[BoundaryCondition] = None,
) -> float:
    """
    Pre-metric weight of the edge (X, X ∪ {v}).

    Args:
        config: Configuration X
        v: Added center
        params: Pre-metric parameters
        rng: Random stream; the weight is deterministic given its state
        tau: Boundary condition entering the blocked set

    Returns:
        2^d - c * |O_X(v)|
    """
    weight, _ = premetric_edge_estimate(config, v, params, rng, tau)
    return weight


def _add_path_weight(
    start: Configuration,
    additions: Sequence[Point],
    params: PreMetricParams,
    rng: RngStream,
    tau: BoundaryCondition,
) -> float:
    current = start.with_state_class(StateClass.OMEGA_STAR)
    total = 0.0
    for v in additions:
        weight, _ = premetric_edge_estimate(current, v, params, rng, tau, check_edge=False)
        total += weight
        current.add(v)
    return total


def star_path_distance_bound(
    x: Configuration,
    y: Configuration,
    params: PreMetricParams,
    rng: RngStream,
    tau: Optional[BoundaryCondition] = None,
) -> float:
    """
    Upper bound on the path metric D(X, Y) from an explicit path.

    When X ∪ Y is in Omega* the path adds Y minus X to X and X minus Y to Y,
    meeting at the union. Otherwise it deletes X down to the empty set and
    then builds Y.

    Args:
        x: Configuration X
        y: Configuration Y
        params: Pre-metric parameters
        rng: Random stream
        tau: Boundary condition

    Returns:
        Sum of the edge weights along the path
    """
    tau = tau or BoundaryCondition.free()
    only_y = [p for p in y if p not in x]
    only_x = [p for p in x if p not in y]
    if not only_x and not only_y:
        return 0.0
    if is_star_configuration(_union(x, only_y), rng.spawn(0)).valid:
        return _add_path_weight(x, only_y, params, rng, tau) + _add_path_weight(y, only_x, params, rng, tau)
    logger.debug("X ∪ Y leaves Omega*; bounding D(X, Y) through the empty configuration")
    empty = Configuration(x.domain, state_class=StateClass.OMEGA_STAR)
    return _add_path_weight(empty, x.centers, params, rng, tau) + _add_path_weight(empty, y.centers, params, rng, tau)


def hamming_distance(x: Union[Configuration, Iterable[Point]], y: Union[Configuration, Iterable[Point]]) -> int:
    """|X △ Y| with centers matched by exact coordinate identity."""
    return len(set(x) ^ set(y))


def project_to_subregion(config: Configuration, subregion: Box) -> Configuration:
    """
    X[Lambda']: the centers whose spheres lie entirely inside the subregion.

    Args:
        config: Configuration on Lambda
        subregion: Box Lambda' contained in Lambda

    Returns:
        Configuration on Lambda' holding the centers in Lambda'_Int
    """
    if not config.domain.contains_box(subregion):
        raise GeometryError(f"subregion {subregion.as_dict()} is not contained in the domain")
    interior = box_interior(subregion, config.r)
    if interior is None:
        return Configuration(subregion, state_class=config.state_class)
    return Configuration(subregion, [x for x in config if interior.contains(x)], config.state_class)


def empirical_pmf(outcomes: Iterable[Hashable]) -> Dict[Hashable, float]:
    counts = Counter(outcomes)
    total = sum(counts.values())
    return {k: c / total for k, c in counts.items()}


def total_variation(
    pmf_a: Union[Mapping[Hashable, float], Sequence[float], np.ndarray],
    pmf_b: Union[Mapping[Hashable, float], Sequence[float], np.ndarray],
) -> float:
    """Half the L1 distance over the union of supports; sequences are indexed pmfs."""
    if not isinstance(pmf_a, Mapping):
        pmf_a = dict(enumerate(np.asarray(pmf_a, dtype=float).tolist()))
    if not isinstance(pmf_b, Mapping):
        pmf_b = dict(enumerate(np.asarray(pmf_b, dtype=float).tolist()))
    support = set(pmf_a) | set(pmf_b)
    return 0.5 * math.fsum(abs(pmf_a.get(k, 0.0) - pmf_b.get(k, 0.0)) for k in support)


def tv_lower_bound_from_statistics(
    samples_a: Sequence,
    samples_b: Sequence,
    stat: Optional[Callable[[Configuration], Hashable]] = None,
) -> Tuple[float, float]:
    """
    Plug-in total variation between the pushforwards of two sample lists.

    By data processing the statistic's TV lower-bounds the projected TV; the
    plug-in estimator itself is biased upward at small sample sizes.

    Args:
        samples_a: Configurations (or raw outcomes when ``stat`` is None)
        samples_b: Configurations (or raw outcomes when ``stat`` is None)
        stat: Statistic applied to each sample

    Returns:
        (tv estimate, delta-method standard error)
    """
    if not samples_a or not samples_b:
        raise ValueError("both sample lists must be non-empty")
    outcomes_a = [stat(s) for s in samples_a] if stat else list(samples_a)
    outcomes_b = [stat(s) for s in samples_b] if stat else list(samples_b)
    p = empirical_pmf(outcomes_a)
    q = empirical_pmf(outcomes_b)
    tv = total_variation(p, q)
    support = set(p) | set(q)
    signs = {k: float(np.sign(p.get(k, 0.0) - q.get(k, 0.0))) for k in support}

    # multinomial variance of sum_k s_k p_k
    def spread(pmf: Dict[Hashable, float]) -> float:
        first = math.fsum(signs[k] * pmf.get(k, 0.0) for k in support)
        second = math.fsum(signs[k] ** 2 * pmf.get(k, 0.0) for k in support)
        return max(second - first**2, 0.0)

    variance = 0.25 * (spread(p) / len(outcomes_a) + spread(q) / len(outcomes_b))
    return tv, math.sqrt(variance)
