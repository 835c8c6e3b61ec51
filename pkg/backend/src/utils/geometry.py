"""
Geometry primitives for hard sphere domains.

Points are plain tuples of floats so that centers can be hashed and compared
by exact coordinate identity. Boxes are axis-aligned; every quantity the
samplers need (interiors, parallel sets, their volumes) has a closed form on
boxes. Volumes of irregular regions (blocked sets, free volume) are estimated
by hit-or-miss Monte Carlo over a ball.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.models.errors import GeometryError
from src.utils.rng import RngStream

logger = logging.getLogger(__name__)

Point = Tuple[float, ...]


@lru_cache(maxsize=None)
def sphere_radius(d: int) -> float:
    """
    Radius r_d of the d-dimensional ball of volume one.

    Args:
        d: Dimension, at least 1

    Returns:
        r_d = Gamma(d/2 + 1)^(1/d) / sqrt(pi)
    """
    if d < 1:
        raise GeometryError(f"dimension must be at least 1, got {d}")
    return math.exp(math.lgamma(d / 2 + 1) / d) / math.sqrt(math.pi)


@lru_cache(maxsize=None)
def unit_ball_volume(k: int) -> float:
    """Volume kappa_k of the k-dimensional unit ball (kappa_0 = 1)."""
    if k < 0:
        raise GeometryError(f"dimension must be non-negative, got {k}")
    return math.exp((k / 2) * math.log(math.pi) - math.lgamma(k / 2 + 1))


def ball_volume(length: float, d: int) -> float:
    """
    Volume V_l of a d-ball of radius ``length``; V_r = 1 and V_2r = 2^d.

    Args:
        length: Ball radius
        d: Dimension

    Returns:
        (length / r_d)^d
    """
    if length < 0:
        raise GeometryError(f"radius must be non-negative, got {length}")
    return (length / sphere_radius(d)) ** d


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [low, high]."""

    low: Point
    high: Point

    def __post_init__(self):
        if len(self.low) != len(self.high) or len(self.low) == 0:
            raise GeometryError("box corners must share a positive dimension")
        for lo, hi in zip(self.low, self.high):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise GeometryError(f"invalid box side [{lo}, {hi}]")

    @classmethod
    def cube(cls, side: float, d: int, origin: float = 0.0) -> "Box":
        return cls(tuple([origin] * d), tuple([origin + side] * d))

    @property
    def dim(self) -> int:
        return len(self.low)

    @property
    def sides(self) -> Tuple[float, ...]:
        return tuple(hi - lo for lo, hi in zip(self.low, self.high))

    @property
    def volume(self) -> float:
        return math.prod(self.sides)

    @property
    def diameter(self) -> float:
        return math.hypot(*self.sides)

    @property
    def center(self) -> Point:
        return tuple((lo + hi) / 2 for lo, hi in zip(self.low, self.high))

    def contains(self, x: Sequence[float]) -> bool:
        return all(lo <= c <= hi for c, lo, hi in zip(x, self.low, self.high))

    def contains_box(self, other: "Box") -> bool:
        return all(
            lo <= olo and ohi <= hi
            for lo, hi, olo, ohi in zip(self.low, self.high, other.low, other.high)
        )

    def expanded(self, margin: float) -> "Box":
        return Box(
            tuple(lo - margin for lo in self.low),
            tuple(hi + margin for hi in self.high),
        )

    def as_dict(self) -> Dict[str, List[float]]:
        return {"low": list(self.low), "high": list(self.high)}


@dataclass(frozen=True)
class Ball:
    """Open ball B_radius(center)."""

    center: Point
    radius: float

    def contains(self, x: Sequence[float]) -> bool:
        return math.dist(x, self.center) < self.radius


def box_interior(box: Box, margin: float) -> Optional[Box]:
    """
    Shrink every side of ``box`` by ``margin`` on both ends.

    Args:
        box: The domain
        margin: Non-negative shrink distance (r for Lambda_Int)

    Returns:
        The interior box, or None when some side is at most 2 * margin
    """
    if margin < 0:
        raise GeometryError(f"margin must be non-negative, got {margin}")
    if margin == 0:
        return box
    if any(side <= 2 * margin for side in box.sides):
        return None
    return Box(
        tuple(lo + margin for lo in box.low),
        tuple(hi - margin for hi in box.high),
    )


def distance_to_box(x: Sequence[float], box: Box) -> float:
    """Euclidean distance from x to the box (0 inside)."""
    return math.hypot(
        *(max(lo - c, 0.0, c - hi) for c, lo, hi in zip(x, box.low, box.high))
    )


def distance_between_boxes(a: Box, b: Box) -> float:
    """Euclidean distance between two boxes (0 if they intersect)."""
    return math.hypot(
        *(
            max(alo - bhi, 0.0, blo - ahi)
            for alo, ahi, blo, bhi in zip(a.low, a.high, b.low, b.high)
        )
    )


def intersect_boxes(a: Box, b: Box) -> Optional[Box]:
    """Intersection of two boxes, None when it has empty interior."""
    low = tuple(max(x, y) for x, y in zip(a.low, b.low))
    high = tuple(min(x, y) for x, y in zip(a.high, b.high))
    if any(hi <= lo for lo, hi in zip(low, high)):
        return None
    return Box(low, high)


@dataclass(frozen=True)
class ParallelBox:
    """
    {x in clip : dist(x, core) <= radius}, the region A_R of restricted chains.

    With radius 0 and no clip this is the box ``core`` itself.
    """

    core: Box
    radius: float = 0.0
    clip: Optional[Box] = None

    def contains(self, x: Sequence[float]) -> bool:
        if self.clip is not None and not self.clip.contains(x):
            return False
        return distance_to_box(x, self.core) <= self.radius

    def eroded(self, margin: float) -> Optional["ParallelBox"]:
        """Points at distance >= margin from the complement of the region."""
        clip = box_interior(self.clip, margin) if self.clip is not None else None
        if self.clip is not None and clip is None:
            return None
        if self.radius >= margin:
            return ParallelBox(self.core, self.radius - margin, clip)
        core = box_interior(self.core, margin - self.radius)
        if core is None:
            return None
        return ParallelBox(core, 0.0, clip)

    def as_dict(self) -> Dict[str, object]:
        return {
            "core": self.core.as_dict(),
            "radius": self.radius,
            "clip": self.clip.as_dict() if self.clip is not None else None,
        }


def _steiner(sides: Sequence[float], length: float) -> float:
    d = len(sides)
    if d == 0:
        return 1.0
    # np.poly(-s) = prod(x + s_i): coefficients [1, e_1, ..., e_d]
    elementary = np.poly(-np.asarray(sides, dtype=float))
    return float(
        sum(elementary[d - k] * unit_ball_volume(k) * length**k for k in range(d + 1))
    )


def parallel_set_volume_box(box: Box, length: float) -> float:
    """
    Exact volume of the ``length``-parallel set of a box (Steiner formula).

    Args:
        box: The box
        length: Parallel distance, non-negative

    Returns:
        sum_k e_{d-k}(sides) * kappa_k * length^k
    """
    if length < 0:
        raise GeometryError(f"parallel distance must be non-negative, got {length}")
    return _steiner(box.sides, length)


def uniform_point_in_parallel_set(
    interior: Optional[Box], length: float, rng: RngStream, max_attempts: int = 100_000
) -> Point:
    """
    Uniform point of the ``length``-parallel set of ``interior``.

    Rejection from the enclosing box expanded by ``length`` per side.

    Args:
        interior: Non-empty box (typically Lambda_Int)
        length: Parallel distance
        rng: Random stream
        max_attempts: Rejection budget

    Returns:
        The sampled point
    """
    if interior is None:
        raise GeometryError("cannot sample the parallel set of an empty interior")
    enclosing = interior.expanded(length)
    for _ in range(max_attempts):
        y = rng.uniform_in_box(enclosing.low, enclosing.high)
        if distance_to_box(y, interior) <= length:
            return y
    raise GeometryError(f"parallel-set rejection failed after {max_attempts} attempts")


def uniform_point_in_ball(center: Sequence[float], radius: float, rng: RngStream) -> Point:
    """Uniform point of the ball B_radius(center)."""
    d = len(center)
    direction = rng.normal(d)
    norm = float(np.linalg.norm(direction))
    while norm == 0.0:
        direction = rng.normal(d)
        norm = float(np.linalg.norm(direction))
    scale = radius * rng.random() ** (1.0 / d) / norm
    return tuple(c + scale * float(u) for c, u in zip(center, direction))


def uniform_points_in_ball(
    center: Sequence[float], radius: float, count: int, rng: RngStream
) -> List[Point]:
    """``count`` independent uniform points of B_radius(center)."""
    d = len(center)
    directions = rng.normal(count * d).reshape(count, d)
    norms = np.linalg.norm(directions, axis=1)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.generator.random(count) ** (1.0 / d)
    points = np.asarray(center, dtype=float) + directions * (radii / norms)[:, None]
    return [tuple(row) for row in points.tolist()]


def parallel_set_profile_cdf(
    box: Box, length: float, axis: int, grid_points: int = 4001
) -> Callable[[np.ndarray], np.ndarray]:
    """
    CDF of one coordinate of the uniform law on the parallel set of a box.

    The cross section at coordinate t is the (d-1)-dimensional parallel set of
    the remaining sides with radius ``length`` inside the slab and
    sqrt(length^2 - delta^2) at distance delta outside it.

    Args:
        box: The box
        length: Parallel distance
        axis: Coordinate index
        grid_points: Integration grid size

    Returns:
        Vectorized CDF callable
    """
    other_sides = [s for i, s in enumerate(box.sides) if i != axis]
    lo, hi = box.low[axis], box.high[axis]
    grid = np.linspace(lo - length, hi + length, grid_points)
    delta = np.maximum.reduce([lo - grid, np.zeros_like(grid), grid - hi])
    radii = np.sqrt(np.maximum(length**2 - delta**2, 0.0))
    density = np.array([_steiner(other_sides, rho) for rho in radii])
    cumulative = cumulative_trapezoid(density, grid, initial=0.0)
    cumulative /= cumulative[-1]

    def cdf(t):
        return np.interp(t, grid, cumulative, left=0.0, right=1.0)

    return cdf


def estimate_region_volume(
    membership: Callable[[Point], bool],
    center: Sequence[float],
    radius: float,
    samples: int,
    rng: RngStream,
) -> Tuple[float, float]:
    """
    Hit-or-miss estimate of |region ∩ B_radius(center)|.

    Args:
        membership: Predicate on points
        center: Sampling ball center
        radius: Sampling ball radius
        samples: Number of uniform points, at least 1
        rng: Random stream

    Returns:
        (volume estimate, standard error)
    """
    if samples < 1:
        raise GeometryError("volume estimation needs at least one sample")
    d = len(center)
    volume = ball_volume(radius, d)
    hits = sum(1 for y in uniform_points_in_ball(center, radius, samples, rng) if membership(y))
    p = hits / samples
    return volume * p, volume * math.sqrt(p * (1.0 - p) / samples)


class CellGrid:
    """
    Bucketed spatial index over sphere centers.

    Every stored center lives in exactly one bucket keyed by its integer cell
    coordinates. Queries with radius at most ``cell_side`` scan the 3^d cells
    around the query point; larger radii scan proportionally more rings.
    """

    def __init__(self, d: int, cell_side: Optional[float] = None):
        self.d = d
        self.cell_side = cell_side if cell_side is not None else 2.0 * sphere_radius(d)
        if self.cell_side <= 0:
            raise GeometryError("cell side must be positive")
        self._buckets: Dict[Tuple[int, ...], List[Point]] = {}
        self._size = 0
        self._offsets: Dict[int, List[Tuple[int, ...]]] = {}

    def _key(self, x: Sequence[float]) -> Tuple[int, ...]:
        side = self.cell_side
        return tuple(math.floor(c / side) for c in x)

    def _ring_offsets(self, reach: int) -> List[Tuple[int, ...]]:
        offsets = self._offsets.get(reach)
        if offsets is None:
            offsets = list(itertools.product(range(-reach, reach + 1), repeat=self.d))
            self._offsets[reach] = offsets
        return offsets

    def insert(self, x: Point) -> None:
        self._buckets.setdefault(self._key(x), []).append(x)
        self._size += 1

    def remove(self, x: Point) -> None:
        key = self._key(x)
        bucket = self._buckets.get(key)
        if not bucket or x not in bucket:
            raise KeyError(x)
        bucket.remove(x)
        if not bucket:
            del self._buckets[key]
        self._size -= 1

    def _candidates(self, x: Sequence[float], length: float) -> Iterator[Point]:
        reach = max(1, math.ceil(length / self.cell_side))
        base = self._key(x)
        buckets = self._buckets
        for offset in self._ring_offsets(reach):
            bucket = buckets.get(tuple(b + o for b, o in zip(base, offset)))
            if bucket:
                yield from bucket

    def neighbors_within(self, x: Sequence[float], length: float) -> List[Point]:
        """Stored centers at distance < length from x."""
        return [y for y in self._candidates(x, length) if math.dist(x, y) < length]

    def any_within(self, x: Sequence[float], length: float) -> bool:
        return any(math.dist(x, y) < length for y in self._candidates(x, length))

    def count_within(self, x: Sequence[float], length: float) -> int:
        return sum(1 for y in self._candidates(x, length) if math.dist(x, y) < length)

    def __len__(self) -> int:
        return self._size

    def __iter__(self) -> Iterator[Point]:
        for bucket in self._buckets.values():
            yield from bucket

    def __contains__(self, x: Point) -> bool:
        bucket = self._buckets.get(self._key(x))
        return bool(bucket) and x in bucket
