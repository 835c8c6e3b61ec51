"""Domain models: boundary conditions, model parameters and sphere configurations."""
import math
from dataclasses import dataclass, field, replace
from enum import Enum as PyEnum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

from src.models.errors import ConfigurationError, GeometryError
from src.utils.geometry import Ball, Box, CellGrid, ParallelBox, Point, box_interior, sphere_radius


class StateClass(str, PyEnum):
    """Omega: pairwise distances >= 2r. Omega*: no point covered by three radius-r balls."""
    OMEGA = "omega"
    OMEGA_STAR = "omega_star"


@dataclass(frozen=True)
class BoundaryCondition:
    """
    Forbidden region tau for centers, always clipped to Lambda_Int.

    Represented as a union of balls, an optional shell of the given width
    along the inside of the boundary of Lambda_Int, and an optional allowed
    box whose complement is forbidden (the Lambda minus (A_R)_Int condition of
    restricted chains). No balls, no shell and no allowed box is the free
    boundary condition.
    """

    forbidden_balls: Tuple[Ball, ...] = ()
    forbid_shell: Optional[float] = None
    allowed_box: Optional[Union[Box, ParallelBox]] = None

    @classmethod
    def free(cls) -> "BoundaryCondition":
        return cls()

    @classmethod
    def from_fixed_spheres(cls, centers: Iterable[Sequence[float]], d: int) -> "BoundaryCondition":
        """tau = Lambda_Int ∩ union of B_2r(y) over permanently fixed spheres y."""
        radius = 2.0 * sphere_radius(d)
        return cls(forbidden_balls=tuple(Ball(tuple(c), radius) for c in centers))

    def restricted_to(self, active_interior: Union[Box, ParallelBox]) -> "BoundaryCondition":
        """Same condition with everything outside ``active_interior`` forbidden."""
        return replace(self, allowed_box=active_interior)

    def with_balls(self, balls: Iterable[Ball]) -> "BoundaryCondition":
        return replace(self, forbidden_balls=self.forbidden_balls + tuple(balls))

    @property
    def is_free(self) -> bool:
        return not self.forbidden_balls and not self.forbid_shell and self.allowed_box is None

    def contains(self, x: Sequence[float], interior: Optional[Box]) -> bool:
        """True iff x is in tau (and therefore in Lambda_Int)."""
        if interior is None or not interior.contains(x):
            return False
        if self.allowed_box is not None and not self.allowed_box.contains(x):
            return True
        if self.forbid_shell:
            gap = min(
                min(c - lo, hi - c) for c, lo, hi in zip(x, interior.low, interior.high)
            )
            if gap < self.forbid_shell:
                return True
        for ball in self.forbidden_balls:
            if math.dist(x, ball.center) < ball.radius:
                return True
        return False

    def as_dict(self) -> Dict[str, object]:
        return {
            "balls": [
                {"center": list(ball.center), "radius": ball.radius}
                for ball in self.forbidden_balls
            ],
            "shell": self.forbid_shell,
            "allowed_box": self.allowed_box.as_dict() if self.allowed_box else None,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "BoundaryCondition":
        allowed = data.get("allowed_box")
        return cls(
            forbidden_balls=tuple(
                Ball(tuple(float(c) for c in ball["center"]), float(ball["radius"]))
                for ball in data.get("balls", [])
            ),
            forbid_shell=data.get("shell"),
            allowed_box=_region_from_dict(allowed) if allowed else None,
        )


def _box_from_dict(data: Dict[str, Sequence[float]]) -> Box:
    return Box(tuple(float(c) for c in data["low"]), tuple(float(c) for c in data["high"]))


def _region_from_dict(data: Dict[str, object]) -> Union[Box, ParallelBox]:
    if "core" not in data:
        return _box_from_dict(data)
    clip = data.get("clip")
    return ParallelBox(_box_from_dict(data["core"]), float(data["radius"]), _box_from_dict(clip) if clip else None)


@dataclass(frozen=True)
class ModelParams:
    """Fugacity, dimension, domain and boundary condition of mu_Lambda^tau."""

    lam: float
    d: int
    domain: Box
    tau: BoundaryCondition = field(default_factory=BoundaryCondition.free)

    def __post_init__(self):
        if not math.isfinite(self.lam) or self.lam < 0:
            raise GeometryError(f"fugacity must be finite and non-negative, got {self.lam}")
        if self.domain.dim != self.d:
            raise GeometryError(f"domain dimension {self.domain.dim} does not match d={self.d}")

    @property
    def r(self) -> float:
        return sphere_radius(self.d)

    @property
    def interior(self) -> Optional[Box]:
        return box_interior(self.domain, self.r)

    @property
    def n(self) -> float:
        return self.domain.volume

    def with_tau(self, tau: BoundaryCondition) -> "ModelParams":
        return replace(self, tau=tau)

    def with_lam(self, lam: float) -> "ModelParams":
        return replace(self, lam=lam)


class Configuration:
    """
    Finite set of sphere centers in Lambda_Int with a cell-list index.

    Centers are kept in insertion order so that iteration, and therefore every
    trajectory, is reproducible.
    """

    def __init__(
        self,
        domain: Box,
        centers: Iterable[Sequence[float]] = (),
        state_class: StateClass = StateClass.OMEGA,
    ):
        self.domain = domain
        self.d = domain.dim
        self.r = sphere_radius(self.d)
        self.interior = box_interior(domain, self.r)
        self.state_class = StateClass(state_class)
        self.index = CellGrid(self.d)
        self._centers: Dict[Point, None] = {}
        for center in centers:
            self.add(tuple(float(c) for c in center))

    def add(self, x: Point) -> None:
        if x in self._centers:
            raise ConfigurationError(f"center {x} already present")
        if self.interior is None or not self.interior.contains(x):
            raise ConfigurationError(f"center {x} lies outside Lambda_Int")
        self._centers[x] = None
        self.index.insert(x)

    def remove(self, x: Point) -> None:
        del self._centers[x]
        self.index.remove(x)

    def discard_within(self, x: Sequence[float], length: float) -> List[Point]:
        """Remove and return every center at distance < length from x."""
        removed = self.index.neighbors_within(x, length)
        for y in removed:
            self.remove(y)
        return removed

    def neighbors_within(self, x: Sequence[float], length: float) -> List[Point]:
        return self.index.neighbors_within(x, length)

    def any_within(self, x: Sequence[float], length: float) -> bool:
        return self.index.any_within(x, length)

    @property
    def centers(self) -> List[Point]:
        return list(self._centers)

    def as_set(self) -> frozenset:
        return frozenset(self._centers)

    def copy(self) -> "Configuration":
        return Configuration(self.domain, self._centers, self.state_class)

    def with_state_class(self, state_class: StateClass) -> "Configuration":
        return Configuration(self.domain, self._centers, state_class)

    def __len__(self) -> int:
        return len(self._centers)

    def __iter__(self) -> Iterator[Point]:
        return iter(self._centers)

    def __contains__(self, x: object) -> bool:
        return x in self._centers

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Configuration):
            return NotImplemented
        return self.domain == other.domain and self._centers.keys() == other._centers.keys()

    def __repr__(self):
        return f"<Configuration(d={self.d}, size={len(self)}, class={self.state_class.value})>"
