"""
Dynamics Service
Single-center and heat-bath Markov chains for the hard sphere model, their
identity couplings and the lazy chain restricted to a subregion.
"""

import logging
import math
from dataclasses import dataclass
from functools import partial
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

from src.config.settings import settings
from src.models.configuration import BoundaryCondition, Configuration, ModelParams, StateClass
from src.models.errors import ConfigurationError, GeometryError, SamplerExhaustedError
from src.services.hard_sphere_service import (
    accept_proposals,
    propose_poisson_in_window,
    proposal_window,
)
from src.utils.geometry import Box, ParallelBox, Point, box_interior, uniform_point_in_parallel_set
from src.utils.rng import RngStream, rng_stream

logger = logging.getLogger(__name__)

ActiveRegion = Union[Box, ParallelBox]
Kernel = Callable[["ChainState"], "ChainState"]


@dataclass
class ChainState:
    """One chain X_t: configuration, model parameters, step counter and its own stream."""

    config: Configuration
    params: ModelParams
    rng: RngStream
    step: int = 0

    @property
    def state_class(self) -> StateClass:
        return self.config.state_class

    @property
    def tau(self) -> BoundaryCondition:
        return self.params.tau


@dataclass
class CoupledState:
    """Two chains driven by one shared stream."""

    x: ChainState
    y: ChainState
    rng: RngStream
    last_update: Optional[Point] = None

    def __post_init__(self):
        px, py = self.x.params, self.y.params
        if px.domain != py.domain or px.lam != py.lam or px.d != py.d:
            raise ConfigurationError("coupled chains must share domain, lambda and d")

    @property
    def coalesced(self) -> bool:
        return self.x.tau == self.y.tau and self.x.config == self.y.config


def chain_state(
    params: ModelParams,
    config: Optional[Configuration] = None,
    seed: int = 0,
    stream_id: int = 0,
    state_class: StateClass = StateClass.OMEGA,
) -> ChainState:
    """ChainState on ``params`` started from ``config`` (empty by default)."""
    if config is None:
        config = Configuration(params.domain, state_class=state_class)
    elif config.domain != params.domain:
        raise ConfigurationError("configuration and parameters disagree on the domain")
    return ChainState(config=config, params=params, rng=rng_stream(seed, stream_id))


def _draw_update(params: ModelParams, rng: RngStream) -> Tuple[Point, bool]:
    domain = params.domain
    x = rng.uniform_in_box(domain.low, domain.high)
    delete = rng.random() * (1.0 + params.lam) < 1.0
    return x, delete


def _apply_update(config: Configuration, tau: BoundaryCondition, x: Point, delete: bool) -> bool:
    """Delete every center in B_r(x), or add x when it is unblocked. Returns True on change."""
    if delete:
        return bool(config.discard_within(x, config.r))
    interior = config.interior
    if interior is None or not interior.contains(x):
        return False
    if tau.contains(x, interior) or config.any_within(x, 2.0 * config.r):
        return False
    config.add(x)
    return True


def single_center_step(state: ChainState) -> ChainState:
    """
    One step of the single-center dynamics.

    A uniform point x of Lambda is drawn; with probability 1/(1+lambda) all
    centers in B_r(x) are deleted, otherwise x is added when it lies in
    Lambda_Int minus tau at distance >= 2r from every center. The same local
    rule serves Omega and Omega* states.

    Args:
        state: Chain to advance (mutated in place)

    Returns:
        The same state, one step later
    """
    x, delete = _draw_update(state.params, state.rng)
    _apply_update(state.config, state.params.tau, x, delete)
    state.step += 1
    return state


def _resample_ball(
    chains: Sequence[Tuple[Configuration, BoundaryCondition]],
    center: Point,
    radius: float,
    lam: float,
    rng: RngStream,
    max_attempts: Optional[int] = None,
    max_proposals: Optional[int] = None,
) -> None:
    """
    Resample B_radius(center) in every chain from one shared proposal stream.

    Each attempt draws Poisson proposals on the ball's window; every chain
    still pending accepts the attempt when the proposals surviving its own
    forbidden set are pairwise >= 2r apart. Chains with identical induced
    boundary conditions therefore receive identical resamples.
    """
    max_attempts = max_attempts or settings.HEAT_BATH_MAX_ATTEMPTS
    max_proposals = max_proposals or settings.HEAT_BATH_MAX_PROPOSALS
    config0 = chains[0][0]
    two_r = 2.0 * config0.r
    interior = config0.interior
    window = proposal_window(center, radius, interior)
    removed = [config.discard_within(center, radius) for config, _ in chains]

    def forbidden_for(config: Configuration, tau: BoundaryCondition) -> Callable[[Point], bool]:
        def forbidden(y: Point) -> bool:
            return (
                math.dist(y, center) >= radius
                or tau.contains(y, interior)
                or config.any_within(y, two_r)
            )

        return forbidden

    predicates = [forbidden_for(config, tau) for config, tau in chains]
    results: List[Optional[List[Point]]] = [None] * len(chains)
    pending = set(range(len(chains)))
    for _ in range(max_attempts):
        proposals = propose_poisson_in_window(window, lam, rng, max_proposals)
        if proposals is None:
            continue
        for i in sorted(pending):
            accepted = accept_proposals(proposals, predicates[i], two_r)
            if accepted is not None:
                results[i] = accepted
        pending = {i for i in pending if results[i] is None}
        if not pending:
            for (config, _), points in zip(chains, results):
                for y in points:
                    config.add(y)
            return
    for (config, _), lost in zip(chains, removed):
        for y in lost:
            config.add(y)
    raise SamplerExhaustedError(
        "heat-bath resampling exhausted its budget",
        max_attempts,
        {
            "center": center,
            "radius": radius,
            "lambda": lam,
            "window_volume": window.volume if window is not None else 0.0,
        },
    )


def _check_update_radius(length: float, r: float) -> None:
    if length < r:
        raise GeometryError(f"heat-bath radius L={length} must be at least r={r}")


def heat_bath_step(state: ChainState, length: float) -> ChainState:
    """
    One heat-bath update with radius L.

    The update center x is uniform in the L-parallel set of Lambda_Int; the
    spheres lying entirely inside B_L(x), i.e. the centers in B_(L-r)(x), are
    removed and that ball is resampled exactly from the hard sphere measure
    induced by tau and the retained centers.

    Args:
        state: Chain to advance (mutated in place)
        length: Update radius L >= r

    Returns:
        The same state, one step later
    """
    config = state.config
    _check_update_radius(length, config.r)
    if config.interior is not None:
        x = uniform_point_in_parallel_set(config.interior, length, state.rng)
        _resample_ball([(config, state.params.tau)], x, length - config.r, state.params.lam, state.rng)
    state.step += 1
    return state


def coupled_single_center_step(cs: CoupledState) -> CoupledState:
    """Identity coupling: same update point and coin, each chain with its own acceptance test."""
    x, delete = _draw_update(cs.x.params, cs.rng)
    cs.last_update = x
    _apply_update(cs.x.config, cs.x.params.tau, x, delete)
    _apply_update(cs.y.config, cs.y.params.tau, x, delete)
    cs.x.step += 1
    cs.y.step += 1
    return cs


def coupled_heat_bath_step(cs: CoupledState, length: float) -> CoupledState:
    """
    Heat-bath coupling: same update ball, shared-proposal resampling.

    When the induced boundary conditions on the update ball agree, both chains
    receive the same resample; otherwise they can differ only where their
    constraints differ.

    Args:
        cs: Coupled state (mutated in place)
        length: Update radius L >= r

    Returns:
        The same coupled state, one step later
    """
    config = cs.x.config
    _check_update_radius(length, config.r)
    if config.interior is not None:
        x = uniform_point_in_parallel_set(config.interior, length, cs.rng)
        cs.last_update = x
        _resample_ball(
            [(cs.x.config, cs.x.params.tau), (cs.y.config, cs.y.params.tau)],
            x,
            length - config.r,
            cs.x.params.lam,
            cs.rng,
        )
    cs.x.step += 1
    cs.y.step += 1
    return cs


def active_interior(region: ActiveRegion, r: float) -> Optional[ActiveRegion]:
    """(A_R)_Int: points of the region at distance >= r from its complement."""
    if isinstance(region, Box):
        return box_interior(region, r)
    return region.eroded(r)


def restricted_boundary(tau: BoundaryCondition, region: ActiveRegion, r: float) -> Optional[BoundaryCondition]:
    """tau together with tau_R = Lambda minus (A_R)_Int; None when (A_R)_Int is empty."""
    inner = active_interior(region, r)
    if inner is None:
        return None
    return tau.restricted_to(inner)


def restricted_start(config: Configuration, region: ActiveRegion) -> Configuration:
    """X[(A_R)_Int]: the initial state of the restricted chain."""
    inner = active_interior(region, config.r)
    kept = [x for x in config if inner is not None and inner.contains(x)]
    return Configuration(config.domain, kept, config.state_class)


def _apply_restricted(config: Configuration, tau_r: Optional[BoundaryCondition], region: ActiveRegion, x: Point, delete: bool) -> None:
    if not region.contains(x):
        return
    if tau_r is None:
        if delete:
            config.discard_within(x, config.r)
        return
    _apply_update(config, tau_r, x, delete)


def restricted_lazy_chain_step(state: ChainState, active_region: ActiveRegion) -> ChainState:
    """
    Lazy single-center step restricted to A_R.

    The update point is uniform in Lambda; nothing happens outside A_R, and
    inside it the update runs with everything outside (A_R)_Int forbidden.

    Args:
        state: Chain to advance (mutated in place)
        active_region: A_R, a box or a clipped parallel set of a box

    Returns:
        The same state, one step later
    """
    if isinstance(active_region, Box) and not state.params.domain.contains_box(active_region):
        raise GeometryError("the active region must lie inside the domain")
    tau_r = restricted_boundary(state.params.tau, active_region, state.config.r)
    x, delete = _draw_update(state.params, state.rng)
    _apply_restricted(state.config, tau_r, active_region, x, delete)
    state.step += 1
    return state


def coupled_restricted_step(cs: CoupledState, active_region: ActiveRegion) -> CoupledState:
    """
    Couple a full chain (cs.x) with its restricted lazy copy (cs.y).

    If the full chain updates outside A_R the restricted copy does nothing;
    otherwise it attempts the same update.
    """
    tau_r = restricted_boundary(cs.y.params.tau, active_region, cs.y.config.r)
    x, delete = _draw_update(cs.x.params, cs.rng)
    cs.last_update = x
    _apply_update(cs.x.config, cs.x.params.tau, x, delete)
    _apply_restricted(cs.y.config, tau_r, active_region, x, delete)
    cs.x.step += 1
    cs.y.step += 1
    return cs


def heat_bath_kernel(length: float) -> Kernel:
    return partial(heat_bath_step, length=length)


def run_chain(
    state: ChainState,
    steps: int,
    kernel: Kernel = single_center_step,
    observers: Sequence[Callable[[ChainState], Any]] = (),
    stride: int = 1,
) -> Tuple[ChainState, List[List[Any]]]:
    """
    Apply ``kernel`` ``steps`` times, calling every observer after each
    ``stride``-th step.

    Args:
        state: Starting chain
        steps: Number of steps, non-negative
        kernel: Step function
        observers: Callbacks recording statistics of the state
        stride: Observation stride

    Returns:
        (final state, one list of observations per observer)
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    if stride < 1:
        raise ValueError("stride must be at least 1")
    observations: List[List[Any]] = [[] for _ in observers]
    for t in range(1, steps + 1):
        state = kernel(state)
        if observers and t % stride == 0:
            for record, observe in zip(observations, observers):
                record.append(observe(state))
    return state, observations
