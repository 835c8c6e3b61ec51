"""
Hard Sphere Model Service
The measure mu_Lambda^tau: configuration validity, exact rejection sampling,
a quadrature oracle for tiny domains and free-volume estimation.
"""

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.config.settings import settings
from src.models.configuration import BoundaryCondition, Configuration, ModelParams, StateClass
from src.models.errors import GeometryError, OracleDomainError, SamplerExhaustedError
from src.utils.geometry import Box, Point, intersect_boxes, sphere_radius, uniform_point_in_ball
from src.utils.rng import RngStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StarVerdict:
    """Outcome of the Omega* membership test."""
    valid: bool
    exact: bool
    candidate_triples: int
    miss_probability: float

    def __bool__(self) -> bool:
        return self.valid


@dataclass(frozen=True)
class OracleResult:
    """Partition function and sphere-count law of a domain holding at most two spheres."""
    partition_function: float
    expected_count: float
    count_pmf: Tuple[float, ...]
    terms: Tuple[float, ...]


def single_sphere_side(d: int, safety: float = 0.95) -> float:
    """Cube side for which diam(Lambda_Int) < 2r, so at most one sphere fits."""
    r = sphere_radius(d)
    return 2.0 * r + safety * 2.0 * r / math.sqrt(d)


def two_sphere_side(d: int, safety: float = 0.97) -> float:
    """Cube side for which diam(Lambda_Int) < 4r/sqrt(3), so at most two spheres fit."""
    r = sphere_radius(d)
    return 2.0 * r + safety * 4.0 * r / math.sqrt(3.0 * d)


def is_blocked_point(x: Sequence[float], config: Configuration, tau: BoundaryCondition) -> bool:
    """
    Membership of x in the blocked volume Gamma(X).

    Args:
        x: Point of Lambda
        config: Current configuration
        tau: Boundary condition

    Returns:
        True iff x is in Lambda minus Lambda_Int, in tau, or within 2r of a center
    """
    if not config.domain.contains(x):
        raise GeometryError(f"point {tuple(x)} lies outside the domain")
    return in_blocked_set(x, config, tau)


def in_blocked_set(x: Sequence[float], config: Configuration, tau: BoundaryCondition) -> bool:
    """Gamma(X) extended to all of R^d: the complement of Lambda_Int counts as blocked."""
    interior = config.interior
    if interior is None or not interior.contains(x):
        return True
    if tau.contains(x, interior):
        return True
    return config.any_within(x, 2.0 * config.r)


def is_valid_configuration(config: Configuration, tau: BoundaryCondition) -> bool:
    """Exact Omega_Lambda^tau test: pairwise distances >= 2r and no center in tau."""
    two_r = 2.0 * config.r
    for x in config:
        if tau.contains(x, config.interior):
            return False
        # the center itself is at distance 0
        if config.index.count_within(x, two_r) > 1:
            return False
    return True


def _triple_candidates(config: Configuration) -> List[Tuple[Point, Point, Point]]:
    two_r = 2.0 * config.r
    order = {x: i for i, x in enumerate(config)}
    triples = []
    for a in config:
        close = [y for y in config.neighbors_within(a, two_r) if order[y] > order[a]]
        for b, c in itertools.combinations(close, 2):
            if math.dist(b, c) < two_r:
                triples.append((a, b, c))
    return triples


def is_star_configuration(
    config: Configuration,
    rng: Optional[RngStream] = None,
    samples: Optional[int] = None,
    resolution: float = 1e-3,
) -> StarVerdict:
    """
    Omega* test: no point of Lambda is covered by three radius-r balls.

    Triples of centers that are mutually within 2r are screened exactly; each
    surviving triple is checked at a few exact test points and then by Monte
    Carlo inside B_r of its first center (volume one).

    Args:
        config: Configuration to test
        rng: Random stream for the Monte Carlo confirmation
        samples: Points per candidate triple
        resolution: Triple-overlap volume that the Monte Carlo check must detect

    Returns:
        StarVerdict; ``miss_probability`` bounds the chance that an overlap of
        volume at least ``resolution`` went undetected
    """
    triples = _triple_candidates(config)
    if not triples:
        return StarVerdict(True, True, 0, 0.0)
    r = config.r
    samples = samples or settings.STAR_CHECK_SAMPLES
    rng = rng or RngStream(0, 0)

    def covered(y: Sequence[float], triple) -> bool:
        return all(math.dist(y, c) < r for c in triple)

    for triple in triples:
        points = [tuple(sum(cs) / 3.0 for cs in zip(*triple))]
        points += [tuple((p + q) / 2.0 for p, q in zip(u, v)) for u, v in itertools.combinations(triple, 2)]
        if any(covered(y, triple) for y in points):
            return StarVerdict(False, True, len(triples), 0.0)
    for triple in triples:
        for _ in range(samples):
            if covered(uniform_point_in_ball(triple[0], r, rng), triple):
                return StarVerdict(False, True, len(triples), 0.0)
    miss = min(1.0, len(triples) * (1.0 - resolution) ** samples)
    return StarVerdict(True, False, len(triples), miss)


def satisfies_state_class(config: Configuration, tau: BoundaryCondition, rng: Optional[RngStream] = None) -> bool:
    if config.state_class is StateClass.OMEGA:
        return is_valid_configuration(config, tau)
    return is_star_configuration(config, rng).valid


def sample_hard_sphere_rejection(
    params: ModelParams,
    rng: RngStream,
    max_attempts: Optional[int] = None,
) -> Configuration:
    """
    Exact sample from mu_Lambda^tau by rejection.

    Each attempt draws Poisson(lambda * |Lambda_Int|) uniform points in
    Lambda_Int, thins the ones falling in tau and accepts iff the survivors are
    pairwise at distance >= 2r.

    Args:
        params: Model parameters
        rng: Random stream
        max_attempts: Attempt budget

    Returns:
        Accepted configuration
    """
    if max_attempts is None:
        max_attempts = settings.REJECTION_MAX_ATTEMPTS
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    interior = params.interior
    if interior is None or params.lam == 0.0:
        return Configuration(params.domain)
    mean = params.lam * interior.volume
    two_r = 2.0 * params.r
    for attempt in range(1, max_attempts + 1):
        config = Configuration(params.domain)
        accepted = True
        for _ in range(rng.poisson(mean)):
            x = rng.uniform_in_box(interior.low, interior.high)
            if params.tau.contains(x, interior):
                continue
            if config.any_within(x, two_r):
                accepted = False
                break
            config.add(x)
        if accepted:
            if attempt > 1:
                logger.debug(f"Rejection sampler accepted after {attempt} attempts")
            return config
    raise SamplerExhaustedError(
        "rejection sampler exhausted its budget; lambda * |Lambda_Int| is too large",
        max_attempts,
        {"poisson_mean": mean},
    )


def proposal_window(center: Sequence[float], radius: float, interior: Optional[Box]) -> Optional[Box]:
    """Bounding cube of B_radius(center) clipped to Lambda_Int."""
    if interior is None or radius <= 0.0:
        return None
    cube = Box(tuple(c - radius for c in center), tuple(c + radius for c in center))
    return intersect_boxes(cube, interior)


def propose_poisson_in_window(
    window: Optional[Box], lam: float, rng: RngStream, max_proposals: int
) -> Optional[List[Point]]:
    """Poisson(lam * |window|) uniform points of the window; None past the truncation."""
    if window is None:
        return []
    count = rng.poisson(lam * window.volume)
    if count > max_proposals:
        return None
    return [rng.uniform_in_box(window.low, window.high) for _ in range(count)]


def accept_proposals(
    proposals: Iterable[Point],
    forbidden: Callable[[Point], bool],
    two_r: float,
) -> Optional[List[Point]]:
    """Thin proposals by ``forbidden`` and accept iff the survivors are pairwise >= 2r apart."""
    kept: List[Point] = []
    for x in proposals:
        if forbidden(x):
            continue
        if any(math.dist(x, y) < two_r for y in kept):
            return None
        kept.append(x)
    return kept


def count_pmf_from_samples(counts: Iterable[int], max_count: Optional[int] = None) -> np.ndarray:
    """Empirical pmf of sphere counts, padded to ``max_count + 1`` entries."""
    tally = Counter(counts)
    total = sum(tally.values())
    size = max(max(tally, default=0), max_count if max_count is not None else 0) + 1
    pmf = np.zeros(size)
    for k, c in tally.items():
        pmf[k] = c / total
    return pmf


def oracle_small_domain(
    params: ModelParams,
    max_spheres: int = 1,
    quadrature_cells: Optional[int] = None,
) -> OracleResult:
    """
    Partition function of a domain that holds at most ``max_spheres`` spheres.

    Z = sum_{k <= max_spheres} lambda^k / k! * integral over (Lambda_Int minus tau)^k
    of the pairwise constraint, evaluated by midpoint quadrature on a tensor
    grid with ``quadrature_cells`` cells per axis.

    Args:
        params: Model parameters
        max_spheres: 1 or 2
        quadrature_cells: Cells per axis

    Returns:
        OracleResult with Z, E|X| and the count pmf
    """
    if max_spheres not in (1, 2):
        raise ValueError("oracle supports max_spheres in {1, 2}")
    cells = quadrature_cells or settings.ORACLE_CELLS
    interior = params.interior
    if interior is None:
        return OracleResult(1.0, 0.0, (1.0,) + (0.0,) * max_spheres, (1.0,) + (0.0,) * max_spheres)
    r = params.r
    diameter = interior.diameter
    limit = 2.0 * r if max_spheres == 1 else 4.0 * r / math.sqrt(3.0)
    if diameter >= limit:
        raise OracleDomainError(
            f"Lambda_Int has diameter {diameter:.6g} >= {limit:.6g}; more than {max_spheres} spheres fit",
            diameter,
        )
    axes = [lo + (np.arange(cells) + 0.5) * (hi - lo) / cells for lo, hi in zip(interior.low, interior.high)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, params.d)
    if not params.tau.is_free:
        allowed = np.array([not params.tau.contains(tuple(p), interior) for p in mesh.tolist()])
        mesh = mesh[allowed]
    cell_volume = interior.volume / cells**params.d
    terms = [1.0, params.lam * len(mesh) * cell_volume]
    if max_spheres == 2:
        close_pairs = 0
        if len(mesh):
            tree = cKDTree(mesh)
            close_pairs = int(tree.count_neighbors(tree, 2.0 * r))
        far_pairs = len(mesh) ** 2 - close_pairs
        terms.append(params.lam**2 / 2.0 * far_pairs * cell_volume**2)
    z = math.fsum(terms)
    pmf = tuple(t / z for t in terms)
    expected = math.fsum(k * p for k, p in enumerate(pmf))
    return OracleResult(z, expected, pmf, tuple(terms))


def free_volume_fraction_estimate(
    config: Configuration,
    tau: BoundaryCondition,
    samples: int,
    rng: RngStream,
) -> Tuple[float, float]:
    """
    Hit-or-miss estimate of |{y in Lambda_Int : dist(y, X) >= 2r, y not in tau}| / |Lambda|.

    Args:
        config: Configuration
        tau: Boundary condition (excluded from the free set)
        samples: Number of uniform points of Lambda
        rng: Random stream

    Returns:
        (fraction, standard error)
    """
    if samples < 1:
        raise GeometryError("free volume estimation needs at least one sample")
    domain = config.domain
    hits = 0
    for _ in range(samples):
        y = rng.uniform_in_box(domain.low, domain.high)
        if not in_blocked_set(y, config, tau):
            hits += 1
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)
