"""
Bounds Service
Closed-form calculators for the fugacity, density, mixing and correlation-decay
bounds of the hard sphere model.
"""

import logging
import math
from typing import Dict, List, Optional

from scipy.optimize import bisect

from src.config.constant import (
    JJP_MAX_BISECTIONS,
    JJP_RELATIVE_TOLERANCE,
    LAMBERT_W_MAX_ITERATIONS,
    LAMBERT_W_TOLERANCE,
    REFERENCE_LITERALS,
)
from src.models.errors import HardSphereError, PreconditionError
from src.models.schemas import BoundResult
from src.utils.geometry import sphere_radius

logger = logging.getLogger(__name__)

# 1/e, the principal branch point of W is at -1/e
_INV_E = math.exp(-1.0)


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise PreconditionError(message)


def vigoda_c(lam: float, d: int) -> float:
    """c = lambda 2^d / (2 + lambda 2^d), the weight of blocked volume in the pre-metric."""
    _require(lam >= 0.0 and math.isfinite(lam), f"lambda must be finite and non-negative, got {lam}")
    x = lam * 2.0**d
    return x / (2.0 + x)


def critical_fugacity(gamma: float, d: int) -> float:
    """lambda = (1 - gamma) 2^(1-d)."""
    return (1.0 - gamma) * 2.0 ** (1 - d)


def mixing_time_bound(n: float, d: int, gamma: float, epsilon: float) -> int:
    """
    Mixing time ceiling of the single-center dynamics at lambda = (1 - gamma) 2^(1-d).

    Args:
        n: Domain volume
        d: Dimension
        gamma: Slack below 2^(1-d), in (0, 1)
        epsilon: Total variation target, in (0, 1)

    Returns:
        ceil(4n (log(2^(d+2) n) + log(1/epsilon)) / gamma), natural logs
    """
    _require(n > 0, f"n must be positive, got {n}")
    _require(0.0 < gamma < 1.0, "gamma must lie in (0,1)")
    _require(0.0 < epsilon < 1.0, "epsilon must lie in (0,1)")
    value = 4.0 * n * (math.log(2.0 ** (d + 2) * n) + math.log(1.0 / epsilon)) / gamma
    return int(math.ceil(value))


def fugacity_bounds(d: int) -> Dict[str, float]:
    """Uniqueness fugacity 2^(1-d) and the cluster expansion radius e^-1 2^-d."""
    _require(d >= 2, f"fugacity bounds assume d >= 2, got d={d}")
    return {"fugacity_bound": 2.0 ** (1 - d), "cluster_expansion_bound": _INV_E * 2.0**-d}


def density_bound_easy(lam: float, d: int) -> float:
    _require(lam >= 0.0, f"lambda must be non-negative, got {lam}")
    if math.isinf(lam):
        return 2.0**-d
    return lam / (1.0 + 2.0**d * lam)


def finite_volume_density_bound(lam: float, d: int, interior_fraction: float) -> float:
    """(|Lambda_Int| / |Lambda|) lambda / (1 + lambda 2^d)."""
    return interior_fraction * density_bound_easy(lam, d)


def lambert_w(x: float) -> float:
    """
    Principal branch of the Lambert W function for x >= 0.

    Halley iteration seeded with log(x) - log(log(x)) away from the origin and
    with the branch-point series sqrt(2ex + 2) - 1 near it.

    Args:
        x: Non-negative argument

    Returns:
        w with w e^w = x
    """
    _require(x >= 0.0 and not math.isnan(x), f"lambert_w is defined here for x >= 0 only, got {x}")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return math.inf
    if x + _INV_E <= 1.5:
        w = math.sqrt(2.0 * math.e * x + 2.0) - 1.0
    else:
        log_x = math.log(x)
        w = log_x - math.log(log_x)
    for _ in range(LAMBERT_W_MAX_ITERATIONS):
        ew = math.exp(w)
        f = w * ew - x
        w1 = w + 1.0
        dw = f / (ew * w1 - (w + 2.0) * f / (2.0 * w1))
        w -= dw
        if abs(dw) <= LAMBERT_W_TOLERANCE * 1e-3 * (2.0 + abs(w)):
            break
    return w


def _jjp_gap(z: float, lam: float, d: int) -> float:
    return lam * math.exp(-z) - z * 2.0**-d * math.exp(-2.0 * lam * 3.0 ** (d / 2.0))


def density_bound_jjp(lam: float, d: int, upper: float = 1.0) -> float:
    """
    inf_z max{lambda e^-z, z 2^-d e^(-2 lambda 3^(d/2))} by bisection on the crossing.

    Args:
        lam: Fugacity, > 0
        d: Dimension, >= 2
        upper: Initial upper bracket, doubled until the gap changes sign

    Returns:
        The common value lambda e^-z* at the crossing
    """
    _require(lam > 0.0, f"lambda must be positive, got {lam}")
    _require(d >= 2, f"the JJP bound assumes d >= 2, got d={d}")
    hi = upper
    while _jjp_gap(hi, lam, d) > 0.0:
        hi *= 2.0
    try:
        z = bisect(
            _jjp_gap, 0.0, hi, args=(lam, d),
            xtol=1e-300, rtol=JJP_RELATIVE_TOLERANCE, maxiter=JJP_MAX_BISECTIONS,
        )
    except RuntimeError as e:
        raise HardSphereError(f"JJP bisection did not converge: {e}") from e
    return lam * math.exp(-z)


def contraction_rate_bound(n: float, gamma: float, d: int, lam: Optional[float] = None) -> Dict[str, float]:
    """
    Per-step drift -gamma 2^d / ((2 - gamma)(1 + lambda) n) and the factor e^(-gamma/(4n)).

    lambda defaults to (1 - gamma) 2^(1-d), the fugacity a given gamma stands for.

    Args:
        n: Domain volume
        gamma: Gap in (0,1)
        d: Dimension
        lam: Fugacity of the chain, when given explicitly

    Returns:
        per_step_drift, per_step_factor and the lambda used
    """
    _require(n > 0, f"n must be positive, got {n}")
    _require(0.0 < gamma < 1.0, "gamma must lie in (0,1)")
    if lam is None:
        lam = critical_fugacity(gamma, d)
    _require(lam >= 0.0, f"lambda must be non-negative, got {lam}")
    drift = -gamma * 2.0**d / ((2.0 - gamma) * (1.0 + lam) * n)
    return {"per_step_drift": drift, "per_step_factor": math.exp(-gamma / (4.0 * n)), "lambda": lam}


def max_eta(s: float, d: int) -> float:
    return s / (math.e**2 * sphere_radius(d) * 4.0 ** (d + 1))


def disagreement_bound(b_volume: float, s: float, d: int, eta: float) -> Dict[str, float]:
    """
    Disagreement propagation bound |B| e^(-s/(4r)) after floor(eta n) steps.

    Args:
        b_volume: |B|
        s: dist(A, B_Int)
        d: Dimension
        eta: Time as a fraction of n

    Returns:
        bound, eta_max and whether eta exceeds it
    """
    _require(s > 0.0, f"s must be positive, got {s}")
    r = sphere_radius(d)
    eta_max = max_eta(s, d)
    return {"bound": b_volume * math.exp(-s / (4.0 * r)), "eta_max": eta_max, "eta_exceeds": eta > eta_max}


def otm_constants(d: int, gamma: float) -> Dict[str, float]:
    """b = 2^(d+3), c = gamma/4 for optimal temporal mixing below 2^(1-d)."""
    _require(0.0 < gamma < 1.0, "gamma must lie in (0,1)")
    return {"b": 2.0 ** (d + 3), "c": gamma / 4.0}


def otm_tv_bound(n: float, s: float, d: int, gamma: float) -> float:
    """b n e^(-c s): total variation after s n steps."""
    constants = otm_constants(d, gamma)
    return constants["b"] * n * math.exp(-constants["c"] * s)


def path_metric_diameter_bound(n: float, d: int) -> float:
    """Diameter of Omega* under the path metric: at most 2n centers, each edge at most 2^d."""
    return n * 2.0 ** (d + 2)


def projected_mixing_radius(eta: float, d: int) -> float:
    """R = eta e^2 r 4^(d+1); exceeds r iff eta > e^-2 4^-(d+1)."""
    _require(eta > 0.0, f"eta must be positive, got {eta}")
    return eta * math.e**2 * sphere_radius(d) * 4.0 ** (d + 1)


def ssm_coupling_time(s: float, n: float, d: int) -> int:
    """floor(s n / (e^2 r 4^(d+1))) steps."""
    return int(math.floor(s * n / (math.e**2 * sphere_radius(d) * 4.0 ** (d + 1))))


def heat_bath_case_probabilities(k: float, big_n: float, d: int) -> Dict[str, float]:
    """
    Case probabilities of the Hamming coupling of the heat-bath chain, L = K r.

    Args:
        k: K = L / r
        big_n: N = |Lambda_Int^(L)| in units of V_r
        d: Dimension

    Returns:
        coalesce = K^d / N and the boundary-annulus bound ((K+2)^d - K^d) / N
    """
    _require(big_n > 0.0, f"N must be positive, got {big_n}")
    return {
        "coalesce": k**d / big_n,
        "boundary": ((k + 2.0) ** d - k**d) / big_n,
    }


def heat_bath_drift_bound(k: float, d: int, alpha: float, beta: float, big_n: float) -> float:
    """Upper bound on E[Delta] for the heat-bath Hamming coupling given SSM constants alpha, beta."""
    r = sphere_radius(d)
    decay = 2.0 * beta * (k + 1.0) ** (2 * d) * math.exp(-alpha * (r * (k / (8.0 * d)) ** (1.0 / d) - 3.0 * r))
    return -(k**d - 2.0 * d * (k + 2.0) ** (d - 1) * (k / (4.0 * d) + decay)) / big_n


def reference_literals(d: int = 2) -> Dict[str, float]:
    """Literature constants echoed in report footnotes."""
    literals = dict(REFERENCE_LITERALS)
    literals["canonical_moves_density"] = 2.0 ** (-1 - d)
    return literals


def bounds_table(d: int, lam: Optional[float] = None) -> List[BoundResult]:
    """
    Every closed-form bound for dimension d, as emitted by the `bounds` command.

    Args:
        d: Dimension, >= 2
        lam: Fugacity for the density bounds; defaults to 2^(1-d)

    Returns:
        BoundResult rows in a fixed order
    """
    fugacities = fugacity_bounds(d)
    lam = fugacities["fugacity_bound"] if lam is None else lam
    rows = [
        BoundResult(value=fugacities["fugacity_bound"], formula_id="lambda_c_lower", inputs={"d": d}),
        BoundResult(value=fugacities["cluster_expansion_bound"], formula_id="cluster_expansion_radius", inputs={"d": d}),
        BoundResult(value=vigoda_c(lam, d), formula_id="vigoda_c", inputs={"d": d, "lambda": lam}),
        BoundResult(value=density_bound_easy(lam, d), formula_id="density_easy", inputs={"d": d, "lambda": lam}),
        BoundResult(
            value=density_bound_easy(fugacities["fugacity_bound"], d),
            formula_id="rho_c_lower",
            inputs={"d": d, "lambda": fugacities["fugacity_bound"]},
        ),
        BoundResult(value=lambert_w(2.0), formula_id="lambert_w", inputs={"x": 2.0}),
    ]
    if lam > 0.0:
        rows.append(BoundResult(value=density_bound_jjp(lam, d), formula_id="density_jjp", inputs={"d": d, "lambda": lam}))
    rows.append(
        BoundResult(
            value=lambert_w(2.0) * 2.0**-d,
            formula_id="density_jjp_asymptotic",
            inputs={"d": d, "lambda": 2.0 * 2.0**-d},
        )
    )
    logger.debug(f"Computed {len(rows)} bounds for d={d}, lambda={lam}")
    return rows
