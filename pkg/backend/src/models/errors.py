"""Exception hierarchy shared by the samplers, experiments and the CLI."""
from typing import Any, Dict, Optional


class HardSphereError(Exception):
    """Base class for every error raised by hslab."""


class GeometryError(HardSphereError, ValueError):
    """Invalid dimension, radius, box or empty interior."""


class ConfigurationError(HardSphereError, ValueError):
    """A configuration violates its state class or boundary condition."""


class SnapshotError(ConfigurationError):
    """A snapshot could not be loaded; the message names the violated invariant."""


class OracleDomainError(HardSphereError, ValueError):
    """The domain admits more spheres than the oracle can enumerate."""

    def __init__(self, message: str, diameter: float):
        super().__init__(message)
        self.diameter = diameter


class PreconditionError(HardSphereError, ValueError):
    """An experiment or bound precondition does not hold."""

    def __init__(self, message: str, eta_max: Optional[float] = None):
        super().__init__(message)
        self.eta_max = eta_max


class SamplerExhaustedError(HardSphereError, RuntimeError):
    """A rejection budget ran out before an accepted sample was found."""

    def __init__(self, message: str, attempts: int, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts
        self.diagnostics = diagnostics or {}
