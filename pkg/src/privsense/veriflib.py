"""Security arithmetic for chaining state verification with the estimation protocol."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .errors import InvariantError


class ClampWarning(UserWarning):
    """A composed security level exceeded 1 and was clamped."""


def _unit_interval(name: str, x: float) -> float:
    x = float(x)
    if not (0 <= x <= 1) or math.isnan(x):
        raise InvariantError(f"{name}={x} outside [0, 1]")
    return x


@dataclass(frozen=True)
class VerificationGuarantee:
    """With probability at least ``1 - delta`` the verified state has fidelity at least ``1 - lam``."""

    lam: float
    delta: float

    def __post_init__(self):
        _unit_interval("lambda", self.lam)
        _unit_interval("delta", self.delta)


@dataclass(frozen=True)
class SecurityLevel:
    epsilon: float
    clamped: bool = False
    raw: float | None = None  # value before clamping
    conditional: float | None = None  # bound given that verification passed

    def __post_init__(self):
        if not (0 <= self.epsilon <= 1):
            raise InvariantError(f"security level {self.epsilon} outside [0, 1]")


def _clamp(value: float, **extra) -> SecurityLevel:
    if value > 1:
        warnings.warn(f"composed security level {value:.6g} exceeds 1; clamped to 1", ClampWarning, stacklevel=3)
        return SecurityLevel(1.0, True, value, **extra)
    return SecurityLevel(value, False, value, **extra)


def as_level(eps) -> SecurityLevel:
    return eps if isinstance(eps, SecurityLevel) else SecurityLevel(_unit_interval("epsilon", eps))


def verified_epsilon(eps, g: VerificationGuarantee) -> SecurityLevel:
    """``(1 - delta)(eps + sqrt(lam)) + delta``.

    Given that verification passes, the fidelity bound turns into a
    trace-distance penalty of ``sqrt(lam)`` by the triangle inequality; the
    failure probability ``delta`` contributes at most 1.
    """
    e = as_level(eps).epsilon
    conditional = e + math.sqrt(g.lam)
    return _clamp((1 - g.delta) * conditional + g.delta, conditional=conditional)


def sequential_epsilon(eps1, eps2) -> SecurityLevel:
    """Security of two constructions run one after the other: the levels add."""
    return _clamp(as_level(eps1).epsilon + as_level(eps2).epsilon)
