"""Tendon transmission between an actuator stack and a finger.

The flexor tendon wraps a pulley on the stack, so tendon excursion is
pulley_ratio times the contraction (minus any slack). Losses are split
into a multiplicative transmission efficiency and an additive breakaway
(static friction) force at the actuator; extension is passive through
an elastic cord in series with the extensor tendon.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError, DomainError


@dataclass(frozen=True)
class TendonPath:
    pulley_ratio: float = 2.0
    eta_fwd: float = 0.55       # transmission efficiency, calibration value
    f_breakaway: float = 3.0    # static friction at the actuator (N), calibration value
    slack: float = 0.0          # tendon slack consumed before motion (mm)
    k_ext: float = 0.0          # extensor elastic rate (N per mm of excursion)
    f_ext0: float = 0.0         # extensor pretension (N)

    def __post_init__(self):
        if self.pulley_ratio <= 0:
            raise ConfigError("pulley_ratio must be > 0")
        if not 0 < self.eta_fwd <= 1:
            raise ConfigError("eta_fwd must be in (0, 1]")
        if self.f_breakaway < 0:
            raise ConfigError("f_breakaway must be >= 0")
        if self.slack < 0:
            raise ConfigError("slack must be >= 0")
        if self.k_ext < 0:
            raise ConfigError("k_ext must be >= 0")
        if self.f_ext0 < 0:
            raise ConfigError("f_ext0 must be >= 0")


def excursion_of(path: TendonPath, x: float) -> float:
    """Tendon excursion (mm) produced by actuator contraction x (mm)."""
    if x < 0:
        raise DomainError(f"contraction x={x} mm must be >= 0")
    return max(0.0, path.pulley_ratio * x - path.slack)


def reflected_load(path: TendonPath, tendon_tension: float) -> float:
    """Load (N) the actuator must bear to hold a given tendon tension.

    Pulley force balance: the actuator carries pulley_ratio times the
    tendon tension, divided by the transmission efficiency.
    """
    if tendon_tension < 0:
        raise DomainError(f"tendon tension {tendon_tension} N must be >= 0")
    return path.pulley_ratio * tendon_tension / path.eta_fwd


def extensor_tension(path: TendonPath, excursion: float) -> float:
    """Passive extensor pull (N) at a given flexor excursion (mm)."""
    return path.f_ext0 + path.k_ext * excursion


def motion_permitted(path: TendonPath, net_force: float) -> bool:
    """Stiction gate: true iff |net_force| exceeds the breakaway force."""
    return abs(net_force) > path.f_breakaway


def delivered_tension(path: TendonPath, actuator_force: float) -> float:
    """Tendon tension (N) delivered when the output is blocked (isometric).

    Static friction eats f_breakaway of the actuator force before any
    tension builds; the pulley then divides what remains.
    """
    if actuator_force < 0:
        raise DomainError(f"actuator force {actuator_force} N must be >= 0")
    usable = max(0.0, actuator_force - path.f_breakaway)
    return path.eta_fwd * usable / path.pulley_ratio
