"""Electromechanical model of a stacked Peano-HASEL actuator.

A stack is several pouch actuators in mechanical parallel. Its active
force is a tabulated force-contraction curve at a reference voltage,
scaled electrostatically with applied voltage; its capacitance grows
linearly as the electrodes zip together; the current it draws is the
displacement current of a variable capacitor,

    i = C * dv/dt + v * dC/dt.

Units are fixed throughout the package: mm, kV, N, nF, uA, s.
With these units the two current terms come out in uA directly
(nF * kV/s == uA).
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import Callable, Sequence

from .errors import ConfigError, DomainError, ModelConsistencyError

# Bisection defaults for the quasi-static force balance.
FORCE_TOL_N = 1e-6
MAX_BISECT_ITER = 200


@dataclass(frozen=True)
class StackConfig:
    """Static parameters of one actuator stack.

    force_knots tabulate contraction (mm) vs force (N) at v_ref; the
    curve is extended linearly to zero force at x_free. c0/c_slope are
    totals for the whole stack, not per pouch.
    """

    n_units: int
    force_knots: tuple[tuple[float, float], ...]
    v_ref: float
    x_free: float = 12.0
    c0: float = 0.4
    c_slope: float = 0.1
    v_max: float = 6.0
    force_exponent: float = 2.0

    def __post_init__(self):
        if self.n_units < 1:
            raise ConfigError("n_units must be >= 1")
        if len(self.force_knots) < 2:
            raise ConfigError("force_knots needs at least two points")
        xs = [x for x, _ in self.force_knots]
        fs = [f for _, f in self.force_knots]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ConfigError("force_knots must be strictly increasing in contraction")
        if any(f < 0 for f in fs):
            raise ConfigError("force_knots forces must be non-negative")
        if any(b > a for a, b in zip(fs, fs[1:])):
            raise ConfigError("force_knots forces must be non-increasing")
        if not 0 < self.v_ref <= self.v_max:
            raise ConfigError("v_ref must satisfy 0 < v_ref <= v_max")
        if self.x_free < xs[-1]:
            raise ConfigError("x_free must be >= last knot contraction")
        if self.x_free == xs[-1] and fs[-1] != 0.0:
            raise ConfigError("force at x_free must be 0 when the knot table ends there")
        if self.c0 <= 0:
            raise ConfigError("c0 must be > 0")
        if self.c_slope < 0:
            raise ConfigError("c_slope must be >= 0")
        if self.force_exponent <= 0:
            raise ConfigError("force_exponent must be > 0")

    @property
    def curve(self) -> tuple[tuple[float, ...], tuple[float, ...]]:
        """Knot table extended to (x_free, 0), as (xs, forces)."""
        xs = [x for x, _ in self.force_knots]
        fs = [f for _, f in self.force_knots]
        if xs[-1] < self.x_free:
            xs.append(self.x_free)
            fs.append(0.0)
        return tuple(xs), tuple(fs)


@dataclass
class ActuatorStackState:
    """Instantaneous electromechanical state of one stack.

    c is always derived from x through capacitance_of; it is stored for
    trace output, never set independently.
    """

    x: float = 0.0      # contraction, mm
    v: float = 0.0      # applied voltage, kV
    c: float = 0.0      # capacitance, nF
    i: float = 0.0      # drawn current, uA
    t: float = 0.0      # time, s

    @classmethod
    def at_rest(cls, cfg: StackConfig) -> "ActuatorStackState":
        return cls(x=0.0, v=0.0, c=capacitance_of(cfg, 0.0), i=0.0, t=0.0)


def _interp_curve(xs: Sequence[float], fs: Sequence[float], x: float) -> float:
    """Piecewise-linear interpolation on a sorted knot table."""
    if x <= xs[0]:
        return fs[0]
    if x >= xs[-1]:
        return fs[-1]
    j = bisect_right(xs, x) - 1
    x0, x1 = xs[j], xs[j + 1]
    f0, f1 = fs[j], fs[j + 1]
    return f0 + (f1 - f0) * (x - x0) / (x1 - x0)


def reference_force(cfg: StackConfig, x: float) -> float:
    """Force (N) at contraction x with v_ref applied."""
    xs, fs = cfg.curve
    return _interp_curve(xs, fs, x)


def active_force(cfg: StackConfig, v: float, x: float) -> float:
    """Active contraction force (N) at voltage v (kV) and contraction x (mm).

    The tabulated curve gives the force at v_ref; other voltages scale
    it by (v / v_ref) ** force_exponent (Maxwell-stress scaling with the
    default exponent of 2).
    """
    if not 0.0 <= x <= cfg.x_free:
        raise DomainError(f"contraction x={x} mm outside [0, x_free={cfg.x_free}]")
    if not 0.0 <= v <= cfg.v_max:
        raise DomainError(f"voltage v={v} kV outside [0, v_max={cfg.v_max}]")
    return reference_force(cfg, x) * (v / cfg.v_ref) ** cfg.force_exponent


def capacitance_of(cfg: StackConfig, x: float) -> float:
    """Stack capacitance (nF) at contraction x (mm): c0 + c_slope * x."""
    if not 0.0 <= x <= cfg.x_free:
        raise DomainError(f"contraction x={x} mm outside [0, x_free={cfg.x_free}]")
    return cfg.c0 + cfg.c_slope * x


def displacement_current(c: float, dv_dt: float, v: float, dc_dt: float) -> float:
    """Current (uA) drawn by a variable capacitor.

    c in nF, dv_dt in kV/s, v in kV, dc_dt in nF/s. The second term is
    the motion-dependent component: it vanishes when deformation stops.
    """
    return c * dv_dt + v * dc_dt


def equilibrium_contraction(
    cfg: StackConfig,
    v: float,
    load: Callable[[float], float],
    force_tol: float = FORCE_TOL_N,
    max_iter: int = MAX_BISECT_ITER,
) -> float:
    """Contraction x* (mm) where active force balances a monotone load.

    load(x) must be non-decreasing in x, so the residual
    active_force(cfg, v, x) - load(x) is non-increasing and bisection
    brackets the unique root. Returns 0 when the load already exceeds
    the available force at x = 0, and x_free when the actuator is never
    fully opposed.
    """
    def residual(x: float) -> float:
        return active_force(cfg, v, x) - load(x)

    r_lo = residual(0.0)
    if r_lo <= 0.0:
        return 0.0
    r_hi = residual(cfg.x_free)
    if r_hi >= 0.0:
        return cfg.x_free

    lo, hi = 0.0, cfg.x_free
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        r_mid = residual(mid)
        # A monotone residual must stay inside the bracket values.
        if r_mid > r_lo + force_tol or r_mid < r_hi - force_tol:
            raise ModelConsistencyError(
                f"non-monotone residual at x={mid:.6g} mm "
                f"(r={r_mid:.6g} outside [{r_hi:.6g}, {r_lo:.6g}])"
            )
        if abs(r_mid) <= force_tol:
            return mid
        if r_mid > 0.0:
            lo, r_lo = mid, r_mid
        else:
            hi, r_hi = mid, r_mid
    raise ModelConsistencyError(
        f"force balance did not converge to {force_tol} N in {max_iter} iterations"
    )
