"""Finger and thumb kinematics.

Rolling-contact joints are reduced to a constant effective radius, so a
tendon excursion e drives a joint to theta = e / r_eff up to its flexion
limit. On the long fingers the PIP and DIP joints share one tendon and
flex together with a common angle, splitting the excursion over the sum
of their radii. Abduction is mechanically fixed at zero and is not
represented in any state.

Objects are lumped per joint: a joint meets the object at a configured
angle and compresses it with a linear stiffness beyond that.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import ConfigError, DomainError

RIGID_MIN_STIFFNESS = 1e4  # N/rad; below this an object is not "rigid"


@dataclass(frozen=True)
class JointSpec:
    name: str
    r_eff: float        # effective rolling radius, mm
    theta_max: float    # flexion limit, rad
    phalanx_len: float  # link length used as the contact moment arm, mm

    def __post_init__(self):
        if self.r_eff <= 0:
            raise ConfigError(f"joint {self.name}: r_eff must be > 0")
        if not 0 < self.theta_max <= 1.5707963267948966 + 1e-12:
            raise ConfigError(f"joint {self.name}: theta_max must be in (0, pi/2]")
        if self.phalanx_len <= 0:
            raise ConfigError(f"joint {self.name}: phalanx_len must be > 0")


@dataclass(frozen=True)
class FingerLayout:
    """One finger: ordered joints, optional coupled pair, tendon ids.

    tendon_ids name the actuator chains driving this finger, in the
    order given by tendon_joint_groups(): one tendon per free joint,
    with the coupled pair sharing a single tendon.
    """

    name: str
    joints: tuple[JointSpec, ...]
    coupled_pair: Optional[tuple[int, int]] = None
    tendon_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.joints:
            raise ConfigError(f"finger {self.name}: needs at least one joint")
        if self.coupled_pair is not None:
            a, b = self.coupled_pair
            n = len(self.joints)
            if not (0 <= a < n and 0 <= b < n and a != b):
                raise ConfigError(f"finger {self.name}: invalid coupled_pair {self.coupled_pair}")
        groups = self.tendon_joint_groups()
        if self.tendon_ids and len(self.tendon_ids) != len(groups):
            raise ConfigError(
                f"finger {self.name}: {len(self.tendon_ids)} tendon ids for "
                f"{len(groups)} tendon-driven groups"
            )

    def tendon_joint_groups(self) -> tuple[tuple[int, ...], ...]:
        """Joint indices driven by each tendon, in joint order."""
        pair = set(self.coupled_pair) if self.coupled_pair else set()
        groups: list[tuple[int, ...]] = []
        placed_pair = False
        for j in range(len(self.joints)):
            if j in pair:
                if not placed_pair:
                    groups.append(tuple(sorted(pair)))
                    placed_pair = True
            else:
                groups.append((j,))
        return tuple(groups)

    def group_radius(self, group: tuple[int, ...]) -> float:
        return sum(self.joints[j].r_eff for j in group)

    def total_length(self) -> float:
        return sum(j.phalanx_len for j in self.joints)


@dataclass
class FingerState:
    theta: list[float]
    contact: list[bool]
    f_contact: list[float]

    @classmethod
    def at_rest(cls, layout: FingerLayout) -> "FingerState":
        n = len(layout.joints)
        return cls(theta=[0.0] * n, contact=[False] * n, f_contact=[0.0] * n)


@dataclass(frozen=True)
class ObjectModel:
    """Lumped contact model of a graspable object.

    theta_contact maps finger name -> {joint name -> contact angle};
    joints without an entry never touch the object. mass_g is metadata
    only, gravity loading is not simulated.
    """

    name: str
    kind: str                   # rigid | compliant | fragile
    k_obj: float                # contact stiffness, N/rad
    theta_contact: dict[str, dict[str, float]]
    f_crush: Optional[float] = None
    mass_g: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("rigid", "compliant", "fragile"):
            raise ConfigError(f"object {self.name}: unknown kind {self.kind!r}")
        if self.k_obj <= 0:
            raise ConfigError(f"object {self.name}: k_obj must be > 0")
        if self.kind == "rigid" and self.k_obj < RIGID_MIN_STIFFNESS:
            raise ConfigError(
                f"object {self.name}: rigid objects need k_obj >= {RIGID_MIN_STIFFNESS}"
            )
        if self.kind == "fragile" and not (self.f_crush and self.f_crush > 0):
            raise ConfigError(f"object {self.name}: fragile objects need f_crush > 0")

    def contact_angle(self, finger: str, joint_name: str) -> Optional[float]:
        return self.theta_contact.get(finger, {}).get(joint_name)


def angles_from_excursion(layout: FingerLayout, excursions: Sequence[float]) -> list[float]:
    """Joint angles (rad) for the given per-tendon excursions (mm).

    A single joint takes theta = excursion / r_eff; a coupled pair
    shares the excursion over the sum of its radii and flexes with one
    common angle. All angles saturate at the joint flexion limit.
    """
    groups = layout.tendon_joint_groups()
    if len(excursions) != len(groups):
        raise DomainError(
            f"finger {layout.name}: expected {len(groups)} excursions, got {len(excursions)}"
        )
    theta = [0.0] * len(layout.joints)
    for exc, group in zip(excursions, groups):
        if exc < 0:
            raise DomainError(f"excursion {exc} mm must be >= 0")
        cap = min(layout.joints[j].theta_max for j in group)
        ang = min(exc / layout.group_radius(group), cap)
        for j in group:
            theta[j] = ang
    return theta


def tendon_tension_from_torques(layout: FingerLayout, torques: Sequence[float]) -> list[float]:
    """Per-tendon tensions (N) balancing the given joint torques (N*mm).

    Moment balance: a single joint needs tension = torque / r_eff; a
    coupled pair sums torques over the summed radii.
    """
    if len(torques) != len(layout.joints):
        raise DomainError(
            f"finger {layout.name}: expected {len(layout.joints)} torques, got {len(torques)}"
        )
    tensions = []
    for group in layout.tendon_joint_groups():
        total = sum(torques[j] for j in group)
        tensions.append(total / layout.group_radius(group))
    return tensions


def contact_torque(
    obj: ObjectModel, layout: FingerLayout, joint: int, theta: float
) -> tuple[float, float]:
    """(torque N*mm, normal force N) the object exerts on one joint.

    Zero until theta reaches the contact angle, then a linear spring:
    force = k_obj * (theta - theta_contact), torque = force * phalanx.
    """
    spec = layout.joints[joint]
    theta_c = obj.contact_angle(layout.name, spec.name)
    if theta_c is None or theta < theta_c:
        return 0.0, 0.0
    force = obj.k_obj * (theta - theta_c)
    return force * spec.phalanx_len, force


def fingertip_force(
    layout: FingerLayout,
    tension: float,
    posture: FingerState,
    extensor_tension: float = 0.0,
) -> float:
    """Static fingertip normal force (N) in the extended test posture.

    Moment balance about the base (MCP) joint with the finger pressing
    straight down on a load cell:

        F_tip = (tension * r_eff_mcp - extensor_tension * r_eff_mcp)
                / total finger length,  clamped at 0.
    """
    if tension < 0:
        raise DomainError(f"tendon tension {tension} N must be >= 0")
    if any(abs(t) > 1e-9 for t in posture.theta):
        raise DomainError("fingertip_force is defined for the fully extended posture")
    r_mcp = layout.joints[0].r_eff
    moment = (tension - extensor_tension) * r_mcp
    return max(0.0, moment / layout.total_length())
