"""Experiment configuration: the hand, objects, amplifier, presets.

A configuration is one JSON document with blocks for stacks, tendons,
fingers, objects, amplifier, sim, detection and presets. Stacks and
tendon paths are keyed by the same chain id (e.g. "index_mcp"), which
is how a finger's tendons join up with their actuators.

The shipped defaults are calibration values: the two quoted points of
the 2-stack force curve are the only numbers treated as ground truth,
everything else (extensor rates, friction split, contact angles) is
tuned so the simulated bench reproduces the characterization targets.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

from .actuator import StackConfig
from .errors import ConfigError
from .kinematics import FingerLayout, JointSpec, ObjectModel
from .transmission import TendonPath

FINGER_NAMES = ("thumb", "index", "middle", "ring", "pinky")

# Effective rolling radii from the full-flexion excursions:
# 17 mm -> 90 deg at the MCP, 12 mm shared by the coupled PIP/DIP pair.
R_MCP = 34.0 / math.pi
R_PIP = 12.0 / math.pi
R_DIP = 12.0 / math.pi
R_THUMB_IP = 24.0 / math.pi

HALF_PI = math.pi / 2

# Per-stack force knots (contraction mm, force N) at 5.5 kV. The
# 2-stack points are the measured anchors; 1- and 3-stack tables scale
# them per parallel unit.
STACK_KNOTS = {
    1: ((0.0, 12.65), (6.0, 1.0)),
    2: ((0.0, 25.3), (6.0, 2.0)),
    3: ((0.0, 37.95), (6.0, 3.0)),
}


@dataclass(frozen=True)
class AmplifierModel:
    """High-voltage amplifier with slew limit, ceiling and noisy monitors."""

    v_ceiling: float = 5.5      # kV; raised to 6.0 for contact-aware presets
    slew_max: float = 100.0     # kV/s
    monitor_noise_v: float = 0.005  # kV std dev on the voltage monitor
    monitor_noise_i: float = 0.05   # uA std dev on the current monitor

    def __post_init__(self):
        if self.v_ceiling < 0 or self.v_ceiling > 6.0:
            raise ConfigError("v_ceiling must be in [0, 6.0] kV")
        if self.slew_max <= 0:
            raise ConfigError("slew_max must be > 0")
        if self.monitor_noise_v < 0 or self.monitor_noise_i < 0:
            raise ConfigError("monitor noise std devs must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    dt_internal: float = 1e-4   # integration step, s
    dt_sample: float = 1e-3     # monitor sampling period, s (1 kHz)
    tau_mech: float = 0.08      # mechanical relaxation time constant, s
    duration: float = 2.0       # default episode length, s

    def __post_init__(self):
        if self.dt_internal <= 0 or self.dt_sample <= 0:
            raise ConfigError("time steps must be > 0")
        if self.dt_internal > self.dt_sample:
            raise ConfigError("dt_internal must be <= dt_sample")
        ratio = self.dt_sample / self.dt_internal
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("dt_sample must be an integer multiple of dt_internal")
        if self.tau_mech <= 0:
            raise ConfigError("tau_mech must be > 0")
        if self.duration < 0:
            raise ConfigError("duration must be >= 0")
        n = self.duration / self.dt_sample
        if abs(n - round(n)) > 1e-9:
            raise ConfigError("dt_sample must divide duration")

    @property
    def steps_per_sample(self) -> int:
        return round(self.dt_sample / self.dt_internal)


@dataclass(frozen=True)
class DetectionConfig:
    """Current-threshold grasp detection parameters."""

    monitored_stack: str = "index_mcp"
    i_threshold: Optional[float] = None    # uA; set by calibration
    window: tuple[float, float] = (0.88, 0.99)  # evaluation window, s
    smoothing: int = 5                     # moving-average length, samples
    debounce: int = 10                     # consecutive sub-threshold samples
    deviation_mult: float = 3.0            # contact-aware: multiples of baseline residual std
    deviation_floor: float = 0.05          # uA; lower bound on the deviation threshold
    baseline_seed: int = 10000019          # seed used when auto-recording baselines

    def __post_init__(self):
        if self.i_threshold is not None and self.i_threshold <= 0:
            raise ConfigError("i_threshold must be > 0")
        lo, hi = self.window
        if not 0 <= lo < hi:
            raise ConfigError("window must satisfy 0 <= start < end")
        if self.smoothing < 1:
            raise ConfigError("smoothing must be >= 1")
        if self.debounce < 1:
            raise ConfigError("debounce must be >= 1")
        if self.deviation_mult <= 0 or self.deviation_floor < 0:
            raise ConfigError("deviation parameters must be positive")


@dataclass(frozen=True)
class ProfileSpec:
    """Declarative voltage profile: ramp | hold | ramp_hold."""

    kind: str = "ramp_hold"
    target_kv: float = 5.5
    ramp_s: float = 1.0

    def __post_init__(self):
        if self.kind not in ("ramp", "hold", "ramp_hold"):
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.target_kv < 0:
            raise ConfigError("target_kv must be >= 0")
        if self.kind != "hold" and self.ramp_s <= 0:
            raise ConfigError("ramp duration must be > 0")


@dataclass(frozen=True)
class ScenarioPreset:
    name: str
    fingers: tuple[str, ...]
    obj: Optional[str] = None
    profiles: dict[str, ProfileSpec] = field(default_factory=lambda: {"*": ProfileSpec()})
    duration: Optional[float] = None       # falls back to sim.duration
    controller: str = "none"               # none | detect | contact_aware
    amp_ceiling: Optional[float] = None    # overrides amplifier.v_ceiling
    repetitions: int = 1
    seed_base: int = 0

    def __post_init__(self):
        if not self.fingers:
            raise ConfigError(f"preset {self.name}: needs at least one finger")
        if self.controller not in ("none", "detect", "contact_aware"):
            raise ConfigError(f"preset {self.name}: unknown controller {self.controller!r}")
        if "*" not in self.profiles:
            raise ConfigError(f"preset {self.name}: profiles needs a '*' default entry")
        if self.repetitions < 1:
            raise ConfigError(f"preset {self.name}: repetitions must be >= 1")


@dataclass(frozen=True)
class HandConfig:
    """The whole experiment configuration document."""

    stacks: dict[str, StackConfig]
    tendons: dict[str, TendonPath]
    fingers: dict[str, FingerLayout]
    objects: dict[str, ObjectModel]
    amplifier: AmplifierModel
    sim: SimConfig
    detection: DetectionConfig
    presets: dict[str, ScenarioPreset]

    def __post_init__(self):
        for fname, layout in self.fingers.items():
            if fname != layout.name:
                raise ConfigError(f"finger key {fname!r} != layout name {layout.name!r}")
            for tid in layout.tendon_ids:
                if tid not in self.stacks:
                    raise ConfigError(f"finger {fname}: unknown stack {tid!r}")
                if tid not in self.tendons:
                    raise ConfigError(f"finger {fname}: unknown tendon path {tid!r}")
        if self.detection.monitored_stack not in self.stacks:
            raise ConfigError(
                f"detection.monitored_stack {self.detection.monitored_stack!r} is not a stack"
            )
        for pname, preset in self.presets.items():
            if pname != preset.name:
                raise ConfigError(f"preset key {pname!r} != preset name {preset.name!r}")
            for fname in preset.fingers:
                if fname not in self.fingers:
                    raise ConfigError(f"preset {pname}: unknown finger {fname!r}")
            if preset.obj is not None and preset.obj not in self.objects:
                raise ConfigError(f"preset {pname}: unknown object {preset.obj!r}")


# ---------------------------------------------------------------------------
# Shipped defaults
# ---------------------------------------------------------------------------

def _stack(n_units: int) -> StackConfig:
    return StackConfig(
        n_units=n_units,
        force_knots=STACK_KNOTS[n_units],
        v_ref=5.5,
        x_free=12.0,
        c0=0.2 * n_units,
        c_slope=0.05 * n_units,
        v_max=6.0,
    )


def default_config() -> HandConfig:
    stacks: dict[str, StackConfig] = {}
    tendons: dict[str, TendonPath] = {}
    fingers: dict[str, FingerLayout] = {}

    # Thumb: two active joints (MCP, IP), CMC abduction fixed.
    fingers["thumb"] = FingerLayout(
        name="thumb",
        joints=(
            JointSpec("mcp", R_MCP, HALF_PI, 32.0),
            JointSpec("ip", R_THUMB_IP, HALF_PI, 25.0),
        ),
        coupled_pair=None,
        tendon_ids=("thumb_mcp", "thumb_ip"),
    )
    stacks["thumb_mcp"] = _stack(2)
    stacks["thumb_ip"] = _stack(2)
    tendons["thumb_mcp"] = TendonPath(k_ext=0.05, f_ext0=4.764)
    tendons["thumb_ip"] = TendonPath(k_ext=0.249, f_ext0=3.0)

    # Long fingers: independent MCP tendon, coupled PIP/DIP tendon.
    for name in ("index", "middle", "ring", "pinky"):
        fingers[name] = FingerLayout(
            name=name,
            joints=(
                JointSpec("mcp", R_MCP, HALF_PI, 45.0),
                JointSpec("pip", R_PIP, HALF_PI, 28.0),
                JointSpec("dip", R_DIP, HALF_PI, 22.0),
            ),
            coupled_pair=(1, 2),
            tendon_ids=(f"{name}_mcp", f"{name}_pip_dip"),
        )
        stacks[f"{name}_mcp"] = _stack(3)
        stacks[f"{name}_pip_dip"] = _stack(2)
        tendons[f"{name}_mcp"] = TendonPath(k_ext=0.02, f_ext0=4.96)
        tendons[f"{name}_pip_dip"] = TendonPath(k_ext=0.249, f_ext0=3.0)

    def _contacts(thumb_mcp, thumb_ip, mcp, pip, dip, engaged=FINGER_NAMES):
        out = {"thumb": {"mcp": thumb_mcp, "ip": thumb_ip}}
        for f in engaged:
            if f != "thumb":
                out[f] = {"mcp": mcp, "pip": pip, "dip": dip}
        return out

    objects = {
        "cube": ObjectModel(
            "cube", "rigid", 1e4,
            _contacts(0.10, 0.15, 0.18, 0.18, 0.18), mass_g=49.0,
        ),
        "mushroom": ObjectModel(
            "mushroom", "rigid", 1e4,
            _contacts(0.10, 0.18, 0.30, 0.30, 0.30), mass_g=18.0,
        ),
        "stuffed_toy": ObjectModel(
            "stuffed_toy", "compliant", 60.0,
            _contacts(0.10, 0.15, 0.25, 0.25, 0.25), mass_g=107.0,
        ),
        "pet_bottle": ObjectModel(
            "pet_bottle", "compliant", 300.0,
            _contacts(0.10, 0.18, 0.22, 0.22, 0.22), mass_g=26.0,
        ),
        "paper_balloon": ObjectModel(
            "paper_balloon", "fragile", 150.0,
            _contacts(0.10, 0.15, 0.15, 0.15, 0.15), f_crush=0.5, mass_g=2.0,
        ),
    }

    ramp_55 = {"*": ProfileSpec("ramp_hold", 5.5, 1.0)}
    presets = {
        "free_motion": ScenarioPreset("free_motion", ("thumb", "index"), None, ramp_55),
        "pinch_mushroom": ScenarioPreset(
            "pinch_mushroom", ("thumb", "index"), "mushroom", ramp_55),
        "pinch_cube": ScenarioPreset("pinch_cube", ("thumb", "index"), "cube", ramp_55),
        "tripod_toy": ScenarioPreset(
            "tripod_toy", ("thumb", "index", "middle"), "stuffed_toy", ramp_55),
        "power_grasp_bottle": ScenarioPreset(
            "power_grasp_bottle", FINGER_NAMES, "pet_bottle", ramp_55),
        "detect_free": ScenarioPreset(
            "detect_free", ("thumb", "index"), None, ramp_55, controller="detect"),
        "detect_cube": ScenarioPreset(
            "detect_cube", ("thumb", "index"), "cube", ramp_55, controller="detect"),
        "balloon_hold": ScenarioPreset(
            "balloon_hold", ("thumb", "index"), "paper_balloon",
            {"*": ProfileSpec("ramp_hold", 6.0, 1.2)},
            controller="contact_aware", amp_ceiling=6.0),
    }

    return HandConfig(
        stacks=stacks,
        tendons=tendons,
        fingers=fingers,
        objects=objects,
        amplifier=AmplifierModel(),
        sim=SimConfig(),
        detection=DetectionConfig(),
        presets=presets,
    )


# ---------------------------------------------------------------------------
# JSON round trip
# ---------------------------------------------------------------------------

def config_to_dict(cfg: HandConfig) -> dict[str, Any]:
    return {
        "stacks": {
            k: {
                "n_units": s.n_units,
                "force_knots": [list(p) for p in s.force_knots],
                "v_ref": s.v_ref,
                "x_free": s.x_free,
                "c0": s.c0,
                "c_slope": s.c_slope,
                "v_max": s.v_max,
                "force_exponent": s.force_exponent,
            }
            for k, s in cfg.stacks.items()
        },
        "tendons": {
            k: {
                "pulley_ratio": t.pulley_ratio,
                "eta_fwd": t.eta_fwd,
                "f_breakaway": t.f_breakaway,
                "slack": t.slack,
                "k_ext": t.k_ext,
                "f_ext0": t.f_ext0,
            }
            for k, t in cfg.tendons.items()
        },
        "fingers": {
            k: {
                "joints": [
                    {"name": j.name, "r_eff": j.r_eff, "theta_max": j.theta_max,
                     "phalanx_len": j.phalanx_len}
                    for j in f.joints
                ],
                "coupled_pair": list(f.coupled_pair) if f.coupled_pair else None,
                "tendons": list(f.tendon_ids),
            }
            for k, f in cfg.fingers.items()
        },
        "objects": {
            k: {
                "kind": o.kind,
                "k_obj": o.k_obj,
                "theta_contact": o.theta_contact,
                "f_crush": o.f_crush,
                "mass_g": o.mass_g,
            }
            for k, o in cfg.objects.items()
        },
        "amplifier": {
            "v_ceiling": cfg.amplifier.v_ceiling,
            "slew_max": cfg.amplifier.slew_max,
            "monitor_noise_v": cfg.amplifier.monitor_noise_v,
            "monitor_noise_i": cfg.amplifier.monitor_noise_i,
        },
        "sim": {
            "dt_internal": cfg.sim.dt_internal,
            "dt_sample": cfg.sim.dt_sample,
            "tau_mech": cfg.sim.tau_mech,
            "duration": cfg.sim.duration,
        },
        "detection": {
            "monitored_stack": cfg.detection.monitored_stack,
            "i_threshold": cfg.detection.i_threshold,
            "window": list(cfg.detection.window),
            "smoothing": cfg.detection.smoothing,
            "debounce": cfg.detection.debounce,
            "deviation_mult": cfg.detection.deviation_mult,
            "deviation_floor": cfg.detection.deviation_floor,
            "baseline_seed": cfg.detection.baseline_seed,
        },
        "presets": {
            k: {
                "fingers": list(p.fingers),
                "object": p.obj,
                "profiles": {
                    pk: {"kind": ps.kind, "target_kv": ps.target_kv, "ramp_s": ps.ramp_s}
                    for pk, ps in p.profiles.items()
                },
                "duration": p.duration,
                "controller": p.controller,
                "amp_ceiling": p.amp_ceiling,
                "repetitions": p.repetitions,
                "seed_base": p.seed_base,
            }
            for k, p in cfg.presets.items()
        },
    }


def _require(d: dict, key: str, where: str) -> Any:
    if key not in d:
        raise ConfigError(f"{where}: missing required key {key!r}")
    return d[key]


def config_from_dict(doc: dict[str, Any]) -> HandConfig:
    try:
        stacks = {
            k: StackConfig(
                n_units=int(_require(s, "n_units", f"stacks.{k}")),
                force_knots=tuple((float(x), float(f))
                                  for x, f in _require(s, "force_knots", f"stacks.{k}")),
                v_ref=float(_require(s, "v_ref", f"stacks.{k}")),
                x_free=float(s.get("x_free", 12.0)),
                c0=float(s.get("c0", 0.4)),
                c_slope=float(s.get("c_slope", 0.1)),
                v_max=float(s.get("v_max", 6.0)),
                force_exponent=float(s.get("force_exponent", 2.0)),
            )
            for k, s in _require(doc, "stacks", "config").items()
        }
        tendons = {
            k: TendonPath(
                pulley_ratio=float(t.get("pulley_ratio", 2.0)),
                eta_fwd=float(t.get("eta_fwd", 0.55)),
                f_breakaway=float(t.get("f_breakaway", 3.0)),
                slack=float(t.get("slack", 0.0)),
                k_ext=float(t.get("k_ext", 0.0)),
                f_ext0=float(t.get("f_ext0", 0.0)),
            )
            for k, t in _require(doc, "tendons", "config").items()
        }
        fingers = {}
        for k, f in _require(doc, "fingers", "config").items():
            joints = tuple(
                JointSpec(j["name"], float(j["r_eff"]), float(j["theta_max"]),
                          float(j["phalanx_len"]))
                for j in _require(f, "joints", f"fingers.{k}")
            )
            pair = f.get("coupled_pair")
            fingers[k] = FingerLayout(
                name=k,
                joints=joints,
                coupled_pair=tuple(pair) if pair else None,
                tendon_ids=tuple(_require(f, "tendons", f"fingers.{k}")),
            )
        objects = {
            k: ObjectModel(
                name=k,
                kind=_require(o, "kind", f"objects.{k}"),
                k_obj=float(_require(o, "k_obj", f"objects.{k}")),
                theta_contact={
                    fn: {jn: float(a) for jn, a in per.items()}
                    for fn, per in _require(o, "theta_contact", f"objects.{k}").items()
                },
                f_crush=(None if o.get("f_crush") is None else float(o["f_crush"])),
                mass_g=(None if o.get("mass_g") is None else float(o["mass_g"])),
            )
            for k, o in _require(doc, "objects", "config").items()
        }
        amp = doc.get("amplifier", {})
        amplifier = AmplifierModel(
            v_ceiling=float(amp.get("v_ceiling", 5.5)),
            slew_max=float(amp.get("slew_max", 100.0)),
            monitor_noise_v=float(amp.get("monitor_noise_v", 0.005)),
            monitor_noise_i=float(amp.get("monitor_noise_i", 0.05)),
        )
        sim_d = doc.get("sim", {})
        sim = SimConfig(
            dt_internal=float(sim_d.get("dt_internal", 1e-4)),
            dt_sample=float(sim_d.get("dt_sample", 1e-3)),
            tau_mech=float(sim_d.get("tau_mech", 0.08)),
            duration=float(sim_d.get("duration", 2.0)),
        )
        det = doc.get("detection", {})
        detection = DetectionConfig(
            monitored_stack=det.get("monitored_stack", "index_mcp"),
            i_threshold=(None if det.get("i_threshold") is None
                         else float(det["i_threshold"])),
            window=tuple(det.get("window", (0.88, 0.99))),
            smoothing=int(det.get("smoothing", 5)),
            debounce=int(det.get("debounce", 10)),
            deviation_mult=float(det.get("deviation_mult", 3.0)),
            deviation_floor=float(det.get("deviation_floor", 0.05)),
            baseline_seed=int(det.get("baseline_seed", 10000019)),
        )
        presets = {}
        for k, p in _require(doc, "presets", "config").items():
            profiles = {
                pk: ProfileSpec(ps.get("kind", "ramp_hold"),
                                float(ps.get("target_kv", 5.5)),
                                float(ps.get("ramp_s", 1.0)))
                for pk, ps in _require(p, "profiles", f"presets.{k}").items()
            }
            presets[k] = ScenarioPreset(
                name=k,
                fingers=tuple(_require(p, "fingers", f"presets.{k}")),
                obj=p.get("object"),
                profiles=profiles,
                duration=(None if p.get("duration") is None else float(p["duration"])),
                controller=p.get("controller", "none"),
                amp_ceiling=(None if p.get("amp_ceiling") is None
                             else float(p["amp_ceiling"])),
                repetitions=int(p.get("repetitions", 1)),
                seed_base=int(p.get("seed_base", 0)),
            )
    except (TypeError, KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed config: {exc}") from exc

    return HandConfig(stacks, tendons, fingers, objects, amplifier, sim,
                      detection, presets)


def load_config(path) -> HandConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return config_from_dict(doc)


def save_config(cfg: HandConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(cfg: HandConfig) -> str:
    """Stable 16-hex-digit fingerprint of the whole configuration."""
    return hashlib.sha256(canonical_json(config_to_dict(cfg)).encode()).hexdigest()[:16]


def profile_hash(profiles: dict[str, ProfileSpec], duration: float, dt_sample: float) -> str:
    """Fingerprint of the voltage schedule a baseline was recorded under."""
    doc = {
        "profiles": {
            k: {"kind": p.kind, "target_kv": p.target_kv, "ramp_s": p.ramp_s}
            for k, p in profiles.items()
        },
        "duration": duration,
        "dt_sample": dt_sample,
    }
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Scenario resolution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChainSpec:
    """One actuator chain: stack -> pulley/tendon -> joint group."""

    tendon_id: str
    finger: str
    layout: FingerLayout
    joint_group: tuple[int, ...]
    stack: StackConfig
    path: TendonPath
    profile: ProfileSpec


@dataclass(frozen=True)
class Scenario:
    """A fully resolved, runnable scenario."""

    name: str
    chains: tuple[ChainSpec, ...]
    obj: Optional[ObjectModel]
    amplifier: AmplifierModel
    duration: float
    controller: str
    monitored_stack: str
    profiles: dict[str, ProfileSpec]
    config_fingerprint: str

    def chain(self, tendon_id: str) -> ChainSpec:
        for c in self.chains:
            if c.tendon_id == tendon_id:
                return c
        raise ConfigError(f"scenario {self.name}: no chain {tendon_id!r}")


def resolve_scenario(
    cfg: HandConfig,
    preset_name: str,
    *,
    drop_object: bool = False,
    controller: Optional[str] = None,
) -> Scenario:
    """Turn a named preset into a runnable scenario.

    All cross references (fingers, objects, stacks, profile targets vs
    the amplifier ceiling) are checked here, before any simulation.
    """
    if preset_name not in cfg.presets:
        raise ConfigError(
            f"unknown preset {preset_name!r}; available: {', '.join(sorted(cfg.presets))}"
        )
    return resolve_preset(cfg, cfg.presets[preset_name],
                          drop_object=drop_object, controller=controller)


def resolve_preset(
    cfg: HandConfig,
    preset: ScenarioPreset,
    *,
    drop_object: bool = False,
    controller: Optional[str] = None,
) -> Scenario:
    """Resolve a preset object (named or ad hoc) against a configuration."""
    for fname in preset.fingers:
        if fname not in cfg.fingers:
            raise ConfigError(f"preset {preset.name}: unknown finger {fname!r}")
    if preset.obj is not None and preset.obj not in cfg.objects:
        raise ConfigError(f"preset {preset.name}: unknown object {preset.obj!r}")
    obj = None if (drop_object or preset.obj is None) else cfg.objects[preset.obj]
    preset_name = preset.name

    ceiling = preset.amp_ceiling if preset.amp_ceiling is not None else cfg.amplifier.v_ceiling
    amplifier = AmplifierModel(
        v_ceiling=ceiling,
        slew_max=cfg.amplifier.slew_max,
        monitor_noise_v=cfg.amplifier.monitor_noise_v,
        monitor_noise_i=cfg.amplifier.monitor_noise_i,
    )

    chains: list[ChainSpec] = []
    for fname in preset.fingers:
        layout = cfg.fingers[fname]
        for tid, group in zip(layout.tendon_ids, layout.tendon_joint_groups()):
            profile = preset.profiles.get(tid, preset.profiles["*"])
            if profile.target_kv > amplifier.v_ceiling:
                raise ConfigError(
                    f"preset {preset_name}: profile target {profile.target_kv} kV "
                    f"exceeds amplifier ceiling {amplifier.v_ceiling} kV"
                )
            stack = cfg.stacks[tid]
            if profile.target_kv > stack.v_max:
                raise ConfigError(
                    f"preset {preset_name}: profile target {profile.target_kv} kV "
                    f"exceeds stack {tid} v_max {stack.v_max} kV"
                )
            chains.append(ChainSpec(tid, fname, layout, group, stack,
                                    cfg.tendons[tid], profile))

    duration = preset.duration if preset.duration is not None else cfg.sim.duration
    ctrl = controller if controller is not None else preset.controller

    return Scenario(
        name=preset_name,
        chains=tuple(chains),
        obj=obj,
        amplifier=amplifier,
        duration=duration,
        controller=ctrl,
        monitored_stack=cfg.detection.monitored_stack,
        profiles=dict(preset.profiles),
        config_fingerprint=config_hash(cfg),
    )
