"""Sensorless grasp sensing and control from the monitored current.

The drawn current of a stack carries its motion: the v * dC/dt term
collapses when an object halts the finger, so a grasp shows up as the
current dropping below a calibrated threshold, and contact shows up as
the current deviating from a pre-recorded free-motion baseline. Both
algorithms run on the 1 kHz monitor samples after a short moving
average; detection additionally debounces over consecutive samples so
single noise excursions cannot trigger it.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .config import (
    DetectionConfig,
    HandConfig,
    SimConfig,
    profile_hash,
    resolve_scenario,
)
from .errors import (
    BaselineExhaustedError,
    CalibrationError,
    ConfigError,
    InsufficientDataError,
)
from .plant import run_scenario
from .trace import SignalTrace

_T_EPS = 1e-9


def smooth_causal(values, n: int) -> np.ndarray:
    """Causal moving average of length n with a truncated warmup."""
    v = np.asarray(values, dtype=float)
    if n <= 1 or len(v) == 0:
        return v.copy()
    cs = np.concatenate(([0.0], np.cumsum(v)))
    idx = np.arange(len(v))
    lo = np.maximum(0, idx + 1 - n)
    return (cs[idx + 1] - cs[lo]) / (idx + 1 - lo)


# ---------------------------------------------------------------------------
# Threshold calibration and grasp detection
# ---------------------------------------------------------------------------

def _window_values(trace: SignalTrace, cfg: DetectionConfig) -> np.ndarray:
    lo, hi = cfg.window
    if len(trace) == 0 or trace.t[-1] + _T_EPS < hi:
        raise InsufficientDataError(
            f"trace ends at {trace.t[-1] if len(trace) else 0.0:.3f} s, "
            f"window needs {hi:.3f} s"
        )
    smoothed = smooth_causal(trace.i_meas, cfg.smoothing)
    mask = (trace.t >= lo - _T_EPS) & (trace.t <= hi + _T_EPS)
    return smoothed[mask]


def _check_same_profile(traces: list[SignalTrace]) -> None:
    hashes = {t.meta["profile_hash"] for t in traces if "profile_hash" in t.meta}
    if len(hashes) > 1:
        raise ConfigError(f"traces mix voltage profiles: {sorted(hashes)}")


def calibrate_threshold(
    free_traces: list[SignalTrace],
    grasp_traces: list[SignalTrace],
    cfg: DetectionConfig,
) -> float:
    """Detection threshold (uA) separating free motion from grasps.

    Midpoint between the lowest smoothed free-motion current and the
    highest smoothed grasp current over the evaluation window. Raises
    CalibrationError (carrying both extrema) when the classes overlap,
    i.e. when no threshold can separate them.
    """
    if not free_traces or not grasp_traces:
        raise ConfigError("calibration needs at least one trace of each class")
    _check_same_profile(list(free_traces) + list(grasp_traces))
    min_free = min(float(_window_values(t, cfg).min()) for t in free_traces)
    max_grasp = max(float(_window_values(t, cfg).max()) for t in grasp_traces)
    if min_free <= max_grasp:
        raise CalibrationError(min_free, max_grasp)
    return 0.5 * (min_free + max_grasp)


class StreamingDetector:
    """Sample-by-sample grasp detector, equivalent to detect_grasp.

    Feed monitor samples in order; the verdict latches once the smoothed
    current has stayed below the threshold for debounce consecutive
    samples inside the window.
    """

    def __init__(self, cfg: DetectionConfig):
        if cfg.i_threshold is None:
            raise ConfigError("detector has no calibrated i_threshold")
        self.cfg = cfg
        self._buf: deque[float] = deque(maxlen=cfg.smoothing)
        self._run_start: Optional[float] = None
        self._count = 0
        self.grasped = False
        self.decision_time: Optional[float] = None
        self._last_t: Optional[float] = None

    def feed(self, t: float, i_meas: float) -> None:
        self._last_t = t
        self._buf.append(i_meas)
        if self.grasped:
            return
        lo, hi = self.cfg.window
        if t < lo - _T_EPS or t > hi + _T_EPS:
            return
        smoothed = sum(self._buf) / len(self._buf)
        if smoothed < self.cfg.i_threshold:
            if self._count == 0:
                self._run_start = t
            self._count += 1
            if self._count >= self.cfg.debounce:
                self.grasped = True
                self.decision_time = self._run_start
        else:
            self._count = 0
            self._run_start = None

    def verdict(self) -> tuple[bool, Optional[float]]:
        hi = self.cfg.window[1]
        if self._last_t is None or self._last_t + _T_EPS < hi:
            raise InsufficientDataError(
                f"stream ended at {self._last_t} s before window end {hi} s"
            )
        return self.grasped, self.decision_time


def detect_grasp(trace: SignalTrace, cfg: DetectionConfig) -> tuple[bool, Optional[float]]:
    """Offline grasp verdict for a recorded trace.

    Returns (grasped, decision time). The decision time is the first
    sample of the debounced sub-threshold run; free motion returns
    (False, None).
    """
    if cfg.i_threshold is None:
        raise ConfigError("detector has no calibrated i_threshold")
    det = StreamingDetector(cfg)
    for k in range(len(trace)):
        det.feed(float(trace.t[k]), float(trace.i_meas[k]))
    return det.verdict()


# ---------------------------------------------------------------------------
# Baseline recording and the contact-aware controller
# ---------------------------------------------------------------------------

@dataclass
class BaselineProfile:
    """Free-motion current recording used as the contact reference."""

    t: np.ndarray
    i: np.ndarray
    profile_hash: str
    seed: int
    dt_sample: float

    def save(self, csv_path: str | Path) -> Path:
        csv_path = Path(csv_path)
        lines = ["t(s),i(uA)"]
        for k in range(len(self.t)):
            lines.append(f"{float(self.t[k])!r},{float(self.i[k])!r}")
        csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        meta = {"profile_hash": self.profile_hash, "seed": self.seed,
                "dt_sample": self.dt_sample}
        csv_path.with_suffix(".meta.json").write_text(
            json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return csv_path

    @classmethod
    def load(cls, csv_path: str | Path) -> "BaselineProfile":
        csv_path = Path(csv_path)
        lines = [ln for ln in csv_path.read_text(encoding="utf-8").splitlines() if ln.strip()]
        rows = [tuple(float(p) for p in ln.split(",")) for ln in lines[1:]]
        meta = json.loads(csv_path.with_suffix(".meta.json").read_text(encoding="utf-8"))
        t = np.array([r[0] for r in rows])
        i = np.array([r[1] for r in rows])
        return cls(t=t, i=i, profile_hash=meta["profile_hash"],
                   seed=int(meta["seed"]), dt_sample=float(meta["dt_sample"]))


def record_baseline(
    cfg: HandConfig,
    preset_name: str,
    seed: Optional[int] = None,
    sim: Optional[SimConfig] = None,
) -> BaselineProfile:
    """Record the free-motion current of a preset's voltage schedule."""
    scenario = resolve_scenario(cfg, preset_name, drop_object=True, controller="none")
    sim = sim or cfg.sim
    seed = cfg.detection.baseline_seed if seed is None else seed
    trace = run_scenario(scenario, sim, seed)
    return BaselineProfile(
        t=trace.t, i=trace.i_meas, profile_hash=trace.meta["profile_hash"],
        seed=seed, dt_sample=sim.dt_sample,
    )


def deviation_threshold_of(baseline: BaselineProfile, det: DetectionConfig) -> float:
    """Contact deviation threshold from the baseline's own residual noise."""
    smoothed = smooth_causal(baseline.i, det.smoothing)
    resid_std = float(np.std(baseline.i - smoothed))
    return max(det.deviation_mult * resid_std, det.deviation_floor)


@dataclass
class ControllerState:
    """Contact-aware controller mode; transitions ramping -> holding only."""

    mode: str = "ramping"
    v_held: Optional[float] = None
    contact_time: Optional[float] = None


def contact_aware_step(
    i_smoothed: float,
    baseline_at_t: Optional[float],
    v_cmd_prev: float,
    v_scheduled: float,
    state: ControllerState,
    deviation_threshold: float,
    t: Optional[float] = None,
) -> tuple[float, ControllerState]:
    """One 1 kHz decision of the contact-aware voltage controller.

    While ramping, a drop of the smoothed current more than
    deviation_threshold below the baseline means the finger met
    something: the voltage freezes at the previous command for the rest
    of the episode. In holding mode the held voltage is returned
    unconditionally.
    """
    if state.mode == "holding":
        return state.v_held, state
    if baseline_at_t is None:
        raise BaselineExhaustedError(
            "ramp ran past the recorded baseline without detecting contact"
        )
    if baseline_at_t - i_smoothed > deviation_threshold:
        held = ControllerState(mode="holding", v_held=v_cmd_prev, contact_time=t)
        return v_cmd_prev, held
    return v_scheduled, state


class ContactAwareController:
    """Adapter running contact_aware_step against a recorded baseline.

    Decisions use the previous sample's measured current (one sample of
    pipeline latency) compared against the baseline at the same instant.
    """

    def __init__(self, baseline: BaselineProfile, det: DetectionConfig,
                 expected_profile_hash: Optional[str] = None):
        if expected_profile_hash is not None and baseline.profile_hash != expected_profile_hash:
            raise ConfigError(
                f"baseline profile hash {baseline.profile_hash} does not match "
                f"scenario profile hash {expected_profile_hash}"
            )
        self.baseline = baseline
        self.baseline_smoothed = smooth_causal(baseline.i, det.smoothing)
        self.det = det
        self.deviation_threshold = deviation_threshold_of(baseline, det)
        self.state = ControllerState()
        self._buf: deque[float] = deque(maxlen=det.smoothing)
        self._last_cmd = 0.0

    def command(self, t: float, i_prev: Optional[float], scheduled: float) -> tuple[str, float]:
        if self.state.mode == "holding":
            return "hold", float(self.state.v_held)
        if i_prev is None:
            self._last_cmd = scheduled
            return "ramp", scheduled
        self._buf.append(i_prev)
        k_prev = round(t / self.baseline.dt_sample) - 1
        baseline_at = (
            float(self.baseline_smoothed[k_prev])
            if 0 <= k_prev < len(self.baseline_smoothed) else None
        )
        i_smoothed = sum(self._buf) / len(self._buf)
        v_out, self.state = contact_aware_step(
            i_smoothed, baseline_at, self._last_cmd, scheduled,
            self.state, self.deviation_threshold, t=t,
        )
        if self.state.mode == "holding":
            return "hold", v_out
        self._last_cmd = v_out
        return "ramp", v_out


# ---------------------------------------------------------------------------
# Grasp episodes
# ---------------------------------------------------------------------------

@dataclass
class EpisodeReport:
    """Everything one grasp episode produced: trace, events, verdicts."""

    scenario: str
    seed: int
    trace: SignalTrace
    events: list[dict[str, Any]]
    verdicts: dict[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "config_hash": self.trace.meta.get("config_hash"),
            "profile_hash": self.trace.meta.get("profile_hash"),
            "events": self.events,
            "verdicts": self.verdicts,
        }


def run_grasp_episode(
    cfg: HandConfig,
    preset_name: str,
    seed: int,
    *,
    drop_object: bool = False,
    controller: Optional[str] = None,
    baseline: Optional[BaselineProfile] = None,
    detection: Optional[DetectionConfig] = None,
    sim: Optional[SimConfig] = None,
) -> EpisodeReport:
    """Run one grasp episode and assemble its report.

    The preset decides the controller: "none" runs the schedule open
    loop, "detect" classifies the finished trace against the calibrated
    threshold, "contact_aware" closes the loop on the baseline deviation
    (recording a baseline on the fly if none is supplied).
    """
    scenario = resolve_scenario(cfg, preset_name, drop_object=drop_object,
                                controller=controller)
    det = detection if detection is not None else cfg.detection
    sim = sim or cfg.sim

    commander = None
    ctrl: Optional[ContactAwareController] = None
    if scenario.controller == "contact_aware":
        if baseline is None:
            baseline = record_baseline(cfg, preset_name, sim=sim)
        expected = profile_hash(scenario.profiles, scenario.duration, sim.dt_sample)
        ctrl = ContactAwareController(baseline, det, expected_profile_hash=expected)
        commander = ctrl.command

    trace = run_scenario(scenario, sim, seed, commander)

    events: list[dict[str, Any]] = []
    for key, t_c in sorted(trace.meta["events"]["first_contact"].items()):
        events.append({"type": "contact", "joint": key, "t": t_c})
    for h in trace.meta["events"]["hold"]:
        events.append({"type": "hold", "t": h["t"], "v_held": h["v_held"]})

    verdicts: dict[str, Any] = {}

    engaged = sorted({c.finger for c in scenario.chains})
    if scenario.obj is not None:
        contacted = {key.rsplit("_", 1)[0] for key in trace.meta["events"]["first_contact"]}
        verdicts["stable"] = all(f in contacted for f in engaged)
    else:
        verdicts["stable"] = False
    verdicts["fingers_contacted"] = sorted(
        {key.rsplit("_", 1)[0] for key in trace.meta["events"]["first_contact"]}
    )

    if scenario.controller in ("detect", "contact_aware") and det.i_threshold is not None:
        grasped, t_dec = detect_grasp(trace, det)
        verdicts["grasped"] = grasped
        verdicts["decision_time"] = t_dec
        if grasped:
            events.append({"type": "detection", "t": t_dec})

    if ctrl is not None:
        verdicts["held"] = ctrl.state.mode == "holding"
        verdicts["v_held"] = ctrl.state.v_held
        verdicts["contact_time"] = ctrl.state.contact_time
        verdicts["deviation_threshold"] = ctrl.deviation_threshold

    if scenario.obj is not None:
        max_fc = max((float(arr.max()) for arr in trace.f_contact.values()), default=0.0)
        verdicts["max_contact_force"] = max_fc
        if scenario.obj.kind == "fragile":
            verdicts["crushed"] = max_fc > scenario.obj.f_crush
            verdicts["f_crush"] = scenario.obj.f_crush
            verdicts["force_bound"] = _force_bound(scenario, trace)

    return EpisodeReport(
        scenario=preset_name, seed=seed, trace=trace, events=events, verdicts=verdicts,
    )


def _force_bound(scenario, trace: SignalTrace) -> float:
    """Model-side bound on the contact force from the final stall targets.

    The contraction only ever approaches its stall target from below, so
    the force at the end-of-episode target (hold voltage plus residual
    relaxation) bounds everything seen on the trace.
    """
    bound = 0.0
    final_targets = trace.meta.get("final_x_target", {})
    for chain in scenario.chains:
        xt = final_targets.get(chain.tendon_id)
        if xt is None:
            continue
        path = chain.path
        r_div = chain.layout.group_radius(chain.joint_group)
        exc = max(0.0, path.pulley_ratio * xt - path.slack)
        theta_cap = min(chain.layout.joints[j].theta_max for j in chain.joint_group)
        theta = min(exc / r_div, theta_cap)
        for j in chain.joint_group:
            theta_c = scenario.obj.contact_angle(chain.layout.name,
                                                 chain.layout.joints[j].name)
            if theta_c is not None and theta > theta_c:
                bound = max(bound, scenario.obj.k_obj * (theta - theta_c))
    return bound
