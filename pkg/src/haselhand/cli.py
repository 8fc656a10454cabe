"""Command-line front end.

Verbs:
    characterize  voltage->angle and voltage->fingertip-force sweeps
    grasp         run one scenario preset, write trace + episode report
    detect-batch  calibrate a threshold and classify a seeded batch
    replay        rerun grasp detection offline on a recorded trace

Every command is deterministic given (config, seed) and writes
plot-ready CSV/JSON only; all outputs carry the config hash. Exit
codes: 0 success, 2 configuration error, 3 model-consistency error,
4 calibration failure. HASELHAND_OUT overrides the output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .actuator import active_force
from .config import (
    DetectionConfig,
    HandConfig,
    ProfileSpec,
    ScenarioPreset,
    config_hash,
    default_config,
    load_config,
    resolve_preset,
    resolve_scenario,
)
from .control import calibrate_threshold, detect_grasp, run_grasp_episode
from .errors import (
    CalibrationError,
    ConfigError,
    DomainError,
    HaselHandError,
    InsufficientDataError,
    ModelConsistencyError,
)
from .kinematics import FingerState, fingertip_force
from .plant import run_scenario
from .trace import load_trace
from .transmission import delivered_tension

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_CALIBRATION = 4


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(doc: Any) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _load(args) -> HandConfig:
    return load_config(args.config) if args.config else default_config()


def _outdir(args) -> Path:
    out = os.environ.get("HASELHAND_OUT") or args.out
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _save_trace(trace, path: Path) -> None:
    _write_atomic(path, trace.to_csv_text())
    _write_atomic(path.with_suffix(".meta.json"), _json_text(trace.meta))


# ---------------------------------------------------------------------------
# characterize
# ---------------------------------------------------------------------------

def _onset_voltage(cfg: HandConfig, tendon_id: str) -> Optional[float]:
    """Commanded voltage below which stiction keeps the chain at rest."""
    stack = cfg.stacks[tendon_id]
    path = cfg.tendons[tendon_id]
    f0 = active_force(stack, stack.v_ref, 0.0)
    if f0 <= 0:
        return None
    need = path.f_breakaway + path.pulley_ratio * path.f_ext0 / path.eta_fwd
    frac = need / f0
    return stack.v_ref * frac ** (1.0 / stack.force_exponent)


def cmd_characterize(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    meta: dict[str, Any] = {
        "config_hash": config_hash(cfg),
        "onset_voltage_kv": {},
        "saturation_deg": {},
        "fingertip_n": {},
    }

    for finger in ("index", "thumb"):
        layout = cfg.fingers[finger]
        mcp_stack = cfg.stacks[layout.tendon_ids[0]]
        target = min(mcp_stack.v_ref, cfg.amplifier.v_ceiling)
        preset = ScenarioPreset(
            name=f"characterize_{finger}",
            fingers=(finger,),
            profiles={"*": ProfileSpec("ramp_hold", target, 1.0)},
            duration=2.0,
        )
        scenario = resolve_preset(cfg, preset)
        trace = run_scenario(scenario, cfg.sim, seed=args.seed)

        joints = [j.name for j in layout.joints]
        lines = ["v_cmd(kV)," + ",".join(f"theta_{finger}_{j}(rad)" for j in joints)]
        for k in range(len(trace)):
            vals = [trace.v_cmd[k]] + [trace.theta[f"{finger}_{j}"][k] for j in joints]
            lines.append(",".join(repr(float(v)) for v in vals))
        _write_atomic(out / f"voltage_angle_{finger}.csv", "\n".join(lines) + "\n")

        for tid in layout.tendon_ids:
            meta["onset_voltage_kv"][tid] = _onset_voltage(cfg, tid)
        for j in joints:
            meta["saturation_deg"][f"{finger}_{j}"] = float(
                np.degrees(trace.theta[f"{finger}_{j}"][-1])
            )

    # Static fingertip-force sweep: finger blocked straight on the load
    # cell, so the stack stalls at zero contraction and the delivered
    # tension works against the extensor pretension about the MCP.
    sweep_top = min(5.5, cfg.amplifier.v_ceiling)
    volts = [round(0.01 * k, 10) for k in range(int(round(sweep_top / 0.01)) + 1)]
    if not volts:
        volts = [0.0]
    force_rows = []
    tips: dict[str, list[float]] = {"index": [], "thumb": []}
    for v in volts:
        row = [v]
        for finger in ("index", "thumb"):
            layout = cfg.fingers[finger]
            tid = layout.tendon_ids[0]
            stack, path = cfg.stacks[tid], cfg.tendons[tid]
            tension = delivered_tension(path, active_force(stack, v, 0.0))
            f_tip = fingertip_force(
                layout, tension, FingerState.at_rest(layout), extensor_tension=path.f_ext0
            )
            row.append(f_tip)
            tips[finger].append(f_tip)
        force_rows.append(row)
    lines = ["v(kV),f_index(N),f_thumb(N)"]
    for row in force_rows:
        lines.append(",".join(repr(float(v)) for v in row))
    _write_atomic(out / "fingertip_force.csv", "\n".join(lines) + "\n")
    meta["fingertip_n"]["index"] = tips["index"][-1]
    meta["fingertip_n"]["thumb"] = tips["thumb"][-1]

    _write_atomic(out / "characterize.meta.json", _json_text(meta))
    print(f"characterize: wrote {out}/voltage_angle_*.csv, fingertip_force.csv")
    return EXIT_OK


# ---------------------------------------------------------------------------
# grasp
# ---------------------------------------------------------------------------

def cmd_grasp(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    report = run_grasp_episode(
        cfg,
        args.preset,
        seed=args.seed,
        drop_object=args.no_object,
        controller="none" if args.no_controller else None,
    )
    stem = f"{args.preset}_seed{args.seed}"
    _save_trace(report.trace, out / f"{stem}.csv")
    _write_atomic(out / f"{stem}.report.json", _json_text(report.to_dict()))
    print(f"grasp: {args.preset} seed={args.seed} verdicts={report.verdicts}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# detect-batch
# ---------------------------------------------------------------------------

CAL_SEED_OFFSET = 900_000
GRASP_SEED_OFFSET = 100_000
N_CALIBRATION = 4


def cmd_detect_batch(args) -> int:
    cfg = _load(args)
    out = _outdir(args)
    if args.free < 1 or args.grasp < 1:
        raise ConfigError("detect-batch needs at least one episode of each class")

    def _run(preset: str, seed: int):
        return run_scenario(resolve_scenario(cfg, preset), cfg.sim, seed)

    cal_free = [_run("detect_free", args.seed + CAL_SEED_OFFSET + k)
                for k in range(N_CALIBRATION)]
    cal_grasp = [_run("detect_cube", args.seed + CAL_SEED_OFFSET + 500 + k)
                 for k in range(N_CALIBRATION)]
    threshold = calibrate_threshold(cal_free, cal_grasp, cfg.detection)

    det = DetectionConfig(
        monitored_stack=cfg.detection.monitored_stack,
        i_threshold=threshold,
        window=cfg.detection.window,
        smoothing=cfg.detection.smoothing,
        debounce=cfg.detection.debounce,
        deviation_mult=cfg.detection.deviation_mult,
        deviation_floor=cfg.detection.deviation_floor,
        baseline_seed=cfg.detection.baseline_seed,
    )

    counts = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    misclassified = []
    profile_fp = None
    for k in range(args.free):
        trace = _run("detect_free", args.seed + k)
        profile_fp = trace.meta["profile_hash"]
        grasped, _ = detect_grasp(trace, det)
        if grasped:
            counts["fp"] += 1
            misclassified.append({"class": "free", "seed": args.seed + k})
        else:
            counts["tn"] += 1
    for k in range(args.grasp):
        trace = _run("detect_cube", args.seed + GRASP_SEED_OFFSET + k)
        grasped, _ = detect_grasp(trace, det)
        if grasped:
            counts["tp"] += 1
        else:
            counts["fn"] += 1
            misclassified.append({"class": "grasp", "seed": args.seed + GRASP_SEED_OFFSET + k})

    total = args.free + args.grasp
    correct = counts["tp"] + counts["tn"]
    summary = {
        "config_hash": config_hash(cfg),
        "threshold_ua": threshold,
        "n_free": args.free,
        "n_grasp": args.grasp,
        "counts": counts,
        "correct": correct,
        "total": total,
        "misclassified": misclassified,
        "seed": args.seed,
    }
    _write_atomic(out / "detect_batch_summary.json", _json_text(summary))
    detector_doc = {
        "monitored_stack": det.monitored_stack,
        "i_threshold": threshold,
        "window": list(det.window),
        "smoothing": det.smoothing,
        "debounce": det.debounce,
        "profile_hash": profile_fp,
        "config_hash": config_hash(cfg),
    }
    _write_atomic(out / "detector.json", _json_text(detector_doc))
    print(f"detect-batch: {correct}/{total} correct, threshold {threshold:.3f} uA")
    return EXIT_OK


# ---------------------------------------------------------------------------
# replay
# ---------------------------------------------------------------------------

def cmd_replay(args) -> int:
    out = _outdir(args)
    detector_doc = json.loads(Path(args.detector).read_text(encoding="utf-8"))
    trace = load_trace(args.trace)

    trace_profile = trace.meta.get("profile_hash")
    want_profile = detector_doc.get("profile_hash")
    if trace_profile and want_profile and trace_profile != want_profile:
        raise ConfigError(
            f"trace profile hash {trace_profile} does not match detector "
            f"baseline hash {want_profile}"
        )

    det = DetectionConfig(
        monitored_stack=detector_doc.get("monitored_stack", "index_mcp"),
        i_threshold=float(detector_doc["i_threshold"]),
        window=tuple(detector_doc.get("window", (0.88, 0.99))),
        smoothing=int(detector_doc.get("smoothing", 5)),
        debounce=int(detector_doc.get("debounce", 10)),
    )
    grasped, t_dec = detect_grasp(trace, det)
    verdict = {
        "trace": Path(args.trace).name,
        "grasped": grasped,
        "decision_time": t_dec,
        "threshold_ua": det.i_threshold,
        "config_hash": trace.meta.get("config_hash"),
        "profile_hash": trace_profile,
    }
    path = out / (Path(args.trace).stem + ".verdict.json")
    _write_atomic(path, _json_text(verdict))
    print(f"replay: grasped={grasped} decision_time={t_dec}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="haselhand",
        description="Simulation workbench for an electrohydraulically "
                    "actuated tendon-driven hand",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config JSON (default: built-in)")
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument("--out", default="out", help="output directory")

    p = sub.add_parser("characterize", help="voltage sweeps: joint angles and fingertip force")
    common(p)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("grasp", help="run one scenario preset")
    common(p)
    p.add_argument("--preset", required=True, help="preset name from the config")
    p.add_argument("--no-object", action="store_true", help="run the preset without its object")
    p.add_argument("--no-controller", action="store_true",
                   help="disable the preset's controller")
    p.set_defaults(func=cmd_grasp)

    p = sub.add_parser("detect-batch", help="calibrate and classify a seeded batch")
    common(p)
    p.add_argument("--free", type=int, default=25, help="number of free-motion episodes")
    p.add_argument("--grasp", type=int, default=25, help="number of grasp episodes")
    p.set_defaults(func=cmd_detect_batch)

    p = sub.add_parser("replay", help="offline grasp detection on a recorded trace")
    common(p)
    p.add_argument("--trace", required=True, help="trace CSV to replay")
    p.add_argument("--detector", required=True, help="detector JSON from detect-batch")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CalibrationError as exc:
        print(f"calibration failure: {exc}", file=sys.stderr)
        return EXIT_CALIBRATION
    except ModelConsistencyError as exc:
        print(f"model-consistency error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ConfigError, DomainError, InsufficientDataError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HaselHandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
