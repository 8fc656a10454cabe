"""Uniformly sampled monitor traces and their on-disk format.

A trace holds the 1 kHz monitor channels (commanded and measured
voltage, measured current of the monitored stack) plus the internal
plant state sampled on the same grid: per-joint angles and contact
forces, per-stack contraction and capacitance.

On disk a trace is a CSV whose header names every column with its unit
in parentheses, next to a .meta.json companion carrying seed, config
hash, scenario name and run diagnostics. Floats are written with repr
so a re-run with the same seed is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .errors import TraceSchemaError

FIXED_COLUMNS = ("t(s)", "v_cmd(kV)", "v_meas(kV)", "i_meas(uA)")


def theta_col(finger: str, joint: str) -> str:
    return f"theta_{finger}_{joint}(rad)"


def fc_col(finger: str, joint: str) -> str:
    return f"fc_{finger}_{joint}(N)"


def x_col(stack: str) -> str:
    return f"x_{stack}(mm)"


def c_col(stack: str) -> str:
    return f"c_{stack}(nF)"


@dataclass
class SignalTrace:
    t: np.ndarray
    v_cmd: np.ndarray
    v_meas: np.ndarray
    i_meas: np.ndarray
    theta: dict[str, np.ndarray]      # "finger_joint" -> rad
    f_contact: dict[str, np.ndarray]  # "finger_joint" -> N
    x: dict[str, np.ndarray]          # stack id -> mm
    c: dict[str, np.ndarray]          # stack id -> nF
    meta: dict[str, Any] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def dt_sample(self) -> float:
        return float(self.meta.get("dt_sample", 1e-3))

    def columns(self) -> list[tuple[str, np.ndarray]]:
        cols: list[tuple[str, np.ndarray]] = [
            ("t(s)", self.t),
            ("v_cmd(kV)", self.v_cmd),
            ("v_meas(kV)", self.v_meas),
            ("i_meas(uA)", self.i_meas),
        ]
        for key in sorted(self.theta):
            finger, joint = key.rsplit("_", 1)
            cols.append((theta_col(finger, joint), self.theta[key]))
        for key in sorted(self.f_contact):
            finger, joint = key.rsplit("_", 1)
            cols.append((fc_col(finger, joint), self.f_contact[key]))
        for key in sorted(self.x):
            cols.append((x_col(key), self.x[key]))
        for key in sorted(self.c):
            cols.append((c_col(key), self.c[key]))
        return cols

    def to_csv_text(self) -> str:
        cols = self.columns()
        header = ",".join(name for name, _ in cols)
        lines = [header]
        arrays = [arr for _, arr in cols]
        for k in range(len(self.t)):
            lines.append(",".join(repr(float(a[k])) for a in arrays))
        return "\n".join(lines) + "\n"

    def save(self, csv_path: str | Path) -> Path:
        csv_path = Path(csv_path)
        csv_path.write_text(self.to_csv_text(), encoding="utf-8")
        meta_path = csv_path.with_suffix(".meta.json")
        meta_path.write_text(
            json.dumps(self.meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        return csv_path


def _parse_header(header: str) -> list[str]:
    names = [h.strip() for h in header.split(",")]
    for required in FIXED_COLUMNS:
        if required not in names:
            raise TraceSchemaError(f"trace is missing column {required!r}", column=required)
    return names


def load_trace(csv_path: str | Path) -> SignalTrace:
    """Read a trace CSV (and its .meta.json companion if present)."""
    csv_path = Path(csv_path)
    text = csv_path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TraceSchemaError("trace file is empty")
    names = _parse_header(lines[0])
    data = np.zeros((len(lines) - 1, len(names)))
    for r, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(names):
            raise TraceSchemaError(
                f"row {r + 1} has {len(parts)} values for {len(names)} columns"
            )
        data[r] = [float(p) for p in parts]

    by_name = {name: data[:, j] for j, name in enumerate(names)}
    theta: dict[str, np.ndarray] = {}
    fcs: dict[str, np.ndarray] = {}
    xs: dict[str, np.ndarray] = {}
    cs: dict[str, np.ndarray] = {}
    for name, col in by_name.items():
        if name in FIXED_COLUMNS:
            continue
        if name.startswith("theta_") and name.endswith("(rad)"):
            theta[name[len("theta_"):-len("(rad)")]] = col
        elif name.startswith("fc_") and name.endswith("(N)"):
            fcs[name[len("fc_"):-len("(N)")]] = col
        elif name.startswith("x_") and name.endswith("(mm)"):
            xs[name[len("x_"):-len("(mm)")]] = col
        elif name.startswith("c_") and name.endswith("(nF)"):
            cs[name[len("c_"):-len("(nF)")]] = col
        else:
            raise TraceSchemaError(f"unrecognized column {name!r}", column=name)

    meta: dict[str, Any] = {}
    meta_path = csv_path.with_suffix(".meta.json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text(encoding="utf-8"))

    return SignalTrace(
        t=by_name["t(s)"],
        v_cmd=by_name["v_cmd(kV)"],
        v_meas=by_name["v_meas(kV)"],
        i_meas=by_name["i_meas(uA)"],
        theta=theta,
        f_contact=fcs,
        x=xs,
        c=cs,
        meta=meta,
    )


def reconstruct_current(trace: SignalTrace, stack: str) -> np.ndarray:
    """Re-derive the monitored current from the stored c(t) and v(t).

    Central differences on the sampled series; the first and last
    samples cannot be reconstructed and are returned as NaN. Used as an
    independent cross-check of the simulator's current synthesis.
    """
    c = trace.c[stack]
    v = trace.v_meas
    n = len(trace)
    out = np.full(n, np.nan)
    if n < 3:
        return out
    dt = trace.dt_sample
    dv = (v[2:] - v[:-2]) / (2 * dt)
    dc = (c[2:] - c[:-2]) / (2 * dt)
    out[1:-1] = c[1:-1] * dv + v[1:-1] * dc
    return out
