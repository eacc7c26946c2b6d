"""Trajectory serialization: CSV, JSON summary and a self-contained SVG plot."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .integrate import Trajectory
from .mechanics import SystemSpec

FLOAT_FMT = ".17g"
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def csv_header(n: int, with_aux: bool = True) -> list[str]:
    cols = ["t"] + [f"q_{i + 1}" for i in range(n)]
    if with_aux:
        cols += [f"aux_{i + 1}" for i in range(n)]
    return cols + ["H", "mass_drift", "centering_drift"]


def write_trajectory_csv(path, system: SystemSpec, traj: Trajectory):
    q_first, aux_first = system.split(traj.states[0])
    n = q_first.size
    d = traj.diagnostics
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(n, aux_first is not None))
        for i, (t, y) in enumerate(zip(traj.times, traj.states)):
            q, aux = system.split(y)
            vals = [t, *q] + ([] if aux is None else list(aux))
            vals += [d["hamiltonian"][i], d["mass_drift"][i], d["centering_drift"][i]]
            w.writerow([format(float(x), FLOAT_FMT) for x in vals])


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Columns of an emitted CSV as float arrays, keyed by header name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array([[float(x) for x in r] for r in rows[1:]])
    return {name: body[:, j] for j, name in enumerate(header)}


def states_from_csv(cols: dict[str, np.ndarray], system: SystemSpec) -> np.ndarray:
    n = sum(1 for k in cols if k.startswith("q_"))
    q = np.column_stack([cols[f"q_{i + 1}"] for i in range(n)])
    if f"aux_1" not in cols:
        return q
    aux = np.column_stack([cols[f"aux_{i + 1}"] for i in range(n)])
    return np.array([system.join(qi, ai) for qi, ai in zip(q, aux)])


def summary(system: SystemSpec, traj: Trajectory) -> dict:
    d = traj.diagnostics
    q, aux = system.split(traj.states[-1])
    H = d["hamiltonian"]
    finite = H[np.isfinite(H)]
    energy_drift = None
    if finite.size and not system.time_dependent:
        energy_drift = float(np.max(np.abs(finite - finite[0])) / max(abs(finite[0]), 1e-300))
    return {
        "system": system.kind,
        "potential": system.potential.name,
        "termination": traj.reason,
        "t_start": float(traj.times[0]),
        "t_final": float(traj.times[-1]),
        "samples": len(traj),
        "steps": traj.n_steps,
        "rejected_steps": traj.n_rejected,
        "field_evaluations": traj.nfev,
        "max_mass_drift": float(np.max(d["mass_drift"])),
        "max_centering_drift": float(np.max(d["centering_drift"])),
        "min_q": float(np.min(d["min_q"])),
        "relative_energy_drift": energy_drift,
        "potential_initial": float(system.potential(system.split(traj.states[0])[0])),
        "potential_final": float(system.potential(q)),
        "final_state": {"q": q.tolist(), "aux": None if aux is None else aux.tolist()},
    }


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2) + "\n")


# -- SVG ----------------------------------------------------------------------

def _polyline(xs, ys, color, width=1.5):
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>'


def _text(x, y, s, size=11, anchor="middle"):
    return f'<text x="{x:.1f}" y="{y:.1f}" font-size="{size}" text-anchor="{anchor}" font-family="sans-serif">{s}</text>'


def _time_panel(times, probs, x0, y0, w, h):
    out = [f'<rect x="{x0}" y="{y0}" width="{w}" height="{h}" fill="none" stroke="#444"/>']
    t0, t1 = times[0], times[-1]
    top = max(1.0, float(probs.max()))
    sx = lambda t: x0 + (t - t0) / (t1 - t0) * w
    sy = lambda p: y0 + h - p / top * h
    for j in range(probs.shape[1]):
        out.append(_polyline(sx(times), sy(probs[:, j]), COLORS[j % len(COLORS)]))
        out.append(_text(x0 + w + 6, y0 + 14 + 14 * j, f"q{j + 1}", anchor="start"))
        out.append(f'<rect x="{x0 + w + 24}" y="{y0 + 6 + 14 * j}" width="10" height="3" fill="{COLORS[j % len(COLORS)]}"/>')
    out.append(_text(x0 + w / 2, y0 + h + 28, "t"))
    out.append(_text(x0, y0 + h + 14, f"{t0:g}"))
    out.append(_text(x0 + w, y0 + h + 14, f"{t1:g}"))
    out.append(_text(x0 - 6, y0 + h, "0", anchor="end"))
    out.append(_text(x0 - 6, y0 + 10, f"{top:g}", anchor="end"))
    return out


def ternary_xy(probs) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric coordinates of (p1, p2, p3) in the unit equilateral triangle."""
    p = np.atleast_2d(probs)
    x = p[:, 1] + 0.5 * p[:, 2]
    y = np.sqrt(3) / 2 * p[:, 2]
    return x, y


def _ternary_panel(probs, x0, y0, size):
    h = size * np.sqrt(3) / 2
    X = lambda x: x0 + x * size
    Y = lambda y: y0 + h - y * size
    corners = [(0, 0), (1, 0), (0.5, np.sqrt(3) / 2), (0, 0)]
    out = [_polyline([X(c[0]) for c in corners], [Y(c[1]) for c in corners], "#444", 1)]
    out.append(_text(X(0) - 8, Y(0) + 14, "q1"))
    out.append(_text(X(1) + 8, Y(0) + 14, "q2"))
    out.append(_text(X(0.5), Y(np.sqrt(3) / 2) - 6, "q3"))
    x, y = ternary_xy(probs)
    out.append(_polyline(X(x), Y(y), COLORS[0]))
    cx, cy = X(x[0]), Y(y[0])
    out.append(f'<path d="M{cx - 5:.1f},{cy - 5:.1f}L{cx + 5:.1f},{cy + 5:.1f}M{cx - 5:.1f},{cy + 5:.1f}L{cx + 5:.1f},{cy - 5:.1f}" stroke="black" stroke-width="1.5"/>')
    out.append(f'<circle cx="{X(x[-1]):.1f}" cy="{Y(y[-1]):.1f}" r="3" fill="{COLORS[1]}"/>')
    return out


def render_svg(system: SystemSpec, traj: Trajectory, title: str = "") -> str:
    qs = np.array([system.split(y)[0] for y in traj.states])
    probs = qs / qs.shape[1]
    ternary = qs.shape[1] == 3
    width = 760 if ternary else 480
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="320" viewBox="0 0 {width} 320">',
             '<rect width="100%" height="100%" fill="white"/>']
    if title:
        parts.append(_text(width / 2, 18, title, size=13))
    parts += _time_panel(traj.times, probs, 50, 40, 340, 230)
    if ternary:
        parts += _ternary_panel(probs, 460, 50, 270)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, system: SystemSpec, traj: Trajectory, title: str = ""):
    Path(path).write_text(render_svg(system, traj, title))
