"""ODE integration for flows on the open simplex.

Two methods: classical RK4 on a fixed grid and the Dormand-Prince 5(4) pair
with PI step control.  Both can renormalize the state after every step and
stop at the first time some component of q drops below ``boundary_floor``.
The crossing is located by bisection on the cubic Hermite interpolant of the
last step.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .mechanics import SystemSpec
from .simplex import DomainError, center

METHODS = ("rk4_fixed", "adaptive_embedded_rk")
PROJECTIONS = ("none", "renormalize")
LAYOUTS = ("q", "q_aux", "aux_q")


class IntegrationError(RuntimeError):
    pass


class MaxStepsExceeded(IntegrationError):
    pass


class StepUnderflow(IntegrationError):
    pass


class NaNDetected(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "adaptive_embedded_rk"
    step: float = 1e-2
    rtol: float = 1e-10
    atol: float = 1e-10
    projection: str = "none"
    boundary_floor: float = 1e-6
    max_steps: int = 1_000_000
    max_step: float = math.inf

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.projection not in PROJECTIONS:
            raise ValueError(f"projection must be one of {PROJECTIONS}, got {self.projection!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if not 0 < self.boundary_floor < 1:
            raise ValueError("boundary_floor must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    reason: str = "completed"
    diagnostics: dict = field(default_factory=dict)
    n_steps: int = 0
    n_rejected: int = 0
    nfev: int = 0

    def __len__(self):
        return len(self.times)


# -- layouts and projection --------------------------------------------------

def _split(y, layout):
    if layout == "q":
        return y, None
    a, b = np.split(y, 2)
    return (b, a) if layout == "aux_q" else (a, b)


def _layout_of(system: SystemSpec) -> str:
    if system.kind == "entropy_gradient_flow":
        return "q"
    return "aux_q" if system.kind == "kl_replicator" else "q_aux"


def project(state, kind: str = "q_aux") -> np.ndarray:
    """Rescale densities to mass n and recenter fiber components.

    ``kind`` is a state layout ("q", "q_aux", "aux_q") or a SystemSpec.  In the
    "aux_q" layout the auxiliary component is itself a density (χ).
    """
    layout = _layout_of(kind) if isinstance(kind, SystemSpec) else kind
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    y = np.asarray(state, dtype=float)
    q, aux = _split(y, layout)
    if np.any(q <= 0) or (layout == "aux_q" and np.any(aux <= 0)):
        raise DomainError("cannot project a state with non-positive density entries")
    q = q / q.mean()
    if layout == "q":
        return q
    if layout == "aux_q":
        return np.concatenate([aux / aux.mean(), q])
    return np.concatenate([q, center(q, aux)])


def diagnostics(states, times, layout, system: SystemSpec | None = None) -> dict:
    out = {k: np.empty(len(times)) for k in ("hamiltonian", "mass_drift", "centering_drift", "min_q")}
    for i, (t, y) in enumerate(zip(times, states)):
        q, aux = _split(y, layout)
        out["mass_drift"][i] = abs(q.mean() - 1.0)
        out["min_q"][i] = _min_q(y, layout)
        if aux is None:
            out["centering_drift"][i] = 0.0
        elif layout == "aux_q":
            out["centering_drift"][i] = abs(aux.mean() - 1.0)
        else:
            out["centering_drift"][i] = abs(np.mean(q * aux))
        e = system.energy(t, y) if system is not None else None
        out["hamiltonian"][i] = np.nan if e is None else e
    return out


# -- stepping ----------------------------------------------------------------

_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def _dp_step(f, t, y, h, k1):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(f(t + _C[i] * h, yi))
    y_new = y + h * sum(b * kj for b, kj in zip(_B5, k) if b)
    err = h * sum(e * kj for e, kj in zip(_E, k))
    return y_new, err, k[6]


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), k1


def _hermite(t0, y0, f0, t1, y1, f1, t):
    h = t1 - t0
    s = (t - t0) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s**2 * (3 - 2 * s)
    h11 = s**2 * (s - 1)
    return h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1


def _min_q(y, layout):
    q, aux = _split(y, layout)
    # in the replicator layout the companion χ is a density as well
    return min(q.min(), aux.min()) if layout == "aux_q" else q.min()


def _boundary_crossing(seg, layout, floor, iters=60):
    """Last state of the segment with min q >= floor, found by bisection."""
    t0, y0, f0, t1, y1, f1 = seg
    lo, hi = t0, t1
    ylo = y0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        ym = _hermite(t0, y0, f0, t1, y1, f1, mid)
        if _min_q(ym, layout) >= floor:
            lo, ylo = mid, ym
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
    return lo, ylo


class _Recorder:
    def __init__(self, t_eval, t_start, y0, every_step):
        self.t_eval = None if t_eval is None else np.asarray(t_eval, dtype=float)
        self.every_step = every_step
        self.times, self.states = [], []
        self.next = 0
        if every_step or (self.t_eval is not None and self.t_eval[0] == t_start):
            self._add(t_start, y0)
            if not every_step:
                self.next = 1

    def _add(self, t, y):
        if self.times and t <= self.times[-1]:
            return
        self.times.append(float(t))
        self.states.append(np.array(y, dtype=float))

    def target(self):
        if self.t_eval is None or self.next >= len(self.t_eval):
            return None
        return self.t_eval[self.next]

    def segment(self, seg, t_stop=None):
        """Record all outputs inside an accepted step [t0, t1] (up to t_stop)."""
        t0, y0, f0, t1, y1, f1 = seg
        end = t1 if t_stop is None else t_stop
        if self.every_step:
            if t_stop is None:
                self._add(t1, y1)
            return
        while self.next < len(self.t_eval) and self.t_eval[self.next] <= end:
            te = self.t_eval[self.next]
            ye = y1 if te == t1 else _hermite(t0, y0, f0, t1, y1, f1, te)
            self._add(te, ye)
            self.next += 1


def integrate(field_or_system, state0, t_span, config: IntegratorConfig | None = None,
              t_eval=None, layout: str | None = None) -> Trajectory:
    """Integrate a flow from ``state0`` over ``t_span``.

    ``field_or_system`` is a SystemSpec or a callable ``f(t, y)``; for plain
    callables ``layout`` says where q sits in the state (default "q_aux").
    With ``t_eval`` given, steps land exactly on each requested time;
    otherwise every accepted step is recorded.
    """
    config = config or IntegratorConfig()
    system = field_or_system if isinstance(field_or_system, SystemSpec) else None
    f: Callable = system.field if system else field_or_system
    layout = _layout_of(system) if system else (layout or "q_aux")
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    t_start, t_end = map(float, t_span)
    if not t_end > t_start:
        raise ValueError("t_span must be increasing")
    if system is not None and t_start < system.t0:
        raise DomainError(f"t_span starts at {t_start} before the system's t0 = {system.t0}")
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or t_eval[0] < t_start or t_eval[-1] > t_end:
            raise ValueError("t_eval must be increasing and inside t_span")

    y = np.array(state0, dtype=float)
    if _min_q(y, layout) < config.boundary_floor:
        raise DomainError("initial state already below the boundary floor")
    proj = (lambda z: project(z, layout)) if config.projection == "renormalize" else (lambda z: z)
    rec = _Recorder(t_eval, t_start, y, t_eval is None)
    counters = {"nfev": 0}

    def fun(t, z):
        counters["nfev"] += 1
        return np.asarray(f(t, z), dtype=float)

    with np.errstate(all="ignore"):
        if config.method == "rk4_fixed":
            reason, n_steps, n_rej = _run_rk4(fun, t_start, t_end, y, config, rec, layout, proj)
        else:
            reason, n_steps, n_rej = _run_dp(fun, t_start, t_end, y, config, rec, layout, proj)

    times = np.array(rec.times)
    states = np.array(rec.states)
    return Trajectory(times, states, reason, diagnostics(states, times, layout, system),
                      n_steps, n_rej, counters["nfev"])


def _accept(seg, rec, layout, floor):
    """Record an accepted step; returns True when the boundary was crossed."""
    t1, y1 = seg[3], seg[4]
    if _min_q(y1, layout) >= floor:
        rec.segment(seg)
        return False
    tb, yb = _boundary_crossing(seg, layout, floor)
    rec.segment(seg, t_stop=tb)
    rec._add(tb, yb)
    return True


def _check_finite(y, t):
    if not np.all(np.isfinite(y)):
        raise NaNDetected(f"non-finite state at t = {t:.6g}")


def _run_rk4(f, t0, t1, y, cfg, rec, layout, proj):
    stops = list(rec.t_eval) if rec.t_eval is not None else []
    stops = [s for s in stops if s > t0] + ([t1] if not stops or stops[-1] < t1 else [])
    t, n = t0, 0
    for stop in stops:
        m = max(1, math.ceil((stop - t) / cfg.step - 1e-9))
        h = (stop - t) / m
        for i in range(m):
            n += 1
            if n > cfg.max_steps:
                raise MaxStepsExceeded(f"more than {cfg.max_steps} steps")
            try:
                y_new, f0 = _rk4_step(f, t, y, h)
            except DomainError as exc:
                raise NaNDetected(f"field left its domain at t = {t:.6g}: {exc}") from exc
            t_new = stop if i == m - 1 else t + h
            _check_finite(y_new, t_new)
            y_new = proj(y_new)
            try:
                f1 = f(t_new, y_new)
            except DomainError:
                f1 = np.full_like(y_new, np.nan)
            if not np.all(np.isfinite(f1)):
                if _min_q(y_new, layout) >= cfg.boundary_floor:
                    raise NaNDetected(f"non-finite field at t = {t_new:.6g}")
                f1 = (y_new - y) / h  # past the boundary; secant slope for the crossing search
            seg = (t, y, f0, t_new, y_new, f1)
            if _accept(seg, rec, layout, cfg.boundary_floor):
                return "boundary", n, 0
            t, y = t_new, y_new
    return "completed", n, 0


def _initial_step(f, t0, y0, f0, cfg, t1):
    scale = cfg.atol + cfg.rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t1 - t0)
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    h1 = max(1e-6, h0 * 1e-3) if max(d1, d2) <= 1e-15 else (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t1 - t0, cfg.max_step)


def _run_dp(f, t0, t1, y, cfg, rec, layout, proj):
    t = t0
    fy = f(t, y)
    _check_finite(fy, t)
    h = _initial_step(f, t0, y, fy, cfg, t1)
    err_prev = 1e-4
    n_acc = n_rej = 0
    while t < t1:
        if n_acc + n_rej >= cfg.max_steps:
            raise MaxStepsExceeded(f"more than {cfg.max_steps} steps")
        if h < 16 * np.finfo(float).eps * max(1.0, abs(t)):
            raise StepUnderflow(f"step size {h:.3g} underflows at t = {t:.6g}")
        target = rec.target()
        limit = t1 if target is None else min(target, t1)
        h_try = min(h, limit - t)
        landing = h_try == limit - t
        t_new = limit if landing else t + h_try
        try:
            y_new, err_vec, f_new = _dp_step(f, t, y, h_try, fy)
        except DomainError:
            y_new = None
        if y_new is None or not (np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))):
            h = 0.25 * h_try
            n_rej += 1
            continue
        scale = cfg.atol + cfg.rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            err = max(err, 1e-10)
            fac = 0.9 * err ** (-0.7 / 5) * err_prev ** (0.4 / 5)
            h_next = h_try * min(5.0, max(0.2, fac))
            err_prev = err
            if cfg.projection != "none":
                y_new = proj(y_new)
                f_new = f(t_new, y_new)
            n_acc += 1
            seg = (t, y, fy, t_new, y_new, f_new)
            if _accept(seg, rec, layout, cfg.boundary_floor):
                return "boundary", n_acc, n_rej
            t, y, fy = t_new, y_new, f_new
            # a step clipped to an output time should not shrink the next one
            h = max(h_next, h) if landing and h_try < h else h_next
            h = min(h, cfg.max_step)
        else:
            h = h_try * max(0.2, 0.9 * err ** (-1 / 5))
            n_rej += 1
    return "completed", n_acc, n_rej
