"""JSON run configuration: parsing and validation."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrate import IntegratorConfig
from .mechanics import KINDS, KLParams, QuadraticParams, ScheduleABG, SystemSpec, builtin_potentials
from .oracles import TERNARY_Q0, TERNARY_W0
from .simplex import CENTERING_TOL, Density, DomainError, expectation

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass
class Outputs:
    csv_path: str | None = None
    json_path: str | None = None
    svg_path: str | None = None


@dataclass
class RunConfig:
    system: SystemSpec
    q0: np.ndarray
    aux0: np.ndarray | None = None
    v0: np.ndarray | None = None
    t_span: tuple[float, float] = (0.0, 1.0)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    sample_count: int = 201
    outputs: Outputs = field(default_factory=Outputs)
    compare_bound: float = 1e-6
    extra_initial: dict = field(default_factory=dict)

    @property
    def t_eval(self) -> np.ndarray:
        return np.linspace(self.t_span[0], self.t_span[1], self.sample_count)

    def initial_state(self) -> np.ndarray:
        t0 = self.t_span[0]
        if self.aux0 is not None:
            return self.system.join(self.q0, self.aux0)
        return self.system.state_from_velocity(self.q0, self.v0, t0)


def _get(d: dict, key: str, where: str, default=None, required=False):
    if key not in d:
        if required:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    return d[key]


def _floats(x, where) -> np.ndarray:
    try:
        arr = np.asarray(x, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: expected a list of numbers") from exc
    if arr.ndim != 1 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{where}: expected a flat list of finite numbers")
    return arr


def parse_density(x, where="initial.q0") -> np.ndarray:
    """Accept a probability vector (sum 1, scaled by n) or a density (mean 1)."""
    arr = _floats(x, where)
    if abs(arr.sum() - 1.0) < 1e-9:
        arr = arr * arr.size
    try:
        return Density(arr).values.copy()
    except DomainError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _center_checked(q, v, where, recenter) -> np.ndarray:
    if v.shape != q.shape:
        raise ConfigError(f"{where}: length {v.size} does not match q0 length {q.size}")
    m = expectation(q, v)
    if abs(m) > CENTERING_TOL and not recenter:
        raise ConfigError(f"{where}: E_q0[{where.split('.')[-1]}] = {m:.3e} is not centered "
                          "(set initial.recenter to true to center it)")
    return v - m


def parse_potential(d, n) -> object:
    if d is None:
        return builtin_potentials()["negentropy"]()
    if isinstance(d, str):
        d = {"name": d}
    name = _get(d, "name", "system.potential", required=True)
    if name in ("negentropy", "zero"):
        return builtin_potentials()[name]()
    if name == "linear":
        c = _floats(_get(d, "c", "system.potential", required=True), "system.potential.c")
        if c.size != n:
            raise ConfigError("system.potential.c: length does not match q0")
        return builtin_potentials()["linear"](c)
    if name == "kl_to_target":
        target = parse_density(_get(d, "target", "system.potential", required=True), "system.potential.target")
        if target.size != n:
            raise ConfigError("system.potential.target: length does not match q0")
        return builtin_potentials()["kl_to_target"](target)
    raise ConfigError(f"system.potential.name: unknown potential {name!r}")


_PARAMS = {
    QuadraticParams: ("m", "kappa"),
    KLParams: ("a", "b", "c"),
    ScheduleABG: ("p_index", "C", "t0"),
}


def parse_system(d, n) -> SystemSpec:
    if not isinstance(d, dict):
        raise ConfigError("system: expected an object")
    kind = _get(d, "kind", "system", required=True)
    if kind not in KINDS:
        raise ConfigError(f"system.kind: unknown kind {kind!r}; expected one of {', '.join(KINDS)}")
    potential = parse_potential(d.get("potential"), n)
    params = None
    raw = d.get("params", {})
    if not isinstance(raw, dict):
        raise ConfigError("system.params: expected an object")
    if kind.startswith("quadratic"):
        ptype = QuadraticParams
    elif kind.startswith("damped"):
        ptype = ScheduleABG
    elif kind.startswith("kl"):
        ptype = KLParams
    else:
        ptype = None
    if ptype is not None:
        unknown = set(raw) - set(_PARAMS[ptype])
        if unknown:
            raise ConfigError(f"system.params: unknown field(s) {sorted(unknown)} for {kind}")
        try:
            params = ptype(**{k: float(v) for k, v in raw.items()})
        except (DomainError, TypeError, ValueError) as exc:
            raise ConfigError(f"system.params: {exc}") from exc
    return SystemSpec(kind, params, potential)


def parse_integrator(d) -> IntegratorConfig:
    if d is None:
        return IntegratorConfig()
    if not isinstance(d, dict):
        raise ConfigError("integrator: expected an object")
    allowed = set(IntegratorConfig.__dataclass_fields__)
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"integrator: unknown field(s) {sorted(unknown)}")
    try:
        return IntegratorConfig(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integrator: {exc}") from exc


def parse_config(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config: top level must be a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version: expected {SCHEMA_VERSION}, got {version!r}")
    initial = data.get("initial", {})
    if not isinstance(initial, dict):
        raise ConfigError("initial: expected an object")
    q0 = parse_density(initial.get("q0", TERNARY_Q0), "initial.q0")
    n = q0.size
    system = parse_system(data.get("system"), n)
    recenter = bool(initial.get("recenter", False))

    t_span = data.get("t_span", [system.t0 if system.time_dependent else 0.0, 1.0])
    try:
        t_span = tuple(float(x) for x in t_span)
    except (TypeError, ValueError) as exc:
        raise ConfigError("t_span: expected [t_start, t_end]") from exc
    if len(t_span) != 2 or not t_span[1] > t_span[0]:
        raise ConfigError("t_span: expected [t_start, t_end] with t_end > t_start")
    if system.time_dependent and t_span[0] < system.t0:
        raise ConfigError(f"t_span: start {t_span[0]} precedes the schedule's t0 = {system.t0}")

    aux0 = v0 = None
    if "aux0" in initial:
        aux0 = _floats(initial["aux0"], "initial.aux0")
        if system.aux_kind == "companion":
            aux0 = parse_density(aux0, "initial.aux0")
        elif system.aux_kind is not None:
            aux0 = _center_checked(q0, aux0, "initial.aux0", recenter)
    elif system.aux_kind is not None:
        raw = initial.get("v0", TERNARY_W0 if n == 3 else np.zeros(n))
        v0 = _center_checked(q0, _floats(raw, "initial.v0"), "initial.v0", recenter)
    extra = {k: _floats(initial[k], f"initial.{k}") for k in ("eta0", "chi0") if k in initial}

    sample_count = data.get("sample_count", 201)
    if not isinstance(sample_count, int) or sample_count < 2:
        raise ConfigError("sample_count: expected an integer >= 2")
    outs = data.get("outputs", {})
    if not isinstance(outs, dict) or set(outs) - {"csv_path", "json_path", "svg_path"}:
        raise ConfigError("outputs: expected an object with csv_path, json_path, svg_path")
    bound = data.get("compare", {}).get("bound", 1e-6)

    cfg = RunConfig(system, q0, aux0, v0, t_span, parse_integrator(data.get("integrator")),
                    sample_count, Outputs(**outs), float(bound), extra)
    try:
        state = cfg.initial_state()
    except DomainError as exc:
        raise ConfigError(f"initial: infeasible initial state: {exc}") from exc
    if not np.all(np.isfinite(state)):
        raise ConfigError("initial: initial state is not finite")
    return cfg


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)
