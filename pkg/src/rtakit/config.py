"""Scenario configuration files (JSON) -> ScenarioConfig.

Document layout (see schema/scenario.schema.json for the full contract):

    {"workspace_dim": 1,
     "time": {"dt": 0.1, "T": 5.0},
     "agents": [{"id": "...", "model": "acc|dubins_car|dubins_plane",
                 "params": {...}, "init": [...], "mode": "UNTRUSTED",
                 "rta": {"type": "sim|reach|none", "horizon": 1.0,
                         "bloat_rate": 0.1}},
                ...],
     "unsafe_sets": [{"id": "...", "type": "ball", "definition": [[0.0], 7.0],
                      "anchor": "leader", "offset": [5.0]},
                     ...]}

anchor/offset are optional; with them the set is re-resolved every step so
its reference point sits at anchor position + offset.
"""
from __future__ import annotations

import json
from pathlib import Path

from .agents import (
    AccAgent,
    AccParams,
    DubinsCarAgent,
    DubinsCarParams,
    DubinsPlaneAgent,
    DubinsPlaneParams,
    Mode,
)
from .geometry import GeometryError, RelativeSetSpec, set_from_payload
from .rta import ReachRta, RtaBinding, SimRta
from .scenario import AgentSpec, ScenarioConfig, StaticSetSpec

MODEL_NAMES = ("acc", "dubins_car", "dubins_plane")

DEFAULT_RTA_HORIZON = 1.0
DEFAULT_BLOAT_RATE = 0.1

_ACC_PARAM_KEYS = {
    "k1", "k2", "a_max", "v_max", "follow_distance", "collision_distance",
    "leader_speed",
}
_CAR_PARAM_KEYS = {
    "k_heading", "k_speed", "v_max", "v_cruise", "v_safe", "capture_radius",
    "nominal",
}
_PLANE_PARAM_KEYS = _CAR_PARAM_KEYS | {"k_gamma", "pitch_up", "gamma_max"}
_WIRING_KEYS = {"leader_id", "formation_offset", "waypoints"}


class ConfigError(ValueError):
    """Malformed scenario configuration; the message names the location."""


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise ConfigError(f"{where}: missing required field {key!r}")
    return doc[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _build_agent(entry: dict, index: int) -> AgentSpec:
    where = f"agents[{index}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object")
    agent_id = _require(entry, "id", where)
    model_name = _require(entry, "model", where)
    if model_name not in MODEL_NAMES:
        raise ConfigError(
            f"{where}: unknown model {model_name!r}; expected one of {', '.join(MODEL_NAMES)}"
        )
    raw = dict(entry.get("params", {}))
    wiring = {k: raw.pop(k) for k in list(raw) if k in _WIRING_KEYS}

    if model_name == "acc":
        allowed = _ACC_PARAM_KEYS
    elif model_name == "dubins_car":
        allowed = _CAR_PARAM_KEYS
    else:
        allowed = _PLANE_PARAM_KEYS
    unknown = set(raw) - allowed
    if unknown:
        raise ConfigError(
            f"{where}.params: unknown fields {sorted(unknown)} for model {model_name!r}"
        )

    try:
        if model_name == "acc":
            model = AccAgent(agent_id, AccParams(**raw),
                             leader_id=wiring.get("leader_id"))
        elif model_name == "dubins_car":
            model = DubinsCarAgent(
                agent_id, DubinsCarParams(**raw),
                waypoints=wiring.get("waypoints"),
                leader_id=wiring.get("leader_id"),
                formation_offset=wiring.get("formation_offset"),
            )
        else:
            model = DubinsPlaneAgent(
                agent_id, DubinsPlaneParams(**raw),
                waypoints=wiring.get("waypoints"),
                leader_id=wiring.get("leader_id"),
                formation_offset=wiring.get("formation_offset"),
            )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.params: {exc}") from exc

    init = _require(entry, "init", where)
    if not isinstance(init, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in init
    ):
        raise ConfigError(f"{where}.init: expected a list of numbers")

    mode_name = entry.get("mode", "NORMAL")
    try:
        mode = Mode(mode_name)
    except ValueError as exc:
        raise ConfigError(f"{where}.mode: unknown mode {mode_name!r}") from exc

    return AgentSpec(
        model=model,
        init_state=[float(v) for v in init],
        init_mode=mode,
        rta=_build_rta(entry.get("rta"), f"{where}.rta"),
    )


def _build_rta(entry, where: str) -> RtaBinding | None:
    if entry is None:
        return None
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = entry.get("type", "none")
    if kind == "none":
        return None
    horizon = _number(entry.get("horizon", DEFAULT_RTA_HORIZON), f"{where}.horizon")
    if kind == "sim":
        logic = SimRta(horizon=horizon)
    elif kind == "reach":
        rate = _number(entry.get("bloat_rate", DEFAULT_BLOAT_RATE), f"{where}.bloat_rate")
        logic = ReachRta(horizon=horizon, bloat_rate=rate)
    else:
        raise ConfigError(f"{where}.type: unknown RTA type {kind!r}; expected sim, reach, or none")
    return RtaBinding(logic, collect=True)


def _build_unsafe(entry: dict, index: int):
    where = f"unsafe_sets[{index}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where}: expected an object")
    set_id = _require(entry, "id", where)
    kind = _require(entry, "type", where)
    definition = _require(entry, "definition", where)
    try:
        base = set_from_payload(kind, definition)
    except GeometryError as exc:
        raise ConfigError(f"{where}.definition: {exc}") from exc
    anchor = entry.get("anchor")
    offset = entry.get("offset")
    if anchor is None and offset is None:
        return StaticSetSpec(set_id=set_id, base=base)
    if anchor is None:
        raise ConfigError(f"{where}: offset given without an anchor")
    if offset is None:
        offset = [0.0] * base.dim
    try:
        return RelativeSetSpec(set_id, base, offset, anchor)
    except GeometryError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def config_from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"<document>: expected an object, got {type(doc).__name__}")
    time_section = _require(doc, "time", "<document>")
    if not isinstance(time_section, dict):
        raise ConfigError("time: expected an object with dt and T")
    dt = _number(_require(time_section, "dt", "time"), "time.dt")
    horizon = _number(_require(time_section, "T", "time"), "time.T")
    workspace_dim = _require(doc, "workspace_dim", "<document>")
    if isinstance(workspace_dim, bool) or not isinstance(workspace_dim, int):
        raise ConfigError("workspace_dim: expected an integer")
    agents_section = _require(doc, "agents", "<document>")
    if not isinstance(agents_section, list) or not agents_section:
        raise ConfigError("agents: expected a nonempty list")
    agents = [_build_agent(entry, i) for i, entry in enumerate(agents_section)]
    unsafe_section = doc.get("unsafe_sets", [])
    if not isinstance(unsafe_section, list):
        raise ConfigError("unsafe_sets: expected a list")
    unsafe = [_build_unsafe(entry, i) for i, entry in enumerate(unsafe_section)]
    return ScenarioConfig(
        agents=agents,
        unsafe_sets=unsafe,
        dt=dt,
        horizon=horizon,
        workspace_dim=workspace_dim,
    )


def parse_scenario_config(path) -> ScenarioConfig:
    """Load and validate a scenario file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    return config_from_dict(doc)
