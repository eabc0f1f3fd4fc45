"""Execution traces: the time-stamped record every other component consumes.

Wire format (JSON), stable so external simulators can produce it:

    {"agents": {"<id>": {"state_trace": [[t, s0, s1, ...], ...],
                         "mode_trace": ["UNTRUSTED", ...]},
                ...},
     "unsafe": {"<id>": {"type": "ball",
                         "state_trace": [[t, <payload>], ...]},
                ...}}

Invariants: all state traces share one strictly increasing timestamp grid;
each agent's mode trace has exactly one entry fewer than its state trace
(a mode labels the transition out of each state); unsafe payloads follow
the layouts documented in the geometry module.
"""
from __future__ import annotations

import json
from pathlib import Path

from .agents import Mode
from .geometry import GeometryError, SET_KINDS, SetDef, set_from_payload

MODE_NAMES = tuple(m.value for m in Mode)


class TraceSchemaError(ValueError):
    """Trace document violates the wire format. `path` locates the offense."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class ExecutionTrace:
    """Mutable during execution, treated as immutable once complete."""

    def __init__(self):
        self.agents: dict[str, dict] = {}
        self.unsafe: dict[str, dict] = {}

    # -- construction ----------------------------------------------------

    def add_agent(self, agent_id: str):
        if agent_id in self.agents:
            raise ValueError(f"duplicate agent id {agent_id!r}")
        self.agents[agent_id] = {"state_trace": [], "mode_trace": []}

    def add_unsafe_set(self, set_id: str, kind: str):
        if set_id in self.unsafe:
            raise ValueError(f"duplicate unsafe set id {set_id!r}")
        if kind not in SET_KINDS:
            raise ValueError(f"unknown set type {kind!r}")
        self.unsafe[set_id] = {"type": kind, "state_trace": []}

    def append_state(self, agent_id: str, t: float, state):
        self.agents[agent_id]["state_trace"].append([float(t)] + [float(s) for s in state])

    def append_mode(self, agent_id: str, mode: Mode):
        self.agents[agent_id]["mode_trace"].append(mode)

    def append_unsafe(self, set_id: str, t: float, payload):
        self.unsafe[set_id]["state_trace"].append([float(t), payload])

    # -- access ----------------------------------------------------------

    def agent_ids(self) -> list[str]:
        return list(self.agents)

    def unsafe_ids(self) -> list[str]:
        return list(self.unsafe)

    def n_samples(self) -> int:
        if not self.agents:
            return 0
        first = next(iter(self.agents.values()))
        return len(first["state_trace"])

    def timestamps(self) -> list[float]:
        if not self.agents:
            return []
        first = next(iter(self.agents.values()))
        return [row[0] for row in first["state_trace"]]

    def state(self, agent_id: str, k: int) -> list[float]:
        return self.agents[agent_id]["state_trace"][k][1:]

    def last_state(self, agent_id: str) -> tuple[float, list[float]]:
        row = self.agents[agent_id]["state_trace"][-1]
        return row[0], row[1:]

    def mode_trace(self, agent_id: str) -> list[Mode]:
        return self.agents[agent_id]["mode_trace"]

    def current_mode(self, agent_id: str) -> Mode | None:
        modes = self.agents[agent_id]["mode_trace"]
        return modes[-1] if modes else None

    def unsafe_kind(self, set_id: str) -> str:
        return self.unsafe[set_id]["type"]

    def unsafe_payload(self, set_id: str, k: int):
        return self.unsafe[set_id]["state_trace"][k][1]

    def unsafe_def(self, set_id: str, k: int) -> SetDef:
        entry = self.unsafe[set_id]
        return set_from_payload(entry["type"], entry["state_trace"][k][1])

    def prefix(self, k: int) -> "ExecutionTrace":
        """Samples 0..k with the mode decisions made strictly before k."""
        if not 0 <= k < self.n_samples():
            raise IndexError(f"sample index {k} out of range")
        out = ExecutionTrace()
        for aid, entry in self.agents.items():
            out.agents[aid] = {
                "state_trace": entry["state_trace"][: k + 1],
                "mode_trace": entry["mode_trace"][:k],
            }
        for sid, entry in self.unsafe.items():
            out.unsafe[sid] = {
                "type": entry["type"],
                "state_trace": entry["state_trace"][: k + 1],
            }
        return out

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "agents": {
                aid: {
                    "state_trace": [list(row) for row in entry["state_trace"]],
                    "mode_trace": [m.value for m in entry["mode_trace"]],
                }
                for aid, entry in self.agents.items()
            },
            "unsafe": {
                sid: {
                    "type": entry["type"],
                    "state_trace": [list(row) for row in entry["state_trace"]],
                }
                for sid, entry in self.unsafe.items()
            },
        }

    @classmethod
    def from_dict(cls, doc: dict, validate: bool = True) -> "ExecutionTrace":
        if validate:
            validate_trace_dict(doc)
        out = cls()
        for aid, entry in doc["agents"].items():
            out.agents[aid] = {
                "state_trace": [[float(v) for v in row] for row in entry["state_trace"]],
                "mode_trace": [Mode(name) for name in entry["mode_trace"]],
            }
        for sid, entry in doc["unsafe"].items():
            out.unsafe[sid] = {
                "type": entry["type"],
                "state_trace": [[float(row[0]), row[1]] for row in entry["state_trace"]],
            }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def dump(self, path):
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path, validate: bool = True) -> "ExecutionTrace":
        text = Path(path).read_text()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TraceSchemaError("<document>", f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc, validate=validate)


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def validate_trace_dict(doc) -> None:
    """Check a raw document against the wire format.

    Raises TraceSchemaError naming the first offending path.
    """
    if not isinstance(doc, dict):
        raise TraceSchemaError("<document>", f"expected an object, got {type(doc).__name__}")
    if set(doc) != {"agents", "unsafe"}:
        raise TraceSchemaError(
            "<document>", f"top-level keys must be exactly 'agents' and 'unsafe', got {sorted(doc)}"
        )
    agents = doc["agents"]
    if not isinstance(agents, dict) or not agents:
        raise TraceSchemaError("agents", "must be a nonempty object")
    grid = None
    grid_owner = None
    for aid, entry in agents.items():
        path = f"agents.{aid}"
        if not isinstance(entry, dict) or set(entry) != {"state_trace", "mode_trace"}:
            raise TraceSchemaError(path, "must have exactly 'state_trace' and 'mode_trace'")
        states = entry["state_trace"]
        if not isinstance(states, list) or not states:
            raise TraceSchemaError(f"{path}.state_trace", "must be a nonempty list")
        width = None
        times = []
        for i, row in enumerate(states):
            rpath = f"{path}.state_trace[{i}]"
            if not isinstance(row, list) or len(row) < 2:
                raise TraceSchemaError(rpath, "must be a list [t, s0, ...] with >= 2 entries")
            if not all(_is_number(v) for v in row):
                raise TraceSchemaError(rpath, "entries must be numbers")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise TraceSchemaError(rpath, f"row length {len(row)} != {width} of earlier rows")
            times.append(float(row[0]))
        if any(b <= a for a, b in zip(times, times[1:])):
            raise TraceSchemaError(f"{path}.state_trace", "timestamps must be strictly increasing")
        if grid is None:
            grid, grid_owner = times, aid
        elif times != grid:
            raise TraceSchemaError(
                f"{path}.state_trace", f"timestamps differ from agent {grid_owner!r}"
            )
        modes = entry["mode_trace"]
        if not isinstance(modes, list):
            raise TraceSchemaError(f"{path}.mode_trace", "must be a list")
        if len(modes) != len(states) - 1:
            raise TraceSchemaError(
                f"{path}.mode_trace",
                f"length must be {len(states) - 1} (one fewer than state_trace), got {len(modes)}",
            )
        for i, name in enumerate(modes):
            if name not in MODE_NAMES:
                raise TraceSchemaError(
                    f"{path}.mode_trace[{i}]", f"unknown mode {name!r}, expected one of {MODE_NAMES}"
                )
    unsafe = doc["unsafe"]
    if not isinstance(unsafe, dict):
        raise TraceSchemaError("unsafe", "must be an object")
    for sid, entry in unsafe.items():
        path = f"unsafe.{sid}"
        if not isinstance(entry, dict) or set(entry) != {"type", "state_trace"}:
            raise TraceSchemaError(path, "must have exactly 'type' and 'state_trace'")
        kind = entry["type"]
        if kind not in SET_KINDS:
            raise TraceSchemaError(f"{path}.type", f"unknown set type {kind!r}")
        rows = entry["state_trace"]
        if not isinstance(rows, list) or not rows:
            raise TraceSchemaError(f"{path}.state_trace", "must be a nonempty list")
        if len(rows) != len(grid):
            raise TraceSchemaError(
                f"{path}.state_trace", f"expected {len(grid)} samples to match agents, got {len(rows)}"
            )
        dim = None
        for i, row in enumerate(rows):
            rpath = f"{path}.state_trace[{i}]"
            if not isinstance(row, list) or len(row) != 2 or not _is_number(row[0]):
                raise TraceSchemaError(rpath, "must be a pair [t, definition]")
            if float(row[0]) != grid[i]:
                raise TraceSchemaError(rpath, f"timestamp {row[0]} differs from agent grid {grid[i]}")
            try:
                sd = set_from_payload(kind, row[1])
            except GeometryError as exc:
                raise TraceSchemaError(rpath, str(exc)) from exc
            if dim is None:
                dim = sd.dim
            elif sd.dim != dim:
                raise TraceSchemaError(rpath, f"set dimension changed from {dim} to {sd.dim}")
