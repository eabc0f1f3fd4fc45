"""Scenario assembly and the closed-loop execution engine.

A scenario bundles agents (model + initial state + initial mode + optional
RTA binding), unsafe-set specs, and the time grid. Execution produces an
ExecutionTrace on the exact grid t_k = k*dt, k = 0..floor(T/dt):

    per tick: all RTA decisions are computed from the same pre-step trace,
    then every agent steps, then relative unsafe sets are re-resolved
    against the new anchor states, then everything is appended.

The engine is single-threaded and owns its trace during execution; distinct
executions share nothing.
"""
from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

from .agents import AgentModel, Mode
from .geometry import RelativeSetSpec, SetDef, update_relative
from .trace import ExecutionTrace


class ScenarioError(ValueError):
    """Invalid scenario configuration."""


class ScenarioRuntimeError(RuntimeError):
    """An agent step failed during execution."""


@dataclass
class AgentSpec:
    model: AgentModel
    init_state: list[float]
    init_mode: Mode = Mode.NORMAL
    rta: object | None = None  # RtaBinding; duck-typed to avoid an import cycle


@dataclass
class StaticSetSpec:
    set_id: str
    base: SetDef


@dataclass
class ScenarioConfig:
    agents: list[AgentSpec]
    unsafe_sets: list = field(default_factory=list)  # StaticSetSpec | RelativeSetSpec
    dt: float = 0.1
    horizon: float = 5.0
    workspace_dim: int = 1


class Scenario:
    """A validated, executable scenario. Use build_scenario() to create one."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.dt = float(config.dt)
        self.horizon = float(config.horizon)
        self.workspace_dim = int(config.workspace_dim)
        self.agents_by_id = {spec.model.agent_id: spec for spec in config.agents}
        self.unsafe_by_id = {_set_id(s): s for s in config.unsafe_sets}
        self.n_steps = grid_steps(self.horizon, self.dt)

    def agent_ids(self) -> list[str]:
        return list(self.agents_by_id)

    def unsafe_ids(self) -> list[str]:
        return list(self.unsafe_by_id)

    def position(self, agent_id: str, state) -> list[float]:
        return self.agents_by_id[agent_id].model.position(state)

    def current_mode(self, trace: ExecutionTrace, agent_id: str) -> Mode:
        """Last decided mode, falling back to the configured initial mode."""
        mode = trace.current_mode(agent_id)
        return mode if mode is not None else self.agents_by_id[agent_id].init_mode

    def initial_trace(self) -> ExecutionTrace:
        trace = ExecutionTrace()
        for spec in self.config.agents:
            trace.add_agent(spec.model.agent_id)
            trace.append_state(spec.model.agent_id, 0.0, spec.init_state)
        states = {spec.model.agent_id: list(spec.init_state) for spec in self.config.agents}
        for uspec in self.config.unsafe_sets:
            trace.add_unsafe_set(_set_id(uspec), _set_kind(uspec))
            trace.append_unsafe(_set_id(uspec), 0.0, self._resolve(uspec, states))
        return trace

    def _resolve(self, uspec, states: dict) -> object:
        if isinstance(uspec, RelativeSetSpec):
            anchor_state = states[uspec.anchor_id]
            anchor_pos = self.position(uspec.anchor_id, anchor_state)
            return update_relative(uspec, anchor_pos).payload()
        return uspec.base.payload()

    def advance(self, trace: ExecutionTrace, modes: dict[str, Mode], k: int) -> None:
        """One tick from sample k: step all agents against the pre-step
        trace, then append states, modes, and re-resolved unsafe sets."""
        t_next = (k + 1) * self.dt
        next_states = {}
        for spec in self.config.agents:
            aid = spec.model.agent_id
            _, state = trace.last_state(aid)
            try:
                nxt = spec.model.step(modes[aid], state, self.dt, trace)
            except Exception as exc:
                raise ScenarioRuntimeError(
                    f"agent {aid!r} step failed at t={k * self.dt:g}: {exc}"
                ) from exc
            next_states[aid] = [float(s) for s in nxt]
        for aid, state in next_states.items():
            trace.append_state(aid, t_next, state)
            trace.append_mode(aid, modes[aid])
        for uspec in self.config.unsafe_sets:
            trace.append_unsafe(_set_id(uspec), t_next, self._resolve(uspec, next_states))


def _set_id(uspec) -> str:
    return uspec.set_id


def _set_kind(uspec) -> str:
    return uspec.base.kind


def grid_steps(horizon: float, dt: float) -> int:
    """floor(T/dt) with a guard against float quotient noise."""
    return int(math.floor(horizon / dt + 1e-9))


def build_scenario(config: ScenarioConfig) -> Scenario:
    """Validate a configuration and materialize the executable scenario."""
    if config.dt <= 0:
        raise ScenarioError(f"dt must be positive, got {config.dt}")
    if config.horizon <= 0:
        raise ScenarioError(f"horizon must be positive, got {config.horizon}")
    if config.horizon < config.dt:
        raise ScenarioError(
            f"horizon {config.horizon} must be at least one time step {config.dt}"
        )
    if config.workspace_dim < 1:
        raise ScenarioError(f"workspace dimension must be >= 1, got {config.workspace_dim}")
    if not config.agents:
        raise ScenarioError("scenario needs at least one agent")

    seen = set()
    for spec in config.agents:
        aid = spec.model.agent_id
        if aid in seen:
            raise ScenarioError(f"duplicate agent id {aid!r}")
        seen.add(aid)
        if len(spec.init_state) != spec.model.state_dim:
            raise ScenarioError(
                f"agent {aid!r}: initial state has {len(spec.init_state)} components, "
                f"model {spec.model.model_name!r} expects {spec.model.state_dim}"
            )
        if len(spec.model.position_indices) != config.workspace_dim:
            raise ScenarioError(
                f"agent {aid!r}: model occupies {len(spec.model.position_indices)} "
                f"workspace dimensions, scenario declares {config.workspace_dim}"
            )
        if not isinstance(spec.init_mode, Mode):
            raise ScenarioError(f"agent {aid!r}: initial mode must be a Mode")

    agent_ids = set(seen)
    for uspec in config.unsafe_sets:
        sid = _set_id(uspec)
        if sid in seen:
            if sid in agent_ids:
                raise ScenarioError(f"unsafe set id {sid!r} collides with an agent id")
            raise ScenarioError(f"duplicate unsafe set id {sid!r}")
        seen.add(sid)
        base = uspec.base
        if base.dim != config.workspace_dim:
            raise ScenarioError(
                f"unsafe set {sid!r} has dimension {base.dim}, "
                f"workspace has {config.workspace_dim}"
            )
        if isinstance(uspec, RelativeSetSpec) and uspec.anchor_id not in agent_ids:
            raise ScenarioError(
                f"unsafe set {sid!r}: dangling anchor {uspec.anchor_id!r} "
                f"does not name an agent"
            )

    scenario = Scenario(config)
    for spec in config.agents:
        if spec.rta is not None:
            spec.rta.logic.bind(scenario, spec.model.agent_id)
    return scenario


def execute(scenario: Scenario) -> ExecutionTrace:
    """Run the closed loop over [0, T] and return the complete trace."""
    trace = scenario.initial_trace()
    for k in range(scenario.n_steps):
        modes = {}
        for spec in scenario.config.agents:
            aid = spec.model.agent_id
            if spec.rta is not None:
                modes[aid] = spec.rta.switch(trace)
            else:
                modes[aid] = spec.init_mode
        scenario.advance(trace, modes, k)
    return trace


def predict(scenario: Scenario, trace: ExecutionTrace,
            modes: dict[str, Mode], n_steps: int) -> ExecutionTrace:
    """Fixed-mode rollout from the last sample of `trace`.

    Returns a fresh trace whose first sample is the current one; timestamps
    continue the k*dt grid. The input trace is not touched.
    """
    t0 = trace.timestamps()[-1]
    k0 = int(round(t0 / scenario.dt))
    last = trace.n_samples() - 1
    pred = ExecutionTrace()
    for aid in trace.agent_ids():
        pred.add_agent(aid)
        _, state = trace.last_state(aid)
        pred.append_state(aid, t0, state)
    for sid in trace.unsafe_ids():
        pred.add_unsafe_set(sid, trace.unsafe_kind(sid))
        pred.append_unsafe(sid, t0, trace.unsafe_payload(sid, last))
    for j in range(n_steps):
        scenario.advance(pred, modes, k0 + j)
    return pred


@dataclass
class SimState:
    """Projection of an ExecutionTrace at one grid timestamp."""

    t: float
    states: dict[str, list[float]]
    modes: dict[str, Mode | None]
    unsafe: dict[str, SetDef]


def snapshot(trace: ExecutionTrace, t: float) -> SimState:
    """SimState at the largest recorded timestamp <= t."""
    ts = trace.timestamps()
    if not ts:
        raise ValueError("trace holds no samples")
    if t < ts[0] - 1e-12 or t > ts[-1] + 1e-12:
        raise ValueError(f"t={t:g} outside the recorded range [{ts[0]:g}, {ts[-1]:g}]")
    k = bisect_right(ts, t + 1e-12) - 1
    states = {aid: trace.state(aid, k) for aid in trace.agent_ids()}
    modes = {}
    for aid in trace.agent_ids():
        mt = trace.mode_trace(aid)
        modes[aid] = mt[min(k, len(mt) - 1)] if mt else None
    unsafe = {sid: trace.unsafe_def(sid, k) for sid in trace.unsafe_ids()}
    return SimState(t=ts[k], states=states, modes=modes, unsafe=unsafe)
