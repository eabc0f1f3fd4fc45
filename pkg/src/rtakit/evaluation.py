"""Data collection and post-hoc evaluation of executed scenarios.

Metrics: per-decision computation time (avg/min/max), distance from unsafe
sets and from other agents, time to collision under constant-velocity
extrapolation, controller usage percentages, and switch counts. All
post-hoc operations are read-only over an immutable trace.

Workspace positions are the leading `workspace_dim` state components; for
traces loaded from files the dimension is inferred from the unsafe-set
definitions unless supplied explicitly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .agents import Mode
from .geometry import Ball, Hyperrectangle, PointSet, Polytope, RelativeSetSpec, SetDef
from .trace import ExecutionTrace


class EvalError(ValueError):
    """Invalid collection or evaluation request."""


class Collector:
    """Accumulates the observed trace and per-decision durations for one
    RTA binding."""

    def __init__(self):
        self.trace: ExecutionTrace | None = None
        self.durations: list[float] = []

    def collect_trace(self, snapshot: ExecutionTrace) -> None:
        if self.trace is not None:
            if set(snapshot.agent_ids()) != set(self.trace.agent_ids()):
                raise EvalError(
                    f"agent ids changed between collections: "
                    f"{sorted(self.trace.agent_ids())} vs {sorted(snapshot.agent_ids())}"
                )
            if set(snapshot.unsafe_ids()) != set(self.trace.unsafe_ids()):
                raise EvalError("unsafe set ids changed between collections")
        self.trace = snapshot

    def collect_computation_time(self, duration: float) -> None:
        duration = float(duration)
        if not math.isfinite(duration) or duration < 0:
            raise EvalError(f"duration must be finite and nonnegative, got {duration}")
        self.durations.append(duration)


@dataclass(frozen=True)
class TimingStats:
    count: int
    avg: float | None = None
    min: float | None = None
    max: float | None = None

    @property
    def has_data(self) -> bool:
        return self.count > 0


def computation_time_stats(source) -> TimingStats:
    """Exact mean/min/max of the recorded durations; count-0 means no data."""
    durations = source.durations if isinstance(source, Collector) else list(source)
    if not durations:
        return TimingStats(count=0)
    return TimingStats(
        count=len(durations),
        avg=sum(durations) / len(durations),
        min=min(durations),
        max=max(durations),
    )


@dataclass
class ScenarioMetadata:
    """Side information the trace file does not carry.

    collision_radius maps a target agent id to the radius used for
    agent-vs-agent TTC; by default an agent anchoring a relative unsafe
    ball inherits that ball's radius.
    """

    workspace_dim: int | None = None
    collision_radius: dict[str, float] = field(default_factory=dict)
    default_collision_radius: float = 0.0
    rta_agents: tuple[str, ...] = ()

    @classmethod
    def from_scenario(cls, scenario) -> "ScenarioMetadata":
        radii = {}
        for uspec in scenario.config.unsafe_sets:
            if isinstance(uspec, RelativeSetSpec) and isinstance(uspec.base, Ball):
                radii.setdefault(uspec.anchor_id, uspec.base.radius)
        rta_agents = tuple(
            spec.model.agent_id for spec in scenario.config.agents if spec.rta is not None
        )
        return cls(
            workspace_dim=scenario.workspace_dim,
            collision_radius=radii,
            rta_agents=rta_agents,
        )

    @classmethod
    def from_trace(cls, trace: ExecutionTrace) -> "ScenarioMetadata":
        dim = None
        for sid in trace.unsafe_ids():
            dim = trace.unsafe_def(sid, 0).dim
            break
        return cls(workspace_dim=dim)


def _workspace_dim(trace, metadata: ScenarioMetadata | None) -> int:
    if metadata is not None and metadata.workspace_dim is not None:
        return metadata.workspace_dim
    for sid in trace.unsafe_ids():
        return trace.unsafe_def(sid, 0).dim
    raise EvalError(
        "workspace dimension is unknown: no unsafe sets to infer it from; "
        "pass ScenarioMetadata(workspace_dim=...)"
    )


def _position(trace, agent_id: str, k: int, dim: int) -> np.ndarray:
    state = trace.state(agent_id, k)
    if len(state) < dim:
        raise EvalError(
            f"agent {agent_id!r} state has {len(state)} components, "
            f"cannot project {dim} position components"
        )
    return np.asarray(state[:dim], dtype=float)


def _check_agent(trace, agent_id: str) -> None:
    if agent_id not in trace.agent_ids():
        raise EvalError(f"unknown agent id {agent_id!r}")


def distance_series(trace: ExecutionTrace, agent_id: str, target_id: str,
                    metadata: ScenarioMetadata | None = None) -> list[tuple[float, float]]:
    """Per-timestamp distance from an agent to an unsafe set or another agent."""
    _check_agent(trace, agent_id)
    dim = _workspace_dim(trace, metadata)
    ts = trace.timestamps()
    out = []
    if target_id in trace.unsafe_ids():
        for k, t in enumerate(ts):
            set_def = trace.unsafe_def(target_id, k)
            out.append((t, set_def.distance(_position(trace, agent_id, k, dim))))
    elif target_id in trace.agent_ids():
        for k, t in enumerate(ts):
            p = _position(trace, agent_id, k, dim)
            q = _position(trace, target_id, k, dim)
            out.append((t, float(np.linalg.norm(p - q))))
    else:
        raise EvalError(f"unknown target id {target_id!r}")
    return out


def _grid_index(trace, t: float) -> int:
    ts = trace.timestamps()
    for k, tk in enumerate(ts):
        if abs(tk - t) <= 1e-9:
            return k
    raise EvalError(f"t={t:g} is not on the trace's timestamp grid")


def _grid_dt(trace) -> float:
    ts = trace.timestamps()
    if len(ts) < 2:
        return 0.0
    return ts[1] - ts[0]


def _agent_velocity(trace, agent_id: str, k: int, dim: int,
                    models: dict | None = None) -> np.ndarray:
    """Model-declared workspace velocity when available, else a backward
    finite difference of the recorded positions."""
    if models and agent_id in models:
        v = models[agent_id].workspace_velocity(trace.state(agent_id, k))
        if v is not None:
            return np.asarray(v, dtype=float)
    ts = trace.timestamps()
    if len(ts) < 2:
        return np.zeros(dim)
    j = k if k > 0 else 1
    dt = ts[j] - ts[j - 1]
    p1 = _position(trace, agent_id, j, dim)
    p0 = _position(trace, agent_id, j - 1, dim)
    return (p1 - p0) / dt


def _set_reference(set_def: SetDef) -> np.ndarray:
    if isinstance(set_def, PointSet):
        return set_def.coords
    if isinstance(set_def, Ball):
        return set_def.center
    if isinstance(set_def, Hyperrectangle):
        return (set_def.lower + set_def.upper) / 2.0
    # Polytope: recover the translation offset in the least-squares sense.
    return np.linalg.lstsq(set_def.A, set_def.b, rcond=None)[0]


def _set_velocity(trace, set_id: str, k: int) -> np.ndarray:
    ts = trace.timestamps()
    if len(ts) < 2:
        return np.zeros(trace.unsafe_def(set_id, 0).dim)
    j = k if k > 0 else 1
    dt = ts[j] - ts[j - 1]
    r1 = _set_reference(trace.unsafe_def(set_id, j))
    r0 = _set_reference(trace.unsafe_def(set_id, j - 1))
    return (r1 - r0) / dt


def _ball_entry_time(rel_pos: np.ndarray, rel_vel: np.ndarray, radius: float) -> float:
    """Smallest tau >= 0 with ||rel_pos + rel_vel*tau|| <= radius."""
    c = float(rel_pos @ rel_pos) - radius * radius
    if c <= 0.0:
        return 0.0
    a = float(rel_vel @ rel_vel)
    b = 2.0 * float(rel_pos @ rel_vel)
    if a == 0.0:
        return math.inf
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        # Grazing contact can dip just below zero in floats.
        if disc > -1e-12 * max(b * b, abs(4.0 * a * c), 1.0):
            disc = 0.0
        else:
            return math.inf
    sq = math.sqrt(disc)
    if b >= 0.0:
        # Both roots <= 0: approaching times are in the past.
        return math.inf
    q = -0.5 * (b - sq)
    lo, hi = c / q, q / a
    for root in sorted((lo, hi)):
        if root >= -1e-12:
            return max(root, 0.0)
    return math.inf


def _interval_entry_time(lower_bounds: list[float], upper_bounds: list[float]) -> float:
    t_lo = 0.0
    t_hi = math.inf
    for v in lower_bounds:
        t_lo = max(t_lo, v)
    for v in upper_bounds:
        t_hi = min(t_hi, v)
    return t_lo if t_lo <= t_hi else math.inf


def _linear_set_entry_time(set_def: SetDef, pos: np.ndarray, vel: np.ndarray) -> float:
    """Exact first-entry time into a hyperrectangle or polytope along a
    straight line; the feasible time set of a convex body is an interval."""
    if isinstance(set_def, Hyperrectangle):
        lowers, uppers = [], []
        for p, v, lo, hi in zip(pos, vel, set_def.lower, set_def.upper):
            if v == 0.0:
                if not lo <= p <= hi:
                    return math.inf
                continue
            a, bnd = (lo - p) / v, (hi - p) / v
            if a > bnd:
                a, bnd = bnd, a
            lowers.append(a)
            uppers.append(bnd)
        return _interval_entry_time(lowers, uppers)
    if isinstance(set_def, Polytope):
        g = set_def.b - set_def.A @ pos
        h = set_def.A @ vel
        lowers, uppers = [], []
        for gi, hi_ in zip(g, h):
            if hi_ == 0.0:
                if gi < 0.0:
                    return math.inf
                continue
            ratio = gi / hi_
            if hi_ > 0.0:
                uppers.append(ratio)
            else:
                lowers.append(ratio)
        return _interval_entry_time(lowers, uppers)
    raise EvalError(f"unsupported set type {type(set_def).__name__}")


def _scanned_entry_time(set_def: SetDef, pos: np.ndarray, vel: np.ndarray,
                        threshold: float, dt: float, scan_horizon: float) -> float:
    """First time distance(set, pos + vel*tau) <= threshold, scanned at dt/10
    resolution and refined by bisection inside the bracketing interval."""
    step = dt / 10.0 if dt > 0 else scan_horizon / 1000.0
    gap = set_def.distance(pos) - threshold
    if gap <= 0.0:
        return 0.0
    tau = 0.0
    while tau < scan_horizon:
        tau_next = tau + step
        gap_next = set_def.distance(pos + vel * tau_next) - threshold
        if gap_next <= 0.0:
            lo, hi = tau, tau_next
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if set_def.distance(pos + vel * mid) - threshold <= 0.0:
                    hi = mid
                else:
                    lo = mid
            return hi
        tau = tau_next
    return math.inf


def ttc(trace: ExecutionTrace, agent_id: str, target_id: str, t: float,
        metadata: ScenarioMetadata | None = None, models: dict | None = None,
        collision_radius: float | None = None,
        scan_horizon: float | None = None) -> float:
    """Time to collision from grid time t under constant-velocity
    extrapolation of both parties. Returns math.inf when the courses never
    come within collision distance.

    Against unsafe sets, collision means entering the set (exact closed
    forms: quadratic for balls/points, time-interval intersection for
    hyperrectangles/polytopes); a positive collision_radius against a
    hyperrectangle or polytope falls back to a dt/10 scan with bisection.
    Against agents, collision means the inter-position distance dropping to
    the collision radius from the metadata (default 0).
    """
    _check_agent(trace, agent_id)
    dim = _workspace_dim(trace, metadata)
    k = _grid_index(trace, t)
    pos = _position(trace, agent_id, k, dim)
    vel = _agent_velocity(trace, agent_id, k, dim, models)

    if target_id in trace.agent_ids():
        if collision_radius is None:
            collision_radius = 0.0
            if metadata is not None:
                collision_radius = metadata.collision_radius.get(
                    target_id, metadata.default_collision_radius
                )
        q = _position(trace, target_id, k, dim)
        w = _agent_velocity(trace, target_id, k, dim, models)
        return _ball_entry_time(pos - q, vel - w, collision_radius)

    if target_id not in trace.unsafe_ids():
        raise EvalError(f"unknown target id {target_id!r}")

    set_def = trace.unsafe_def(target_id, k)
    set_vel = _set_velocity(trace, target_id, k)
    rel_vel = vel - set_vel
    extra = collision_radius or 0.0
    if isinstance(set_def, Ball):
        return _ball_entry_time(pos - set_def.center, rel_vel, set_def.radius + extra)
    if isinstance(set_def, PointSet):
        return _ball_entry_time(pos - set_def.coords, rel_vel, extra)
    if extra > 0.0:
        if scan_horizon is None:
            ts = trace.timestamps()
            scan_horizon = max(ts[-1] - ts[0], 1.0) * 10.0
        return _scanned_entry_time(set_def, pos, rel_vel, extra, _grid_dt(trace), scan_horizon)
    return _linear_set_entry_time(set_def, pos, rel_vel)


def controller_usage(trace: ExecutionTrace, agent_id: str) -> tuple[dict[str, float], int]:
    """Percent of decisions per mode and the number of mode switches.

    An empty mode trace yields ({}, 0), the "no data" result.
    """
    _check_agent(trace, agent_id)
    modes = trace.mode_trace(agent_id)
    if not modes:
        return {}, 0
    usage = {}
    for m in modes:
        usage[m.value] = usage.get(m.value, 0) + 1
    percents = {name: 100.0 * n / len(modes) for name, n in usage.items()}
    switches = sum(1 for a, b in zip(modes, modes[1:]) if a is not b)
    return percents, switches


@dataclass
class AgentReport:
    agent_id: str
    timing: TimingStats
    usage: dict[str, float]
    switch_count: int
    set_distances: dict[str, list[tuple[float, float]]]
    agent_distances: dict[str, list[tuple[float, float]]]
    min_set_distance: dict[str, float]
    min_agent_distance: dict[str, float]
    min_set_ttc: dict[str, float]
    min_agent_ttc: dict[str, float]
    mode_series: list[tuple[float, str]] = field(default_factory=list)


@dataclass
class EvalReport:
    agents: dict[str, AgentReport]
    n_samples: int
    duration: float

    def to_dict(self) -> dict:
        def _num(x):
            return None if x is None or math.isinf(x) else x

        return {
            "n_samples": self.n_samples,
            "duration": self.duration,
            "agents": {
                aid: {
                    "timing": {
                        "count": r.timing.count,
                        "avg": _num(r.timing.avg),
                        "min": _num(r.timing.min),
                        "max": _num(r.timing.max),
                    },
                    "usage_percent": dict(r.usage),
                    "switch_count": r.switch_count,
                    "min_distance_to_sets": {k: _num(v) for k, v in r.min_set_distance.items()},
                    "min_distance_to_agents": {k: _num(v) for k, v in r.min_agent_distance.items()},
                    "min_ttc_to_sets": {k: _num(v) for k, v in r.min_set_ttc.items()},
                    "min_ttc_to_agents": {k: _num(v) for k, v in r.min_agent_ttc.items()},
                }
                for aid, r in self.agents.items()
            },
        }

    def to_text(self) -> str:
        lines = [
            f"scenario summary: {self.n_samples} samples over {self.duration:g} s",
        ]
        for aid, r in self.agents.items():
            lines.append("")
            lines.append(f"== agent {aid!r} ==")
            if r.timing.has_data:
                lines.append(
                    f"  decision time: avg {r.timing.avg:.6g} s, min {r.timing.min:.6g} s, "
                    f"max {r.timing.max:.6g} s ({r.timing.count} samples)"
                )
            else:
                lines.append("  decision time: no data")
            if r.usage:
                usage = "  ".join(f"{name} {pct:.2f}%" for name, pct in sorted(r.usage.items()))
                lines.append(f"  controller usage: {usage}")
                lines.append(f"  switches: {r.switch_count}")
            else:
                lines.append("  controller usage: no data")
            for label, dists, ttcs in (
                ("unsafe set", r.min_set_distance, r.min_set_ttc),
                ("agent", r.min_agent_distance, r.min_agent_ttc),
            ):
                for target in dists:
                    ttc_val = ttcs.get(target, math.inf)
                    ttc_str = "inf" if math.isinf(ttc_val) else f"{ttc_val:.6g} s"
                    lines.append(
                        f"  vs {label} {target!r}: min distance {dists[target]:.6g}, "
                        f"min TTC {ttc_str}"
                    )
        return "\n".join(lines) + "\n"

    def write_csv(self, outdir) -> list[Path]:
        """One (time, value) CSV per agent/metric/target series."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []

        def _write(name: str, rows):
            path = outdir / name
            lines = ["time,value"] + [f"{t!r},{v}" for t, v in rows]
            path.write_text("\n".join(lines) + "\n")
            written.append(path)

        for aid, r in self.agents.items():
            for target, series in r.set_distances.items():
                _write(f"{aid}__dist_set__{target}.csv", [(t, repr(v)) for t, v in series])
            for target, series in r.agent_distances.items():
                _write(f"{aid}__dist_agent__{target}.csv", [(t, repr(v)) for t, v in series])
            if r.mode_series:
                _write(f"{aid}__mode.csv", r.mode_series)
        return written


def build_report(trace: ExecutionTrace, metadata: ScenarioMetadata | None = None,
                 timings: dict[str, list[float]] | None = None,
                 models: dict | None = None) -> EvalReport:
    """Aggregate every metric over the full trace.

    timings maps agent id -> per-decision durations (from the RTA bindings
    or a saved timings file); agents without samples report "no data".
    """
    timings = timings or {}
    ts = trace.timestamps()
    agents = {}
    for aid in trace.agent_ids():
        usage, switches = controller_usage(trace, aid)
        set_d: dict[str, list] = {}
        set_ttc: dict[str, float] = {}
        for sid in trace.unsafe_ids():
            series = distance_series(trace, aid, sid, metadata)
            set_d[sid] = series
            set_ttc[sid] = min(
                (ttc(trace, aid, sid, t, metadata, models) for t in ts), default=math.inf
            )
        agent_d: dict[str, list] = {}
        agent_ttc: dict[str, float] = {}
        for other in trace.agent_ids():
            if other == aid:
                continue
            agent_d[other] = distance_series(trace, aid, other, metadata)
            agent_ttc[other] = min(
                (ttc(trace, aid, other, t, metadata, models) for t in ts), default=math.inf
            )
        agents[aid] = AgentReport(
            agent_id=aid,
            timing=computation_time_stats(timings.get(aid, [])),
            usage=usage,
            switch_count=switches,
            set_distances=set_d,
            agent_distances=agent_d,
            min_set_distance={k: min(v for _, v in s) for k, s in set_d.items()},
            min_agent_distance={k: min(v for _, v in s) for k, s in agent_d.items()},
            min_set_ttc=set_ttc,
            min_agent_ttc=agent_ttc,
            mode_series=[(ts[k], m.value) for k, m in enumerate(trace.mode_trace(aid))],
        )
    return EvalReport(
        agents=agents,
        n_samples=trace.n_samples(),
        duration=(ts[-1] - ts[0]) if len(ts) > 1 else 0.0,
    )


def summary(collector: Collector, metadata: ScenarioMetadata | None = None,
            ego_id: str | None = None, models: dict | None = None) -> EvalReport:
    """Report over a collector's accumulated trace; the collector's timing
    samples attach to its ego agent."""
    if collector.trace is None:
        raise EvalError("collector holds no trace samples (no data)")
    timings = {}
    if collector.durations:
        if ego_id is None and metadata is not None and len(metadata.rta_agents) == 1:
            ego_id = metadata.rta_agents[0]
        if ego_id is not None:
            timings[ego_id] = collector.durations
    return build_report(collector.trace, metadata, timings, models)
