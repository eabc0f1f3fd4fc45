"""Agent models: plant dynamics plus their safety and untrusted controllers.

Every model exposes a deterministic `step(mode, state, dt, trace)` that
advances the state one explicit-Euler step. The mode selects the controller:

    SAFETY     well-tested conservative controller
    UNTRUSTED  experimental high-performance controller (no guarantee)
    NORMAL     configured nominal behaviour; zero control by default

State layout convention: the leading `len(position_indices)` components are
the workspace position, which is what unsafe sets and distance metrics are
evaluated against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class Mode(Enum):
    SAFETY = "SAFETY"
    UNTRUSTED = "UNTRUSTED"
    NORMAL = "NORMAL"


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = (a + math.pi) % (2.0 * math.pi) - math.pi
    return math.pi if w == -math.pi else w


def _check_dt(dt: float) -> float:
    dt = float(dt)
    if dt <= 0.0:
        raise ValueError(f"time step must be positive, got {dt}")
    return dt


class AgentModel:
    """Base agent: identifier, parameters, and a step transition function."""

    model_name = "base"
    state_dim: int = 0
    position_indices: tuple[int, ...] = ()

    def __init__(self, agent_id: str):
        if not agent_id or not isinstance(agent_id, str):
            raise ValueError("agent id must be a nonempty string")
        self.agent_id = agent_id

    def step(self, mode: Mode, state, dt: float, trace) -> list[float]:
        raise NotImplementedError

    def position(self, state) -> list[float]:
        return [float(state[i]) for i in self.position_indices]

    def workspace_velocity(self, state) -> list[float] | None:
        """Workspace velocity derivable from the state, if the model has one."""
        return None


@dataclass(frozen=True)
class AccParams:
    """Cruise-control gains and bounds.

    k1, k2 are the proportional safety-controller gains, a_max/v_max the
    acceleration and speed bounds, follow_distance the desired gap behind
    the leader, collision_distance the unsafe-ball radius around it, and
    leader_speed the leader's nominal constant speed.
    """

    k1: float = 1.0
    k2: float = 2.0
    a_max: float = 16.0
    v_max: float = 20.0
    follow_distance: float = 10.0
    collision_distance: float = 7.0
    leader_speed: float = 1.0

    def __post_init__(self):
        for name in ("k1", "k2", "a_max", "v_max", "follow_distance"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not 0 < self.collision_distance < self.follow_distance:
            raise ValueError(
                f"collision_distance must lie in (0, follow_distance), "
                f"got {self.collision_distance} vs {self.follow_distance}"
            )


class AccAgent(AgentModel):
    """1-D cruise agent: double integrator with a proportional safety
    controller and a bang-bang untrusted controller.

    State is [position, velocity]. The goal state is [leader position -
    follow_distance, leader velocity], read from the trace each step.
    """

    model_name = "acc"
    state_dim = 2
    position_indices = (0,)

    def __init__(self, agent_id, params: AccParams | None = None,
                 leader_id: str | None = None, goal_fn=None):
        super().__init__(agent_id)
        self.params = params or AccParams()
        self.leader_id = leader_id
        self.goal_fn = goal_fn

    def goal_state(self, trace) -> list[float] | None:
        if self.goal_fn is not None:
            return list(self.goal_fn(trace))
        if self.leader_id is None:
            return None
        if self.leader_id not in trace.agent_ids():
            raise ValueError(
                f"agent {self.agent_id!r}: leader {self.leader_id!r} missing from trace"
            )
        _, lead = trace.last_state(self.leader_id)
        return [lead[0] - self.params.follow_distance, lead[1]]

    def command(self, mode: Mode, state, trace) -> float:
        """Acceleration command for the given mode, clamped to +-a_max."""
        if mode is Mode.NORMAL:
            return 0.0
        goal = self.goal_state(trace)
        if goal is None:
            raise ValueError(f"agent {self.agent_id!r} has no goal provider")
        p, v = float(state[0]), float(state[1])
        if mode is Mode.SAFETY:
            a = self.params.k1 * (goal[0] - p) + self.params.k2 * (goal[1] - v)
        elif mode is Mode.UNTRUSTED:
            err = goal[0] - p
            a = math.copysign(self.params.a_max, err) if err != 0.0 else 0.0
        else:
            raise ValueError(f"unknown mode {mode!r}")
        if abs(a) > self.params.a_max:
            a = math.copysign(self.params.a_max, a)
        return a

    def step(self, mode, state, dt, trace) -> list[float]:
        dt = _check_dt(dt)
        a = self.command(mode, state, trace)
        p, v = float(state[0]), float(state[1])
        p_next = p + v * dt
        v_next = v + a * dt
        if abs(v_next) >= self.params.v_max:
            v_next = math.copysign(self.params.v_max, v_next)
        return [p_next, v_next]

    def workspace_velocity(self, state):
        return [float(state[1])]


@dataclass(frozen=True)
class DubinsCarParams:
    """Unicycle gains: heading/speed proportional gains, speed bounds, and
    the cruise (untrusted) / safe (safety) target speeds.

    nominal="track" makes NORMAL mode steer toward the goal at constant
    speed (scripted leaders); the default NORMAL is zero control.
    """

    k_heading: float = 2.0
    k_speed: float = 1.5
    v_max: float = 3.0
    v_cruise: float = 2.5
    v_safe: float = 0.0
    capture_radius: float = 1.0
    nominal: str = "coast"

    def __post_init__(self):
        if self.v_max <= 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if not 0 < self.v_cruise <= self.v_max:
            raise ValueError(f"v_cruise must lie in (0, v_max], got {self.v_cruise}")
        if not 0 <= self.v_safe <= self.v_max:
            raise ValueError(f"v_safe must lie in [0, v_max], got {self.v_safe}")
        if self.capture_radius <= 0:
            raise ValueError("capture_radius must be positive")
        if self.nominal not in ("coast", "track"):
            raise ValueError(f"nominal must be 'coast' or 'track', got {self.nominal!r}")


class DubinsCarAgent(AgentModel):
    """Planar unicycle. State is [x, y, heading, speed].

    UNTRUSTED tracks the goal at the cruise speed; SAFETY tracks it while
    decelerating to the safe speed. Goals come from a waypoint list, a
    leader (position + formation offset), or a custom callable.
    """

    model_name = "dubins_car"
    state_dim = 4
    position_indices = (0, 1)

    def __init__(self, agent_id, params: DubinsCarParams | None = None,
                 waypoints=None, leader_id: str | None = None,
                 formation_offset=None, goal_fn=None):
        super().__init__(agent_id)
        self.params = params or DubinsCarParams()
        self.waypoints = [[float(c) for c in w] for w in waypoints] if waypoints else None
        self.leader_id = leader_id
        self.formation_offset = (
            [float(c) for c in formation_offset] if formation_offset is not None else None
        )
        self.goal_fn = goal_fn

    def goal_position(self, trace) -> list[float] | None:
        if self.goal_fn is not None:
            return list(self.goal_fn(trace))
        if self.leader_id is not None:
            if self.leader_id not in trace.agent_ids():
                raise ValueError(
                    f"agent {self.agent_id!r}: leader {self.leader_id!r} missing from trace"
                )
            _, lead = trace.last_state(self.leader_id)
            n = len(self.position_indices)
            goal = [lead[i] for i in range(n)]
            if self.formation_offset is not None:
                goal = [g + o for g, o in zip(goal, self.formation_offset)]
            return goal
        if self.waypoints:
            return self._active_waypoint(trace)
        return None

    def _active_waypoint(self, trace) -> list[float]:
        # Replays own history so the step function stays a pure function of
        # its arguments: a waypoint is captured once the agent has come
        # within capture_radius of it at any recorded sample.
        idx = 0
        n = len(self.position_indices)
        for row in trace.agents[self.agent_id]["state_trace"]:
            pos = row[1:1 + n]
            while idx < len(self.waypoints) - 1 and self._within_capture(pos, self.waypoints[idx]):
                idx += 1
        return self.waypoints[idx]

    def _within_capture(self, pos, wp) -> bool:
        return math.dist(pos, wp) <= self.params.capture_radius

    def _steering(self, mode, state, trace) -> tuple[float, float]:
        """Turn rate and target speed for the given mode."""
        x, y, heading, speed = (float(s) for s in state[:4])
        omega = 0.0
        if mode is Mode.NORMAL:
            target = speed
            if self.params.nominal != "track":
                return omega, target
        elif mode is Mode.SAFETY:
            target = self.params.v_safe
        elif mode is Mode.UNTRUSTED:
            target = self.params.v_cruise
        else:
            raise ValueError(f"unknown mode {mode!r}")
        goal = self.goal_position(trace)
        if goal is None:
            if mode is Mode.NORMAL:
                return 0.0, target
            raise ValueError(f"agent {self.agent_id!r} has no goal provider")
        bearing = math.atan2(goal[1] - y, goal[0] - x)
        omega = self.params.k_heading * wrap_angle(bearing - heading)
        return omega, target

    def step(self, mode, state, dt, trace) -> list[float]:
        dt = _check_dt(dt)
        omega, v_target = self._steering(mode, state, trace)
        x, y, heading, speed = (float(s) for s in state)
        accel = self.params.k_speed * (v_target - speed)
        x_next = x + speed * math.cos(heading) * dt
        y_next = y + speed * math.sin(heading) * dt
        heading_next = wrap_angle(heading + omega * dt)
        v_next = min(max(speed + accel * dt, 0.0), self.params.v_max)
        return [x_next, y_next, heading_next, v_next]

    def workspace_velocity(self, state):
        heading, speed = float(state[2]), float(state[3])
        return [speed * math.cos(heading), speed * math.sin(heading)]


@dataclass(frozen=True)
class DubinsPlaneParams(DubinsCarParams):
    """Car gains plus the altitude channel: flight-path gain, the fixed
    pitch-up target used by the SAFETY (ground-avoid) controller, and the
    flight-path angle bound for nominal tracking."""

    k_gamma: float = 1.2
    pitch_up: float = 0.25
    gamma_max: float = 0.6
    v_safe: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.k_gamma <= 0:
            raise ValueError("k_gamma must be positive")
        if not 0 < self.pitch_up <= math.pi / 2:
            raise ValueError(f"pitch_up must lie in (0, pi/2], got {self.pitch_up}")
        if not 0 < self.gamma_max <= math.pi / 2:
            raise ValueError(f"gamma_max must lie in (0, pi/2], got {self.gamma_max}")


class DubinsPlaneAgent(DubinsCarAgent):
    """Aircraft version of the unicycle: state [x, y, z, heading, gamma, speed].

    Horizontal motion follows the car kinematics; altitude integrates
    z' = v sin(gamma). SAFETY overrides the flight-path target with the
    fixed pitch-up value and decelerates to the safe speed, which is the
    ground-collision-avoidance behaviour.
    """

    model_name = "dubins_plane"
    state_dim = 6
    position_indices = (0, 1, 2)

    def __init__(self, agent_id, params: DubinsPlaneParams | None = None,
                 waypoints=None, leader_id=None, formation_offset=None, goal_fn=None):
        AgentModel.__init__(self, agent_id)
        self.params = params or DubinsPlaneParams()
        self.waypoints = [[float(c) for c in w] for w in waypoints] if waypoints else None
        self.leader_id = leader_id
        self.formation_offset = (
            [float(c) for c in formation_offset] if formation_offset is not None else None
        )
        self.goal_fn = goal_fn

    def _gamma_target(self, mode, state, goal) -> float:
        if mode is Mode.SAFETY:
            return self.params.pitch_up
        if goal is None:
            return float(state[4])
        x, y, z = (float(s) for s in state[:3])
        horizontal = math.hypot(goal[0] - x, goal[1] - y)
        raw = math.atan2(goal[2] - z, horizontal) if horizontal > 0 else 0.0
        return min(max(raw, -self.params.gamma_max), self.params.gamma_max)

    def step(self, mode, state, dt, trace) -> list[float]:
        dt = _check_dt(dt)
        x, y, z, heading, gamma, speed = (float(s) for s in state)
        omega = 0.0
        gamma_rate = 0.0
        v_target = speed
        if mode is not Mode.NORMAL or self.params.nominal == "track":
            goal = self.goal_position(trace)
            if goal is None and mode is Mode.UNTRUSTED:
                # SAFETY needs no goal: pitch-up is fixed and heading is held
                raise ValueError(f"agent {self.agent_id!r} has no goal provider")
            if goal is not None:
                bearing = math.atan2(goal[1] - y, goal[0] - x)
                omega = self.params.k_heading * wrap_angle(bearing - heading)
            if mode is Mode.SAFETY:
                v_target = self.params.v_safe
            elif mode is Mode.UNTRUSTED:
                v_target = self.params.v_cruise
            gamma_rate = self.params.k_gamma * wrap_angle(
                self._gamma_target(mode, state, goal) - gamma
            )
        accel = self.params.k_speed * (v_target - speed)
        x_next = x + speed * math.cos(heading) * dt
        y_next = y + speed * math.sin(heading) * dt
        z_next = z + speed * math.sin(gamma) * dt
        heading_next = wrap_angle(heading + omega * dt)
        gamma_next = wrap_angle(gamma + gamma_rate * dt)
        v_next = min(max(speed + accel * dt, 0.0), self.params.v_max)
        return [x_next, y_next, z_next, heading_next, gamma_next, v_next]

    def workspace_velocity(self, state):
        heading, gamma, speed = float(state[3]), float(state[4]), float(state[5])
        return [
            speed * math.cos(heading),
            speed * math.sin(heading),
            speed * math.sin(gamma),
        ]
