"""Runtime-assurance decision modules.

The binding wraps a user logic with wall-clock timing and optional data
collection; the decision itself never depends on whether collection is
enabled. Two reference logics ship with the package:

    SimRta    forward-simulates the untrusted controller over the prediction
              horizon and switches to SAFETY if the predicted ego state ever
              enters a guarded unsafe set.
    ReachRta  same, but inflates the predicted positions into axis-aligned
              boxes (a bloat schedule nondecreasing in the step index) and
              switches on box/set intersection, which makes it conservative
              relative to SimRta by construction.
"""
from __future__ import annotations

import time

from .agents import Mode
from .evaluation import Collector
from .geometry import Hyperrectangle, box_intersects
from .scenario import Scenario, grid_steps, predict
from .trace import ExecutionTrace


class RtaError(RuntimeError):
    """A decision logic failed; carries the ego agent id in the message."""


class RtaLogic:
    """Base decision module. Subclasses implement decide(trace) -> Mode."""

    def __init__(self, ego_id: str | None = None, horizon: float = 1.0,
                 unsafe_ids: list[str] | None = None):
        if horizon <= 0:
            raise ValueError(f"prediction horizon must be positive, got {horizon}")
        self.ego_id = ego_id
        self.horizon = float(horizon)
        self.unsafe_ids = list(unsafe_ids) if unsafe_ids is not None else None
        self._scenario: Scenario | None = None

    def bind(self, scenario: Scenario, ego_id: str) -> None:
        self._scenario = scenario
        if self.ego_id is None:
            self.ego_id = ego_id
        elif self.ego_id != ego_id:
            raise ValueError(
                f"logic is configured for ego {self.ego_id!r} but bound to {ego_id!r}"
            )

    @property
    def scenario(self) -> Scenario:
        if self._scenario is None:
            raise RuntimeError("logic is not bound to a scenario yet")
        return self._scenario

    def guarded_sets(self) -> list[str]:
        if self.unsafe_ids is not None:
            return self.unsafe_ids
        return self.scenario.unsafe_ids()

    def decide(self, trace: ExecutionTrace) -> Mode:
        raise NotImplementedError


class RtaBinding:
    """Attaches a logic to an agent; times every decision and, when
    collection is enabled, records the duration and the observed trace."""

    def __init__(self, logic: RtaLogic, collect: bool = False):
        self.logic = logic
        self.do_eval = bool(collect)
        self.collector = Collector() if collect else None

    def enable_collection(self) -> Collector:
        if not self.do_eval:
            self.do_eval = True
            self.collector = Collector()
        return self.collector

    def switch(self, trace: ExecutionTrace) -> Mode:
        start = time.perf_counter()
        try:
            mode = self.logic.decide(trace)
        except Exception as exc:
            raise RtaError(
                f"RTA logic for agent {self.logic.ego_id!r} failed: {exc}"
            ) from exc
        duration = time.perf_counter() - start
        if self.do_eval:
            self.collector.collect_computation_time(duration)
            self.collector.collect_trace(trace)
        return mode


def rta_switch(binding: RtaBinding, trace: ExecutionTrace) -> Mode:
    """Timed switch call; identical decision with collection on or off."""
    return binding.switch(trace)


def forward_simulate(trace: ExecutionTrace, scenario: Scenario, horizon: float,
                     ego_id: str | None = None) -> ExecutionTrace:
    """Predicted trace over [t_now, t_now + horizon].

    The ego agent (if given) is held in UNTRUSTED mode; every other agent
    keeps its current mode. Relative unsafe sets are propagated along the
    predicted anchors. The first sample is the current state.
    """
    if horizon < scenario.dt:
        raise ValueError(
            f"prediction horizon {horizon} must be at least one time step {scenario.dt}"
        )
    modes = {aid: scenario.current_mode(trace, aid) for aid in trace.agent_ids()}
    if ego_id is not None:
        if ego_id not in modes:
            raise ValueError(f"ego agent {ego_id!r} missing from trace")
        modes[ego_id] = Mode.UNTRUSTED
    return predict(scenario, trace, modes, grid_steps(horizon, scenario.dt))


class SimRta(RtaLogic):
    """Simulation-based switching: SAFETY iff the predicted ego position
    enters any guarded unsafe set within the prediction horizon."""

    def decide(self, trace: ExecutionTrace) -> Mode:
        pred = forward_simulate(trace, self.scenario, self.horizon, ego_id=self.ego_id)
        model = self.scenario.agents_by_id[self.ego_id].model
        for set_id in self.guarded_sets():
            for k in range(pred.n_samples()):
                set_def = pred.unsafe_def(set_id, k)
                pos = model.position(pred.state(self.ego_id, k))
                if set_def.contains(pos):
                    return Mode.SAFETY
        return Mode.UNTRUSTED


def boxes_from_prediction(pred: ExecutionTrace, model, ego_id: str,
                          bloat) -> list[Hyperrectangle]:
    """Axis-aligned boxes around the nominal predicted positions.

    bloat(k) is the per-axis inflation at predicted step k (k = 0 is the
    current state); it must be nonnegative and nondecreasing.
    """
    boxes = []
    prev = 0.0
    for k in range(pred.n_samples()):
        r = float(bloat(k))
        if r < 0:
            raise ValueError(f"bloat({k}) = {r} must be nonnegative")
        if r < prev:
            raise ValueError(f"bloat schedule must be nondecreasing, bloat({k}) = {r} < {prev}")
        prev = r
        pos = model.position(pred.state(ego_id, k))
        boxes.append(Hyperrectangle([p - r for p in pos], [p + r for p in pos]))
    return boxes


def compute_reach_boxes(trace: ExecutionTrace, scenario: Scenario, horizon: float,
                        bloat, ego_id: str) -> list[Hyperrectangle]:
    """Reachability over-approximation: one box per predicted step, centered
    on the nominal forward-simulated state."""
    pred = forward_simulate(trace, scenario, horizon, ego_id=ego_id)
    model = scenario.agents_by_id[ego_id].model
    return boxes_from_prediction(pred, model, ego_id, bloat)


class ReachRta(RtaLogic):
    """Reachability-based switching: SAFETY iff any reach box intersects a
    guarded unsafe set at the same predicted step.

    The default bloat schedule is bloat(k) = bloat_rate * k * dt; pass a
    callable `bloat` for anything else. With bloat identically zero the
    decision coincides with SimRta.
    """

    def __init__(self, ego_id=None, horizon: float = 1.0, bloat_rate: float = 0.1,
                 bloat=None, unsafe_ids=None):
        super().__init__(ego_id=ego_id, horizon=horizon, unsafe_ids=unsafe_ids)
        if bloat is None and bloat_rate < 0:
            raise ValueError(f"bloat rate must be nonnegative, got {bloat_rate}")
        self.bloat_rate = float(bloat_rate)
        self._bloat = bloat

    def bloat(self, k: int) -> float:
        if self._bloat is not None:
            return self._bloat(k)
        return self.bloat_rate * k * self.scenario.dt

    def decide(self, trace: ExecutionTrace) -> Mode:
        pred = forward_simulate(trace, self.scenario, self.horizon, ego_id=self.ego_id)
        model = self.scenario.agents_by_id[self.ego_id].model
        boxes = boxes_from_prediction(pred, model, self.ego_id, self.bloat)
        for set_id in self.guarded_sets():
            for k, box in enumerate(boxes):
                set_def = pred.unsafe_def(set_id, k)
                if box_intersects(set_def, box.lower, box.upper):
                    return Mode.SAFETY
        return Mode.UNTRUSTED
