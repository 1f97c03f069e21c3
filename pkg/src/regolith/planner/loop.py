"""Planner runtime and loop: drain telemetry, update the world model, tick
the behaviour tree once, publish skill commands."""

from __future__ import annotations

import time
from typing import Optional

from ..bt import Blackboard, NodeStatus, TickContext
from ..bus import Bus, topic_for
from .world import WorldModel

#: Default planner iteration period in sim time (s).
PLANNER_PERIOD = 0.1


class PlannerRuntime:
    """Shared services for behaviour leaves: world model access, command
    publishing with unique activation ids, and per-machine rig data."""

    def __init__(self, bus: Bus, wm: WorldModel, machine_rigs: dict,
                 params: Optional[dict] = None, bank_density: float = 1580.0,
                 loading_pose=None, truck_dump_pose=None, offload_point=None):
        self.bus = bus
        self.wm = wm
        self.machine_rigs = machine_rigs
        self.params = dict(params or {})
        self.bank_density = bank_density
        self.loading_pose = tuple(loading_pose) if loading_pose else None
        self.truck_dump_pose = tuple(truck_dump_pose) if truck_dump_pose \
            else None
        self.offload_point = tuple(offload_point) if offload_point else None
        self.sim_time = 0.0
        self._next_id = 0

    def next_activation_id(self) -> int:
        self._next_id += 1
        return self._next_id

    def publish_command(self, machine: str, action: str, payload: dict):
        self.bus.publish(topic_for(machine, "target", action), payload,
                         sim_time=self.sim_time, publisher="planner")

    def rig(self, machine: str) -> dict:
        rig = self.machine_rigs.get(machine, {})
        return {"bucket_width": rig.get("bucket_width", 0.6),
                "bucket_capacity_kg": rig.get("bucket_capacity_kg", 75.0),
                "reach": rig.get("reach", 4.0)}

    def target_load(self, truck_id: str) -> float:
        rig = self.machine_rigs.get(truck_id, {})
        return rig.get("target_load_kg",
                       self.params.get("truck_target_load_kg", 200.0))


class PlannerLoop:
    """One tree tick per iteration; iterations run at a fixed sim-time
    period driven by the host process."""

    def __init__(self, runtime: PlannerRuntime, tree,
                 period: float = PLANNER_PERIOD):
        self.runtime = runtime
        self.tree = tree
        self.period = period
        self.blackboard = Blackboard()
        self.sub_telemetry = runtime.bus.subscribe_category("telemetry")
        self.sub_skill = runtime.bus.subscribe_category("skill")
        self.tick_count = 0
        self.tick_seconds: list[float] = []
        #: (sim_time, root status, {top-level child name: status}) per tick
        self.trace: list[tuple] = []
        leveling = self.runtime.params.get("leveling")
        if leveling:
            self.blackboard.write("leveling/start_position",
                                  list(leveling["start_position"]))
            self.blackboard.write("leveling/end_position",
                                  list(leveling["end_position"]))
            self.blackboard.write("leveling/offset",
                                  float(leveling["offset"]))
            self.blackboard.write("leveling/run_index", 0)

    def drain(self) -> int:
        count = 0
        for sub in (self.sub_telemetry, self.sub_skill):
            while True:
                batch = sub.poll(256)
                if not batch:
                    break
                count += self.runtime.wm.ingest_all(batch)
        return count

    def step(self, sim_time: float) -> NodeStatus:
        self.drain()
        self.runtime.sim_time = sim_time
        ctx = TickContext(blackboard=self.blackboard,
                          tick_count=self.tick_count, sim_time=sim_time)
        start = time.perf_counter()
        status = self.tree.tick(ctx)
        self.tick_seconds.append(time.perf_counter() - start)
        self.tick_count += 1
        self.trace.append((sim_time, status,
                           {child.name: child.last_status
                            for child in self.tree.children}))
        return status

    def mean_tick_seconds(self) -> float:
        if not self.tick_seconds:
            return 0.0
        return sum(self.tick_seconds) / len(self.tick_seconds)
