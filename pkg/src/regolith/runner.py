"""Scenario runner: wires planner and simulator together over the bus in
loopback (single process) or TCP lockstep (two process) mode, detects
stalls, and writes the run artifacts (CSVs, events, report, snapshot)."""

from __future__ import annotations

import json
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .bt import SUCCESS, parse_document, resolve
from .bus import Bus, LoopbackBridge, TcpBridgeServer
from .config import ScenarioConfig
from .planner import (
    PLANNER_PERIOD,
    PlannerLoop,
    PlannerRuntime,
    SITE_ID,
    WorldModel,
    build_registry,
    grid_cells,
)
from .simulator import Simulator, TELEMETRY_EVERY
from .telemetry import (
    TelemetryCollector,
    dig_start_times,
    segment_cycles,
    summarize,
    write_cycles_csv,
    write_samples_csv,
)
from .terrain import Heightfield


@dataclass
class RunReport:
    """Outcome of one scenario run."""
    complete: bool
    sim_time: float
    wall_time: float
    cycles: dict = field(default_factory=dict)    # machine -> records
    summary: dict = field(default_factory=dict)   # machine -> column stats
    mean_tick_seconds: float = 0.0
    realtime_factor: float = 0.0
    cell_switch_times: list = field(default_factory=list)
    fleet_cycles: list = field(default_factory=list)
    deadlocked: bool = False
    error: Optional[str] = None
    bus_errors: int = 0
    config_hash: str = ""
    mass_closure_error: float = 0.0

    def to_dict(self) -> dict:
        return {
            "complete": self.complete, "sim_time": self.sim_time,
            "wall_time": self.wall_time,
            "mean_tick_seconds": self.mean_tick_seconds,
            "realtime_factor": self.realtime_factor,
            "cell_switch_times": list(self.cell_switch_times),
            "deadlocked": self.deadlocked, "error": self.error,
            "bus_errors": self.bus_errors, "config_hash": self.config_hash,
            "mass_closure_error": self.mass_closure_error,
            "cycles_per_machine": {m: len(rs) for m, rs in
                                   self.cycles.items()},
            "summary": {m: {col: list(stat) for col, stat in s.items()}
                        for m, s in self.summary.items()},
        }


def _bus_ids(config: ScenarioConfig) -> list[str]:
    return config.machine_ids() + [SITE_ID]


def build_planner(config: ScenarioConfig, bus: Bus,
                  terrain: Optional[Heightfield] = None,
                  cell_index: int = 0) -> PlannerLoop:
    """Planner loop with its world model seeded from the shared config."""
    belief = terrain.copy() if terrain is not None else config.build_terrain()
    target = config.build_target(belief)
    cells = grid_cells(belief, *config.cell_grid())
    roles = {m.machine_id: m.role for m in config.machines}
    wm = WorldModel(belief, target, cells, roles,
                    cell_tolerance=config.planner.get("cell_tolerance", 0.05))
    for mc in config.machines:
        report = wm.machines[mc.machine_id]
        report.x, report.y, report.heading = mc.pose
    wm.cell_index = min(cell_index, len(cells))
    wm.leveling_required = "leveling" in config.planner
    soil = config.build_soil()
    runtime = PlannerRuntime(
        bus, wm, machine_rigs={m.machine_id: m.rig for m in config.machines},
        params=config.planner, bank_density=soil.bank_density,
        loading_pose=config.poses.get("loading_pose"),
        truck_dump_pose=config.poses.get("truck_dump_pose"),
        offload_point=config.poses.get("offload_point"))
    registry = build_registry(runtime)
    tree = resolve(parse_document(config.tree_file.read_text()), registry)
    period = float(config.planner.get("period", PLANNER_PERIOD))
    return PlannerLoop(runtime, tree, period=period)


# -- snapshots ---------------------------------------------------------------

def save_snapshot(path, sim: Simulator, cell_index: int) -> None:
    state = {}
    for machine_id, (_, ms) in sim.machines.items():
        state[machine_id] = {
            "x": ms.x, "y": ms.y, "heading": ms.heading,
            "payload_kg": ms.payload_kg, "blade_load_kg": ms.blade_load_kg,
            "joints": dict(ms.joints),
        }
    snap = {
        "sim_time": sim.sim_time,
        "cell_index": cell_index,
        "machines": state,
        "terrain": {
            "nx": sim.terrain.nx, "ny": sim.terrain.ny,
            "cell_size": sim.terrain.cell_size,
            "origin": list(sim.terrain.origin),
            "elevation": sim.terrain.elevation.tolist(),
        },
    }
    Path(path).write_text(json.dumps(snap))


def load_snapshot(path) -> dict:
    snap = json.loads(Path(path).read_text())
    t = snap["terrain"]
    snap["terrain"] = Heightfield(
        t["nx"], t["ny"], t["cell_size"], origin=tuple(t["origin"]),
        elevation=np.asarray(t["elevation"], dtype=float))
    return snap


# -- progress / deadlock -----------------------------------------------------

def _progress_signature(sim: Simulator, cell_index: int) -> tuple:
    parts = [round(sim.ledger.excavated_kg, 6), round(sim.ledger.dumped_kg, 6),
             cell_index]
    for machine_id in sim.machine_order:
        ms = sim.machines[machine_id][1]
        parts.extend((round(ms.x, 3), round(ms.y, 3),
                      round(ms.payload_kg, 3)))
    return tuple(parts)


# -- loopback mode -----------------------------------------------------------

def run_loopback(config: ScenarioConfig, out_dir=None,
                 snapshot: Optional[str] = None,
                 bridge_delay: float = 0.0,
                 observer=None) -> RunReport:
    """observer(sim, loop, status), when given, is called after every
    planner tick; test harnesses use it for fault injection and tree
    introspection."""
    snap = load_snapshot(snapshot) if snapshot else None
    sim_bus = Bus(machine_ids=_bus_ids(config))
    planner_bus = Bus(machine_ids=_bus_ids(config))
    bridge = LoopbackBridge(planner_bus, sim_bus, delay=bridge_delay)
    sim = Simulator(config, sim_bus,
                    terrain=snap["terrain"] if snap else None,
                    machine_states=snap["machines"] if snap else None)
    if snap:
        sim.sim_time = snap["sim_time"]
    collector = TelemetryCollector(sim_bus)
    loop = build_planner(config, planner_bus,
                         terrain=sim.terrain if snap else None,
                         cell_index=snap["cell_index"] if snap else 0)
    steps_per_tick = max(1, round(loop.period / config.timestep))

    start_wall = time.perf_counter()
    complete = False
    deadlocked = False
    error = None
    end_time = sim.sim_time + config.max_sim_time if snap \
        else config.max_sim_time
    last_sig = None
    last_change = sim.sim_time
    try:
        while sim.sim_time < end_time - 1e-9:
            for _ in range(steps_per_tick):
                sim.step()
            bridge.pump(sim.sim_time)
            status = loop.step(sim.sim_time)
            bridge.pump(sim.sim_time)
            # drain every tick so long runs do not overflow the bounded
            # subscription queues
            collector.drain()
            if observer is not None:
                observer(sim, loop, status)
            if status is SUCCESS:
                complete = True
                break
            sig = _progress_signature(sim, loop.runtime.wm.cell_index)
            if sig != last_sig:
                last_sig = sig
                last_change = sim.sim_time
            elif sim.sim_time - last_change > config.deadlock_window:
                deadlocked = True
                break
    except Exception as exc:               # report with partial artifacts
        error = f"{type(exc).__name__}: {exc}"
    wall = time.perf_counter() - start_wall
    sim.flush_terrain()
    bridge.pump(sim.sim_time)
    loop.drain()
    collector.drain()

    report = _finalize(config, sim, collector, wall,
                       complete=complete, deadlocked=deadlocked, error=error,
                       mean_tick=loop.mean_tick_seconds(),
                       cell_switches=list(loop.runtime.wm.cell_switch_times),
                       bus_errors=len(sim_bus.error_events) + len(planner_bus.error_events))
    if out_dir:
        _write_outputs(Path(out_dir), report, collector, config, sim,
                       loop.runtime.wm.cell_index)
    return report


# -- two-process (TCP lockstep) mode -----------------------------------------

def run_tcp(config: ScenarioConfig, config_path, out_dir=None,
            overrides: Optional[dict] = None,
            snapshot: Optional[str] = None) -> RunReport:
    snap = load_snapshot(snapshot) if snapshot else None
    sim_bus = Bus(machine_ids=_bus_ids(config))
    sim = Simulator(config, sim_bus,
                    terrain=snap["terrain"] if snap else None,
                    machine_states=snap["machines"] if snap else None)
    if snap:
        sim.sim_time = snap["sim_time"]
    collector = TelemetryCollector(sim_bus)
    server = TcpBridgeServer(sim_bus)
    args = [sys.executable, "-m", "regolith.planner_proc",
            "--config", str(config_path), "--port", str(server.port),
            "--hash", config.config_hash]
    if overrides:
        args += ["--overrides", json.dumps(overrides)]
    if snapshot:
        args += ["--snapshot", str(snapshot)]
    child = subprocess.Popen(args)
    steps_per_tick = max(
        1, round(float(config.planner.get("period", PLANNER_PERIOD))
                 / config.timestep))

    start_wall = time.perf_counter()
    complete = False
    deadlocked = False
    error = None
    mean_tick = 0.0
    cell_switches: list = []
    cell_index = 0
    end_time = sim.sim_time + config.max_sim_time if snap \
        else config.max_sim_time
    last_sig = None
    last_change = sim.sim_time
    try:
        server.accept(timeout=30.0)
        while sim.sim_time < end_time - 1e-9:
            for _ in range(steps_per_tick):
                sim.step()
            ack = server.sync(sim.sim_time)
            collector.drain()
            mean_tick = ack.get("mean_tick_seconds", mean_tick)
            cell_switches = ack.get("cell_switch_times", cell_switches)
            cell_index = ack.get("cell_index", cell_index)
            if ack.get("status") == "SUCCESS":
                complete = True
                break
            sig = _progress_signature(sim, cell_index)
            if sig != last_sig:
                last_sig = sig
                last_change = sim.sim_time
            elif sim.sim_time - last_change > config.deadlock_window:
                deadlocked = True
                break
    except Exception as exc:
        error = f"{type(exc).__name__}: {exc}"
    finally:
        server.shutdown()
        try:
            child.wait(timeout=30.0)
        except subprocess.TimeoutExpired:
            child.kill()
    wall = time.perf_counter() - start_wall
    sim.flush_terrain()
    collector.drain()

    report = _finalize(config, sim, collector, wall, complete=complete,
                       deadlocked=deadlocked, error=error,
                       mean_tick=mean_tick, cell_switches=cell_switches,
                       bus_errors=len(sim_bus.error_events))
    if out_dir:
        _write_outputs(Path(out_dir), report, collector, config, sim,
                       cell_index)
    return report


def run(config: ScenarioConfig, config_path=None, out_dir=None,
        mode: Optional[str] = None, overrides: Optional[dict] = None,
        snapshot: Optional[str] = None) -> RunReport:
    mode = mode or config.transport
    if mode == "tcp":
        if config_path is None:
            raise ValueError("tcp mode needs the config file path")
        return run_tcp(config, config_path, out_dir=out_dir,
                       overrides=overrides, snapshot=snapshot)
    return run_loopback(config, out_dir=out_dir, snapshot=snapshot)


# -- artifacts ---------------------------------------------------------------

def _finalize(config: ScenarioConfig, sim: Simulator,
              collector: TelemetryCollector, wall: float, *, complete: bool,
              deadlocked: bool, error: Optional[str], mean_tick: float,
              cell_switches: list, bus_errors: int) -> RunReport:
    sample_dt = config.timestep * TELEMETRY_EVERY
    cycles = {}
    summary = {}
    fleet = []
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for machine_id in sim.machine_order:
            records = collector.cycles(machine_id, sample_dt)
            if records:
                cycles[machine_id] = records
                summary[machine_id] = summarize(records)
        # fleet view: the digging machine's cycle spans, work charged
        # across every machine's actuators
        diggers = [m for m in sim.machine_order
                   if dig_start_times(collector.events, m)]
        if diggers:
            fleet = segment_cycles(collector.samples, collector.events,
                                   diggers[0], sample_dt,
                                   work_machines=sim.machine_order)
            if fleet:
                summary["fleet"] = summarize(fleet)
    return RunReport(
        complete=complete, sim_time=sim.sim_time, wall_time=wall,
        cycles=cycles, summary=summary, mean_tick_seconds=mean_tick,
        realtime_factor=sim.sim_time / wall if wall > 0 else 0.0,
        cell_switch_times=cell_switches, fleet_cycles=fleet,
        deadlocked=deadlocked, error=error,
        bus_errors=bus_errors, config_hash=config.config_hash,
        mass_closure_error=sim.mass_closure_error())


def _write_outputs(out_dir: Path, report: RunReport,
                   collector: TelemetryCollector, config: ScenarioConfig,
                   sim: Simulator, cell_index: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    all_cycles = [r for machine_id in sorted(report.cycles)
                  for r in report.cycles[machine_id]]
    write_cycles_csv(out_dir / "cycles.csv", all_cycles)
    write_samples_csv(out_dir / "samples.csv", collector.samples)
    events = [(t, "cell_switch") for t in report.cell_switch_times]
    for machine_id in sorted(report.cycles):
        for t in dig_start_times(collector.events, machine_id):
            events.append((t, f"dig_start:{machine_id}"))
    with open(out_dir / "events.csv", "w") as fh:
        fh.write("sim_time,event\n")
        for t, label in sorted(events):
            fh.write(f"{t!r},{label}\n")
    (out_dir / "report.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True))
    save_snapshot(out_dir / "snapshot.json", sim, cell_index)
