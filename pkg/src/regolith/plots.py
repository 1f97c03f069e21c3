"""Plot-ready series emitted from a run's CSV directory.

Four series mirror the per-cycle report figures: hauled mass, cycle
duration with task breakdown, total work, and excavation-only work, plus
a marker file with the cell-switch times.
"""

from __future__ import annotations

import csv
import warnings
from pathlib import Path

SERIES_FILES = ("mass.csv", "duration.csv", "work.csv",
                "work_excavation.csv")
MARKER_FILE = "markers.csv"

_CYCLE_COLUMNS = ("cycle", "machine", "loaded_kg", "spilled_kg",
                  "duration_s", "work_J", "dig_s", "drive_s", "dump_s",
                  "wait_s")
_SAMPLE_COLUMNS = ("sim_time", "machine", "joint", "torque_Nm",
                   "omega_rad_s", "payload_kg", "skill_state")


class PlotDataError(ValueError):
    pass


def _read_csv(path: Path, required: tuple) -> list[dict]:
    if not path.exists():
        raise PlotDataError(f"missing input file: {path}")
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise PlotDataError(
                f"{path.name} is missing columns: {', '.join(missing)}")
        return list(reader)


def _dig_machine(cycle_rows: list[dict]) -> str:
    counts: dict[str, int] = {}
    for row in cycle_rows:
        counts[row["machine"]] = counts.get(row["machine"], 0) + 1
    return max(sorted(counts), key=counts.get)


def _excavation_work(samples: list[dict], machine: str,
                     boundaries: list[float]) -> list[float]:
    """Positive actuator work during dig activity per cycle span."""
    work = [0.0] * max(len(boundaries) - 1, 0)
    if not work:
        return work
    times = sorted({float(s["sim_time"]) for s in samples
                    if s["machine"] == machine})
    if len(times) > 1:
        gaps = [b - a for a, b in zip(times, times[1:])]
        gaps.sort()
        dt = gaps[len(gaps) // 2]
    else:
        dt = 0.1
    for s in samples:
        if s["machine"] != machine or s["skill_state"] != "dig":
            continue
        power = float(s["torque_Nm"]) * float(s["omega_rad_s"])
        if power <= 0.0:
            continue
        t = float(s["sim_time"])
        for k in range(len(work)):
            if boundaries[k] <= t < boundaries[k + 1]:
                work[k] += power * dt
                break
    return work


def emit_plot_data(in_dir) -> dict:
    """Write the series files next to the run CSVs; returns row counts."""
    in_dir = Path(in_dir)
    cycles = _read_csv(in_dir / "cycles.csv", _CYCLE_COLUMNS)
    samples = _read_csv(in_dir / "samples.csv", _SAMPLE_COLUMNS)
    events = _read_csv(in_dir / "events.csv", ("sim_time", "event"))

    switches = [float(r["sim_time"]) for r in events
                if r["event"] == "cell_switch"]
    with open(in_dir / MARKER_FILE, "w") as fh:
        fh.write("sim_time,event\n")
        for t in switches:
            fh.write(f"{t!r},cell_switch\n")

    if not cycles:
        warnings.warn("no cycles recorded; emitting empty series")
        rows = []
        machine = None
    else:
        machine = _dig_machine(cycles)
        rows = sorted((r for r in cycles if r["machine"] == machine),
                      key=lambda r: int(r["cycle"]))

    digs = sorted(float(r["sim_time"]) for r in events
                  if r["event"] == f"dig_start:{machine}")
    excavation = _excavation_work(samples, machine, digs) \
        if machine else []
    if len(excavation) < len(rows):
        excavation += [0.0] * (len(rows) - len(excavation))

    cum_loaded = cum_dumped = 0.0
    with open(in_dir / "mass.csv", "w") as fh:
        fh.write("cycle,loaded_kg,spilled_kg,"
                 "cumulative_loaded_kg,cumulative_dumped_kg\n")
        for r in rows:
            cum_loaded += float(r["loaded_kg"])
            cum_dumped += float(r["loaded_kg"]) - float(r["spilled_kg"])
            fh.write(f"{r['cycle']},{r['loaded_kg']},{r['spilled_kg']},"
                     f"{cum_loaded!r},{cum_dumped!r}\n")
    with open(in_dir / "duration.csv", "w") as fh:
        fh.write("cycle,duration_s,dig_s,drive_s,dump_s,wait_s\n")
        for r in rows:
            fh.write(f"{r['cycle']},{r['duration_s']},{r['dig_s']},"
                     f"{r['drive_s']},{r['dump_s']},{r['wait_s']}\n")
    with open(in_dir / "work.csv", "w") as fh:
        fh.write("cycle,work_J\n")
        for r in rows:
            fh.write(f"{r['cycle']},{r['work_J']}\n")
    with open(in_dir / "work_excavation.csv", "w") as fh:
        fh.write("cycle,work_J\n")
        for r, w in zip(rows, excavation):
            fh.write(f"{r['cycle']},{w!r}\n")
    return {"rows": len(rows), "markers": len(switches),
            "machine": machine}
