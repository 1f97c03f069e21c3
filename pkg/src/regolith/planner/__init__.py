from .behaviours import (
    LevelBinding,
    SKILL_STATUS_TIMEOUT,
    SkillBinding,
    WaitUntil,
    build_registry,
)
from .loop import PLANNER_PERIOD, PlannerLoop, PlannerRuntime
from .planning import (
    ALL_CELLS_DONE,
    BUCKET_NOT_EMPTY,
    DigPlan,
    DumpPlan,
    NO_WORK_IN_CELL,
    RouteError,
    RoutePlan,
    bed_full,
    bucket_empty,
    check_scenario_complete,
    offload_in_progress,
    plan_dig,
    plan_dump,
    plan_leveling,
    plan_route,
    truck_in_position,
)
from .world import MachineReport, SITE_ID, WorldModel, grid_cells

__all__ = [
    "ALL_CELLS_DONE", "BUCKET_NOT_EMPTY", "DigPlan", "DumpPlan",
    "LevelBinding", "MachineReport", "NO_WORK_IN_CELL", "PLANNER_PERIOD",
    "PlannerLoop", "PlannerRuntime", "RouteError", "RoutePlan", "SITE_ID",
    "SKILL_STATUS_TIMEOUT", "SkillBinding", "WaitUntil", "WorldModel",
    "bed_full", "bucket_empty", "build_registry", "check_scenario_complete",
    "grid_cells", "offload_in_progress", "plan_dig", "plan_dump",
    "plan_leveling", "plan_route", "truck_in_position",
]
