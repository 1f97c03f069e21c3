"""Crawler locomotion: kinematic differential drive on the heightfield with
quasi-static track torque bookkeeping, plus the sub-crawler stance policy."""

from __future__ import annotations

import math

from ..terrain import Heightfield, SoilParams
from .kinematics import wrap_angle
from .specs import MachineSpec, MachineState

#: Waypoint considered reached inside this radius (m).
GOAL_TOL = 0.30
#: Final-heading alignment tolerance (rad).
HEADING_TOL = 0.10
#: Heading error above which the machine turns in place instead of driving.
TURN_IN_PLACE_ERR = 0.60
#: Proportional gain from heading error to commanded yaw rate.
HEADING_GAIN = 2.0
#: Yaw rate above which the stance counts as turning.
TURNING_RATE = 0.05
#: Sub-crawler stow angle while turning (rad, raised).
SUBCRAWLER_STOW = 0.60
#: Sub-crawler actuation rate limit (rad/s).
SUBCRAWLER_RATE = 0.50
#: Slope (rad) at which commanded speed has been scaled all the way down.
SPEED_SLOPE_SCALE = 0.70
MIN_SPEED_FACTOR = 0.20

IDLE = "idle"
RUNNING = "running"
ARRIVED = "arrived"


def track_torques(spec: MachineSpec, total_mass: float, pitch: float,
                  turn_rate: float, gravity: float,
                  crawlers_down: bool) -> tuple[float, float]:
    """Quasi-static sprocket torques (left, right) to sustain motion.

    Longitudinal force = rolling resistance + grade resistance m*g*sin(pitch)
    (signed: assists downhill); yaw drag adds a differential component so
    that total track power equals drive power + turning dissipation.
    """
    g = gravity
    f_long = total_mass * g * (spec.rolling_resistance * math.cos(pitch)
                               + math.sin(pitch))
    yaw_drag = (spec.turning_resistance_subcrawler if crawlers_down
                else spec.turning_resistance)
    t_turn = yaw_drag * turn_rate
    r = spec.wheel_radius
    base = f_long * r / 2.0
    diff = t_turn * r / spec.track_width
    return base - diff, base + diff


def sub_crawler_policy(state: MachineState, turning: bool,
                       dt: float) -> tuple[float, float]:
    """Target stance angles: stowed while turning, terrain-following pitch
    on straights.  Updates the state's angles with a rate limit and returns
    the targets."""
    target = SUBCRAWLER_STOW if turning else state.pitch
    step = SUBCRAWLER_RATE * dt
    for attr in ("sub_crawler_front", "sub_crawler_rear"):
        current = getattr(state, attr)
        delta = min(max(target - current, -step), step)
        setattr(state, attr, current + delta)
    return target, target


def settle_on_terrain(state: MachineState, h: Heightfield) -> None:
    """Kinematic ground contact: z and chassis tilt follow the terrain under
    the track centroid."""
    state.z = h.height_at(state.x, state.y)
    gx, gy = h.gradient_at(state.x, state.y)
    ch, sh = math.cos(state.heading), math.sin(state.heading)
    state.pitch = math.atan(gx * ch + gy * sh)
    state.roll = math.atan(-gx * sh + gy * ch)


def step_locomotion(state: MachineState, spec: MachineSpec, waypoints,
                    index: int, h: Heightfield, soil: SoilParams,
                    dt: float, goal_tol: float = GOAL_TOL) -> tuple[str, int]:
    """Advance the machine toward its route for one timestep.

    Waypoints are (x, y) or (x, y, heading); a heading on the final
    waypoint is aligned to before arrival is reported.  Returns
    (status, next waypoint index); status is IDLE for an empty route,
    ARRIVED at the end, RUNNING otherwise.  Track torque/velocity samples
    are refreshed on the state.
    """
    if not waypoints:
        state.track_speed_left = state.track_speed_right = 0.0
        state.turn_rate = 0.0
        _record_track_samples(state, spec, 0.0, 0.0, 0.0, 0.0)
        return IDLE, index
    if dt <= 0.0:
        return RUNNING, index

    while index < len(waypoints):
        wp = waypoints[index]
        dx, dy = wp[0] - state.x, wp[1] - state.y
        if math.hypot(dx, dy) > goal_tol:
            break
        if index == len(waypoints) - 1:
            final_heading = wp[2] if len(wp) > 2 and wp[2] is not None else None
            if final_heading is None or \
                    abs(wrap_angle(final_heading - state.heading)) <= HEADING_TOL:
                state.track_speed_left = state.track_speed_right = 0.0
                state.turn_rate = 0.0
                _record_track_samples(state, spec, 0.0, 0.0, 0.0, 0.0)
                return ARRIVED, index
            dx = dy = None  # rotate in place toward final_heading
            err = wrap_angle(final_heading - state.heading)
            break
        index += 1
    else:  # pragma: no cover - loop always breaks or returns
        return ARRIVED, index

    if dx is None:
        speed_cmd = 0.0
    else:
        err = wrap_angle(math.atan2(dy, dx) - state.heading)
        loaded = state.payload_kg > 1.0 or state.blade_load_kg > 1.0
        target = spec.target_speed(loaded)
        slope_factor = max(MIN_SPEED_FACTOR,
                           1.0 - abs(state.pitch) / SPEED_SLOPE_SCALE)
        if abs(err) > TURN_IN_PLACE_ERR:
            speed_cmd = 0.0
        else:
            speed_cmd = target * slope_factor * math.cos(err)

    turn_rate = min(max(HEADING_GAIN * err, -spec.max_turn_rate),
                    spec.max_turn_rate)

    total_mass = spec.mass + state.payload_kg + state.blade_load_kg
    crawlers_down = max(state.sub_crawler_front, state.sub_crawler_rear) \
        < SUBCRAWLER_STOW / 2.0
    tau_l, tau_r = track_torques(spec, total_mass, state.pitch, turn_rate,
                                 soil.gravity, crawlers_down)
    # respect torque limits by slowing down rather than stalling
    limit = min(spec.torque_limits["left_track"],
                spec.torque_limits["right_track"])
    worst = max(abs(tau_l), abs(tau_r))
    if worst > limit:
        speed_cmd *= limit / worst

    new_x = state.x + speed_cmd * math.cos(state.heading) * dt
    new_y = state.y + speed_cmd * math.sin(state.heading) * dt
    if h.in_bounds(new_x, new_y):
        state.x, state.y = new_x, new_y
    else:
        speed_cmd = 0.0
    state.heading = wrap_angle(state.heading + turn_rate * dt)
    state.turn_rate = turn_rate
    half_w = spec.track_width / 2.0
    state.track_speed_left = speed_cmd - turn_rate * half_w
    state.track_speed_right = speed_cmd + turn_rate * half_w
    settle_on_terrain(state, h)
    sub_crawler_policy(state, abs(turn_rate) > TURNING_RATE, dt)
    _record_track_samples(state, spec, tau_l, tau_r,
                          state.track_speed_left / spec.wheel_radius,
                          state.track_speed_right / spec.wheel_radius)
    return RUNNING, index


def _record_track_samples(state, spec, tau_l, tau_r, omega_l, omega_r):
    state.set_sample("left_track", tau_l, omega_l,
                     spec.torque_limits["left_track"])
    state.set_sample("right_track", tau_r, omega_r,
                     spec.torque_limits["right_track"])
