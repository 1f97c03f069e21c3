import math

import numpy as np
import pytest

from regolith.machines import (
    ARRIVED,
    BedDumpExecution,
    DigExecution,
    FAILED,
    IDLE,
    MachineSpec,
    MachineState,
    Pid,
    SUCCEEDED,
    blade_level_step,
    bucket_tip,
    default_spec,
    settle_on_terrain,
    spill_model,
    step_locomotion,
    sub_crawler_policy,
    track_torques,
    transfer_bucket,
)
from regolith.machines.locomotion import SUBCRAWLER_RATE, SUBCRAWLER_STOW
from regolith.terrain import Heightfield, SoilParams, SweptCut

SOIL = SoilParams()
DT = 0.01


def flat_field(height=2.0, n=48, cs=0.5):
    return Heightfield(n, n, cs, elevation=np.full((n, n), height))


def machine(role="excavator", x=10.0, y=10.0, heading=0.0, h=None):
    spec = default_spec(f"{role}1", role)
    state = MachineState(x=x, y=y, heading=heading)
    if h is not None:
        settle_on_terrain(state, h)
        state.blade_height = state.z
    return spec, state


# -- spec validation ---------------------------------------------------------

def test_spec_rejects_loaded_faster_than_empty():
    with pytest.raises(ValueError):
        MachineSpec("m1", "excavator", speed_loaded=0.4, speed_empty=0.3)


def test_spec_rejects_unknown_role_and_bad_dims():
    with pytest.raises(ValueError):
        MachineSpec("m1", "crane")
    with pytest.raises(ValueError):
        MachineSpec("m1", "excavator", length=-1.0)


def test_spec_dict_round_trip():
    spec = default_spec("t1", "dumptruck")
    assert MachineSpec.from_dict(spec.to_dict()) == spec


# -- locomotion --------------------------------------------------------------

def test_flat_straight_steady_empty_speed():
    h = flat_field()
    spec, state = machine(x=5.0, h=h)
    waypoints = [(20.0, 10.0)]
    idx = 0
    for _ in range(300):  # 3 s warm-up
        _, idx = step_locomotion(state, spec, waypoints, idx, h, SOIL, DT)
    assert state.speed == pytest.approx(0.35, abs=1e-6)
    assert state.track_speed_left == pytest.approx(state.track_speed_right)


def test_grade_torque_term_on_ten_degree_slope():
    spec, _ = machine()
    theta = math.radians(10.0)
    flat_l, flat_r = track_torques(spec, spec.mass, 0.0, 0.0, SOIL.gravity,
                                   crawlers_down=True)
    slope_l, slope_r = track_torques(spec, spec.mass, theta, 0.0, SOIL.gravity,
                                     crawlers_down=True)
    added = (slope_l + slope_r) - (flat_l + flat_r)
    expected = spec.mass * SOIL.gravity * math.sin(theta) * spec.wheel_radius
    assert added == pytest.approx(expected, rel=0.02)
    assert slope_l == pytest.approx(slope_r)


def test_zero_dt_leaves_state_unchanged():
    h = flat_field()
    spec, state = machine(x=5.0, h=h)
    before = (state.x, state.y, state.heading)
    step_locomotion(state, spec, [(20.0, 10.0)], 0, h, SOIL, 0.0)
    assert (state.x, state.y, state.heading) == before


def test_empty_route_is_idle():
    h = flat_field()
    spec, state = machine(h=h)
    status, idx = step_locomotion(state, spec, [], 0, h, SOIL, DT)
    assert status == IDLE
    assert state.speed == 0.0


def test_arrives_and_aligns_final_heading():
    h = flat_field()
    spec, state = machine(x=5.0, h=h)
    waypoints = [(8.0, 10.0), (11.0, 10.0, 1.2)]
    idx = 0
    status = None
    for _ in range(8000):
        status, idx = step_locomotion(state, spec, waypoints, idx, h, SOIL, DT)
        if status == ARRIVED:
            break
    assert status == ARRIVED
    assert math.hypot(state.x - 11.0, state.y - 10.0) <= 0.35
    assert abs(state.heading - 1.2) <= 0.12


def test_track_torque_samples_respect_limits():
    h = flat_field()
    spec, state = machine(x=5.0, h=h)
    spec.torque_limits["left_track"] = 50.0
    spec.torque_limits["right_track"] = 50.0
    idx = 0
    for _ in range(200):
        _, idx = step_locomotion(state, spec, [(20.0, 10.0)], idx, h, SOIL, DT)
        assert abs(state.samples["left_track"].torque) <= 50.0 + 1e-9
        assert abs(state.samples["right_track"].torque) <= 50.0 + 1e-9


def test_z_follows_terrain_under_centroid():
    rng = np.random.default_rng(2)
    h = Heightfield(48, 48, 0.5,
                    elevation=2.0 + 0.05 * rng.standard_normal((48, 48)))
    spec, state = machine(x=5.0, h=h)
    idx = 0
    for _ in range(500):
        _, idx = step_locomotion(state, spec, [(20.0, 10.0)], idx, h, SOIL, DT)
        assert state.z == pytest.approx(h.height_at(state.x, state.y),
                                        abs=1e-12)


# -- sub-crawler policy ------------------------------------------------------

def test_subcrawler_stows_when_turning():
    _, state = machine()
    for _ in range(400):
        sub_crawler_policy(state, True, DT)
    assert state.sub_crawler_front == pytest.approx(SUBCRAWLER_STOW)
    assert state.sub_crawler_rear == pytest.approx(SUBCRAWLER_STOW)


def test_subcrawler_flat_straight_is_zero():
    _, state = machine()
    target, _ = sub_crawler_policy(state, False, DT)
    assert target == 0.0


def test_subcrawler_tracks_ramp_pitch_with_rate_limit():
    _, state = machine()
    state.pitch = 0.3
    t = 0.0
    while state.sub_crawler_front < 0.3 - 1e-9:
        sub_crawler_policy(state, False, DT)
        t += DT
        assert state.sub_crawler_front <= SUBCRAWLER_RATE * t + 1e-9
        assert t < 5.0
    assert t == pytest.approx(0.3 / SUBCRAWLER_RATE, abs=0.05)


# -- digging -----------------------------------------------------------------

def run_dig(spec, state, traj, h, max_steps=20000):
    execution = DigExecution(spec, traj)
    status = None
    removed = 0.0
    for _ in range(max_steps):
        status, got, _force = execution.step(state, h, SOIL, DT)
        removed += got
        if status != "Running":
            break
    return status, removed, execution


def test_dig_conserves_mass_into_bucket():
    h = flat_field(height=2.0)
    spec, state = machine(h=h)
    surface = 2.0
    traj = SweptCut(points=[(12.0, 10.0, surface - 0.15, 0.5),
                            (13.0, 10.0, surface - 0.15, 0.5)],
                    width=spec.bucket_width, max_depth=0.3)
    before = h.total_mass(SOIL.bank_density)
    status, removed, _ = run_dig(spec, state, traj, h)
    after = h.total_mass(SOIL.bank_density)
    assert status == SUCCEEDED
    assert removed > 10.0
    assert state.payload_kg == pytest.approx(removed, rel=1e-12)
    assert before - after == pytest.approx(removed, rel=1e-9)


def test_dig_fully_above_surface_succeeds_with_zero():
    h = flat_field(height=2.0)
    spec, state = machine(h=h)
    traj = SweptCut(points=[(12.0, 10.0, 2.5, 0.5), (13.0, 10.0, 2.5, 0.5)],
                    width=spec.bucket_width)
    before = h.elevation.copy()
    status, removed, _ = run_dig(spec, state, traj, h)
    assert status == SUCCEEDED
    assert removed == 0.0
    assert np.array_equal(h.elevation, before)


def test_dig_unreachable_start_fails_without_terrain_change():
    h = flat_field(height=2.0)
    spec, state = machine(h=h)
    traj = SweptCut(points=[(20.0, 10.0, 1.85, 0.5), (21.0, 10.0, 1.85, 0.5)],
                    width=spec.bucket_width)
    before = h.elevation.copy()
    status, removed, _ = run_dig(spec, state, traj, h, max_steps=100)
    assert status == FAILED
    assert removed == 0.0
    assert np.array_equal(h.elevation, before)


def test_dig_torque_samples_within_limits():
    h = flat_field(height=2.0)
    spec, state = machine(h=h)
    traj = SweptCut(points=[(12.0, 10.0, 1.85, 0.5), (13.0, 10.0, 1.85, 0.5)],
                    width=spec.bucket_width, max_depth=0.3)
    execution = DigExecution(spec, traj)
    for _ in range(20000):
        status, _, _ = execution.step(state, h, SOIL, DT)
        for name in ("swing", "boom", "stick", "bucket"):
            assert abs(state.samples[name].torque) \
                <= spec.torque_limits[name] + 1e-9
        if status != "Running":
            break


def test_dig_is_deterministic():
    results = []
    for _ in range(2):
        h = flat_field(height=2.0)
        spec, state = machine(h=h)
        traj = SweptCut(points=[(12.0, 10.0, 1.85, 0.5),
                                (13.0, 10.0, 1.85, 0.5)],
                        width=spec.bucket_width, max_depth=0.3)
        _, removed, _ = run_dig(spec, state, traj, h)
        results.append((removed, state.payload_kg, tuple(state.joints.values()),
                        h.elevation.tobytes()))
    assert results[0] == results[1]


# -- spill -------------------------------------------------------------------

def test_spill_zero_below_threshold():
    h = flat_field()
    spec, state = machine(h=h)
    state.payload_kg = 70.0
    spilled, lost = spill_model(state, spec, 0.2, h, SOIL, DT)
    assert spilled == 0.0 and lost == 0.0
    assert state.payload_kg == 70.0


def test_spill_conserves_mass():
    h = flat_field()
    spec, state = machine(h=h)
    state.payload_kg = 70.0
    terrain_before = h.total_mass(SOIL.bank_density)
    spilled_total = 0.0
    for _ in range(100):
        spilled, lost = spill_model(state, spec, 1.0, h, SOIL, DT)
        assert lost == 0.0
        spilled_total += spilled
    assert spilled_total > 0.0
    assert state.payload_kg == pytest.approx(70.0 - spilled_total, rel=1e-12)
    gained = h.total_mass(SOIL.bank_density) - terrain_before
    assert gained == pytest.approx(spilled_total, rel=1e-9)


# -- payload transfer and bed dump -------------------------------------------

def test_transfer_into_bed_when_over_it():
    h = flat_field()
    exc_spec, exc = machine(h=h)
    exc.joints = {"swing": 0.0, "boom": 0.4, "stick": -0.5, "bucket": -0.6}
    exc.payload_kg = 64.0
    tip = bucket_tip(exc_spec, exc)
    truck_spec, truck = machine("dumptruck", x=tip[0], y=tip[1], h=h)
    moved, into_truck, lost = transfer_bucket(exc, exc_spec, truck, truck_spec,
                                              h, SOIL)
    assert into_truck and lost == 0.0
    assert moved == 64.0
    assert truck.payload_kg == 64.0
    assert exc.payload_kg == 0.0


def test_transfer_misses_bed_and_lands_on_terrain():
    h = flat_field()
    exc_spec, exc = machine(h=h)
    exc.joints = {"swing": 0.0, "boom": 0.4, "stick": -0.5, "bucket": -0.6}
    exc.payload_kg = 64.0
    truck_spec, truck = machine("dumptruck", x=2.0, y=2.0, h=h)
    before = h.total_mass(SOIL.bank_density)
    moved, into_truck, lost = transfer_bucket(exc, exc_spec, truck, truck_spec,
                                              h, SOIL)
    assert not into_truck
    assert truck.payload_kg == 0.0
    gained = h.total_mass(SOIL.bank_density) - before
    assert gained + lost == pytest.approx(64.0, rel=1e-9)


def test_bed_dump_sequence_duration_and_conservation():
    h = flat_field()
    spec, state = machine("dumptruck", h=h)
    state.payload_kg = 200.0
    before = h.total_mass(SOIL.bank_density)
    execution = BedDumpExecution(spec)
    steps = 0
    dumped_total = lost_total = 0.0
    while True:
        status, dumped, lost = execution.step(state, h, SOIL, DT)
        dumped_total += dumped
        lost_total += lost
        steps += 1
        assert steps < 10000
        if status == SUCCEEDED:
            break
    assert steps * DT == pytest.approx(execution.duration(), abs=0.1)
    assert state.payload_kg == pytest.approx(0.0, abs=1e-9)
    assert state.bed_angle == 0.0
    gained = h.total_mass(SOIL.bank_density) - before
    assert gained + lost_total == pytest.approx(200.0, rel=1e-9)
    assert dumped_total == pytest.approx(200.0, rel=1e-12)


def test_bed_dump_empty_bed_succeeds_with_zero():
    h = flat_field()
    spec, state = machine("dumptruck", h=h)
    execution = BedDumpExecution(spec)
    dumped_total = 0.0
    while True:
        status, dumped, _ = execution.step(state, h, SOIL, DT)
        dumped_total += dumped
        if status == SUCCEEDED:
            break
    assert dumped_total == 0.0


# -- blade leveling ----------------------------------------------------------

def pid_oracle(kp, ki, kd, out_limit, errors, dt):
    """Independent discrete PID (conditional-integration anti-windup)."""
    integral = 0.0
    prev = None
    outs = []
    for e in errors:
        deriv = 0.0 if prev is None else (e - prev) / dt
        prev = e
        trial = integral + e * dt
        unsat = kp * e + ki * trial + kd * deriv
        if not ((unsat > out_limit and e > 0)
                or (unsat < -out_limit and e < 0)):
            integral = trial
        out = kp * e + ki * integral + kd * deriv
        outs.append(max(min(out, out_limit), -out_limit))
    return outs


def test_pid_matches_discrete_oracle():
    rng = np.random.default_rng(8)
    errors = rng.uniform(-1, 1, 50)
    pid = Pid(1.5, 0.4, 0.1, out_limit=0.8)
    got = [pid.update(e, DT) for e in errors]
    expected = pid_oracle(1.5, 0.4, 0.1, 0.8, errors, DT)
    assert got == pytest.approx(expected, abs=1e-12)


def test_pid_zero_error_zero_output():
    pid = Pid(2.0, 0.5, 0.0, out_limit=0.3)
    assert pid.update(0.0, DT) == 0.0


def test_pid_step_response_converges_without_steady_state_error():
    pid = Pid(2.0, 0.5, 0.0, out_limit=0.3)
    height, target = 0.0, 0.5
    trace = []
    for _ in range(3000):
        height += pid.update(target - height, DT) * DT
        trace.append(height)
    assert abs(target - height) < 1e-3
    assert max(trace) <= target + 0.02  # effectively monotone approach


def test_blade_run_levels_cells_to_target():
    h = flat_field(height=2.0)
    spec, state = machine(x=5.0, y=10.0, h=h)
    target = 1.92
    pid = Pid(3.0, 0.8, 0.0, out_limit=0.25)
    terrain_before = h.total_mass(SOIL.bank_density)
    graded_total = shed_total = lost_total = 0.0
    for _ in range(4000):  # drive 12 m at 0.3 m/s
        state.x += 0.3 * DT
        state.track_speed_left = state.track_speed_right = 0.3
        settle_on_terrain(state, h)
        graded, shed, lost = blade_level_step(state, spec, target, h, SOIL,
                                              pid, DT)
        graded_total += graded
        shed_total += shed
        lost_total += lost
        if state.x > 17.0:
            break
    assert graded_total > 0.0
    # cells along the run (excluding the start transient) sit at the target
    for x in np.arange(8.0, 16.0, 0.5):
        assert h.height_at(x, 10.0) == pytest.approx(target, abs=0.02)
    terrain_after = h.total_mass(SOIL.bank_density)
    expected_delta = -graded_total + shed_total - lost_total
    assert terrain_after - terrain_before == pytest.approx(expected_delta,
                                                           abs=1e-6)
    assert state.blade_load_kg <= spec.blade_capacity_kg + 1e-9
