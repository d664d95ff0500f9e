"""Agent model tests: actuator limits, pursuit tracking, scout targeting,
survey coverage."""

import math

import numpy as np
import pytest

from glide.agents import (NoReference, ScoutPolicy, UavLimits, UavState,
                          UgvLimits, UgvState, path_length, path_progress,
                          point_at_arc, scout_target, survey_waypoints,
                          uav_step, ugv_step)
from glide.geometry import quat_roll_pitch
from glide.planner import Plan


def straight_plan(length=100.0, step=0.5):
    n = int(length / step) + 1
    waypoints = np.column_stack([np.arange(n) * step, np.zeros(n)])
    return Plan(waypoints, length, [], 0)


def bent_plan():
    # east leg then a 90-degree bend to the north
    east = np.column_stack([np.arange(0, 41) * 0.5, np.zeros(41)])
    north = np.column_stack([np.full(40, 20.0), np.arange(1, 41) * 0.5])
    waypoints = np.vstack([east, north])
    return Plan(waypoints, path_length(waypoints), [], 0)


# ---------------------------------------------------------------------------
# UGV
# ---------------------------------------------------------------------------

def test_ugv_straight_full_speed_advance():
    plan = straight_plan()
    state = UgvState(position=np.array([0.0, 0.0]), heading=0.0, speed=2.0)
    before = state.position.copy()
    for _ in range(10):
        state = ugv_step(state, plan, 0.1)
    assert state.position[0] - before[0] == pytest.approx(2.0, abs=1e-9)
    assert state.position[1] == pytest.approx(0.0, abs=1e-9)
    assert state.odometer == pytest.approx(2.0, abs=1e-9)


def test_ugv_turn_demand_capped_per_tick():
    plan = Plan(np.array([[0.0, 0.0], [0.0, 5.0], [0.0, 10.0]]), 10.0, [], 0)
    state = UgvState(position=np.array([0.0, 0.0]), heading=0.0, speed=2.0)
    stepped = ugv_step(state, plan, 0.1)
    # 90-degree demand in one tick: heading change bounded by the rate cap
    assert abs(stepped.heading - state.heading) <= math.radians(40.0) * 0.1 + 1e-12


def test_ugv_linear_motion_consistency():
    plan = straight_plan()
    a = UgvState(position=np.array([0.0, 0.0]), heading=0.0, speed=2.0)
    for _ in range(10):
        a = ugv_step(a, plan, 0.1)
    b = UgvState(position=np.array([0.0, 0.0]), heading=0.0, speed=2.0)
    b = ugv_step(b, plan, 1.0)
    assert np.allclose(a.position, b.position, atol=1e-9)
    assert a.odometer == pytest.approx(b.odometer, abs=1e-9)


def test_ugv_limits_hold_over_full_tracking_run():
    plan = bent_plan()
    limits = UgvLimits()
    state = UgvState(position=np.array([0.0, 0.0]), heading=0.0)
    previous_rate = state.yaw_rate
    odometer_integral = 0.0
    for _ in range(600):
        state = ugv_step(state, plan, 0.1, limits)
        assert 0.0 <= state.speed <= limits.max_speed + 1e-12
        assert abs(state.yaw_rate) <= limits.heading_rate + 1e-12
        assert abs(state.yaw_rate - previous_rate) <= limits.heading_accel * 0.1 + 1e-12
        previous_rate = state.yaw_rate
        odometer_integral += state.speed * 0.1
    assert state.odometer == pytest.approx(odometer_integral, rel=1e-9)


def test_ugv_tracks_bent_path_to_end():
    plan = bent_plan()
    state = UgvState(position=np.array([0.0, 0.0]), heading=0.0)
    for _ in range(1200):
        state = ugv_step(state, plan, 0.1)
    assert np.hypot(*(state.position - plan.waypoints[-1])) < 1.0


def test_ugv_empty_plan_zero_speed_hold():
    state = UgvState(position=np.array([3.0, 4.0]), heading=1.0, speed=2.0)
    for _ in range(50):
        state = ugv_step(state, None, 0.1)
    assert state.speed == 0.0
    stopped = state.position.copy()
    state = ugv_step(state, None, 0.1)
    assert np.allclose(state.position, stopped)


def test_ugv_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        ugv_step(UgvState(np.zeros(2), 0.0), None, 0.0)


# ---------------------------------------------------------------------------
# UAV
# ---------------------------------------------------------------------------

def test_uav_horizontal_speed_capped():
    state = UavState(np.zeros(3))
    target = np.array([50.0, 0.0, 0.0])
    displacement = 0.0
    for _ in range(10):
        new = uav_step(state, target, 0.1)
        displacement += float(np.hypot(*(new.position[:2] - state.position[:2])))
        state = new
    assert displacement <= 5.0 + 1e-9


def test_uav_climb_rate_capped():
    state = UavState(np.zeros(3))
    target = np.array([0.0, 0.0, 10.0])
    for _ in range(10):
        state = uav_step(state, target, 0.1)
    assert state.position[2] <= 1.0 + 1e-9


def test_uav_limits_hold_per_tick():
    limits = UavLimits()
    state = UavState(np.zeros(3))
    rng = np.random.default_rng(4)
    target = np.array([30.0, -20.0, 15.0])
    for i in range(400):
        if i % 80 == 0:
            target = np.array([rng.uniform(-50, 50), rng.uniform(-50, 50),
                               rng.uniform(5, 25)])
        state = uav_step(state, target, 0.1, limits)
        assert np.hypot(*state.velocity[:2]) <= limits.max_horizontal_speed + 1e-9
        assert abs(state.velocity[2]) <= limits.max_vertical_rate + 1e-9
        roll, pitch = quat_roll_pitch(state.attitude)
        assert math.hypot(roll, pitch) <= limits.tilt_limit + 1e-9


def test_uav_hover_decays_to_level():
    state = UavState(np.zeros(3), velocity=np.array([3.0, 0.0, 0.0]))
    target = np.zeros(3)
    for _ in range(200):
        state = uav_step(state, target, 0.1)
    assert np.linalg.norm(state.velocity) < 0.05
    roll, pitch = quat_roll_pitch(state.attitude)
    assert abs(roll) < 1e-3 and abs(pitch) < 1e-3


# ---------------------------------------------------------------------------
# Scout targeting
# ---------------------------------------------------------------------------

def test_scout_target_lead_offset_on_plan():
    plan = straight_plan(100.0)
    target = scout_target(plan, 20.0, None, ScoutPolicy(lead_offset=15, altitude=15))
    assert np.allclose(target, [35.0, 0.0, 15.0])


def test_scout_target_extends_toward_next_victim():
    plan = straight_plan(100.0)
    victim = np.array([100.0, 50.0])
    target = scout_target(plan, 95.0, victim, ScoutPolicy(lead_offset=15, altitude=15))
    assert np.allclose(target, [100.0, 10.0, 15.0])


def test_scout_target_clamps_overhead_of_victim():
    plan = straight_plan(100.0)
    victim = np.array([100.0, 30.0])
    target = scout_target(plan, 200.0, victim, ScoutPolicy(lead_offset=15, altitude=15))
    assert np.allclose(target, [100.0, 30.0, 15.0])


def test_scout_target_clamps_to_plan_end_without_victim():
    plan = straight_plan(100.0)
    target = scout_target(plan, 95.0, None, ScoutPolicy(lead_offset=15, altitude=15))
    assert np.allclose(target, [100.0, 0.0, 15.0])


def test_scout_target_no_reference():
    with pytest.raises(NoReference):
        scout_target(None, 0.0, None, ScoutPolicy())


def test_scout_target_continuous_in_progress():
    plan = bent_plan()
    policy = ScoutPolicy(lead_offset=15, altitude=15)
    previous = scout_target(plan, 0.0, None, policy)
    for progress in np.arange(0.25, 40.0, 0.25):
        current = scout_target(plan, float(progress), None, policy)
        assert np.hypot(*(current[:2] - previous[:2])) <= 0.25 + 1e-9
        previous = current


# ---------------------------------------------------------------------------
# Survey pattern
# ---------------------------------------------------------------------------

def test_survey_track_count():
    waypoints = survey_waypoints((0, 0, 100, 100), 25.0)
    ys = sorted(set(waypoints[:, 1]))
    assert len(ys) == 5
    assert ys[0] == 0.0 and ys[-1] == 100.0


def test_survey_small_region_single_track():
    waypoints = survey_waypoints((0, 0, 40, 10), 25.0)
    assert len(set(waypoints[:, 1])) == 1
    assert waypoints[0, 1] == pytest.approx(5.0)


def test_survey_coverage_oracle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        x0, y0 = rng.uniform(0, 50, size=2)
        width, height = rng.uniform(5, 120, size=2)
        spacing = float(rng.uniform(5, 30))
        region = (x0, y0, x0 + width, y0 + height)
        waypoints = survey_waypoints(region, spacing)
        levels = sorted(set(waypoints[:, 1]))
        for _ in range(200):
            px = rng.uniform(x0, x0 + width)
            py = rng.uniform(y0, y0 + height)
            nearest = min(abs(py - level) for level in levels)
            assert nearest <= spacing / 2 + 1e-9


def test_survey_rejects_bad_spacing():
    with pytest.raises(ValueError):
        survey_waypoints((0, 0, 10, 10), 0.0)


# ---------------------------------------------------------------------------
# Path helpers
# ---------------------------------------------------------------------------

def test_path_progress_and_point_round_trip():
    plan = bent_plan()
    for arc in (0.0, 7.3, 20.0, 31.2, 39.9):
        point = point_at_arc(plan.waypoints, arc)
        progress, _ = path_progress(plan.waypoints, point)
        assert progress == pytest.approx(arc, abs=1e-6)


def test_path_progress_prefers_earliest_segment():
    # a path that doubles back on itself: progress must not jump ahead
    waypoints = np.array([[0.0, 0.0], [10.0, 0.0], [10.0, 1.0], [0.0, 1.0]])
    progress, segment = path_progress(waypoints, (5.0, 0.0))
    assert segment == 0
    assert progress == pytest.approx(5.0)
