"""Kinematic agent models and behavior policies.

The ground vehicle tracks plans with a pure-pursuit steering law under
actuator limits (speed, heading rate, heading-rate slew); the UAVs follow
a first-order velocity model with speed, climb, and tilt limits.  The
terrain scout targets a point a fixed arc-length lead ahead of the ground
vehicle's progress along its plan, extended straight toward the next
victim when the plan runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry

GRAVITY = 9.81


class NoReference(Exception):
    """Scout has neither a plan segment nor a victim to extend toward."""


# ---------------------------------------------------------------------------
# Path helpers
# ---------------------------------------------------------------------------

def path_progress(waypoints: np.ndarray, position, hint_index: int = 0) -> tuple[float, int]:
    """Arc length of the closest point on the polyline (searched from
    `hint_index` onward; earliest segment wins near-ties so progress along
    self-approaching paths stays monotone).  Returns (arc_length, segment)."""
    wp = np.asarray(waypoints, dtype=float)
    if len(wp) < 2:
        return 0.0, 0
    hint_index = min(max(hint_index, 0), len(wp) - 2)
    p = np.asarray(position, dtype=float)
    a = wp[hint_index:-1]
    d = wp[hint_index + 1:] - a
    seg_len2 = np.einsum("ij,ij->i", d, d)
    seg_len2[seg_len2 == 0.0] = 1e-300
    t = np.clip(np.einsum("ij,ij->i", p - a, d) / seg_len2, 0.0, 1.0)
    proj = a + t[:, None] * d
    dist2 = np.einsum("ij,ij->i", p - proj, p - proj)
    best = int(np.argmin(dist2))
    # prefer the earliest segment among effective ties
    ties = np.nonzero(dist2 <= dist2[best] + 1e-9)[0]
    best = int(ties[0])
    seg_lengths = np.sqrt(np.einsum("ij,ij->i", wp[1:] - wp[:-1], wp[1:] - wp[:-1]))
    arc = float(seg_lengths[:hint_index + best].sum()
                + t[best] * seg_lengths[hint_index + best])
    return arc, hint_index + best


def point_at_arc(waypoints: np.ndarray, arc: float) -> np.ndarray:
    """Point at a given arc length along the polyline, clamped to its ends."""
    wp = np.asarray(waypoints, dtype=float)
    if len(wp) == 0:
        raise ValueError("empty polyline")
    if arc <= 0.0 or len(wp) == 1:
        return wp[0].copy()
    seg = wp[1:] - wp[:-1]
    lengths = np.sqrt(np.einsum("ij,ij->i", seg, seg))
    cum = np.cumsum(lengths)
    if arc >= cum[-1]:
        return wp[-1].copy()
    i = int(np.searchsorted(cum, arc, side="right"))
    start_arc = cum[i - 1] if i > 0 else 0.0
    if lengths[i] == 0.0:
        return wp[i].copy()
    return wp[i] + ((arc - start_arc) / lengths[i]) * seg[i]


def path_length(waypoints: np.ndarray) -> float:
    wp = np.asarray(waypoints, dtype=float)
    if len(wp) < 2:
        return 0.0
    return float(np.sqrt(((wp[1:] - wp[:-1]) ** 2).sum(axis=1)).sum())


# ---------------------------------------------------------------------------
# Ground vehicle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UgvLimits:
    max_speed: float = 2.0                          # m/s
    accel: float = 0.5                              # m/s^2
    heading_rate: float = math.radians(40.0)        # rad/s
    heading_accel: float = math.radians(10.0)       # rad/s^2
    lookahead: float = 3.0                          # m
    min_turn_speed: float = 1.0                     # m/s floor while maneuvering


@dataclass
class UgvState:
    position: np.ndarray
    heading: float
    speed: float = 0.0
    odometer: float = 0.0
    yaw_rate: float = 0.0

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


def _clamp(value: float, low: float, high: float) -> float:
    return max(low, min(high, value))


def ugv_step(state: UgvState, plan, dt: float,
             limits: UgvLimits = UgvLimits(),
             progress: float | None = None) -> UgvState:
    """Advance the ground vehicle one tick of pure-pursuit tracking.

    Speed ramps toward the cap and is reduced for path curvature and the
    approach to the plan's end; heading rate obeys both the rate limit and
    the slew (angular acceleration) limit.  An empty plan commands a
    zero-speed hold.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    waypoints = None if plan is None else np.asarray(plan.waypoints, dtype=float)
    if waypoints is None or len(waypoints) < 2:
        speed = max(0.0, state.speed - limits.accel * dt)
        yaw_rate = _clamp(0.0, state.yaw_rate - limits.heading_accel * dt,
                          state.yaw_rate + limits.heading_accel * dt)
        heading = geometry.wrap_angle(state.heading + yaw_rate * dt)
        step = speed * dt
        position = state.position + step * np.array([math.cos(heading), math.sin(heading)])
        return UgvState(position, heading, speed, state.odometer + step, yaw_rate)

    if progress is None:
        progress, _ = path_progress(waypoints, state.position)
    total = path_length(waypoints)
    target = point_at_arc(waypoints, min(progress + limits.lookahead, total))

    offset = target - state.position
    dist_target = float(np.hypot(*offset))
    if dist_target < 1e-9:
        err = 0.0
    else:
        err = geometry.wrap_angle(math.atan2(offset[1], offset[0]) - state.heading)

    # steering: slew-aware servo; the sqrt profile is the fastest yaw-rate
    # schedule that can still decelerate to zero exactly at err = 0, so the
    # heading converges without limit-cycling around the path
    stop_rate = math.sqrt(2.0 * limits.heading_accel * abs(err))
    mag = min(limits.heading_rate, stop_rate, abs(err) / dt)
    yaw_des = math.copysign(mag, err) if err else 0.0
    yaw_rate = _clamp(yaw_des, state.yaw_rate - limits.heading_accel * dt,
                      state.yaw_rate + limits.heading_accel * dt)
    yaw_rate = _clamp(yaw_rate, -limits.heading_rate, limits.heading_rate)

    # speed: cap, curvature slowdown (with slack for the slew-limited
    # steering), misalignment slowdown, end-of-plan braking; the maneuvering
    # floor keeps the vehicle tracking at speed instead of stalling mid-turn
    v_cmd = limits.max_speed
    if dist_target > 1e-6:
        curvature = 2.0 * abs(math.sin(err)) / dist_target
        if curvature > 1e-9:
            v_cmd = min(v_cmd, 0.6 * limits.heading_rate / curvature)
    align = math.cos(min(abs(err), 0.5 * math.pi))
    v_cmd = min(v_cmd, limits.max_speed * max(align, 0.0))
    remaining = max(total - progress, 0.0)
    if remaining > limits.lookahead:
        v_cmd = max(v_cmd, limits.min_turn_speed)
    v_cmd = min(v_cmd, math.sqrt(2.0 * limits.accel * remaining))
    v_cmd = _clamp(v_cmd, 0.0, limits.max_speed)

    speed = _clamp(v_cmd, state.speed - limits.accel * dt, state.speed + limits.accel * dt)
    speed = _clamp(speed, 0.0, limits.max_speed)

    heading = geometry.wrap_angle(state.heading + yaw_rate * dt)
    step = speed * dt
    position = state.position + step * np.array([math.cos(heading), math.sin(heading)])
    return UgvState(position, heading, speed, state.odometer + step, yaw_rate)


# ---------------------------------------------------------------------------
# Aerial vehicles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UavLimits:
    max_horizontal_speed: float = 5.0       # m/s
    max_vertical_rate: float = 1.0          # m/s
    accel: float = 3.0                      # m/s^2
    tilt_limit: float = math.radians(30.0)
    approach_gain: float = 0.6              # 1/s


@dataclass
class UavState:
    position: np.ndarray                    # (x, y, z)
    velocity: np.ndarray = None
    attitude: np.ndarray = None             # quaternion (w, x, y, z)

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.velocity is None:
            self.velocity = np.zeros(3)
        else:
            self.velocity = np.asarray(self.velocity, dtype=float)
        if self.attitude is None:
            self.attitude = geometry.quat_identity()
        else:
            self.attitude = np.asarray(self.attitude, dtype=float)


def uav_step(state: UavState, target, dt: float,
             limits: UavLimits = UavLimits()) -> UavState:
    """First-order velocity tracking toward a 3D target point.

    Horizontal speed, climb rate, and acceleration are clamped; the attitude
    tilts in proportion to the commanded horizontal acceleration, capped at
    the tilt limit.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    error = np.asarray(target, dtype=float) - state.position
    v_des = limits.approach_gain * error
    h_norm = float(np.hypot(v_des[0], v_des[1]))
    if h_norm > limits.max_horizontal_speed:
        v_des[:2] *= limits.max_horizontal_speed / h_norm
    v_des[2] = _clamp(v_des[2], -limits.max_vertical_rate, limits.max_vertical_rate)

    accel = (v_des - state.velocity) / dt
    a_norm = float(np.linalg.norm(accel))
    if a_norm > limits.accel:
        accel *= limits.accel / a_norm

    velocity = state.velocity + accel * dt
    h_norm = float(np.hypot(velocity[0], velocity[1]))
    if h_norm > limits.max_horizontal_speed:
        velocity[:2] *= limits.max_horizontal_speed / h_norm
    velocity[2] = _clamp(velocity[2], -limits.max_vertical_rate, limits.max_vertical_rate)

    pitch = math.atan2(accel[0], GRAVITY)
    roll = math.atan2(-accel[1], GRAVITY)
    tilt = math.hypot(pitch, roll)
    if tilt > limits.tilt_limit:
        scale = limits.tilt_limit / tilt
        pitch *= scale
        roll *= scale
    attitude = geometry.quat_from_euler(roll, pitch, 0.0)

    position = state.position + velocity * dt
    return UavState(position, velocity, attitude)


# ---------------------------------------------------------------------------
# Behavior policies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScoutPolicy:
    lead_offset: float = 15.0
    altitude: float = 15.0

    def __post_init__(self):
        if self.lead_offset <= 0 or self.altitude <= 0:
            raise ValueError("lead_offset and altitude must be positive")


def scout_target(plan, ugv_progress: float, next_victim,
                 policy: ScoutPolicy = ScoutPolicy()) -> np.ndarray:
    """Scout reference: the point a lead offset ahead of the UGV's progress
    along its plan, continuing straight toward the next victim once the plan
    runs out, clamped overhead of that victim."""
    waypoints = None if plan is None else np.asarray(plan.waypoints, dtype=float)
    have_plan = waypoints is not None and len(waypoints) >= 1
    if not have_plan and next_victim is None:
        raise NoReference("no plan segment and no victim to extend toward")
    if not have_plan:
        v = np.asarray(next_victim, dtype=float)
        return np.array([v[0], v[1], policy.altitude])

    total = path_length(waypoints)
    s = ugv_progress + policy.lead_offset
    if s <= total:
        p = point_at_arc(waypoints, s)
        return np.array([p[0], p[1], policy.altitude])
    end = waypoints[-1]
    if next_victim is None:
        return np.array([end[0], end[1], policy.altitude])
    v = np.asarray(next_victim, dtype=float)
    ext = v - end
    length = float(np.hypot(*ext))
    if length < 1e-9:
        return np.array([end[0], end[1], policy.altitude])
    t = min(s - total, length)
    p = end + (t / length) * ext
    return np.array([p[0], p[1], policy.altitude])


def survey_waypoints(region, spacing: float) -> np.ndarray:
    """Boustrophedon sweep of an axis-aligned region with east-west tracks.

    Track spacing never exceeds `spacing`, so every point of the region lies
    within spacing/2 of some track.  A region narrower than the spacing gets
    a single centered track.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    xmin, ymin, xmax, ymax = (float(v) for v in region)
    span_y = ymax - ymin
    if span_y < spacing:
        levels = [0.5 * (ymin + ymax)]
    else:
        # enough tracks that the realized spacing never exceeds the request
        n_tracks = int(math.ceil(span_y / spacing - 1e-9)) + 1
        levels = list(np.linspace(ymin, ymax, n_tracks))
    points = []
    for i, y in enumerate(levels):
        if i % 2 == 0:
            points.append((xmin, y))
            points.append((xmax, y))
        else:
            points.append((xmax, y))
            points.append((xmin, y))
    return np.array(points)
