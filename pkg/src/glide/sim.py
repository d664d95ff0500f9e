"""Fixed-timestep orchestration of one search-and-rescue trial.

Each tick runs the same fixed sequence: the goal-searching UAV surveys and
pushes gated, georeferenced detections through the link; delivered events
feed the consensus tracker, whose confirmations become navigation goals;
the belief ingests setting-dependent updates (full truth for GT, the local
sensing window for Local, window plus scout reveals for GLIDE); the planner
replans when the corridor is invalidated or goals change; agents step under
their actuator limits; and termination conditions are evaluated.  Identical
configurations produce bit-identical results.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry
from .agents import (NoReference, ScoutPolicy, UavLimits, UavState, UgvLimits,
                     UgvState, path_progress, point_at_arc, scout_target,
                     survey_waypoints, uav_step, ugv_step)
from .comms import Link, LinkModel
from .mapping import (OccupancyBelief, UnknownPolicy, apply_local_window,
                      apply_reveal, blocked_mask, new_belief, reveal_all,
                      RevealFootprint)
from .perception import (CameraIntrinsics, ConsensusTracker, DetectionEvent,
                         UavPose, attitude_gate, center_gate, decode_event,
                         encode_event, project_to_ground, simulate_detection)
from .planner import (AllUnreachable, Goal, HeuristicParams, Infeasible, Plan,
                      PoseState, needs_replan, order_goals, plan_path,
                      project_goal, quantize_heading)
from .worldgen import WorldSpec, rasterize

GT = "GT"
LOCAL = "Local"
GLIDE = "GLIDE"
SETTINGS = (GT, LOCAL, GLIDE)

GOAL_REACHED = "GoalReached"
COLLISION = "Collision"
TIMEOUT = "Timeout"
IMMOBILIZED = "Immobilized"


class ConfigError(Exception):
    """Trial configuration violates an invariant."""


@dataclass
class TrialConfig:
    world: WorldSpec
    setting: str = GLIDE
    heuristic: HeuristicParams = field(default_factory=HeuristicParams)
    tick: float = 0.1
    timeout: float = 300.0
    goal_tolerance: float = 2.0
    seed: int = 0
    link: LinkModel = field(default_factory=LinkModel)
    scout: ScoutPolicy = field(default_factory=ScoutPolicy)
    local_window: float = 10.0
    reveal_extent: float = 50.0

    resolution: float = 0.5
    inflation: float = 1.5
    collision_radius: float = 0.75
    unknown_policy: UnknownPolicy = UnknownPolicy.OPTIMISTIC
    start_position: np.ndarray | None = None
    start_heading: float = -0.5 * math.pi   # facing south, toward the victims
    scout_head_start: float = 5.0
    detection_noise_sigma: float = 0.0
    intrinsics: CameraIntrinsics = field(default_factory=CameraIntrinsics)
    max_tilt: float = math.radians(15.0)
    center_fraction: float = 0.5
    consensus_radius: float = 1.0
    consensus_hits: int = 3
    searcher_altitude: float = 15.0
    searcher_dwell: float = 5.0
    searcher_spacing: float = 8.0
    ugv: UgvLimits = field(default_factory=UgvLimits)
    uav: UavLimits = field(default_factory=UavLimits)
    immobilized_infeasible_limit: int = 3
    immobilized_window: float = 20.0
    immobilized_min_displacement: float = 0.5
    record_trajectory: bool = False

    def validate(self) -> None:
        if self.setting not in SETTINGS:
            raise ConfigError(f"unknown setting {self.setting!r}")
        if self.tick <= 0 or self.timeout <= 0 or self.goal_tolerance <= 0:
            raise ConfigError("tick, timeout, and goal_tolerance must be positive")
        if self.resolution <= 0 or self.local_window <= 0 or self.reveal_extent <= 0:
            raise ConfigError("resolution and sensing extents must be positive")
        if not self.world.victims:
            raise ConfigError("world has no victims")


@dataclass
class TrialResult:
    success: bool
    termination: str
    duration: float
    distance: float
    replan_count: int
    link_stats: dict
    final_belief_coverage: float
    ugv_track: np.ndarray = field(default=None, repr=False, compare=False)
    trajectory: list = field(default=None, repr=False, compare=False)

    def to_json_dict(self) -> dict:
        return {
            "success": bool(self.success),
            "termination": self.termination,
            "duration": round(float(self.duration), 6),
            "distance": round(float(self.distance), 6),
            "replan_count": int(self.replan_count),
            "link_stats": self.link_stats,
            "final_belief_coverage": round(float(self.final_belief_coverage), 6),
        }


# ---------------------------------------------------------------------------
# Immobilization detection
# ---------------------------------------------------------------------------

@dataclass
class ReplanHistory:
    """Inputs to the immobilization detector, maintained by the trial loop."""

    infeasible_limit: int = 3
    window: float = 20.0
    min_displacement: float = 0.5
    infeasible_streak: int = 0
    goal_pending: bool = False
    samples: deque = field(default_factory=deque)   # (t, x, y)

    def record_position(self, t: float, position) -> None:
        self.samples.append((t, float(position[0]), float(position[1])))
        # keep exactly one sample at or before the window horizon
        while len(self.samples) >= 2 and self.samples[1][0] <= t - self.window:
            self.samples.popleft()


def detect_immobilized(history: ReplanHistory) -> bool:
    """Immobilized when replanning keeps failing, or the vehicle barely moved
    across the sliding window while a goal is still pending."""
    if history.infeasible_streak >= history.infeasible_limit:
        return True
    if not history.goal_pending or not history.samples:
        return False
    t_now, x_now, y_now = history.samples[-1]
    t_ref, x_ref, y_ref = history.samples[0]
    if t_now - t_ref < history.window:
        return False
    displacement = math.hypot(x_now - x_ref, y_now - y_ref)
    return displacement < history.min_displacement


# ---------------------------------------------------------------------------
# Trial loop
# ---------------------------------------------------------------------------

def _plan_pose(belief: OccupancyBelief, position, heading: float,
               policy: UnknownPolicy, max_radius_cells: int = 6) -> PoseState | None:
    """Pose to plan from: the vehicle's cell, or the nearest traversable cell
    when the vehicle sits inside the inflated band around an obstacle
    (physically legal; the footprint is smaller than the planning inflation).
    Returns None when no traversable cell exists nearby."""
    row, col = belief.world_to_cell(position)
    if not belief.in_bounds(row, col):
        return None
    blocked = blocked_mask(belief, policy)
    if not blocked[row, col]:
        return PoseState((row, col), quantize_heading(heading))
    best = None
    for radius in range(1, max_radius_cells + 1):
        candidates = []
        for dr in range(-radius, radius + 1):
            for dc in range(-radius, radius + 1):
                if max(abs(dr), abs(dc)) != radius:
                    continue
                r2, c2 = row + dr, col + dc
                if belief.in_bounds(r2, c2) and not blocked[r2, c2]:
                    center = belief.cell_center(r2, c2)
                    dist = float(np.hypot(*(center - np.asarray(position[:2]))))
                    candidates.append((dist, r2, c2))
        if candidates:
            best = min(candidates)
            break
    if best is None:
        return None
    return PoseState((best[1], best[2]), quantize_heading(heading))


def _collision_distance(position, obstacles) -> float:
    best = math.inf
    px, py = float(position[0]), float(position[1])
    for obs in obstacles:
        d = geometry.point_rect_distance((px, py), obs.center, obs.size, obs.yaw)
        if d < best:
            best = d
    return best


def _swept_collision(prev_pos, new_pos, obstacles, radius: float) -> bool:
    step = float(np.hypot(*(np.asarray(new_pos) - np.asarray(prev_pos))))
    for obs in obstacles:
        # cheap reject: the swept capsule cannot reach this obstacle
        d_now = geometry.point_rect_distance(new_pos, obs.center, obs.size, obs.yaw)
        if d_now > radius + step:
            continue
        if geometry.segment_rect_distance(prev_pos, new_pos, obs.center,
                                          obs.size, obs.yaw) <= radius:
            return True
    return False


def _survey_region(world: WorldSpec, margin: float = 15.0):
    """Survey box around the victims, clipped to the world bounds."""
    xmin, ymin, xmax, ymax = world.bounds
    victims = np.asarray(world.victims)
    lo = victims.min(axis=0) - margin
    hi = victims.max(axis=0) + margin
    return (max(xmin + 1.0, lo[0]), max(ymin + 1.0, lo[1]),
            min(xmax - 1.0, hi[0]), min(ymax - 1.0, hi[1]))


class _Searcher:
    """Goal-searching UAV flying an externally provided survey pattern
    (initialized over the victim area, standing in for operator input)."""

    def __init__(self, config: TrialConfig):
        world = config.world
        region = _survey_region(world)
        self.waypoints = survey_waypoints(region, config.searcher_spacing)
        centroid = np.asarray(world.victims).mean(axis=0)
        self.state = UavState(np.array([centroid[0], centroid[1],
                                        config.searcher_altitude]))
        self.altitude = config.searcher_altitude
        self.dwell = config.searcher_dwell
        self.index = 0
        self.holding = True

    def step(self, t: float, dt: float, any_confirmed: bool, limits: UavLimits) -> None:
        if self.holding and (any_confirmed or t >= self.dwell):
            self.holding = False
        if self.holding:
            target = self.state.position.copy()
        else:
            wp = self.waypoints[self.index]
            target = np.array([wp[0], wp[1], self.altitude])
            if np.hypot(*(self.state.position[:2] - wp)) < 2.0:
                self.index = (self.index + 1) % len(self.waypoints)
        self.state = uav_step(self.state, target, dt, limits)


def run_trial(config: TrialConfig) -> TrialResult:
    """Execute one deterministic trial and return its metrics.

    Runtime failures map to termination causes; only configuration
    invariant violations raise (ConfigError).
    """
    config.validate()
    world = config.world
    truth = rasterize(world, config.resolution, config.inflation)

    start = (np.asarray(config.start_position, dtype=float)
             if config.start_position is not None else world.spawn_center.copy())
    start_cell = truth.world_to_cell(start)
    if not truth.in_bounds(*start_cell):
        raise ConfigError(f"start position {start} outside world bounds")
    if truth.occupied[start_cell]:
        raise ConfigError(f"start position {start} is not traversable")

    belief = new_belief(world.bounds, config.resolution)
    if config.setting == GT:
        reveal_all(belief, truth)

    ugv = UgvState(position=start, heading=config.start_heading)
    searcher = _Searcher(config)
    scout = None
    if config.setting == GLIDE:
        scout = UavState(np.array([start[0], start[1], config.scout.altitude]))

    link = Link(config.link, seed=config.seed)
    tracker = ConsensusTracker(config.consensus_radius, config.consensus_hits)
    det_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])

    pending: list[Goal] = []
    plan: Plan | None = None
    plan_dirty = False
    progress = 0.0
    progress_hint = 0
    leg_attempts = 0
    replan_count = 0
    history = ReplanHistory(config.immobilized_infeasible_limit,
                            config.immobilized_window,
                            config.immobilized_min_displacement)

    dt = config.tick
    n_ticks = int(math.ceil(config.timeout / dt))
    track = np.empty((n_ticks + 1, 2))
    track[0] = ugv.position
    trajectory = [] if config.record_trajectory else None

    termination = TIMEOUT
    t_end = config.timeout

    def log_state(t: float) -> None:
        if trajectory is None:
            return
        trajectory.append({"t": round(t, 6), "id": "ugv",
                           "x": ugv.position[0], "y": ugv.position[1],
                           "heading": ugv.heading})
        if scout is not None:
            trajectory.append({"t": round(t, 6), "id": "scout",
                               "x": scout.position[0], "y": scout.position[1],
                               "z": scout.position[2]})
        trajectory.append({"t": round(t, 6), "id": "searcher",
                           "x": searcher.state.position[0],
                           "y": searcher.state.position[1],
                           "z": searcher.state.position[2]})

    for tick_index in range(n_ticks):
        t = tick_index * dt

        # (1) searcher detects, gates, georeferences, and transmits
        pose = UavPose(searcher.state.position, searcher.state.attitude, t)
        detections = simulate_detection(world, pose, config.intrinsics,
                                        config.detection_noise_sigma, det_rng)
        for det in detections:
            if not attitude_gate(det.pose, config.max_tilt):
                continue
            if not center_gate(det.bbox, config.intrinsics.image_size,
                               config.center_fraction):
                continue
            ground = project_to_ground(det, config.intrinsics)
            event = DetectionEvent(ground, det.class_label, det.confidence,
                                   "searcher-0", t)
            link.send(encode_event(event), t)

        delivered = link.advance(t, searcher.state.position,
                                 np.array([ugv.position[0], ugv.position[1], 0.0]))
        new_victims = False
        for payload in delivered:
            event, _ = decode_event(payload)
            confirmed = tracker.update(event)
            if confirmed is not None:
                goal = project_goal(belief, ugv.position, confirmed.position)
                pending.append(goal)
                new_victims = True

        # (2) setting-dependent belief update
        if config.setting in (LOCAL, GLIDE):
            count = apply_local_window(belief, ugv.position, config.local_window, truth)
            if count and plan is not None and _corridor_hit(plan, belief):
                plan_dirty = True
        if config.setting == GLIDE and scout is not None:
            half = 0.5 * config.reveal_extent
            count = apply_reveal(belief, RevealFootprint(scout.position[:2], half, half),
                                 truth)
            if count and plan is not None and _corridor_hit(plan, belief):
                plan_dirty = True

        # (3) replan on new victims or an invalidated corridor
        if pending and (plan is None or plan_dirty or new_victims):
            pose_state = _plan_pose(belief, ugv.position, ugv.heading,
                                    config.unknown_policy)
            if new_victims and len(pending) > 1 and pose_state is not None:
                try:
                    order, _ = order_goals(belief, pose_state, pending,
                                           config.heuristic, config.unknown_policy,
                                           config.inflation, config.ugv.max_speed)
                    pending = [pending[i] for i in order]
                except (Infeasible, AllUnreachable):
                    pass  # keep arrival order; per-leg planning still applies
            leg_attempts += 1
            if leg_attempts > 1:
                replan_count += 1
            try:
                if pose_state is None:
                    raise Infeasible("no traversable cell near the vehicle")
                plan = plan_path(belief, pose_state, pending[0], config.heuristic,
                                 config.unknown_policy, config.inflation)
                history.infeasible_streak = 0
                plan_dirty = False
                progress = 0.0
                progress_hint = 0
            except Infeasible:
                plan = None
                plan_dirty = False
                history.infeasible_streak += 1

        # (4) agents step in fixed order: UGV, scout, searcher
        ugv_moving = plan is not None and (
            config.setting != GLIDE or t >= config.scout_head_start)
        prev_position = ugv.position
        if ugv_moving:
            progress, progress_hint = path_progress(plan.waypoints, ugv.position,
                                                    progress_hint)
            ugv = ugv_step(ugv, plan, dt, config.ugv, progress)
        else:
            ugv = ugv_step(ugv, None, dt, config.ugv)

        if scout is not None:
            next_victim = pending[1].position if len(pending) > 1 else None
            try:
                target = scout_target(plan, progress, next_victim, config.scout)
            except NoReference:
                target = scout.position.copy()
                target[2] = config.scout.altitude
            scout = uav_step(scout, target, dt, config.uav)

        searcher.step(t, dt, bool(pending), config.uav)

        t = (tick_index + 1) * dt
        track[tick_index + 1] = ugv.position
        history.goal_pending = bool(pending)
        history.record_position(t, ugv.position)
        log_state(t)

        # (5) termination checks
        if _swept_collision(prev_position, ugv.position, world.obstacles,
                            config.collision_radius):
            termination = COLLISION
            t_end = t
            break
        if pending:
            goal = pending[0]
            if float(np.hypot(*(ugv.position - goal.victim_position))) <= config.goal_tolerance:
                pending.pop(0)
                plan = None
                plan_dirty = False
                leg_attempts = 0
                if not pending:
                    termination = GOAL_REACHED
                    t_end = t
                    break
        if detect_immobilized(history):
            termination = IMMOBILIZED
            t_end = t
            break
    else:
        tick_index = n_ticks - 1
        t_end = config.timeout

    return TrialResult(
        success=termination == GOAL_REACHED,
        termination=termination,
        duration=float(t_end),
        distance=float(ugv.odometer),
        replan_count=int(replan_count),
        link_stats=link.stats.to_dict(),
        final_belief_coverage=belief.coverage(),
        ugv_track=track[:tick_index + 2].copy(),
        trajectory=trajectory,
    )


def _corridor_hit(plan: Plan, belief: OccupancyBelief) -> bool:
    """Did the belief's most recent update newly occupy a corridor cell?"""
    rows, cols = belief.last_update_occupied
    if len(rows) == 0 or plan.corridor is None:
        return False
    return bool(plan.corridor[rows, cols].any())
