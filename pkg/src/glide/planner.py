"""Grid path planning on the occupancy belief.

Plans shortest-distance paths with an A* whose heuristic combines Euclidean
distance to the goal with an orientation penalty for states heading away
from it, orders multi-victim visits through a pairwise travel-time matrix,
projects out-of-grid goals onto the boundary, and decides when a plan has
been invalidated by newly revealed obstacles.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._astar import DCOL, DROW, Workspace, run_astar, warmup
from .mapping import OCCUPIED, OccupancyBelief, UnknownPolicy, blocked_mask

# per-thread scratch arrays for the search core, keyed by grid shape
_workspaces = threading.local()


def _workspace_for(shape: tuple[int, int]) -> Workspace:
    cache = getattr(_workspaces, "cache", None)
    if cache is None:
        cache = _workspaces.cache = {}
    ws = cache.get(shape)
    if ws is None:
        ws = cache[shape] = Workspace(shape)
    return ws

HEADING_COUNT = 8
HEADING_STEP = math.pi / 4.0

VICTIM = "victim"
PROXY = "proxy"

DEFAULT_INFLATION = 1.5


class Infeasible(Exception):
    """No traversable path exists under the current belief."""


class AllUnreachable(Exception):
    """No victim is reachable from the start."""


class DegenerateRay(Exception):
    """Ego and victim coincide; the projection direction is undefined."""


@dataclass(frozen=True)
class PoseState:
    """Planner search state: grid cell (row, col) plus one of 8 headings."""

    cell: tuple[int, int]
    heading: int

    def __post_init__(self):
        if not 0 <= self.heading < HEADING_COUNT:
            raise ValueError(f"heading must be in 0..7, got {self.heading}")


@dataclass(frozen=True)
class HeuristicParams:
    """Weight of the orientation term in the search heuristic (lambda >= 0)."""

    orientation_weight: float = 1.0

    def __post_init__(self):
        if self.orientation_weight < 0:
            raise ValueError("orientation_weight must be >= 0")


@dataclass
class Goal:
    """Planning target.  Proxy goals keep the original victim position."""

    position: np.ndarray
    kind: str = VICTIM
    victim_position: np.ndarray | None = None

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.victim_position is None:
            self.victim_position = self.position
        else:
            self.victim_position = np.asarray(self.victim_position, dtype=float)


@dataclass
class Plan:
    waypoints: np.ndarray              # (N, 2) meters, consecutive cells 8-adjacent
    total_length: float
    goal_order: list[int]
    revision_planned_at: int
    # cells within the inflation radius of the path; consulted by needs_replan
    corridor: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def is_empty(self) -> bool:
        return len(self.waypoints) == 0

    def to_dict(self) -> dict:
        return {
            "waypoints": [[float(x), float(y)] for x, y in self.waypoints],
            "total_length": float(self.total_length),
            "goal_order": list(self.goal_order),
            "revision_planned_at": int(self.revision_planned_at),
        }


def heading_angle(heading: int) -> float:
    return heading * HEADING_STEP


def quantize_heading(angle: float) -> int:
    return int(round(angle / HEADING_STEP)) % HEADING_COUNT


def heuristic_cost(position, goal, dtheta: float, orientation_weight: float) -> float:
    """Distance-plus-orientation heuristic: ||p - g|| + weight * dtheta / pi."""
    dx = float(goal[0]) - float(position[0])
    dy = float(goal[1]) - float(position[1])
    return math.hypot(dx, dy) + orientation_weight * dtheta / math.pi


def delta_theta(state: PoseState, goal, origin=(0.0, 0.0), resolution: float = 1.0) -> float:
    """Minimal angle in [0, pi] between the state's heading and the bearing
    from its cell center to the goal.  Zero when the goal lies in the cell."""
    row, col = state.cell
    cx = origin[0] + (col + 0.5) * resolution
    cy = origin[1] + (row + 0.5) * resolution
    dx = float(goal[0]) - cx
    dy = float(goal[1]) - cy
    if abs(dx) < 0.5 * resolution and abs(dy) < 0.5 * resolution:
        return 0.0
    bearing = math.atan2(dy, dx)
    return geometry.angle_diff(heading_angle(state.heading), bearing)


def heuristic(state: PoseState, goal, params: HeuristicParams,
              origin=(0.0, 0.0), resolution: float = 1.0) -> float:
    row, col = state.cell
    position = (origin[0] + (col + 0.5) * resolution,
                origin[1] + (row + 0.5) * resolution)
    dtheta = delta_theta(state, goal, origin, resolution)
    return heuristic_cost(position, goal, dtheta, params.orientation_weight)


def _corridor_mask(shape: tuple[int, int], cells: np.ndarray, radius_cells: int) -> np.ndarray:
    """Cells within `radius_cells` (Euclidean) of any path cell."""
    mask = np.zeros(shape, dtype=bool)
    if len(cells) == 0:
        return mask
    rows = cells[:, 0]
    cols = cells[:, 1]
    height, width = shape
    r2 = radius_cells * radius_cells
    for dr in range(-radius_cells, radius_cells + 1):
        for dc in range(-radius_cells, radius_cells + 1):
            if dr * dr + dc * dc > r2:
                continue
            rr = np.clip(rows + dr, 0, height - 1)
            cc = np.clip(cols + dc, 0, width - 1)
            mask[rr, cc] = True
    return mask


def plan_path(belief: OccupancyBelief, start: PoseState, goal,
              params: HeuristicParams = HeuristicParams(),
              policy: UnknownPolicy = UnknownPolicy.OPTIMISTIC,
              inflation: float = DEFAULT_INFLATION) -> Plan:
    """A* path from the start pose to the goal cell on the current belief.

    Raises Infeasible when no traversable path exists; that signal feeds the
    simulator's immobilization detector.
    """
    goal_xy = goal.position if isinstance(goal, Goal) else np.asarray(goal, dtype=float)
    start_r, start_c = start.cell
    if not belief.in_bounds(start_r, start_c):
        raise ValueError(f"start cell {start.cell} out of bounds")
    blocked = blocked_mask(belief, policy)
    if blocked[start_r, start_c]:
        raise Infeasible(f"start cell {start.cell} is not traversable")
    goal_r, goal_c = belief.world_to_cell(goal_xy)
    if not belief.in_bounds(goal_r, goal_c):
        raise Infeasible(f"goal cell ({goal_r}, {goal_c}) out of bounds")
    if blocked[goal_r, goal_c]:
        raise Infeasible(f"goal cell ({goal_r}, {goal_c}) is not traversable")

    radius_cells = max(1, int(math.ceil(inflation / belief.resolution)))
    if (start_r, start_c) == (goal_r, goal_c):
        cells = np.array([[start_r, start_c]], dtype=np.int64)
        waypoints = np.array([belief.cell_center(start_r, start_c)])
        return Plan(waypoints, 0.0, [], belief.revision,
                    corridor=_corridor_mask(blocked.shape, cells, radius_cells))

    found, cost, cells = run_astar(blocked, start_r, start_c, start.heading,
                                   goal_r, goal_c, belief.resolution,
                                   params.orientation_weight,
                                   _workspace_for(blocked.shape))
    if not found:
        raise Infeasible(f"no path from {start.cell} to ({goal_r}, {goal_c})")
    x0, y0 = belief.origin
    res = belief.resolution
    waypoints = np.column_stack([
        x0 + (cells[:, 1] + 0.5) * res,
        y0 + (cells[:, 0] + 0.5) * res,
    ])
    return Plan(waypoints, float(cost), [], belief.revision,
                corridor=_corridor_mask(blocked.shape, cells, radius_cells))


def project_goal(belief: OccupancyBelief, ego_position, victim_position) -> Goal:
    """Victims inside the grid plan as-is; outside victims are projected along
    the ego-to-victim ray onto the grid boundary as proxy goals."""
    ego = np.asarray(ego_position, dtype=float)
    victim = np.asarray(victim_position, dtype=float)
    xmin, ymin = belief.origin
    xmax = xmin + belief.width * belief.resolution
    ymax = ymin + belief.height * belief.resolution
    if xmin <= victim[0] < xmax and ymin <= victim[1] < ymax:
        return Goal(victim, VICTIM)
    direction = victim - ego
    if float(np.hypot(*direction)) == 0.0:
        raise DegenerateRay("ego and victim coincide")
    eps = 1e-6
    exit_point = geometry.ray_box_exit(ego, direction, xmin, ymin, xmax, ymax)
    if exit_point is None:
        raise DegenerateRay("projection ray does not reach the grid boundary")
    clamped = np.array([
        min(max(exit_point[0], xmin + eps), xmax - eps),
        min(max(exit_point[1], ymin + eps), ymax - eps),
    ])
    row, col = belief.world_to_cell(clamped)
    return Goal(belief.cell_center(row, col), PROXY, victim_position=victim)


def _pose_at(belief: OccupancyBelief, position, heading: int) -> PoseState:
    return PoseState(belief.world_to_cell(position), heading)


def _leg_cost(belief, from_xy, from_heading, to_xy, params, policy, inflation) -> float:
    bearing = math.atan2(float(to_xy[1]) - float(from_xy[1]),
                         float(to_xy[0]) - float(from_xy[0]))
    heading = from_heading if from_heading is not None else quantize_heading(bearing)
    try:
        plan = plan_path(belief, _pose_at(belief, from_xy, heading), to_xy,
                         params, policy, inflation)
    except Infeasible:
        return math.inf
    return plan.total_length


def order_goals(belief: OccupancyBelief, start: PoseState, victims: list[Goal],
                params: HeuristicParams = HeuristicParams(),
                policy: UnknownPolicy = UnknownPolicy.OPTIMISTIC,
                inflation: float = DEFAULT_INFLATION,
                max_speed: float = 2.0,
                exact_limit: int = 8) -> tuple[list[int], np.ndarray]:
    """Visitation order minimizing total travel time from the start.

    Returns (order, times) where times[i][j] is the pairwise shortest-time
    matrix over nodes [start] + victims (path length / max_speed; infinite
    when no path exists).  Orders are exact (exhaustive) up to `exact_limit`
    victims and nearest-neighbor beyond; unreachable victims are appended to
    the order after all reachable ones.
    """
    if not victims:
        raise ValueError("order_goals requires at least one victim")
    n = len(victims)
    positions = [None] + [v.position for v in victims]
    start_xy = None  # filled from the start cell center
    start_xy = belief.cell_center(*start.cell)
    positions[0] = start_xy

    times = np.full((n + 1, n + 1), np.inf)
    np.fill_diagonal(times, 0.0)
    for j in range(1, n + 1):
        cost = _leg_cost(belief, start_xy, start.heading, positions[j],
                         params, policy, inflation)
        times[0, j] = cost / max_speed
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            if i == j:
                continue
            cost = _leg_cost(belief, positions[i], None, positions[j],
                             params, policy, inflation)
            times[i, j] = cost / max_speed

    reachable = [j for j in range(1, n + 1) if math.isfinite(times[0, j])]
    unreachable = [j - 1 for j in range(1, n + 1) if not math.isfinite(times[0, j])]
    if not reachable:
        raise AllUnreachable("no victim reachable from the start")

    if len(reachable) <= exact_limit:
        best_order = None
        best_total = math.inf
        for perm in itertools.permutations(reachable):
            total = times[0, perm[0]]
            for a, b in zip(perm, perm[1:]):
                total += times[a, b]
            if total < best_total:
                best_total = total
                best_order = perm
        ordered = list(best_order)
    else:
        ordered = []
        current = 0
        remaining = set(reachable)
        while remaining:
            nxt = min(remaining, key=lambda j: (times[current, j], j))
            ordered.append(nxt)
            remaining.discard(nxt)
            current = nxt

    order = [j - 1 for j in ordered] + sorted(unreachable)
    return order, times


def needs_replan(plan: Plan, belief: OccupancyBelief, new_victims: bool) -> bool:
    """Replan when victims were added, or when a cell inside the plan's
    corridor became occupied after the plan was computed."""
    if new_victims:
        return True
    if plan is None or plan.corridor is None:
        return True
    if belief.revision <= plan.revision_planned_at:
        return False
    newly_blocked = ((belief.cells == OCCUPIED)
                     & plan.corridor
                     & (belief.last_changed > plan.revision_planned_at))
    return bool(newly_blocked.any())


__all__ = [
    "PoseState", "HeuristicParams", "Goal", "Plan",
    "Infeasible", "AllUnreachable", "DegenerateRay",
    "delta_theta", "heuristic", "heuristic_cost", "plan_path",
    "project_goal", "order_goals", "needs_replan",
    "heading_angle", "quantize_heading", "warmup",
    "VICTIM", "PROXY", "DROW", "DCOL",
]
