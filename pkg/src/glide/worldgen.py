"""Procedural ground-truth world generation and rasterization.

Worlds live in a local ENU frame with the ground vehicle spawning on the
north side and victims placed to the south, separated by template-driven
obstacle courses (U-shaped corridors, east-west linear barriers) plus
difficulty-dependent clutter.  Generation is a pure function of
(seed, difficulty, template): the same inputs always produce a
bit-identical world.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import geometry

WORLD_SCHEMA_VERSION = 1

# Default site: 150 m x 150 m, which rasterizes to a 300x300 grid at 0.5 m.
DEFAULT_BOUNDS = (0.0, 0.0, 150.0, 150.0)
DEFAULT_RESOLUTION = 0.5
# Planner-side obstacle inflation: half the cart width plus margin.
DEFAULT_INFLATION = 1.5
# Clearance the generator keeps around the spawn so jittered starts and the
# scout's initial lead stay in open ground.
SPAWN_CLEAR_RADIUS = 15.0
VICTIM_CLEAR_RADIUS = 4.0

TEMPLATES = ("UShape", "Line", "Mixed")

MAX_GENERATION_ATTEMPTS = 1000


class GenerationFailed(Exception):
    """Rejection sampling could not place a reachable victim within the cap."""


@dataclass(frozen=True)
class DifficultyLevel:
    """Clutter parameters for one difficulty tier."""

    label: str
    obstacle_count_range: tuple[int, int]
    size_range: tuple[float, float]

    def __post_init__(self):
        lo, hi = self.obstacle_count_range
        if lo < 0 or hi < lo:
            raise ValueError("obstacle_count_range must be a nonempty interval")
        lo, hi = self.size_range
        if lo <= 0 or hi < lo:
            raise ValueError("size_range must be a positive interval")


EASY = DifficultyLevel("Easy", obstacle_count_range=(2, 4), size_range=(4.0, 9.0))
HARD = DifficultyLevel("Hard", obstacle_count_range=(5, 9), size_range=(5.0, 12.0))

DIFFICULTIES = {"Easy": EASY, "Hard": HARD}


@dataclass
class Obstacle:
    """Oriented rectangular obstacle: center (m), full side lengths (m), yaw (rad)."""

    center: np.ndarray
    size: np.ndarray
    yaw: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.size = np.asarray(self.size, dtype=float)
        self.yaw = float(self.yaw)

    def to_dict(self) -> dict:
        return {
            "center": [float(self.center[0]), float(self.center[1])],
            "size": [float(self.size[0]), float(self.size[1])],
            "yaw": self.yaw,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Obstacle":
        return cls(np.array(d["center"], dtype=float),
                   np.array(d["size"], dtype=float), float(d["yaw"]))


@dataclass
class WorldSpec:
    """Ground-truth world: bounds, obstacles, victims, spawn point, seed."""

    bounds: tuple[float, float, float, float]
    obstacles: list[Obstacle]
    victims: list[np.ndarray]
    spawn_center: np.ndarray
    seed: int
    template: str = "Mixed"
    difficulty: str = "Easy"

    def __post_init__(self):
        self.bounds = tuple(float(v) for v in self.bounds)
        self.victims = [np.asarray(v, dtype=float) for v in self.victims]
        self.spawn_center = np.asarray(self.spawn_center, dtype=float)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": WORLD_SCHEMA_VERSION,
            "units": {"length": "meters", "angle": "radians"},
            "frame": "ENU",
            "seed": int(self.seed),
            "template": self.template,
            "difficulty": self.difficulty,
            "bounds": [float(v) for v in self.bounds],
            "spawn_center": [float(self.spawn_center[0]), float(self.spawn_center[1])],
            "victims": [[float(v[0]), float(v[1])] for v in self.victims],
            "obstacles": [o.to_dict() for o in self.obstacles],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "WorldSpec":
        version = d.get("schema_version")
        if version != WORLD_SCHEMA_VERSION:
            raise ValueError(f"unsupported world schema_version: {version!r}")
        return cls(
            bounds=tuple(d["bounds"]),
            obstacles=[Obstacle.from_dict(o) for o in d["obstacles"]],
            victims=[np.array(v, dtype=float) for v in d["victims"]],
            spawn_center=np.array(d["spawn_center"], dtype=float),
            seed=int(d["seed"]),
            template=d.get("template", "Mixed"),
            difficulty=d.get("difficulty", "Easy"),
        )

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "WorldSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class GroundTruthGrid:
    """Rasterized ground truth: 1 = occupied (inflated obstacle), 0 = free."""

    occupied: np.ndarray
    origin: tuple[float, float]
    resolution: float
    inflation: float = 0.0

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    def world_to_cell(self, xy) -> tuple[int, int]:
        """(row, col) of the cell containing a world point."""
        col = int(math.floor((float(xy[0]) - self.origin[0]) / self.resolution))
        row = int(math.floor((float(xy[1]) - self.origin[1]) / self.resolution))
        return row, col

    def cell_center(self, row: int, col: int) -> np.ndarray:
        return np.array([
            self.origin[0] + (col + 0.5) * self.resolution,
            self.origin[1] + (row + 0.5) * self.resolution,
        ])

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width


def rasterize(world: WorldSpec, resolution: float = DEFAULT_RESOLUTION,
              inflation: float = DEFAULT_INFLATION) -> GroundTruthGrid:
    """Rasterize a world: a cell is occupied iff its center lies within
    `inflation` of any obstacle rectangle."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    xmin, ymin, xmax, ymax = world.bounds
    width = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    height = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    occupied = np.zeros((height, width), dtype=np.uint8)

    xs = xmin + (np.arange(width) + 0.5) * resolution
    ys = ymin + (np.arange(height) + 0.5) * resolution
    for obs in world.obstacles:
        # only test cells inside the obstacle's inflated AABB
        corners = geometry.rect_corners(obs.center, obs.size, obs.yaw)
        pad = inflation + resolution
        c0 = max(0, int((corners[:, 0].min() - pad - xmin) / resolution))
        c1 = min(width, int((corners[:, 0].max() + pad - xmin) / resolution) + 1)
        r0 = max(0, int((corners[:, 1].min() - pad - ymin) / resolution))
        r1 = min(height, int((corners[:, 1].max() + pad - ymin) / resolution) + 1)
        if c0 >= c1 or r0 >= r1:
            continue
        gx, gy = np.meshgrid(xs[c0:c1], ys[r0:r1])
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        mask = geometry.points_in_inflated_rect(pts, obs.center, obs.size,
                                                obs.yaw, inflation)
        block = occupied[r0:r1, c0:c1]
        block |= mask.reshape(block.shape).astype(np.uint8)
    return GroundTruthGrid(occupied, (xmin, ymin), resolution, inflation)


def reachable_mask(truth: GroundTruthGrid, seed_xy) -> np.ndarray:
    """Cells 8-connected to the seed point through free space."""
    free = truth.occupied == 0
    labels, _ = ndimage.label(free, structure=np.ones((3, 3), dtype=int))
    row, col = truth.world_to_cell(seed_xy)
    if not truth.in_bounds(row, col) or not free[row, col]:
        return np.zeros_like(free)
    return labels == labels[row, col]


def victims_reachable(world: WorldSpec, resolution: float = DEFAULT_RESOLUTION,
                      inflation: float = DEFAULT_INFLATION) -> bool:
    truth = rasterize(world, resolution, inflation)
    mask = reachable_mask(truth, world.spawn_center)
    for victim in world.victims:
        row, col = truth.world_to_cell(victim)
        if not truth.in_bounds(row, col) or not mask[row, col]:
            return False
    return True


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _min_obstacle_distance(point, obstacles) -> float:
    if not obstacles:
        return math.inf
    return min(geometry.point_rect_distance(point, o.center, o.size, o.yaw)
               for o in obstacles)


def _inside_bounds(obs: Obstacle, bounds, margin: float = 0.5) -> bool:
    xmin, ymin, xmax, ymax = bounds
    corners = geometry.rect_corners(obs.center, obs.size, obs.yaw)
    return (corners[:, 0].min() > xmin + margin and corners[:, 0].max() < xmax - margin
            and corners[:, 1].min() > ymin + margin and corners[:, 1].max() < ymax - margin)


def _ushape_obstacles(rng: np.random.Generator, anchor_x: float) -> list[Obstacle]:
    """Three walls forming a corridor whose opening faces north (the spawn)."""
    opening = rng.uniform(8.0, 15.0)
    depth = rng.uniform(10.0, 20.0)
    thickness = rng.uniform(1.5, 3.0)
    back_y = rng.uniform(62.0, 80.0)
    cx = anchor_x + rng.uniform(-6.0, 6.0)
    tilt = rng.uniform(-0.26, 0.26)  # keep the opening roughly north-facing

    pivot = np.array([cx, back_y + 0.5 * depth])
    walls = [
        # back wall (east-west) closing the south end
        Obstacle(np.array([cx, back_y]), np.array([opening + 2 * thickness, thickness]), 0.0),
        # arms running north from the back wall
        Obstacle(np.array([cx - 0.5 * opening - 0.5 * thickness, back_y + 0.5 * depth]),
                 np.array([thickness, depth + thickness]), 0.0),
        Obstacle(np.array([cx + 0.5 * opening + 0.5 * thickness, back_y + 0.5 * depth]),
                 np.array([thickness, depth + thickness]), 0.0),
    ]
    c, s = math.cos(tilt), math.sin(tilt)
    rot = np.array([[c, -s], [s, c]])
    for w in walls:
        w.center = pivot + rot @ (w.center - pivot)
        w.yaw += tilt
    return walls


def _line_obstacles(rng: np.random.Generator, anchor_x: float) -> list[Obstacle]:
    """One east-west barrier between spawn (north) and victim (south)."""
    length = rng.uniform(24.0, 48.0)
    thickness = rng.uniform(2.0, 4.0)
    cx = anchor_x + rng.uniform(-8.0, 8.0)
    cy = rng.uniform(62.0, 88.0)
    yaw = rng.uniform(-0.14, 0.14)
    return [Obstacle(np.array([cx, cy]), np.array([length, thickness]), yaw)]


def _sample_clutter(rng: np.random.Generator, difficulty: DifficultyLevel,
                    bounds, spawn, victims, existing) -> list[Obstacle] | None:
    lo, hi = difficulty.obstacle_count_range
    count = int(rng.integers(lo, hi + 1))
    xmin, ymin, xmax, ymax = bounds
    clutter: list[Obstacle] = []
    for _ in range(count):
        placed = False
        for _attempt in range(40):
            size = np.array([rng.uniform(*difficulty.size_range),
                             rng.uniform(*difficulty.size_range)])
            center = np.array([rng.uniform(xmin + 8.0, xmax - 8.0),
                               rng.uniform(ymin + 30.0, ymax - 35.0)])
            yaw = rng.uniform(0.0, 2.0 * math.pi)
            obs = Obstacle(center, size, yaw)
            if not _inside_bounds(obs, bounds):
                continue
            if geometry.point_rect_distance(spawn, center, size, yaw) < SPAWN_CLEAR_RADIUS:
                continue
            if any(geometry.point_rect_distance(v, center, size, yaw) < VICTIM_CLEAR_RADIUS
                   for v in victims):
                continue
            clutter.append(obs)
            placed = True
            break
        if not placed:
            return None
    return clutter


def generate_world(seed: int, difficulty: DifficultyLevel,
                   template: str = "Mixed",
                   bounds=DEFAULT_BOUNDS, n_victims: int = 1) -> WorldSpec:
    """Generate a reproducible world with a reachable victim.

    Rejection-samples obstacle layouts until a flood fill on the rasterized
    ground truth confirms every victim is reachable from the spawn, or
    raises GenerationFailed after MAX_GENERATION_ATTEMPTS tries.
    """
    if template not in TEMPLATES:
        raise ValueError(f"unknown template {template!r}, expected one of {TEMPLATES}")
    rng = np.random.default_rng(seed)
    xmin, ymin, xmax, ymax = bounds
    mid_x = 0.5 * (xmin + xmax)

    for _ in range(MAX_GENERATION_ATTEMPTS):
        spawn = np.array([mid_x + rng.uniform(-8.0, 8.0),
                          ymax - 25.0 + rng.uniform(-3.0, 3.0)])
        victims = [np.array([mid_x + rng.uniform(-12.0, 12.0),
                             ymin + 22.0 + rng.uniform(-4.0, 4.0)])
                   for _ in range(n_victims)]

        chosen = template
        if template == "Mixed":
            chosen = "UShape" if rng.random() < 0.5 else "Line"
        if chosen == "UShape":
            structure = _ushape_obstacles(rng, mid_x)
        else:
            structure = _line_obstacles(rng, mid_x)

        if not all(_inside_bounds(o, bounds) for o in structure):
            continue
        if _min_obstacle_distance(spawn, structure) < SPAWN_CLEAR_RADIUS:
            continue
        if any(_min_obstacle_distance(v, structure) < VICTIM_CLEAR_RADIUS
               for v in victims):
            continue

        clutter = _sample_clutter(rng, difficulty, bounds, spawn, victims, structure)
        if clutter is None:
            continue

        world = WorldSpec(bounds=bounds, obstacles=structure + clutter,
                          victims=victims, spawn_center=spawn, seed=int(seed),
                          template=chosen, difficulty=difficulty.label)
        if victims_reachable(world):
            return world
    raise GenerationFailed(
        f"no reachable layout after {MAX_GENERATION_ATTEMPTS} attempts "
        f"(seed={seed}, difficulty={difficulty.label}, template={template})")
