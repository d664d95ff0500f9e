"""Persistent tri-state occupancy belief for the ground vehicle.

The belief starts fully Unknown and monotonically accumulates knowledge
from reveal footprints (scout) and the local sensing window (onboard).
Occupied cells never revert: worlds are static and knowledge persists
for the whole trial.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .worldgen import GroundTruthGrid

UNKNOWN = np.uint8(0)
FREE = np.uint8(1)
OCCUPIED = np.uint8(2)

# PGM grey levels, map-server style: free white-ish, occupied black, unknown grey
_PGM_LEVELS = {int(FREE): 254, int(UNKNOWN): 205, int(OCCUPIED): 0}


class OutOfBounds(Exception):
    """Cell index outside the belief grid."""


class UnknownPolicy(Enum):
    """How the planner treats Unknown cells."""

    OPTIMISTIC = "optimistic"
    PESSIMISTIC = "pessimistic"


@dataclass
class RevealFootprint:
    """Axis-aligned reveal area around a scout position."""

    center: np.ndarray
    half_extent_x: float
    half_extent_y: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.half_extent_x <= 0 or self.half_extent_y <= 0:
            raise ValueError("footprint half extents must be positive")


_EMPTY_CELLS = (np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64))


@dataclass
class OccupancyBelief:
    origin: tuple[float, float]
    resolution: float
    cells: np.ndarray
    # revision of the update that last changed each cell; drives replan checks
    last_changed: np.ndarray
    revision: int = 0
    # (rows, cols) that became Occupied in the most recent update; lets the
    # simulator test plan corridors without rescanning the whole grid
    last_update_occupied: tuple = _EMPTY_CELLS

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    def world_to_cell(self, xy) -> tuple[int, int]:
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

    def coverage(self) -> float:
        """Fraction of cells that are no longer Unknown."""
        return float(np.count_nonzero(self.cells != UNKNOWN)) / self.cells.size


def new_belief(bounds, resolution: float) -> OccupancyBelief:
    """Fresh all-Unknown belief covering the given bounds."""
    xmin, ymin, xmax, ymax = (float(v) for v in bounds)
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("bounds must be nonempty")
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    width = int(math.ceil((xmax - xmin) / resolution - 1e-9))
    height = int(math.ceil((ymax - ymin) / resolution - 1e-9))
    return OccupancyBelief(
        origin=(xmin, ymin),
        resolution=resolution,
        cells=np.full((height, width), UNKNOWN, dtype=np.uint8),
        last_changed=np.zeros((height, width), dtype=np.int64),
    )


def _footprint_window(belief: OccupancyBelief, footprint: RevealFootprint):
    """Cell index window whose centers lie inside the footprint."""
    res = belief.resolution
    x0, y0 = belief.origin
    cx, cy = footprint.center
    c_lo = int(math.ceil((cx - footprint.half_extent_x - x0) / res - 0.5))
    c_hi = int(math.floor((cx + footprint.half_extent_x - x0) / res - 0.5))
    r_lo = int(math.ceil((cy - footprint.half_extent_y - y0) / res - 0.5))
    r_hi = int(math.floor((cy + footprint.half_extent_y - y0) / res - 0.5))
    c_lo = max(c_lo, 0)
    r_lo = max(r_lo, 0)
    c_hi = min(c_hi, belief.width - 1)
    r_hi = min(r_hi, belief.height - 1)
    if c_lo > c_hi or r_lo > r_hi:
        return None
    return r_lo, r_hi + 1, c_lo, c_hi + 1


def apply_reveal(belief: OccupancyBelief, footprint: RevealFootprint,
                 truth: GroundTruthGrid) -> int:
    """Synchronize every cell whose center lies in the footprint with ground
    truth.  Returns the number of cells that changed; the revision bumps only
    when that count is positive."""
    if (truth.occupied.shape != belief.cells.shape
            or truth.origin != belief.origin
            or truth.resolution != belief.resolution):
        raise ValueError("belief and ground-truth grids must share geometry")
    window = _footprint_window(belief, footprint)
    if window is None:
        belief.last_update_occupied = _EMPTY_CELLS
        return 0
    r0, r1, c0, c1 = window
    sub = belief.cells[r0:r1, c0:c1]
    new_vals = np.where(truth.occupied[r0:r1, c0:c1] != 0, OCCUPIED, FREE)
    changed = sub != new_vals
    count = int(np.count_nonzero(changed))
    if count == 0:
        belief.last_update_occupied = _EMPTY_CELLS
        return 0
    belief.revision += 1
    occ_rows, occ_cols = np.nonzero(changed & (new_vals == OCCUPIED))
    belief.last_update_occupied = (occ_rows + r0, occ_cols + c0)
    sub[changed] = new_vals[changed]
    belief.last_changed[r0:r1, c0:c1][changed] = belief.revision
    return count


def apply_local_window(belief: OccupancyBelief, ego_position, window_extent: float,
                       truth: GroundTruthGrid) -> int:
    """Reveal the square onboard-sensing window centered on the ego vehicle."""
    half = 0.5 * float(window_extent)
    footprint = RevealFootprint(np.asarray(ego_position, dtype=float)[:2], half, half)
    return apply_reveal(belief, footprint, truth)


def reveal_all(belief: OccupancyBelief, truth: GroundTruthGrid) -> int:
    """Synchronize the whole belief with ground truth (the GT setting)."""
    xmin, ymin = belief.origin
    span_x = belief.width * belief.resolution
    span_y = belief.height * belief.resolution
    footprint = RevealFootprint(np.array([xmin + 0.5 * span_x, ymin + 0.5 * span_y]),
                                0.5 * span_x + belief.resolution,
                                0.5 * span_y + belief.resolution)
    return apply_reveal(belief, footprint, truth)


def is_traversable(belief: OccupancyBelief, cell: tuple[int, int],
                   policy: UnknownPolicy = UnknownPolicy.OPTIMISTIC) -> bool:
    row, col = cell
    if not belief.in_bounds(row, col):
        raise OutOfBounds(f"cell {cell} outside {belief.height}x{belief.width} grid")
    value = belief.cells[row, col]
    if value == OCCUPIED:
        return False
    if value == FREE:
        return True
    return policy is UnknownPolicy.OPTIMISTIC


def blocked_mask(belief: OccupancyBelief,
                 policy: UnknownPolicy = UnknownPolicy.OPTIMISTIC) -> np.ndarray:
    """Non-traversable cells as a uint8 mask for the planner core."""
    if policy is UnknownPolicy.OPTIMISTIC:
        return (belief.cells == OCCUPIED).astype(np.uint8)
    return (belief.cells != FREE).astype(np.uint8)


def save_pgm(belief: OccupancyBelief, path) -> None:
    """Export the belief as a binary PGM image plus a JSON geometry sidecar."""
    path = Path(path)
    grey = np.full(belief.cells.shape, _PGM_LEVELS[int(UNKNOWN)], dtype=np.uint8)
    grey[belief.cells == FREE] = _PGM_LEVELS[int(FREE)]
    grey[belief.cells == OCCUPIED] = _PGM_LEVELS[int(OCCUPIED)]
    # image row 0 at the top = northernmost grid row
    grey = np.flipud(grey)
    header = f"P5\n{belief.width} {belief.height}\n255\n".encode("ascii")
    path.write_bytes(header + grey.tobytes())
    sidecar = {
        "origin": [belief.origin[0], belief.origin[1]],
        "resolution": belief.resolution,
        "width": belief.width,
        "height": belief.height,
        "revision": belief.revision,
    }
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n",
                                         encoding="utf-8")
