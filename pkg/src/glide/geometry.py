"""Shared 2D/3D geometry helpers: angles, oriented rectangles, rays, quaternions.

All world coordinates are meters in a local ENU frame (x east, y north,
z up).  Angles are radians, yaw measured counter-clockwise from +x.
Quaternions are (w, x, y, z), scalar first.
"""

from __future__ import annotations

import math

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def angle_diff(a: float, b: float) -> float:
    """Minimal absolute difference between two angles, in [0, pi]."""
    return abs(wrap_angle(a - b))


# ---------------------------------------------------------------------------
# Oriented rectangles (obstacle footprints)
# ---------------------------------------------------------------------------

def rect_corners(center, size, yaw: float) -> np.ndarray:
    """Corners of an oriented rectangle, CCW, shape (4, 2).

    `size` holds the full side lengths (along the rectangle's local x/y).
    """
    cx, cy = float(center[0]), float(center[1])
    hx, hy = 0.5 * float(size[0]), 0.5 * float(size[1])
    c, s = math.cos(yaw), math.sin(yaw)
    local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def point_rect_distance(point, center, size, yaw: float) -> float:
    """Euclidean distance from a point to an oriented rectangle (0 inside)."""
    c, s = math.cos(yaw), math.sin(yaw)
    dx = float(point[0]) - float(center[0])
    dy = float(point[1]) - float(center[1])
    # rotate into the rectangle frame
    lx = c * dx + s * dy
    ly = -s * dx + c * dy
    ex = max(abs(lx) - 0.5 * float(size[0]), 0.0)
    ey = max(abs(ly) - 0.5 * float(size[1]), 0.0)
    return math.hypot(ex, ey)


def points_in_inflated_rect(points: np.ndarray, center, size, yaw: float,
                            inflation: float) -> np.ndarray:
    """Boolean mask of points within `inflation` of an oriented rectangle.

    `points` has shape (N, 2).  Inflation by a disk gives the rounded
    rectangle {p : dist(p, rect) <= inflation}.
    """
    c, s = math.cos(yaw), math.sin(yaw)
    d = points - np.asarray([center[0], center[1]], dtype=float)
    lx = c * d[:, 0] + s * d[:, 1]
    ly = -s * d[:, 0] + c * d[:, 1]
    ex = np.maximum(np.abs(lx) - 0.5 * float(size[0]), 0.0)
    ey = np.maximum(np.abs(ly) - 0.5 * float(size[1]), 0.0)
    return ex * ex + ey * ey <= inflation * inflation


def _segment_segment_distance(p1, p2, q1, q2) -> float:
    """Distance between two 2D segments."""
    def seg_point(a, b, p):
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            return float(np.hypot(*(p - a)))
        t = float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
        return float(np.hypot(*(p - (a + t * ab))))

    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if denom != 0.0:
        r = q1 - p1
        t = (r[0] * d2[1] - r[1] * d2[0]) / denom
        u = (r[0] * d1[1] - r[1] * d1[0]) / denom
        if 0.0 <= t <= 1.0 and 0.0 <= u <= 1.0:
            return 0.0
    return min(
        seg_point(q1, q2, p1), seg_point(q1, q2, p2),
        seg_point(p1, p2, q1), seg_point(p1, p2, q2),
    )


def segment_rect_distance(a, b, center, size, yaw: float) -> float:
    """Distance from segment a-b to an oriented rectangle (0 if intersecting)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    corners = rect_corners(center, size, yaw)
    # endpoint inside the rectangle means overlap
    if point_rect_distance(a, center, size, yaw) == 0.0:
        return 0.0
    if point_rect_distance(b, center, size, yaw) == 0.0:
        return 0.0
    best = math.inf
    for i in range(4):
        q1 = corners[i]
        q2 = corners[(i + 1) % 4]
        best = min(best, _segment_segment_distance(a, b, q1, q2))
    return best


# ---------------------------------------------------------------------------
# Rays and boxes
# ---------------------------------------------------------------------------

def ray_box_exit(origin, direction, xmin: float, ymin: float,
                 xmax: float, ymax: float):
    """Exit point of a 2D ray from inside an axis-aligned box.

    Returns the intersection point with the box boundary along the ray,
    or None when the direction is degenerate (zero vector).
    """
    ox, oy = float(origin[0]), float(origin[1])
    dx, dy = float(direction[0]), float(direction[1])
    if dx == 0.0 and dy == 0.0:
        return None
    t_exit = math.inf
    if dx > 0.0:
        t_exit = min(t_exit, (xmax - ox) / dx)
    elif dx < 0.0:
        t_exit = min(t_exit, (xmin - ox) / dx)
    if dy > 0.0:
        t_exit = min(t_exit, (ymax - oy) / dy)
    elif dy < 0.0:
        t_exit = min(t_exit, (ymin - oy) / dy)
    if not math.isfinite(t_exit) or t_exit < 0.0:
        return None
    return np.array([ox + t_exit * dx, oy + t_exit * dy])


# ---------------------------------------------------------------------------
# Quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q)


def quat_from_euler(roll: float, pitch: float, yaw: float) -> np.ndarray:
    """Quaternion for R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(0.5 * roll), math.sin(0.5 * roll)
    cp, sp = math.cos(0.5 * pitch), math.sin(0.5 * pitch)
    cy, sy = math.cos(0.5 * yaw), math.sin(0.5 * yaw)
    return np.array([
        cy * cp * cr + sy * sp * sr,
        cy * cp * sr - sy * sp * cr,
        cy * sp * cr + sy * cp * sr,
        sy * cp * cr - cy * sp * sr,
    ])


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix (world <- body) for a unit quaternion."""
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_roll_pitch(q) -> tuple[float, float]:
    """Roll and pitch (ZYX convention) extracted from a quaternion."""
    w, x, y, z = quat_normalize(q)
    roll = math.atan2(2.0 * (w * x + y * z), 1.0 - 2.0 * (x * x + y * y))
    sp = 2.0 * (w * y - z * x)
    sp = max(-1.0, min(1.0, sp))
    pitch = math.asin(sp)
    return roll, pitch
