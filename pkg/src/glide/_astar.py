"""Numba-compiled A* over an 8-connected grid with heading-augmented states.

States are (row, col, heading) where heading is the direction of the last
move (one of eight 45-degree sectors).  Successors may change heading by at
most 45 degrees per step, approximating a steering-rate-limited vehicle.
Edge cost is the Euclidean distance between cell centers; the search
heuristic adds an orientation penalty scaled by `orientation_weight`.

Tie-breaking is fixed (smaller heading index, then row-major cell order)
so searches are bit-reproducible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# heading index -> (d_row, d_col); heading angle = index * 45 deg CCW from +x
DROW = np.array([0, 1, 1, 1, 0, -1, -1, -1], dtype=np.int64)
DCOL = np.array([1, 1, 0, -1, -1, -1, 0, 1], dtype=np.int64)

_SQRT2 = 1.4142135623730951
_PI = 3.141592653589793


@njit(cache=True, inline="always")
def _heap_less(hf, ht, i, j):
    if hf[i] != hf[j]:
        return hf[i] < hf[j]
    return ht[i] < ht[j]


@njit(cache=True)
def _heap_push(hf, ht, hs, size, f, tie, sid):
    i = size
    hf[i] = f
    ht[i] = tie
    hs[i] = sid
    while i > 0:
        p = (i - 1) // 2
        if _heap_less(hf, ht, i, p):
            hf[i], hf[p] = hf[p], hf[i]
            ht[i], ht[p] = ht[p], ht[i]
            hs[i], hs[p] = hs[p], hs[i]
            i = p
        else:
            break
    return size + 1


@njit(cache=True)
def _heap_pop(hf, ht, hs, size):
    f = hf[0]
    sid = hs[0]
    size -= 1
    hf[0] = hf[size]
    ht[0] = ht[size]
    hs[0] = hs[size]
    i = 0
    while True:
        left = 2 * i + 1
        right = left + 1
        smallest = i
        if left < size and _heap_less(hf, ht, left, smallest):
            smallest = left
        if right < size and _heap_less(hf, ht, right, smallest):
            smallest = right
        if smallest == i:
            break
        hf[i], hf[smallest] = hf[smallest], hf[i]
        ht[i], ht[smallest] = ht[smallest], ht[i]
        hs[i], hs[smallest] = hs[smallest], hs[i]
        i = smallest
    return f, sid, size


@njit(cache=True, nogil=True)
def astar_core(blocked, start_r, start_c, start_h, goal_r, goal_c,
               resolution, orientation_weight, g, g_ver, closed_ver, parent,
               version):
    """Search from (start_r, start_c, start_h) to any heading at the goal cell.

    The g/g_ver/closed_ver/parent work arrays are reusable scratch space
    (version-stamped, so callers avoid re-zeroing them); entries are valid
    only when their version stamp matches `version`.  Returns (found, cost,
    path) where path is an (N, 2) array of (row, col) cells from start to
    goal inclusive.
    """
    height, width = blocked.shape
    n_cells = height * width

    cap = 1 << 15
    hf = np.empty(cap)
    ht = np.empty(cap, dtype=np.int64)
    hs = np.empty(cap, dtype=np.int64)
    size = 0

    start_sid = (start_r * width + start_c) * 8 + start_h
    g[start_sid] = 0.0
    g_ver[start_sid] = version
    parent[start_sid] = -1
    size = _heap_push(hf, ht, hs, size, 0.0, 0, start_sid)

    goal_sid = -1
    while size > 0:
        _, sid, size = _heap_pop(hf, ht, hs, size)
        if closed_ver[sid] == version:
            continue
        closed_ver[sid] = version
        cell = sid // 8
        h0 = sid - cell * 8
        r0 = cell // width
        c0 = cell - r0 * width
        if r0 == goal_r and c0 == goal_c:
            goal_sid = sid
            break
        for dh in range(-1, 2):
            h2 = (h0 + dh) % 8
            r2 = r0 + DROW[h2]
            c2 = c0 + DCOL[h2]
            if r2 < 0 or r2 >= height or c2 < 0 or c2 >= width:
                continue
            if blocked[r2, c2]:
                continue
            sid2 = (r2 * width + c2) * 8 + h2
            if closed_ver[sid2] == version:
                continue
            step = resolution * (_SQRT2 if (DROW[h2] != 0 and DCOL[h2] != 0) else 1.0)
            g2 = g[sid] + step
            if g_ver[sid2] != version or g2 < g[sid2]:
                g[sid2] = g2
                g_ver[sid2] = version
                parent[sid2] = sid
                dx = (goal_c - c2) * resolution
                dy = (goal_r - r2) * resolution
                dist = (dx * dx + dy * dy) ** 0.5
                hval = dist
                if orientation_weight > 0.0 and dist > 0.0:
                    bearing = np.arctan2(dy, dx)
                    dtheta = bearing - h2 * (_PI / 4.0)
                    dtheta = dtheta % (2.0 * _PI)
                    if dtheta > _PI:
                        dtheta = 2.0 * _PI - dtheta
                    hval += orientation_weight * dtheta / _PI
                if size >= cap - 1:
                    new_cap = cap * 2
                    nhf = np.empty(new_cap)
                    nht = np.empty(new_cap, dtype=np.int64)
                    nhs = np.empty(new_cap, dtype=np.int64)
                    nhf[:size] = hf[:size]
                    nht[:size] = ht[:size]
                    nhs[:size] = hs[:size]
                    hf = nhf
                    ht = nht
                    hs = nhs
                    cap = new_cap
                tie = h2 * n_cells + r2 * width + c2
                size = _heap_push(hf, ht, hs, size, g2 + hval, tie, sid2)

    if goal_sid < 0:
        return False, np.inf, np.empty((0, 2), dtype=np.int64)
    goal_cost = g[goal_sid]

    # reconstruct the cell path from the parent chain
    count = 0
    sid = goal_sid
    while sid >= 0:
        count += 1
        sid = parent[sid]
    path = np.empty((count, 2), dtype=np.int64)
    sid = goal_sid
    i = count - 1
    while sid >= 0:
        cell = sid // 8
        path[i, 0] = cell // width
        path[i, 1] = cell - (cell // width) * width
        sid = parent[sid]
        i -= 1
    return True, goal_cost, path


class Workspace:
    """Reusable version-stamped scratch arrays for one grid shape."""

    def __init__(self, shape: tuple[int, int]):
        n_states = shape[0] * shape[1] * 8
        self.shape = shape
        self.g = np.empty(n_states)
        self.g_ver = np.zeros(n_states, dtype=np.int64)
        self.closed_ver = np.zeros(n_states, dtype=np.int64)
        self.parent = np.empty(n_states, dtype=np.int64)
        self.version = 0


def run_astar(blocked, start_r, start_c, start_h, goal_r, goal_c,
              resolution, orientation_weight, workspace: Workspace | None = None):
    """astar_core with workspace management (fresh scratch when none given)."""
    if workspace is None or workspace.shape != blocked.shape:
        workspace = Workspace(blocked.shape)
    workspace.version += 1
    return astar_core(blocked, start_r, start_c, start_h, goal_r, goal_c,
                      resolution, orientation_weight, workspace.g,
                      workspace.g_ver, workspace.closed_ver, workspace.parent,
                      workspace.version)


def warmup() -> None:
    """Trigger JIT compilation on a tiny grid (cached across processes)."""
    blocked = np.zeros((4, 4), dtype=np.uint8)
    run_astar(blocked, 0, 0, 0, 3, 3, 1.0, 1.0)
