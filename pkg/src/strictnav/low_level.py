"""Tabular goal-conditioned low-level controller and value function.

The controller steers the point-mass toward the current waypoint under the
sparse -1/0 reward (0 only once the next position is within
``waypoint_radius`` of the waypoint). State is discretized into unit cells;
the waypoint enters the key as a relative cell offset clipped to +/-
``offset_clip`` cells per axis, which gives goal-direction generalization.
Actions are 8 compass directions plus stay.

Learning is TD(0) on twin value tables with min-of-twins bootstrap targets
and Polyak-averaged target tables, the tabular analog of a twin-critic
setup; the actor is the greedy argmax. Never-visited entries sit at the
pessimistic floor (the value of never arriving within the horizon), so the
planner prices unknown edges as expensive and exploration pressure stays on
the exploration policy rather than the graph.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Point, Rect

# E, NE, N, NW, W, SW, S, SE, stay. Unit max-norm steps.
ACTIONS = np.array(
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (0, 0)],
    dtype=np.float64,
)
N_ACTIONS = len(ACTIONS)


def low_reward(next_pos: Point, waypoint: Point, waypoint_radius: float = 0.5) -> float:
    """0 within the waypoint radius (strict), else -1."""
    d = math.hypot(next_pos[0] - waypoint[0], next_pos[1] - waypoint[1])
    return 0.0 if d < waypoint_radius else -1.0


class LowLearner:
    def __init__(
        self,
        bounds: Rect,
        horizon: int,
        gamma: float = 0.99,
        lr: float = 0.5,
        tau: float = 0.005,
        twin: bool = True,
        cell_size: float = 1.0,
        offset_clip: int = 3,
        waypoint_radius: float = 0.5,
        action_scale: float = 1.0,
    ):
        self.bounds = bounds
        self.gamma = float(gamma)
        self.lr = float(lr)
        self.tau = float(tau)
        self.twin = twin
        self.cell_size = float(cell_size)
        self.offset_clip = int(offset_clip)
        self.waypoint_radius = float(waypoint_radius)
        self.action_scale = float(action_scale)
        self.value_min = -1.0 / (1.0 - gamma)
        self.value_floor = -(1.0 - gamma**horizon) / (1.0 - gamma)
        self.nx = max(1, int(math.ceil(bounds.width / cell_size - 1e-9)))
        self.ny = max(1, int(math.ceil(bounds.height / cell_size - 1e-9)))
        span = 2 * self.offset_clip + 1
        shape = (self.nx, self.ny, span, span, N_ACTIONS)
        self.q1 = np.full(shape, self.value_floor, dtype=np.float64)
        self.q2 = np.full(shape, self.value_floor, dtype=np.float64)
        self.t1 = self.q1.copy()
        self.t2 = self.q2.copy()

    # ---- keys ----

    def cell_of(self, p: Point) -> tuple[int, int]:
        ix = min(self.nx - 1, max(0, int((p[0] - self.bounds.x0) / self.cell_size)))
        iy = min(self.ny - 1, max(0, int((p[1] - self.bounds.y0) / self.cell_size)))
        return ix, iy

    def _offset_index(self, cell: tuple[int, int], waypoint: Point) -> tuple[int, int]:
        wx, wy = self.cell_of(waypoint)
        c = self.offset_clip
        ox = min(c, max(-c, wx - cell[0])) + c
        oy = min(c, max(-c, wy - cell[1])) + c
        return ox, oy

    # ---- acting ----

    def act_index(self, pos: Point, waypoint: Point, explore_noise: float, rng: np.random.Generator) -> int:
        """Greedy action index for (pos, waypoint), optionally noise-perturbed.

        Noise is zero-mean Gaussian added to the greedy action vector, then
        snapped back to the nearest discrete action; with zero noise the
        choice is deterministic.
        """
        ix, iy = self.cell_of(pos)
        ox, oy = self._offset_index((ix, iy), waypoint)
        best = int(np.argmax(self.q1[ix, iy, ox, oy]))
        if explore_noise <= 0.0:
            return best
        vec = np.clip(ACTIONS[best] + rng.normal(0.0, explore_noise, 2), -1.0, 1.0)
        d2 = np.sum((ACTIONS - vec) ** 2, axis=1)
        return int(np.argmin(d2))

    def act(self, pos: Point, waypoint: Point, explore_noise: float = 0.0, rng: np.random.Generator | None = None):
        if explore_noise > 0.0 and rng is None:
            raise ValueError("explore_noise > 0 requires an rng")
        idx = self.act_index(pos, waypoint, explore_noise, rng)
        return ACTIONS[idx] * self.action_scale

    # ---- value oracle for the graph ----

    def q_value(self, frm: Point, to: Point) -> float:
        """Best-action value of reaching `to` from the cell containing `frm`."""
        ix, iy = self.cell_of(frm)
        ox, oy = self._offset_index((ix, iy), to)
        vals = np.minimum(self.q1, self.q2) if self.twin else self.q1
        return float(vals[ix, iy, ox, oy].max())

    def q_values_batch(self, frm: np.ndarray, to: np.ndarray) -> np.ndarray:
        frm = np.asarray(frm, dtype=np.float64)
        to = np.asarray(to, dtype=np.float64)
        ix = np.clip(((frm[:, 0] - self.bounds.x0) / self.cell_size).astype(np.int64), 0, self.nx - 1)
        iy = np.clip(((frm[:, 1] - self.bounds.y0) / self.cell_size).astype(np.int64), 0, self.ny - 1)
        wx = np.clip(((to[:, 0] - self.bounds.x0) / self.cell_size).astype(np.int64), 0, self.nx - 1)
        wy = np.clip(((to[:, 1] - self.bounds.y0) / self.cell_size).astype(np.int64), 0, self.ny - 1)
        c = self.offset_clip
        ox = np.clip(wx - ix, -c, c) + c
        oy = np.clip(wy - iy, -c, c) + c
        vals = np.minimum(self.q1, self.q2) if self.twin else self.q1
        return vals[ix, iy, ox, oy].max(axis=1)

    # ---- learning ----

    def update(self, batch: dict) -> None:
        """One TD(0) step per transition in the batch.

        batch arrays: state_cells (B,2) int, waypoints (B,2) float,
        actions (B,) int, rewards (B,), next_cells (B,2) int, dones (B,).
        """
        sc = batch["state_cells"]
        nc = batch["next_cells"]
        wp = batch["waypoints"]
        a = batch["actions"]
        r = batch["rewards"].astype(np.float64)
        done = batch["dones"].astype(np.float64)
        if len(sc) == 0:
            raise ValueError("empty batch")

        c = self.offset_clip
        wx = np.clip(((wp[:, 0] - self.bounds.x0) / self.cell_size).astype(np.int64), 0, self.nx - 1)
        wy = np.clip(((wp[:, 1] - self.bounds.y0) / self.cell_size).astype(np.int64), 0, self.ny - 1)
        ox = np.clip(wx - sc[:, 0], -c, c) + c
        oy = np.clip(wy - sc[:, 1], -c, c) + c
        nox = np.clip(wx - nc[:, 0], -c, c) + c
        noy = np.clip(wy - nc[:, 1], -c, c) + c

        tmin = np.minimum(self.t1, self.t2) if self.twin else self.t1
        next_v = tmin[nc[:, 0], nc[:, 1], nox, noy].max(axis=1)
        target = np.clip(r + self.gamma * next_v * (1.0 - done), self.value_min, 0.0)

        if self.twin:
            half = len(sc) // 2
            self._apply(self.q1, sc[:half], ox[:half], oy[:half], a[:half], target[:half])
            self._apply(self.q2, sc[half:], ox[half:], oy[half:], a[half:], target[half:])
        else:
            self._apply(self.q1, sc, ox, oy, a, target)
        self.t1 += self.tau * (self.q1 - self.t1)
        if self.twin:
            self.t2 += self.tau * (self.q2 - self.t2)

    def _apply(self, table: np.ndarray, sc, ox, oy, a, target) -> None:
        if len(sc) == 0:
            return
        idx = (sc[:, 0], sc[:, 1], ox, oy, a)
        np.add.at(table, idx, self.lr * (target - table[idx]))
        np.clip(table, self.value_min, 0.0, out=table)

    # ---- persistence / export ----

    def state_dict(self) -> dict:
        return {"q1": self.q1.copy(), "q2": self.q2.copy(), "t1": self.t1.copy(), "t2": self.t2.copy()}

    def load_state_dict(self, state: dict) -> None:
        self.q1[:] = state["q1"]
        self.q2[:] = state["q2"]
        self.t1[:] = state["t1"]
        self.t2[:] = state["t2"]

    def heatmap_rows(self, waypoint: Point) -> list[tuple]:
        """Rows (ix, iy, best_value) of the value toward a fixed waypoint."""
        rows = []
        vals = np.minimum(self.q1, self.q2) if self.twin else self.q1
        c = self.offset_clip
        wx, wy = self.cell_of(waypoint)
        for ix in range(self.nx):
            for iy in range(self.ny):
                ox = min(c, max(-c, wx - ix)) + c
                oy = min(c, max(-c, wy - iy)) + c
                rows.append((ix, iy, float(vals[ix, iy, ox, oy].max())))
        return rows
