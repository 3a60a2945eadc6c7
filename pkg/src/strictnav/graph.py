"""Grid-landmark graph over the goal space and the waypoint planner.

Landmarks sit on a square lattice of spacing ``spacing`` clipped to the
goal-space box (both boundary lines included). Directed edges connect node
pairs within ``neighbor_radius`` whose straight segment does not cross a
wall. Edge costs are recomputed lazily at plan time from the current
low-level value estimate:

    cost(v1 -> v2) = 1/2 * [ T(Q(v1, v2)) + T(-d_E(v1, v2)) ]
    T(v) = log_gamma(1 + (1 - gamma) * v)

where d_E is the Euclidean distance. Both terms use the pessimistic-value
convention (a k-step geometric value maps back to exactly k), so costs are
nonnegative. Failure-aware refinement multiplies each edge by
max(1, c_dist * failure_ratio(cell of destination)) before Dijkstra runs.
"""

from __future__ import annotations

import heapq
import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, PlannerError
from .geometry import Point, Rect, point_in_any, segment_crosses_any
from .grid import GridPartition

logger = logging.getLogger(__name__)

# q_fn(from_points (k,2), to_points (k,2)) -> values (k,)
QOracle = Callable[[np.ndarray, np.ndarray], np.ndarray]


def log_steps_term(values: np.ndarray | float, gamma: float, value_floor: float) -> np.ndarray:
    """Map values in the pessimistic convention to expected-step counts.

    Computes log_gamma(1 + (1 - gamma) * v). Values at or below the geometric
    bound (argument <= 0) are clamped to value_floor with a warning; the
    clamped term equals the horizon that defines the floor.
    """
    v = np.asarray(values, dtype=np.float64)
    arg = 1.0 + (1.0 - gamma) * v
    bad = arg <= 0.0
    if np.any(bad):
        logger.warning("clamped %d value(s) below the geometric bound to %.6g", int(np.count_nonzero(bad)), value_floor)
        arg = np.where(bad, 1.0 + (1.0 - gamma) * value_floor, arg)
    return np.log(arg) / math.log(gamma)


def hybrid_edge_cost(
    q_values: np.ndarray | float,
    euclid: np.ndarray | float,
    gamma: float,
    value_floor: float,
    euclid_negated: bool = True,
) -> np.ndarray:
    """Average of the value-based and distance-based step estimates.

    With euclid_negated (default) the distance enters as a negative value,
    matching the convention of the learned term; the alternative reading
    feeds the raw positive distance through the same transform.
    """
    q_term = log_steps_term(q_values, gamma, value_floor)
    e_val = -np.asarray(euclid, dtype=np.float64) if euclid_negated else np.asarray(euclid, dtype=np.float64)
    e_term = log_steps_term(e_val, gamma, value_floor)
    return 0.5 * (q_term + e_term)


def refined_cost(raw_cost: float, ratio_fail: float, c_dist: float) -> float:
    """Failure-aware cost: raw * max(1, c_dist * ratio_fail).

    The multiplier never shrinks an edge; c_dist = 1 disables refinement
    (the ablation path) since ratios never exceed 1.
    """
    if c_dist < 1.0:
        raise ValueError(f"c_dist must be >= 1, got {c_dist}")
    return raw_cost * max(1.0, c_dist * ratio_fail)


@dataclass
class WaypointPath:
    """Ordered waypoints to a subgoal (start excluded, subgoal included)."""

    waypoints: list[Point]
    total_cost: float


class LandmarkGraph:
    """Lattice landmark graph with learned edge costs and Dijkstra planning."""

    def __init__(
        self,
        nodes: np.ndarray,
        bounds: Rect,
        walls: Sequence[Rect],
        spacing: float,
        gamma_low: float,
        horizon: int,
        neighbor_radius: float | None = None,
        euclid_negated: bool = True,
    ):
        if len(nodes) == 0:
            raise ConfigError("landmark graph has no admissible nodes")
        self.nodes = np.asarray(nodes, dtype=np.float64)
        self.bounds = bounds
        self.walls = tuple(walls)
        self.spacing = float(spacing)
        self.gamma_low = float(gamma_low)
        self.horizon = int(horizon)
        # Pessimistic floor: the value of never arriving within the horizon.
        self.value_floor = -(1.0 - gamma_low**horizon) / (1.0 - gamma_low)
        # 1.5 * spacing connects the 8-neighborhood without skipping rows.
        self.neighbor_radius = float(neighbor_radius) if neighbor_radius is not None else 1.5 * self.spacing
        self.euclid_negated = euclid_negated
        self.edge_src, self.edge_dst = self._build_edges()
        self._cached_partition: GridPartition | None = None
        self._cached_node_cells: np.ndarray | None = None

    @classmethod
    def build_grid_landmarks(
        cls,
        bounds: Rect,
        spacing: float,
        walls: Sequence[Rect] = (),
        gamma_low: float = 0.99,
        horizon: int = 600,
        neighbor_radius: float | None = None,
        euclid_negated: bool = True,
    ) -> "LandmarkGraph":
        """Lattice nodes (i * spacing, j * spacing) inside bounds, wall interiors pruned."""
        if spacing <= 0:
            raise ConfigError(f"spacing must be positive, got {spacing}")
        if bounds.width <= 0 or bounds.height <= 0:
            raise ConfigError(f"degenerate bounds {bounds}")
        eps = 1e-9
        i_lo = math.ceil(bounds.x0 / spacing - eps)
        i_hi = math.floor(bounds.x1 / spacing + eps)
        j_lo = math.ceil(bounds.y0 / spacing - eps)
        j_hi = math.floor(bounds.y1 / spacing + eps)
        pts = []
        for j in range(j_lo, j_hi + 1):
            for i in range(i_lo, i_hi + 1):
                p = (i * spacing, j * spacing)
                if point_in_any(p, walls):
                    continue
                pts.append(p)
        if not pts:
            raise ConfigError("no lattice node survives wall pruning")
        return cls(
            np.array(pts), bounds, walls, spacing, gamma_low, horizon,
            neighbor_radius=neighbor_radius, euclid_negated=euclid_negated,
        )

    def _build_edges(self) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.nodes)
        diff = self.nodes[:, None, :] - self.nodes[None, :, :]
        d = np.hypot(diff[..., 0], diff[..., 1])
        src, dst = np.nonzero((d > 0) & (d <= self.neighbor_radius + 1e-9))
        keep = [
            k
            for k in range(len(src))
            if not segment_crosses_any(tuple(self.nodes[src[k]]), tuple(self.nodes[dst[k]]), self.walls)
        ]
        return src[keep].astype(np.int64), dst[keep].astype(np.int64)

    # ---- costs ----

    def edge_cost(self, v1: Point, v2: Point, q_fn: QOracle) -> float:
        """Raw (unrefined) cost of traversing v1 -> v2 under the current values."""
        a = np.asarray([v1], dtype=np.float64)
        b = np.asarray([v2], dtype=np.float64)
        q = np.asarray(q_fn(a, b), dtype=np.float64)
        d_e = np.hypot(*(b - a).T)
        return float(
            hybrid_edge_cost(q, d_e, self.gamma_low, self.value_floor, self.euclid_negated)[0]
        )

    def refined_edge_cost(
        self, v1: Point, v2: Point, q_fn: QOracle, partition: GridPartition, c_dist: float
    ) -> float:
        raw = self.edge_cost(v1, v2, q_fn)
        return refined_cost(raw, partition.failure_ratio(partition.cell_of(v2)), c_dist)

    def _node_cells(self, partition: GridPartition) -> np.ndarray:
        if self._cached_partition is not partition:
            self._cached_node_cells = np.array(
                [partition.cell_of(tuple(p)) for p in self.nodes], dtype=np.int64
            )
            self._cached_partition = partition
        return self._cached_node_cells

    def _bulk_costs(
        self,
        src_pts: np.ndarray,
        dst_pts: np.ndarray,
        dst_cells: np.ndarray,
        q_fn: QOracle,
        ratios: np.ndarray,
        c_dist: float,
    ) -> np.ndarray:
        q = np.asarray(q_fn(src_pts, dst_pts), dtype=np.float64)
        d_e = np.hypot(*(dst_pts - src_pts).T)
        raw = hybrid_edge_cost(q, d_e, self.gamma_low, self.value_floor, self.euclid_negated)
        mult = np.maximum(1.0, c_dist * ratios[dst_cells])
        return raw * mult

    # ---- planning ----

    def plan_path(
        self,
        start: Point,
        subgoal: Point,
        partition: GridPartition,
        c_dist: float,
        q_fn: QOracle,
    ) -> WaypointPath:
        """Dijkstra over refined costs from start to subgoal.

        Start and subgoal are attached as temporary nodes to every graph node
        within neighbor_radius (wall-clear segments only). The returned
        waypoint list excludes the start and ends with the subgoal. An
        unreachable subgoal yields the path to the nearest reachable node
        with the subgoal appended, so that strict execution can still
        register the failure.

        Raises PlannerError when the start cannot be attached to anything.
        """
        n = len(self.nodes)
        ratios = partition.failure_ratios()
        node_cells = self._node_cells(partition)
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n + 2)]
        start_id, goal_id = n, n + 1

        costs = self._bulk_costs(
            self.nodes[self.edge_src], self.nodes[self.edge_dst],
            node_cells[self.edge_dst], q_fn, ratios, c_dist,
        )
        for k in range(len(self.edge_src)):
            adj[self.edge_src[k]].append((int(self.edge_dst[k]), float(costs[k])))

        start_arr = np.asarray(start, dtype=np.float64)
        goal_arr = np.asarray(subgoal, dtype=np.float64)
        subgoal_cell = partition.cell_of(subgoal)

        near_start = self._attachable(start_arr)
        if len(near_start):
            c = self._bulk_costs(
                np.repeat(start_arr[None, :], len(near_start), axis=0),
                self.nodes[near_start], node_cells[near_start], q_fn, ratios, c_dist,
            )
            for idx, cost in zip(near_start, c):
                adj[start_id].append((int(idx), float(cost)))

        near_goal = self._attachable(goal_arr)
        if len(near_goal):
            c = self._bulk_costs(
                self.nodes[near_goal],
                np.repeat(goal_arr[None, :], len(near_goal), axis=0),
                np.full(len(near_goal), subgoal_cell), q_fn, ratios, c_dist,
            )
            for idx, cost in zip(near_goal, c):
                adj[int(idx)].append((goal_id, float(cost)))

        d_sg = float(np.hypot(*(goal_arr - start_arr)))
        if d_sg <= self.neighbor_radius and not segment_crosses_any(start, subgoal, self.walls):
            c = self._bulk_costs(
                start_arr[None, :], goal_arr[None, :],
                np.array([subgoal_cell]), q_fn, ratios, c_dist,
            )
            adj[start_id].append((goal_id, float(c[0])))

        if not adj[start_id]:
            raise PlannerError(f"start {start} attaches to no landmark within {self.neighbor_radius}")

        dist, prev = self._dijkstra(adj, start_id)

        if math.isfinite(dist[goal_id]):
            path_ids = self._backtrack(prev, goal_id, start_id)
            waypoints = [tuple(self.nodes[i]) if i < n else subgoal for i in path_ids]
            return WaypointPath(waypoints, float(dist[goal_id]))

        # Fallback: route to the reachable node nearest the subgoal, then
        # append the subgoal so execution can attempt (and likely fail) it.
        reachable = [i for i in range(n) if math.isfinite(dist[i])]
        if not reachable:
            raise PlannerError("no landmark reachable from start")
        node_d = np.hypot(*(self.nodes[reachable] - goal_arr).T)
        best = reachable[int(np.argmin(node_d))]
        path_ids = self._backtrack(prev, best, start_id)
        waypoints = [tuple(self.nodes[i]) for i in path_ids]
        tail = self._bulk_costs(
            self.nodes[best][None, :], goal_arr[None, :],
            np.array([subgoal_cell]), q_fn, ratios, c_dist,
        )
        waypoints.append(subgoal)
        return WaypointPath(waypoints, float(dist[best] + tail[0]))

    def _attachable(self, p: np.ndarray) -> np.ndarray:
        d = np.hypot(*(self.nodes - p).T)
        cand = np.flatnonzero(d <= self.neighbor_radius + 1e-9)
        pt = (float(p[0]), float(p[1]))
        return np.array(
            [i for i in cand if not segment_crosses_any(pt, tuple(self.nodes[i]), self.walls)],
            dtype=np.int64,
        )

    @staticmethod
    def _dijkstra(adj: list[list[tuple[int, float]]], source: int) -> tuple[list[float], list[int]]:
        n = len(adj)
        dist = [math.inf] * n
        prev = [-1] * n
        dist[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue
            for v, w in adj[u]:
                nd = d + w
                if nd < dist[v]:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(heap, (nd, v))
        return dist, prev

    @staticmethod
    def _backtrack(prev: list[int], target: int, source: int) -> list[int]:
        ids = []
        cur = target
        while cur != source:
            ids.append(cur)
            cur = prev[cur]
        ids.reverse()
        return ids

    # ---- export ----

    def node_rows(self) -> list[tuple]:
        return [(i, float(p[0]), float(p[1])) for i, p in enumerate(self.nodes)]

    def edge_rows(self, q_fn: QOracle, partition: GridPartition, c_dist: float) -> list[tuple]:
        """Rows (src, dst, raw_cost, refined_cost) under the current values."""
        ratios = partition.failure_ratios()
        node_cells = self._node_cells(partition)
        src_pts = self.nodes[self.edge_src]
        dst_pts = self.nodes[self.edge_dst]
        q = np.asarray(q_fn(src_pts, dst_pts), dtype=np.float64)
        d_e = np.hypot(*(dst_pts - src_pts).T)
        raw = hybrid_edge_cost(q, d_e, self.gamma_low, self.value_floor, self.euclid_negated)
        mult = np.maximum(1.0, c_dist * ratios[node_cells[self.edge_dst]])
        return [
            (int(s), int(t), float(r), float(r * m))
            for s, t, r, m in zip(self.edge_src, self.edge_dst, raw, mult)
        ]
