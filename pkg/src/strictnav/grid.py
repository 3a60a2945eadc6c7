"""Grid partition of the 2D goal space with per-cell visit and failure counters.

The goal space is tiled into square cells of side ``cell_size``. Two counters
are kept per cell:

* ``visit_counts[m]`` — number of *episodes* during which the agent's
  projected position entered cell m at least once (incremented once per
  episode at episode close, however many steps were spent there).
* ``fail_counts[m]`` — number of episodes that terminated inside cell m while
  the active subgoal lay in a *different* cell, i.e. the agent failed to exit
  the region. Same-cell failures are not counted by default; a config flag
  enables the all-failures variant for ablation.

The failure ratio ``fail/visit`` feeds path refinement; the visit argmin
drives novelty-directed exploration.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, OutOfBoundsError
from .geometry import Point, Rect, point_in_any


class GridPartition:
    """Tiling of a bounding box into square cells with episode statistics.

    Cell indices are row-major: index = row * n_cols + col, where col grows
    with x and row grows with y. A point exactly on a shared cell boundary
    belongs to the lower-index cell, so ``cell_of`` is a pure function.
    """

    def __init__(
        self,
        bounds: Rect,
        cell_size: float,
        walls: Sequence[Rect] = (),
        count_same_cell_failures: bool = False,
    ):
        if cell_size <= 0:
            raise ConfigError(f"cell_size must be positive, got {cell_size}")
        if bounds.width <= 0 or bounds.height <= 0:
            raise ConfigError(f"degenerate partition bounds {bounds}")
        self.bounds = bounds
        self.cell_size = float(cell_size)
        self.walls = tuple(walls)
        self.count_same_cell_failures = count_same_cell_failures
        # Allow a final partial cell when the span is not an exact multiple.
        self.n_cols = max(1, int(math.ceil(bounds.width / cell_size - 1e-9)))
        self.n_rows = max(1, int(math.ceil(bounds.height / cell_size - 1e-9)))
        self.n_cells = self.n_cols * self.n_rows
        self.visit_counts = np.zeros(self.n_cells, dtype=np.int64)
        self.fail_counts = np.zeros(self.n_cells, dtype=np.int64)
        self._admissible = np.array(
            [not point_in_any(self.cell_center(m), self.walls) for m in range(self.n_cells)],
            dtype=bool,
        )
        if not self._admissible.any():
            raise ConfigError("every cell center is inside a wall; nothing to explore")

    def _axis_index(self, value: float, origin: float, count: int) -> int:
        # ceil(offset / size) - 1 sends boundary points to the lower cell.
        idx = int(math.ceil((value - origin) / self.cell_size)) - 1
        if idx < 0:
            idx = 0
        if idx >= count:
            idx = count - 1
        return idx

    def cell_of(self, p: Point) -> int:
        """Index of the cell containing p. Raises for out-of-bounds points."""
        if not self.bounds.contains(p):
            raise OutOfBoundsError(f"point {p} outside goal-space bounds {self.bounds}")
        col = self._axis_index(p[0], self.bounds.x0, self.n_cols)
        row = self._axis_index(p[1], self.bounds.y0, self.n_rows)
        return row * self.n_cols + col

    def cell_box(self, m: int) -> Rect:
        row, col = divmod(m, self.n_cols)
        x0 = self.bounds.x0 + col * self.cell_size
        y0 = self.bounds.y0 + row * self.cell_size
        return Rect(x0, y0, min(x0 + self.cell_size, self.bounds.x1), min(y0 + self.cell_size, self.bounds.y1))

    def cell_center(self, m: int) -> Point:
        box = self.cell_box(m)
        return (0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1))

    # ---- episode statistics ----

    def record_episode_visits(self, visited_cells: Iterable[int]) -> None:
        """Increment visit counts once per cell visited during the episode."""
        for m in set(visited_cells):
            self.visit_counts[m] += 1

    def record_subgoal_failure(self, terminal_position: Point, subgoal: Point) -> None:
        """Count an episode that ended at terminal_position with subgoal unreached.

        Only counts when the subgoal lies in a different cell than the
        terminal position (a failure to exit the region), unless the
        all-failures ablation flag is set.
        """
        m_term = self.cell_of(terminal_position)
        m_goal = self.cell_of(subgoal)
        if m_term != m_goal or self.count_same_cell_failures:
            self.fail_counts[m_term] += 1

    def failure_ratio(self, m: int) -> float:
        """fail/visit for cell m; 0 for unvisited cells (never penalize unexplored)."""
        visits = self.visit_counts[m]
        if visits == 0:
            return 0.0
        return float(self.fail_counts[m]) / float(visits)

    def failure_ratios(self) -> np.ndarray:
        """Vector of failure ratios for all cells (0 where unvisited)."""
        ratios = np.zeros(self.n_cells, dtype=np.float64)
        mask = self.visit_counts > 0
        ratios[mask] = self.fail_counts[mask] / self.visit_counts[mask]
        return ratios

    # ---- novelty ----

    def admissible_cells(self) -> np.ndarray:
        """Indices of cells whose center is not inside a wall."""
        return np.flatnonzero(self._admissible)

    def novel_cell(self, rng: np.random.Generator) -> int:
        """Least-visited admissible cell; ties broken uniformly at random."""
        candidates = self.admissible_cells()
        counts = self.visit_counts[candidates]
        minima = candidates[counts == counts.min()]
        return int(minima[rng.integers(len(minima))])

    def sample_point_in_cell(self, m: int, rng: np.random.Generator, max_attempts: int = 100) -> Point:
        """Uniform point inside cell m, rejection-sampled out of wall interiors.

        Falls back to the cell center (free by admissibility) after
        max_attempts rejections.
        """
        box = self.cell_box(m)
        for _ in range(max_attempts):
            p = (
                box.x0 + rng.random() * (box.x1 - box.x0),
                box.y0 + rng.random() * (box.y1 - box.y0),
            )
            if not point_in_any(p, self.walls):
                return p
        return self.cell_center(m)

    # ---- snapshots and export ----

    def counter_state(self) -> dict:
        return {
            "visit_counts": self.visit_counts.copy(),
            "fail_counts": self.fail_counts.copy(),
        }

    def restore_counter_state(self, state: dict) -> None:
        self.visit_counts[:] = state["visit_counts"]
        self.fail_counts[:] = state["fail_counts"]

    def coverage_fraction(self) -> float:
        adm = self.admissible_cells()
        return float(np.count_nonzero(self.visit_counts[adm] > 0)) / len(adm)

    def to_csv_rows(self) -> list[tuple]:
        """Rows (m, x_lo, y_lo, visits, fails, ratio) for visitation export."""
        rows = []
        for m in range(self.n_cells):
            box = self.cell_box(m)
            rows.append(
                (m, box.x0, box.y0, int(self.visit_counts[m]), int(self.fail_counts[m]), self.failure_ratio(m))
            )
        return rows
