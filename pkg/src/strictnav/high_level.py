"""High-level subgoal selection and strict subgoal execution.

The high-level policy is epsilon-greedy over a value table keyed by
(partition cell of the position, bucketed episode-time fraction, task
flags), with candidate subgoals being the landmark nodes plus the task goal
point(s). The greedy branch takes the argmax candidate (ties uniform); the
random branch samples a uniform point in free space, so exploration is not
bound to the lattice.

A separate exploration policy mixes three branches with probability 1/3
each: the task goal, the greedy candidate, and a uniform point inside the
least-visited grid cell.

Execution is strict: a subgoal attempt gets unlimited steps, but the episode
ends immediately (zero reward for the attempt) if the subgoal is not reached
within distance ``lam``. When a failed attempt did reach at least one
planned waypoint, a relabeled success record targeted at the last reached
waypoint is emitted alongside the failure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PlannerError
from .geometry import Point, Rect, dist
from .grid import GridPartition
from .low_level import ACTIONS, LowLearner, low_reward
from .mazes import EnvState, PointMazeEnv, phi, sample_free_point
from .replay import LowReplay


@dataclass(frozen=True)
class AugmentedState:
    """Position cell plus exact episode-time fraction and task flags."""

    position_cell: int
    time_fraction: float
    task_flags: tuple[int, ...]


@dataclass(frozen=True)
class HighTransition:
    state: AugmentedState
    goal: Point
    subgoal: Point
    reward: float
    next_state: AugmentedState
    success: bool


class StuckDetector:
    """Flags a trajectory as stuck when the last ``window`` positions fit in
    a box of diagonal below ``motion_epsilon``."""

    def __init__(self, window: int = 500, motion_epsilon: float = 0.05):
        self.window = int(window)
        self.motion_epsilon = float(motion_epsilon)
        self.ring = np.zeros((self.window, 2), dtype=np.float64)
        self.count = 0
        self.ptr = 0
        self._last: Point | None = None
        self._moved = False

    def reset(self) -> None:
        self.count = 0
        self.ptr = 0
        self._last = None
        self._moved = False

    def push(self, pos: Point) -> None:
        self.ring[self.ptr] = pos
        self.ptr = (self.ptr + 1) % self.window
        self.count += 1
        self._moved = (
            self._last is not None
            and math.hypot(pos[0] - self._last[0], pos[1] - self._last[1]) >= 0.5 * self.motion_epsilon
        )
        self._last = pos

    def stuck(self) -> bool:
        if self.count < self.window:
            return False
        if self._moved:
            return False
        span_x = float(self.ring[:, 0].max() - self.ring[:, 0].min())
        span_y = float(self.ring[:, 1].max() - self.ring[:, 1].min())
        return math.hypot(span_x, span_y) < self.motion_epsilon


def next_decision_time(t_prev: int, k_prev: int) -> int:
    """Decision times chain additively: each decision starts where the
    previous attempt ended."""
    return t_prev + k_prev


class HighPolicy:
    """Value table over (cell, time bucket, flags) x candidate subgoals."""

    ROW_WIDTH = 10  # cell, tb, flags, cand, reward, ncell, ntb, nflags, terminal, success

    def __init__(
        self,
        candidates: np.ndarray,
        n_cells: int,
        n_flags: int,
        bounds: Rect,
        walls,
        gamma: float = 0.4,
        lr: float = 0.2,
        tau: float = 0.005,
        twin: bool = True,
        time_buckets: int = 10,
    ):
        self.candidates = np.asarray(candidates, dtype=np.float64)
        self.n_candidates = len(self.candidates)
        self.n_cells = int(n_cells)
        self.n_flags = int(n_flags)
        self.bounds = bounds
        self.walls = tuple(walls)
        self.gamma = float(gamma)
        self.lr = float(lr)
        self.tau = float(tau)
        self.twin = twin
        self.time_buckets = int(time_buckets)
        shape = (self.n_cells, self.time_buckets, 2**self.n_flags, self.n_candidates)
        self.q1 = np.zeros(shape, dtype=np.float64)
        self.q2 = np.zeros(shape, dtype=np.float64)
        self.t1 = np.zeros(shape, dtype=np.float64)
        self.t2 = np.zeros(shape, dtype=np.float64)

    # ---- keys ----

    def time_bucket(self, time_fraction: float) -> int:
        return min(self.time_buckets - 1, int(time_fraction * self.time_buckets))

    def flags_index(self, flags: tuple[int, ...]) -> int:
        out = 0
        for i, f in enumerate(flags):
            out |= int(bool(f)) << i
        return out

    def key(self, aug: AugmentedState) -> tuple[int, int, int]:
        return (aug.position_cell, self.time_bucket(aug.time_fraction), self.flags_index(aug.task_flags))

    def snap_index(self, subgoal: Point) -> int:
        """Nearest candidate index; continuous subgoals train their closest
        candidate (reach tolerance and lattice spacing make them neighbors)."""
        d = np.hypot(self.candidates[:, 0] - subgoal[0], self.candidates[:, 1] - subgoal[1])
        return int(np.argmin(d))

    # ---- selection ----

    def greedy_index(self, aug: AugmentedState, rng: np.random.Generator) -> int:
        c, tb, f = self.key(aug)
        vals = self.q1[c, tb, f]
        best = vals.max()
        ties = np.flatnonzero(vals >= best)
        return int(ties[rng.integers(len(ties))])

    def greedy_subgoal(self, aug: AugmentedState, rng: np.random.Generator) -> Point:
        i = self.greedy_index(aug, rng)
        return (float(self.candidates[i, 0]), float(self.candidates[i, 1]))

    def select_subgoal(self, aug: AugmentedState, epsilon: float, rng: np.random.Generator) -> tuple[Point, str]:
        """Epsilon-greedy: greedy candidate, or a uniform free-space point."""
        if rng.random() < epsilon:
            return sample_free_point(self.bounds, self.walls, rng), "random"
        return self.greedy_subgoal(aug, rng), "greedy"

    def select_subgoal_exploration(
        self,
        aug: AugmentedState,
        goal: Point,
        partition: GridPartition,
        rng: np.random.Generator,
        branches: tuple[str, ...] = ("goal", "greedy", "novel"),
    ) -> tuple[Point, str]:
        """Uniform mixture over the configured exploration branches."""
        branch = branches[rng.integers(len(branches))]
        if branch == "goal":
            return goal, "goal"
        if branch == "greedy":
            return self.greedy_subgoal(aug, rng), "greedy"
        m = partition.novel_cell(rng)
        return partition.sample_point_in_cell(m, rng), "novel"

    # ---- learning ----

    def encode(self, tr: HighTransition) -> np.ndarray:
        c, tb, f = self.key(tr.state)
        nc, ntb, nf = self.key(tr.next_state)
        terminal = tr.next_state.time_fraction >= 1.0 - 1e-12 or nf == 2**self.n_flags - 1
        return np.array(
            [c, tb, f, self.snap_index(tr.subgoal), tr.reward, nc, ntb, nf, float(terminal), float(tr.success)],
            dtype=np.float64,
        )

    def update(self, rows: np.ndarray) -> None:
        """TD step toward r + gamma * max over candidates of the target value
        (zero bootstrap at terminal records)."""
        if len(rows) == 0:
            raise ValueError("empty batch")
        c = rows[:, 0].astype(np.int64)
        tb = rows[:, 1].astype(np.int64)
        f = rows[:, 2].astype(np.int64)
        cand = rows[:, 3].astype(np.int64)
        r = rows[:, 4]
        nc = rows[:, 5].astype(np.int64)
        ntb = rows[:, 6].astype(np.int64)
        nf = rows[:, 7].astype(np.int64)
        terminal = rows[:, 8]

        tmin = np.minimum(self.t1, self.t2) if self.twin else self.t1
        next_v = tmin[nc, ntb, nf].max(axis=1)
        target = r + self.gamma * next_v * (1.0 - terminal)

        if self.twin:
            half = len(rows) // 2
            self._apply(self.q1, c[:half], tb[:half], f[:half], cand[:half], target[:half])
            self._apply(self.q2, c[half:], tb[half:], f[half:], cand[half:], target[half:])
        else:
            self._apply(self.q1, c, tb, f, cand, target)
        self.t1 += self.tau * (self.q1 - self.t1)
        if self.twin:
            self.t2 += self.tau * (self.q2 - self.t2)

    def _apply(self, table, c, tb, f, cand, target) -> None:
        if len(c) == 0:
            return
        idx = (c, tb, f, cand)
        np.add.at(table, idx, self.lr * (target - table[idx]))

    def state_dict(self) -> dict:
        return {"q1": self.q1.copy(), "q2": self.q2.copy(), "t1": self.t1.copy(), "t2": self.t2.copy()}

    def load_state_dict(self, state: dict) -> None:
        self.q1[:] = state["q1"]
        self.q2[:] = state["q2"]
        self.t1[:] = state["t1"]
        self.t2[:] = state["t2"]


@dataclass
class AttemptOutcome:
    """Everything one subgoal attempt produced."""

    transition: HighTransition
    her_transition: HighTransition | None
    episode_continues: bool
    final_state: EnvState
    steps: int
    reward_sum: float
    planner_failed: bool
    planned_waypoints: int
    stuck: bool


def execute_subgoal(
    env: PointMazeEnv,
    state: EnvState,
    goal: Point,
    subgoal: Point,
    planner,
    low: LowLearner,
    partition: GridPartition,
    rng: np.random.Generator,
    lam: float,
    explore_noise: float = 0.0,
    low_buffer: LowReplay | None = None,
    visited_cells: set | None = None,
    stuck_detector: StuckDetector | None = None,
    trajectory_log: list | None = None,
    fls_k: int | None = None,
) -> AttemptOutcome:
    """Roll out the low-level controller toward ``subgoal`` until resolution.

    ``planner`` maps (start, subgoal) to a WaypointPath; on PlannerError the
    attempt proceeds with the subgoal as the single waypoint. The rollout
    follows waypoints in order, advancing whenever the current one is inside
    the controller's waypoint radius, and never regresses.

    Strict mode (default): the attempt succeeds when the position comes
    within ``lam`` of the subgoal (episode continues); it fails when the
    horizon is exhausted or the stuck detector fires, which terminates the
    episode with a zero-reward record whose next state carries time fraction
    1. A failure that reached at least one waypoint also yields a relabeled
    success record targeted at the last reached waypoint, carrying the
    rewards accrued up to that reach.

    Fixed-step mode (``fls_k``): the attempt runs exactly ``fls_k`` steps
    (or to episode end) with no termination on failure; the record keeps the
    accrued reward either way.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    horizon = env.config.horizon

    def augment(s: EnvState, forced_tf: float | None = None) -> AugmentedState:
        tf = forced_tf if forced_tf is not None else s.t / horizon
        return AugmentedState(partition.cell_of(phi(s)), tf, s.key_flags)

    start_aug = augment(state)
    planner_failed = False
    try:
        path = planner(phi(state), subgoal)
        waypoints = list(path.waypoints)
    except PlannerError:
        planner_failed = True
        waypoints = [subgoal]
    if not waypoints:
        waypoints = [subgoal]

    detector = stuck_detector if stuck_detector is not None else StuckDetector()
    detector.reset()
    detector.push(phi(state))

    i = 0
    steps = 0
    reward_sum = 0.0
    env_done = False
    stuck = False
    # Last reached waypoint: (point, augmented state at reach, reward so far).
    reached: tuple[Point, AugmentedState, float] | None = None

    def note_visit(s: EnvState) -> None:
        if visited_cells is not None:
            visited_cells.add(partition.cell_of(phi(s)))

    note_visit(state)

    while True:
        pos = phi(state)
        if fls_k is None and dist(pos, subgoal) < lam:
            transition = HighTransition(start_aug, goal, subgoal, reward_sum, augment(state), True)
            continues = not env_done and state.t < horizon
            return AttemptOutcome(
                transition, None, continues, state, steps, reward_sum,
                planner_failed, len(waypoints), False,
            )
        if fls_k is not None and (steps >= fls_k or env_done or state.t >= horizon):
            success = dist(pos, subgoal) < lam
            transition = HighTransition(start_aug, goal, subgoal, reward_sum, augment(state), success)
            continues = not env_done and state.t < horizon
            return AttemptOutcome(
                transition, None, continues, state, steps, reward_sum,
                planner_failed, len(waypoints), False,
            )
        if fls_k is None and (env_done or state.t >= horizon or stuck):
            terminal_aug = augment(state, forced_tf=1.0)
            transition = HighTransition(start_aug, goal, subgoal, 0.0, terminal_aug, False)
            her = None
            if reached is not None:
                wp, wp_aug, wp_reward = reached
                her = HighTransition(start_aug, goal, wp, wp_reward, wp_aug, True)
            return AttemptOutcome(
                transition, her, False, state, steps, reward_sum,
                planner_failed, len(waypoints), stuck,
            )

        while i < len(waypoints) - 1 and dist(pos, waypoints[i]) < low.waypoint_radius:
            reached = (waypoints[i], augment(state), reward_sum)
            i += 1
        wp = waypoints[i]

        a_idx = low.act_index(pos, wp, explore_noise, rng)
        result = env.step(state, ACTIONS[a_idx] * low.action_scale)
        new_pos = phi(result.next_state)
        r_low = low_reward(new_pos, wp, low.waypoint_radius)
        if low_buffer is not None:
            low_buffer.push(
                low.cell_of(pos), wp, a_idx, r_low, low.cell_of(new_pos), r_low == 0.0
            )
        reward_sum += result.reward
        steps += 1
        state = result.next_state
        env_done = result.done
        detector.push(new_pos)
        note_visit(state)
        if trajectory_log is not None:
            trajectory_log.append(
                (state.t, new_pos[0], new_pos[1], result.reward, "".join(str(b) for b in state.key_flags))
            )
        if i < len(waypoints) - 1 and dist(new_pos, waypoints[i]) < low.waypoint_radius:
            reached = (waypoints[i], augment(state), reward_sum)
            i += 1
        if fls_k is None:
            stuck = detector.stuck()
