"""2D point-mass maze simulator with walls, slip zones, and sparse task rewards.

Dynamics
--------
- The agent is a point at ``position`` inside an axis-aligned bounding box.
- An action is a 2-vector with max-norm at most ``a_max`` (default 1.0). The
  candidate next position is ``position + action``, resolved against walls
  with an axis-separated slide: the motion component into a wall is cancelled
  at the wall face (minus a small gap), the tangential component survives.
  The sweep is continuous per axis, so thin walls cannot be tunnelled.
- Slip zones are sticky rectangles. While the agent stands inside one, each
  step sticks permanently with the zone's per-step probability: the position
  freezes for the rest of the episode (``stuck_in_slip``). This is the
  controlled stand-in for an agent flipping over or wedging against a wall;
  recovery is impossible and only the episode clock keeps running.
- The episode ends when the task is complete or when ``t`` reaches the
  horizon.

Tasks and rewards (all sparse, granted once per condition per episode)
----------------------------------------------------------------------
- ``single_goal(g)``       -> 1 on first entry within ``success_threshold`` of g.
- ``key_chest(key, g)``    -> 1 on first key touch; 5 on goal touch with the
  key flag set. Goal touches without the key do nothing.
- ``double_key_chest(k1, k2, g)`` -> 1 for key1; 1 for key2 only once key1 is
  held; 5 for the goal only with both keys.
- ``double_goal(g1, g2)``  -> 1 for the first goal touched; 5 when the second
  is reached (task complete).

Key/goal flags toggle 0 -> 1 when their condition is met and never reset
within an episode. Task completion means every flag is set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .geometry import Point, Rect, point_in_any

TASK_KINDS = ("single_goal", "key_chest", "double_key_chest", "double_goal")

# Width of the gap left between the agent and a wall face after a collision.
WALL_GAP = 1e-6


@dataclass(frozen=True)
class TaskSpec:
    """Task kind plus its ordered reference points.

    Points by kind: single_goal (g,), key_chest (key, g),
    double_key_chest (key1, key2, g), double_goal (g1, g2).
    """

    kind: str
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        expected = {"single_goal": 1, "key_chest": 2, "double_key_chest": 3, "double_goal": 2}
        if self.kind not in expected:
            raise ConfigError(f"unknown task kind {self.kind!r}; expected one of {TASK_KINDS}")
        if len(self.points) != expected[self.kind]:
            raise ConfigError(f"task {self.kind} needs {expected[self.kind]} points, got {len(self.points)}")

    @property
    def n_flags(self) -> int:
        return {"single_goal": 1, "key_chest": 2, "double_key_chest": 3, "double_goal": 2}[self.kind]

    @property
    def final_goal(self) -> Point:
        return self.points[-1]


@dataclass(frozen=True)
class EnvConfig:
    """Static maze and task definition."""

    bounds: Rect
    walls: tuple[Rect, ...]
    slip_zones: tuple[tuple[Rect, float], ...]
    start: Point
    task: TaskSpec
    horizon: int
    success_threshold: float = 2.0
    a_max: float = 1.0
    name: str = "custom"

    def validate(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        if self.success_threshold <= 0:
            raise ConfigError("success_threshold must be positive")
        if not (0 < self.a_max):
            raise ConfigError("a_max must be positive")
        for _, p in self.slip_zones:
            if not (0.0 <= p < 1.0) and p != 1.0:
                raise ConfigError(f"slip probability {p} outside [0, 1]")
        for label, pt in [("start", self.start)] + [
            (f"task point {i}", p) for i, p in enumerate(self.task.points)
        ]:
            if not self.bounds.contains(pt):
                raise ConfigError(f"{label} {pt} outside bounds {self.bounds}")
            if point_in_any(pt, self.walls):
                raise ConfigError(f"{label} {pt} lies inside a wall")


@dataclass(frozen=True)
class EnvState:
    """Simulator state at one time step."""

    position: Point
    t: int
    key_flags: tuple[int, ...]
    stuck_in_slip: bool = False


@dataclass(frozen=True)
class StepResult:
    next_state: EnvState
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def phi(state: EnvState) -> Point:
    """Projection of the full state onto the goal space (the position plane)."""
    return state.position


class PointMazeEnv:
    """Walled point-mass maze. Stochastic only through slip-zone draws.

    The environment owns a random generator for slip draws; with the
    generator seeded, ``step`` is a pure function of (state, action, draw
    stream). Arbitrarily many instances can run in parallel since no state
    is shared between them.
    """

    def __init__(self, config: EnvConfig, rng: np.random.Generator | None = None):
        config.validate()
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng()

    def reset(self) -> EnvState:
        return EnvState(self.config.start, 0, (0,) * self.config.task.n_flags, False)

    def step(self, state: EnvState, action) -> StepResult:
        cfg = self.config
        ax, ay = float(action[0]), float(action[1])
        if not (math.isfinite(ax) and math.isfinite(ay)):
            raise ValueError(f"non-finite action {action!r}")
        if max(abs(ax), abs(ay)) > cfg.a_max + 1e-9:
            raise ValueError(f"action {action!r} exceeds max-norm bound {cfg.a_max}")
        if state.t >= cfg.horizon:
            raise ValueError("step() called on a finished episode")

        if state.stuck_in_slip:
            new_pos = state.position
            stuck = True
        else:
            stuck = False
            zone_p = self._slip_probability(state.position)
            if zone_p > 0.0 and self.rng.random() < zone_p:
                new_pos = state.position
                stuck = True
            else:
                new_pos = self._slide(state.position, ax, ay)

        new_flags = self._update_flags(state.key_flags, new_pos)
        reward = self._reward(state.key_flags, new_flags)
        t = state.t + 1
        complete = all(new_flags)
        done = complete or t >= cfg.horizon
        info = {
            "reached_key": self._toggled_key(state.key_flags, new_flags),
            "reached_goal": self._toggled_goal(state.key_flags, new_flags),
            "task_complete": complete,
        }
        return StepResult(EnvState(new_pos, t, new_flags, stuck), reward, done, info)

    # ---- motion ----

    def _slip_probability(self, pos: Point) -> float:
        for rect, p in self.config.slip_zones:
            if rect.contains(pos):
                return p
        return 0.0

    def _slide(self, pos: Point, dx: float, dy: float) -> Point:
        """Axis-separated slide: resolve the x move first, then y at the new x.

        Each axis sweep is continuous (clipped at the first wall face in the
        way), so a full-speed step cannot tunnel through a thin wall. A wall
        blocks an axis only while the orthogonal coordinate is strictly
        inside its span; sliding along a face stays legal.
        """
        x = self._sweep_axis(pos[0], pos[1], dx, axis=0)
        y = self._sweep_axis(pos[1], x, dy, axis=1)
        return (x, y)

    def _sweep_axis(self, coord: float, ortho: float, delta: float, axis: int) -> float:
        b = self.config.bounds
        lo, hi = (b.x0, b.x1) if axis == 0 else (b.y0, b.y1)
        target = coord + delta
        if delta > 0:
            limit = hi
            for w in self.config.walls:
                w_lo, w_hi, o_lo, o_hi = (w.x0, w.x1, w.y0, w.y1) if axis == 0 else (w.y0, w.y1, w.x0, w.x1)
                if o_lo < ortho < o_hi and coord <= w_lo and target > w_lo - WALL_GAP:
                    limit = min(limit, w_lo - WALL_GAP)
            return min(target, limit)
        if delta < 0:
            limit = lo
            for w in self.config.walls:
                w_lo, w_hi, o_lo, o_hi = (w.x0, w.x1, w.y0, w.y1) if axis == 0 else (w.y0, w.y1, w.x0, w.x1)
                if o_lo < ortho < o_hi and coord >= w_hi and target < w_hi + WALL_GAP:
                    limit = max(limit, w_hi + WALL_GAP)
            return max(target, limit)
        return coord

    # ---- task logic ----

    def _near(self, pos: Point, target: Point) -> bool:
        return math.hypot(pos[0] - target[0], pos[1] - target[1]) < self.config.success_threshold

    def _update_flags(self, flags: tuple[int, ...], pos: Point) -> tuple[int, ...]:
        kind = self.config.task.kind
        pts = self.config.task.points
        f = list(flags)
        if kind == "single_goal":
            if not f[0] and self._near(pos, pts[0]):
                f[0] = 1
        elif kind == "key_chest":
            if not f[0] and self._near(pos, pts[0]):
                f[0] = 1
            if f[0] and not f[1] and self._near(pos, pts[1]):
                f[1] = 1
        elif kind == "double_key_chest":
            if not f[0] and self._near(pos, pts[0]):
                f[0] = 1
            if f[0] and not f[1] and self._near(pos, pts[1]):
                f[1] = 1
            if f[0] and f[1] and not f[2] and self._near(pos, pts[2]):
                f[2] = 1
        elif kind == "double_goal":
            for i in (0, 1):
                if not f[i] and self._near(pos, pts[i]):
                    f[i] = 1
        return tuple(f)

    def _reward(self, old: tuple[int, ...], new: tuple[int, ...]) -> float:
        if old == new:
            return 0.0
        kind = self.config.task.kind
        if kind == "single_goal":
            return 1.0
        if all(new):
            return 5.0
        return 1.0

    def _toggled_key(self, old, new) -> bool:
        kind = self.config.task.kind
        if kind in ("key_chest", "double_key_chest"):
            n = self.config.task.n_flags - 1
            return any(o == 0 and v == 1 for o, v in zip(old[:n], new[:n]))
        return False

    def _toggled_goal(self, old, new) -> bool:
        kind = self.config.task.kind
        if kind == "double_goal":
            return any(o == 0 and v == 1 for o, v in zip(old, new))
        return old[-1] == 0 and new[-1] == 1

    def goal_hint(self, state: EnvState) -> Point:
        """The task point the high level should currently treat as g.

        Keys are deliberately not exposed (they must be discovered); only
        double_goal switches targets once the first goal is banked.
        """
        task = self.config.task
        if task.kind == "double_goal" and not state.key_flags[0]:
            return task.points[0]
        if task.kind == "double_goal":
            return task.points[1]
        return task.final_goal


def sample_free_point(
    bounds: Rect, walls: tuple[Rect, ...], rng: np.random.Generator, max_attempts: int = 1000
) -> Point:
    """Uniform sample over the bounding box, rejected out of wall interiors."""
    for _ in range(max_attempts):
        p = (
            bounds.x0 + rng.random() * bounds.width,
            bounds.y0 + rng.random() * bounds.height,
        )
        if not point_in_any(p, walls):
            return p
    raise ConfigError("could not sample a free point; walls cover the space")


# ---- built-in desk-scale mazes ----

BUILTIN_NAMES = (
    "u_maze",
    "pi_maze",
    "complex",
    "bottleneck",
    "double_bottleneck",
    "key_chest",
    "double_key_chest",
    "two_corridor_test",
)


def builtin_env(name: str) -> EnvConfig:
    """Desk-scale maze roster.

    Each map is a scaled-down topological match of a full-size benchmark:
    U-shaped corridor, pi-shaped corridor, serpentine maze, slip-ringed
    bottleneck passages, and key-chest sequencing tasks.
    two_corridor_test is a diagnostic map with one short risky corridor and
    one long safe corridor for exercising failure-aware rerouting.
    """
    if name == "u_maze":
        return EnvConfig(
            bounds=Rect(0, 0, 20, 20),
            walls=(Rect(0, 8, 12, 12),),
            slip_zones=(),
            start=(2.0, 2.0),
            task=TaskSpec("single_goal", ((2.0, 16.0),)),
            horizon=600,
            name=name,
        )
    if name == "pi_maze":
        return EnvConfig(
            bounds=Rect(0, 0, 24, 24),
            walls=(Rect(8, 0, 16, 16),),
            slip_zones=(),
            start=(4.0, 2.0),
            task=TaskSpec("single_goal", ((20.0, 2.0),)),
            horizon=1000,
            name=name,
        )
    if name == "complex":
        return EnvConfig(
            bounds=Rect(0, 0, 28, 28),
            walls=(Rect(0, 8, 20, 10), Rect(8, 18, 28, 20)),
            slip_zones=(),
            start=(2.0, 2.0),
            task=TaskSpec("single_goal", ((2.0, 26.0),)),
            horizon=2000,
            name=name,
        )
    if name == "bottleneck":
        # Short passage at x in [4, 6] ringed by a sticky zone; safe detour
        # passage at x in [16, 18].
        return EnvConfig(
            bounds=Rect(0, 0, 20, 20),
            walls=(Rect(0, 8, 4, 10), Rect(6, 8, 16, 10), Rect(18, 8, 20, 10)),
            slip_zones=((Rect(3.5, 7.5, 6.5, 10.5), 0.3),),
            start=(2.0, 2.0),
            task=TaskSpec("single_goal", ((2.0, 16.0),)),
            horizon=600,
            name=name,
        )
    if name == "double_bottleneck":
        return EnvConfig(
            bounds=Rect(0, 0, 20, 28),
            walls=(
                Rect(0, 8, 4, 10), Rect(6, 8, 16, 10), Rect(18, 8, 20, 10),
                Rect(0, 18, 2, 20), Rect(4, 18, 14, 20), Rect(16, 18, 20, 20),
            ),
            slip_zones=(
                (Rect(3.5, 7.5, 6.5, 10.5), 0.3),
                (Rect(13.5, 17.5, 16.5, 20.5), 0.3),
            ),
            start=(2.0, 2.0),
            task=TaskSpec("single_goal", ((16.0, 26.0),)),
            horizon=1200,
            name=name,
        )
    if name == "key_chest":
        return EnvConfig(
            bounds=Rect(0, 0, 24, 24),
            walls=(Rect(0, 7, 16, 9), Rect(8, 15, 24, 17)),
            slip_zones=(),
            start=(2.0, 2.0),
            task=TaskSpec("key_chest", ((2.0, 12.0), (2.0, 22.0))),
            horizon=2000,
            name=name,
        )
    if name == "double_key_chest":
        return EnvConfig(
            bounds=Rect(0, 0, 24, 24),
            walls=(Rect(8, 8, 16, 16),),
            slip_zones=(),
            start=(2.0, 2.0),
            task=TaskSpec("double_key_chest", ((12.0, 22.0), (12.0, 2.0), (22.0, 2.0))),
            horizon=3000,
            name=name,
        )
    if name == "two_corridor_test":
        # Middle corridor: straight shot, sticky. Bottom corridor: long, safe.
        return EnvConfig(
            bounds=Rect(0, 0, 24, 16),
            walls=(Rect(4, 4, 20, 8), Rect(4, 10, 20, 16)),
            slip_zones=((Rect(6, 7.5, 18, 10.5), 0.3),),
            start=(2.0, 9.0),
            task=TaskSpec("single_goal", ((22.0, 9.0),)),
            horizon=600,
            name=name,
        )
    raise ConfigError(f"unknown environment {name!r}; choose from {BUILTIN_NAMES}")


def env_config_from_mapping(kv: dict, name: str = "custom") -> EnvConfig:
    """Build an EnvConfig from a flat key/value mapping.

    Expected keys: ``bounds`` (x0 y0 x1 y1), repeated ``wall`` entries,
    repeated ``slip`` entries (x0 y0 x1 y1 p), ``start`` (x y), ``task``
    (kind followed by its points flattened), ``horizon``, and optionally
    ``success_threshold`` and ``a_max``. List-valued keys hold one list of
    floats per occurrence.
    """
    def floats(v):
        return [float(x) for x in v]

    try:
        bx = floats(kv["bounds"])
        bounds = Rect(*bx)
        walls = tuple(Rect(*floats(w)) for w in kv.get("wall", []))
        slips = tuple((Rect(*floats(s)[:4]), float(s[4])) for s in kv.get("slip", []))
        start = tuple(floats(kv["start"]))
        task_raw = kv["task"]
        kind = task_raw[0]
        coords = floats(task_raw[1:])
        points = tuple((coords[i], coords[i + 1]) for i in range(0, len(coords), 2))
        cfg = EnvConfig(
            bounds=bounds,
            walls=walls,
            slip_zones=slips,
            start=(start[0], start[1]),
            task=TaskSpec(kind, points),
            horizon=int(kv["horizon"][0]) if isinstance(kv["horizon"], list) else int(kv["horizon"]),
            success_threshold=float(kv.get("success_threshold", 2.0)),
            a_max=float(kv.get("a_max", 1.0)),
            name=name,
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise ConfigError(f"bad environment definition: {exc}") from exc
    cfg.validate()
    return cfg
