"""Training loop: behavior-policy scheduling, episode rollouts under strict
subgoal execution, counter bookkeeping, and the off-policy updates of both
value tables from the dual replay buffers.

One iteration runs a fixed number of episodes, then a fixed number of update
batches on each level, then advances the schedules. Early training is driven
entirely by the exploration policy; the exploration share decays by 0.05 per
iteration down to the configured target ratio.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .graph import LandmarkGraph
from .grid import GridPartition
from .high_level import AugmentedState, HighPolicy, StuckDetector, execute_subgoal
from .low_level import LowLearner
from .mazes import PointMazeEnv, phi
from .replay import HighBuffer, LowReplay


@dataclass
class Schedules:
    """Exploration-ratio and epsilon schedules, computed from counters so the
    values are exact (never accumulated)."""

    eta_target: float
    epsilon_min: float
    epsilon_decay_episodes: int
    eta_decay: float = 0.05
    iteration: int = 0
    episode: int = 0

    def eta_current(self) -> float:
        return max(self.eta_target, 1.0 - self.eta_decay * self.iteration)

    def epsilon_current(self) -> float:
        if self.epsilon_decay_episodes <= 0:
            return self.epsilon_min
        frac = min(1.0, self.episode / self.epsilon_decay_episodes)
        return 1.0 + (self.epsilon_min - 1.0) * frac

    def state_dict(self) -> dict:
        return {"iteration": self.iteration, "episode": self.episode}

    def load_state_dict(self, state: dict) -> None:
        self.iteration = int(state["iteration"])
        self.episode = int(state["episode"])


def choose_behavior_policy(schedules: Schedules, rng: np.random.Generator) -> str:
    """'exploration' with the current mix probability, else 'high_level'.

    Fixed for the whole episode by the caller."""
    return "exploration" if rng.random() < schedules.eta_current() else "high_level"


@dataclass
class EpisodeStats:
    task_success: bool
    reward: float
    decisions: int
    steps: int
    mean_kt: float
    behavior: str


@dataclass
class IterationReport:
    iteration: int
    episodes: int
    success_rate: float
    coverage: float
    mean_decisions: float
    mean_kt: float
    eta: float
    epsilon: float
    eval_success: float | None = None


class Trainer:
    """Owns every component of one seeded training run."""

    def __init__(self, config: ExperimentConfig, seed: int):
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.env_config = config.resolve_env()
        self.env = PointMazeEnv(self.env_config, self.rng)
        bounds = self.env_config.bounds
        walls = self.env_config.walls
        self.partition = GridPartition(
            bounds, config.grid_size, walls,
            count_same_cell_failures=config.count_same_cell_failures,
        )
        self.graph = LandmarkGraph.build_grid_landmarks(
            bounds, config.grid_size, walls,
            gamma_low=config.gamma_low, horizon=self.env_config.horizon,
            neighbor_radius=config.neighbor_radius, euclid_negated=config.euclid_negated,
        )
        self.low = LowLearner(
            bounds, self.env_config.horizon,
            gamma=config.gamma_low, lr=config.lr_low, tau=config.tau,
            twin=config.twin_critics, cell_size=config.state_cell_size,
            offset_clip=config.offset_clip, waypoint_radius=config.waypoint_radius,
            action_scale=min(1.0, self.env_config.a_max),
        )
        task = self.env_config.task
        goal_candidates = list(task.points) if task.kind == "double_goal" else [task.final_goal]
        candidates = np.concatenate([self.graph.nodes, np.asarray(goal_candidates, dtype=np.float64)])
        self.high = HighPolicy(
            candidates, self.partition.n_cells, task.n_flags, bounds, walls,
            gamma=config.gamma_high, lr=config.lr_high, tau=config.tau,
            twin=config.twin_critics,
        )
        self.low_buffer = LowReplay(config.buffer_capacity)
        self.high_buffer = HighBuffer(config.buffer_capacity, HighPolicy.ROW_WIDTH)
        self.schedules = Schedules(
            eta_target=config.eta,
            epsilon_min=config.epsilon_min,
            epsilon_decay_episodes=max(1, config.total_episodes // 2),
        )
        self.detector = StuckDetector(config.stuck_window, config.motion_epsilon)
        self.episode_count = 0
        self.last_eval: float | None = None

    # ---- planning ----

    def _effective_c_dist(self) -> float:
        return 1.0 if self.config.no_refinement else self.config.c_dist

    def make_planner(self, c_dist: float | None = None):
        c = self._effective_c_dist() if c_dist is None else c_dist
        def plan(start, subgoal):
            return self.graph.plan_path(start, subgoal, self.partition, c, self.low.q_values_batch)
        return plan

    # ---- episodes ----

    def run_episode(
        self,
        behavior: str,
        learning: bool = True,
        env: PointMazeEnv | None = None,
        rng: np.random.Generator | None = None,
        epsilon: float | None = None,
        event_log: list | None = None,
        trajectory_log: list | None = None,
    ) -> EpisodeStats:
        """One full episode under the given behavior policy.

        With learning enabled, transitions land in the buffers and the visit
        and failure counters advance; evaluation rollouts leave all shared
        state untouched and draw from their own generator.
        """
        cfg = self.config
        env = env if env is not None else self.env
        rng = rng if rng is not None else self.rng
        eps = self.schedules.epsilon_current() if epsilon is None else epsilon
        planner = self.make_planner()
        state = env.reset()
        visited: set[int] | None = {self.partition.cell_of(phi(state))} if learning else None
        if trajectory_log is not None:
            p0 = phi(state)
            trajectory_log.append((0, p0[0], p0[1], 0.0, "".join(str(b) for b in state.key_flags)))

        total_reward = 0.0
        decisions = 0
        k_sum = 0
        continues = True
        last_failure: tuple | None = None

        while continues and decisions < cfg.max_decisions_per_episode:
            goal = env.goal_hint(state)
            aug = AugmentedState(self.partition.cell_of(phi(state)), state.t / env.config.horizon, state.key_flags)
            if behavior == "exploration":
                subgoal, branch = self.high.select_subgoal_exploration(
                    aug, goal, self.partition, rng, branches=cfg.exploration_branches()
                )
            else:
                subgoal, branch = self.high.select_subgoal(aug, eps, rng)
            outcome = execute_subgoal(
                env, state, goal, subgoal, planner, self.low, self.partition, rng,
                lam=cfg.lam,
                explore_noise=cfg.low_explore_noise if learning else 0.0,
                low_buffer=self.low_buffer if learning else None,
                visited_cells=visited,
                stuck_detector=self.detector,
                trajectory_log=trajectory_log,
                fls_k=cfg.fls_k,
            )
            if learning:
                tr = outcome.transition
                self.high_buffer.insert(self.high.encode(tr), tr.success, tr.reward)
                if outcome.her_transition is not None:
                    her = outcome.her_transition
                    self.high_buffer.insert(self.high.encode(her), her.success, her.reward)
                if cfg.fls_k is None and not tr.success:
                    self.partition.record_subgoal_failure(phi(outcome.final_state), subgoal)
            if cfg.fls_k is not None and not outcome.transition.success:
                last_failure = (phi(outcome.final_state), subgoal)
            if event_log is not None:
                term = phi(outcome.final_state)
                event_log.append((
                    self.episode_count, decisions, aug.position_cell,
                    round(aug.time_fraction, 6), subgoal[0], subgoal[1], branch,
                    outcome.planned_waypoints, outcome.steps,
                    int(outcome.transition.success), outcome.transition.reward,
                    term[0], term[1],
                ))
            total_reward += outcome.reward_sum
            decisions += 1
            k_sum += outcome.steps
            state = outcome.final_state
            continues = outcome.episode_continues

        # Fixed-step mode has no terminating failures; it books at most one
        # failure-to-exit event per episode, at episode close.
        if learning and cfg.fls_k is not None and last_failure is not None and not all(state.key_flags):
            self.partition.record_subgoal_failure(*last_failure)
        if learning and visited is not None:
            self.partition.record_episode_visits(visited)
            self.episode_count += 1
            self.schedules.episode = self.episode_count
        return EpisodeStats(
            task_success=all(state.key_flags),
            reward=total_reward,
            decisions=decisions,
            steps=state.t,
            mean_kt=k_sum / max(1, decisions),
            behavior=behavior,
        )

    # ---- updates ----

    def update_low(self, n_batches: int | None = None) -> None:
        n = self.config.low_updates if n_batches is None else n_batches
        if len(self.low_buffer) == 0:
            return
        for _ in range(n):
            self.low.update(self.low_buffer.sample(self.config.batch_size, self.rng))

    def update_high(self, n_batches: int | None = None) -> None:
        n = self.config.high_updates if n_batches is None else n_batches
        if len(self.high_buffer) == 0:
            return
        for _ in range(n):
            self.high.update(self.high_buffer.sample(self.config.batch_size, self.rng))

    # ---- iterations ----

    def run_iteration(self, event_log: list | None = None) -> IterationReport:
        cfg = self.config
        stats = []
        for _ in range(cfg.episodes_per_iteration):
            behavior = (
                "high_level" if cfg.no_exploration_policy
                else choose_behavior_policy(self.schedules, self.rng)
            )
            stats.append(self.run_episode(behavior, event_log=event_log))
        self.update_low()
        self.update_high()
        report = IterationReport(
            iteration=self.schedules.iteration,
            episodes=self.episode_count,
            success_rate=sum(s.task_success for s in stats) / len(stats),
            coverage=self.partition.coverage_fraction(),
            mean_decisions=sum(s.decisions for s in stats) / len(stats),
            mean_kt=sum(s.mean_kt for s in stats) / len(stats),
            eta=self.schedules.eta_current(),
            epsilon=self.schedules.epsilon_current(),
        )
        self.schedules.iteration += 1
        return report

    def evaluate(self, n_episodes: int | None = None, rng: np.random.Generator | None = None) -> float:
        """Greedy success rate: behavior is the high-level policy with
        epsilon 0, no learning, strict execution still enforced."""
        n = self.config.eval_episodes if n_episodes is None else n_episodes
        if n < 1:
            raise ValueError("evaluation needs at least one episode")
        if rng is None:
            rng = np.random.default_rng([self.seed, self.schedules.iteration, 0xE7A1])
        env = PointMazeEnv(self.env_config, rng)
        wins = 0
        for _ in range(n):
            s = self.run_episode("high_level", learning=False, env=env, rng=rng, epsilon=0.0)
            wins += int(s.task_success)
        return wins / n

    def train(self, metrics_writer=None, event_log: list | None = None) -> list[IterationReport]:
        """Iterate until the episode budget is spent (or an early-stop
        success level is sustained for two consecutive evaluations)."""
        cfg = self.config
        reports = []
        consecutive_hits = 0
        while self.episode_count < cfg.total_episodes:
            report = self.run_iteration(event_log=event_log)
            if self.schedules.iteration % cfg.eval_every == 0 or self.episode_count >= cfg.total_episodes:
                self.last_eval = self.evaluate()
            report.eval_success = self.last_eval
            reports.append(report)
            if metrics_writer is not None:
                metrics_writer(report)
            if cfg.stop_at_success is not None and self.last_eval is not None:
                consecutive_hits = consecutive_hits + 1 if self.last_eval >= cfg.stop_at_success else 0
                if consecutive_hits >= 2:
                    break
        return reports

    # ---- persistence ----

    def state_dict(self) -> dict:
        return {
            "seed": self.seed,
            "episode_count": self.episode_count,
            "schedules": self.schedules.state_dict(),
            "rng_state": self.rng.bit_generator.state,
            "low": self.low.state_dict(),
            "high": self.high.state_dict(),
            "counters": self.partition.counter_state(),
            "low_buffer": self.low_buffer.state_dict(),
            "high_buffer": self.high_buffer.state_dict(),
            "last_eval": self.last_eval,
        }

    def load_state_dict(self, state: dict) -> None:
        self.seed = int(state["seed"])
        self.episode_count = int(state["episode_count"])
        self.schedules.load_state_dict(state["schedules"])
        self.rng.bit_generator.state = state["rng_state"]
        self.low.load_state_dict(state["low"])
        self.high.load_state_dict(state["high"])
        self.partition.restore_counter_state(state["counters"])
        self.low_buffer.load_state_dict(state["low_buffer"])
        self.high_buffer.load_state_dict(state["high_buffer"])
        self.last_eval = state["last_eval"]
