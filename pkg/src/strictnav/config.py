"""Experiment configuration: defaults, per-environment overrides, and the
flat key/value config file format.

Config files are plain text, one ``key = value`` pair per line, ``#`` for
comments. Values are whitespace- or comma-separated tokens. ``env`` names a
built-in maze (the include mechanism); ``env_file`` points at a maze
definition file using the same format with repeated ``wall`` / ``slip``
keys. Booleans are ``true``/``false``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .mazes import BUILTIN_NAMES, EnvConfig, builtin_env, env_config_from_mapping

# Scenario-specific default knobs (reach threshold, refinement scale, grid
# size, exploration ratio, epsilon floor), tuned per built-in map.
ENV_DEFAULTS: dict[str, dict] = {
    "u_maze": {"eta": 0.1, "c_dist": 5.0, "epsilon_min": 0.1},
    "pi_maze": {"eta": 0.2, "c_dist": 5.0, "epsilon_min": 0.1},
    "complex": {"eta": 0.2, "c_dist": 5.0, "epsilon_min": 0.1},
    "bottleneck": {"eta": 0.1, "c_dist": 5.0, "epsilon_min": 0.1},
    "double_bottleneck": {"eta": 0.1, "c_dist": 10.0, "epsilon_min": 0.1},
    "key_chest": {"eta": 0.2, "c_dist": 5.0, "epsilon_min": 0.1},
    "double_key_chest": {"eta": 0.2, "c_dist": 5.0, "epsilon_min": 0.2},
    "two_corridor_test": {"eta": 0.1, "c_dist": 5.0, "epsilon_min": 0.1},
}


@dataclass
class ExperimentConfig:
    """Everything one training run needs, plus the seed list."""

    env: str = "u_maze"
    env_file: str | None = None
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    total_episodes: int = 2000
    episodes_per_iteration: int = 10

    lam: float = 2.0
    grid_size: float = 2.0
    c_dist: float = 5.0
    eta: float = 0.1
    epsilon_min: float = 0.1
    gamma_high: float = 0.4
    gamma_low: float = 0.99
    tau: float = 0.005
    batch_size: int = 1024
    buffer_capacity: int = 2_500_000
    lr_low: float = 0.5
    lr_high: float = 0.2
    low_updates: int = 500
    high_updates: int = 100
    low_explore_noise: float = 0.4
    neighbor_radius: float | None = None
    twin_critics: bool = True
    euclid_negated: bool = True
    count_same_cell_failures: bool = False
    waypoint_radius: float = 0.5
    state_cell_size: float = 1.0
    offset_clip: int = 3
    stuck_window: int = 500
    motion_epsilon: float = 0.05
    max_decisions_per_episode: int = 500
    eval_every: int = 5
    eval_episodes: int = 10
    stop_at_success: float | None = None

    # Ablation switches.
    no_refinement: bool = False
    fls_k: int | None = None
    exp_drop_goal: bool = False
    exp_drop_greedy: bool = False
    exp_drop_novel: bool = False
    no_exploration_policy: bool = False

    out_dir: str = "runs"

    def validate(self) -> None:
        checks = [
            (self.lam > 0, f"lam must be > 0, got {self.lam}"),
            (self.grid_size > 0, f"grid_size must be > 0, got {self.grid_size}"),
            (self.c_dist > 1, f"c_dist must be > 1, got {self.c_dist}"),
            (0 < self.eta <= 1, f"eta must be in (0, 1], got {self.eta}"),
            (0 < self.gamma_high < 1, f"gamma_high must be in (0, 1), got {self.gamma_high}"),
            (0 < self.gamma_low < 1, f"gamma_low must be in (0, 1), got {self.gamma_low}"),
            (0 <= self.epsilon_min <= 1, f"epsilon_min must be in [0, 1], got {self.epsilon_min}"),
            (self.total_episodes >= 1, "total_episodes must be >= 1"),
            (self.episodes_per_iteration >= 1, "episodes_per_iteration must be >= 1"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.buffer_capacity >= 2, "buffer_capacity must be >= 2"),
            (len(self.seeds) >= 1, "at least one seed required"),
            (self.eval_episodes >= 1, "eval_episodes must be >= 1"),
            (self.fls_k is None or self.fls_k >= 1, "fls_k must be >= 1 when set"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    def resolve_env(self) -> EnvConfig:
        if self.env_file is not None:
            kv = parse_flat_file(Path(self.env_file))
            return env_config_from_mapping(kv, name=Path(self.env_file).stem)
        if self.env not in BUILTIN_NAMES:
            raise ConfigError(f"unknown environment {self.env!r}; choose from {BUILTIN_NAMES}")
        return builtin_env(self.env)

    def exploration_branches(self) -> tuple[str, ...]:
        branches = []
        if not self.exp_drop_goal:
            branches.append("goal")
        if not self.exp_drop_greedy:
            branches.append("greedy")
        if not self.exp_drop_novel:
            branches.append("novel")
        if not branches:
            raise ConfigError("all exploration branches dropped; nothing to sample")
        return tuple(branches)


_BOOL_FIELDS = {
    "twin_critics", "euclid_negated", "count_same_cell_failures", "no_refinement",
    "exp_drop_goal", "exp_drop_greedy", "exp_drop_novel", "no_exploration_policy",
}
_INT_FIELDS = {
    "total_episodes", "episodes_per_iteration", "batch_size", "buffer_capacity",
    "low_updates", "high_updates", "offset_clip", "stuck_window", "eval_every",
    "eval_episodes", "max_decisions_per_episode",
}
_OPTIONAL_NUMERIC = {"neighbor_radius": float, "stop_at_success": float, "fls_k": int}


def parse_flat_file(path: Path) -> dict:
    """Parse ``key = value`` lines into a mapping.

    Keys that repeat (``wall``, ``slip``) collect a list of token lists;
    other keys keep their token list from the last occurrence.
    """
    repeated = {"wall", "slip"}
    out: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        tokens = value.replace(",", " ").split()
        if not tokens:
            raise ConfigError(f"{path}:{lineno}: no value for key {key!r}")
        if key in repeated:
            out.setdefault(key, []).append(tokens)
        else:
            out[key] = tokens
    return out


def _parse_bool(token: str, key: str) -> bool:
    t = token.lower()
    if t in ("true", "1", "yes", "on"):
        return True
    if t in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"bad boolean for {key}: {token!r}")


def config_from_mapping(kv: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Overlay a parsed mapping on top of defaults (plus env-specific defaults)."""
    values: dict = {}
    env_name = kv.get("env", [None])[0]
    env_file = kv.get("env_file", [None])[0]
    if env_name is not None:
        values["env"] = env_name
    if env_file is not None:
        values["env_file"] = env_file
    defaults = dataclasses.asdict(base) if base else dataclasses.asdict(ExperimentConfig())
    # Per-environment defaults apply when the environment is being (re)selected,
    # and never outrank explicitly provided keys.
    if env_file is None and (base is None or env_name is not None):
        defaults.update(ENV_DEFAULTS.get(env_name or defaults["env"], {}))

    known = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    for key, tokens in kv.items():
        if key in ("env", "env_file"):
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if key == "seeds":
            values["seeds"] = tuple(int(t) for t in tokens)
        elif key in _BOOL_FIELDS:
            values[key] = _parse_bool(tokens[0], key)
        elif key in _OPTIONAL_NUMERIC:
            values[key] = None if tokens[0].lower() == "none" else _OPTIONAL_NUMERIC[key](tokens[0])
        elif key in _INT_FIELDS:
            values[key] = int(tokens[0])
        elif key == "out_dir":
            values[key] = tokens[0]
        else:
            values[key] = float(tokens[0])

    merged = {**defaults, **values}
    merged["seeds"] = tuple(merged["seeds"])
    cfg = ExperimentConfig(**merged)
    cfg.validate()
    return cfg


def load_config(path: Path | str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Build the run config from an optional file plus CLI-style overrides."""
    kv = parse_flat_file(Path(path)) if path else {}
    cfg = config_from_mapping(kv)
    if overrides:
        tokens = {k: [str(v)] if not isinstance(v, (list, tuple)) else [str(x) for x in v] for k, v in overrides.items() if v is not None}
        cfg = config_from_mapping(tokens, base=cfg)
    return cfg


def config_rows(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Flat (key, value) rows echoing the effective configuration."""
    rows = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = " ".join(str(x) for x in v)
        rows.append((f.name, str(v)))
    return rows
