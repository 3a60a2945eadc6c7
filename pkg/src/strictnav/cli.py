"""Experiment front-end.

Verbs:
  train   -- run one training run per seed, writing per-seed metrics CSVs,
             checkpoints, SVG renders, and an aggregate CSV (mean/std per
             iteration over seeds).
  eval    -- load a checkpoint and report the greedy success rate.
  render  -- re-emit the SVG artifacts for a finished seed directory.
  ablate  -- sweep one hyperparameter over a list of values, one aggregate
             per value.

Environment overrides: STRICTNAV_OUT (output directory) and
STRICTNAV_WORKERS (parallel seed processes). Seeds run as independent
processes when workers > 1; outputs are per-seed so there is no write
contention.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import multiprocessing
import os
import sys
from pathlib import Path

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .config import ExperimentConfig, config_from_mapping, config_rows, load_config
from .errors import ConfigError
from .mazes import phi
from .render import render_graph, render_heatmap, render_maze, render_trajectory
from .training import Trainer

METRIC_COLUMNS = (
    "iteration", "episodes", "success_rate", "coverage",
    "mean_decisions", "mean_kt", "eta", "epsilon", "eval_success",
)

EVENT_COLUMNS = (
    "episode", "decision", "state_cell", "time_fraction", "subgoal_x", "subgoal_y",
    "branch", "planned_waypoints", "k_t", "success", "reward", "terminal_x", "terminal_y",
)


def _report_row(report) -> list:
    return [
        report.iteration, report.episodes, report.success_rate, report.coverage,
        report.mean_decisions, report.mean_kt, report.eta, report.epsilon,
        "" if report.eval_success is None else report.eval_success,
    ]


def run_seed(config: ExperimentConfig, seed: int, seed_dir: Path) -> dict:
    """Train one seed end to end and write all artifacts into seed_dir."""
    seed_dir.mkdir(parents=True, exist_ok=True)
    trainer = Trainer(config, seed)
    events: list = []

    with open(seed_dir / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
        trainer.train(metrics_writer=lambda rep: writer.writerow(_report_row(rep)), event_log=events)

    save_checkpoint(seed_dir / "checkpoint.pkl", trainer.state_dict(), config_rows(config))
    write_seed_artifacts(trainer, seed_dir, events)
    return {
        "seed": seed,
        "episodes": trainer.episode_count,
        "iterations": trainer.schedules.iteration,
        "eval_success": trainer.last_eval if trainer.last_eval is not None else float("nan"),
    }


def write_seed_artifacts(trainer: Trainer, seed_dir: Path, events: list | None = None) -> None:
    """CSV exports and SVG renders for one finished (or loaded) run."""
    env_cfg = trainer.env_config
    with open(seed_dir / "visitation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("cell", "x_lo", "y_lo", "visits", "fails", "ratio"))
        w.writerows(trainer.partition.to_csv_rows())
    with open(seed_dir / "nodes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("id", "x", "y"))
        w.writerows(trainer.graph.node_rows())
    edge_rows = trainer.graph.edge_rows(
        trainer.low.q_values_batch, trainer.partition, trainer._effective_c_dist()
    )
    with open(seed_dir / "edges.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("src", "dst", "raw_cost", "refined_cost"))
        w.writerows(edge_rows)
    if events is not None:
        with open(seed_dir / "events.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(EVENT_COLUMNS)
            w.writerows(events)

    # One greedy episode for the trajectory render, plus its first plan.
    traj: list = []
    eval_rng = np.random.default_rng([trainer.seed, trainer.schedules.iteration, 0x7E57])
    trainer.run_episode("high_level", learning=False,
                        env=type(trainer.env)(env_cfg, eval_rng), rng=eval_rng,
                        epsilon=0.0, trajectory_log=traj)
    with open(seed_dir / "trajectory.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "x", "y", "reward", "flags"))
        w.writerows(traj)

    (seed_dir / "maze.svg").write_text(render_maze(env_cfg))
    (seed_dir / "graph.svg").write_text(render_graph(env_cfg, trainer.graph.node_rows(), edge_rows))
    planned = None
    try:
        path = trainer.make_planner()(env_cfg.start, env_cfg.task.final_goal)
        planned = [env_cfg.start] + list(path.waypoints)
    except Exception:
        planned = None
    (seed_dir / "trajectory.svg").write_text(render_trajectory(env_cfg, traj, planned))
    (seed_dir / "heatmap.svg").write_text(
        render_heatmap(env_cfg, trainer.partition.to_csv_rows(), trainer.partition.cell_size)
    )


def read_metrics(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_aggregate(run_dir: Path, seeds: tuple[int, ...]) -> Path:
    """Mean/std per iteration across the per-seed metrics files.

    Rows cover every iteration present in any seed; the n_seeds column says
    how many runs contributed (early-stopped runs contribute fewer rows).
    """
    per_seed = [read_metrics(run_dir / f"seed_{s}" / "metrics.csv") for s in seeds]
    numeric = [c for c in METRIC_COLUMNS if c != "iteration"]
    out = run_dir / "aggregate.csv"
    max_rows = max(len(rows) for rows in per_seed)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh)
        header = ["iteration", "n_seeds"]
        for c in numeric:
            header += [f"mean_{c}", f"std_{c}"]
        w.writerow(header)
        for i in range(max_rows):
            rows = [rs[i] for rs in per_seed if i < len(rs)]
            record = [rows[0]["iteration"], len(rows)]
            for c in numeric:
                vals = [float(r[c]) for r in rows if r[c] != ""]
                if vals:
                    record += [float(np.mean(vals)), float(np.std(vals))]
                else:
                    record += ["", ""]
            w.writerow(record)
    return out


def _seed_task(args):
    config, seed, seed_dir = args
    return run_seed(config, seed, Path(seed_dir))


def run_experiment(config: ExperimentConfig, out_dir: Path, workers: int = 1) -> list[dict]:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "config.txt", "w") as fh:
        for key, value in config_rows(config):
            fh.write(f"{key} = {value}\n")
    tasks = [(config, s, str(out_dir / f"seed_{s}")) for s in config.seeds]
    if workers > 1 and len(tasks) > 1:
        with multiprocessing.get_context("spawn").Pool(min(workers, len(tasks))) as pool:
            summaries = pool.map(_seed_task, tasks)
    else:
        summaries = [_seed_task(t) for t in tasks]
    write_aggregate(out_dir, config.seeds)
    return summaries


# ---- argument handling ----

def _add_override_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--env", help="built-in environment name")
    p.add_argument("--env-file", dest="env_file", help="maze definition file")
    p.add_argument("--seeds", help="comma-separated seed list")
    p.add_argument("--episodes", dest="total_episodes", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--c-dist", dest="c_dist", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--grid-size", dest="grid_size", type=float)
    p.add_argument("--epsilon-min", dest="epsilon_min", type=float)
    p.add_argument("--stop-at", dest="stop_at_success", type=float)
    p.add_argument("--no-refinement", action="store_true", default=None)
    p.add_argument("--fls-k", dest="fls_k", type=int)
    p.add_argument("--out", dest="out_dir")


def _collect_overrides(args: argparse.Namespace) -> dict:
    keys = (
        "env", "env_file", "seeds", "total_episodes", "eta", "c_dist", "lam",
        "grid_size", "epsilon_min", "stop_at_success", "fls_k", "out_dir",
    )
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "no_refinement", None):
        overrides["no_refinement"] = "true"
    if overrides.get("seeds"):
        overrides["seeds"] = overrides["seeds"].split(",")
    return overrides


def _resolve_out(config: ExperimentConfig, args) -> Path:
    base = os.environ.get("STRICTNAV_OUT") or config.out_dir
    name = getattr(args, "name", None) or config.env
    return Path(base) / name


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("STRICTNAV_WORKERS", "1")))
    except ValueError:
        return 1


def _trainer_from_checkpoint(path: Path, env_override: str | None = None) -> Trainer:
    payload = load_checkpoint(path)
    kv = {}
    for key, value in payload["config"]:
        if value == "None":
            continue
        kv[key] = value.split()
    if env_override is not None:
        kv["env"] = [env_override]
        kv.pop("env_file", None)
    config = config_from_mapping(kv)
    trainer = Trainer(config, int(payload["state"]["seed"]))
    try:
        trainer.load_state_dict(payload["state"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"checkpoint does not match environment {config.env!r}: {exc}") from exc
    return trainer


def cmd_train(args) -> int:
    config = load_config(args.config, _collect_overrides(args))
    out = _resolve_out(config, args)
    summaries = run_experiment(config, out, workers=_workers())
    rates = [s["eval_success"] for s in summaries]
    print(f"run complete: {out}")
    for s in summaries:
        print(f"  seed {s['seed']}: episodes={s['episodes']} eval_success={s['eval_success']:.3f}")
    print(f"mean eval success: {float(np.mean(rates)):.3f}")
    return 0


def cmd_eval(args) -> int:
    if args.episodes < 1:
        raise ConfigError("eval needs at least one episode")
    trainer = _trainer_from_checkpoint(Path(args.checkpoint), args.env)
    rng = np.random.default_rng(args.seed)
    rate = trainer.evaluate(args.episodes, rng=rng)
    print(f"success rate over {args.episodes} episodes: {rate:.4f}")
    return 0


def cmd_render(args) -> int:
    seed_dir = Path(args.run_dir)
    ckpt = seed_dir / "checkpoint.pkl"
    if not ckpt.exists():
        raise ConfigError(f"no checkpoint found at {ckpt}")
    trainer = _trainer_from_checkpoint(ckpt)
    write_seed_artifacts(trainer, seed_dir)
    print(f"rendered artifacts in {seed_dir}")
    return 0


def cmd_ablate(args) -> int:
    base = load_config(args.config, _collect_overrides(args))
    values = args.values.split(",")
    out_root = _resolve_out(base, args) / f"ablate_{args.param}"
    summary_rows = []
    for value in values:
        kv = {args.param: value.split()}
        config = config_from_mapping(kv, base=base)
        out = out_root / value
        summaries = run_experiment(config, out, workers=_workers())
        rates = [s["eval_success"] for s in summaries]
        summary_rows.append((value, float(np.mean(rates)), float(np.std(rates))))
        print(f"{args.param}={value}: mean eval success {summary_rows[-1][1]:.3f}")
    with open(out_root / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow((args.param, "mean_eval_success", "std_eval_success"))
        w.writerows(summary_rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strictnav", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run seeded training")
    _add_override_args(p_train)
    p_train.add_argument("--name", help="run directory name (default: env name)")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--env", help="environment override (must match the checkpoint)")
    p_eval.add_argument("--episodes", type=int, default=100)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(func=cmd_eval)

    p_render = sub.add_parser("render", help="re-render artifacts for a seed directory")
    p_render.add_argument("--run-dir", required=True)
    p_render.set_defaults(func=cmd_render)

    p_ablate = sub.add_parser("ablate", help="sweep one hyperparameter")
    _add_override_args(p_ablate)
    p_ablate.add_argument("--name", help="run directory name (default: env name)")
    p_ablate.add_argument("--param", required=True)
    p_ablate.add_argument("--values", required=True, help="comma-separated values")
    p_ablate.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
