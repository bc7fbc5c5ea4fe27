"""End-to-end pipeline driver and report emitter.

Subcommands: `run` (train model, search fair action sets per population,
report), `audit` (model fairness audit only), `baseline` (nearest-unlike-
neighbor CFs), `trace-plot` (SVG chart of a training trace).

Exit codes: 0 success, 2 config error, 3 data error, 4 training divergence.
RECOURSE_THREADS caps how many per-population searches run concurrently.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import baseline as nun
from . import report as rpt
from .cluster import cluster_subpopulations, kmeans_fit, write_assignments
from .errors import ConfigError, DataError, DivergenceError, FairCfError
from .fairness import Population, compute_snapshot, effectiveness
from .model import (
    audit_fairness,
    load_prediction_table,
    train_autoencoder,
    train_classifier,
)
from .recourse import action_table, best_effort_attempts, cf_quality
from .rl_env import RecourseEnv, Scenario, ScenarioSpec, stopping
from .sac import SacAgent, SacConfig, train
from .tabular import affected_subset, load_csv, train_test_split

logger = logging.getLogger("faircf")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGENCE = 0, 2, 3, 4
AUDIT_WARN_LEVEL = 0.10


@dataclass
class RunConfig:
    data: str
    schema: str
    scenario: str
    seed: int
    out: str
    clusters: int = 3
    max_actions: int = 5
    max_steps: int = 100
    episodes: int = 150
    warmup_steps: int = 1000
    batch_size: int = 256
    test_fraction: float = 0.2
    predictions: str | None = None
    log_trajectory: bool = False


def _scenario_spec(cfg: RunConfig) -> ScenarioSpec:
    try:
        scenario = Scenario(cfg.scenario)
    except ValueError:
        raise ConfigError(
            f"unknown scenario {cfg.scenario!r}; pick one of "
            f"{', '.join(s.value for s in Scenario)}"
        ) from None
    return ScenarioSpec(
        scenario=scenario,
        max_actions=cfg.max_actions,
        max_steps_per_episode=cfg.max_steps,
    )


def _sac_config(cfg: RunConfig, seed: int) -> SacConfig:
    return SacConfig(
        episodes=cfg.episodes,
        warmup_steps=cfg.warmup_steps,
        batch_size=cfg.batch_size,
        seed=seed,
    )


def _prepare(cfg: RunConfig, stage):
    """Shared head of the pipeline: load, split, model, audit."""
    stage("load")
    ds = load_csv(cfg.data, cfg.schema)
    stage("split")
    train_ds, test_ds = train_test_split(ds, cfg.test_fraction, seed=cfg.seed)
    stage("model")
    if cfg.predictions:
        clf = load_prediction_table(cfg.predictions)
    else:
        clf = train_classifier(train_ds)
    stage("audit")
    audit = audit_fairness(clf, test_ds)
    for name, value in (("dp", audit.dp_difference), ("eo", audit.eo_difference)):
        if value > AUDIT_WARN_LEVEL:
            logger.warning("model audit: %s difference %.3f exceeds %.2f", name, value,
                           AUDIT_WARN_LEVEL)
    return ds, train_ds, test_ds, clf, audit


def _population_result(name: str, pop: Population, clf, ae, spec: ScenarioSpec,
                       sac_cfg: SacConfig, out_dir: Path, log_trajectory: bool):
    """Search an action set for one population and evaluate it."""
    if pop.group0.size == 0 or pop.group1.size == 0:
        missing = 0 if pop.group0.size == 0 else 1
        logger.warning("population %r has no protected-group-%d members; "
                       "skipping fairness optimization for it", name, missing)
        return {"name": name, "size": pop.m, "skipped": f"protected group {missing} absent"}, None

    env = RecourseEnv(pop, clf, spec)
    agent = SacAgent(env.state_dim, env.action_dim, sac_cfg)
    trajectory = out_dir / f"trajectory_{name}.jsonl" if log_trajectory else None
    trace = train(agent, env, sac_cfg, trajectory_path=trajectory)

    action_set = trace.best["action_set"]
    snap = compute_snapshot(action_set, pop, clf, sr_mode=spec.sr_mode, phi=spec.phi,
                            alpha=spec.active_threshold)
    stopped = stopping(snap, spec)

    idx, attempts = best_effort_attempts(pop.X, action_set, clf, pop.schema)
    quality = {}
    for gname, g in (("group0", pop.group0), ("group1", pop.group1)):
        quality[gname] = cf_quality(pop.X[g], attempts[g], clf, ae, pop.schema).to_dict()

    per_action_eff = [
        [effectiveness(a, pop.group0, clf, pop), effectiveness(a, pop.group1, clf, pop)]
        for a in action_set.actions
    ]
    result = {
        "name": name,
        "size": pop.m,
        "group_sizes": [int(pop.group0.size), int(pop.group1.size)],
        "skipped": None,
        "stopping_met": bool(stopped),
        **rpt.snapshot_block(snap),
        "actions": action_table(action_set, pop.schema),
        "per_action_effectiveness": per_action_eff,
        "cf_quality": quality,
    }
    return result, trace


def run_pipeline(cfg: RunConfig, stage=lambda name: None) -> dict:
    """The `run` command: returns the report dict after writing all artifacts."""
    spec = _scenario_spec(cfg)
    if cfg.predictions:
        raise ConfigError(
            "the prediction-table backend cannot score counterfactuals; "
            "use `audit` with --predictions instead"
        )
    out_dir = Path(cfg.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=False)
    except FileExistsError:
        raise ConfigError(f"output directory {cfg.out!r} already exists") from None

    ds, train_ds, _test_ds, clf, audit = _prepare(cfg, stage)

    stage("affected")
    affected = affected_subset(ds, clf)

    stage("autoencoder")
    ae = train_autoencoder(train_ds, seed=cfg.seed + 1)

    stage("cluster")
    whole = Population.from_affected(ds, affected)
    populations = [("whole", whole)]
    if cfg.clusters > 0:
        clustering = kmeans_fit(whole, k=cfg.clusters, seed=cfg.seed + 2)
        write_assignments(clustering, whole, out_dir / "cluster_assignments.csv")
        for i, sub in enumerate(cluster_subpopulations(clustering, whole)):
            populations.append((f"c{i + 1}", sub))

    stage("search")
    threads = max(1, int(os.environ.get("RECOURSE_THREADS", "1")))
    jobs = [
        (name, pop, clf, ae, spec, _sac_config(cfg, cfg.seed + 100 + i), out_dir,
         cfg.log_trajectory)
        for i, (name, pop) in enumerate(populations)
    ]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda j: _population_result(*j), jobs))
    else:
        outcomes = [_population_result(*j) for j in jobs]

    stage("report")
    pop_blocks = []
    for (name, _pop), (result, trace) in zip(populations, outcomes):
        pop_blocks.append(result)
        if trace is not None:
            trace.write_csv(out_dir / f"trace_{name}.csv")
            rpt.dump_json({"population": name, "actions": result["actions"],
                           "per_action_effectiveness": result["per_action_effectiveness"]},
                          out_dir / f"actions_{name}.json")

    report = {
        "config": {
            "data": cfg.data,
            "schema": cfg.schema,
            "seed": cfg.seed,
            "clusters": cfg.clusters,
            "test_fraction": cfg.test_fraction,
            "scenario_spec": spec.to_dict(),
            "sac": _sac_config(cfg, cfg.seed + 100).to_dict() | {"seed": "per-population"},
        },
        "model": {"audit": audit.to_dict()},
        "populations": pop_blocks,
    }
    rpt.dump_json(report, out_dir / "report.json")
    (out_dir / "report.txt").write_text(rpt.render_table(rpt.round_tree(report)))
    return report


def cmd_run(args, stage) -> int:
    cfg = RunConfig(
        data=args.data, schema=args.schema, scenario=args.scenario, seed=args.seed,
        out=args.out, clusters=args.clusters, max_actions=args.max_actions,
        max_steps=args.max_steps, episodes=args.episodes, warmup_steps=args.warmup_steps,
        batch_size=args.batch_size, test_fraction=args.test_fraction,
        predictions=args.predictions, log_trajectory=args.log_trajectory,
    )
    run_pipeline(cfg, stage)
    print((Path(cfg.out) / "report.txt").read_text())
    return EXIT_OK


def cmd_audit(args, stage) -> int:
    cfg = RunConfig(data=args.data, schema=args.schema, scenario="individual-ee",
                    seed=args.seed, out="", predictions=args.predictions,
                    test_fraction=args.test_fraction)
    _ds, _train, _test, _clf, audit = _prepare(cfg, stage)
    block = rpt.round_tree(audit.to_dict())
    print("model fairness audit:")
    for key, value in block.items():
        print(f"  {key}: {value}")
    for name, value in (("dp_difference", audit.dp_difference),
                        ("eo_difference", audit.eo_difference)):
        if value > AUDIT_WARN_LEVEL:
            print(f"  WARNING: {name} {value:.3f} exceeds {AUDIT_WARN_LEVEL}")
    if args.out:
        rpt.dump_json(block, args.out)
    return EXIT_OK


def cmd_baseline(args, stage) -> int:
    cfg = RunConfig(data=args.data, schema=args.schema, scenario="individual-ee",
                    seed=args.seed, out=args.out, test_fraction=args.test_fraction)
    out_dir = Path(cfg.out)
    try:
        out_dir.mkdir(parents=True, exist_ok=False)
    except FileExistsError:
        raise ConfigError(f"output directory {cfg.out!r} already exists") from None
    ds, train_ds, _test_ds, clf, audit = _prepare(cfg, stage)
    stage("affected")
    affected = affected_subset(ds, clf)
    stage("autoencoder")
    ae = train_autoencoder(train_ds, seed=cfg.seed + 1)
    stage("baseline")
    pop = Population.from_affected(ds, affected)
    index = nun.build_nun_index(ds, clf)
    attempts, changed, valid = nun.nun_batch(pop.X, index, clf, pop.schema)
    quality = {}
    for gname, g in (("group0", pop.group0), ("group1", pop.group1)):
        if g.size == 0:
            quality[gname] = None
            continue
        quality[gname] = cf_quality(pop.X[g], attempts[g], clf, ae, pop.schema).to_dict()
    result = {
        "method": "nearest-unlike-neighbor greedy copy",
        "population_size": pop.m,
        "found_fraction": float(valid.mean()),
        "mean_changed_features": float(changed.mean()),
        "model": {"audit": audit.to_dict()},
        "cf_quality": quality,
    }
    rpt.dump_json(result, out_dir / "baseline_report.json")
    print((out_dir / "baseline_report.json").read_text())
    return EXIT_OK


def cmd_trace_plot(args, stage) -> int:
    stage("trace-plot")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = np.genfromtxt(args.trace, delimiter=",", names=True)
    if rows.size == 0:
        raise DataError(f"{args.trace}: trace has no rows")
    rows = np.atleast_1d(rows)
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(rows["step"], rows["episode_reward_mean"])
    axes[0].set_ylabel("episode reward mean")
    axes[1].plot(rows["step"], rows["entropy_coefficient"])
    axes[1].set_ylabel("entropy coefficient")
    axes[1].set_xlabel("time-step")
    fig.tight_layout()
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    plt.close(fig)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="faircf",
                                     description="Fair counterfactual action sets via RL")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--data", required=True, help="CSV file with a header row")
        p.add_argument("--schema", required=True, help="schema config JSON")
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--test-fraction", type=float, default=0.2)

    p_run = sub.add_parser("run", help="full pipeline: model, audit, fair action search")
    add_common(p_run)
    p_run.add_argument("--scenario", required=True,
                       choices=[s.value for s in Scenario])
    p_run.add_argument("--clusters", type=int, default=3,
                       help="k for k-means subgroups; 0 disables clustering")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--max-actions", type=int, default=5)
    p_run.add_argument("--max-steps", type=int, default=100)
    p_run.add_argument("--episodes", type=int, default=150)
    p_run.add_argument("--warmup-steps", type=int, default=1000)
    p_run.add_argument("--batch-size", type=int, default=256)
    p_run.add_argument("--predictions", default=None)
    p_run.add_argument("--log-trajectory", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_audit = sub.add_parser("audit", help="model-level fairness audit")
    add_common(p_audit)
    p_audit.add_argument("--predictions", default=None,
                         help="CSV of (row_index, score) from an external model")
    p_audit.add_argument("--out", default=None, help="optional path for audit JSON")
    p_audit.set_defaults(func=cmd_audit)

    p_base = sub.add_parser("baseline", help="nearest-unlike-neighbor CF baseline")
    add_common(p_base)
    p_base.add_argument("--out", required=True)
    p_base.set_defaults(func=cmd_baseline)

    p_plot = sub.add_parser("trace-plot", help="SVG chart of a training trace CSV")
    p_plot.add_argument("--trace", required=True)
    p_plot.add_argument("--out", required=True)
    p_plot.set_defaults(func=cmd_trace_plot)
    return parser


class _StageTracker:
    def __init__(self):
        self.name = "init"

    def __call__(self, name: str) -> None:
        self.name = name
        logger.info("stage: %s", name)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    tracker = _StageTracker()
    try:
        return args.func(args, tracker)
    except FairCfError as exc:
        print(f"stage {tracker.name!r} failed: {exc}", file=sys.stderr)
        out = getattr(args, "out", None)
        if out and Path(out).is_dir():
            (Path(out) / "INCOMPLETE").write_text(f"failed at stage {tracker.name}: {exc}\n")
        if isinstance(exc, ConfigError):
            return EXIT_CONFIG
        if isinstance(exc, DivergenceError):
            return EXIT_DIVERGENCE
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
