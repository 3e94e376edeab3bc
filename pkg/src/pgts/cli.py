"""Command-line entry point: ``pgts {train,evaluate,compare,variance-study,pull-histogram}``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .bandit import PRESETS, sample_instance
from .config import ConfigError, ExperimentConfig, load_config, preset_config
from .estimators import BaselineKind, MetricKind, policy_noise, run_episode, write_trajectories_jsonl
from .evaluation import BayesUCB, NaiveTS, ReshapedTS, evaluate_policy, histogram_csv
from .policy import MetaParams, canonical_meta_params
from .streams import RandomStream
from .trainer import DivergenceError, TrainingRun, train
from .variance import variance_study

log = logging.getLogger("pgts")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3
BUILTIN_POLICIES = {"naive_ts": NaiveTS, "bayes_ucb": BayesUCB}


class UsageError(Exception):
    pass


def _experiment(args) -> ExperimentConfig:
    if args.config:
        exp = load_config(args.config)
        if args.preset and args.preset != exp.preset:
            raise UsageError("--preset conflicts with the preset named in --config")
        return exp
    return preset_config(args.preset or "standard")


def _out_dir(args, exp: ExperimentConfig) -> Path:
    out = Path(args.out if args.out is not None else exp.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads(args) -> int:
    return max(1, args.threads or os.cpu_count() or 1)


def _load_policy(name: str | None, checkpoint: str | None, config):
    if checkpoint:
        meta = MetaParams.load(checkpoint)
        if meta.K != config.K:
            raise UsageError(f"checkpoint {checkpoint} has K={meta.K}, bandit has K={config.K}")
        return ReshapedTS(meta, name=Path(checkpoint).stem)
    if name not in BUILTIN_POLICIES:
        raise UsageError(f"unknown policy {name!r}; choose from {sorted(BUILTIN_POLICIES)} or pass --checkpoint")
    return BUILTIN_POLICIES[name]()


def cmd_train(args) -> int:
    exp = _experiment(args)
    tr = exp.training
    overrides = {
        k: v
        for k, v in {
            "iterations": args.iterations,
            "batch_size": args.batch_size,
            "step_size": args.step_size,
            "metric": args.metric,
            "baseline": args.baseline,
            "seed": args.seed,
            "checkpoint_every": args.checkpoint_every,
            "max_grad_norm": args.max_grad_norm,
        }.items()
        if v is not None
    }
    tr = replace(tr, **overrides)
    run = TrainingRun(
        iterations=tr.iterations,
        batch_size=tr.batch_size,
        step_size=tr.step_size,
        metric=tr.metric,
        baseline=tr.baseline,
        checkpoint_every=tr.checkpoint_every,
        max_grad_norm=tr.max_grad_norm,
        n_jobs=_threads(args),
    )
    out = _out_dir(args, exp)
    try:
        result = train(exp.bandit, run, seed=tr.seed)
    except DivergenceError as exc:
        print(f"error: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    (out / "learning_curve.csv").write_text(result.curve.to_csv(timing=not args.no_timing))
    result.meta.save(out / "checkpoint.json")
    for k, meta in result.checkpoints.items():
        meta.save(out / f"checkpoint_{k:05d}.json")
    if args.dump_trajectories:
        stream = RandomStream(exp.evaluation.seed)
        n = args.dump_trajectories
        inst = sample_instance(exp.bandit, stream, size=n)
        traj = run_episode(result.meta, inst, exp.bandit, policy_noise(stream, exp.bandit, n), keep_scores=True)
        write_trajectories_jsonl(traj, out / "trajectories.jsonl")
    curve = result.curve.batch_regret
    if curve:
        print(f"iterations={len(curve)} first_regret={curve[0]:.6g} last_regret={curve[-1]:.6g} "
              f"episodes={result.episodes_simulated}")
    else:
        print("iterations=0")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    exp = _experiment(args)
    policy = _load_policy(args.policy, args.checkpoint, exp.bandit)
    n = args.n or exp.evaluation.n_instances
    seed = exp.evaluation.seed if args.seed is None else args.seed
    report = evaluate_policy(policy, exp.bandit, seed, n, n_jobs=_threads(args))
    out = _out_dir(args, exp)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(report.to_json() + "\n")
    print(f"{report.label}: regret {report.mean_regret:.3f} (s.e. {report.std_error:.3f}, n={report.n_instances})")
    return EXIT_OK


def cmd_compare(args) -> int:
    exp = _experiment(args)
    policies = [NaiveTS(), BayesUCB()] + [_load_policy(None, c, exp.bandit) for c in args.checkpoint or []]
    n = args.n or exp.evaluation.n_instances
    seed = exp.evaluation.seed if args.seed is None else args.seed
    reports = [evaluate_policy(p, exp.bandit, seed, n, n_jobs=_threads(args)) for p in policies]
    out = _out_dir(args, exp)
    lines = [",".join(reports[0].CSV_COLUMNS)] + [",".join(r.csv_row()) for r in reports]
    (out / "report.csv").write_text("\n".join(lines) + "\n")
    (out / "report.json").write_text(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    width = max(len(r.label) for r in reports)
    print(f"{'Algorithm':<{width}}  Regret (s.e.)")
    for r in reports:
        print(f"{r.label:<{width}}  {r.mean_regret:.3f} ({r.std_error:.3f})")
    return EXIT_OK


def cmd_variance_study(args) -> int:
    exp = _experiment(args)
    n = args.n or 100_000
    if n < 10_000:
        raise UsageError("variance-study needs --n of at least 10000")
    meta = canonical_meta_params(exp.bandit) if args.meta == "canonical" else MetaParams.load(args.meta)
    if meta.K != exp.bandit.K:
        raise UsageError("meta-parameters do not match the bandit's arm count")
    seed = 0 if args.seed is None else args.seed
    study = variance_study(meta, exp.bandit, n, seed, n_boot=args.bootstrap)
    out = _out_dir(args, exp)
    (out / "variance.csv").write_text(study.to_csv())
    (out / "variance_ordering.csv").write_text(study.ordering_csv())
    for r in study.orderings:
        mark = ">" if r.holds else "?"
        print(f"baseline={r.baseline.value}: {r.higher.value} {mark} {r.lower.value} "
              f"diff={r.difference:.4g} CI=[{r.ci_low:.4g}, {r.ci_high:.4g}]")
    return EXIT_OK


def cmd_pull_histogram(args) -> int:
    exp = _experiment(args)
    policy = _load_policy(args.policy, args.checkpoint, exp.bandit)
    n = args.n or exp.evaluation.n_instances
    seed = exp.evaluation.seed if args.seed is None else args.seed
    report = evaluate_policy(policy, exp.bandit, seed, n, n_jobs=_threads(args))
    out = _out_dir(args, exp)
    (out / "pulls.csv").write_text(histogram_csv(report.sorted_pulls))
    print(" ".join(f"{v:.3f}" for v in report.sorted_pulls))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=sorted(PRESETS))
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--n", type=int, metavar="INSTANCES")
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--out", metavar="DIR")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pgts", description="Policy-gradient tuning of Thompson sampling.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", parents=[common], help="train meta-parameters")
    t.add_argument("--iterations", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--step-size", type=float)
    t.add_argument("--metric", choices=[m.value for m in MetricKind])
    t.add_argument("--baseline", choices=[b.value for b in BaselineKind])
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--max-grad-norm", type=float)
    t.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for reproducible files")
    t.add_argument("--dump-trajectories", type=int, default=0, metavar="N",
                   help="write N episodes of the final policy to trajectories.jsonl")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="regret of one policy")
    e.add_argument("--policy", default="naive_ts")
    e.add_argument("--checkpoint", metavar="PATH")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("compare", parents=[common], help="all policies on one shared batch")
    c.add_argument("--checkpoint", action="append", metavar="PATH")
    c.set_defaults(func=cmd_compare)

    v = sub.add_parser("variance-study", parents=[common], help="estimator covariance traces")
    v.add_argument("--lambda", dest="meta", default="canonical", metavar="canonical|PATH")
    v.add_argument("--bootstrap", type=int, default=1000)
    v.set_defaults(func=cmd_variance_study)

    h = sub.add_parser("pull-histogram", parents=[common], help="sorted mean pulls per arm")
    h.add_argument("--policy", default="naive_ts")
    h.add_argument("--checkpoint", metavar="PATH")
    h.set_defaults(func=cmd_pull_histogram)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
