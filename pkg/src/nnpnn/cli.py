"""Command-line entry point.

    nnpnn train-inverse  [--config cfg.json] --out DIR [--seed S] [--iters N] [--ckpt RESUME.json]
    nnpnn train-compress [--config cfg.json] --out DIR [--seed S] [--iters N] [--ckpt RESUME.json]
    nnpnn eval --ckpt CKPT.json [--trials N] [--seed S]
    nnpnn gradcheck [--seed S] [--count N]

Exit codes: 0 success, 1 check failure or aborted training, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import gradcheck
from .checkpoint import load_checkpoint, restore_run, save_checkpoint
from .config import RunConfig, load_config
from .errors import CheckpointError, ConfigError
from .metrics import write_csv
from .rng import Rng
from .training import Run, TrainingAborted, evaluate_compression, evaluate_inverse

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("nnpnn")


def _usage(message):
    print(f"nnpnn: error: {message}", file=sys.stderr)
    return EXIT_USAGE


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return v


def _nonneg(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be >= 0")
    return v


def build_parser():
    p = argparse.ArgumentParser(prog="nnpnn", description="Train and evaluate network-processing networks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in (("train-inverse", "train a general inverse function"),
                        ("train-compress", "train a network compressor")):
        t = sub.add_parser(name, help=help_)
        t.add_argument("--config", type=Path, help="JSON run config (defaults if omitted)")
        t.add_argument("--out", type=Path, required=True, help="output directory")
        t.add_argument("--seed", type=_u64)
        t.add_argument("--iters", type=_nonneg, help="override the iteration count")
        t.add_argument("--ckpt", type=Path, help="resume from this checkpoint")

    e = sub.add_parser("eval", help="evaluate a checkpoint on fresh target networks")
    e.add_argument("--ckpt", type=Path, required=True)
    e.add_argument("--trials", type=int, default=1000)
    e.add_argument("--seed", type=_u64, default=0)

    g = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    g.add_argument("--seed", type=_u64, default=0)
    g.add_argument("--count", type=int, default=20, help="random cases per suite")
    g.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    return p


def _resolve_run(args, experiment):
    if args.ckpt is not None:
        state, cfg = load_checkpoint(args.ckpt)
        if cfg.experiment != experiment:
            raise ConfigError(f"checkpoint is for experiment {cfg.experiment!r}")
        if args.seed is not None and args.seed != cfg.seed:
            raise ConfigError("--seed cannot change the seed of a resumed run")
        cfg = cfg.with_overrides(iterations=args.iters)
        return restore_run(state, cfg)
    if args.config is not None:
        cfg = load_config(args.config, experiment)
    else:
        cfg = RunConfig(experiment=experiment)
    cfg = cfg.with_overrides(seed=args.seed, iterations=args.iters)
    return Run(cfg)


def cmd_train(args, experiment):
    run = _resolve_run(args, experiment)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config-resolved.json").write_text(json.dumps(run.cfg.to_json(), indent=2, sort_keys=True) + "\n")

    def on_checkpoint(iteration, state):
        save_checkpoint(out / f"ckpt-{iteration}.json", state)
        write_csv(run.history, out / "metrics.csv")

    start = time.perf_counter()
    try:
        run.advance(on_checkpoint=on_checkpoint)
    except TrainingAborted as exc:
        save_checkpoint(out / "ckpt-last-good.json", exc.checkpoint)
        write_csv(run.history, out / "metrics.csv")
        print(f"nnpnn: {exc}", file=sys.stderr)
        return EXIT_FAIL
    write_csv(run.history, out / "metrics.csv")
    save_checkpoint(out / "ckpt-final.json", run.state_dict())
    ratio, mse = run.evaluate()
    report = {"experiment": run.cfg.experiment, "iteration": run.iteration, "ratio": ratio.to_json()}
    if mse is not None:
        report["mse"] = mse.to_json()
    log.info("trained %d iterations in %.1fs", run.iteration, time.perf_counter() - start)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_eval(args):
    if args.trials < 1:
        return _usage("--trials must be >= 1")
    state, cfg = load_checkpoint(args.ckpt)
    run = restore_run(state, cfg)
    rng = Rng(args.seed)
    if cfg.experiment == "inverse":
        stats = evaluate_inverse(run.F, rng, args.trials, cfg.target)
        statistic = "manhattan_ratio"
    else:
        stats = evaluate_compression(run.F, run.F2, rng, args.trials, cfg.target)
        statistic = "mse"
    print(json.dumps({"experiment": cfg.experiment, "iteration": run.iteration, "statistic": statistic,
                      **stats.to_json()}, sort_keys=True))
    return EXIT_OK


def cmd_gradcheck(args):
    if args.count < 1:
        return _usage("--count must be >= 1")
    results = gradcheck.run_suites(seed=args.seed, count=args.count, fault=args.inject_fault)
    text, ok = gradcheck.report(results)
    print(text)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.command == "train-inverse":
            return cmd_train(args, "inverse")
        if args.command == "train-compress":
            return cmd_train(args, "compress")
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_gradcheck(args)
    except (ConfigError, CheckpointError) as exc:
        return _usage(str(exc))


if __name__ == "__main__":
    sys.exit(main())
