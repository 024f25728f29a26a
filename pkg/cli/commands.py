"""Command-line interface.

Usage:
    python main.py generate  --scenario helheim --out runs/helheim --seed 0
    python main.py train     --config configs/helheim.json --model egcn,gcn,fcn
    python main.py evaluate  --config configs/helheim.json --model egcn,gcn,fcn
    python main.py benchmark --config configs/helheim.json

Exit codes: 0 ok, 1 usage, 2 data error, 3 numeric failure.
"""

import argparse
import asyncio
import sys
from dataclasses import replace
from typing import Any, Dict, List, Optional, Sequence

from cli.orchestrator import EmulatorOrchestrator
from cli.run_config import SCENARIOS, RunConfig, UsageError
from config.model_config import MODEL_KINDS
from config.settings import get_settings
from observability.logging_config import get_logger, set_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

COMMANDS = ("generate", "train", "evaluate", "benchmark")
BANNER = "=" * 80


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that reports usage errors as exceptions instead of exiting with 2."""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _comma_list(raw: str) -> List[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _model_list(raw: str) -> List[str]:
    kinds = _comma_list(raw)
    if kinds == ["none"]:
        return []
    unknown = [k for k in kinds if k not in MODEL_KINDS]
    if unknown or not kinds:
        raise argparse.ArgumentTypeError(f"expected a comma list of {MODEL_KINDS} (or 'none'), got {raw!r}")
    return kinds


def _param_list(raw: str) -> List[float]:
    try:
        return [float(v) for v in _comma_list(raw)]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"--params expects comma-separated numbers, got {raw!r}") from e


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="Run config JSON file")
    common.add_argument("--seed", type=int, help="Seed of oracle, weights, shuffling and split")
    common.add_argument("--out", help="Artifact directory")
    common.add_argument("--threads", type=int, help="Worker threads for the oracle sweep and evaluation")
    common.add_argument("--model", type=_model_list, help="Emulator kind(s): egcn, gcn, fcn, comma list, or 'none'")
    common.add_argument("--scenario", choices=SCENARIOS, help="Scenario preset (ignored with --config)")
    common.add_argument("--epochs", type=int, help="Training epochs")
    common.add_argument("--lr", type=float, help="Adam learning rate")
    common.add_argument("--hidden", type=int, help="Hidden, message and MLP width of the emulators")
    common.add_argument("--steps", type=int, help="Saved oracle steps per scenario")
    common.add_argument("--params", type=_param_list, help="Scenario parameter grid (Pa or m/yr), comma list")
    common.add_argument("--all-nodes", action="store_true", help="Score every node instead of ice-covered nodes")
    common.add_argument("--repeats", type=int, help="Benchmark repetitions")
    common.add_argument("--log-level", help="Logging level (DEBUG, INFO, WARNING, ...)")

    parser = _Parser(prog="ice-emulator", description="Graph-network emulators of a finite-element ice-flow model")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True
    helps = {
        "generate": "Run the oracle sweep and write mesh, trajectories and dataset",
        "train": "Train the selected emulators on the train split",
        "evaluate": "Score trained emulators on the held-out split",
        "benchmark": "Time the oracle and the emulators on the same sweep",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name], description=helps[name])
    return parser


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Config file (or scenario preset) with the command-line overrides applied."""
    settings = get_settings()
    if args.config:
        rc = RunConfig.load(args.config)
    else:
        scenario = args.scenario or "helheim"
        rc = RunConfig(scenario=scenario, out_dir=f"{settings.out_dir}/{scenario}", threads=settings.threads)

    train_changes = {"epochs": args.epochs, "lr": args.lr, "seed": args.seed}
    train_changes = {k: v for k, v in train_changes.items() if v is not None}
    split = rc.split
    if split is not None and args.seed is not None:
        split = replace(split, seed=args.seed)

    sim_overrides = dict(rc.sim_overrides)
    if args.steps is not None:
        sim_overrides["n_steps"] = args.steps
    model_overrides = dict(rc.model_overrides)
    if args.hidden is not None:
        model_overrides.update(hidden=args.hidden, message=args.hidden, mlp_hidden=args.hidden)

    try:
        train = replace(rc.train, **train_changes)
        rc = rc.with_overrides(
            seed=args.seed,
            out_dir=args.out,
            threads=args.threads,
            models=tuple(args.model) if args.model is not None else None,
            params=tuple(args.params) if args.params else None,
            repeats=args.repeats,
            masked_eval=False if args.all_nodes else None,
            train=train,
            split=split,
            sim_overrides=sim_overrides,
            model_overrides=model_overrides,
        )
        rc.sim_config()
        for kind in rc.models:
            rc.model_config(kind)
    except UsageError:
        raise
    except (TypeError, ValueError) as e:
        raise UsageError(f"invalid override: {e}") from e
    return rc


def _print_banner(title: str) -> None:
    print("\n" + BANNER)
    print(title)
    print(BANNER)


def _print_generate(summary: Dict[str, Any]) -> None:
    _print_banner("Generated dataset")
    print(f"scenario            {summary['scenario']}")
    print(f"mesh nodes          {summary['n_nodes']}")
    print(f"scenarios           {summary['n_scenarios']}")
    print(f"states per scenario {summary['states_per_scenario']}")
    print(f"samples             {summary['n_samples']}")
    print(f"bounds hash         {summary['bounds_hash'][:16]}")
    print(BANNER)


def _print_train(results: Sequence[Dict[str, Any]]) -> None:
    _print_banner("Training results")
    print(f"{'model':<6} {'epochs':>6} {'train loss':>12} {'val loss':>12} {'best epoch':>10} {'seconds':>9}")
    for r in results:
        val = "-" if r["val_loss"] is None else f"{r['val_loss']:.4e}"
        print(
            f"{r['model']:<6} {r['epochs']:>6} {r['train_loss']:>12.4e} {val:>12} "
            f"{r['best_epoch']:>10} {r['wall_time_s']:>9.2f}"
        )
    print(BANNER)


def _print_evaluate(reports) -> None:
    _print_banner("Held-out scores (averaged over parameter values)")
    print(f"{'model':<6} {'variable':<10} {'rmse':>12} {'r':>9} {'n':>9}")
    for report in reports:
        for name, score in report.averaged.items():
            print(f"{report.model:<6} {name:<10} {score.rmse:>12.4f} {score.r:>9.5f} {score.n:>9}")
    print(BANNER)


def _print_benchmark(report) -> None:
    _print_banner("Timing")
    print(report.summary())
    print(BANNER)


def run_command(command: str, rc: RunConfig) -> Any:
    """Run one workflow stage and print its summary table."""
    orchestrator = EmulatorOrchestrator(rc)
    if command == "generate":
        result = asyncio.run(orchestrator.generate())
        _print_generate(result)
    elif command == "train":
        result = asyncio.run(orchestrator.train())
        _print_train(result)
    elif command == "evaluate":
        result = asyncio.run(orchestrator.evaluate())
        _print_evaluate(result)
    elif command == "benchmark":
        result = asyncio.run(orchestrator.benchmark())
        _print_benchmark(result)
    else:
        raise UsageError(f"unknown command {command!r}")
    return result


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run the command and map failures to exit codes.

    Returns:
        0 ok, 1 usage, 2 data error (ValueError, OSError, KeyError),
        3 numeric failure (ArithmeticError)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.log_level:
            set_level(args.log_level)
        rc = resolve_run_config(args)
    except ValueError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as e:
        # --help
        return int(e.code or 0)

    try:
        run_command(args.command, rc)
    except UsageError as e:
        logger.error(f"{args.command}: {e}")
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError, KeyError) as e:
        logger.error(f"{args.command} failed: {type(e).__name__}: {e}")
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK
