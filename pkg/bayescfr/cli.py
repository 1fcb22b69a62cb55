"""Unified command-line interface for Bayesian CFR experiments."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Iterable

from ._logging import configure_logging
from ._version import __version__
from .belief import DegenerateKernelError, EstimatorUnavailableError
from .config import GRID_LAYOUTS, algorithm_is_baseline
from .diagnostics.checksums import game_checksum
from .diagnostics.equilibrium import solve_sequence_form
from .diagnostics.exploitability import exploitability
from .games.core import collapse_types
from .games.poker import build_game
from .games.tree import game_tree
from .games.values import StrategyProfile
from .harness import ConfigError, grid, load_config, posterior_bench, run
from .solvers.audit import AuditRefusedError, theorem_audit
from .solvers.network import TrainingDivergedError
from .solvers.regret import average_profile_table
from .solvers.settings import SolverConfig
from .storage import derive_metadata_path, read_metadata, read_table_checkpoint

ASCII_BANNER = (
    "  _                            __      "
    "\n | |__   __ _ _   _  ___  ___ / _|_ __ "
    "\n | '_ \\ / _` | | | |/ _ \\/ __| |_| '__|"
    "\n | |_) | (_| | |_| |  __/ (__|  _| |   "
    "\n |_.__/ \\__,_|\\__, |\\___|\\___|_| |_|   "
    "\n              |___/ cfr               "
)

COMMAND_CATEGORIES = [
    "Solving",
    "Evaluation",
    "Benchmarks",
]

COMMAND_REGISTRY: list[dict[str, Any]] = []
_COMMAND_COUNTER = 0

EVAL_BELIEF_CHOICES = ("truth", "prior", "posterior")
SOLVER_ERRORS = (TrainingDivergedError, EstimatorUnavailableError, DegenerateKernelError)


def _command_column_width(min_width: int = 20) -> int:
    width = max((len(_command_display(entry)) for entry in COMMAND_REGISTRY), default=0)
    return max(width, min_width)


def _build_command_lines(width: int) -> list[str]:
    lines: list[str] = []
    for category in COMMAND_CATEGORIES:
        entries = [entry for entry in COMMAND_REGISTRY if entry["category"] == category]
        if not entries:
            continue
        lines.append(f"{category}:")
        for entry in sorted(entries, key=lambda item: item["order"]):
            display = _command_display(entry)
            lines.append(f"  {display.ljust(width)}  {entry['help']}")
        lines.append("")
    return lines


def _attach_help_banner(parser: argparse.ArgumentParser) -> None:
    original = parser.format_help

    def _wrapped() -> str:
        return f"{ASCII_BANNER}\n\n{original()}"

    parser.format_help = _wrapped


def _register_command(
    *,
    category: str,
    name: str,
    aliases: list[str] | None,
    help_text: str,
) -> None:
    global _COMMAND_COUNTER
    COMMAND_REGISTRY.append(
        {
            "category": category,
            "name": name,
            "aliases": aliases or [],
            "help": help_text,
            "order": _COMMAND_COUNTER,
        }
    )
    _COMMAND_COUNTER += 1


def _add_command(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
    *,
    category: str,
    name: str,
    help_text: str,
    aliases: list[str] | None = None,
) -> argparse.ArgumentParser:
    parser = subparsers.add_parser(
        name,
        aliases=aliases or [],
        help=help_text,
        description=help_text,
    )
    _attach_help_banner(parser)
    _register_command(category=category, name=name, aliases=aliases, help_text=help_text)
    return parser


# ---------------------------------------------------------------------------
# Parser construction
# ---------------------------------------------------------------------------


def _add_experiment_options(parser: argparse.ArgumentParser, *, with_algorithm: bool = True) -> None:
    parser.add_argument("--config", help="Flat key=value experiment file")
    parser.add_argument("--game", help="Game name (kuhn or leduc)")
    if with_algorithm:
        parser.add_argument("--algo", dest="algorithm", help="Solver algorithm")
    parser.add_argument("--type-model", dest="type_model", help="Type model, e.g. pure-n or mixed-4")
    parser.add_argument("--iters", dest="iterations", type=int, help="Iterations per run")
    parser.add_argument(
        "--seed",
        dest="seeds",
        type=int,
        action="append",
        help="Seed to run (repeatable)",
    )
    parser.add_argument("--out", help="Output directory")
    parser.add_argument(
        "--set",
        dest="settings",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override any configuration key (repeatable)",
    )


def _add_solve_arguments(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
) -> None:
    parser = _add_command(
        subparsers,
        category="Solving",
        name="solve",
        help_text="Run one experiment and write metrics, checkpoints and sidecars",
    )
    _add_experiment_options(parser)
    parser.set_defaults(handler=_cmd_solve)


def _add_grid_arguments(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
) -> None:
    parser = _add_command(
        subparsers,
        category="Solving",
        name="grid",
        help_text="Run an algorithm by type-model grid and write a summary CSV",
    )
    parser.add_argument("layout", choices=sorted(GRID_LAYOUTS), help="Grid layout")
    _add_experiment_options(parser, with_algorithm=False)
    parser.add_argument(
        "--type-models",
        dest="type_models",
        help="Comma-separated type models replacing the layout's list (may be empty)",
    )
    parser.add_argument(
        "--algorithms",
        help="Comma-separated algorithms replacing the layout's list",
    )
    parser.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="Grid cells to run in parallel worker processes (default: 1)",
    )
    parser.set_defaults(handler=_cmd_grid)


def _add_eval_arguments(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
) -> None:
    parser = _add_command(
        subparsers,
        category="Evaluation",
        name="eval",
        help_text="Report the exploitability of a saved table checkpoint",
    )
    parser.add_argument("checkpoint", help="Table checkpoint written by `bayescfr solve`")
    parser.add_argument(
        "-m",
        "--metadata",
        dest="metadata_path",
        help="Metadata JSON path (default: alongside the checkpoint)",
    )
    parser.add_argument(
        "--belief",
        choices=EVAL_BELIEF_CHOICES,
        default="prior",
        help="Type distribution to evaluate under",
    )
    parser.add_argument(
        "--lp",
        action="store_true",
        help="Also print the sequence-form LP game value",
    )
    parser.add_argument("--json", action="store_true", help="Print the report as JSON")
    parser.set_defaults(handler=_cmd_eval)


def _add_audit_arguments(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
) -> None:
    parser = _add_command(
        subparsers,
        category="Evaluation",
        name="audit",
        help_text="Check the Bayesian regret bounds on a small game",
    )
    parser.add_argument("--game", default="kuhn", help="Game name (default: kuhn)")
    parser.add_argument("--type-model", dest="type_model", default="pure-n")
    parser.add_argument("--algo", dest="algorithm", default="bcfr", help="bcfr, bcfr+ or bcfr-no-posterior")
    parser.add_argument(
        "--checkpoints",
        default="1,10,100",
        help="Comma-separated iterations to audit (default: 1,10,100)",
    )
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--brute-force",
        action="store_true",
        help="Enumerate every pure deviation instead of max-backup",
    )
    parser.set_defaults(handler=_cmd_audit)


def _add_posterior_bench_arguments(
    subparsers: argparse._SubParsersAction[argparse.ArgumentParser],
) -> None:
    parser = _add_command(
        subparsers,
        category="Benchmarks",
        name="posterior-bench",
        aliases=["pbench"],
        help_text="Posterior consistency and CKDE convergence curves as CSV",
    )
    parser.add_argument("--out", default="posterior-bench", help="Output directory")
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--references", type=int, default=500)
    parser.add_argument("--observations", type=int, default=200)
    parser.add_argument("--ckde-seeds", dest="ckde_seeds", type=int, default=20)
    parser.set_defaults(handler=_cmd_posterior_bench)


def _format_main_help(parser: argparse.ArgumentParser) -> str:
    usage = f"usage: {parser.prog} <command> [options]"
    description = parser.description or ""

    lines = [ASCII_BANNER, "", usage, "", description.rstrip(), ""]
    width = _command_column_width()
    lines.extend(_build_command_lines(width))

    option_label = "-h, --help"
    lines.extend(
        [
            "General options:",
            f"  {option_label.ljust(width)}  Show this message and exit",
            "",
            "Set BAYES_CFR_LOG=info or debug for progress logging on stderr.",
            "Run 'bayescfr <command> --help' for details on a specific command.",
        ]
    )
    return "\n".join(lines)


def _command_display(entry: dict[str, Any]) -> str:
    if entry["aliases"]:
        alias_text = ", ".join(entry["aliases"])
        return f"{entry['name']} ({alias_text})"
    return entry["name"]


def _format_command_list() -> str:
    width = _command_column_width()
    lines = [ASCII_BANNER, "", "Available commands:", ""]
    lines.extend(_build_command_lines(width))
    if lines and lines[-1] == "":
        lines.pop()
    lines.append("Run 'bayescfr <command> --help' for details on a specific command.")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bayescfr",
        description="Bayesian counterfactual regret minimisation for typed poker games",
        add_help=False,
    )
    parser.add_argument("-h", "--help", action="help", default=argparse.SUPPRESS)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument(
        "--list-commands",
        action="store_true",
        help="List available commands and exit",
    )
    COMMAND_REGISTRY.clear()
    global _COMMAND_COUNTER
    _COMMAND_COUNTER = 0
    subparsers = parser.add_subparsers(dest="command", required=False)
    _add_solve_arguments(subparsers)
    _add_grid_arguments(subparsers)
    _add_eval_arguments(subparsers)
    _add_audit_arguments(subparsers)
    _add_posterior_bench_arguments(subparsers)
    parser.format_help = lambda: _format_main_help(parser)
    return parser


# ---------------------------------------------------------------------------
# Command handlers
# ---------------------------------------------------------------------------


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    values: dict[str, str] = {}
    for setting in args.settings:
        if "=" not in setting:
            raise ConfigError(f"--set expects KEY=VALUE, got {setting!r}")
        key, value = setting.split("=", 1)
        values[key.strip()] = value.strip()
    for name in ("game", "algorithm", "type_model", "iterations", "out"):
        value = getattr(args, name, None)
        if value is not None:
            values[name] = str(value)
    if args.seeds:
        values["seeds"] = ",".join(str(seed) for seed in args.seeds)
    return values


def _cmd_solve(args: argparse.Namespace) -> int:
    config = load_config(args.config, _overrides(args))
    try:
        result = run(config)
    except SOLVER_ERRORS as exc:
        raise SystemExit(f"bayescfr solve: solver failed: {exc}") from exc
    last: dict[int, Any] = {}
    for row in result.rows:
        last[row.seed] = row
    for row in last.values():
        print(
            f"{row.run_id}\titeration={row.iteration}\t"
            f"exploitability={row.exploitability:.6g}\tmbb/g={row.mbb_per_game:.3f}\t"
            f"posterior_l1={row.posterior_l1:.4f}"
        )
    print(f"Wrote metrics to {result.metrics_path}")
    return 0


def _split_names(value: str | None) -> list[str] | None:
    if value is None:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _cmd_grid(args: argparse.Namespace) -> int:
    overrides = _overrides(args)
    if args.config is None:
        overrides.setdefault("game", "leduc")
    base = load_config(args.config, overrides)
    try:
        summary = grid(
            args.layout,
            base,
            type_models=_split_names(args.type_models),
            algorithms=_split_names(args.algorithms),
            jobs=args.jobs,
        )
    except SOLVER_ERRORS as exc:
        raise SystemExit(f"bayescfr grid: solver failed: {exc}") from exc
    if summary.type_models:
        print("\t".join(["type_model", *summary.algorithms]))
        for model in summary.type_models:
            cells = [f"{summary.final[(name, model)]:.6g}" for name in summary.algorithms]
            print("\t".join([model, *cells]))
        averaged = [f"{summary.averaged[name]:.6g}" for name in summary.algorithms]
        print("\t".join(["Averaged", *averaged]))
    print(f"Wrote summary to {summary.path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    checkpoint = Path(args.checkpoint).expanduser().resolve()
    if not checkpoint.exists():
        raise SystemExit(f"Checkpoint not found: {checkpoint}")
    metadata_path = (
        Path(args.metadata_path).expanduser().resolve()
        if args.metadata_path
        else derive_metadata_path(checkpoint)
    )
    if not metadata_path.exists():
        raise SystemExit(f"Metadata sidecar not found: {metadata_path}")
    metadata = read_metadata(metadata_path)

    typed = build_game(metadata["game"], metadata["type_model"])
    baseline = algorithm_is_baseline(metadata["algorithm"])
    solver_spec = collapse_types(typed) if baseline else typed
    _, strategy, _ = read_table_checkpoint(checkpoint, expected_hash=game_checksum(solver_spec))
    profile = StrategyProfile.from_table(game_tree(typed), average_profile_table(strategy))

    if args.belief == "truth":
        belief = [0.0] * typed.num_types
        belief[int(metadata["competitor_type"])] = 1.0
    elif args.belief == "prior":
        belief = list(typed.type_prior or [1.0 / typed.num_types] * typed.num_types)
    else:
        belief = list(metadata["posterior"])
        if len(belief) != typed.num_types:
            belief = list(typed.type_prior or [1.0 / typed.num_types] * typed.num_types)

    report = exploitability(
        typed, profile, belief, source=checkpoint.name, iteration=int(metadata["iteration"])
    )
    payload = {
        "checkpoint": checkpoint.name,
        "iteration": report.iteration,
        "belief": list(report.belief),
        "exploitability": report.exploitability,
        "mbb_per_game": report.mbb_per_game,
        "big_blind": report.big_blind,
        "best_response_values": list(report.best_response_values),
        "profile_values": list(report.profile_values),
    }
    if args.lp:
        payload["lp_game_value"] = solve_sequence_form(typed, belief).value

    if args.json:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
        return 0
    print(f"Checkpoint: {payload['checkpoint']} (iteration {report.iteration})")
    print(f"Belief: {', '.join(f'{value:.4f}' for value in report.belief)}")
    print(f"Exploitability: {report.exploitability:.6g} chips/hand ({report.mbb_per_game:.3f} mbb/g)")
    for player, value in enumerate(report.best_response_values):
        print(f"Best response value (player {player}): {value:.6g}")
    if args.lp:
        print(f"LP game value (player 0): {payload['lp_game_value']:.6g}")
    return 0


def _cmd_audit(args: argparse.Namespace) -> int:
    spec = build_game(args.game, args.type_model)
    checkpoints = [int(item) for item in _split_names(args.checkpoints) or []]
    config = SolverConfig(algorithm=args.algorithm, iterations=max(checkpoints, default=0), seed=args.seed)
    try:
        reports = theorem_audit(spec, config, checkpoints, brute_force=args.brute_force)
    except AuditRefusedError as exc:
        raise SystemExit(f"bayescfr audit: {exc}") from exc
    print("iteration\tplayer\toverall\timmediate_sum\tsum_bound\tmax_immediate\timmediate_bound\tholds")
    for report in reports:
        for row in report.players:
            holds = row.decomposition_holds and row.bound_holds and row.immediate_holds
            print(
                f"{report.iteration}\t{row.player}\t{row.overall_regret:.6g}\t"
                f"{row.immediate_positive_sum:.6g}\t{row.sum_bound:.6g}\t"
                f"{row.max_immediate_regret:.6g}\t{row.immediate_bound:.6g}\t{holds}"
            )
    return 0 if all(report.holds for report in reports) else 1


def _cmd_posterior_bench(args: argparse.Namespace) -> int:
    result = posterior_bench(
        Path(args.out),
        trials=args.trials,
        references=args.references,
        observations=args.observations,
        ckde_seeds=args.ckde_seeds,
    )
    print(f"Trials under threshold: {result.success_rate:.2%}")
    print(f"Wrote {result.consistency_path}")
    print(f"Wrote {result.ckde_path}")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def main(argv: Iterable[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv) if argv is not None else None)

    if getattr(args, "list_commands", False):
        print(_format_command_list())
        return 0

    handler = getattr(args, "handler", None)
    command = getattr(args, "command", None)
    if command is None or handler is None:
        parser.print_help()
        return 0

    try:
        configure_logging()
        return handler(args)
    except (ValueError, FileNotFoundError) as exc:
        raise SystemExit(f"bayescfr {command}: {exc}") from exc


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
