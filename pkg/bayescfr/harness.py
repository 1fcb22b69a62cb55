"""Experiment orchestration: configuration, seeded runs, grids and metrics files."""

from __future__ import annotations

import csv
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from .belief import ckde_convergence, consistency_trial, posterior_l1
from .config import (
    ALGORITHMS,
    GAMES,
    GRID_LAYOUTS,
    METRICS_FILENAME,
    NETWORK_SUFFIX,
    TABLE_SUFFIX,
    TYPE_MODELS,
    algorithm_is_baseline,
)
from .diagnostics.checksums import game_checksum, game_checksum_hex
from .diagnostics.exploitability import exploitability
from .games.core import GameSpec, collapse_types
from .games.poker import build_game
from .games.values import StrategyProfile
from .solvers.deep import DeepState, deep_bcfr_run, snapshot_profile
from .solvers.network import NetworkApproximator
from .solvers.settings import BeliefConfig, DeepConfig, PosteriorMode, SolverConfig
from .solvers.tabular import SolverState, average_profile, draw_competitor_type, solve
from .storage import (
    derive_metadata_path,
    write_metadata,
    write_network_checkpoint,
    write_table_checkpoint,
)

logger = logging.getLogger(__name__)

EVAL_BELIEFS = ("truth", "prior", "posterior")
SUMMARY_FILENAME = "summary.csv"
POSTERIOR_FILENAME = "posterior_consistency.csv"
CKDE_FILENAME = "ckde_convergence.csv"
AVERAGED_LABEL = "Averaged"

_TRUE_WORDS = {"1", "true", "yes", "on"}
_FALSE_WORDS = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    """Raised for unknown names, missing keys or unusable output locations."""


@dataclass(frozen=True)
class ExperimentConfig:
    game: str
    type_model: str = "pure-n"
    algorithm: str = "bcfr"
    iterations: int = 1000
    traversals: int = 1
    seeds: tuple[int, ...] = (0,)
    eval_every: str | int = "pow2"
    eval_belief: str = "prior"
    posterior_mode: str | None = None
    use_belief: bool = True
    checkpoint_every: int = 0
    out: Path = Path("runs")
    belief: BeliefConfig = field(default_factory=BeliefConfig)
    deep: DeepConfig = field(default_factory=DeepConfig)

    def __post_init__(self) -> None:
        if self.game not in GAMES:
            raise ConfigError(f"Unknown game {self.game!r}; expected one of {', '.join(GAMES)}")
        if self.type_model not in TYPE_MODELS:
            raise ConfigError(f"Unknown type model {self.type_model!r}")
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                f"Unknown algorithm {self.algorithm!r}; expected one of {', '.join(ALGORITHMS)}"
            )
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if self.iterations < 0 or self.traversals < 1 or self.checkpoint_every < 0:
            raise ConfigError("iterations and checkpoint_every must be >= 0, traversals >= 1")
        if isinstance(self.eval_every, str):
            if self.eval_every != "pow2":
                raise ConfigError(f"eval_every must be 'pow2' or a positive integer, got {self.eval_every!r}")
        elif self.eval_every < 1:
            raise ConfigError("eval_every must be positive")
        if self.eval_belief not in EVAL_BELIEFS:
            raise ConfigError(f"Unknown eval_belief {self.eval_belief!r}")
        if self.posterior_mode is not None:
            try:
                PosteriorMode(self.posterior_mode)
            except ValueError as exc:
                raise ConfigError(f"Unknown posterior_mode {self.posterior_mode!r}") from exc
        object.__setattr__(self, "out", Path(self.out))
        object.__setattr__(self, "seeds", tuple(int(seed) for seed in self.seeds))

    def solver_config(self, seed: int) -> SolverConfig:
        """The solver settings for one seed of this experiment."""

        use_belief = self.use_belief and self.algorithm != "bcfr-no-posterior"
        return SolverConfig(
            algorithm=self.algorithm,
            iterations=self.iterations,
            traversals=self.traversals,
            seed=seed,
            posterior_mode=PosteriorMode(self.posterior_mode) if self.posterior_mode else None,
            use_belief=use_belief,
            belief=self.belief,
            deep=self.deep,
        )

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["out"] = str(self.out)
        data["seeds"] = list(self.seeds)
        data["belief"]["prior"] = (
            self.belief.prior if isinstance(self.belief.prior, str) else list(self.belief.prior)
        )
        data["deep"]["hidden"] = list(self.deep.hidden)
        return data


# ---------------------------------------------------------------------------
# Configuration loading
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat ``key=value`` lines; ``#`` starts a comment."""

    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Line {number}: expected key=value, got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"Line {number}: empty key")
        values[key] = value
    return values


def _parse_bool(key: str, value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in _TRUE_WORDS:
        return True
    if lowered in _FALSE_WORDS:
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _parse_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from exc


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from exc


def _parse_list(key: str, value: str, parse: Callable[[str, str], Any]) -> tuple[Any, ...]:
    items = [item.strip() for item in value.split(",") if item.strip()]
    if not items:
        raise ConfigError(f"{key}: expected a comma-separated list")
    return tuple(parse(key, item) for item in items)


def _parse_prior(key: str, value: str) -> str | tuple[float, ...]:
    if value in ("model", "uniform"):
        return value
    return _parse_list(key, value, _parse_float)


def _parse_eval_every(key: str, value: str) -> str | int:
    return value if value == "pow2" else _parse_int(key, value)


def _text(key: str, value: str) -> str:
    return value


_TOP_LEVEL: dict[str, tuple[str, Callable[[str, str], Any]]] = {
    "game": ("game", _text),
    "type_model": ("type_model", _text),
    "algorithm": ("algorithm", _text),
    "iterations": ("iterations", _parse_int),
    "traversals": ("traversals", _parse_int),
    "seeds": ("seeds", lambda key, value: _parse_list(key, value, _parse_int)),
    "eval_every": ("eval_every", _parse_eval_every),
    "eval_belief": ("eval_belief", _text),
    "posterior_mode": ("posterior_mode", _text),
    "use_belief": ("use_belief", _parse_bool),
    "checkpoint_every": ("checkpoint_every", _parse_int),
    "out": ("out", lambda key, value: Path(value)),
}

_BELIEF_KEYS: dict[str, tuple[str, Callable[[str, str], Any]]] = {
    "belief.w": ("w", _parse_float),
    "belief.w_prime": ("w_prime", _parse_float),
    "belief.m": ("references_per_type", _parse_int),
    "belief.n": ("observation_window", _parse_int),
    "belief.prior": ("prior", _parse_prior),
    "belief.observations": ("observations_per_iteration", _parse_int),
    "belief.online_refs": ("online_references", _parse_bool),
}

_DEEP_KEYS: dict[str, tuple[str, Callable[[str, str], Any]]] = {
    "deep.hidden": ("hidden", lambda key, value: _parse_list(key, value, _parse_int)),
    "deep.lr": ("learning_rate", _parse_float),
    "deep.batch": ("batch_size", _parse_int),
    "deep.steps": ("steps", _parse_int),
    "deep.strategy_steps": ("strategy_steps", _parse_int),
    "deep.capacity": ("capacity", _parse_int),
    "deep.memory": ("memory_policy", _text),
    "deep.loss": ("loss", _text),
    "deep.approximator": ("approximator", _text),
    "deep.type_layer": ("type_layer", _parse_int),
}

CONFIG_KEYS = tuple(_TOP_LEVEL) + tuple(_BELIEF_KEYS) + tuple(_DEEP_KEYS)


def config_from_mapping(values: Mapping[str, str]) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from string values keyed by config key."""

    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"Unknown configuration key(s): {', '.join(unknown)}")
    if not values.get("game"):
        raise ConfigError("Missing required key 'game'")

    top: dict[str, Any] = {}
    belief: dict[str, Any] = {}
    deep: dict[str, Any] = {}
    for table, target in ((_TOP_LEVEL, top), (_BELIEF_KEYS, belief), (_DEEP_KEYS, deep)):
        for key, (name, parse) in table.items():
            if key in values:
                target[name] = parse(key, values[key])
    try:
        return ExperimentConfig(
            **top,
            belief=BeliefConfig(**belief),
            deep=DeepConfig(**deep),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(
    path: str | Path | None = None,
    overrides: Mapping[str, str] | None = None,
) -> ExperimentConfig:
    """Defaults, then the file at *path*, then *overrides* (highest precedence)."""

    values: dict[str, str] = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        values.update(parse_config_text(path.read_text()))
    values.update(overrides or {})
    return config_from_mapping(values)


def prepare_output(out: Path) -> Path:
    """Create *out* and check that it is writable."""

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"Cannot create output directory {out}: {exc}") from exc
    if not out.is_dir() or not os.access(out, os.W_OK):
        raise ConfigError(f"Output directory {out} is not writable")
    return out


# ---------------------------------------------------------------------------
# Runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRow:
    run_id: str
    algorithm: str
    game: str
    type_model: str
    seed: int
    iteration: int
    exploitability: float
    mbb_per_game: float
    exploitability_truth: float
    posterior_l1: float
    wall_clock_ms: float


METRICS_COLUMNS = tuple(item.name for item in fields(MetricsRow))


def evaluation_points(iterations: int, every: str | int) -> list[int]:
    """Iterations at which to evaluate; the final iteration is always included."""

    if iterations < 1:
        return []
    if every == "pow2":
        points = {1 << power for power in range(iterations.bit_length()) if 1 << power <= iterations}
    else:
        points = set(range(int(every), iterations + 1, int(every)))
    points.add(iterations)
    return sorted(points)


def run_id(config: ExperimentConfig, seed: int) -> str:
    return f"{config.algorithm}-{config.game}-{config.type_model}-s{seed}"


@dataclass(frozen=True)
class RunResult:
    metrics_path: Path
    rows: tuple[MetricsRow, ...]
    checkpoints: tuple[Path, ...]


def _truth(spec: GameSpec, competitor_type: int) -> np.ndarray:
    truth = np.zeros(spec.num_types)
    truth[competitor_type] = 1.0
    return truth


def _prior(spec: GameSpec) -> np.ndarray:
    if spec.type_prior is None:
        return np.full(spec.num_types, 1.0 / spec.num_types)
    return np.asarray(spec.type_prior, dtype=float)


class _SeedRun:
    """One (config, seed) cell: solver callbacks produce metrics and checkpoints."""

    def __init__(self, config: ExperimentConfig, seed: int) -> None:
        self.config = config
        self.seed = seed
        self.run_id = run_id(config, seed)
        self.typed = build_game(config.game, config.type_model)
        self.competitor_type = draw_competitor_type(self.typed, seed)
        self.baseline = algorithm_is_baseline(config.algorithm)
        self.solver_spec = collapse_types(self.typed) if self.baseline else self.typed
        self.points = set(evaluation_points(config.iterations, config.eval_every))
        self.rows: list[MetricsRow] = []
        self.checkpoints: list[Path] = []
        self.elapsed = 0.0
        self._mark = time.perf_counter()

    def belief_vector(self, state: SolverState | DeepState) -> np.ndarray:
        if self.solver_spec.num_types == 1:
            return _prior(self.typed)
        return np.asarray(state.belief.probabilities, dtype=float)

    def evaluation_belief(self, state: SolverState | DeepState) -> np.ndarray:
        if self.config.eval_belief == "truth":
            return _truth(self.typed, self.competitor_type)
        if self.config.eval_belief == "prior":
            return _prior(self.typed)
        return self.belief_vector(state)

    def profile(self, state: SolverState | DeepState) -> StrategyProfile:
        if isinstance(state, DeepState):
            return snapshot_profile(state)
        return average_profile(state)

    @property
    def solver_competitor_type(self) -> int | None:
        # The collapsed game has a single type; the typed competitor is only evaluated against.
        return None if self.baseline else self.competitor_type

    def __call__(self, state: SolverState | DeepState) -> None:
        iteration = state.iteration
        every = self.config.checkpoint_every
        if every and iteration % every == 0 and iteration != self.config.iterations:
            self.checkpoint(state, suffix=f"-it{iteration}")
        if iteration not in self.points:
            return
        self.elapsed += time.perf_counter() - self._mark
        profile = self.profile(state)
        belief = self.evaluation_belief(state)
        report = exploitability(self.typed, profile, belief, source=self.run_id, iteration=iteration)
        truth = _truth(self.typed, self.competitor_type)
        if np.array_equal(belief, truth):
            truth_epsilon = report.exploitability
        else:
            truth_epsilon = exploitability(self.typed, profile, truth).exploitability
        l1 = posterior_l1(self.belief_vector(state), self.competitor_type)
        self.rows.append(
            MetricsRow(
                run_id=self.run_id,
                algorithm=self.config.algorithm,
                game=self.config.game,
                type_model=self.config.type_model,
                seed=self.seed,
                iteration=iteration,
                exploitability=report.exploitability,
                mbb_per_game=report.mbb_per_game,
                exploitability_truth=truth_epsilon,
                posterior_l1=l1,
                wall_clock_ms=round(self.elapsed * 1000.0, 3),
            )
        )
        logger.info(
            "%s iteration %d: exploitability %.6g (%.2f mbb/g), posterior L1 %.4f",
            self.run_id,
            iteration,
            report.exploitability,
            report.mbb_per_game,
            l1,
        )
        self._mark = time.perf_counter()

    def metadata(self, state: SolverState | DeepState) -> dict[str, Any]:
        return {
            "config": self.config.to_dict(),
            "seed": self.seed,
            "algorithm": self.config.algorithm,
            "game": self.config.game,
            "type_model": self.config.type_model,
            "iteration": state.iteration,
            "posterior": [float(value) for value in self.belief_vector(state)],
            "competitor_type": self.competitor_type,
            "rng_state": state.rng.bit_generator.state,
            "belief_rng_state": state.belief_rng.bit_generator.state,
            "game_name": self.solver_spec.name,
            "game_hash": game_checksum_hex(self.solver_spec),
        }

    def checkpoint(self, state: SolverState | DeepState, *, suffix: str = "") -> Path:
        out = self.config.out
        base = f"{self.run_id}{suffix}"
        metadata = self.metadata(state)
        if isinstance(state, DeepState):
            networks = {"strategy": state.strategy}
            networks.update(
                {f"advantage{player}": model for player, model in enumerate(state.advantages)}
            )
            files = {}
            for role, model in networks.items():
                if isinstance(model, NetworkApproximator):
                    path = out / f"{base}-{role}{NETWORK_SUFFIX}"
                    write_network_checkpoint(path, model.net)
                    files[role] = path.name
            metadata["networks"] = files
            sidecar = out / f"{base}.json"
        else:
            path = write_table_checkpoint(
                out / f"{base}{TABLE_SUFFIX}",
                state.regrets,
                state.strategy,
                game_checksum(self.solver_spec),
            )
            sidecar = derive_metadata_path(path)
        write_metadata(sidecar, metadata)
        self.checkpoints.append(sidecar)
        return sidecar


def write_metrics(path: Path, rows: Iterable[MetricsRow]) -> Path:
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow([getattr(row, name) for name in METRICS_COLUMNS])
    return path


def run(config: ExperimentConfig) -> RunResult:
    """Solve, evaluate and checkpoint every seed; write ``<out>/metrics.csv``."""

    prepare_output(config.out)
    rows: list[MetricsRow] = []
    checkpoints: list[Path] = []
    for seed in config.seeds:
        cell = _SeedRun(config, seed)
        solver_config = config.solver_config(seed)
        logger.info("starting %s", cell.run_id)
        if config.algorithm == "deep-bcfr":
            state: SolverState | DeepState = deep_bcfr_run(
                cell.solver_spec,
                solver_config,
                competitor_type=cell.solver_competitor_type,
                callback=cell,
            ).state
        else:
            state = solve(
                cell.solver_spec,
                solver_config,
                competitor_type=cell.solver_competitor_type,
                callback=cell,
            )
        cell.checkpoint(state)
        rows.extend(cell.rows)
        checkpoints.extend(cell.checkpoints)
    metrics_path = write_metrics(config.out / METRICS_FILENAME, rows)
    return RunResult(metrics_path, tuple(rows), tuple(checkpoints))


# ---------------------------------------------------------------------------
# Grids and benchmarks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridSummary:
    path: Path
    algorithms: tuple[str, ...]
    type_models: tuple[str, ...]
    final: dict[tuple[str, str], float]
    averaged: dict[str, float]


def _final_exploitability(result: RunResult) -> float:
    last: dict[int, float] = {}
    for row in result.rows:
        last[row.seed] = row.exploitability
    return float(np.mean(list(last.values()))) if last else float("nan")


def grid(
    layout: str,
    base: ExperimentConfig,
    *,
    type_models: Sequence[str] | None = None,
    algorithms: Sequence[str] | None = None,
    jobs: int = 1,
) -> GridSummary:
    """Run every (algorithm, type model) cell of *layout* and summarise final ε.

    Cells share *base* for everything else; each writes its own run directory
    under ``base.out``. With ``jobs > 1`` cells run in worker processes; the
    summary is merged afterwards in layout order. It holds the seed-mean final
    exploitability per cell and an ``Averaged`` row over type models.
    """

    if layout not in GRID_LAYOUTS:
        raise ConfigError(f"Unknown grid {layout!r}; expected one of {', '.join(GRID_LAYOUTS)}")
    if jobs < 1:
        raise ConfigError("jobs must be positive")
    spec = GRID_LAYOUTS[layout]
    algos = tuple(algorithms if algorithms is not None else spec["algorithms"])
    models = tuple(type_models if type_models is not None else spec["type_models"])
    for name in algos:
        if name not in ALGORITHMS:
            raise ConfigError(f"Unknown algorithm {name!r} in grid")
    for name in models:
        if name not in TYPE_MODELS:
            raise ConfigError(f"Unknown type model {name!r} in grid")
    out = prepare_output(base.out)

    keys = [(algorithm, model) for model in models for algorithm in algos]
    cells = [
        replace(base, algorithm=algorithm, type_model=model, out=out / f"{algorithm}-{model}")
        for algorithm, model in keys
    ]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(cells))) as executor:
            results = list(executor.map(run, cells))
    else:
        results = [run(cell) for cell in cells]

    final: dict[tuple[str, str], float] = {}
    for (algorithm, model), result in zip(keys, results, strict=True):
        final[(algorithm, model)] = _final_exploitability(result)
        logger.info("grid %s cell %s/%s: %.6g", layout, algorithm, model, final[(algorithm, model)])

    averaged = {
        algorithm: float(np.mean([final[(algorithm, model)] for model in models]))
        for algorithm in algos
        if models
    }
    path = out / SUMMARY_FILENAME
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["type_model", *algos])
        for model in models:
            writer.writerow([model, *(final[(algorithm, model)] for algorithm in algos)])
        if models:
            writer.writerow([AVERAGED_LABEL, *(averaged[algorithm] for algorithm in algos)])
    return GridSummary(path, algos, models, final, averaged)


@dataclass(frozen=True)
class PosteriorBench:
    consistency_path: Path
    ckde_path: Path
    success_rate: float
    ckde_errors: np.ndarray


def posterior_bench(
    out: Path,
    *,
    trials: int = 100,
    references: int = 500,
    observations: int = 200,
    threshold: float = 0.2,
    sample_sizes: Sequence[int] = (125, 250, 500, 1000),
    ckde_seeds: int = 20,
) -> PosteriorBench:
    """Posterior consistency trials and CKDE convergence, written as CSV curves."""

    if trials < 1 or observations < 1:
        raise ConfigError("posterior-bench needs at least one trial and one observation")
    prepare_output(out)
    curves = np.empty((trials, observations))
    for seed in range(trials):
        curves[seed] = consistency_trial(
            seed, references=references, observations=observations
        ).l1_errors
    success = float(np.mean(curves[:, -1] < threshold))

    consistency_path = out / POSTERIOR_FILENAME
    with consistency_path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["observations", "mean_l1", "median_l1", "max_l1"])
        for step in range(observations):
            column = curves[:, step]
            writer.writerow(
                [step + 1, float(column.mean()), float(np.median(column)), float(column.max())]
            )

    errors = ckde_convergence(sample_sizes, seeds=ckde_seeds)
    ckde_path = out / CKDE_FILENAME
    with ckde_path.open("w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["references", "mean_abs_error"])
        for size, error in zip(sample_sizes, errors, strict=True):
            writer.writerow([size, float(error)])
    logger.info("posterior bench: %.0f%% of trials under %.2f L1", 100 * success, threshold)
    return PosteriorBench(consistency_path, ckde_path, success, errors)
