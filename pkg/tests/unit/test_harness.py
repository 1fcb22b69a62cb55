from __future__ import annotations

import csv
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from bayescfr.config import METRICS_FILENAME
from bayescfr.diagnostics.exploitability import exploitability
from bayescfr.games.poker import build_kuhn
from bayescfr.games.tree import game_tree
from bayescfr.games.values import StrategyProfile
from bayescfr.harness import (
    CONFIG_KEYS,
    METRICS_COLUMNS,
    ConfigError,
    ExperimentConfig,
    config_from_mapping,
    evaluation_points,
    grid,
    load_config,
    parse_config_text,
    posterior_bench,
    prepare_output,
    run,
    run_id,
)
from bayescfr.solvers.regret import average_profile_table
from bayescfr.solvers.settings import BeliefConfig, DeepConfig, PosteriorMode
from bayescfr.solvers.tabular import draw_competitor_type
from bayescfr.storage import read_metadata, read_table_checkpoint

SMALL_BELIEF = BeliefConfig(references_per_type=80, observation_window=40)


def _rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="") as handle:
        return list(csv.DictReader(handle))


def test_parse_config_text_handles_comments_and_blanks() -> None:
    text = "# experiment\ngame = kuhn\n\nalgorithm=bcfr+  # plus variant\nbelief.w=0.5\n"
    assert parse_config_text(text) == {"game": "kuhn", "algorithm": "bcfr+", "belief.w": "0.5"}


def test_parse_config_text_reports_the_line() -> None:
    with pytest.raises(ConfigError, match="Line 2"):
        parse_config_text("game=kuhn\njust words\n")
    with pytest.raises(ConfigError, match="empty key"):
        parse_config_text("=kuhn\n")


def test_config_from_mapping_parses_every_section() -> None:
    config = config_from_mapping(
        {
            "game": "leduc",
            "type_model": "mixed-4",
            "seeds": "1, 2,3",
            "eval_every": "5",
            "use_belief": "no",
            "posterior_mode": "sampled",
            "belief.prior": "2,1,1",
            "belief.online_refs": "true",
            "deep.hidden": "32,16",
            "deep.loss": "mse",
        }
    )
    assert config.seeds == (1, 2, 3)
    assert config.eval_every == 5
    assert config.use_belief is False
    assert config.belief.prior == (2.0, 1.0, 1.0)
    assert config.belief.online_references is True
    assert config.deep.hidden == (32, 16)
    solver = config.solver_config(2)
    assert solver.seed == 2
    assert solver.posterior_mode is PosteriorMode.SAMPLED
    assert solver.deep.loss == "mse"


@pytest.mark.parametrize(
    ("values", "message"),
    [
        ({"algorithm": "bcfr"}, "Missing required key 'game'"),
        ({"game": "kuhn", "gamma": "1"}, "Unknown configuration key"),
        ({"game": "holdem"}, "Unknown game"),
        ({"game": "kuhn", "type_model": "mixed-0"}, "Unknown type model"),
        ({"game": "kuhn", "algorithm": "dcfr"}, "Unknown algorithm"),
        ({"game": "kuhn", "iterations": "many"}, "expected an integer"),
        ({"game": "kuhn", "use_belief": "maybe"}, "expected a boolean"),
        ({"game": "kuhn", "eval_every": "0"}, "eval_every must be positive"),
        ({"game": "kuhn", "eval_every": "log"}, "expected an integer"),
        ({"game": "kuhn", "eval_belief": "oracle"}, "Unknown eval_belief"),
        ({"game": "kuhn", "posterior_mode": "approx"}, "Unknown posterior_mode"),
        ({"game": "kuhn", "belief.w": "-1"}, "bandwidths must be positive"),
        ({"game": "kuhn", "deep.memory": "lifo"}, "Unknown memory policy"),
        ({"game": "kuhn", "seeds": ","}, "comma-separated list"),
    ],
)
def test_config_errors_name_the_problem(values: dict[str, str], message: str) -> None:
    with pytest.raises(ConfigError, match=message):
        config_from_mapping(values)


def test_load_config_layers_overrides_on_the_file(tmp_path: Path) -> None:
    path = tmp_path / "experiment.cfg"
    path.write_text("game=kuhn\niterations=50\nalgorithm=cfr\n")
    config = load_config(path, {"iterations": "7"})
    assert (config.game, config.iterations, config.algorithm) == ("kuhn", 7, "cfr")
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.cfg")
    assert set(CONFIG_KEYS) >= {"game", "belief.m", "deep.type_layer"}


def test_prepare_output_refuses_a_file(tmp_path: Path) -> None:
    blocker = tmp_path / "taken"
    blocker.write_text("")
    with pytest.raises(ConfigError, match="Cannot create"):
        prepare_output(blocker / "run")
    assert prepare_output(tmp_path / "a" / "b").is_dir()


def test_evaluation_points() -> None:
    assert evaluation_points(10, "pow2") == [1, 2, 4, 8, 10]
    assert evaluation_points(8, "pow2") == [1, 2, 4, 8]
    assert evaluation_points(10, 3) == [3, 6, 9, 10]
    assert evaluation_points(0, "pow2") == []


def test_run_writes_metrics_checkpoint_and_sidecar(tmp_path: Path) -> None:
    config = ExperimentConfig(game="kuhn", iterations=8, seeds=(0, 1), out=tmp_path)
    result = run(config)
    assert result.metrics_path == tmp_path / METRICS_FILENAME
    rows = _rows(result.metrics_path)
    assert tuple(rows[0]) == METRICS_COLUMNS
    assert [int(row["iteration"]) for row in rows] == [1, 2, 4, 8] * 2
    assert {row["run_id"] for row in rows} == {"bcfr-kuhn-pure-n-s0", "bcfr-kuhn-pure-n-s1"}
    # A point prior means the truth is known from the start.
    assert all(float(row["posterior_l1"]) == 0.0 for row in rows)

    sidecar = tmp_path / f"{run_id(config, 0)}.json"
    assert sidecar in result.checkpoints
    metadata = read_metadata(sidecar)
    assert metadata["iteration"] == 8
    assert metadata["competitor_type"] == 0
    assert metadata["config"]["seeds"] == [0, 1]
    _, strategy, digest = read_table_checkpoint(sidecar.with_suffix(".ckpt"))
    assert digest.hex() == metadata["game_hash"]
    assert strategy.num_slots == 1


def test_runs_are_reproducible_apart_from_timing(tmp_path: Path) -> None:
    base = ExperimentConfig(
        game="kuhn", type_model="mixed-4", iterations=8, seeds=(3,), belief=SMALL_BELIEF
    )
    first = _rows(run(replace(base, out=tmp_path / "first")).metrics_path)
    second = _rows(run(replace(base, out=tmp_path / "second")).metrics_path)
    for row in first + second:
        row.pop("wall_clock_ms")
    assert first == second


def test_periodic_checkpoints_get_iteration_suffixes(tmp_path: Path) -> None:
    config = ExperimentConfig(
        game="kuhn", algorithm="cfr+", iterations=8, checkpoint_every=4, out=tmp_path
    )
    result = run(config)
    names = sorted(path.name for path in result.checkpoints)
    assert names == ["cfr+-kuhn-pure-n-s0-it4.json", "cfr+-kuhn-pure-n-s0.json"]
    assert read_metadata(tmp_path / "cfr+-kuhn-pure-n-s0-it4.json")["iteration"] == 4
    assert (tmp_path / "cfr+-kuhn-pure-n-s0-it4.ckpt").exists()


def test_prior_evaluation_belief_for_baselines(tmp_path: Path) -> None:
    config = ExperimentConfig(
        game="kuhn",
        type_model="mixed-4",
        algorithm="cfr",
        iterations=4,
        eval_every=2,
        eval_belief="prior",
        out=tmp_path,
    )
    rows = _rows(run(config).metrics_path)
    assert [int(row["iteration"]) for row in rows] == [2, 4]
    assert all(float(row["exploitability"]) > 0 for row in rows)


@pytest.mark.parametrize("algorithm", ["cfr", "cfr+", "mccfr-ext"])
@pytest.mark.parametrize(("type_model", "competitor"), [("pure-c", 1), ("pure-a", 2)])
def test_baselines_run_against_any_competitor_type(
    tmp_path: Path, algorithm: str, type_model: str, competitor: int
) -> None:
    config = ExperimentConfig(
        game="kuhn", type_model=type_model, algorithm=algorithm, iterations=4, out=tmp_path
    )
    result = run(config)
    assert [row.iteration for row in result.rows] == [1, 2, 4]
    for row in result.rows:
        assert row.exploitability >= 0
        # Under a point prior the prior and the realised type agree.
        assert row.exploitability_truth == row.exploitability
        assert row.posterior_l1 == 0.0
    metadata = read_metadata(tmp_path / f"{run_id(config, 0)}.json")
    assert metadata["competitor_type"] == competitor
    assert metadata["game_name"].endswith("/collapsed")


def _final_profile(path: Path, typed) -> StrategyProfile:
    _, strategy, _ = read_table_checkpoint(path)
    return StrategyProfile.from_table(game_tree(typed), average_profile_table(strategy))


def test_metrics_report_prior_and_truth_exploitability(tmp_path: Path) -> None:
    config = ExperimentConfig(
        game="kuhn",
        type_model="mixed-7",
        iterations=8,
        seeds=tuple(range(4)),
        belief=SMALL_BELIEF,
        out=tmp_path,
    )
    assert config.eval_belief == "prior"
    result = run(config)
    typed = build_kuhn("mixed-7")
    finals = [row for row in result.rows if row.iteration == 8]
    assert len(finals) == 4
    for row in finals:
        profile = _final_profile(tmp_path / f"{row.run_id}.ckpt", typed)
        truth = np.zeros(3)
        truth[draw_competitor_type(typed, row.seed)] = 1.0
        expected = exploitability(typed, profile, typed.type_prior).exploitability
        assert row.exploitability == pytest.approx(expected, abs=1e-12)
        assert row.exploitability_truth == pytest.approx(
            exploitability(typed, profile, truth).exploitability, abs=1e-12
        )
    assert "exploitability_truth" in METRICS_COLUMNS


def test_deep_runs_write_a_sidecar_for_their_networks(tmp_path: Path) -> None:
    config = ExperimentConfig(
        game="kuhn",
        algorithm="deep-bcfr",
        iterations=2,
        deep=DeepConfig(hidden=(8,), batch_size=16, steps=2, capacity=128),
        out=tmp_path,
    )
    result = run(config)
    metadata = read_metadata(tmp_path / "deep-bcfr-kuhn-pure-n-s0.json")
    assert set(metadata["networks"]) == {"strategy", "advantage0", "advantage1"}
    for name in metadata["networks"].values():
        assert (tmp_path / name).exists()
    assert len(result.rows) == 2


def test_grid_summarises_final_exploitability(tmp_path: Path) -> None:
    base = ExperimentConfig(game="kuhn", iterations=4, out=tmp_path)
    summary = grid("table1", base, type_models=["pure-n", "pure-c"], algorithms=["bcfr", "cfr"])
    rows = list(csv.reader(summary.path.open()))
    assert rows[0] == ["type_model", "bcfr", "cfr"]
    assert [row[0] for row in rows[1:]] == ["pure-n", "pure-c", "Averaged"]
    expected = (summary.final[("cfr", "pure-n")] + summary.final[("cfr", "pure-c")]) / 2
    assert summary.averaged["cfr"] == pytest.approx(expected)
    assert (tmp_path / "bcfr-pure-c" / METRICS_FILENAME).exists()


def test_grid_rejects_unknown_names(tmp_path: Path) -> None:
    base = ExperimentConfig(game="kuhn", iterations=1, out=tmp_path)
    with pytest.raises(ConfigError, match="Unknown grid"):
        grid("table9", base)
    with pytest.raises(ConfigError, match="Unknown algorithm"):
        grid("table1", base, algorithms=["dcfr"])
    with pytest.raises(ConfigError, match="Unknown type model"):
        grid("table1", base, type_models=["mixed-11"])
    with pytest.raises(ConfigError, match="jobs must be positive"):
        grid("table1", base, jobs=0)


def test_grid_with_no_type_models_writes_only_a_header(tmp_path: Path) -> None:
    base = ExperimentConfig(game="kuhn", iterations=1, out=tmp_path)
    summary = grid("table2", base, type_models=[])
    assert summary.path.read_text().splitlines() == ["type_model,cig,bcfr,bcfr-no-posterior,cfr"]
    assert summary.averaged == {}


def test_posterior_bench_writes_both_curves(tmp_path: Path) -> None:
    result = posterior_bench(
        tmp_path, trials=3, references=60, observations=10, sample_sizes=(50, 100), ckde_seeds=2
    )
    consistency = _rows(result.consistency_path)
    assert len(consistency) == 10
    assert consistency[0]["observations"] == "1"
    ckde = _rows(result.ckde_path)
    assert [row["references"] for row in ckde] == ["50", "100"]
    assert 0.0 <= result.success_rate <= 1.0
    with pytest.raises(ConfigError, match="at least one trial"):
        posterior_bench(tmp_path, trials=0)


@pytest.mark.integration
def test_parallel_grid_matches_the_serial_summary(tmp_path: Path) -> None:
    kwargs = {"type_models": ["pure-n", "mixed-4"], "algorithms": ["bcfr", "cfr+"]}
    serial = grid("table1", ExperimentConfig(game="kuhn", iterations=4, out=tmp_path / "a"), **kwargs)
    parallel = grid(
        "table1", ExperimentConfig(game="kuhn", iterations=4, out=tmp_path / "b"), jobs=2, **kwargs
    )
    assert parallel.final == serial.final
    assert parallel.path.read_text() == serial.path.read_text()
    assert (tmp_path / "b" / "cfr+-mixed-4" / "metrics.csv").exists()
