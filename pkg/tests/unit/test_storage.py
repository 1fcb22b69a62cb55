import struct
from pathlib import Path

import numpy as np
import pytest
import torch

from bayescfr.config import (
    FORMAT_VERSION_TUPLE,
    NETWORK_HEADER_STRUCT,
    NETWORK_MAGIC,
    TABLE_HEADER_STRUCT,
)
from bayescfr.diagnostics.checksums import game_checksum
from bayescfr.games.core import collapse_types
from bayescfr.games.poker import build_kuhn, build_leduc
from bayescfr.solvers.network import initialize_network
from bayescfr.solvers.regret import RegretMode, RegretTable, StrategyTable, Weighting
from bayescfr.solvers.settings import DeepConfig
from bayescfr.storage import (
    derive_metadata_path,
    load_network_checkpoint,
    read_metadata,
    read_network_checkpoint,
    read_table_checkpoint,
    write_metadata,
    write_network_checkpoint,
    write_table_checkpoint,
)

COUNTS = np.array([2, 3, 2])
HASH = bytes(range(32))


def _tables() -> tuple[RegretTable, StrategyTable]:
    rng = np.random.default_rng(0)
    regrets = RegretTable.zeros(COUNTS, num_slots=2, mode=RegretMode.PLUS)
    regrets.values[:] = np.abs(rng.normal(size=regrets.values.shape))
    strategy = StrategyTable.zeros(COUNTS, num_slots=2, weighting=Weighting.LINEAR)
    strategy.sums[:] = rng.uniform(size=strategy.sums.shape)
    return regrets, strategy


def test_table_checkpoint_preserves_tables_and_modes(tmp_path: Path):
    regrets, strategy = _tables()
    path = write_table_checkpoint(tmp_path / "run.ckpt", regrets, strategy, HASH)

    restored_regrets, restored_strategy, digest = read_table_checkpoint(path, expected_hash=HASH)
    np.testing.assert_array_equal(restored_regrets.values, regrets.values)
    np.testing.assert_array_equal(restored_strategy.sums, strategy.sums)
    np.testing.assert_array_equal(restored_regrets.action_counts, COUNTS)
    assert restored_regrets.mode is RegretMode.PLUS
    assert restored_strategy.weighting is Weighting.LINEAR
    assert digest == HASH


def test_table_checkpoint_rejects_another_game(tmp_path: Path):
    regrets, strategy = _tables()
    path = write_table_checkpoint(tmp_path / "run.ckpt", regrets, strategy, HASH)
    other = game_checksum(build_kuhn("pure-n"))
    with pytest.raises(ValueError, match="does not match"):
        read_table_checkpoint(path, expected_hash=other)


def test_write_table_checkpoint_validates_inputs(tmp_path: Path):
    regrets, strategy = _tables()
    with pytest.raises(ValueError, match="32-byte"):
        write_table_checkpoint(tmp_path / "bad.ckpt", regrets, strategy, b"short")
    single = StrategyTable.zeros(COUNTS)
    with pytest.raises(ValueError, match="different shapes"):
        write_table_checkpoint(tmp_path / "bad.ckpt", regrets, single, HASH)


def test_read_table_checkpoint_rejects_short_files(tmp_path: Path):
    path = tmp_path / "broken.ckpt"
    path.write_bytes(b"BCFR")
    with pytest.raises(ValueError, match="too short"):
        read_table_checkpoint(path)


def test_read_table_checkpoint_rejects_bad_magic(tmp_path: Path):
    path = tmp_path / "bad_magic.ckpt"
    header = struct.pack(TABLE_HEADER_STRUCT, b"NOTATABL", *FORMAT_VERSION_TUPLE, HASH, 1, 1, 1)
    path.write_bytes(header)
    with pytest.raises(ValueError, match="magic"):
        read_table_checkpoint(path)


def test_read_table_checkpoint_rejects_truncation(tmp_path: Path):
    regrets, strategy = _tables()
    path = write_table_checkpoint(tmp_path / "run.ckpt", regrets, strategy, HASH)
    path.write_bytes(path.read_bytes()[:-9])
    with pytest.raises(ValueError, match="expected"):
        read_table_checkpoint(path)


def test_game_checksum_tells_games_apart():
    normal = game_checksum(build_kuhn("pure-n"))
    assert len(normal) == 32
    assert normal == game_checksum(build_kuhn("pure-n"))
    assert normal != game_checksum(collapse_types(build_kuhn("pure-n")))
    assert normal != game_checksum(build_leduc("pure-n"))


def _net(seed: int):
    config = DeepConfig(hidden=(8, 4), type_layer=1)
    return initialize_network(6, 3, config, np.random.default_rng(seed), type_width=2)


def test_network_checkpoint_restores_parameters(tmp_path: Path):
    source = _net(0)
    with torch.no_grad():
        source.layers[-1].weight.normal_()
    path = write_network_checkpoint(tmp_path / "adv.net", source)

    layers = read_network_checkpoint(path)
    assert [weight.shape for weight, _ in layers] == [(8, 4), (4, 10), (3, 4)]
    target = load_network_checkpoint(path, _net(1))
    for a, b in zip(source.parameters(), target.parameters()):
        assert torch.equal(a, b)


def test_network_checkpoint_rejects_other_layouts(tmp_path: Path):
    path = write_network_checkpoint(tmp_path / "adv.net", _net(0))
    other = initialize_network(6, 3, DeepConfig(hidden=(8,)), np.random.default_rng(0))
    with pytest.raises(ValueError, match="do not match"):
        load_network_checkpoint(path, other)


def test_network_checkpoint_rejects_damage(tmp_path: Path):
    path = write_network_checkpoint(tmp_path / "adv.net", _net(0))
    data = path.read_bytes()
    path.write_bytes(data + b"\x00")
    with pytest.raises(ValueError, match="trailing"):
        read_network_checkpoint(path)
    path.write_bytes(data[:-8])
    with pytest.raises(ValueError, match="truncated"):
        read_network_checkpoint(path)
    path.write_bytes(struct.pack(NETWORK_HEADER_STRUCT, NETWORK_MAGIC, 9, 9, 9, 0))
    with pytest.raises(ValueError, match="Unsupported"):
        read_network_checkpoint(path)


def test_metadata_sidecar(tmp_path: Path):
    checkpoint = tmp_path / "bcfr-kuhn-pure-n-s0.ckpt"
    sidecar = derive_metadata_path(checkpoint)
    assert sidecar == tmp_path / "bcfr-kuhn-pure-n-s0.json"
    metadata = {"iteration": 8, "posterior": [1.0, 0.0, 0.0]}
    write_metadata(sidecar, metadata)
    assert read_metadata(sidecar) == metadata
    assert sidecar.read_bytes().endswith(b"\n")
