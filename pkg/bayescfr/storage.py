"""Read/write helpers for table and network checkpoints and their JSON sidecars."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np
import torch

from .config import (
    FORMAT_VERSION_TUPLE,
    METADATA_SUFFIX,
    NETWORK_HEADER_STRUCT,
    NETWORK_MAGIC,
    TABLE_HEADER_STRUCT,
    TABLE_MAGIC,
)
from .solvers.network import AdvantageNet
from .solvers.regret import RegretMode, RegretTable, StrategyTable, Weighting

_TABLE_HEADER_SIZE = struct.calcsize(TABLE_HEADER_STRUCT)
_NETWORK_HEADER_SIZE = struct.calcsize(NETWORK_HEADER_STRUCT)
_FLOAT = np.dtype("<f8")
_UINT = np.dtype("<u4")

_REGRET_MODES = (RegretMode.VANILLA, RegretMode.PLUS)
_WEIGHTINGS = (Weighting.UNIFORM, Weighting.LINEAR)


def write_table_checkpoint(
    path: str | Path,
    regrets: RegretTable,
    strategy: StrategyTable,
    game_hash: bytes,
) -> Path:
    """Persist regret and strategy-sum tables for the game with digest *game_hash*."""

    path = Path(path)
    if len(game_hash) != 32:
        raise ValueError("Game hash must be a 32-byte SHA-256 digest")
    if regrets.values.shape != strategy.sums.shape:
        raise ValueError("Regret and strategy tables have different shapes")
    slots, infosets, max_actions = regrets.values.shape
    header = struct.pack(
        TABLE_HEADER_STRUCT,
        TABLE_MAGIC,
        *FORMAT_VERSION_TUPLE,
        game_hash,
        slots,
        infosets,
        max_actions,
    )
    counts = np.asarray(regrets.action_counts, dtype=_UINT)
    with path.open("wb") as handle:
        handle.write(header)
        handle.write(counts.tobytes())
        handle.write(np.ascontiguousarray(regrets.values, dtype=_FLOAT).tobytes())
        handle.write(np.ascontiguousarray(strategy.sums, dtype=_FLOAT).tobytes())
        handle.write(
            bytes([_REGRET_MODES.index(regrets.mode), _WEIGHTINGS.index(strategy.weighting)])
        )
    return path


def read_table_checkpoint(
    path: str | Path,
    *,
    expected_hash: bytes | None = None,
) -> tuple[RegretTable, StrategyTable, bytes]:
    """Return ``(regrets, strategy, game_hash)`` stored at *path*."""

    path = Path(path)
    data = path.read_bytes()
    if len(data) < _TABLE_HEADER_SIZE:
        raise ValueError("File is too short to be a table checkpoint")
    magic, major, minor, patch, digest, slots, infosets, max_actions = struct.unpack(
        TABLE_HEADER_STRUCT, data[:_TABLE_HEADER_SIZE]
    )
    if magic != TABLE_MAGIC:
        raise ValueError("Invalid table checkpoint magic header")
    if (major, minor, patch) != FORMAT_VERSION_TUPLE:
        raise ValueError(f"Unsupported table checkpoint version {major}.{minor}.{patch}")
    if expected_hash is not None and digest != expected_hash:
        raise ValueError("Checkpoint game hash does not match the requested game")

    block = slots * infosets * max_actions * _FLOAT.itemsize
    offset = _TABLE_HEADER_SIZE
    counts_end = offset + infosets * _UINT.itemsize
    expected = counts_end + 2 * block + 2
    if len(data) != expected:
        raise ValueError(f"Table checkpoint holds {len(data)} bytes, expected {expected}")
    counts = np.frombuffer(data[offset:counts_end], dtype=_UINT).astype(int)
    shape = (slots, infosets, max_actions)
    regret_values = np.frombuffer(data[counts_end : counts_end + block], dtype=_FLOAT)
    sums = np.frombuffer(data[counts_end + block : counts_end + 2 * block], dtype=_FLOAT)
    mode_byte, weighting_byte = data[-2], data[-1]
    if mode_byte >= len(_REGRET_MODES) or weighting_byte >= len(_WEIGHTINGS):
        raise ValueError("Unknown regret mode or weighting byte in checkpoint")
    regrets = RegretTable(
        regret_values.reshape(shape).astype(np.float64), counts, _REGRET_MODES[mode_byte]
    )
    strategy = StrategyTable(
        sums.reshape(shape).astype(np.float64), counts.copy(), _WEIGHTINGS[weighting_byte]
    )
    return regrets, strategy, digest


def write_network_checkpoint(path: str | Path, net: AdvantageNet) -> Path:
    """Persist layer sizes then, per layer, weights and biases as float64."""

    path = Path(path)
    sizes = net.layer_sizes
    header = struct.pack(NETWORK_HEADER_STRUCT, NETWORK_MAGIC, *FORMAT_VERSION_TUPLE, len(sizes))
    with path.open("wb") as handle:
        handle.write(header)
        handle.write(np.asarray(sizes, dtype=_UINT).tobytes())
        for layer in net.layers:
            for tensor in (layer.weight, layer.bias):
                array = tensor.detach().cpu().numpy()
                handle.write(np.ascontiguousarray(array, dtype=_FLOAT).tobytes())
    return path


def read_network_checkpoint(path: str | Path) -> list[tuple[np.ndarray, np.ndarray]]:
    """Return ``[(weight, bias), ...]`` in layer order."""

    path = Path(path)
    data = path.read_bytes()
    if len(data) < _NETWORK_HEADER_SIZE:
        raise ValueError("File is too short to be a network checkpoint")
    magic, major, minor, patch, count = struct.unpack(
        NETWORK_HEADER_STRUCT, data[:_NETWORK_HEADER_SIZE]
    )
    if magic != NETWORK_MAGIC:
        raise ValueError("Invalid network checkpoint magic header")
    if (major, minor, patch) != FORMAT_VERSION_TUPLE:
        raise ValueError(f"Unsupported network checkpoint version {major}.{minor}.{patch}")
    offset = _NETWORK_HEADER_SIZE
    sizes_end = offset + 2 * count * _UINT.itemsize
    if len(data) < sizes_end:
        raise ValueError("Network checkpoint truncated inside the layer table")
    sizes = np.frombuffer(data[offset:sizes_end], dtype=_UINT).reshape(count, 2)
    offset = sizes_end
    layers = []
    for fan_in, fan_out in sizes.tolist():
        weight_end = offset + fan_in * fan_out * _FLOAT.itemsize
        bias_end = weight_end + fan_out * _FLOAT.itemsize
        if len(data) < bias_end:
            raise ValueError("Network checkpoint truncated inside the parameters")
        weight = np.frombuffer(data[offset:weight_end], dtype=_FLOAT).reshape(fan_out, fan_in)
        bias = np.frombuffer(data[weight_end:bias_end], dtype=_FLOAT)
        layers.append((weight.copy(), bias.copy()))
        offset = bias_end
    if offset != len(data):
        raise ValueError("Network checkpoint has trailing bytes")
    return layers


def load_network_checkpoint(path: str | Path, net: AdvantageNet) -> AdvantageNet:
    """Copy the parameters stored at *path* into *net*, which must match its layout."""

    layers = read_network_checkpoint(path)
    sizes = [(weight.shape[1], weight.shape[0]) for weight, _ in layers]
    if sizes != net.layer_sizes:
        raise ValueError(f"Checkpoint layers {sizes} do not match network {net.layer_sizes}")
    with torch.no_grad():
        for layer, (weight, bias) in zip(net.layers, layers, strict=True):
            layer.weight.copy_(torch.from_numpy(weight))
            layer.bias.copy_(torch.from_numpy(bias))
    return net


def write_metadata(path: str | Path, metadata: dict[str, Any]) -> Path:
    path = Path(path)
    path.write_bytes(_encode_metadata(metadata))
    return path


def read_metadata(path: str | Path) -> dict[str, Any]:
    """Load metadata JSON from disk."""

    path = Path(path)
    return json.loads(path.read_bytes().decode("utf-8"))


def derive_metadata_path(checkpoint_path: Path) -> Path:
    """Return the default sidecar path derived from *checkpoint_path*."""

    return Path(checkpoint_path).with_suffix(METADATA_SUFFIX)


def _encode_metadata(metadata: dict[str, Any]) -> bytes:
    return json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n"
