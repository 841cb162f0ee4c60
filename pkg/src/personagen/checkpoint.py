"""Binary checkpoint container for named float64 parameters.

Layout (all integers little-endian):

    bytes 0-7    magic ``PGCKPT01``
    bytes 8-15   uint64 header length in bytes
    header       UTF-8 JSON: {"format_version", "kind", "config",
                 "vocab": [tokens in index order],
                 "params": [{"name", "shape"}, ...], "extra"}
    payload      for each manifest entry in order, the parameter's raw
                 float64 little-endian values in row-major order

Float64 values are stored exactly, so a load/save round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import RESERVED_TOKENS, Vocabulary

MAGIC = b"PGCKPT01"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    kind: str
    format_version: int
    params: dict[str, np.ndarray]
    vocab: Vocabulary
    config: dict
    extra: dict


def save_checkpoint(path, kind: str, params: list[tuple[str, np.ndarray]],
                    vocab: Vocabulary, config: dict, extra: dict | None = None) -> None:
    manifest = [{"name": name, "shape": list(np.shape(array))} for name, array in params]
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "config": config,
        "vocab": list(vocab.index_to_token),
        "params": manifest,
        "extra": extra or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(len(header_bytes).to_bytes(8, "little"))
        handle.write(header_bytes)
        for _, array in params:
            handle.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as handle:
        magic = handle.read(len(MAGIC))
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
        header_len = int.from_bytes(handle.read(8), "little")
        try:
            header = json.loads(handle.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as err:
            raise CheckpointError(f"{path}: corrupt header: {err}") from err
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        params: dict[str, np.ndarray] = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = handle.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"{path}: truncated payload at {entry['name']}")
            params[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        tokens = header["vocab"]
        if tokens[:len(RESERVED_TOKENS)] != list(RESERVED_TOKENS):
            raise CheckpointError(f"{path}: vocabulary missing reserved tokens")
        vocab = Vocabulary.from_tokens(tokens[len(RESERVED_TOKENS):])
    return Checkpoint(
        kind=header["kind"],
        format_version=version,
        params=params,
        vocab=vocab,
        config=header.get("config", {}),
        extra=header.get("extra", {}),
    )
