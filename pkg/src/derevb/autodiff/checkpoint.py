"""Single-file parameter checkpoints.

Layout:
    8 bytes   magic b"DEREVB01"
    8 bytes   header length, unsigned little-endian
    n bytes   UTF-8 JSON header (sorted keys): config, config_hash, tensors
    ...       little-endian float32 blobs at the offsets the header lists

Offsets are relative to the first byte after the header. Equal parameters and
config always serialize to identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import struct
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any, Union

import attr
import numpy as np

from derevb.autodiff.tensor import Parameter
from derevb.errors import ConfigError, InvalidInput, ShapeError

logger = logging.getLogger(__name__)

MAGIC = b"DEREVB01"
FORMAT_VERSION = 1
_BLOB_DTYPE = np.dtype("<f4")


def canonical_json(document: Any) -> str:
    return json.dumps(document, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(document: Any) -> str:
    """SHA-256 hex digest of the canonical JSON of a config document."""
    return hashlib.sha256(canonical_json(document).encode("utf-8")).hexdigest()


@attr.frozen(eq=False)
class Checkpoint:
    """Decoded checkpoint contents.

    Attributes:
        config: Configuration document stored with the parameters.
        config_hash: Hash recorded at save time (verified on load).
        tensors: Parameter arrays by name, float32.
        frozen: Freeze flag of each parameter when it was saved.
    """

    config: dict[str, Any]
    config_hash: str
    tensors: dict[str, np.ndarray]
    frozen: dict[str, bool]

    def apply(self, params: Sequence[Parameter]) -> None:
        """Copy stored values into params, matched by name.

        Raises:
            InvalidInput: If a parameter is missing from the checkpoint.
            ShapeError: If a stored shape differs.
        """
        for param in params:
            if param.name not in self.tensors:
                raise InvalidInput(f"checkpoint has no tensor named {param.name!r}")
            stored = self.tensors[param.name]
            if stored.shape != param.shape:
                raise ShapeError(
                    f"{param.name}: checkpoint shape {stored.shape}, model shape {param.shape}"
                )
            param.data = stored.astype(param.data.dtype, copy=True)
            param.zero_grad()


def save_checkpoint(
    path: Union[str, Path], params: Sequence[Parameter], config: Mapping[str, Any]
) -> Path:
    """Write params and their config to path.

    Raises:
        InvalidInput: If two parameters share a name.
    """
    path = Path(path)
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise InvalidInput("parameter names must be unique within a checkpoint")

    entries = []
    blobs = []
    offset = 0
    for param in params:
        blob = np.ascontiguousarray(param.data, dtype=_BLOB_DTYPE).tobytes()
        entries.append(
            {
                "name": param.name,
                "shape": list(param.shape),
                "offset": offset,
                "nbytes": len(blob),
                "frozen": bool(param.frozen),
            }
        )
        blobs.append(blob)
        offset += len(blob)

    document = dict(config)
    header = {
        "format_version": FORMAT_VERSION,
        "config": document,
        "config_hash": config_hash(document),
        "tensors": entries,
    }
    header_bytes = canonical_json(header).encode("utf-8")

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<Q", len(header_bytes)))
        f.write(header_bytes)
        for blob in blobs:
            f.write(blob)
    logger.info(f"Saved checkpoint {path} ({len(params)} tensors, {offset} bytes)")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    """Read and verify a checkpoint.

    Raises:
        InvalidInput: If the file is not a checkpoint or is truncated.
        ConfigError: If the stored config does not match its recorded hash.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise InvalidInput(f"cannot read checkpoint {path}: {e}") from e

    if raw[: len(MAGIC)] != MAGIC:
        raise InvalidInput(f"{path} is not a derevb checkpoint")
    prefix = len(MAGIC) + 8
    if len(raw) < prefix:
        raise InvalidInput(f"{path} is truncated")
    (header_len,) = struct.unpack("<Q", raw[len(MAGIC) : prefix])
    try:
        header = json.loads(raw[prefix : prefix + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise InvalidInput(f"{path} has a corrupt header") from e

    if header.get("format_version") != FORMAT_VERSION:
        raise InvalidInput(f"unsupported checkpoint format {header.get('format_version')!r}")
    if config_hash(header["config"]) != header["config_hash"]:
        raise ConfigError("checkpoint config does not match its recorded hash", field="config_hash")

    body = raw[prefix + header_len :]
    tensors: dict[str, np.ndarray] = {}
    frozen: dict[str, bool] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(body):
            raise InvalidInput(f"{path} is truncated in tensor {entry['name']!r}")
        values = np.frombuffer(body[start : start + nbytes], dtype=_BLOB_DTYPE)
        tensors[entry["name"]] = values.reshape(entry["shape"]).astype(np.float32)
        frozen[entry["name"]] = bool(entry["frozen"])

    logger.debug(f"Loaded checkpoint {path} ({len(tensors)} tensors)")
    return Checkpoint(header["config"], header["config_hash"], tensors, frozen)
