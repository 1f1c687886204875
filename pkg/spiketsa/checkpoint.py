"""Versioned, self-describing checkpoint container.

Layout::

    MAGIC line
    header length (8 bytes, little-endian unsigned)
    header (UTF-8 JSON, sorted keys)
    tensor payload (row-major little-endian float64, in header order)
    SHA-256 of header + payload (32 bytes)
"""

import hashlib
import json
import logging
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import CheckpointError, CheckpointIntegrityError, CheckpointVersionError
from .files import atomic_write_bytes

logger = logging.getLogger(__name__)

MAGIC = b"SPIKETSA-CHECKPOINT\n"
SCHEMA_VERSION = 2
_LENGTH = struct.Struct("<Q")
_DIGEST_SIZE = hashlib.sha256().digest_size


@dataclass
class Checkpoint:
    """Learned tensors plus everything needed to rebuild and reuse the model."""

    tensors: "OrderedDict[str, np.ndarray]"
    config: Dict = field(default_factory=dict)
    model_config: Dict = field(default_factory=dict)
    normalizer: Optional[Dict] = None
    rng_state: Optional[Dict] = None
    history: List[Dict] = field(default_factory=list)
    probe_traces: Dict[str, List[List[float]]] = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION


def encode(checkpoint: Checkpoint) -> bytes:
    index, chunks, offset = [], [], 0
    for name, array in checkpoint.tensors.items():
        data = np.ascontiguousarray(array, dtype="<f8").tobytes()
        index.append({"name": name, "shape": list(np.shape(array)), "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    header = {
        "schema_version": checkpoint.schema_version,
        "config": checkpoint.config,
        "model_config": checkpoint.model_config,
        "normalizer": checkpoint.normalizer,
        "rng_state": checkpoint.rng_state,
        "history": checkpoint.history,
        "probe_traces": checkpoint.probe_traces,
        "tensors": index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = header_bytes + b"".join(chunks)
    return MAGIC + _LENGTH.pack(len(header_bytes)) + body + hashlib.sha256(body).digest()


def decode(data: bytes, source: str = "<bytes>") -> Checkpoint:
    if not data.startswith(MAGIC):
        raise CheckpointIntegrityError(f"{source} is not a spiketsa checkpoint")
    start = len(MAGIC) + _LENGTH.size
    if len(data) < start + _DIGEST_SIZE:
        raise CheckpointIntegrityError(f"{source} is truncated")
    (header_length,) = _LENGTH.unpack(data[len(MAGIC):start])
    body, digest = data[start:-_DIGEST_SIZE], data[-_DIGEST_SIZE:]
    if header_length > len(body) or hashlib.sha256(body).digest() != digest:
        raise CheckpointIntegrityError(f"{source} failed its integrity check")
    try:
        header = json.loads(body[:header_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointIntegrityError(f"{source} has an unreadable header: {e}")
    version = header.get("schema_version")
    if version != SCHEMA_VERSION:
        raise CheckpointVersionError(
            f"{source} uses checkpoint schema version {version}; this build reads version {SCHEMA_VERSION}"
        )
    payload = body[header_length:]
    tensors = OrderedDict()
    for entry in header["tensors"]:
        begin, size = entry["offset"], entry["nbytes"]
        if begin + size > len(payload) or size != 8 * int(np.prod(entry["shape"], dtype=np.int64)):
            raise CheckpointIntegrityError(f"{source}: tensor '{entry['name']}' lies outside the payload")
        array = np.frombuffer(payload, dtype="<f8", count=size // 8, offset=begin)
        tensors[entry["name"]] = array.astype(np.float64).reshape(entry["shape"])
    return Checkpoint(
        tensors=tensors,
        config=header["config"],
        model_config=header["model_config"],
        normalizer=header["normalizer"],
        rng_state=header["rng_state"],
        history=header["history"],
        probe_traces=header["probe_traces"],
        schema_version=version,
    )


def save_checkpoint(checkpoint: Checkpoint, path):
    """Write ``checkpoint`` atomically to ``path``."""
    atomic_write_bytes(path, encode(checkpoint))
    logger.info("wrote checkpoint %s (%d tensors)", path, len(checkpoint.tensors))
    return path


def load_checkpoint(path) -> Checkpoint:
    """Read and fully verify a checkpoint; nothing is returned unless every check passes."""
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")
    return decode(data, str(path))


def checkpoint_io(mode: str, path, checkpoint: Optional[Checkpoint] = None) -> Checkpoint:
    """``save`` or ``load`` a checkpoint at ``path``."""
    if mode == "save":
        if checkpoint is None:
            raise CheckpointError("save needs a checkpoint")
        save_checkpoint(checkpoint, path)
        return checkpoint
    if mode == "load":
        return load_checkpoint(path)
    raise CheckpointError(f"unknown checkpoint mode '{mode}'; use 'save' or 'load'")
