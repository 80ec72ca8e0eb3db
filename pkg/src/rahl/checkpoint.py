"""Binary checkpoint: model parameters, Adam state, RAHL beta, config and scaler.

Byte layout (all integers little-endian)::

    0        8 bytes   magic  b"RAHLCKPT"
    8        uint32    format version (currently 1)
    12       uint32    header length N in bytes
    16       N bytes   UTF-8 JSON header
    16+N     payload   arrays back to back, row-major IEEE-754 float64 LE
    end-32   32 bytes  SHA-256 of every preceding byte

The header lists each array as ``{"name", "shape", "offset", "count"}`` with
``offset`` counted in bytes from the start of the payload. Array names are
``params/<field>``, ``adam_m/<name>``, ``adam_v/<name>`` where ``<name>`` is a
parameter field or ``beta``.
"""

import hashlib
import json
import struct
from dataclasses import dataclass

import numpy as np

from rahl import __version__
from rahl.data import Scaler
from rahl.errors import CheckpointError, ChecksumError, VersionError
from rahl.model import LstmParams, param_shapes
from rahl.optim import AdamState
from rahl.train import TrainConfig

MAGIC = b"RAHLCKPT"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")
_DIGEST = 32


@dataclass
class Checkpoint:
    params: LstmParams
    config: TrainConfig
    scaler: Scaler
    adam: AdamState
    beta: float
    extra: dict


def save(path, params, config, scaler, adam, beta=0.0, extra=None):
    arrays = [(f"params/{k}", v) for k, v in params.as_dict().items()]
    arrays += [(f"adam_m/{k}", v) for k, v in adam.m.items()]
    arrays += [(f"adam_v/{k}", v) for k, v in adam.v.items()]
    entries, chunks, offset = [], [], 0
    for name, arr in arrays:
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "offset": offset, "count": int(np.size(arr))})
        chunks.append(data)
        offset += len(data)
    header = {
        "format_version": FORMAT_VERSION,
        "tool_version": __version__,
        "config": config.to_dict(),
        "seed": config.seed,
        "scaler": scaler.to_dict(),
        "adam": adam.hyper(),
        "beta": float(beta),
        "arrays": entries,
        "payload_bytes": offset,
        "extra": extra or {},
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    body = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)) + head + b"".join(chunks)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _PREFIX.size + _DIGEST:
        raise ChecksumError(f"{path}: truncated checkpoint")
    body, digest = blob[:-_DIGEST], blob[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch (file corrupted)")
    magic, version, head_len = _PREFIX.unpack_from(body)
    if magic != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: checkpoint format {version} is not supported (expected {FORMAT_VERSION})")
    header = json.loads(body[_PREFIX.size : _PREFIX.size + head_len].decode("utf-8"))
    payload = memoryview(body)[_PREFIX.size + head_len :]
    if len(payload) != header["payload_bytes"]:
        raise CheckpointError(f"{path}: payload size does not match header")

    arrays = {}
    for e in header["arrays"]:
        a = np.frombuffer(payload, dtype="<f8", count=e["count"], offset=e["offset"])
        arrays[e["name"]] = a.astype(np.float64).reshape(e["shape"])

    try:
        config = TrainConfig.from_dict(header["config"])
    except (KeyError, TypeError) as exc:
        raise VersionError(f"{path}: config block not understood: {exc}") from None
    expected = param_shapes(1, config.hidden_size, config.fc_hidden)
    got = {k[len("params/") :]: v for k, v in arrays.items() if k.startswith("params/")}
    if set(got) != set(expected) or any(got[k].shape != tuple(s) for k, s in expected.items()):
        raise VersionError(f"{path}: parameter shapes do not match the stored config")
    params = LstmParams(**got)

    hyper = header["adam"]
    adam = AdamState(
        lr=hyper["lr"],
        beta1=hyper["beta1"],
        beta2=hyper["beta2"],
        eps=hyper["eps"],
        step=hyper["step"],
        m={k[len("adam_m/") :]: v for k, v in arrays.items() if k.startswith("adam_m/")},
        v={k[len("adam_v/") :]: v for k, v in arrays.items() if k.startswith("adam_v/")},
    )
    scaler = Scaler(header["scaler"]["min"], header["scaler"]["max"])
    return Checkpoint(params, config, scaler, adam, header["beta"], header.get("extra", {}))
