"""Portable binary checkpoints.

Layout (all integers little-endian):

    magic            4 bytes  "STSY"
    format version   u32
    schema digest    32 bytes, SHA-256 of the canonical schema JSON
    meta length      u64
    meta             UTF-8 JSON: schema, scaler, sde, net, curriculum snapshot
    raw parameters   block
    ema parameters   block

Each parameter block is a u32 tensor count followed, per tensor, by
u32 name length, name bytes, u32 rank, u32 dims, and the row-major float64
payload. Meta JSON is canonical (sorted keys, compact separators) so that
save(load(path)) is byte-identical to the original file. Loading verifies
the format version and that the stored digest matches the embedded schema.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass

import numpy as np

from .codec import ColumnScaler
from .errors import InputError
from .network import NetSpec, Parameters
from .schema import TableSchema, canonical_schema_bytes, schema_digest
from .sde import SdeSpec
from .spl import SplConfig

MAGIC = b"STSY"
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    schema: TableSchema
    scaler: ColumnScaler
    sde: SdeSpec
    net: NetSpec
    spl_config: SplConfig
    spl_alpha: float
    spl_beta: float
    spl_step: int
    params: Parameters
    ema_params: Parameters
    version: int = FORMAT_VERSION

    def sampling_params(self, use_ema: bool = True) -> Parameters:
        return self.ema_params if use_ema else self.params


def _meta_dict(ck: Checkpoint) -> dict:
    return {
        "schema": ck.schema.to_json_dict(),
        "scaler": ck.scaler.to_json_dict(),
        "sde": dataclasses.asdict(ck.sde),
        "net": {
            "input_dim": ck.net.input_dim,
            "hidden_dims": list(ck.net.hidden_dims),
            "layer_type": ck.net.layer_type,
            "activation": ck.net.activation,
        },
        "spl": {
            "alpha0": ck.spl_config.alpha0,
            "beta0": ck.spl_config.beta0,
            "ramp_steps": ck.spl_config.ramp_steps,
            "alpha": ck.spl_alpha,
            "beta": ck.spl_beta,
            "step": ck.spl_step,
        },
    }


def _pack_params(params: Parameters) -> bytes:
    chunks = [struct.pack("<I", len(params.values))]
    for name, value in params.values.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(value, dtype="<f8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(arr.tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise InputError("truncated checkpoint file")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def _unpack_params(r: _Reader) -> Parameters:
    count = r.u32()
    values: dict[str, np.ndarray] = {}
    for _ in range(count):
        name = r.take(r.u32()).decode("utf-8")
        rank = r.u32()
        dims = struct.unpack(f"<{rank}I", r.take(4 * rank))
        n_items = int(np.prod(dims)) if rank else 1
        payload = r.take(8 * n_items)
        values[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    return Parameters(values)


def save_checkpoint(ck: Checkpoint, path) -> None:
    meta = json.dumps(_meta_dict(ck), sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", ck.version))
        fh.write(schema_digest(ck.schema))
        fh.write(struct.pack("<Q", len(meta)))
        fh.write(meta)
        fh.write(_pack_params(ck.params))
        fh.write(_pack_params(ck.ema_params))


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except FileNotFoundError:
        raise InputError(f"checkpoint file not found: {path}")
    r = _Reader(data)
    if r.take(4) != MAGIC:
        raise InputError(f"{path}: not a checkpoint file (bad magic)")
    version = r.u32()
    if version != FORMAT_VERSION:
        raise InputError(
            f"{path}: checkpoint format version {version} not supported "
            f"(this build reads version {FORMAT_VERSION})"
        )
    digest = r.take(32)
    meta = json.loads(r.take(r.u64()).decode("utf-8"))
    schema = TableSchema.from_json_dict(meta["schema"])
    if schema_digest(schema) != digest:
        raise InputError(f"{path}: schema digest mismatch; file is corrupt or tampered")
    scaler = ColumnScaler.from_json_dict(meta["scaler"])
    sde = SdeSpec(**meta["sde"])
    net = NetSpec(
        input_dim=meta["net"]["input_dim"],
        hidden_dims=tuple(meta["net"]["hidden_dims"]),
        layer_type=meta["net"]["layer_type"],
        activation=meta["net"]["activation"],
    )
    spl_meta = meta["spl"]
    spl_config = SplConfig(
        alpha0=spl_meta["alpha0"], beta0=spl_meta["beta0"], ramp_steps=spl_meta["ramp_steps"]
    )
    params = _unpack_params(r)
    ema_params = _unpack_params(r)
    if r.pos != len(data):
        raise InputError(f"{path}: trailing bytes after checkpoint payload")
    return Checkpoint(
        schema=schema,
        scaler=scaler,
        sde=sde,
        net=net,
        spl_config=spl_config,
        spl_alpha=spl_meta["alpha"],
        spl_beta=spl_meta["beta"],
        spl_step=spl_meta["step"],
        params=params,
        ema_params=ema_params,
        version=version,
    )
