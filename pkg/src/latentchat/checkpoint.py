"""Binary checkpoints: JSON header (config echo, shapes, RNG state,
training progress) followed by raw little-endian float64 payloads.

Layout:  magic line, 8-byte LE header length, UTF-8 JSON header with
sorted keys, then the concatenated parameter/optimizer arrays in header
order.  Save/load/save round-trips byte-identically.
"""

import json
import struct

import numpy as np

from .config import RunConfig
from .errors import CheckpointError

MAGIC = b"LATENTCHAT-CKPT-1\n"


def _entries(arrays):
    out = []
    offset = 0
    for name, arr in arrays:
        out.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.size
    return out, offset


def save(path, model, optimizer=None, rng_state=None, epoch=0, extra=None):
    arrays = [(k, p.data) for k, p in model.params.items()]
    opt_state = None
    if optimizer is not None:
        opt_state = {"t": optimizer.t}
        arrays += [(f"adam_m:{k}", m) for k, m in optimizer.m.items()]
        arrays += [(f"adam_v:{k}", v) for k, v in optimizer.v.items()]
    entries, total = _entries(arrays)
    header = {
        "config": model.cfg.to_dict(),
        "params": entries,
        "optimizer": opt_state,
        "rng": rng_state,
        "epoch": epoch,
        "extra": extra or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_header(path):
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (n,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(n).decode())


def load(path, model, optimizer=None):
    """Restore parameters (and optimizer state) in place; returns the
    header for config/rng/epoch access."""
    header = read_header(path)
    with open(path, "rb") as fh:
        fh.read(len(MAGIC))
        (n,) = struct.unpack("<Q", fh.read(8))
        fh.read(n)
        payload = np.frombuffer(fh.read(), dtype="<f8")
    by_name = {e["name"]: e for e in header["params"]}

    def fetch(name, expect_shape):
        if name not in by_name:
            raise CheckpointError(f"{path}: missing parameter '{name}'")
        e = by_name[name]
        if tuple(e["shape"]) != tuple(expect_shape):
            raise CheckpointError(
                f"{path}: shape mismatch for '{name}': "
                f"checkpoint {tuple(e['shape'])} vs model {tuple(expect_shape)}"
            )
        size = int(np.prod(e["shape"])) if e["shape"] else 1
        return payload[e["offset"] : e["offset"] + size].reshape(e["shape"])

    mismatches = []
    for k, p in model.params.items():
        if k in by_name and tuple(by_name[k]["shape"]) != p.data.shape:
            mismatches.append(f"{k}: {tuple(by_name[k]['shape'])} vs {p.data.shape}")
    if mismatches:
        raise CheckpointError(f"{path}: architecture mismatch: " + "; ".join(mismatches))
    for k, p in model.params.items():
        p.data[...] = fetch(k, p.data.shape)
    if optimizer is not None:
        if header["optimizer"] is None:
            raise CheckpointError(f"{path}: checkpoint has no optimizer state")
        optimizer.t = int(header["optimizer"]["t"])
        for k in optimizer.m:
            optimizer.m[k][...] = fetch(f"adam_m:{k}", optimizer.m[k].shape)
            optimizer.v[k][...] = fetch(f"adam_v:{k}", optimizer.v[k].shape)
    return header


def config_from_header(header):
    return RunConfig.from_dict(header["config"])
