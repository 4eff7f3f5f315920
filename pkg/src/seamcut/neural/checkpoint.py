"""Versioned binary checkpoint container.

Layout (little endian)::

    b"SEAMCKPT"  magic
    u32          format version
    u64          header length in bytes
    header       UTF-8 JSON: config, meta, tensor manifest
    blobs        raw float32 arrays in manifest order

Optimizer state is stored alongside the weights under ``optim/`` names so a
run can resume exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import torch

from .config import ModelConfig
from .model import SeamModel

MAGIC = b"SEAMCKPT"
VERSION = 1


class CheckpointError(ValueError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


def _optimizer_tensors(opt: torch.optim.Optimizer, names: dict) -> tuple[dict, dict]:
    """Flatten Adam-style state into named tensors plus JSON-able scalars."""
    tensors, scalars = {}, {}
    for p, state in opt.state.items():
        name = names[id(p)]
        for key, val in state.items():
            if torch.is_tensor(val) and val.dim() > 0:
                tensors[f"optim/{name}/{key}"] = val
            else:
                scalars[f"{name}/{key}"] = float(val)
    return tensors, scalars


def save_checkpoint(path, model: SeamModel, optimizer: torch.optim.Optimizer | None = None,
                    meta: dict | None = None) -> None:
    tensors = dict(model.state_dict())
    scalars = {}
    if optimizer is not None:
        names = {id(p): n for n, p in model.named_parameters()}
        opt_t, scalars = _optimizer_tensors(optimizer, names)
        tensors.update(opt_t)
    manifest = []
    blobs = []
    offset = 0
    for name, t in tensors.items():
        arr = t.detach().cpu().to(torch.float32).numpy().astype("<f4", copy=False)
        manifest.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "config": model.cfg.to_dict(),
        "meta": meta or {},
        "optimizer": None if optimizer is None else {
            "type": type(optimizer).__name__,
            "param_groups": [{k: v for k, v in g.items() if k != "params"}
                             for g in optimizer.param_groups],
            "scalars": scalars,
        },
        "tensors": manifest,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IQ", VERSION, len(raw)))
        fh.write(raw)
        for b in blobs:
            fh.write(b)


def read_checkpoint(path) -> tuple[dict, dict[str, np.ndarray]]:
    """Header dict and name → array mapping."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<IQ", data, 8)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    start = 8 + struct.calcsize("<IQ")
    header = json.loads(data[start:start + hlen].decode("utf-8"))
    base = start + hlen
    arrays = {}
    for entry in header["tensors"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        lo = base + entry["offset"]
        if lo + 4 * count > len(data):
            raise CheckpointError(f"{path}: truncated blob for {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(data, dtype="<f4", count=count,
                                              offset=lo).reshape(entry["shape"])
    return header, arrays


def load_checkpoint(path, expected: ModelConfig | None = None, with_optimizer: bool = False):
    """Rebuild the model (and optionally an Adam optimizer with restored state).

    Raises :class:`ConfigMismatchError` if ``expected`` differs from the stored config.
    Returns ``(model, optimizer_or_None, meta)``.
    """
    header, arrays = read_checkpoint(path)
    cfg = ModelConfig.from_dict(header["config"])
    if expected is not None and expected.to_dict() != cfg.to_dict():
        diff = sorted(k for k, v in expected.to_dict().items() if header["config"].get(k) != v)
        raise ConfigMismatchError(f"checkpoint config differs in: {', '.join(diff)}")
    model = SeamModel(cfg)
    state = {k: torch.from_numpy(arrays[k].copy()) for k in model.state_dict()}
    model.load_state_dict(state)
    model.eval()
    opt = None
    info = header.get("optimizer")
    if with_optimizer and info is not None:
        groups = info["param_groups"]
        opt = torch.optim.Adam(model.parameters(), **{k: (tuple(v) if isinstance(v, list) else v)
                                                      for k, v in groups[0].items()
                                                      if k in ("lr", "betas", "eps", "weight_decay")})
        for name, p in model.named_parameters():
            st = {}
            for key in ("exp_avg", "exp_avg_sq"):
                arr = arrays.get(f"optim/{name}/{key}")
                if arr is not None:
                    st[key] = torch.from_numpy(arr.copy())
            step = info["scalars"].get(f"{name}/step")
            if st:
                st["step"] = torch.tensor(step if step is not None else 0.0)
                opt.state[p] = st
    return model, opt, header.get("meta", {})
