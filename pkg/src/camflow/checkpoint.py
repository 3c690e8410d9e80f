"""Checkpoint archive: plain-text manifest, verbatim run config, raw buffers.

Layout (single file):

    camflow-checkpoint v1\n
    config-bytes <M>\n
    tensor-count <N>\n
    <name> <dtype> <d0> <d1> ...\n     (N manifest lines, tensor order fixed)
    end-header\n
    <M bytes of config text>
    <raw little-endian buffers, concatenated in manifest order>
"""

from __future__ import annotations

import numpy as np
import torch

_MAGIC = "camflow-checkpoint v1"
_DTYPES = {"f32": np.dtype("<f4"), "f64": np.dtype("<f8")}
_TORCH_TO_TAG = {torch.float32: "f32", torch.float64: "f64"}


def save_checkpoint(path, state: dict, config_text: str) -> None:
    """Write named tensors (ordered dict, e.g. model.state_dict()) plus config."""
    config_bytes = config_text.encode("utf-8")
    manifest = []
    buffers = []
    for name, tensor in state.items():
        t = tensor.detach().cpu().contiguous()
        if t.dtype not in _TORCH_TO_TAG:
            raise ValueError(f"unsupported checkpoint dtype {t.dtype} for {name!r}")
        tag = _TORCH_TO_TAG[t.dtype]
        if not torch.isfinite(t).all():
            raise ValueError(f"non-finite values in parameter {name!r}")
        dims = " ".join(str(d) for d in t.shape)
        manifest.append(f"{name} {tag} {dims}".rstrip())
        buffers.append(t.numpy().astype(_DTYPES[tag], copy=False).tobytes())
    header = (f"{_MAGIC}\nconfig-bytes {len(config_bytes)}\n"
              f"tensor-count {len(manifest)}\n" + "\n".join(manifest)
              + ("\n" if manifest else "") + "end-header\n")
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        fh.write(config_bytes)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path) -> tuple:
    """Returns (ordered name->tensor dict, config text)."""
    with open(path, "rb") as fh:
        data = fh.read()
    sep = b"end-header\n"
    cut = data.find(sep)
    if cut < 0 or not data.startswith(_MAGIC.encode()):
        raise ValueError(f"{path} is not a camflow checkpoint")
    header_lines = data[:cut].decode("utf-8").splitlines()
    config_len = int(header_lines[1].split()[1])
    n_tensors = int(header_lines[2].split()[1])
    manifest = header_lines[3:3 + n_tensors]
    body = data[cut + len(sep):]
    config_text = body[:config_len].decode("utf-8")
    offset = config_len
    state = {}
    for line in manifest:
        parts = line.split()
        name, tag = parts[0], parts[1]
        shape = tuple(int(d) for d in parts[2:])
        dtype = _DTYPES[tag]
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        nbytes = count * dtype.itemsize
        arr = np.frombuffer(body, dtype=dtype, count=count,
                            offset=offset).reshape(shape)
        offset += nbytes
        state[name] = torch.from_numpy(arr.copy())
    if offset != len(body):
        raise ValueError(f"{path}: {len(body) - offset} trailing bytes")
    return state, config_text
