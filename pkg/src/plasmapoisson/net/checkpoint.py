"""Single-file network checkpoints.

Layout: ``PNET1``, a little-endian u32 byte length, that many bytes of
``key=value`` text (architecture plus training metadata), then every
state-dict tensor as little-endian f64 in state-dict order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..field import GridSpec
from .models import NetConfig, Network

MAGIC = b"PNET1"


class CheckpointError(ValueError):
    pass


@dataclass
class TrainedModel:
    network: Network
    grid: GridSpec
    ratio: float
    input_scale: float
    meta: dict = field(default_factory=dict)

    @property
    def delta_nn(self) -> float:
        return self.grid.dx


def _meta_text(model: TrainedModel) -> str:
    g = model.grid
    lines = [model.network.config.to_text(),
             f"nx={g.nx}", f"ny={g.ny}", f"Lx={g.Lx!r}", f"Ly={g.Ly!r}", f"geometry={g.geometry}",
             f"ratio={model.ratio!r}", f"input_scale={model.input_scale!r}"]
    lines += [f"{k}={v}" for k, v in model.meta.items()]
    return "\n".join(lines) + "\n"


def save_checkpoint(path, model: TrainedModel) -> None:
    text = _meta_text(model).encode()
    chunks = [MAGIC, struct.pack("<I", len(text)), text]
    for t in model.network.state_dict().values():
        chunks.append(t.detach().cpu().double().numpy().astype("<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path, dtype=torch.float32) -> TrainedModel:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise CheckpointError(f"{path}: not a network checkpoint")
    (size,) = struct.unpack_from("<I", data, 5)
    text = data[9 : 9 + size].decode()
    entries = dict(line.split("=", 1) for line in text.splitlines() if line)
    config = NetConfig.from_mapping(entries)
    net = Network(config)
    offset = 9 + size
    state = net.state_dict()
    for key, t in state.items():
        nbytes = 8 * t.numel()
        if offset + nbytes > len(data):
            raise CheckpointError(f"{path}: truncated at {key}")
        arr = np.frombuffer(data, dtype="<f8", count=t.numel(), offset=offset).reshape(t.shape)
        state[key] = torch.as_tensor(arr.copy())
        offset += nbytes
    if offset != len(data):
        raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
    net.load_state_dict(state)
    net.to(dtype)
    grid = GridSpec(int(entries["nx"]), int(entries["ny"]), float(entries["Lx"]), float(entries["Ly"]),
                    entries["geometry"])
    known = set(config.to_text().replace("\n", "=").split("=")[::2]) | {
        "nx", "ny", "Lx", "Ly", "geometry", "ratio", "input_scale"}
    meta = {k: v for k, v in entries.items() if k not in known}
    return TrainedModel(net, grid, float(entries["ratio"]), float(entries["input_scale"]), meta)
