"""Scale-change operators shared by the multi-scale networks.

Downsampling keeps every other node (node injection) and upsampling repeats
each coarse node over the two fine nodes it owns.  Both maps are exact
inverses on the even nodes, and their footprints compose additively, so the
receptive field of a network is the sum of its branch contributions.
"""

from __future__ import annotations

import torch
from torch import nn


def downsample2(x: torch.Tensor) -> torch.Tensor:
    """Keep nodes ``0, 2, ..., 2 (n//2 - 1)`` in both spatial directions."""
    h, w = x.shape[-2:]
    if h < 2 or w < 2:
        raise ValueError(f"cannot downsample a {h}x{w} image")
    return x[..., 0 : 2 * (h // 2) : 2, 0 : 2 * (w // 2) : 2]


def _nearest_index(n_fine: int, n_coarse: int, device) -> torch.Tensor:
    return torch.clamp(torch.arange(n_fine, device=device) // 2, max=n_coarse - 1)


def upsample2(x: torch.Tensor, size: tuple[int, int]) -> torch.Tensor:
    """Nearest upsampling to ``size``: fine node ``j`` reads coarse node ``min(j//2, n-1)``."""
    h, w = x.shape[-2:]
    iy = _nearest_index(size[0], h, x.device)
    ix = _nearest_index(size[1], w, x.device)
    return x.index_select(-2, iy).index_select(-1, ix)


def downsample_to_branch(x: torch.Tensor, b: int) -> torch.Tensor:
    for _ in range(b):
        x = downsample2(x)
    return x


def branch_sizes(n: int, n_b: int) -> list[int]:
    """Image sizes along the branch chain, e.g. 101 -> [101, 50, 25, 12, 6]."""
    sizes = [n]
    for _ in range(n_b - 1):
        sizes.append(sizes[-1] // 2)
    return sizes


class ConvStack(nn.Module):
    """``depth`` same-padded convolutions, ReLU after each but optionally the last."""

    def __init__(self, c_in: int, c_hidden: int, c_out: int, depth: int, k_s: int, last_linear: bool):
        super().__init__()
        if depth < 1:
            raise ValueError("a conv stack needs at least one layer")
        layers = []
        for i in range(depth):
            a = c_in if i == 0 else c_hidden
            b = c_out if i == depth - 1 else c_hidden
            layers.append(nn.Conv2d(a, b, k_s, padding=k_s // 2))
            if not (last_linear and i == depth - 1):
                layers.append(nn.ReLU())
        self.body = nn.Sequential(*layers)
        self.c_out = c_out

    def forward(self, x):
        return self.body(x)
