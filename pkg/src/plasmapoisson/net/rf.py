"""Receptive-field calculus and an empirical footprint probe."""

from __future__ import annotations

import copy

import torch
from torch import nn

from .layers import branch_sizes


def branch_receptive_fields(depths, k_s: int) -> list[int]:
    """Per-branch contributions ``d_b (k_s - 1) 2^b``, plus 1 for the input pixel at ``b = 0``."""
    return [d * (k_s - 1) * 2**b + (1 if b == 0 else 0) for b, d in enumerate(depths)]


def receptive_field(config_or_depths, k_s: int | None = None) -> tuple[int, list[int]]:
    """Total receptive field and its per-branch breakdown."""
    if k_s is None:
        depths, k_s = config_or_depths.depths, config_or_depths.k_s
    else:
        depths = config_or_depths
    per_branch = branch_receptive_fields(depths, k_s)
    return sum(per_branch), per_branch


def optimal_params(n_p: int, k_s: int = 3) -> tuple[int, int]:
    """Receptive field ``2 n_p`` and the deepest branch count whose coarsest image exceeds ``k_s``."""
    if n_p <= k_s:
        raise ValueError("image must be larger than the kernel")
    b = 0
    while n_p // 2 ** (b + 1) > k_s:
        b += 1
    return 2 * n_p, b + 1


def useless_branches(n_b: int, n_p: int, k_s: int) -> list[int]:
    """Branches whose image is no larger than the kernel."""
    return [b for b, size in enumerate(branch_sizes(n_p, n_b)) if size <= k_s]


def effective_receptive_field(depths, k_s: int, n_p: int, total: int | None = None) -> int:
    """Receptive field left once the contributions of useless branches are removed.

    ``total`` overrides the formula total, for networks quoted by a nominal
    receptive field.
    """
    rf, per_branch = receptive_field(depths, k_s)
    rf = rf if total is None else total
    return rf - sum(per_branch[b] for b in useless_branches(len(depths), n_p, k_s))


def formula_is_exact(config) -> bool:
    """Whether the measured footprint of ``config`` equals the formula.

    Always true for the UNet construction.  In an MSNet each upsampling
    floors the half-width carried from the finer scales, so the formula is
    exact only while that half-width stays even down to the second-coarsest
    branch.
    """
    if config.architecture == "unet":
        return True
    half = 0
    for b in range(config.n_b - 2):
        half = half // 2 + config.depths[b] * (config.k_s - 1) // 2
        if half % 2:
            return False
    return True


def probe_copy(model: nn.Module) -> nn.Module:
    """Linear float64 copy with positive weights (``1/fan_in``) and zero biases."""
    probe = copy.deepcopy(model).double()

    def strip(module):
        for name, child in module.named_children():
            if isinstance(child, (nn.ReLU, nn.LeakyReLU, nn.Tanh, nn.GELU)):
                setattr(module, name, nn.Identity())
            else:
                strip(child)

    strip(probe)
    with torch.no_grad():
        for m in probe.modules():
            if isinstance(m, nn.Conv2d):
                m.weight.fill_(1.0 / m.weight[0].numel())
                if m.bias is not None:
                    m.bias.zero_()
    return probe


def footprint(model: nn.Module, n: int, in_channels: int = 1) -> int:
    """Side of the bounding box of inputs influencing the centre output node."""
    x = torch.zeros(1, in_channels, n, n, dtype=torch.float64, requires_grad=True)
    out = model(x)
    c = n // 2
    out[0, 0, c, c].backward()
    nz = torch.nonzero(x.grad[0].abs().sum(0) > 0)
    if nz.numel() == 0:
        return 0
    rows, cols = nz[:, 0], nz[:, 1]
    return int(max(rows.max() - rows.min(), cols.max() - cols.min()) + 1)


def empirical_rf(network: nn.Module, n: int | None = None) -> int:
    """Measured receptive field of ``network`` on an ``n x n`` input.

    By default ``n`` is large enough that the footprint is not clipped.
    """
    if n is None:
        rf, _ = receptive_field(network.config)
        n = 2 * rf + 2 ** network.config.n_b + 1
    return footprint(probe_copy(network), n)
