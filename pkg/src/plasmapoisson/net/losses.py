"""Training losses on batched potentials of shape ``(B, 1, ny, nx)``.

Interior sums run over nodes not on the Dirichlet boundary; denominators
follow the usual per-node normalisation, with ``(nx-1)(ny-1)`` for the
interior terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from ..field import AXISYMMETRIC, GridSpec


@dataclass(frozen=True)
class LossWeights:
    dirichlet: float = 1.0
    inside: float = 0.0
    laplacian: float = 1.0
    neumann: float = 0.0

    def __post_init__(self):
        values = (self.dirichlet, self.inside, self.laplacian, self.neumann)
        if any(w < 0 for w in values):
            raise ValueError("loss weights must be non-negative")
        if not any(w > 0 for w in values):
            raise ValueError("at least one loss weight must be positive")


def _spatial(x: torch.Tensor) -> torch.Tensor:
    if x.dim() == 3:
        x = x.unsqueeze(1)
    if x.dim() != 4 or x.shape[1] != 1:
        raise ValueError(f"expected (B, 1, ny, nx) tensors, got {tuple(x.shape)}")
    return x[:, 0]


def boundary_values(out: torch.Tensor, grid: GridSpec | None = None) -> torch.Tensor:
    """Values on Dirichlet nodes, each node once (the axis is excluded when axisymmetric)."""
    v = _spatial(out)
    axis = grid is not None and grid.geometry == AXISYMMETRIC
    parts = [v[:, -1, :], v[:, 1:-1, 0], v[:, 1:-1, -1]]
    if axis:
        parts[1:] = [v[:, :-1, 0], v[:, :-1, -1]]
    else:
        parts.append(v[:, 0, :])
    return torch.cat([p.reshape(v.shape[0], -1) for p in parts], dim=1)


def loss_dirichlet(out: torch.Tensor, grid: GridSpec | None = None) -> torch.Tensor:
    b = boundary_values(out, grid)
    return (b**2).sum() / b.numel()


def _interior(v: torch.Tensor, grid: GridSpec | None) -> torch.Tensor:
    if grid is not None and grid.geometry == AXISYMMETRIC:
        return v[:, :-1, 1:-1]
    return v[:, 1:-1, 1:-1]


def loss_inside(out: torch.Tensor, target: torch.Tensor | None, grid: GridSpec | None = None) -> torch.Tensor:
    if target is None:
        raise ValueError("inside loss needs target potentials")
    v, t = _spatial(out), _spatial(target)
    bs, ny, nx = v.shape
    return ((_interior(v, grid) - _interior(t, grid)) ** 2).sum() / (bs * (nx - 1) * (ny - 1))


def laplacian_torch(v: torch.Tensor, grid: GridSpec) -> torch.Tensor:
    """Discrete Laplacian on interior nodes of ``(B, ny, nx)`` values.

    Returns the ``(B, ny-2, nx-2)`` interior block for cartesian grids and
    the ``(B, ny-1, nx-2)`` block including the axis for axisymmetric ones.
    """
    dx, dy = grid.dx, grid.dy
    if grid.geometry != AXISYMMETRIC:
        return (v[:, 1:-1, :-2] - 2 * v[:, 1:-1, 1:-1] + v[:, 1:-1, 2:]) / dx**2 + (
            v[:, :-2, 1:-1] - 2 * v[:, 1:-1, 1:-1] + v[:, 2:, 1:-1]
        ) / dy**2
    axial = (v[:, :-1, :-2] - 2 * v[:, :-1, 1:-1] + v[:, :-1, 2:]) / dx**2
    r = torch.as_tensor(grid.y[1:-1], dtype=v.dtype, device=v.device)[:, None]
    on_axis = 4 * (v[:, 1:2, 1:-1] - v[:, 0:1, 1:-1]) / dy**2
    off_axis = ((r + dy / 2) * (v[:, 2:, 1:-1] - v[:, 1:-1, 1:-1])
                - (r - dy / 2) * (v[:, 1:-1, 1:-1] - v[:, :-2, 1:-1])) / (r * dy**2)
    return axial + torch.cat([on_axis, off_axis], dim=1)


def loss_laplacian(out: torch.Tensor, R: torch.Tensor, grid: GridSpec) -> torch.Tensor:
    """Scaled squared residual of ``laplacian(out) = -R`` in physical units."""
    v, r = _spatial(out), _spatial(R)
    bs, ny, nx = v.shape
    res = laplacian_torch(v, grid) + _interior(r, grid)
    return grid.Lx**2 * grid.Ly**2 * (res**2).sum() / (bs * (nx - 1) * (ny - 1))


def axis_gradient(v: torch.Tensor, dr: float) -> torch.Tensor:
    """Second-order one-sided ``d/dr`` on the axis row for interior ``x`` nodes."""
    return (-3 * v[:, 0, 1:-1] + 4 * v[:, 1, 1:-1] - v[:, 2, 1:-1]) / (2 * dr)


def loss_neumann(out: torch.Tensor, grid: GridSpec) -> torch.Tensor:
    v = _spatial(out)
    bs, _, nx = v.shape
    return (axis_gradient(v, grid.dy) ** 2).sum() / (bs * (nx - 2))


def total_loss(out, R, grid, weights: LossWeights, target=None) -> tuple[torch.Tensor, dict]:
    """Weighted sum of the active losses and their individual values."""
    parts = {}
    if weights.dirichlet:
        parts["dirichlet"] = loss_dirichlet(out, grid)
    if weights.inside:
        parts["inside"] = loss_inside(out, target, grid)
    if weights.laplacian:
        parts["laplacian"] = loss_laplacian(out, R, grid)
    if weights.neumann:
        parts["neumann"] = loss_neumann(out, grid)
    total = sum(getattr(weights, k) * v for k, v in parts.items())
    return total, {k: float(v.detach()) for k, v in parts.items()}
