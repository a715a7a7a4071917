"""Mini-batch training and scaled inference."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
import torch

from ..analytic import resolution_ratio
from ..dataset import DatasetManifest
from ..field import GridSpec, ScalarField, VectorField, gradient_to_efield, mode_amplitude
from .losses import LossWeights, total_loss
from .models import Network

HISTORY_COLUMNS = ("epoch", "train_loss", "val_loss", "phi_l1", "E_l1", "E_linf")
_DTYPES = {"float32": torch.float32, "float64": torch.float64}


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 2e-4
    optimizer: str = "adam"
    seed: int = 0
    precision: str = "float32"

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.precision not in _DTYPES:
            raise ValueError(f"unknown precision {self.precision!r}")


@dataclass
class TrainingData:
    """Arrays of one dataset split, ready for batching."""

    grid: GridSpec
    ratio: float
    R: np.ndarray
    phi: np.ndarray | None

    @classmethod
    def from_manifest(cls, m: DatasetManifest, split: str = "train") -> "TrainingData":
        idx = {"train": m.train, "val": m.val, "all": m.samples}[split]
        return cls(m.grid, m.ratio, m.load_inputs(idx), m.load_targets(idx) if m.has_targets else None)

    def __len__(self):
        return self.R.shape[0]


def _tensor(a: np.ndarray, dtype) -> torch.Tensor:
    return torch.as_tensor(a, dtype=dtype).unsqueeze(1)


def predict_batch(network: Network, R: np.ndarray, ratio: float, dtype=torch.float32, chunk: int = 64) -> np.ndarray:
    """Network potentials for a stack of charge fields at the trained resolution."""
    network.eval()
    outs = []
    with torch.no_grad():
        for s in range(0, R.shape[0], chunk):
            x = _tensor(R[s : s + chunk] * ratio, dtype)
            outs.append(network(x)[:, 0].double().numpy())
    return np.concatenate(outs)


def field_metrics(phi: np.ndarray, target: np.ndarray, grid: GridSpec) -> tuple[float, float, float]:
    """Mean |dphi|, mean |dE| and max |dE| over a stack of fields."""
    d = phi - target
    gy, gx = np.gradient(d, grid.dy, grid.dx, axis=(1, 2), edge_order=2)
    dE = np.abs(np.stack([gx, gy]))
    return float(np.mean(np.abs(d))), float(np.mean(dE)), float(np.max(dE))


def mode_amplitude_error(phi: np.ndarray, target: np.ndarray, grid: GridSpec, n: int = 1, m: int = 1) -> float:
    """Mean absolute error of the ``(n, m)`` sine-mode amplitude over a stack of potentials."""
    errs = [abs(mode_amplitude(ScalarField(grid, p - t), n, m)) for p, t in zip(phi, target)]
    return math.fsum(errs) / len(errs)


def _validation_row(network, data: TrainingData, weights, dtype, epoch, train_loss) -> dict:
    row = {"epoch": epoch, "train_loss": train_loss}
    pred = predict_batch(network, data.R, data.ratio, dtype)
    with torch.no_grad():
        loss, _ = total_loss(torch.as_tensor(pred).unsqueeze(1), torch.as_tensor(data.R).unsqueeze(1),
                             data.grid, weights, None if data.phi is None else torch.as_tensor(data.phi).unsqueeze(1))
    row["val_loss"] = float(loss)
    if data.phi is not None:
        row["phi_l1"], row["E_l1"], row["E_linf"] = field_metrics(pred, data.phi, data.grid)
    else:
        row["phi_l1"] = row["E_l1"] = row["E_linf"] = math.nan
    return row


def train(
    network: Network,
    train_data: TrainingData,
    weights: LossWeights,
    config: TrainConfig,
    val_data: TrainingData | None = None,
    start_epoch: int = 0,
    log=None,
) -> tuple[Network, list[dict]]:
    """Minimise the weighted loss; row 0 of the history describes the initial network."""
    if weights.inside > 0 and train_data.phi is None:
        raise ValueError("inside loss requested but the dataset has no targets")
    dtype = _DTYPES[config.precision]
    network.to(dtype)
    val_data = val_data or train_data
    grid = train_data.grid
    gen = torch.Generator().manual_seed(config.seed)
    params = list(network.parameters())
    if config.optimizer == "adam":
        opt = torch.optim.Adam(params, lr=config.lr)
    else:
        opt = torch.optim.SGD(params, lr=config.lr)

    X = _tensor(train_data.R * train_data.ratio, dtype)
    R = _tensor(train_data.R, dtype)
    T = None if train_data.phi is None else _tensor(train_data.phi, dtype)
    history = []
    if start_epoch == 0:
        history.append(_validation_row(network, val_data, weights, dtype, 0, math.nan))
    n = len(train_data)
    for epoch in range(start_epoch + 1, start_epoch + config.epochs + 1):
        t0 = time.perf_counter()
        network.train()
        order = torch.randperm(n, generator=gen)
        total, batches = 0.0, 0
        for s in range(0, n, config.batch_size):
            idx = order[s : s + config.batch_size]
            out = network(X[idx])
            loss, _ = total_loss(out, R[idx], grid, weights, None if T is None else T[idx])
            if not torch.isfinite(loss):
                raise TrainingDiverged(f"loss became {float(loss)} at epoch {epoch}, batch {batches}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += float(loss.detach())
            batches += 1
        row = _validation_row(network, val_data, weights, dtype, epoch, total / batches)
        history.append(row)
        if log:
            log(f"epoch {epoch}: train {row['train_loss']:.4e} val {row['val_loss']:.4e} "
                f"E_l1 {row['E_l1']:.4e} ({time.perf_counter() - t0:.1f} s)")
    return network, history


def history_csv(history: list[dict]) -> str:
    lines = [",".join(HISTORY_COLUMNS)]
    for row in history:
        lines.append(f"{row['epoch']}," + ",".join(f"{row[c]:.8e}" for c in HISTORY_COLUMNS[1:]))
    return "\n".join(lines) + "\n"


def infer(
    network: Network,
    R: ScalarField,
    ratio: float,
    delta_nn: float,
    input_scale: float | None = None,
) -> tuple[ScalarField, VectorField]:
    """Potential and field of ``R`` from a network trained with spacing ``delta_nn``.

    The charge is multiplied by the training normalisation ``ratio`` and the
    output by ``(dx / delta_nn)^2``.  With ``input_scale`` set, the
    normalised input is first rescaled to that maximum and the output scaled
    back, which uses the linearity of the Poisson operator to keep inputs in
    the range seen during training.
    """
    dtype = next(network.parameters()).dtype
    x = R.values * ratio
    s = 1.0
    if input_scale is not None:
        peak = float(np.max(np.abs(x)))
        s = input_scale / peak if peak > 0 else 1.0
    network.eval()
    with torch.no_grad():
        out = network(torch.as_tensor(x * s, dtype=dtype)[None, None])[0, 0].double().numpy()
    phi = ScalarField(R.grid, out / s * resolution_ratio(R.grid.dx, delta_nn))
    return phi, gradient_to_efield(phi)


def typical_input_scale(data: TrainingData) -> float:
    """Median over samples of the peak normalised input."""
    peaks = np.max(np.abs(data.R * data.ratio), axis=(1, 2))
    return float(np.median(peaks))


def package(network: Network, data: TrainingData, meta: dict | None = None):
    """Bundle a trained network with what inference needs."""
    from .checkpoint import TrainedModel

    return TrainedModel(network, data.grid, data.ratio, typical_input_scale(data), dict(meta or {}))
