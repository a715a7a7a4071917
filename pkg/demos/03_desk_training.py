"""
Training a Poisson surrogate on a desk
======================================

A random-charge dataset on a 64x64 grid trains two UNets with the same
parameter budget.  The deep one sees 141 pixels, more than twice the
domain; the shallow one sees 33.  Both learn from the Laplacian residual
and the boundary values only, no target potentials.  The deep network
ends up far more accurate on the lowest Fourier mode, the part of the
solution that depends on charge across the whole box.

Runs for about five minutes on one core.  Pass a smaller sample count as
the first argument for a quicker look.
"""

import sys
import time
from pathlib import Path

import torch

from plasmapoisson.dataset import build_dataset
from plasmapoisson.field import GridSpec
from plasmapoisson.net import (LossWeights, NetConfig, TrainConfig, TrainingData, build_network,
                               history_csv, mode_amplitude_error, package, predict_batch, receptive_field,
                               save_checkpoint, train)

torch.set_num_threads(1)
count = int(sys.argv[1]) if len(sys.argv) > 1 else 625
out = Path("demo_out/training")
out.mkdir(parents=True, exist_ok=True)

m = build_dataset(out / "random_8", "random_8", count, GridSpec.square(64), seed=1)
tr, va = TrainingData.from_manifest(m, "train"), TrainingData.from_manifest(m, "val")
print(f"{len(tr)} training and {len(va)} validation samples")

weights = LossWeights(dirichlet=1, laplacian=1)
for name, depths in (("deep", (2, 2, 2, 7)), ("shallow", (2, 1, 1, 1))):
    net = build_network(NetConfig("unet", depths, budget=20_000))
    t0 = time.perf_counter()
    net, hist = train(net, tr, weights, TrainConfig(epochs=50, batch_size=8, lr=1e-3), va)
    pred = predict_batch(net, va.R, va.ratio)
    print(f"{name}: RF {receptive_field(net.config)[0]}, {net.parameter_count} parameters, "
          f"{time.perf_counter() - t0:.0f} s")
    print(f"  E 1-norm error {hist[0]['E_l1']:.3e} -> {hist[-1]['E_l1']:.3e}")
    print(f"  mode (1,1) amplitude error {mode_amplitude_error(pred, va.phi, va.grid):.3e} V")
    (out / f"{name}_training.csv").write_text(history_csv(hist))
    save_checkpoint(out / f"{name}.pnet", package(net, tr))
