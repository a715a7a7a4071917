"""
Plasma oscillation
==================

Push the electrons of a uniform 1e16 m^-3 plasma slightly out of place and
they swing back and forth at the plasma frequency, about 0.9 GHz here.
The Euler equations for the electron fluid are advanced with a two-step
Lax-Wendroff scheme while the field is recomputed by a Poisson solve
every step.  The measured period should sit within a fraction of a
percent of 2 pi / omega_p.

A trained network checkpoint can stand in for the solver:
``python 04_plasma_oscillation.py demo_out/training/deep.pnet``.
"""

import sys
from pathlib import Path

import torch

from plasmapoisson.backends import CGBackend, make_backend
from plasmapoisson.oscillation import OscillationConfig, measure_period, plasma_frequency, run

torch.set_num_threads(1)
out = Path("demo_out/oscillation")
out.mkdir(parents=True, exist_ok=True)

if len(sys.argv) > 1:
    backend = make_backend("network", Path(sys.argv[1]))
    config = OscillationConfig(n=backend.model.grid.nx)
else:
    backend, config = CGBackend(1e-10), OscillationConfig(n=61)

omega, T = plasma_frequency(config.n0)
print(f"omega_p = {omega:.4e} rad/s, T_p = {T:.4e} s")

diag = run(config, backend, log=print)
T_meas = measure_period(diag.t, diag.mean_probe)
print(f"time step {diag.dt:.3e} s, measured period {T_meas:.5e} s ({100 * (T_meas / T - 1):+.2f}%)")
print(f"envelope drift {diag.envelope_drift():.2%}, mass drift {diag.mass_drift():.1e}")
diag.to_csv(out / "oscillation.csv")
