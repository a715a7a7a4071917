"""Interchangeable Poisson solvers behind one call signature.

A backend maps a charge field ``R`` to a potential with zero Dirichlet data
(and a Neumann axis on axisymmetric grids).
"""

from __future__ import annotations

import re
from typing import Callable

import numpy as np

from .analytic import solve_analytic
from .field import AXISYMMETRIC, ScalarField
from .linsolve import BoundarySpec, cg_solve, jacobi_solve


class PoissonBackend:
    name = "backend"

    def __call__(self, R: ScalarField) -> ScalarField:
        return self.solve(R)

    def solve(self, R: ScalarField) -> ScalarField:
        raise NotImplementedError


def _bc(R: ScalarField) -> BoundarySpec:
    return BoundarySpec.axisymmetric() if R.grid.geometry == AXISYMMETRIC else BoundarySpec.zero_dirichlet()


class AnalyticBackend(PoissonBackend):
    name = "analytic"

    def __init__(self, modes: int | None = None):
        self.modes = modes

    def solve(self, R):
        return solve_analytic(R, self.modes, self.modes)


class CGBackend(PoissonBackend):
    """Conjugate gradient, warm-started from the previous solution on the same grid."""

    name = "cg"

    def __init__(self, rtol: float = 1e-10, warm_start: bool = True, preconditioner: str = "diagonal"):
        self.rtol = rtol
        self.warm_start = warm_start
        self.preconditioner = preconditioner
        self.last = None
        self.last_report = None

    def solve(self, R):
        x0 = self.last if self.warm_start and self.last is not None and self.last.grid == R.grid else None
        phi, self.last_report = cg_solve(R, _bc(R), rtol=self.rtol, x0=x0, preconditioner=self.preconditioner)
        if not self.last_report.converged:
            raise RuntimeError(f"cg did not reach rtol {self.rtol}: residual {self.last_report.residual:.3e}")
        self.last = phi
        return phi


class JacobiBackend(PoissonBackend):
    name = "jacobi"

    def __init__(self, rtol: float = 1e-3, max_iter: int = 200_000):
        self.rtol = rtol
        self.max_iter = max_iter
        self.last_report = None

    def solve(self, R):
        phi, self.last_report = jacobi_solve(R, _bc(R), rtol=self.rtol, max_iter=self.max_iter)
        return phi


class NetworkBackend(PoissonBackend):
    """Trained network with resolution scaling and optional input rescaling."""

    name = "network"

    def __init__(self, model, adaptive_scaling: bool = True):
        from .net.train import infer

        self._infer = infer
        self.model = model
        self.adaptive_scaling = adaptive_scaling

    def solve(self, R):
        scale = self.model.input_scale if self.adaptive_scaling else None
        phi, _ = self._infer(self.model.network, R, self.model.ratio, self.model.delta_nn, scale)
        if not np.all(np.isfinite(phi.values)):
            raise RuntimeError("network produced non-finite potential")
        return phi


def make_backend(spec: str, checkpoint=None) -> PoissonBackend:
    """Parse ``analytic``, ``analytic(N)``, ``cg(rtol)``, ``cg_lu(rtol)``, ``jacobi(rtol)`` or ``network``."""
    m = re.fullmatch(r"(\w+)(?:\(([^)]*)\))?", spec.strip())
    if not m:
        raise ValueError(f"cannot parse backend {spec!r}")
    kind, arg = m.group(1), m.group(2)
    if kind == "analytic":
        return AnalyticBackend(int(arg) if arg else None)
    if kind == "cg":
        return CGBackend(float(arg) if arg else 1e-10)
    if kind == "cg_lu":
        return CGBackend(float(arg) if arg else 1e-10, preconditioner="factorized")
    if kind == "jacobi":
        return JacobiBackend(float(arg) if arg else 1e-3)
    if kind == "network":
        from .net.checkpoint import TrainedModel, load_checkpoint

        if checkpoint is None:
            raise ValueError("network backend needs a checkpoint")
        model = checkpoint if isinstance(checkpoint, TrainedModel) else load_checkpoint(checkpoint)
        return NetworkBackend(model)
    raise ValueError(f"unknown backend {kind!r}")


Solver = Callable[[ScalarField], ScalarField]
