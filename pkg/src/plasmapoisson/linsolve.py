"""Matrix-free Poisson operators and iterative reference solvers.

The discrete operator is assembled in flux form over node-centred control
volumes.  Writing ``K`` for the sum of face fluxes and ``W`` for the
control-volume measure, ``A = W^-1 K = -laplacian``.  ``K`` is symmetric
positive definite on the free (non-Dirichlet) nodes for both geometries, so
the solvers work on ``K u = W R`` and the axisymmetric case needs no special
treatment.  Non-zero Dirichlet data enters through a lift.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg, splu

from .field import AXISYMMETRIC, GridSpec, ScalarField

EdgeValue = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

DIRICHLET = "dirichlet"
NEUMANN = "neumann_zero"
EDGES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class EdgeCondition:
    kind: str = DIRICHLET
    value: EdgeValue = 0.0

    def __post_init__(self):
        if self.kind not in (DIRICHLET, NEUMANN):
            raise ValueError(f"unknown boundary kind {self.kind!r}")

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if callable(self.value):
            return np.broadcast_to(np.asarray(self.value(x, y), dtype=np.float64), x.shape)
        return np.full(x.shape, float(self.value))


def dirichlet(value: EdgeValue = 0.0) -> EdgeCondition:
    return EdgeCondition(DIRICHLET, value)


def neumann() -> EdgeCondition:
    return EdgeCondition(NEUMANN)


@dataclass(frozen=True)
class BoundarySpec:
    """Conditions on the four edges.

    ``left``/``right`` are ``x = 0`` and ``x = Lx``; ``bottom``/``top`` are
    ``y = 0`` and ``y = Ly`` (the axis and the outer radius for
    axisymmetric grids).  Corners shared with a Dirichlet edge are Dirichlet.
    """

    left: EdgeCondition = field(default_factory=dirichlet)
    right: EdgeCondition = field(default_factory=dirichlet)
    bottom: EdgeCondition = field(default_factory=dirichlet)
    top: EdgeCondition = field(default_factory=dirichlet)

    def __post_init__(self):
        if all(getattr(self, e).kind == NEUMANN for e in EDGES):
            raise ValueError("at least one edge must be Dirichlet")

    @classmethod
    def zero_dirichlet(cls) -> "BoundarySpec":
        return cls()

    @classmethod
    def axisymmetric(cls, value: EdgeValue = 0.0) -> "BoundarySpec":
        """Neumann on the axis, Dirichlet ``value`` on the other three edges."""
        return cls(dirichlet(value), dirichlet(value), neumann(), dirichlet(value))

    @classmethod
    def uniform_field(cls, ex: float) -> "BoundarySpec":
        """Axisymmetric conditions imposing ``phi = -ex x`` on the Dirichlet edges."""
        return cls.axisymmetric(lambda x, y: -ex * x)

    def kinds(self) -> tuple:
        return tuple(getattr(self, e).kind for e in EDGES)

    def dirichlet_mask(self, grid: GridSpec) -> np.ndarray:
        mask = np.zeros(grid.shape, dtype=bool)
        if self.left.kind == DIRICHLET:
            mask[:, 0] = True
        if self.right.kind == DIRICHLET:
            mask[:, -1] = True
        if self.bottom.kind == DIRICHLET:
            mask[0, :] = True
        if self.top.kind == DIRICHLET:
            mask[-1, :] = True
        return mask

    def lift(self, grid: GridSpec) -> np.ndarray:
        """Dirichlet data on Dirichlet nodes, zero elsewhere."""
        X, Y = grid.mesh()
        out = np.zeros(grid.shape)
        # x edges are written last so they own the corners
        for edge, sl in (("bottom", np.s_[0, :]), ("top", np.s_[-1, :]),
                         ("left", np.s_[:, 0]), ("right", np.s_[:, -1])):
            cond = getattr(self, edge)
            if cond.kind == DIRICHLET:
                out[sl] = cond.evaluate(X[sl], Y[sl])
        return out


class PoissonOperator:
    """Flux-form ``-laplacian`` for a grid and boundary specification."""

    def __init__(self, grid: GridSpec, bc: BoundarySpec | None = None):
        self.grid = grid
        self.bc = bc or BoundarySpec.zero_dirichlet()
        if grid.geometry == AXISYMMETRIC and self.bc.bottom.kind != NEUMANN:
            raise ValueError("axisymmetric problems need a Neumann condition on the axis")
        g = grid
        self.dirichlet = self.bc.dirichlet_mask(g)
        self.free = ~self.dirichlet

        hx = np.full(g.nx, g.dx)
        if self.bc.left.kind == NEUMANN:
            hx[0] = g.dx / 2
        if self.bc.right.kind == NEUMANN:
            hx[-1] = g.dx / 2

        if g.geometry == AXISYMMETRIC:
            dr, r = g.dy, g.y
            hy = r * dr
            hy[0] = dr**2 / 8
            hy[-1] = (g.Ly**2 - (g.Ly - dr / 2) ** 2) / 2
            face_scale = r[:-1] + dr / 2
        else:
            hy = np.full(g.ny, g.dy)
            if self.bc.bottom.kind == NEUMANN:
                hy[0] = g.dy / 2
            if self.bc.top.kind == NEUMANN:
                hy[-1] = g.dy / 2
            face_scale = np.ones(g.ny - 1)

        self.hx, self.hy = hx, hy
        self.weights = np.outer(hy, hx)
        self.cx = (hy / g.dx)[:, None]  # faces between columns i and i+1
        self.cy = face_scale[:, None] * hx[None, :] / g.dy  # faces between rows j and j+1
        self.diagonal = self._flux_diagonal()

    def _flux_diagonal(self) -> np.ndarray:
        d = np.zeros(self.grid.shape)
        d[:, :-1] += self.cx
        d[:, 1:] += self.cx
        d[:-1, :] += self.cy
        d[1:, :] += self.cy
        return d

    def flux(self, phi: np.ndarray) -> np.ndarray:
        """``K phi``: net outward flux for every node (Dirichlet rows included)."""
        out = np.zeros_like(phi)
        fx = self.cx * (phi[:, 1:] - phi[:, :-1])
        out[:, :-1] -= fx
        out[:, 1:] += fx
        fy = self.cy * (phi[1:, :] - phi[:-1, :])
        out[:-1, :] -= fy
        out[1:, :] += fy
        return out

    def apply(self, phi: np.ndarray) -> np.ndarray:
        """``-laplacian(phi)`` on free nodes, 0 on Dirichlet nodes."""
        out = self.flux(phi) / self.weights
        out[self.dirichlet] = 0.0
        return out

    def _linear_operator(self) -> LinearOperator:
        n = int(self.free.sum())
        buf = np.zeros(self.grid.shape)

        def matvec(u):
            buf[self.free] = np.ravel(u)
            return self.flux(buf)[self.free]

        return LinearOperator((n, n), matvec=matvec, dtype=np.float64)

    def matrix(self) -> sparse.csc_matrix:
        """``K`` restricted to the free nodes as a sparse matrix."""
        g = self.grid
        idx = np.full(g.shape, -1)
        idx[self.free] = np.arange(int(self.free.sum()))
        rows, cols, vals = [], [], []
        for a, b, c in ((idx[:, :-1], idx[:, 1:], np.broadcast_to(self.cx, (g.ny, g.nx - 1))),
                        (idx[:-1, :], idx[1:, :], self.cy)):
            a, b, c = a.ravel(), b.ravel(), np.ravel(c)
            both = (a >= 0) & (b >= 0)
            rows += [a[both], b[both]]
            cols += [b[both], a[both]]
            vals += [-c[both], -c[both]]
        d = self.diagonal[self.free]
        rows.append(np.arange(d.size))
        cols.append(np.arange(d.size))
        vals.append(d)
        n = d.size
        return sparse.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))

    def system(self, R: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Right-hand side of the reduced system and the Dirichlet lift."""
        lift = self.bc.lift(self.grid)
        b = (self.weights * R - self.flux(lift))[self.free]
        return b, lift

    def assemble(self, u: np.ndarray, lift: np.ndarray) -> np.ndarray:
        phi = lift.copy()
        phi[self.free] = u
        return phi

    def relative_residual(self, phi: np.ndarray, R: np.ndarray) -> float:
        """``||K phi - W R|| / ||W R - K lift||`` over free nodes."""
        b, _ = self.system(R)
        nb = np.linalg.norm(b)
        r = (self.flux(phi) - self.weights * R)[self.free]
        return float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))


@dataclass
class SolveReport:
    solver: str
    nodes: int
    rtol: float
    iterations: int
    residual: float
    seconds: float
    converged: bool
    history: list = field(default_factory=list, repr=False)

    CSV_HEADER = "solver,nodes,rtol,iterations,residual,seconds"

    def csv_row(self) -> str:
        return (f"{self.solver},{self.nodes},{self.rtol:.3e},{self.iterations},"
                f"{self.residual:.6e},{self.seconds:.6e}")


def _check_tolerances(rtol: float, max_iter: int):
    if not 0.0 < rtol < 1.0:
        raise ValueError("rtol must lie in (0, 1)")
    if max_iter < 1:
        raise ValueError("max_iter must be positive")


def apply_operator(grid: GridSpec, bc: BoundarySpec | None, phi: ScalarField) -> ScalarField:
    return ScalarField(grid, PoissonOperator(grid, bc).apply(phi.values))


def jacobi_solve(
    R: ScalarField,
    bc: BoundarySpec | None = None,
    rtol: float = 1e-6,
    max_iter: int = 100_000,
    omega: float = 1.0,
    x0: ScalarField | None = None,
) -> tuple[ScalarField, SolveReport]:
    """Weighted Jacobi iteration; ``history`` holds the relative residual per sweep."""
    _check_tolerances(rtol, max_iter)
    op = PoissonOperator(R.grid, bc)
    t0 = time.perf_counter()
    b, lift = op.system(R.values)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        report = SolveReport("jacobi", R.grid.nx * R.grid.ny, rtol, 0, 0.0, 0.0, True, [0.0])
        return ScalarField(R.grid, lift), report
    kop = op._linear_operator()
    dinv = 1.0 / op.diagonal[op.free]
    u = np.zeros_like(b) if x0 is None else x0.values[op.free].copy()
    r = b - kop.matvec(u)
    history = [float(np.linalg.norm(r) / nb)]
    it = 0
    while history[-1] > rtol and it < max_iter:
        u += omega * dinv * r
        r = b - kop.matvec(u)
        history.append(float(np.linalg.norm(r) / nb))
        it += 1
    seconds = time.perf_counter() - t0
    report = SolveReport("jacobi", R.grid.nx * R.grid.ny, rtol, it, history[-1], seconds,
                         history[-1] <= rtol, history)
    return ScalarField(R.grid, op.assemble(u, lift)), report


PRECONDITIONERS = ("none", "diagonal", "factorized")


@lru_cache(maxsize=8)
def _factor(grid: GridSpec, kinds: tuple):
    bc = BoundarySpec(*(EdgeCondition(k) for k in kinds))
    return splu(PoissonOperator(grid, bc).matrix())


def cg_solve(
    R: ScalarField,
    bc: BoundarySpec | None = None,
    rtol: float = 1e-10,
    max_iter: int = 100_000,
    preconditioner: str = "none",
    x0: ScalarField | None = None,
) -> tuple[ScalarField, SolveReport]:
    """Conjugate gradient on the symmetric flux system.

    ``preconditioner`` is ``"none"``, ``"diagonal"`` or ``"factorized"``
    (an exact sparse LU of the operator, cached per grid and edge kinds,
    which makes repeated solves on one grid cheap).  The reported residual
    is recomputed from the returned solution.
    """
    _check_tolerances(rtol, max_iter)
    if preconditioner not in PRECONDITIONERS:
        raise ValueError(f"unknown preconditioner {preconditioner!r}")
    op = PoissonOperator(R.grid, bc)
    t0 = time.perf_counter()
    b, lift = op.system(R.values)
    nb = np.linalg.norm(b)
    nodes = R.grid.nx * R.grid.ny
    if nb == 0.0:
        return ScalarField(R.grid, lift), SolveReport("cg", nodes, rtol, 0, 0.0, 0.0, True)
    M = None
    if preconditioner == "diagonal":
        dinv = 1.0 / op.diagonal[op.free]
        M = LinearOperator((b.size, b.size), matvec=lambda v: dinv * np.ravel(v), dtype=np.float64)
    elif preconditioner == "factorized":
        lu = _factor(R.grid, op.bc.kinds())
        M = LinearOperator((b.size, b.size), matvec=lambda v: lu.solve(np.ravel(v)), dtype=np.float64)
    guess = None if x0 is None else x0.values[op.free]
    count = [0]

    def tick(_):
        count[0] += 1

    u, info = cg(op._linear_operator(), b, x0=guess, rtol=rtol, atol=0.0, maxiter=max_iter,
                 M=M, callback=tick)
    seconds = time.perf_counter() - t0
    residual = float(np.linalg.norm(b - op._linear_operator().matvec(u)) / nb)
    name = {"none": "cg", "diagonal": "pcg", "factorized": "pcg_lu"}[preconditioner]
    report = SolveReport(name, nodes, rtol, count[0], residual, seconds, info == 0)
    return ScalarField(R.grid, op.assemble(u, lift)), report


def solve_cylindrical(
    R: ScalarField,
    bc: BoundarySpec | None = None,
    rtol: float = 1e-10,
    x0: ScalarField | None = None,
    max_iter: int = 100_000,
) -> tuple[ScalarField, SolveReport]:
    """CG solve of the axisymmetric problem; defaults to zero data with a Neumann axis."""
    if R.grid.geometry != AXISYMMETRIC:
        raise ValueError("solve_cylindrical needs an axisymmetric grid")
    return cg_solve(R, bc or BoundarySpec.axisymmetric(), rtol=rtol, x0=x0, max_iter=max_iter,
                    preconditioner="diagonal")
