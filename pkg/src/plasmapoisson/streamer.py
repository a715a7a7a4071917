"""Axisymmetric double-headed streamer in air.

Electrons drift and diffuse; positive and negative ions are immobile and
only take part in the chemistry.  Densities live on the nodes of an
axisymmetric ``(x, r)`` grid and are advanced with a finite-volume scheme
on node-centred control volumes: first-order upwind drift, central
diffusion and explicit Euler in time.  The potential splits into a
zero-Dirichlet part, solved by a Poisson backend, and the uniform applied
field.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import constants

from .backends import PoissonBackend
from .field import AXISYMMETRIC, GridSpec, ScalarField, VectorField, gradient_to_efield, write_field

E_CHARGE = constants.e
EPS0 = constants.epsilon_0


@dataclass
class ChemistryTable:
    """Swarm coefficients sampled against the reduced field ``E/N`` (V m^2).

    Values between samples are interpolated linearly in ``log(E/N)``;
    fields outside the table are clamped to its ends and counted in
    ``clamped``.
    """

    reduced_field: np.ndarray
    mobility: np.ndarray  # m^2 V^-1 s^-1
    diffusion: np.ndarray  # m^2 s^-1
    ionization: np.ndarray  # m^-1
    attachment: np.ndarray  # m^-1
    beta: float = 2e-13  # m^3 s^-1
    N: float = 2.45e25  # m^-3
    clamped: int = 0

    def __post_init__(self):
        en = np.asarray(self.reduced_field, dtype=np.float64)
        if en.ndim != 1 or len(en) < 2 or np.any(en <= 0) or np.any(np.diff(en) <= 0):
            raise ValueError("reduced-field samples must be positive and strictly increasing")
        for name in ("mobility", "diffusion", "ionization", "attachment"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != en.shape or np.any(v < 0):
                raise ValueError(f"{name} must be non-negative with one value per sample")
            setattr(self, name, v)
        self.reduced_field = en
        if self.beta < 0 or self.N <= 0:
            raise ValueError("beta must be non-negative and N positive")
        self._log_en = np.log(en)

    @classmethod
    def air(cls, N: float = 2.45e25, samples: int = 241) -> "ChemistryTable":
        """Simplified air fits: Townsend ionization, constant ``mu N``, ``D`` and ``eta / N``."""
        en = np.logspace(-22, -17, samples)
        alpha = N * 2e-20 * np.exp(-7.248e-19 / en)
        ones = np.ones_like(en)
        return cls(en, 1e24 / N * ones, 0.1 * ones, alpha, N * 4.3e-23 * ones, beta=2e-13, N=N)

    def zero(self) -> "ChemistryTable":
        """Same abscissa with every coefficient zero."""
        z = np.zeros_like(self.reduced_field)
        return ChemistryTable(self.reduced_field, z, z, z, z, beta=0.0, N=self.N)

    def interpolate(self, E_norm: np.ndarray):
        en = np.asarray(E_norm, dtype=np.float64) / self.N
        lo, hi = self.reduced_field[0], self.reduced_field[-1]
        out = (en < lo) | (en > hi)
        self.clamped += int(np.count_nonzero(out))
        s = np.log(np.clip(en, lo, hi))
        return tuple(np.interp(s, self._log_en, v) for v in
                     (self.mobility, self.diffusion, self.ionization, self.attachment))


def rates(E_norm, chem: ChemistryTable):
    """Drift speed ``mu |E|``, diffusion, ionization and attachment coefficients."""
    E_norm = np.asarray(E_norm, dtype=np.float64)
    if np.any(E_norm < 0):
        raise ValueError("field magnitude must be non-negative")
    mu, D, alpha, eta = chem.interpolate(E_norm)
    return mu * E_norm, D, alpha, eta


@dataclass
class StreamerState:
    grid: GridSpec
    ne: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray
    t: float = 0.0
    energy: float = 0.0
    floored: float = 0.0  # particles removed by the positivity floor

    def copy(self) -> "StreamerState":
        return replace(self, ne=self.ne.copy(), n_pos=self.n_pos.copy(), n_neg=self.n_neg.copy())


def control_volumes(grid: GridSpec):
    """Node volumes ``2 pi h_r h_x``, the areas of the x- and r-faces between
    nodes, and the areas of the faces on the outer radius."""
    if grid.geometry != AXISYMMETRIC:
        raise ValueError("the streamer solver needs an axisymmetric grid")
    dx, dr, r = grid.dx, grid.dy, grid.y
    hx = np.full(grid.nx, dx)
    hx[[0, -1]] = dx / 2
    hr = r * dr
    hr[0] = dr**2 / 8
    hr[-1] = (grid.Ly**2 - (grid.Ly - dr / 2) ** 2) / 2
    volume = 2 * np.pi * np.outer(hr, hx)
    area_x = 2 * np.pi * hr[:, None] * np.ones((1, grid.nx - 1))
    area_r = 2 * np.pi * (r[:-1] + dr / 2)[:, None] * hx[None, :]
    area_top = 2 * np.pi * grid.Ly * hx
    return volume, area_x, area_r, area_top


def total_electrons(state: StreamerState) -> float:
    volume = control_volumes(state.grid)[0]
    return math.fsum((volume * state.ne).ravel())


def init_streamer(grid: GridSpec, n0: float = 1e19, n_back: float = 1e14, x0: float = 2e-3,
                  sigma_x: float = 1e-4, sigma_r: float = 1e-4) -> StreamerState:
    """Neutral Gaussian seed on the axis over a uniform background."""
    if grid.geometry != AXISYMMETRIC:
        raise ValueError("the streamer needs an axisymmetric grid")
    if not 0 <= x0 <= grid.Lx:
        raise ValueError("seed position outside the domain")
    X, Rr = grid.mesh()
    n = n0 * np.exp(-(((X - x0) / sigma_x) ** 2) - (Rr / sigma_r) ** 2) + n_back
    return StreamerState(grid, n.copy(), n.copy(), np.zeros_like(n))


def poisson_rhs(state: StreamerState) -> ScalarField:
    """``R = e (n_p - n_e - n_n) / eps0``."""
    return ScalarField(state.grid, E_CHARGE * (state.n_pos - state.ne - state.n_neg) / EPS0)


def total_field(phi: ScalarField, ex: float) -> VectorField:
    """Field of a zero-Dirichlet potential plus the uniform applied field ``ex`` along x."""
    E = gradient_to_efield(phi)
    return VectorField(phi.grid, E.x + ex, E.y)


def discharge_energy_increment(state: StreamerState, E: VectorField, chem: ChemistryTable, dt: float) -> float:
    """``dt`` times the volume integral of ``e n_e mu_e |E|^2``."""
    volume = control_volumes(state.grid)[0]
    En = E.norm()
    mu, _, _, _ = chem.interpolate(En)
    return dt * math.fsum((volume * E_CHARGE * state.ne * mu * En**2).ravel())


def stability_limits(state: StreamerState, E: VectorField, chem: ChemistryTable) -> dict:
    """Largest stable explicit steps for drift, diffusion and dielectric relaxation."""
    g = state.grid
    En = E.norm()
    mu, D, _, _ = chem.interpolate(En)
    drift = np.max(mu * (np.abs(E.x) / g.dx + np.abs(E.y) / g.dy))
    diff = np.max(2 * D * (1 / g.dx**2 + 1 / g.dy**2))
    relax = np.max(E_CHARGE * mu * state.ne / EPS0)
    inv = lambda v: math.inf if v <= 0 else 1.0 / float(v)
    return {"drift": inv(drift), "diffusion": inv(diff), "relaxation": inv(relax)}


def _face_flux(n_lo, n_hi, w, D, h):
    """Upwind drift plus central diffusion through a face, positive towards ``hi``."""
    return np.where(w > 0, w * n_lo, w * n_hi) - D * (n_hi - n_lo) / h


def step(state: StreamerState, E: VectorField, chem: ChemistryTable, dt: float,
         check: bool = True) -> StreamerState:
    """One explicit Euler step.

    The axis carries no flux.  The other three edges are transmissive:
    electrons drift through them with the density of the edge node (a
    zero-gradient ghost), and there is no diffusive flux across them.
    """
    g = state.grid
    if check:
        limits = stability_limits(state, E, chem)
        bad = {k: v for k, v in limits.items() if dt > v}
        if bad:
            warnings.warn(f"dt = {dt:.2e} s exceeds stability limits {bad}", RuntimeWarning, stacklevel=2)
    volume, area_x, area_r, area_top = control_volumes(g)
    En = E.norm()
    mu, D, alpha, eta = chem.interpolate(En)
    wx, wr = -mu * E.x, -mu * E.y
    ne, npos, nneg = state.ne, state.n_pos, state.n_neg

    fx = _face_flux(ne[:, :-1], ne[:, 1:], 0.5 * (wx[:, :-1] + wx[:, 1:]), 0.5 * (D[:, :-1] + D[:, 1:]), g.dx) * area_x
    fr = _face_flux(ne[:-1], ne[1:], 0.5 * (wr[:-1] + wr[1:]), 0.5 * (D[:-1] + D[1:]), g.dy) * area_r
    div = np.zeros_like(ne)
    div[:, :-1] += fx
    div[:, 1:] -= fx
    div[:-1] += fr
    div[1:] -= fr
    div[:, 0] -= wx[:, 0] * ne[:, 0] * area_x[:, 0]
    div[:, -1] += wx[:, -1] * ne[:, -1] * area_x[:, -1]
    div[-1] += wr[-1] * ne[-1] * area_top

    speed = mu * En
    ionize = ne * alpha * speed
    attach = ne * eta * speed
    beta = chem.beta
    ne_new = ne + dt * (-div / volume + ionize - attach - beta * ne * npos)
    np_new = npos + dt * (ionize - beta * ne * npos - beta * nneg * npos)
    nn_new = nneg + dt * (attach - beta * nneg * npos)

    floored = 0.0
    for arr in (ne_new, np_new, nn_new):
        neg = arr < 0
        if neg.any():
            floored -= math.fsum((arr[neg] * volume[neg]).ravel())
            arr[neg] = 0.0
    if not all(np.all(np.isfinite(a)) for a in (ne_new, np_new, nn_new)):
        raise FloatingPointError(f"non-finite density after step at t = {state.t + dt:.3e} s")
    return StreamerState(g, ne_new, np_new, nn_new, state.t + dt, state.energy, state.floored + floored)


def front_positions(E: VectorField, x0: float, rel_tol: float = 1e-6) -> tuple[float, float]:
    """Axial positions of the largest axis ``|E|`` on each side of ``x0``.

    A side without an interior maximum standing above its end values by
    ``rel_tol`` reports ``x0``.
    """
    g = E.grid
    mag = np.hypot(E.x[0], E.y[0])
    x = g.x
    i0 = int(np.argmin(np.abs(x - x0)))

    def side(sl):
        seg = mag[sl]
        if len(seg) < 3:
            return x0
        k = int(np.argmax(seg[1:-1])) + 1
        if seg[k] <= (1 + rel_tol) * max(seg[0], seg[-1]):
            return x0
        return float(x[sl][k])

    return side(slice(0, i0 + 1)), side(slice(i0, g.nx))


@dataclass
class StreamerConfig:
    nx: int = 401
    nr: int = 101
    Lx: float = 4e-3
    Lr: float = 1e-3
    n0: float = 1e19
    n_back: float = 1e14
    x0: float = 2e-3
    sigma_x: float = 1e-4
    sigma_r: float = 1e-4
    ex: float = 4.8e6
    dt: float = 1e-12
    steps: int = 1000
    snapshot_every: int = 0

    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.nr, self.Lx, self.Lr, AXISYMMETRIC)


DIAGNOSTIC_COLUMNS = ("t", "x_neg", "x_pos", "Ed", "max_E", "max_ne")


@dataclass
class StreamerDiagnostics:
    rows: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    floored: float = 0.0
    clamped: int = 0

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self, path):
        lines = [",".join(DIAGNOSTIC_COLUMNS)]
        lines += [",".join(f"{r[c]:.9e}" for c in DIAGNOSTIC_COLUMNS) for r in self.rows]
        Path(path).write_text("\n".join(lines) + "\n")

    def write_snapshots(self, directory):
        for k, (t, ne, En) in enumerate(self.snapshots):
            write_field(Path(directory) / f"ne_{k}.pfld", ne)
            write_field(Path(directory) / f"E_{k}.pfld", En)


def run(config: StreamerConfig, backend: PoissonBackend, chem: ChemistryTable | None = None,
        log=None) -> tuple[StreamerState, StreamerDiagnostics]:
    """Poisson solve, total field, diagnostics and transport step, ``config.steps`` times."""
    chem = chem or ChemistryTable.air()
    grid = config.grid()
    state = init_streamer(grid, config.n0, config.n_back, config.x0, config.sigma_x, config.sigma_r)
    diag = StreamerDiagnostics()
    warned = False
    for k in range(config.steps + 1):
        try:
            phi = backend(poisson_rhs(state))
            E = total_field(phi, config.ex)
        except Exception as exc:
            raise RuntimeError(f"Poisson solve failed at step {k}: {exc}") from exc
        x_neg, x_pos = front_positions(E, config.x0)
        En = E.norm()
        diag.rows.append({"t": state.t, "x_neg": x_neg, "x_pos": x_pos, "Ed": state.energy,
                          "max_E": float(En.max()), "max_ne": float(state.ne.max())})
        if config.snapshot_every and k % config.snapshot_every == 0:
            diag.snapshots.append((state.t, ScalarField(grid, state.ne.copy()), ScalarField(grid, En)))
        if k == config.steps:
            break
        if not warned:
            limits = stability_limits(state, E, chem)
            if config.dt > min(limits.values()):
                warnings.warn(f"dt = {config.dt:.2e} s exceeds stability limits {limits}", RuntimeWarning, stacklevel=2)
                warned = True
        energy = state.energy + discharge_energy_increment(state, E, chem, config.dt)
        try:
            state = step(state, E, chem, config.dt, check=False)
        except Exception as exc:
            raise RuntimeError(f"transport step {k} failed: {exc}") from exc
        state.energy = energy
        if log and (k + 1) % 100 == 0:
            log(f"step {k + 1}/{config.steps}: x_neg {x_neg * 1e3:.3f} mm x_pos {x_pos * 1e3:.3f} mm "
                f"Ed {energy:.3e} J max ne {diag.rows[-1]['max_ne']:.3e}")
    diag.floored = state.floored
    diag.clamped = chem.clamped
    return state, diag
