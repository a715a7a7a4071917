"""Electron plasma oscillation: electron Euler equations coupled to Poisson.

Electrons move over a fixed neutralising ion background ``n0``.  The
conservative variables ``(rho, rho u, rho v, rho E)`` are advanced with the
two-step Richtmyer form of Lax-Wendroff on the node grid, with the electric
force as a source term in both stages.  Walls are reflective.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import constants

from .backends import PoissonBackend
from .field import GridSpec, ScalarField, VectorField, gradient_to_efield, trapezoid_weights, write_field

E_CHARGE = constants.e
M_E = constants.m_e
EPS0 = constants.epsilon_0
K_B = constants.k
GAMMA = 5.0 / 3.0


class StabilityError(RuntimeError):
    pass


def plasma_frequency(n0: float) -> tuple[float, float]:
    """Angular electron plasma frequency and period for background density ``n0``."""
    if n0 <= 0:
        raise ValueError("density must be positive")
    omega = math.sqrt(n0 * E_CHARGE**2 / (M_E * EPS0))
    return omega, 2 * math.pi / omega


@dataclass
class PlasmaState:
    grid: GridSpec
    U: np.ndarray  # (4, ny, nx): rho, rho u, rho v, rho E
    n0: float
    t: float = 0.0

    @property
    def rho(self):
        return self.U[0]

    @property
    def density(self) -> np.ndarray:
        return self.U[0] / M_E

    @property
    def perturbation(self) -> np.ndarray:
        return self.density - self.n0

    def pressure(self) -> np.ndarray:
        return _pressure(self.U)

    def total_mass(self) -> float:
        g = self.grid
        w = np.outer(trapezoid_weights(g.ny, g.dy), trapezoid_weights(g.nx, g.dx))
        return math.fsum((w * self.rho).ravel())

    def copy(self) -> "PlasmaState":
        return replace(self, U=self.U.copy())


def _pressure(U):
    rho, mx, my, en = U
    return (GAMMA - 1) * (en - 0.5 * (mx**2 + my**2) / rho)


def gaussian_bumps(grid: GridSpec, amplitude: float, centers, sigmas) -> np.ndarray:
    X, Y = grid.mesh()
    out = np.zeros(grid.shape)
    for (cx, cy), s in zip(centers, sigmas):
        out += amplitude * np.exp(-((X - cx) ** 2 + (Y - cy) ** 2) / s**2)
    return out


def init_two_gaussians(
    grid: GridSpec,
    n0: float = 1e16,
    ne_amp: float = 1e11,
    centers=None,
    sigmas=(1e-3, 1e-3),
    T0: float = 300.0,
) -> PlasmaState:
    """Electrons at rest with density ``n0`` plus two Gaussian bumps, uniform temperature."""
    if n0 <= 0:
        raise ValueError("background density must be positive")
    if abs(ne_amp) / n0 >= 1e-3:
        raise ValueError(f"perturbation ratio {ne_amp / n0:.1e} is not small against 1e-3")
    if centers is None:
        centers = ((0.4 * grid.Lx, 0.5 * grid.Ly), (0.6 * grid.Lx, 0.5 * grid.Ly))
    n = n0 + gaussian_bumps(grid, ne_amp, centers, sigmas)
    rho = M_E * n
    p = n * K_B * T0
    U = np.stack([rho, np.zeros_like(rho), np.zeros_like(rho), p / (GAMMA - 1)])
    return PlasmaState(grid, U, n0)


def sound_speed(U) -> np.ndarray:
    return np.sqrt(GAMMA * _pressure(U) / U[0])


def max_stable_dt(state: PlasmaState) -> float:
    """Acoustic limit ``1 / max((|u| + c) / dx + (|v| + c) / dy)``."""
    g = state.grid
    c = sound_speed(state.U)
    u = np.abs(state.U[1] / state.U[0])
    v = np.abs(state.U[2] / state.U[0])
    return 1.0 / float(np.max((u + c) / g.dx + (v + c) / g.dy))


def _fluxes(U):
    rho, mx, my, en = U
    u, v = mx / rho, my / rho
    p = _pressure(U)
    F = np.stack([mx, mx * u + p, my * u, (en + p) * u])
    G = np.stack([my, mx * v, my * v + p, (en + p) * v])
    return F, G


def _source(U, ex, ey):
    rho, mx, my, _ = U
    f = -E_CHARGE * rho / M_E
    return np.stack([np.zeros_like(rho), f * ex, f * ey, f * (ex * mx + ey * my) / rho])


def _mirror(U, ex, ey):
    """One ghost layer reflecting about the wall nodes; normal components flip sign.

    The normal field on the wall nodes is dropped: the wall reaction balances it
    and the mirrored state then conserves mass exactly.
    """
    pad = ((0, 0), (1, 1), (1, 1))
    U = np.pad(U, pad, mode="reflect")
    U[1, :, 0] *= -1
    U[1, :, -1] *= -1
    U[2, 0, :] *= -1
    U[2, -1, :] *= -1
    ex = np.pad(ex, 1, mode="reflect")
    ey = np.pad(ey, 1, mode="reflect")
    ex[:, 1] = ex[:, -2] = 0.0
    ey[1, :] = ey[-2, :] = 0.0
    ex[:, 0] *= -1
    ex[:, -1] *= -1
    ey[0, :] *= -1
    ey[-1, :] *= -1
    return U, ex, ey


def _avg4(A):
    return 0.25 * (A[..., :-1, :-1] + A[..., :-1, 1:] + A[..., 1:, :-1] + A[..., 1:, 1:])


def _divergence(F, G, dx, dy):
    """Flux divergence at the centres of the 2x2 blocks of ``F`` and ``G``."""
    dfdx = 0.5 * ((F[..., :-1, 1:] + F[..., 1:, 1:]) - (F[..., :-1, :-1] + F[..., 1:, :-1])) / dx
    dgdy = 0.5 * ((G[..., 1:, :-1] + G[..., 1:, 1:]) - (G[..., :-1, :-1] + G[..., :-1, 1:])) / dy
    return dfdx + dgdy


def step_lax_wendroff(state: PlasmaState, E: VectorField, dt: float, check_cfl: bool = True) -> PlasmaState:
    """One Richtmyer step with the field ``E`` held fixed."""
    g = state.grid
    if check_cfl and dt > max_stable_dt(state):
        raise StabilityError(f"dt = {dt:.3e} s exceeds the acoustic limit {max_stable_dt(state):.3e} s")
    Up, ex, ey = _mirror(state.U, E.x, E.y)
    F, G = _fluxes(Up)
    half = _avg4(Up) - 0.5 * dt * _divergence(F, G, g.dx, g.dy) + 0.5 * dt * _avg4(_source(Up, ex, ey))
    ex_c, ey_c = _avg4(ex), _avg4(ey)
    Fh, Gh = _fluxes(half)
    U = state.U - dt * _divergence(Fh, Gh, g.dx, g.dy) + dt * _avg4(_source(half, ex_c, ey_c))
    U[1, :, 0] = U[1, :, -1] = 0.0
    U[2, 0, :] = U[2, -1, :] = 0.0
    if not np.all(np.isfinite(U)) or np.any(U[0] <= 0) or np.any(_pressure(U) <= 0):
        raise StabilityError(f"non-physical state after step at t = {state.t + dt:.3e} s")
    return PlasmaState(g, U, state.n0, state.t + dt)


def charge_density(state: PlasmaState) -> ScalarField:
    """``R = e (n0 - n_e) / eps0`` for singly charged ions at density ``n0``."""
    return ScalarField(state.grid, E_CHARGE * (state.n0 - state.density) / EPS0)


@dataclass
class OscillationConfig:
    n: int = 61
    L: float = 0.01
    n0: float = 1e16
    ne_amp: float = 1e11
    sigma: float = 1e-3
    T0: float = 300.0
    periods: float = 2.0
    steps_per_period: int = 800
    cfl: float = 0.4
    probe_fraction: float = 0.1
    snapshot_times: tuple = ()

    def grid(self) -> GridSpec:
        return GridSpec.square(self.n, self.L)


@dataclass
class OscillationDiagnostics:
    t: list = field(default_factory=list)
    mean_probe: list = field(default_factory=list)
    max_probe: list = field(default_factory=list)
    mass: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)
    dt: float = 0.0

    def to_csv(self, path):
        lines = ["t,mean_probe,max_probe"]
        lines += [f"{t:.9e},{m:.9e},{x:.9e}" for t, m, x in zip(self.t, self.mean_probe, self.max_probe)]
        Path(path).write_text("\n".join(lines) + "\n")

    def write_snapshots(self, directory):
        for i, (t, f) in enumerate(sorted(self.snapshots.items())):
            write_field(Path(directory) / f"ne_{i}.pfld", f)

    def envelope_drift(self) -> float:
        """Largest relative departure of the half-period peaks of ``mean_probe`` from its start value."""
        peaks = oscillation_peaks(np.asarray(self.mean_probe))
        a0 = abs(self.mean_probe[0])
        return float(np.max(np.abs(peaks / a0 - 1))) if len(peaks) else 0.0

    def mass_drift(self) -> float:
        return abs(self.mass[-1] - self.mass[0]) / self.mass[0]


def oscillation_peaks(signal: np.ndarray) -> np.ndarray:
    """Magnitudes of the extrema between successive sign changes."""
    sign = np.sign(signal)
    cuts = np.flatnonzero(sign[1:] * sign[:-1] < 0) + 1
    pieces = np.split(np.abs(signal), cuts)
    # the last piece may be an unfinished half period
    return np.array([p.max() for p in pieces[1:-1]])


def run(config: OscillationConfig, backend: PoissonBackend, grid: GridSpec | None = None,
        log=None) -> OscillationDiagnostics:
    """Alternate Poisson solves and Lax-Wendroff steps for ``config.periods`` plasma periods."""
    grid = grid or config.grid()
    state = init_two_gaussians(grid, config.n0, config.ne_amp, sigmas=(config.sigma, config.sigma), T0=config.T0)
    _, T_p = plasma_frequency(config.n0)
    dt = min(config.cfl * max_stable_dt(state), T_p / config.steps_per_period)
    n_steps = int(math.ceil(config.periods * T_p / dt))
    delta0 = state.perturbation
    probe = np.abs(delta0) > config.probe_fraction * np.max(np.abs(delta0))
    diag = OscillationDiagnostics(dt=dt)
    pending = sorted(config.snapshot_times)

    def record(s):
        d = s.perturbation
        diag.t.append(s.t)
        diag.mean_probe.append(float(np.mean(d[probe])))
        diag.max_probe.append(float(np.max(np.abs(d))))
        diag.mass.append(s.total_mass())
        while pending and s.t >= pending[0] - 0.5 * dt:
            diag.snapshots[pending.pop(0)] = ScalarField(grid, d.copy())

    record(state)
    for k in range(n_steps):
        try:
            phi = backend(charge_density(state))
            state = step_lax_wendroff(state, gradient_to_efield(phi), dt)
        except Exception as exc:
            raise RuntimeError(f"oscillation run failed at step {k}: {exc}") from exc
        record(state)
        if log and (k + 1) % 200 == 0:
            log(f"step {k + 1}/{n_steps} t = {state.t:.3e} s mean probe {diag.mean_probe[-1]:.4e}")
    return diag


def measure_period(t, signal, hysteresis: float = 0.05) -> float:
    """Period from the zero crossings of ``signal``.

    A crossing only counts once the signal has moved past ``hysteresis``
    times its peak magnitude on the other side, which rejects noise-induced
    re-crossings.  Crossing times are interpolated linearly and the period
    is twice the least-squares slope of crossing time against crossing index.
    """
    t = np.asarray(t, dtype=np.float64)
    s = np.asarray(signal, dtype=np.float64)
    h = hysteresis * np.max(np.abs(s))
    crossings, state, last_change = [], 0, None
    for k in range(1, len(s)):
        if s[k - 1] * s[k] < 0 or s[k] == 0:
            last_change = k
        level = 1 if s[k] > h else -1 if s[k] < -h else 0
        if level and level != state:
            if state and last_change is not None:
                k0 = last_change
                t0, t1, a, b = t[k0 - 1], t[k0], s[k0 - 1], s[k0]
                crossings.append(t0 + (t1 - t0) * a / (a - b) if a != b else t0)
            state = level
    if len(crossings) < 3:
        raise ValueError(f"only {len(crossings)} zero crossings found; need at least 3")
    idx = np.arange(len(crossings))
    slope = np.polyfit(idx, crossings, 1)[0]
    return 2.0 * slope
