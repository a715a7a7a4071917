"""Fourier-series solution of the zero-Dirichlet Poisson problem on a rectangle.

On ``[0, Lx] x [0, Ly]`` with ``phi = 0`` on the boundary, the Green function
expansion gives

    phi(x, y) = sum_nm R_nm / ((n pi/Lx)^2 + (m pi/Ly)^2) sin(n pi x/Lx) sin(m pi y/Ly)

where ``R_nm`` are the sine coefficients of the right-hand side ``R``.  The
projection integrals are evaluated with the trapezoid rule, which is exactly
orthogonal for sine modes sampled at grid nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .field import GridSpec, ScalarField, _check_cartesian, sine_basis, trapezoid_weights

ELEMENTARY_CHARGE = constants.e
EPSILON_0 = constants.epsilon_0
DEFAULT_MAX_MODES = 64


@dataclass
class ModeSpectrum:
    """Sine-mode coefficients ``coeffs[n-1, m-1]`` on a ``Lx x Ly`` rectangle."""

    coeffs: np.ndarray
    Lx: float
    Ly: float

    def __post_init__(self):
        self.coeffs = np.atleast_2d(np.asarray(self.coeffs, dtype=np.float64))
        if self.coeffs.ndim != 2 or min(self.coeffs.shape) < 1:
            raise ValueError("coefficient matrix must be N x M with N, M >= 1")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite spectrum coefficients")

    @property
    def N(self) -> int:
        return self.coeffs.shape[0]

    @property
    def M(self) -> int:
        return self.coeffs.shape[1]

    def wavenumbers_squared(self) -> np.ndarray:
        kx = np.arange(1, self.N + 1) * np.pi / self.Lx
        ky = np.arange(1, self.M + 1) * np.pi / self.Ly
        return kx[:, None] ** 2 + ky[None, :] ** 2

    def synthesize(self, grid: GridSpec) -> ScalarField:
        """Evaluate the sine series at the nodes of ``grid``."""
        _check_cartesian(grid)
        bx = sine_basis(self.N, grid.x, self.Lx)
        by = sine_basis(self.M, grid.y, self.Ly)
        values = by.T @ self.coeffs.T @ bx
        # sin(k pi) is only zero up to round-off; the boundary is exact by definition
        values[0, :] = values[-1, :] = 0.0
        values[:, 0] = values[:, -1] = 0.0
        return ScalarField(grid, values)


def default_modes(grid: GridSpec) -> tuple[int, int]:
    return min(DEFAULT_MAX_MODES, grid.nx - 1), min(DEFAULT_MAX_MODES, grid.ny - 1)


def fourier_coeffs(R: ScalarField, N: int, M: int) -> ModeSpectrum:
    """Sine coefficients of ``R`` up to mode ``(N, M)``."""
    g = R.grid
    _check_cartesian(g)
    if N < 1 or M < 1:
        raise ValueError("mode counts must be at least 1")
    if N > g.nx - 1 or M > g.ny - 1:
        raise ValueError(f"({N}, {M}) modes exceed the grid Nyquist limit ({g.nx - 1}, {g.ny - 1})")
    sx = sine_basis(N, g.x, g.Lx) * trapezoid_weights(g.nx, g.dx)
    sy = sine_basis(M, g.y, g.Ly) * trapezoid_weights(g.ny, g.dy)
    coeffs = 4.0 / (g.Lx * g.Ly) * (sx @ R.values.T @ sy.T)
    return ModeSpectrum(coeffs, g.Lx, g.Ly)


def potential_spectrum(spec: ModeSpectrum) -> ModeSpectrum:
    """Map charge coefficients ``R_nm`` to potential coefficients ``phi_nm``."""
    return ModeSpectrum(spec.coeffs / spec.wavenumbers_squared(), spec.Lx, spec.Ly)


def potential_from_spectrum(spec: ModeSpectrum, grid: GridSpec) -> ScalarField:
    return potential_spectrum(spec).synthesize(grid)


def solve_analytic(R: ScalarField, N: int | None = None, M: int | None = None) -> ScalarField:
    """Potential of ``R`` with zero Dirichlet data from its first ``N x M`` modes."""
    dn, dm = default_modes(R.grid)
    spec = fourier_coeffs(R, N or dn, M or dm)
    return potential_from_spectrum(spec, R.grid)


def mode_field(n: int, m: int, amplitude: float, grid: GridSpec) -> ScalarField:
    """``amplitude * sin(n pi x/Lx) sin(m pi y/Ly)`` sampled on ``grid``."""
    if n < 1 or m < 1:
        raise ValueError("mode indices start at 1")
    sx = np.sin(n * np.pi * grid.x / grid.Lx)
    sy = np.sin(m * np.pi * grid.y / grid.Ly)
    return ScalarField(grid, amplitude * np.outer(sy, sx))


def mode_potential(n: int, m: int, amplitude: float, grid: GridSpec) -> ScalarField:
    """Exact potential of the single-mode charge ``mode_field(n, m, amplitude)``."""
    k2 = (n * np.pi / grid.Lx) ** 2 + (m * np.pi / grid.Ly) ** 2
    return mode_field(n, m, amplitude / k2, grid)


def normalization_ratio(Lx: float, Ly: float, alpha: float = 0.1) -> float:
    """Upper bound of ``|phi / R|`` scaled by ``alpha``.

    Multiplying the input charge by this ratio brings network inputs and
    outputs to the same order of magnitude.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    if Lx <= 0 or Ly <= 0:
        raise ValueError("domain lengths must be positive")
    return alpha / ((np.pi**2 / 4) ** 2 * (1 / Lx**2 + 1 / Ly**2))


def resolution_ratio(delta_sim: float, delta_nn: float) -> float:
    """Factor ``(delta_sim / delta_nn)^2`` applied to a network trained at ``delta_nn``."""
    if delta_sim <= 0 or delta_nn <= 0:
        raise ValueError("grid spacings must be positive")
    return (delta_sim / delta_nn) ** 2


def charge_scale(n0: float = 1e16) -> float:
    """Charge density ``e n0 / eps0`` in V/m^2."""
    return ELEMENTARY_CHARGE * n0 / EPSILON_0


def two_gaussians(
    grid: GridSpec,
    amplitude: float | None = None,
    centers=((0.4, 0.5), (0.6, 0.5)),
    sigma: float = 1e-3,
) -> ScalarField:
    """Sum of two isotropic Gaussians; centres are given as fractions of the domain."""
    if amplitude is None:
        amplitude = charge_scale()
    X, Y = grid.mesh()
    values = np.zeros(grid.shape)
    for cx, cy in centers:
        r2 = (X - cx * grid.Lx) ** 2 + (Y - cy * grid.Ly) ** 2
        values += amplitude * np.exp(-r2 / sigma**2)
    return ScalarField(grid, values)
