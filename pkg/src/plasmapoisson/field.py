"""Structured-grid fields, finite-difference operators, norms and field I/O.

Fields are node-centred on a uniform grid.  Values are stored as a 2D array
of shape ``(ny, nx)``: row ``j`` is the ``y`` (or radial) index and column
``i`` the ``x`` index, so the flattened C-order layout is row-major with
``j`` outer and ``i`` inner.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CARTESIAN = "cartesian"
AXISYMMETRIC = "axisymmetric"
_GEOMETRY_CODES = {CARTESIAN: 0, AXISYMMETRIC: 1}

FIELD_MAGIC = b"PFLD1"
_HEADER = struct.Struct("<5sIIddB")


class FieldFormatError(ValueError):
    """Raised when a field file cannot be parsed."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform node-centred grid.

    For ``geometry == "axisymmetric"`` the ``y`` direction is the radius,
    with the symmetry axis ``r = 0`` on row ``j = 0``.
    """

    nx: int
    ny: int
    Lx: float
    Ly: float
    geometry: str = CARTESIAN

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3x3 nodes, got {self.nx}x{self.ny}")
        if not (self.Lx > 0 and self.Ly > 0):
            raise ValueError("domain lengths must be positive")
        if self.geometry not in _GEOMETRY_CODES:
            raise ValueError(f"unknown geometry {self.geometry!r}")

    @property
    def dx(self) -> float:
        return self.Lx / (self.nx - 1)

    @property
    def dy(self) -> float:
        return self.Ly / (self.ny - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.Lx, self.nx)

    @property
    def y(self) -> np.ndarray:
        return np.linspace(0.0, self.Ly, self.ny)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(X, Y)`` node coordinates, each of shape ``(ny, nx)``."""
        return np.meshgrid(self.x, self.y)

    @classmethod
    def square(cls, n: int, L: float = 0.01) -> "GridSpec":
        return cls(n, n, L, L)


@dataclass
class ScalarField:
    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != self.grid.shape:
            raise ValueError(
                f"values shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))


@dataclass
class VectorField:
    grid: GridSpec
    x: np.ndarray
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.shape != self.grid.shape or self.y.shape != self.grid.shape:
            raise ValueError("component shapes do not match grid")

    def norm(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


def _check_cartesian(grid: GridSpec):
    if grid.geometry != CARTESIAN:
        raise ValueError(f"expected a cartesian grid, got {grid.geometry}")


def laplacian_cartesian(phi: ScalarField) -> ScalarField:
    """5-point Laplacian on interior nodes; boundary entries are 0."""
    _check_cartesian(phi.grid)
    g, v = phi.grid, phi.values
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (v[1:-1, :-2] - 2 * v[1:-1, 1:-1] + v[1:-1, 2:]) / g.dx**2 + (
        v[:-2, 1:-1] - 2 * v[1:-1, 1:-1] + v[2:, 1:-1]
    ) / g.dy**2
    return ScalarField(g, out)


def laplacian_axisymmetric(phi: ScalarField) -> ScalarField:
    """(1/r) d/dr(r dphi/dr) + d2phi/dx2 in conservative form.

    Off-axis rows use face radii ``r +- dr/2``; the axis row uses the
    regularised limit ``4 (phi_1 - phi_0) / dr**2``.  Nodes on ``x = 0``,
    ``x = Lx`` and ``r = Lr`` hold 0.
    """
    g, v = phi.grid, phi.values
    if g.geometry != AXISYMMETRIC:
        raise ValueError("laplacian_axisymmetric needs an axisymmetric grid")
    dx, dr = g.dx, g.dy
    out = np.zeros_like(v)
    axial = (v[:-1, :-2] - 2 * v[:-1, 1:-1] + v[:-1, 2:]) / dx**2
    r = g.y[1:-1, None]
    radial = np.empty_like(axial)
    radial[0] = 4 * (v[1, 1:-1] - v[0, 1:-1]) / dr**2
    radial[1:] = (
        (r + dr / 2) * (v[2:, 1:-1] - v[1:-1, 1:-1])
        - (r - dr / 2) * (v[1:-1, 1:-1] - v[:-2, 1:-1])
    ) / (r * dr**2)
    out[:-1, 1:-1] = axial + radial
    return ScalarField(g, out)


def laplacian(phi: ScalarField) -> ScalarField:
    if phi.grid.geometry == AXISYMMETRIC:
        return laplacian_axisymmetric(phi)
    return laplacian_cartesian(phi)


def gradient_to_efield(phi: ScalarField) -> VectorField:
    """E = -grad(phi): central differences inside, second-order one-sided at edges."""
    g = phi.grid
    dphi_dy, dphi_dx = np.gradient(phi.values, g.dy, g.dx, edge_order=2)
    return VectorField(g, -dphi_dx, -dphi_dy)


def _components(a) -> np.ndarray:
    if isinstance(a, VectorField):
        return np.stack([a.x, a.y])
    if isinstance(a, ScalarField):
        return a.values
    return np.asarray(a, dtype=np.float64)


def _difference(a, b) -> np.ndarray:
    va, vb = _components(a), _components(b)
    if va.shape != vb.shape:
        raise ValueError(f"shape mismatch: {va.shape} vs {vb.shape}")
    return np.abs(va - vb)


def norm_1(a, b) -> float:
    """Mean absolute difference over every component and node."""
    return float(np.mean(_difference(a, b)))


def norm_inf(a, b) -> float:
    """Maximum absolute difference over every component and node."""
    return float(np.max(_difference(a, b)))


def trapezoid_weights(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def sine_basis(n_modes: int, coords: np.ndarray, length: float) -> np.ndarray:
    """Rows ``k-1`` hold ``sin(k pi x / L)`` for ``k = 1..n_modes``."""
    k = np.arange(1, n_modes + 1)[:, None]
    return np.sin(k * np.pi * coords[None, :] / length)


def mode_amplitude(f: ScalarField, n: int, m: int) -> float:
    """Projection of ``f`` on ``sin(n pi x/Lx) sin(m pi y/Ly)`` by the trapezoid rule."""
    _check_cartesian(f.grid)
    if n < 1 or m < 1:
        raise ValueError("mode indices start at 1")
    g = f.grid
    sx = np.sin(n * np.pi * g.x / g.Lx) * trapezoid_weights(g.nx, g.dx)
    sy = np.sin(m * np.pi * g.y / g.Ly) * trapezoid_weights(g.ny, g.dy)
    return float(4.0 / (g.Lx * g.Ly) * (sy @ f.values @ sx))


def write_field(path, f: ScalarField) -> None:
    g = f.grid
    header = _HEADER.pack(FIELD_MAGIC, g.nx, g.ny, g.Lx, g.Ly, _GEOMETRY_CODES[g.geometry])
    payload = np.ascontiguousarray(f.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_field(path) -> ScalarField:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FieldFormatError(f"{path}: truncated header")
    magic, nx, ny, Lx, Ly, code = _HEADER.unpack_from(data)
    if magic != FIELD_MAGIC:
        raise FieldFormatError(f"{path}: bad magic {magic!r}")
    geometries = {v: k for k, v in _GEOMETRY_CODES.items()}
    if code not in geometries:
        raise FieldFormatError(f"{path}: unknown geometry code {code}")
    expected = _HEADER.size + 8 * nx * ny
    if len(data) != expected:
        raise FieldFormatError(f"{path}: payload has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(ny, nx).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FieldFormatError(f"{path}: non-finite values")
    return ScalarField(GridSpec(nx, ny, Lx, Ly, geometries[code]), values)


def write_field_csv(path, f: ScalarField) -> None:
    g = f.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "x", "y", "value"])
        for j in range(g.ny):
            for i in range(g.nx):
                w.writerow([i, j, repr(i * g.dx), repr(j * g.dy), repr(float(f.values[j, i]))])


def is_finite(f: ScalarField) -> bool:
    return bool(np.all(np.isfinite(f.values)))


def relative_l1(a, b) -> float:
    """``norm_1(a, b)`` divided by the mean magnitude of ``b``."""
    ref = float(np.mean(np.abs(_components(b))))
    if ref == 0.0 or not math.isfinite(ref):
        raise ValueError("reference field is identically zero")
    return norm_1(a, b) / ref
