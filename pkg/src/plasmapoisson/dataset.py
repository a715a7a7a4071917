"""Random charge-density datasets, input normalization and evaluation tables.

Two families are generated:

* ``random_c``: uniform noise on a coarse ``floor(n/c)`` grid, interpolated
  bicubically to the full grid, so that structures are about ``c`` nodes wide.
* ``fourier_N_p``: random sine series with ``N x N`` modes whose amplitudes
  decay as ``1 / (n^p + m^p)``.

Both are scaled to the physical charge density ``e n0 / eps0``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .analytic import ModeSpectrum, charge_scale, normalization_ratio
from .field import (
    CARTESIAN,
    GridSpec,
    ScalarField,
    _components,
    gradient_to_efield,
    read_field,
    write_field,
)
from .linsolve import BoundarySpec, PoissonOperator, cg_solve

CATMULL_ROM = -0.5
TRAIN_FRACTION = 0.8


def cubic_kernel(s: np.ndarray, a: float = CATMULL_ROM) -> np.ndarray:
    """Keys cubic convolution kernel; ``a = -0.5`` is Catmull-Rom."""
    s = np.abs(s)
    out = np.zeros_like(s)
    near = s <= 1
    far = (s > 1) & (s < 2)
    out[near] = (a + 2) * s[near] ** 3 - (a + 3) * s[near] ** 2 + 1
    out[far] = a * s[far] ** 3 - 5 * a * s[far] ** 2 + 8 * a * s[far] - 4 * a
    return out


def bicubic_matrix(n_coarse: int, n_fine: int, a: float = CATMULL_ROM) -> np.ndarray:
    """Interpolation matrix mapping ``n_coarse`` samples to ``n_fine`` nodes.

    Endpoints of both grids coincide; stencil indices beyond the coarse grid
    are clamped to the edge sample.
    """
    if n_coarse < 2:
        raise ValueError("bicubic interpolation needs at least 2 coarse samples")
    t = np.arange(n_fine) * (n_coarse - 1) / (n_fine - 1)
    base = np.minimum(np.floor(t).astype(int), n_coarse - 2)
    frac = t - base
    M = np.zeros((n_fine, n_coarse))
    rows = np.arange(n_fine)
    for offset in (-1, 0, 1, 2):
        idx = np.clip(base + offset, 0, n_coarse - 1)
        np.add.at(M, (rows, idx), cubic_kernel(frac - offset, a))
    return M


def coarse_shape(grid: GridSpec, c: int) -> tuple[int, int]:
    return grid.ny // c, grid.nx // c


def gen_random_unit(grid: GridSpec, c: int, rng: np.random.Generator) -> np.ndarray:
    """Interpolated noise before physical scaling; bounded by 1.25 in magnitude."""
    if c < 1:
        raise ValueError("structure size c must be >= 1")
    nyc, nxc = coarse_shape(grid, c)
    if min(nyc, nxc) < 2:
        raise ValueError(f"coarse grid {nyc}x{nxc} is smaller than 2x2")
    coarse = rng.uniform(-1.0, 1.0, size=(nyc, nxc))
    return bicubic_matrix(nyc, grid.ny) @ coarse @ bicubic_matrix(nxc, grid.nx).T


def gen_random(grid: GridSpec, c: int, rng: np.random.Generator, n0: float = 1e16) -> ScalarField:
    return ScalarField(grid, charge_scale(n0) * gen_random_unit(grid, c, rng))


def fourier_amplitudes(N: int, p: float, rng: np.random.Generator, n0: float = 1e16) -> np.ndarray:
    k = np.arange(1, N + 1, dtype=np.float64)
    decay = 1.0 / (k[:, None] ** p + k[None, :] ** p)
    return rng.uniform(-1.0, 1.0, size=(N, N)) * decay * charge_scale(n0)


def gen_fourier(grid: GridSpec, N: int, p: float, rng: np.random.Generator, n0: float = 1e16) -> ScalarField:
    if grid.geometry != CARTESIAN:
        raise ValueError("fourier datasets are defined on cartesian grids")
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > min(grid.nx, grid.ny) - 1:
        raise ValueError(f"N = {N} exceeds the grid Nyquist limit")
    spec = ModeSpectrum(fourier_amplitudes(N, p, rng, n0), grid.Lx, grid.Ly)
    return spec.synthesize(grid)


def normalize_input(R: ScalarField, ratio: float) -> ScalarField:
    if ratio <= 0:
        raise ValueError("normalization ratio must be positive")
    return ScalarField(R.grid, R.values * ratio)


def denormalize_input(R: ScalarField, ratio: float) -> ScalarField:
    if ratio <= 0:
        raise ValueError("normalization ratio must be positive")
    return ScalarField(R.grid, R.values / ratio)


_NAME = re.compile(r"^(random)_(\d+)$|^(fourier)_(\d+)_([0-9.eE+-]+)$")


def parse_kind(name: str) -> tuple[str, dict]:
    """``"random_8"`` -> ``("random", {"c": 8})``; ``"fourier_3_0"`` -> ``("fourier", {"N": 3, "p": 0.0})``."""
    m = _NAME.match(name)
    if not m:
        raise ValueError(f"unrecognised dataset name {name!r}")
    if m.group(1):
        return "random", {"c": int(m.group(2))}
    return "fourier", {"N": int(m.group(4)), "p": float(m.group(5))}


def dataset_name(kind: str, params: dict) -> str:
    if kind == "random":
        return f"random_{params['c']}"
    p = params["p"]
    return f"fourier_{params['N']}_{int(p) if float(p).is_integer() else p}"


def generate_sample(kind: str, params: dict, grid: GridSpec, seed: int, index: int, n0: float = 1e16) -> ScalarField:
    """Sample ``index`` of a dataset; independent of every other sample."""
    rng = np.random.default_rng([seed, index])
    if kind == "random":
        return gen_random(grid, params["c"], rng, n0)
    if kind == "fourier":
        return gen_fourier(grid, params["N"], params["p"], rng, n0)
    raise ValueError(f"unknown dataset kind {kind!r}")


@dataclass
class DatasetManifest:
    name: str
    count: int
    grid: GridSpec
    seed: int
    ratio: float
    alpha: float = 0.1
    n0: float = 1e16
    target_solver: str = "none"
    train: list = field(default_factory=list)
    val: list = field(default_factory=list)
    samples: list = field(default_factory=list)
    rejected: list = field(default_factory=list)
    root: Path | None = None

    @property
    def kind(self) -> str:
        return parse_kind(self.name)[0]

    @property
    def params(self) -> dict:
        return parse_kind(self.name)[1]

    @property
    def has_targets(self) -> bool:
        return self.target_solver != "none"

    def r_path(self, idx: int) -> Path:
        return self.root / f"R_{idx}.pfld"

    def phi_path(self, idx: int) -> Path:
        return self.root / f"phi_{idx}.pfld"

    def to_text(self) -> str:
        g = self.grid
        lines = [
            f"name={self.name}",
            f"kind={self.kind}",
            *(f"{k}={v}" for k, v in self.params.items()),
            f"count={self.count}",
            f"nx={g.nx}",
            f"ny={g.ny}",
            f"Lx={g.Lx!r}",
            f"Ly={g.Ly!r}",
            f"geometry={g.geometry}",
            f"seed={self.seed}",
            f"alpha={self.alpha!r}",
            f"n0={self.n0!r}",
            f"ratio={self.ratio!r}",
            f"target_solver={self.target_solver}",
            f"inside_loss={'available' if self.has_targets else 'unavailable'}",
            f"train={','.join(map(str, self.train))}",
            f"val={','.join(map(str, self.val))}",
            f"rejected={','.join(map(str, self.rejected))}",
        ]
        for idx in self.samples:
            files = [self.r_path(idx).name]
            if self.has_targets:
                files.append(self.phi_path(idx).name)
            lines.append("file=" + " ".join(files))
        return "\n".join(lines) + "\n"

    def save(self):
        (self.root / "manifest.txt").write_text(self.to_text())

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        entries, files = {}, []
        for line in (root / "manifest.txt").read_text().splitlines():
            if not line.strip():
                continue
            key, _, value = line.partition("=")
            if key == "file":
                files.append(value.split())
            else:
                entries[key] = value

        def ints(key):
            return [int(v) for v in entries.get(key, "").split(",") if v]

        grid = GridSpec(int(entries["nx"]), int(entries["ny"]), float(entries["Lx"]),
                        float(entries["Ly"]), entries["geometry"])
        samples = [int(re.match(r"R_(\d+)\.pfld", f[0]).group(1)) for f in files]
        m = cls(entries["name"], int(entries["count"]), grid, int(entries["seed"]),
                float(entries["ratio"]), float(entries["alpha"]), float(entries["n0"]),
                entries["target_solver"], ints("train"), ints("val"), samples, ints("rejected"), root)
        for f in files:
            for name in f:
                if not (root / name).exists():
                    raise FileNotFoundError(f"manifest lists missing file {name}")
        return m

    def load_inputs(self, indices: Sequence[int] | None = None) -> np.ndarray:
        indices = self.samples if indices is None else indices
        return np.stack([read_field(self.r_path(i)).values for i in indices])

    def load_targets(self, indices: Sequence[int] | None = None) -> np.ndarray:
        if not self.has_targets:
            raise ValueError(f"dataset {self.name} has no target potentials")
        indices = self.samples if indices is None else indices
        return np.stack([read_field(self.phi_path(i)).values for i in indices])


def _parse_solver(spec: str) -> float | None:
    if spec == "none":
        return None
    m = re.fullmatch(r"cg\(([0-9.eE+-]+)\)", spec)
    if not m:
        raise ValueError(f"unknown target solver {spec!r}")
    return float(m.group(1))


def boundary_for(grid: GridSpec) -> BoundarySpec:
    if grid.geometry == CARTESIAN:
        return BoundarySpec.zero_dirichlet()
    return BoundarySpec.axisymmetric()


def build_dataset(
    root,
    name: str,
    count: int,
    grid: GridSpec,
    seed: int = 0,
    target_solver: str = "cg(1e-10)",
    alpha: float = 0.1,
    n0: float = 1e16,
) -> DatasetManifest:
    """Generate ``count`` samples into ``root`` and write ``manifest.txt``.

    Samples whose target solve does not converge are rejected and recorded.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rtol = _parse_solver(target_solver)
    kind, params = parse_kind(name)
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    m = DatasetManifest(name, count, grid, seed, normalization_ratio(grid.Lx, grid.Ly, alpha),
                        alpha, n0, target_solver, root=root)
    bc = boundary_for(grid)
    for idx in range(count):
        R = generate_sample(kind, params, grid, seed, idx, n0)
        if rtol is not None:
            phi, report = cg_solve(R, bc, rtol=rtol, preconditioner="diagonal")
            if not report.converged:
                m.rejected.append(idx)
                continue
            write_field(m.phi_path(idx), phi)
        write_field(m.r_path(idx), R)
        m.samples.append(idx)
    n_train = int(round(TRAIN_FRACTION * len(m.samples)))
    m.train, m.val = m.samples[:n_train], m.samples[n_train:]
    m.save()
    return m


def target_residual(m: DatasetManifest, idx: int) -> float:
    """Relative residual of a stored target against its stored charge."""
    R, phi = read_field(m.r_path(idx)), read_field(m.phi_path(idx))
    return PoissonOperator(m.grid, boundary_for(m.grid)).relative_residual(phi.values, R.values)


@dataclass
class MetricRow:
    dataset: str
    samples: int
    phi_l1: float
    E_l1: float
    E_linf: float

    CSV_HEADER = "dataset,samples,phi_l1,E_l1,E_linf"

    def csv_row(self) -> str:
        return f"{self.dataset},{self.samples},{self.phi_l1:.6e},{self.E_l1:.6e},{self.E_linf:.6e}"


@dataclass
class _Accumulator:
    phi_sums: list = field(default_factory=list)
    phi_count: int = 0
    e_sums: list = field(default_factory=list)
    e_count: int = 0
    e_max: float = 0.0
    samples: int = 0

    def add(self, phi, target):
        dphi = np.abs(phi.values - target.values)
        dE = np.abs(_components(gradient_to_efield(phi)) - _components(gradient_to_efield(target)))
        self.phi_sums.append(math.fsum(dphi.ravel()))
        self.phi_count += dphi.size
        self.e_sums.append(math.fsum(dE.ravel()))
        self.e_count += dE.size
        self.e_max = max(self.e_max, float(dE.max()))
        self.samples += 1

    def merge(self, other: "_Accumulator"):
        self.phi_sums += other.phi_sums
        self.phi_count += other.phi_count
        self.e_sums += other.e_sums
        self.e_count += other.e_count
        self.e_max = max(self.e_max, other.e_max)
        self.samples += other.samples

    def row(self, name: str) -> MetricRow:
        return MetricRow(name, self.samples, math.fsum(self.phi_sums) / self.phi_count,
                         math.fsum(self.e_sums) / self.e_count, self.e_max)


Predictor = Callable[[ScalarField], ScalarField]


def evaluate(predictor: Predictor, manifests: Iterable[DatasetManifest], indices: str = "all") -> list[MetricRow]:
    """Metric rows per dataset plus a ``combined`` row over their concatenation.

    Averages run over every sample, node and field component; sums use
    exact summation so the result does not depend on sample order.
    """
    rows, total = [], _Accumulator()
    for m in manifests:
        if not m.has_targets:
            raise ValueError(f"dataset {m.name} has no targets to evaluate against")
        acc = _Accumulator()
        chosen = {"all": m.samples, "train": m.train, "val": m.val}[indices]
        for idx in chosen:
            R, target = read_field(m.r_path(idx)), read_field(m.phi_path(idx))
            phi = predictor(R)
            if phi.grid.shape != target.grid.shape:
                raise ValueError(f"predictor grid {phi.grid.shape} does not match dataset {target.grid.shape}")
            acc.add(phi, target)
        rows.append(acc.row(m.name))
        total.merge(acc)
    if len(rows) > 1:
        rows.append(total.row("combined"))
    return rows


def write_metric_table(path, rows: Iterable[MetricRow]):
    Path(path).write_text(MetricRow.CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in rows))
