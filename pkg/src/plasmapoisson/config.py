"""Flat INI run configuration.

Every section maps onto a dataclass whose defaults describe the desk-scale
setup.  Unknown sections and keys are rejected, and path-valued keys are
resolved relative to the directory of the config file.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


@dataclass
class GridSection:
    nx: int = 64
    ny: int = 64
    Lx: float = 0.01
    Ly: float = 0.01
    geometry: str = "cartesian"


@dataclass
class DatasetSection:
    kinds: tuple = ("random_8",)
    count: int = 625
    target_solver: str = "cg(1e-10)"
    alpha: float = 0.1
    n0: float = 1e16
    seed: int = 1
    root: Path = Path("datasets")


@dataclass
class NetworkSection:
    architecture: str = "unet"
    depths: tuple = (2, 2, 2, 7)
    k_s: int = 3
    channels: tuple = ()
    budget: int = 20_000
    growth: float = 0.5
    seed: int = 0


@dataclass
class TrainingSection:
    dataset: Path = Path("datasets/random_8")
    epochs: int = 50
    batch_size: int = 8
    lr: float = 1e-3
    optimizer: str = "adam"
    precision: str = "float32"
    seed: int = 0
    dirichlet: float = 1.0
    laplacian: float = 1.0
    inside: float = 0.0
    neumann: float = 0.0
    checkpoint: Path = Path("model.pnet")
    resume: Path | None = None


@dataclass
class SolveSection:
    problem: str = "two_gaussians"
    amplitude: float = 0.0  # 0 selects e n0 / eps0
    sigma: float = 1e-3
    backend: str = "cg(1e-10)"
    checkpoint: Path | None = None


@dataclass
class EvalSection:
    backend: str = "network"
    checkpoint: Path | None = None
    datasets: tuple = ()  # dataset directories
    indices: str = "val"
    mode_sweep: tuple = (32, 64, 128)


@dataclass
class OscillationSection:
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
    backend: str = "cg(1e-10)"
    checkpoint: Path | None = None


@dataclass
class StreamerSection:
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
    backend: str = "cg_lu(1e-10)"
    checkpoint: Path | None = None


@dataclass
class BenchSection:
    sizes: tuple = (17, 33, 49, 65)
    repetitions: int = 20
    rtol: float = 1e-6
    backends: tuple = ("jacobi", "cg", "network")
    checkpoint: Path | None = None


@dataclass
class RfSection:
    architecture: str = "unet"
    depths: tuple = (2, 2, 2, 7)
    k_s: int = 3
    n: int = 64


@dataclass
class RunConfig:
    grid: GridSection = field(default_factory=GridSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    solve: SolveSection = field(default_factory=SolveSection)
    eval: EvalSection = field(default_factory=EvalSection)
    oscillation: OscillationSection = field(default_factory=OscillationSection)
    streamer: StreamerSection = field(default_factory=StreamerSection)
    bench: BenchSection = field(default_factory=BenchSection)
    rf: RfSection = field(default_factory=RfSection)
    source_text: str = ""

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode()).hexdigest()[:16]

    def with_seed(self, seed: int) -> "RunConfig":
        """Override every seed with ``seed``."""
        return replace(
            self,
            dataset=replace(self.dataset, seed=seed),
            network=replace(self.network, seed=seed),
            training=replace(self.training, seed=seed),
        )


SECTIONS = {f.name: f.default_factory for f in fields(RunConfig) if f.name != "source_text"}


class ConfigError(ValueError):
    pass


def _convert(raw: str, default, annotation: str, base: Path):
    raw = raw.strip()
    if "Path" in annotation:
        return None if raw == "" else (base / raw).resolve()
    if isinstance(default, tuple):
        return tuple(t.strip() for t in raw.split(",") if t.strip())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw


_TUPLE_TYPES = {
    ("network", "depths"): int, ("network", "channels"): int, ("eval", "mode_sweep"): int,
    ("oscillation", "snapshot_times"): float, ("bench", "sizes"): int, ("rf", "depths"): int,
}

_PATH_TUPLES = {("eval", "datasets")}


def parse_config(text: str, base: Path | str = ".") -> RunConfig:
    """Parse INI ``text``; relative paths are taken from ``base``."""
    base = Path(base)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    sections = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        obj = SECTIONS[name]()
        known = {f.name: f for f in fields(obj)}
        updates = {}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{name}]")
            f = known[key]
            try:
                value = _convert(raw, getattr(obj, key), str(f.type), base)
                if (name, key) in _TUPLE_TYPES:
                    value = tuple(_TUPLE_TYPES[name, key](v) for v in value)
                elif (name, key) in _PATH_TUPLES:
                    value = tuple((base / v).resolve() for v in value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {name}.{key}: {raw!r}") from exc
            updates[key] = value
        sections[name] = replace(obj, **updates)
    cfg = RunConfig(**sections, source_text=text)
    # default relative paths follow the config location as well
    for sec in SECTIONS:
        obj = getattr(cfg, sec)
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, Path) and not v.is_absolute():
                setattr(obj, f.name, (base / v).resolve())
    return cfg


def load_config(path: Path | str | None) -> RunConfig:
    if path is None:
        return parse_config("", Path.cwd())
    path = Path(path)
    return parse_config(path.read_text(), path.parent)
