"""Command-line entry point: ``plasmapoisson <command> [--config FILE] [--seed N] [--out DIR]``."""

from __future__ import annotations

import argparse
import logging
import platform
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config

log = logging.getLogger("plasmapoisson")


def _grid(cfg: RunConfig):
    from .field import GridSpec

    g = cfg.grid
    return GridSpec(g.nx, g.ny, g.Lx, g.Ly, g.geometry)


def _backend(spec: str, checkpoint):
    from .backends import make_backend

    return make_backend(spec, checkpoint)


def cmd_dataset(cfg: RunConfig, out: Path) -> dict:
    from .dataset import build_dataset

    d = cfg.dataset
    grid = _grid(cfg)
    summary = {}
    for kind in d.kinds:
        m = build_dataset(d.root / kind, kind, d.count, grid, d.seed, d.target_solver, d.alpha, d.n0)
        log.info("%s: %d samples (%d train, %d val, %d rejected) in %s",
                 kind, len(m.samples), len(m.train), len(m.val), len(m.rejected), m.root)
        summary[kind] = len(m.samples)
    return summary


def _problem(cfg: RunConfig, grid):
    from .analytic import charge_scale, mode_field, two_gaussians
    from .field import ScalarField

    s = cfg.solve
    amp = s.amplitude or charge_scale()
    if s.problem == "two_gaussians":
        return two_gaussians(grid, amp, sigma=s.sigma)
    if s.problem == "zero":
        return ScalarField.zeros(grid)
    if s.problem.startswith("mode"):
        n, m = (int(v) for v in s.problem[s.problem.index("(") + 1 : s.problem.index(")")].split(","))
        return mode_field(n, m, amp, grid)
    raise ValueError(f"unknown problem {s.problem!r}")


def cmd_solve(cfg: RunConfig, out: Path) -> dict:
    from .backends import CGBackend
    from .dataset import boundary_for
    from .field import ScalarField, gradient_to_efield, norm_1, write_field
    from .linsolve import PoissonOperator

    grid = _grid(cfg)
    R = _problem(cfg, grid)
    backend = _backend(cfg.solve.backend, cfg.solve.checkpoint)
    t0 = time.perf_counter()
    phi = backend(R)
    seconds = time.perf_counter() - t0
    E = gradient_to_efield(phi)
    write_field(out / "R.pfld", R)
    write_field(out / "phi.pfld", phi)
    write_field(out / "Ex.pfld", ScalarField(grid, E.x))
    write_field(out / "Ey.pfld", ScalarField(grid, E.y))
    op = PoissonOperator(grid, boundary_for(grid))
    residual = op.relative_residual(phi.values, R.values)
    ref = CGBackend(1e-10)(R)
    E_ref = gradient_to_efield(ref)
    scale = float(np.mean(np.abs(np.stack([E_ref.x, E_ref.y]))))
    err = norm_1(E, E_ref) / scale if scale > 0 else norm_1(E, E_ref)
    extrema = _count_extrema(phi.values)
    rows = {"backend": cfg.solve.backend, "nodes": grid.nx * grid.ny, "seconds": seconds,
            "residual": residual, "E_rel_l1_vs_cg": err, "phi_extrema": extrema}
    (out / "solve.csv").write_text(",".join(rows) + "\n" + ",".join(_fmt(v) for v in rows.values()) + "\n")
    log.info("%s: residual %.3e, E error vs cg %.3e, %d interior extrema of phi",
             cfg.solve.backend, residual, err, extrema)
    return rows


def _count_extrema(v: np.ndarray) -> int:
    """Strict interior local extrema (8-neighbour) of a field."""
    c = v[1:-1, 1:-1]
    nb = [v[1 + dj : v.shape[0] - 1 + dj, 1 + di : v.shape[1] - 1 + di]
          for dj in (-1, 0, 1) for di in (-1, 0, 1) if dj or di]
    is_max = np.all([c > n for n in nb], axis=0)
    is_min = np.all([c < n for n in nb], axis=0)
    return int(np.count_nonzero(is_max | is_min))


def _fmt(v) -> str:
    return f"{v:.6e}" if isinstance(v, float) else str(v)


def _net_config(cfg: RunConfig):
    from .net import NetConfig

    n = cfg.network
    return NetConfig(n.architecture, n.depths, n.k_s, n.channels, n.budget, n.growth, n.seed)


def cmd_train(cfg: RunConfig, out: Path) -> dict:
    from .dataset import DatasetManifest
    from .net import (LossWeights, TrainConfig, TrainingData, build_network, history_csv, load_checkpoint,
                      optimal_params, package, receptive_field, save_checkpoint, train)

    t = cfg.training
    m = DatasetManifest.load(t.dataset)
    tr, va = TrainingData.from_manifest(m, "train"), TrainingData.from_manifest(m, "val")
    start, history = 0, []
    if t.resume is not None:
        model = load_checkpoint(t.resume)
        net = model.network
        start = int(model.meta.get("epochs", 0))
        hist_path = Path(t.resume).with_name("training.csv")
        if hist_path.exists():
            history = _read_history(hist_path)
    else:
        net = build_network(_net_config(cfg), m.grid)
    rf, per_branch = receptive_field(net.config)
    rf_opt, d_opt = optimal_params(min(m.grid.nx, m.grid.ny), net.config.k_s)
    log.info("network %s depths %s channels %s: %d parameters, RF %d (branches %s)",
             net.config.architecture, net.config.depths, net.config.channels, net.parameter_count, rf, per_branch)
    log.info("optimal RF for %d nodes: %d, depth %d", min(m.grid.nx, m.grid.ny), rf_opt, d_opt)
    weights = LossWeights(t.dirichlet, t.inside, t.laplacian, t.neumann)
    tc = TrainConfig(t.epochs, t.batch_size, t.lr, t.optimizer, t.seed, t.precision)
    net, new = train(net, tr, weights, tc, va, start_epoch=start, log=log.info)
    history += new
    ckpt = out / t.checkpoint.name
    save_checkpoint(ckpt, package(net, tr, {"epochs": start + t.epochs, "dataset": m.name}))
    (out / "training.csv").write_text(history_csv(history))
    last = history[-1]
    log.info("checkpoint %s, final E_l1 %.4e", ckpt, last["E_l1"])
    return {"checkpoint": str(ckpt), "E_l1": last["E_l1"], "rf": rf}


def _read_history(path: Path) -> list[dict]:
    lines = path.read_text().splitlines()
    keys = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        vals = line.split(",")
        row = {k: float(v) for k, v in zip(keys, vals)}
        row["epoch"] = int(row["epoch"])
        rows.append(row)
    return rows


def cmd_eval(cfg: RunConfig, out: Path) -> dict:
    from .analytic import charge_scale, mode_field, mode_potential
    from .dataset import DatasetManifest, evaluate, write_metric_table
    from .field import GridSpec, norm_1

    e = cfg.eval
    backend = _backend(e.backend, e.checkpoint)
    manifests = [DatasetManifest.load(p) for p in e.datasets]
    result = {}
    if manifests:
        rows = evaluate(backend, manifests, e.indices)
        write_metric_table(out / "eval.csv", rows)
        for r in rows:
            log.info("%s: phi_l1 %.4e E_l1 %.4e E_linf %.4e", r.dataset, r.phi_l1, r.E_l1, r.E_linf)
        result["rows"] = len(rows)
    if e.mode_sweep:
        grid = getattr(getattr(backend, "model", None), "grid", None) or _grid(cfg)
        lines = ["n,phi_l1,phi_rel_l1"]
        sweep = {}
        for n in e.mode_sweep:
            g = GridSpec(n, max(3, round(n * grid.Ly / grid.Lx)), grid.Lx, grid.Ly, grid.geometry)
            A = charge_scale()
            exact = mode_potential(1, 1, A, g)
            err = norm_1(backend(mode_field(1, 1, A, g)), exact)
            sweep[n] = err
            lines.append(f"{n},{err:.6e},{err / float(np.mean(np.abs(exact.values))):.6e}")
            log.info("mode (1,1) on %dx%d: phi_l1 %.4e", g.nx, g.ny, err)
        (out / "mode_sweep.csv").write_text("\n".join(lines) + "\n")
        result["argmin"] = min(sweep, key=sweep.get)
    return result


def cmd_oscillate(cfg: RunConfig, out: Path) -> dict:
    from .oscillation import OscillationConfig, measure_period, plasma_frequency, run

    o = cfg.oscillation
    oc = OscillationConfig(o.n, o.L, o.n0, o.ne_amp, o.sigma, o.T0, o.periods, o.steps_per_period,
                           o.cfl, o.probe_fraction, o.snapshot_times)
    backend = _backend(o.backend, o.checkpoint)
    diag = run(oc, backend, log=log.info)
    diag.to_csv(out / "oscillation.csv")
    diag.write_snapshots(out)
    T_ref = plasma_frequency(o.n0)[1]
    try:
        T = measure_period(diag.t, diag.mean_probe)
    except ValueError:
        T = float("nan")
    summary = {"dt": diag.dt, "period": T, "period_ref": T_ref, "envelope_drift": diag.envelope_drift(),
               "mass_drift": diag.mass_drift()}
    (out / "summary.csv").write_text(",".join(summary) + "\n" + ",".join(_fmt(v) for v in summary.values()) + "\n")
    log.info("period %.5e s (reference %.5e s), envelope drift %.3e, mass drift %.3e",
             T, T_ref, summary["envelope_drift"], summary["mass_drift"])
    return summary


def cmd_streamer(cfg: RunConfig, out: Path) -> dict:
    from .streamer import StreamerConfig, run

    s = cfg.streamer
    sc = StreamerConfig(s.nx, s.nr, s.Lx, s.Lr, s.n0, s.n_back, s.x0, s.sigma_x, s.sigma_r, s.ex,
                        s.dt, s.steps, s.snapshot_every)
    state, diag = run(sc, _backend(s.backend, s.checkpoint), log=log.info)
    diag.to_csv(out / "streamer.csv")
    diag.write_snapshots(out)
    last = diag.rows[-1]
    log.info("t %.3e s: x_neg %.4e m, x_pos %.4e m, Ed %.4e J, floored %.3e, clamped %d",
             last["t"], last["x_neg"], last["x_pos"], last["Ed"], state.floored, diag.clamped)
    return last


def cmd_bench(cfg: RunConfig, out: Path) -> dict:
    from .bench import monotone_in_nodes, run_bench, write_bench_table

    b = cfg.bench
    model = None
    if "network" in b.backends:
        from .net import load_checkpoint

        if b.checkpoint is None:
            raise ValueError("bench with the network backend needs bench.checkpoint")
        model = load_checkpoint(b.checkpoint)
    rows = run_bench(b.sizes, b.backends, b.repetitions, b.rtol, model, log=log.info)
    write_bench_table(out / "bench.csv", rows)
    return {name: monotone_in_nodes(rows, name) for name in b.backends if name != "network"}


def cmd_rf(cfg: RunConfig, out: Path) -> dict:
    from .net import NetConfig, build_network, empirical_rf, formula_is_exact, optimal_params, receptive_field

    r = cfg.rf
    config = NetConfig(r.architecture, r.depths, r.k_s, budget=cfg.network.budget)
    rf, per_branch = receptive_field(config)
    emp = empirical_rf(build_network(config), r.n)
    rf_opt, d_opt = optimal_params(r.n, r.k_s)
    print(f"formula RF {rf} (branches {per_branch}), exact: {formula_is_exact(config)}")
    print(f"empirical RF on {r.n}x{r.n}: {emp}")
    print(f"optimal for {r.n} nodes: RF {rf_opt}, depth {d_opt}")
    return {"rf": rf, "empirical": emp}


COMMANDS = {
    "dataset": cmd_dataset, "solve": cmd_solve, "train": cmd_train, "eval": cmd_eval,
    "oscillate": cmd_oscillate, "streamer": cmd_streamer, "bench": cmd_bench, "rf": cmd_rf,
}


def _versions() -> dict:
    import scipy
    import torch

    return {"plasmapoisson": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "torch": torch.__version__}


def write_provenance(out: Path, command: str, cfg: RunConfig, argv: list, seconds: float, result) -> None:
    lines = [f"command={command}", f"argv={' '.join(argv)}", f"config_sha256={cfg.digest}"]
    lines += [f"{k}={v}" for k, v in _versions().items()]
    lines += [f"seconds={seconds:.3f}", f"result={result}"]
    for name in ("grid", "dataset", "network", "training", "solve", "eval", "oscillation", "streamer", "bench", "rf"):
        for k, v in asdict(getattr(cfg, name)).items():
            lines.append(f"{name}.{k}={v}")
    (out / "run.txt").write_text("\n".join(lines) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plasmapoisson", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, default=None, help="INI run configuration")
    p.add_argument("--seed", type=int, default=None, help="override every seed in the config")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--threads", type=int, default=1, help="torch intra-op threads")
    return p


def main(argv: list | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s", stream=sys.stderr)
    import torch

    torch.set_num_threads(max(1, args.threads))
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    result = COMMANDS[args.command](cfg, out)
    write_provenance(out, args.command, cfg, argv, time.perf_counter() - t0, result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
