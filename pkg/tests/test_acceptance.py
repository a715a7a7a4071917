"""Exit criteria, each run at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line before asserting.  Criteria 6, 7,
8 and 10 share one desk-scale dataset and the networks trained on it.
"""

import math
import time

import numpy as np
import pytest
import torch
from torch import nn

from plasmapoisson import analytic as an
from plasmapoisson.backends import CGBackend, NetworkBackend
from plasmapoisson.cli import main as cli_main
from plasmapoisson.dataset import build_dataset
from plasmapoisson.field import GridSpec, gradient_to_efield, norm_1
from plasmapoisson.linsolve import BoundarySpec, cg_solve
from plasmapoisson.net import (
    LossWeights,
    NetConfig,
    Network,
    TrainConfig,
    TrainingData,
    build_network,
    effective_receptive_field,
    empirical_rf,
    formula_is_exact,
    infer,
    loss_dirichlet,
    loss_inside,
    loss_laplacian,
    loss_neumann,
    mode_amplitude_error,
    optimal_params,
    package,
    predict_batch,
    receptive_field,
    save_checkpoint,
    train,
)
from plasmapoisson.net.layers import downsample2, upsample2
from plasmapoisson.net.rf import footprint, probe_copy
from plasmapoisson.oscillation import OscillationConfig, measure_period, plasma_frequency
from plasmapoisson.oscillation import run as run_oscillation
from plasmapoisson.streamer import StreamerConfig, poisson_rhs, total_field
from plasmapoisson.streamer import run as run_streamer

pytestmark = pytest.mark.acceptance
torch.set_num_threads(1)


@pytest.fixture
def report(capsys):
    def _report(n: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}", flush=True)
        assert ok, detail

    return _report


def relative_e_l1(phi, ref) -> float:
    E, Er = gradient_to_efield(phi), gradient_to_efield(ref)
    return norm_1(E, Er) / float(np.mean(np.abs(np.stack([Er.x, Er.y]))))


# 1


def test_criterion_1_analytic_oracle(report):
    t0 = time.perf_counter()
    g = GridSpec.square(101)
    R = an.two_gaussians(g)
    phi_a = an.solve_analytic(R, 10, 10)
    phi_c, rep = cg_solve(R, rtol=1e-10)
    err = relative_e_l1(phi_a, phi_c)
    seconds = time.perf_counter() - t0
    report(1, rep.converged and err < 0.01 and seconds < 30,
           f"E 1-norm relative error {err:.3e} (< 1e-2), {seconds:.1f} s (< 30 s)")


# 2


def mode_error(n: int) -> float:
    g = GridSpec.square(n)
    A = an.charge_scale()
    phi, _ = cg_solve(an.mode_field(1, 1, A, g), rtol=1e-12)
    return float(np.max(np.abs(phi.values - an.mode_potential(1, 1, A, g).values)))


def test_criterion_2_grid_convergence(report):
    ratio = mode_error(51) / mode_error(101)
    report(2, 3.4 <= ratio <= 4.6, f"error ratio 51 -> 101 nodes {ratio:.4f} (in [3.4, 4.6])")


# 3

RF_CASES = [
    ("unet", (4, 2, 3)), ("unet", (2, 1, 1, 2)), ("unet", (3, 2, 1, 1, 1)),
    ("msnet", (2, 3, 1)), ("msnet", (4, 2, 1, 2)), ("msnet", (2, 1, 3, 1, 1)),
]


def test_criterion_3_receptive_field(report):
    failures = []
    for arch, depths in RF_CASES:
        config = NetConfig(arch, depths, channels=(2,) * len(depths))
        rf = receptive_field(config)[0]
        emp = empirical_rf(Network(config))
        if not (formula_is_exact(config) and emp == rf):
            failures.append(f"{arch}{depths}: formula {rf} probe {emp}")
    # clipping when the image is smaller than the receptive field
    if empirical_rf(Network(NetConfig("unet", (4, 2, 3), channels=(2, 2, 2))), 21) != 21:
        failures.append("clipping")
    rf0 = receptive_field((2,), 3)[1][0]
    rf1 = receptive_field((0, 2), 3)[1][1]
    pooled = nn.Sequential(nn.AvgPool2d(2), nn.Conv2d(1, 1, 3, padding=1), nn.Conv2d(1, 1, 3, padding=1),
                           nn.Upsample(scale_factor=2, mode="nearest"))
    total = footprint(probe_copy(pooled), 32)
    if (rf0, rf1, total) != (5, 8, 10):
        failures.append(f"worked examples {rf0}, {rf1}, {total}")
    if optimal_params(101, 3) != (202, 5):
        failures.append(f"optimal_params {optimal_params(101, 3)}")
    eff = [effective_receptive_field((2, 1, 1, 1, 1, d5), 3, 101, total=100 * (d5 + 1)) for d5 in (1, 2, 3)]
    if eff != [136, 172, 208]:
        failures.append(f"UNet6 effective RFs {eff}")
    report(3, not failures, "; ".join(failures) or
           f"{len(RF_CASES)} architectures exact, examples 5/8/10, optimal (202, 5), UNet6 {eff}")


# 4


def fd_relative_error(fn, x: torch.Tensor, eps: float = 1e-5) -> float:
    """max |g_autograd - g_fd| / max |g_fd| for the scalar ``sum(w * fn(x))``."""
    x = x.detach().clone().requires_grad_(True)
    out = fn(x)
    w = torch.randn(out.shape, dtype=torch.float64, generator=torch.Generator().manual_seed(5))
    (g,) = torch.autograd.grad((w * out).sum(), x)
    flat = x.detach().clone().reshape(-1)
    fd = torch.empty_like(flat)
    with torch.no_grad():
        for i in range(flat.numel()):
            old = flat[i].item()
            flat[i] = old + eps
            fp = (w * fn(flat.view_as(x))).sum().item()
            flat[i] = old - eps
            fm = (w * fn(flat.view_as(x))).sum().item()
            flat[i] = old
            fd[i] = (fp - fm) / (2 * eps)
    return float((g.reshape(-1) - fd).abs().max() / fd.abs().max())


def test_criterion_4_gradient_exactness(report):
    t0 = time.perf_counter()
    torch.manual_seed(0)
    d = torch.float64
    x = torch.randn(1, 2, 8, 8, dtype=d)
    wconv = torch.randn(3, 2, 3, 3, dtype=d)
    unet = Network(NetConfig("unet", (3, 1, 2), channels=(3, 3, 3))).double()
    msnet = Network(NetConfig("msnet", (2, 1, 2), channels=(3, 3, 3))).double()
    for net in (unet, msnet):
        for p in net.parameters():
            nn.init.normal_(p, std=0.5)  # a live output layer so every path carries gradient
    g = GridSpec(8, 8, 0.01, 0.02)
    other = torch.randn(1, 1, 8, 8, dtype=d)
    checks = {
        "conv": (lambda t: nn.functional.conv2d(t, wconv, padding=1), x),
        "conv weight": (lambda w: nn.functional.conv2d(x, w, padding=1), wconv),
        "relu": (torch.relu, torch.randn(1, 2, 8, 8, dtype=d)),
        "downsample": (downsample2, torch.randn(1, 2, 9, 7, dtype=d)),
        "upsample": (lambda t: upsample2(t, (9, 7)), torch.randn(1, 2, 4, 3, dtype=d)),
        "unet": (unet, torch.randn(1, 1, 12, 12, dtype=d)),
        "msnet": (msnet, torch.randn(1, 1, 12, 12, dtype=d)),
        "dirichlet loss": (loss_dirichlet, torch.randn(1, 1, 8, 8, dtype=d)),
        "inside loss": (lambda p: loss_inside(p, other), torch.randn(1, 1, 8, 8, dtype=d)),
        "laplacian loss": (lambda p: loss_laplacian(p, other, g), torch.randn(1, 1, 8, 8, dtype=d)),
        "neumann loss": (lambda p: loss_neumann(p, g), torch.randn(1, 1, 8, 8, dtype=d)),
    }
    errors = {name: fd_relative_error(fn, inp) for name, (fn, inp) in checks.items()}
    worst = max(errors, key=errors.get)
    seconds = time.perf_counter() - t0
    report(4, errors[worst] < 1e-5 and seconds < 60,
           f"{len(errors)} checks, worst {worst} {errors[worst]:.2e} (< 1e-5), {seconds:.1f} s")


# 5


def loop_losses(phi, target, R, dx, dy, Lx, Ly):
    bs, ny, nx = phi.shape
    d = i_sum = l_sum = n_sum = 0.0
    for b in range(bs):
        for j in range(ny):
            for i in range(nx):
                if j in (0, ny - 1) or i in (0, nx - 1):
                    d += phi[b, j, i] ** 2
                else:
                    i_sum += (phi[b, j, i] - target[b, j, i]) ** 2
                    lap = (phi[b, j, i - 1] - 2 * phi[b, j, i] + phi[b, j, i + 1]) / dx**2 + (
                        phi[b, j - 1, i] - 2 * phi[b, j, i] + phi[b, j + 1, i]) / dy**2
                    l_sum += (lap + R[b, j, i]) ** 2
        for i in range(1, nx - 1):
            n_sum += ((-3 * phi[b, 0, i] + 4 * phi[b, 1, i] - phi[b, 2, i]) / (2 * dy)) ** 2
    return (d / (bs * (2 * nx + 2 * ny - 4)), i_sum / (bs * (nx - 1) * (ny - 1)),
            Lx**2 * Ly**2 * l_sum / (bs * (nx - 1) * (ny - 1)), n_sum / (bs * (nx - 2)))


def test_criterion_5_loss_formulas(report):
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(seed)
        ny, nx = rng.integers(5, 12, size=2)
        g = GridSpec(int(nx), int(ny), float(rng.uniform(0.005, 0.02)), float(rng.uniform(0.005, 0.02)))
        phi, target, R = (rng.normal(size=(3, ny, nx)) for _ in range(3))
        t = lambda a: torch.as_tensor(a).unsqueeze(1)
        got = (loss_dirichlet(t(phi), g), loss_inside(t(phi), t(target)), loss_laplacian(t(phi), t(R), g),
               loss_neumann(t(phi), g))
        ref = loop_losses(phi, target, R, g.dx, g.dy, g.Lx, g.Ly)
        worst = max(worst, max(abs(float(a) / b - 1) for a, b in zip(got, ref)))
    report(5, worst < 1e-12, f"worst relative deviation from loop oracles {worst:.2e} (< 1e-12)")


# 6 - 8, 10: desk-scale training

LARGE, SMALL = (2, 2, 2, 7), (2, 1, 1, 1)
BUDGET = 20_000
TRAIN = TrainConfig(epochs=50, batch_size=8, lr=1e-3, seed=0)


@pytest.fixture(scope="module")
def desk(tmp_path_factory):
    root = tmp_path_factory.mktemp("desk")
    t0 = time.perf_counter()
    m = build_dataset(root / "random_8", "random_8", 625, GridSpec.square(64), seed=1)
    tr, va = TrainingData.from_manifest(m, "train"), TrainingData.from_manifest(m, "val")
    lap = LossWeights(dirichlet=1, laplacian=1)
    ins = LossWeights(dirichlet=1, laplacian=0, inside=1)
    runs = {}
    for name, depths, weights in (("large", LARGE, lap), ("small", SMALL, lap), ("inside", LARGE, ins)):
        net, hist = train(build_network(NetConfig("unet", depths, budget=BUDGET)), tr, weights, TRAIN, va)
        runs[name] = (net, hist)
    seconds = time.perf_counter() - t0
    model = package(runs["large"][0], tr)
    save_checkpoint(root / "large.pnet", model)
    return {"root": root, "train": tr, "val": va, "runs": runs, "seconds": seconds, "model": model}


def test_criterion_6_desk_training(desk, report):
    va = desk["val"]
    large, small, inside = (desk["runs"][k] for k in ("large", "small", "inside"))
    h = large[1]
    improvement = h[0]["E_l1"] / h[-1]["E_l1"]
    rf_large = receptive_field(large[0].config)[0]
    rf_small = receptive_field(small[0].config)[0]
    mode_large = mode_amplitude_error(predict_batch(large[0], va.R, va.ratio), va.phi, va.grid)
    mode_small = mode_amplitude_error(predict_batch(small[0], va.R, va.ratio), va.phi, va.grid)
    linf_lap, linf_ins = h[-1]["E_linf"], inside[1][-1]["E_linf"]
    ok = (improvement >= 10 and rf_large >= 128 and rf_small == 33 and mode_large < mode_small
          and linf_ins > linf_lap and desk["seconds"] <= 3600)
    report(6, ok,
           f"(a) E_l1 improved {improvement:.2f}x (>= 10); "
           f"(b) mode-(1,1) error RF {rf_large}: {mode_large:.3e} vs RF {rf_small}: {mode_small:.3e}; "
           f"(c) E_linf inside {linf_ins:.3e} vs laplacian {linf_lap:.3e}; {desk['seconds']:.0f} s (<= 3600 s)")


def test_criterion_7_resolution_argmin(desk, report):
    model = desk["model"]
    A = an.charge_scale()
    errors = {}
    for n in (32, 64, 128):
        g = GridSpec.square(n, model.grid.Lx)
        phi, _ = infer(model.network, an.mode_field(1, 1, A, g), model.ratio, model.delta_nn)
        errors[n] = norm_1(phi, an.mode_potential(1, 1, A, g))
    best = min(errors, key=errors.get)
    report(7, best == model.grid.nx,
           "phi 1-norm residual " + ", ".join(f"{n}: {e:.3e}" for n, e in errors.items()) + f"; argmin {best}")


def test_criterion_8_plasma_oscillation(desk, report):
    T_ref = 1.11e-9
    t0 = time.perf_counter()
    diag = run_oscillation(OscillationConfig(n=61, n0=1e16, periods=2), CGBackend(1e-10))
    T = measure_period(diag.t, diag.mean_probe)
    drift = diag.envelope_drift()
    cg_seconds = time.perf_counter() - t0
    net_diag = run_oscillation(OscillationConfig(n=desk["model"].grid.nx, periods=2), NetworkBackend(desk["model"]))
    probe = np.asarray(net_diag.mean_probe)
    finite = bool(np.all(np.isfinite(probe)))
    envelope = float(np.max(np.abs(probe)) / abs(probe[0]))
    ok = abs(T / T_ref - 1) < 0.02 and drift < 0.10 and finite and envelope < 2
    report(8, ok,
           f"cg period {T:.4e} s vs {T_ref:.3e} s ({100 * (T / T_ref - 1):+.2f}%, reference "
           f"{plasma_frequency(1e16)[1]:.4e} s), envelope drift {drift:.3e}, {cg_seconds:.0f} s; "
           f"network finite {finite}, envelope {envelope:.3f}x initial")


def test_criterion_10_benchmark(desk, report, tmp_path):
    cfg = tmp_path / "bench.ini"
    cfg.write_text(f"[bench]\nsizes = 17,33,49,65\nrepetitions = 20\nrtol = 1e-6\n"
                   f"backends = jacobi,cg,network\ncheckpoint = {desk['root'] / 'large.pnet'}\n")
    assert cli_main(["bench", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "bench.csv").read_text().splitlines()
    rows = [dict(zip(lines[0].split(","), line.split(","))) for line in lines[1:]]
    ok = len(rows) == 12 and all(int(r["repetitions"]) == 20 and float(r["mean_seconds"]) > 0 for r in rows)
    detail = []
    for backend in ("jacobi", "cg"):
        times = [float(r["mean_seconds"]) for r in rows if r["backend"] == backend]
        mono = all(a < b for a, b in zip(times, times[1:]))
        ok = ok and mono
        detail.append(f"{backend} " + "/".join(f"{t:.2e}" for t in times) + (" monotone" if mono else " NOT monotone"))
    net = [float(r["mean_seconds"]) for r in rows if r["backend"] == "network"]
    detail.append("network " + "/".join(f"{t:.2e}" for t in net))
    report(10, ok, f"{len(rows)} rows averaged over 20 repetitions; " + "; ".join(detail))


# 9


def test_criterion_9_streamer(report):
    t0 = time.perf_counter()
    cfg = StreamerConfig(steps=1000)
    backend = CGBackend(1e-10, preconditioner="factorized")
    state, diag = run_streamer(cfg, backend)
    seconds = time.perf_counter() - t0
    x_neg, x_pos, Ed = diag.column("x_neg"), diag.column("x_pos"), diag.column("Ed")
    nonneg = all(np.all(a >= 0) for a in (state.ne, state.n_pos, state.n_neg))
    ed_ok = bool(np.all(np.diff(Ed) >= 0))
    neg_mono = bool(np.all(np.diff(x_neg) <= 0))
    pos_mono = bool(np.all(np.diff(x_pos) >= 0))
    apart = x_neg[-1] < cfg.x0 < x_pos[-1]
    # superposition: zero-Dirichlet solve plus uniform field vs the direct solve with phi = -Ex x on the walls
    R = poisson_rhs(state)
    phi0, _ = cg_solve(R, BoundarySpec.axisymmetric(), rtol=1e-10, preconditioner="factorized")
    phi1, _ = cg_solve(R, BoundarySpec.uniform_field(cfg.ex), rtol=1e-10, preconditioner="factorized")
    Ea, Eb = total_field(phi0, cfg.ex), gradient_to_efield(phi1)
    sup = float(max(np.max(np.abs(Ea.x - Eb.x)), np.max(np.abs(Ea.y - Eb.y))) / np.max(Eb.norm()))
    ok = nonneg and ed_ok and neg_mono and pos_mono and apart and sup < 1e-10 and seconds <= 1200
    worst_pos = float(np.min(np.diff(x_pos)))
    report(9, ok,
           f"non-negative {nonneg}, E_d non-decreasing {ed_ok}, x_neg monotone {neg_mono} "
           f"({x_neg[-1] * 1e3:.3f} mm), x_pos monotone {pos_mono} ({x_pos[-1] * 1e3:.3f} mm, "
           f"largest backward step {-worst_pos * 1e3:.3f} mm), superposition {sup:.1e}, {seconds:.0f} s")
