import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasmapoisson.backends import AnalyticBackend, CGBackend
from plasmapoisson.field import GridSpec, VectorField, gradient_to_efield, norm_1, trapezoid_weights
from plasmapoisson.oscillation import (
    GAMMA,
    K_B,
    M_E,
    OscillationConfig,
    PlasmaState,
    StabilityError,
    charge_density,
    init_two_gaussians,
    max_stable_dt,
    measure_period,
    oscillation_peaks,
    plasma_frequency,
    run,
    step_lax_wendroff,
)


def zero_field(grid):
    return VectorField(grid, np.zeros(grid.shape), np.zeros(grid.shape))


def test_plasma_frequency_reference_density():
    omega, T = plasma_frequency(1e16)
    assert T == pytest.approx(1.11e-9, rel=5e-3)
    assert omega == pytest.approx(5.64e9, rel=2e-3)


def test_plasma_period_square_root_law():
    assert plasma_frequency(4e16)[1] == pytest.approx(plasma_frequency(1e16)[1] / 2, rel=1e-12)
    with pytest.raises(ValueError):
        plasma_frequency(0.0)


def test_init_quiescent_and_ratio_check():
    g = GridSpec.square(21)
    s = init_two_gaussians(g, 1e16, 0.0)
    assert np.all(s.perturbation == 0)
    assert np.all(s.U[1:3] == 0)
    with pytest.raises(ValueError):
        init_two_gaussians(g, 1e16, 1e14)


def test_init_perturbation_integral():
    g = GridSpec.square(201)
    s = init_two_gaussians(g, 1e16, 1e11)
    w = np.outer(trapezoid_weights(g.ny, g.dy), trapezoid_weights(g.nx, g.dx))
    total = float(np.sum(w * s.perturbation))
    assert total == pytest.approx(2 * 1e11 * math.pi * 1e-3**2, rel=1e-6)


def test_init_temperature_uniform():
    g = GridSpec.square(21)
    s = init_two_gaussians(g, 1e16, 1e11, T0=300.0)
    T = s.pressure() / (s.density * K_B)
    assert np.allclose(T, 300.0, rtol=1e-12)


def test_uniform_state_is_fixed_point():
    g = GridSpec.square(17)
    s = init_two_gaussians(g, 1e16, 0.0)
    nxt = step_lax_wendroff(s, zero_field(g), 0.5 * max_stable_dt(s))
    assert np.array_equal(nxt.U, s.U)


def test_neutral_state_stays_uniform_with_solver():
    g = GridSpec.square(17)
    s = init_two_gaussians(g, 1e16, 0.0)
    backend = CGBackend(1e-10)
    for _ in range(5):
        E = gradient_to_efield(backend(charge_density(s)))
        s = step_lax_wendroff(s, E, 1e-12)
    assert np.all(s.perturbation == 0)


def test_cfl_violation_raises():
    g = GridSpec.square(17)
    s = init_two_gaussians(g, 1e16, 1e11)
    with pytest.raises(StabilityError):
        step_lax_wendroff(s, zero_field(g), 2 * max_stable_dt(s))


def acoustic_error(n: int, eps: float = 1e-6) -> float:
    """L1 error of a standing acoustic wave after a quarter of a period."""
    L = 0.01
    g = GridSpec(n, 3, L, 2 * L / (n - 1))
    rho0, p0 = M_E * 1e16, 1e16 * K_B * 300.0
    c = math.sqrt(GAMMA * p0 / rho0)
    k = math.pi / L
    X, _ = g.mesh()
    rho = rho0 * (1 + eps * np.cos(k * X))
    p = p0 * (1 + GAMMA * eps * np.cos(k * X))
    U = np.stack([rho, np.zeros_like(rho), np.zeros_like(rho), p / (GAMMA - 1)])
    s = PlasmaState(g, U, 1e16)
    t_end = 0.3 * (2 * L / c)
    steps = int(math.ceil(t_end / (0.4 * g.dx / c)))
    dt = t_end / steps
    for _ in range(steps):
        s = step_lax_wendroff(s, zero_field(g), dt)
    exact = rho0 * (1 + eps * np.cos(k * X) * math.cos(c * k * t_end))
    return float(np.mean(np.abs(s.rho - exact))) / (eps * rho0)


def test_acoustic_wave_second_order():
    e1, e2 = acoustic_error(41), acoustic_error(81)
    assert 3.4 < e1 / e2 < 4.6


def test_mass_conservation_short_run():
    cfg = OscillationConfig(n=31, periods=0.5, steps_per_period=400)
    diag = run(cfg, CGBackend(1e-10))
    assert diag.mass_drift() < 1e-10


def test_diagnostics_monotone_time_and_csv(tmp_path):
    cfg = OscillationConfig(n=21, periods=0.25, steps_per_period=200, snapshot_times=(1e-10,))
    diag = run(cfg, AnalyticBackend())
    assert np.all(np.diff(diag.t) > 0)
    assert list(diag.snapshots) == [1e-10]
    diag.to_csv(tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,mean_probe,max_probe"
    assert len(lines) == len(diag.t) + 1


def test_backend_equivalence_band_limited():
    # single low mode: analytic and discrete solutions differ by O((pi dx / L)^2)
    g = GridSpec.square(61)
    s = init_two_gaussians(g, 1e16, 0.0)
    X, Y = g.mesh()
    dn = 1e11 * np.sin(np.pi * X / g.Lx) * np.sin(np.pi * Y / g.Ly)
    s.U[0] += M_E * dn
    a, c = AnalyticBackend(), CGBackend(1e-12)
    dt = plasma_frequency(1e16)[1] / 800
    for _ in range(20):
        Ea = gradient_to_efield(a(charge_density(s)))
        Ec = gradient_to_efield(c(charge_density(s)))
        assert norm_1(Ea, Ec) / np.mean(np.abs(np.stack([Ec.x, Ec.y]))) < 1e-3
        s = step_lax_wendroff(s, Ec, dt)


def test_period_insensitive_to_time_step():
    base = OscillationConfig(n=31, periods=2.0, steps_per_period=800)
    fine = OscillationConfig(n=31, periods=2.0, steps_per_period=1600)
    T1 = measure_period(*_series(run(base, CGBackend(1e-10))))
    T2 = measure_period(*_series(run(fine, CGBackend(1e-10))))
    assert abs(T1 / T2 - 1) < 5e-3


def _series(diag):
    return diag.t, diag.mean_probe


def test_measure_period_clean_cosine():
    T = 1.11e-9
    dt = T / 500
    t = np.arange(0, 2.2 * T, dt)
    assert abs(measure_period(t, np.cos(2 * np.pi * t / T)) - T) < dt


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), phase=st.floats(0, 2 * math.pi))
def test_measure_period_noisy_cosine(seed, phase):
    T = 1.11e-9
    t = np.linspace(0, 2.0 * T, 1600)
    noise = 0.01 * np.random.default_rng(seed).standard_normal(t.size)
    assert measure_period(t, np.cos(2 * np.pi * t / T + phase) + noise) == pytest.approx(T, rel=0.02)


def test_measure_period_needs_crossings():
    t = np.linspace(0, 1, 100)
    with pytest.raises(ValueError):
        measure_period(t, np.cos(np.pi * t / 2))


def test_oscillation_peaks():
    t = np.linspace(0, 2, 2001)
    peaks = oscillation_peaks(np.cos(2 * np.pi * t))
    assert len(peaks) == 3
    assert np.allclose(peaks, 1.0, atol=1e-4)
