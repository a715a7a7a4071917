import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plasmapoisson.field import (
    AXISYMMETRIC,
    FieldFormatError,
    GridSpec,
    ScalarField,
    VectorField,
    gradient_to_efield,
    laplacian_axisymmetric,
    laplacian_cartesian,
    mode_amplitude,
    norm_1,
    norm_inf,
    read_field,
    write_field,
    write_field_csv,
)


def sine_field(n, L=1.0):
    g = GridSpec(n, n, L, L)
    X, Y = g.mesh()
    return ScalarField(g, np.sin(np.pi * X / L) * np.sin(np.pi * Y / L))


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec(2, 5, 1.0, 1.0)
    with pytest.raises(ValueError):
        GridSpec(5, 5, 0.0, 1.0)
    g = GridSpec(11, 21, 2.0, 1.0)
    assert g.dx * (g.nx - 1) == pytest.approx(g.Lx)
    assert g.shape == (21, 11)


def test_laplacian_constant_and_bilinear_vanish():
    g = GridSpec(9, 7, 1.0, 2.0)
    X, Y = g.mesh()
    for v in (np.full(g.shape, 3.5), X * Y):
        lap = laplacian_cartesian(ScalarField(g, v)).values
        assert np.max(np.abs(lap)) < 1e-10


def test_laplacian_sine_second_order():
    errors = []
    for n in (101, 201):
        phi = sine_field(n)
        lap = laplacian_cartesian(phi).values[1:-1, 1:-1]
        exact = -2 * np.pi**2 * phi.values[1:-1, 1:-1]
        errors.append(np.max(np.abs(lap - exact)) / np.max(np.abs(exact)))
    assert errors[0] < 1e-3
    assert 3.4 <= errors[0] / errors[1] <= 4.6


def test_laplacian_boundary_entries_zero():
    g = GridSpec(6, 5, 1.0, 1.0)
    lap = laplacian_cartesian(ScalarField(g, np.random.default_rng(0).random(g.shape))).values
    assert np.all(lap[0] == 0) and np.all(lap[-1] == 0)
    assert np.all(lap[:, 0] == 0) and np.all(lap[:, -1] == 0)


def test_laplacian_matches_loop_oracle():
    g = GridSpec(6, 5, 0.3, 0.7)
    v = np.random.default_rng(1).normal(size=g.shape)
    lap = laplacian_cartesian(ScalarField(g, v)).values
    for j in range(1, g.ny - 1):
        for i in range(1, g.nx - 1):
            ref = (v[j, i - 1] - 2 * v[j, i] + v[j, i + 1]) / g.dx**2 + (
                v[j - 1, i] - 2 * v[j, i] + v[j + 1, i]
            ) / g.dy**2
            assert lap[j, i] == pytest.approx(ref, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 2**31))
def test_laplacian_linearity(a, b, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(8, 6, 1.0, 1.0)
    p1, p2 = rng.normal(size=g.shape), rng.normal(size=g.shape)
    lhs = laplacian_cartesian(ScalarField(g, a * p1 + b * p2)).values
    rhs = a * laplacian_cartesian(ScalarField(g, p1)).values + b * laplacian_cartesian(
        ScalarField(g, p2)
    ).values
    scale = 1 + np.max(np.abs(rhs))
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


def test_axisymmetric_quadratic_and_linear():
    g = GridSpec(11, 9, 1.0, 0.5, AXISYMMETRIC)
    X, Rr = g.mesh()
    lap = laplacian_axisymmetric(ScalarField(g, Rr**2)).values
    np.testing.assert_allclose(lap[:-1, 1:-1], 4.0, rtol=1e-12)
    assert np.max(np.abs(laplacian_axisymmetric(ScalarField(g, X)).values)) < 1e-10
    assert np.max(np.abs(laplacian_axisymmetric(ScalarField(g, np.ones(g.shape))).values)) == 0


def test_axisymmetric_rejects_cartesian():
    with pytest.raises(ValueError):
        laplacian_axisymmetric(sine_field(5))
    g = GridSpec(5, 5, 1.0, 1.0, AXISYMMETRIC)
    with pytest.raises(ValueError):
        laplacian_cartesian(ScalarField.zeros(g))


def test_axisymmetric_discrete_divergence():
    g = GridSpec(12, 10, 1.0, 0.4, AXISYMMETRIC)
    v = np.random.default_rng(3).normal(size=g.shape)
    v[-1] = v[-2]  # no flux through the outer face
    lap = laplacian_axisymmetric(ScalarField(g, v)).values
    dr, dx = g.dy, g.dx
    w = g.y * dr
    w[0] = dr**2 / 8
    lhs = np.sum(w[:-1, None] * dx * lap[:-1, 1:-1])
    axial = (v[:-1, -1] - v[:-1, -2]) - (v[:-1, 1] - v[:-1, 0])
    rhs = np.sum(w[:-1] * axial / dx)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)


def test_gradient_linear_exact():
    g = GridSpec(7, 9, 1.0, 2.0)
    X, _ = g.mesh()
    E = gradient_to_efield(ScalarField(g, -250.0 * X))
    np.testing.assert_allclose(E.x, 250.0, rtol=1e-12)
    np.testing.assert_allclose(E.y, 0.0, atol=1e-10)
    E0 = gradient_to_efield(ScalarField.zeros(g))
    assert np.all(E0.x == 0) and np.all(E0.y == 0)


def test_gradient_sine_second_order():
    errs = []
    for n in (51, 101):
        phi = sine_field(n)
        X, Y = phi.grid.mesh()
        exact = -np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y)
        errs.append(np.max(np.abs(gradient_to_efield(phi).x - exact)))
    assert errs[0] < 5e-3
    assert 3.4 <= errs[0] / errs[1] <= 4.6


def test_norms_trivial_and_constant_offset():
    g = GridSpec(5, 5, 1.0, 1.0)
    a = ScalarField(g, np.random.default_rng(0).random(g.shape))
    assert norm_1(a, a) == 0 and norm_inf(a, a) == 0
    b = ScalarField(g, a.values - 0.25)
    assert norm_1(a, b) == pytest.approx(0.25)
    assert norm_inf(a, b) == pytest.approx(0.25)


def test_norms_loop_oracle_vector():
    g = GridSpec(5, 5, 1.0, 1.0)
    rng = np.random.default_rng(7)
    a = VectorField(g, rng.normal(size=g.shape), rng.normal(size=g.shape))
    b = VectorField(g, rng.normal(size=g.shape), rng.normal(size=g.shape))
    total, worst = 0.0, 0.0
    for comp in ("x", "y"):
        for j in range(5):
            for i in range(5):
                d = abs(getattr(a, comp)[j, i] - getattr(b, comp)[j, i])
                total += d
                worst = max(worst, d)
    assert norm_1(a, b) == pytest.approx(total / 50, rel=1e-14)
    assert norm_inf(a, b) == worst


def test_norms_shape_mismatch():
    with pytest.raises(ValueError):
        norm_1(np.zeros((3, 3)), np.zeros((3, 4)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_norm_inf_dominates(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=(4, 6)), rng.normal(size=(4, 6))
    assert norm_inf(a, b) >= norm_1(a, b) > 0


def test_mode_amplitude_orthogonality():
    phi = sine_field(65)
    assert mode_amplitude(phi, 1, 1) == pytest.approx(1.0, abs=1e-12)
    assert abs(mode_amplitude(phi, 2, 2)) < 1e-12
    assert mode_amplitude(ScalarField.zeros(phi.grid), 3, 1) == 0
    with pytest.raises(ValueError):
        mode_amplitude(phi, 0, 1)


def test_field_roundtrip(tmp_path):
    g = GridSpec(7, 4, 0.02, 0.01, AXISYMMETRIC)
    f = ScalarField(g, np.random.default_rng(5).normal(size=g.shape))
    write_field(tmp_path / "a.pfld", f)
    back = read_field(tmp_path / "a.pfld")
    assert back.grid == g
    assert np.array_equal(back.values, f.values)


def test_field_reader_rejects_bad_files(tmp_path):
    g = GridSpec(3, 3, 1.0, 1.0)
    write_field(tmp_path / "ok.pfld", ScalarField.zeros(g))
    data = (tmp_path / "ok.pfld").read_bytes()
    (tmp_path / "magic.pfld").write_bytes(b"XXXXX" + data[5:])
    (tmp_path / "short.pfld").write_bytes(data[:-8])
    bad = bytearray(data)
    bad[-8:] = np.array([np.nan]).tobytes()
    (tmp_path / "nan.pfld").write_bytes(bytes(bad))
    for name in ("magic", "short", "nan"):
        with pytest.raises(FieldFormatError):
            read_field(tmp_path / f"{name}.pfld")


def test_csv_export(tmp_path):
    g = GridSpec(3, 3, 2.0, 1.0)
    f = ScalarField(g, np.arange(9.0).reshape(3, 3))
    write_field_csv(tmp_path / "f.csv", f)
    lines = (tmp_path / "f.csv").read_text().splitlines()
    assert lines[0] == "i,j,x,y,value"
    assert len(lines) == 10
    i, j, x, y, v = lines[6].split(",")  # j = 1, i = 2
    assert (int(i), int(j), float(x), float(y), float(v)) == (2, 1, 2.0, 0.5, 5.0)
