import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaselab.diagnostics import gaussian_field, random_density_matrix
from phaselab.grid import (
    BoundaryMassWarning,
    ClassicalWaveFunction,
    DensityMatrix,
    GridError,
    PhaseSpaceDensity,
    PhaseSpaceGrid,
    PositionWaveFunction,
    ValidationError,
    WignerFunction,
    boundary_mass,
    check_boundary,
    fourier_shift,
    fourier_upsample,
    inverse_wigner,
    marginals,
    momentum_variance,
    position_variance,
    read_field,
    spectral_derivative,
    wigner_transform,
    write_field,
)
from phaselab.quantum import GaussianPacketSpec, gaussian_position_state, hermite_state, packet_analytics


@pytest.fixture(scope="module")
def g64():
    return PhaseSpaceGrid.square(64)


@pytest.fixture(scope="module")
def g128():
    return PhaseSpaceGrid.square(128)


# ---------------------------------------------------------------------------
# grid


@pytest.mark.parametrize("n", [4, 12, 100, 0])
def test_grid_rejects_sizes_that_are_not_powers_of_two_at_least_eight(n):
    with pytest.raises(GridError):
        PhaseSpaceGrid(n, 16, 10.0, 10.0)


@pytest.mark.parametrize("kwargs", [dict(x_extent=0.0), dict(p_extent=-1.0), dict(mass=0.0), dict(hbar=2.0)])
def test_grid_rejects_bad_parameters(kwargs):
    base = dict(n_x=16, n_p=16, x_extent=10.0, p_extent=10.0)
    with pytest.raises(GridError):
        PhaseSpaceGrid(**{**base, **kwargs})


def test_grid_spacing_weight_and_coordinates():
    g = PhaseSpaceGrid(16, 32, 8.0, 4.0, mass=2.0)
    assert g.dx == 0.5 and g.dp == 0.125
    assert g.weight == pytest.approx(0.5 * 0.125 / (2 * math.pi), rel=1e-15)
    assert g.x[0] == -4.0 and g.x[-1] == pytest.approx(3.5)
    assert g.p[0] == -2.0 and len(g.p) == 32
    X, P = g.mesh()
    assert X.shape == P.shape == (16, 32)
    assert not g.wigner_compatible
    with pytest.raises(GridError):
        g.require_wigner_compatible()


@given(n=st.sampled_from([8, 16, 64, 256]), aspect=st.floats(0.05, 20.0))
def test_square_grid_is_wigner_compatible_with_requested_aspect(n, aspect):
    g = PhaseSpaceGrid.square(n, aspect=aspect)
    assert g.wigner_compatible
    assert g.x_extent / g.p_extent == pytest.approx(aspect, rel=1e-12)
    assert g.dx * g.dp == pytest.approx(2 * math.pi / n, rel=1e-12)


def test_wrap_x_maps_into_the_box():
    g = PhaseSpaceGrid(16, 16, 10.0, 10.0)
    np.testing.assert_allclose(g.wrap_x([5.0, -5.0, 12.0, -7.5]), [-5.0, -5.0, 2.0, 2.5])


# ---------------------------------------------------------------------------
# spectral helpers


@given(shift=st.floats(-5.0, 5.0))
@settings(max_examples=30)
def test_fourier_shift_translates_band_limited_fields_exactly(shift):
    g = PhaseSpaceGrid(64, 8, 2 * math.pi, 1.0)
    f = np.cos(3 * g.x) + 0.5 * np.sin(g.x)
    out = fourier_shift(f, shift, axis=0, spacing=g.dx)
    np.testing.assert_allclose(out, np.cos(3 * (g.x - shift)) + 0.5 * np.sin(g.x - shift), atol=1e-12)


def test_fourier_shift_shears_rows_and_preserves_the_norm(g64):
    X, P = g64.mesh()
    f = np.exp(-(X**2) - P**2)
    tau = 0.3
    sheared = fourier_shift(f, g64.p[None, :] * tau, axis=0, spacing=g64.dx)
    np.testing.assert_allclose(sheared, np.exp(-((X - P * tau) ** 2) - P**2), atol=1e-12)
    assert np.sum(sheared**2) == pytest.approx(np.sum(f**2), rel=1e-12)
    assert np.isrealobj(sheared)


def test_complex_fourier_shift_by_a_full_period_is_the_identity(g64):
    rng = np.random.default_rng(1)
    f = rng.normal(size=(64, 64)) + 1j * rng.normal(size=(64, 64))
    back = fourier_shift(f, g64.x_extent, axis=0, spacing=g64.dx)
    np.testing.assert_allclose(back, f, atol=1e-11)


def test_parseval_under_both_partial_fourier_transforms(g64):
    psi = ClassicalWaveFunction(g64, gaussian_field(g64, 0.8, 1.3, 0.4, -0.2) ** 0.5)
    v = psi.values
    for axis in (0, 1):
        assert np.sum(np.abs(np.fft.fft(v, axis=axis, norm="ortho")) ** 2) == pytest.approx(np.sum(v**2), rel=1e-10)


def test_spectral_derivative_of_trigonometric_polynomials():
    g = PhaseSpaceGrid(32, 8, 2 * math.pi, 1.0)
    f = np.sin(2 * g.x)
    np.testing.assert_allclose(spectral_derivative(f, 0, g.dx), 2 * np.cos(2 * g.x), atol=1e-12)
    np.testing.assert_allclose(spectral_derivative(f, 0, g.dx, order=3), -8 * np.cos(2 * g.x), atol=1e-11)


def test_fourier_upsample_interpolates_to_half_steps():
    g = PhaseSpaceGrid(32, 8, 2 * math.pi, 1.0)
    fine = fourier_upsample(np.cos(3 * g.x), 0)
    xf = g.x[0] + 0.5 * g.dx * np.arange(64)
    np.testing.assert_allclose(fine, np.cos(3 * xf), atol=1e-12)


# ---------------------------------------------------------------------------
# containers


def test_containers_are_immutable(g64):
    psi = ClassicalWaveFunction(g64, np.ones((64, 64)))
    with pytest.raises(ValueError):
        psi.values[0, 0] = 2.0


def test_classical_wave_function_normalizes_and_keeps_realness(g64):
    X, P = g64.mesh()
    psi = ClassicalWaveFunction(g64, 3 * np.exp(-(X**2) - P**2)).normalize()
    assert psi.norm() == pytest.approx(1.0, abs=1e-10)
    assert psi.real and np.isrealobj(psi.values)
    assert psi.density().values.sum() * g64.weight == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(ValidationError):
        ClassicalWaveFunction(g64, np.zeros((64, 64))).normalize()


def test_shape_mismatch_is_a_grid_error(g64):
    with pytest.raises(GridError):
        ClassicalWaveFunction(g64, np.ones((32, 64)))


def test_phase_space_density_invariants(g64):
    w = gaussian_field(g64, 1.0, 1.0)
    PhaseSpaceDensity(g64, w)
    with pytest.raises(ValidationError):
        PhaseSpaceDensity(g64, 2 * w)
    negative = w.copy()
    negative[0, 0] = -1e-6
    with pytest.raises(ValidationError):
        PhaseSpaceDensity(g64, negative)
    amp = PhaseSpaceDensity.normalized(g64, 5 * w).amplitude()
    np.testing.assert_allclose(amp.values**2, w, atol=1e-14)


def test_wigner_function_invariants(g64):
    w = gaussian_field(g64, 1.0, 1.0)
    assert WignerFunction(g64, w).integral() == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        WignerFunction(g64, w + 1e-3j)
    with pytest.raises(ValidationError):
        WignerFunction(g64, 1.5 * w)


def test_density_matrix_invariants(g64):
    rho = gaussian_position_state(g64, 0.3, 0.5, 1.0).density_matrix()
    assert rho.trace() == pytest.approx(1.0, abs=1e-10)
    assert rho.purity() == pytest.approx(1.0, abs=1e-10)
    eig = rho.eigenvalues()
    assert eig[0] == pytest.approx(1.0, abs=1e-10) and abs(eig[1:]).max() < 1e-10
    bad = rho.values.copy()
    bad[0, 1] += 1e-3
    with pytest.raises(ValidationError):
        DensityMatrix(g64, bad)
    with pytest.raises(ValidationError):
        DensityMatrix(g64, 2 * rho.values)


def test_position_wave_function_norm(g64):
    phi = PositionWaveFunction(g64, 2 * gaussian_position_state(g64).values)
    assert phi.norm() == pytest.approx(4.0)
    assert phi.normalize().norm() == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Wigner transforms


@pytest.mark.parametrize("delta", [0.5, 0.8, 1.0])
def test_wigner_transform_of_a_gaussian_matches_the_closed_form(g128, delta):
    rho = gaussian_position_state(g128, 0.0, 0.0, delta).density_matrix()
    rhow = wigner_transform(rho)
    Z, Q = g128.mesh()
    dp = 1 / (2 * delta)
    expected = 2 * np.exp(-(Q**2) / (2 * dp**2)) * np.exp(-2 * dp**2 * Z**2)
    np.testing.assert_allclose(rhow.values, expected, atol=1e-10)
    assert rhow.integral() == pytest.approx(1.0, abs=1e-10)


def test_wigner_transform_of_the_first_excited_level_matches_the_laguerre_form(g128):
    rhow = wigner_transform(hermite_state(g128, 1).normalize().density_matrix())
    Z, Q = g128.mesh()
    r2 = Z**2 + Q**2
    expected = -2 * (1 - 2 * r2) * np.exp(-r2)
    np.testing.assert_allclose(rhow.values, expected, atol=1e-10)
    i0 = np.argmin(np.abs(g128.x))
    assert rhow.values[i0, i0] < -1.9


@given(seed=st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_wigner_round_trip_on_random_states(seed):
    g = PhaseSpaceGrid.square(128)
    rho = random_density_matrix(g, np.random.default_rng(seed))
    back = inverse_wigner(wigner_transform(rho))
    np.testing.assert_allclose(back.values, rho.values, atol=1e-8)


def test_wigner_transform_is_linear(g128):
    rng = np.random.default_rng(7)
    r1, r2 = random_density_matrix(g128, rng), random_density_matrix(g128, rng)
    a = 0.3
    mix = DensityMatrix(g128, a * r1.values + (1 - a) * r2.values)
    lhs = wigner_transform(mix).values
    rhs = a * wigner_transform(r1).values + (1 - a) * wigner_transform(r2).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_purity_equals_the_phase_space_integral_of_the_squared_wigner_function(g128):
    rng = np.random.default_rng(3)
    for _ in range(5):
        rho = random_density_matrix(g128, rng)
        rhow = wigner_transform(rho)
        assert np.sum(rhow.values**2) * g128.weight == pytest.approx(rho.purity(), abs=1e-8)


def test_wigner_transform_needs_a_compatible_grid():
    g = PhaseSpaceGrid(16, 16, 10.0, 10.0)
    phi = PositionWaveFunction(g, np.exp(-(g.x**2))).normalize()
    with pytest.raises(GridError):
        wigner_transform(DensityMatrix(g, phi.density_matrix().values, tol=None))


def test_inverse_wigner_of_a_plane_wave_limit(g128):
    pbar, dp = 1.2, 0.5
    Z, Q = g128.mesh()
    values = np.exp(-((Q - pbar) ** 2) / (2 * dp**2))
    rhow = WignerFunction(g128, values / (values.sum() * g128.weight))
    rho = inverse_wigner(rhow).values
    x = g128.x
    r = g128.wrap_x(x[:, None] - x[None, :])
    c = 1 / (values.sum() * g128.weight)
    expected = c * dp / math.sqrt(2 * math.pi) * np.exp(1j * pbar * r - 0.5 * dp**2 * r**2)
    np.testing.assert_allclose(rho, expected, atol=1e-10)


def test_minimum_uncertainty_classical_gaussian_inverts_to_a_pure_state(g128):
    delta = 0.9
    w = WignerFunction(g128, gaussian_field(g128, delta, 1 / (2 * delta)))
    rho = inverse_wigner(w)
    phi = gaussian_position_state(g128, 0.0, 0.0, delta)
    np.testing.assert_allclose(rho.values, phi.density_matrix().values, atol=1e-10)


def test_marginals_of_the_free_packet(g128):
    spec = GaussianPacketSpec(p_mean=0.7, p_width=0.8)
    t = 1.5
    rhow = packet_analytics(spec, t, g128).wigner
    rho_x, rho_p = marginals(rhow)
    assert rho_x.sum() * g128.dx == pytest.approx(1.0, abs=1e-10)
    assert rho_p.sum() * g128.dp / (2 * math.pi) == pytest.approx(1.0, abs=1e-10)
    np.testing.assert_allclose(rho_p, spec.momentum_density(g128.p), atol=1e-10)
    np.testing.assert_allclose(rho_x, spec.position_density(g128.x, t), atol=1e-10)
    assert position_variance(rhow) == pytest.approx(1 / (4 * spec.width_at(t) ** 2), rel=1e-9)


def test_non_negative_fields_have_non_negative_marginals(g64):
    w = PhaseSpaceDensity(g64, gaussian_field(g64, 1.0, 2.0, 0.5, 0.5))
    for m in marginals(w):
        assert m.min() >= 0


def test_position_variance_limits(g64):
    assert position_variance(PhaseSpaceDensity(g64, gaussian_field(g64, 1.3, 1.0))) == pytest.approx(1.69, rel=1e-10)
    sharp = np.zeros((64, 64))
    sharp[20, :] = 1.0
    assert position_variance(PhaseSpaceDensity.normalized(g64, sharp)) == 0.0
    uniform = PhaseSpaceDensity.normalized(g64, np.ones((64, 64)))
    x = g64.x
    assert position_variance(uniform) == pytest.approx(np.mean(x**2) - np.mean(x) ** 2, rel=1e-12)
    assert momentum_variance(PhaseSpaceDensity(g64, gaussian_field(g64, 1.0, 0.7))) == pytest.approx(0.49, rel=1e-10)


# ---------------------------------------------------------------------------
# boundary guard and serialization


def test_boundary_mass_and_warning(g64):
    inside = gaussian_field(g64, 1.0, 1.0)
    assert boundary_mass(inside, g64) < 1e-12
    edge = gaussian_field(g64, 1.0, 1.0, x0=0.45 * g64.x_extent)
    assert boundary_mass(edge, g64) > 0.1
    with pytest.warns(BoundaryMassWarning):
        check_boundary(edge, g64)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_boundary(inside, g64)


def _roundtrip_objects(g):
    rng = np.random.default_rng(0)
    X, P = g.mesh()
    real = ClassicalWaveFunction(g, np.exp(-(X**2) - P**2))
    cplx = ClassicalWaveFunction(g, np.exp(-(X**2) - P**2 + 1j * X))
    dens = PhaseSpaceDensity(g, gaussian_field(g, 1.0, 1.0))
    wig = wigner_transform(random_density_matrix(g, rng))
    rho = random_density_matrix(g, rng)
    pos = gaussian_position_state(g, 0.2, 0.3)
    return [real, cplx, dens, wig, rho, pos]


def test_field_serialization_round_trip(tmp_path):
    g = PhaseSpaceGrid.square(16, aspect=1.5)
    for k, obj in enumerate(_roundtrip_objects(g)):
        path = tmp_path / f"f{k}.txt"
        write_field(path, obj)
        back = read_field(path)
        assert type(back) is type(obj)
        assert back.grid == g
        np.testing.assert_array_equal(back.values, obj.values)


def test_field_file_is_x_major_with_a_header(tmp_path):
    g = PhaseSpaceGrid.square(16)
    path = tmp_path / "w.txt"
    write_field(path, PhaseSpaceDensity(g, gaussian_field(g, 1.0, 1.0)))
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# phaselab kind=density n_x=16")
    data = np.loadtxt(path)
    assert data.shape == (256, 3)
    np.testing.assert_array_equal(data[:16, 0], g.x[0])
    np.testing.assert_array_equal(data[:16, 1], g.p)


def test_reading_a_file_without_header_fails(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("1 2 3\n")
    with pytest.raises(ValidationError):
        read_field(path)
