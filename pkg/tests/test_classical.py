import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from phaselab.classical import (
    EnergyDriftError,
    characteristics_series,
    characteristics_solution,
    conserved_functionals,
    energy_expectation,
    evolve_expectations,
    extended_evolution,
    gaussian_wavefunction,
    harmonic_flow,
    integrate_trajectories,
    liouville_evolve,
    liouville_step,
    phase_space_mean,
    sample_field,
    stationary_state,
    thermal_expectations,
)
from phaselab.grid import BoundaryMassWarning, ClassicalWaveFunction, PhaseSpaceGrid, ValidationError, spectral_derivative
from phaselab.potentials import Potential

TWO_PI = 2 * math.pi


@pytest.fixture(scope="module")
def g64():
    return PhaseSpaceGrid.square(64)


@pytest.fixture(scope="module")
def g128():
    return PhaseSpaceGrid.square(128)


def gaussian_values(grid, x0, p0, wx, wp, x=None, p=None):
    """Unnormalised real Gaussian amplitude, evaluated on the mesh or at given points."""
    if x is None:
        x, p = grid.mesh()
    return np.exp(-((x - x0) ** 2) / (4 * wx**2) - (p - p0) ** 2 / (4 * wp**2))


def liouville_residual(psi, V):
    """H_L psi up to a factor -i, by spectral differentiation."""
    g = psi.grid
    X, P = g.mesh()
    v = psi.values
    return -(P / g.mass) * spectral_derivative(v, 0, g.dx) + V.dV(X) * spectral_derivative(v, 1, g.dp)


# ---------------------------------------------------------------------------
# Liouville stepping


def test_free_packet_moves_on_a_classical_trajectory(g128):
    x0, p0 = -1.0, 1.0
    psi = gaussian_wavefunction(g128, x0, p0, 0.7, 0.6)
    t = 1.0
    out = liouville_evolve(psi, Potential.free(), t, 0.05)[-1][1]
    assert phase_space_mean(out, lambda x, p: x) == pytest.approx(x0 + p0 * t, abs=1e-10)
    assert phase_space_mean(out, lambda x, p: p) == pytest.approx(p0, abs=1e-12)
    var_p = phase_space_mean(out, lambda x, p: (p - p0) ** 2)
    assert var_p == pytest.approx(0.36, rel=1e-10)
    # free streaming is a single exact shear
    X, P = g128.mesh()
    exact = gaussian_values(g128, x0, p0, 0.7, 0.6, X - P * t, P)
    np.testing.assert_allclose(out.values, exact / math.sqrt(np.sum(exact**2) * g128.weight), atol=1e-10)


def test_zero_step_is_the_identity(g64):
    psi = gaussian_wavefunction(g64, 0.5, 0.5)
    out = liouville_step(psi, Potential.quartic(1.0), 0.0)
    np.testing.assert_array_equal(out.values, psi.values)


def test_negative_step_is_rejected(g64):
    with pytest.raises(ValueError):
        liouville_step(gaussian_wavefunction(g64), Potential.free(), -0.1)


def _period_grid():
    return PhaseSpaceGrid.square(256, aspect=1 / TWO_PI), Potential.harmonic(TWO_PI**2)


def test_quarter_period_rotates_the_harmonic_packet():
    g, V = _period_grid()
    psi = gaussian_wavefunction(g, 1.0, 0.0, 0.2, 0.2 * TWO_PI)
    out = liouville_evolve(psi, V, 0.25, 1e-3)[-1][1]
    X, P = g.mesh()
    x0, p0 = harmonic_flow(X, P, 0.25, V.k)
    exact = gaussian_values(g, 1.0, 0.0, 0.2, 0.2 * TWO_PI, x0, p0)
    exact /= math.sqrt(np.sum(exact**2) * g.weight)
    assert np.abs(out.values - exact).max() <= 1e-4 * np.abs(exact).max()
    assert phase_space_mean(out, lambda x, p: p) == pytest.approx(-TWO_PI, rel=1e-5)


def test_norm_and_purity_are_conserved_and_real_fields_stay_real(g128):
    V = Potential.quartic(0.25, 1.0)
    psi = gaussian_wavefunction(g128, 0.5, -0.3, 0.5, 0.5)
    purity0 = np.sum(psi.values**4) * g128.weight
    step = liouville_step(psi, V, 0.01)
    assert abs(step.norm() - 1) <= 1e-12
    out = liouville_evolve(psi, V, 1.0, 0.01)[-1][1]
    assert np.isrealobj(out.values)
    assert abs(out.norm() - 1) <= 1e-10
    assert abs(np.sum(out.values**4) * g128.weight - purity0) <= 1e-8


def test_complex_input_keeps_a_negligible_imaginary_part_when_real(g64):
    psi = gaussian_wavefunction(g64, 1.0, 0.0)
    complex_psi = ClassicalWaveFunction(g64, psi.values.astype(complex))
    out = liouville_step(complex_psi, Potential.harmonic(1.0), 0.05)
    assert np.abs(out.values.imag).max() <= 1e-12


def test_liouville_is_second_order_in_dt(g64):
    V = Potential.quartic(0.1, 1.0)
    psi = gaussian_wavefunction(g64, 0.5, -0.3, 0.6, 0.6)

    def run(dt):
        return liouville_evolve(psi, V, 1.0, dt)[-1][1].values

    a, b, c = run(0.04), run(0.02), run(0.01)
    ratio = np.abs(a - b).max() / np.abs(b - c).max()
    assert 3.5 <= ratio <= 4.5


def test_liouville_agrees_with_characteristics_after_one_period():
    g, V = _period_grid()
    psi = gaussian_wavefunction(g, 1.0, 0.0, 1 / math.sqrt(4 * math.pi), math.sqrt(math.pi))
    split = liouville_evolve(psi, V, 1.0, 1e-3)[-1][1]
    chars = characteristics_solution(psi, V, 1.0, dt=1e-3)
    assert np.abs(split.values - chars.values).max() <= 1e-4


def test_boundary_leak_warns(g64):
    psi = gaussian_wavefunction(g64, 0.0, 0.4 * g64.p_extent)
    with pytest.warns(BoundaryMassWarning):
        liouville_step(psi, Potential.free(), 0.1)


# ---------------------------------------------------------------------------
# characteristics


def test_characteristics_for_the_free_particle_are_exact_shifts(g128):
    psi = gaussian_wavefunction(g128, -0.5, 1.0, 0.8, 0.8)
    out = characteristics_solution(psi, Potential.free(), 1.2, interpolation="fourier")
    X, P = g128.mesh()
    exact = gaussian_values(g128, -0.5, 1.0, 0.8, 0.8, X - P * 1.2, P)
    np.testing.assert_allclose(out.values, exact / math.sqrt(np.sum(exact**2) * g128.weight), atol=1e-9)


def test_characteristics_at_time_zero_return_the_initial_state(g64):
    psi = gaussian_wavefunction(g64)
    assert characteristics_solution(psi, Potential.quartic(1.0), 0.0) is psi


@pytest.mark.parametrize("interpolation, tol", [("cubic", 2e-3), ("fourier", 1e-6)])
def test_characteristics_follow_the_harmonic_rotation(g128, interpolation, tol):
    V = Potential.harmonic(1.0)
    psi = gaussian_wavefunction(g128, 1.0, 0.5, 0.8, 0.8)
    t = 1.3
    out = characteristics_solution(psi, V, t, dt=1e-3, interpolation=interpolation)
    X, P = g128.mesh()
    x0, p0 = harmonic_flow(X, P, t, V.k)
    exact = gaussian_values(g128, 1.0, 0.5, 0.8, 0.8, x0, p0) / math.sqrt(
        np.sum(gaussian_values(g128, 1.0, 0.5, 0.8, 0.8) ** 2) * g128.weight
    )
    assert np.abs(out.values - exact).max() <= tol * np.abs(exact).max()


def test_bicubic_and_fourier_interpolation_bound_each_other(g64):
    psi = gaussian_wavefunction(g64, 0.3, -0.2, 0.9, 0.9)
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, 200)
    p = rng.uniform(-3, 3, 200)
    amplitude = psi.values / gaussian_values(g64, 0.3, -0.2, 0.9, 0.9)
    exact = amplitude.mean() * gaussian_values(g64, 0.3, -0.2, 0.9, 0.9, x, p)
    cubic = sample_field(psi.values, g64, x, p, "cubic")
    fourier = sample_field(psi.values, g64, x, p, "fourier")
    assert np.abs(fourier - exact).max() < 1e-10
    assert np.abs(cubic - fourier).max() < 1e-2
    with pytest.raises(ValueError):
        sample_field(psi.values, g64, x, p, "linear")


def test_single_trajectory_matches_an_accurate_ode_solution():
    V = Potential.quartic(1.0, 0.5)
    sol = solve_ivp(lambda t, y: [y[1], -V.dV(y[0])], (0, 3), [1.2, -0.4], rtol=1e-12, atol=1e-12)
    st_ = integrate_trajectories(np.array([1.2]), np.array([-0.4]), V, [3.0], dt=1e-4)[-1]
    assert abs(st_.x[0] - sol.y[0, -1]) <= 1e-6
    assert abs(st_.p[0] - sol.y[1, -1]) <= 1e-6
    assert st_.max_energy_drift <= 1e-6


def test_energy_drift_guard_raises():
    V = Potential.quartic(5.0)
    with pytest.raises(EnergyDriftError):
        integrate_trajectories(np.array([3.0]), np.array([0.0]), V, [5.0], dt=0.2, drift_tol=1e-12, max_halvings=1)


# ---------------------------------------------------------------------------
# expectation values


def test_expectations_follow_newton_for_the_harmonic_oscillator(g128):
    V = Potential.harmonic(1.0)
    x0, p0 = 1.0, 0.5
    psi = gaussian_wavefunction(g128, x0, p0, 0.8, 0.8)
    series = evolve_expectations(psi, V, 2.0, 1e-3, stride=250)
    t = series["t"]
    np.testing.assert_allclose(series["x"], x0 * np.cos(t) + p0 * np.sin(t), atol=1e-6)
    np.testing.assert_allclose(series["p"], p0 * np.cos(t) - x0 * np.sin(t), atol=1e-6)
    # Ehrenfest-type relations by finite differences of the stored series
    np.testing.assert_allclose(np.gradient(series["x"], t)[1:-1], series["p"][1:-1], atol=2e-2)


def test_free_momentum_mean_is_constant(g64):
    psi = gaussian_wavefunction(g64, 0.0, 0.7)
    series = evolve_expectations(psi, Potential.free(), 1.0, 0.1)
    np.testing.assert_allclose(series["p"], 0.7, atol=1e-12)


def test_narrowing_distributions_approach_the_newtonian_trajectory():
    V = Potential.quartic(1.0)
    sol = solve_ivp(lambda t, y: [y[1], -V.dV(y[0])], (0, 1), [1.0, 0.0], rtol=1e-12, atol=1e-12)
    errors = []
    for width in (0.2, 0.1, 0.05):
        g = PhaseSpaceGrid(256, 256, 8.0, 8.0)
        psi = gaussian_wavefunction(g, 1.0, 0.0, width, width)
        out = liouville_evolve(psi, V, 1.0, 1e-3)[-1][1]
        errors.append(abs(phase_space_mean(out, lambda x, p: x) - sol.y[0, -1]))
    assert errors[0] > errors[1] > errors[2]
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.1)


# ---------------------------------------------------------------------------
# stationary states and conservation


def test_boltzmann_profile_is_static(g64):
    V = Potential.harmonic(1.0)
    psi = stationary_state(lambda E: np.exp(-E / 0.5), g64, V)
    assert np.abs(liouville_residual(psi, V)).max() <= 1e-10
    out = liouville_evolve(psi, V, 1.0, 0.01)[-1][1]
    assert np.abs(out.values - psi.values).max() <= 1e-4


def test_energy_shell_profile_is_static():
    g = PhaseSpaceGrid(256, 256, 10.0, 10.0)
    V = Potential.quartic(0.2, 1.0)
    psi = stationary_state(lambda E: np.exp(-((E - 2.0) ** 2) / 0.5), g, V)
    assert np.abs(liouville_residual(psi, V)).max() <= 1e-10


def test_compact_profile_without_potential_is_exactly_static(g64):
    V = Potential.free()
    psi = stationary_state(lambda E: (E < 2.0).astype(float), g64, V)
    out = liouville_evolve(psi, V, 1.0, 0.1)[-1][1]
    np.testing.assert_allclose(out.values, psi.values, atol=1e-12)


def test_stationary_state_rejects_bad_profiles(g64):
    with pytest.raises(ValidationError):
        stationary_state(lambda E: -np.ones_like(E), g64, Potential.free())
    with pytest.raises(ValidationError):
        stationary_state(lambda E: np.zeros_like(E), g64, Potential.free())


def test_conserved_functionals_free_and_harmonic(g64):
    V0 = Potential.free()
    psi = gaussian_wavefunction(g64, -1.0, 1.0)
    rep = conserved_functionals(liouville_evolve(psi, V0, 2.0, 0.1, stride=5), {"E": lambda E: E}, V0)
    assert rep["E"]["drift"] <= 1e-10
    V = Potential.harmonic(1.0)
    psi = gaussian_wavefunction(g64, 1.0, 0.0, 0.7, 0.7)
    series = characteristics_series(psi, V, np.linspace(0, 6, 4), dt=1e-3, interpolation="fourier")
    rep = conserved_functionals(series, {"E2": lambda E: E**2}, V)
    assert rep["E2"]["drift"] <= 1e-6
    assert rep["E2"]["initial"] == pytest.approx(energy_expectation(psi, V, lambda E: E**2))


def test_thermal_reference_matches_the_requested_mean_energy(g64):
    V = Potential.harmonic(1.0)
    beta, vals = thermal_expectations(g64, V, 1.0, {"E": lambda E: E, "E2": lambda E: E**2})
    # a classical 1D oscillator has <E> = T and <E^2> = 2 T^2
    assert vals["E"] == pytest.approx(1.0, abs=1e-10)
    assert beta == pytest.approx(1.0, rel=1e-6)
    assert vals["E2"] == pytest.approx(2.0, rel=1e-6)


# ---------------------------------------------------------------------------
# extended Hamiltonian


def test_extended_evolution_at_time_zero_is_the_identity(g64):
    psi = gaussian_wavefunction(g64)
    assert extended_evolution(psi, Potential.harmonic(1.0), 0.0) is psi


def test_extended_evolution_has_the_liouville_density_and_conserves_the_energy(g128):
    V = Potential.quartic(0.25, 1.0)
    psi = gaussian_wavefunction(g128, 0.5, -0.3, 0.5, 0.5)
    ext = extended_evolution(psi, V, 1.0, dt=0.01)
    plain = liouville_evolve(psi, V, 1.0, 0.01)[-1][1]
    np.testing.assert_allclose(np.abs(ext.values) ** 2, plain.values**2, atol=1e-13)
    # the splitting keeps <H> up to an O(dt^2) error
    E0 = energy_expectation(psi, V)
    drifts = [abs(energy_expectation(extended_evolution(psi, V, 1.0, dt=dt), V) - E0) for dt in (0.01, 0.005)]
    assert drifts[0] <= 1e-5
    assert drifts[0] / drifts[1] == pytest.approx(4.0, rel=0.05)


def test_shell_state_acquires_the_eigenphase():
    # w = exp(-(E - E0)^2 / 2 s^2) with a flat density of states gives
    # <exp(-i E t)> = exp(-i E0 t - s^2 t^2 / 2)
    g = PhaseSpaceGrid(256, 256, 12.0, 12.0)
    V = Potential.harmonic(1.0)
    E0, s, t = 2.0, 0.1, 0.7
    psi = stationary_state(lambda E: np.exp(-((E - E0) ** 2) / (2 * s**2)), g, V)
    ext = extended_evolution(psi, V, t, dt=0.01)
    X, P = g.mesh()
    exact = psi.values * np.exp(-1j * V.energy(X, P) * t)
    # pointwise agreement is limited by the O(dt^2) splitting error
    assert np.abs(ext.values - exact).max() <= 2e-4 * np.abs(psi.values).max()
    overlap = np.sum(np.conj(psi.values) * ext.values) * g.weight
    assert abs(overlap) == pytest.approx(math.exp(-(s**2) * t**2 / 2), abs=1e-7)
    assert np.angle(overlap) == pytest.approx(-E0 * t, abs=1e-8)


def test_extended_evolution_requires_a_real_field(g64):
    psi = ClassicalWaveFunction(g64, gaussian_wavefunction(g64).values * 1j)
    with pytest.raises(ValidationError):
        extended_evolution(psi, Potential.free(), 1.0)


@given(t=st.floats(0.0, 10.0), k=st.floats(0.2, 5.0))
@settings(max_examples=25)
def test_harmonic_flow_conserves_energy(t, k):
    x, p = np.array([0.3, -1.0]), np.array([1.1, 0.2])
    x0, p0 = harmonic_flow(x, p, t, k)
    np.testing.assert_allclose(0.5 * p0**2 + 0.5 * k * x0**2, 0.5 * p**2 + 0.5 * k * x**2, rtol=1e-12)
