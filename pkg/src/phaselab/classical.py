"""Liouville dynamics of classical phase-space wave functions.

The Liouville operator splits into two exact shears: free streaming moves
each momentum row by p dt / m along x, the force moves each position column
by -V'(x) dt along p.  Both are applied as Fourier phases, so Strang
splitting is the only discretization error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np
from scipy import ndimage

from .grid import (
    ClassicalWaveFunction,
    PhaseSpaceGrid,
    ValidationError,
    check_boundary,
)
from ._split import strang_evolve, strang_step
from .potentials import Potential


def gaussian_wavefunction(
    grid: PhaseSpaceGrid,
    x0: float = 0.0,
    p0: float = 0.0,
    width_x: float = 1 / math.sqrt(2),
    width_p: float = 1 / math.sqrt(2),
) -> ClassicalWaveFunction:
    """Real Gaussian psi with w = psi^2 of widths (width_x, width_p)."""
    X, P = grid.mesh()
    psi = np.exp(-((X - x0) ** 2) / (4 * width_x**2) - (P - p0) ** 2 / (4 * width_p**2))
    return ClassicalWaveFunction(grid, psi).normalize()


def liouville_step(psi: ClassicalWaveFunction, V: Potential, dt: float, check: bool = True) -> ClassicalWaveFunction:
    """One Strang step: half drift along x, full kick along p, half drift."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    g = psi.grid
    v = strang_step(psi.values, g, V, dt, mode="liouville")
    if check:
        check_boundary(np.abs(v) ** 2, g, what="liouville_step")
    return ClassicalWaveFunction(g, v)


def liouville_evolve(psi: ClassicalWaveFunction, V: Potential, t_final: float, dt: float, stride: int = 0):
    """Liouville evolution; returns ``[(t, psi), ...]`` every ``stride`` steps plus the final time."""
    g = psi.grid
    series = strang_evolve(psi.values, g, V, t_final, dt, stride, mode="liouville", what="liouville")
    return [(t, ClassicalWaveFunction(g, v)) for t, v in series]


# ---------------------------------------------------------------------------
# characteristics


@dataclass(frozen=True)
class TrajectoryState:
    """Phase-space points traced from (x0, p0) to (x, p) at ``time``."""

    x0: np.ndarray
    p0: np.ndarray
    x: np.ndarray
    p: np.ndarray
    time: float
    max_energy_drift: float


class EnergyDriftError(RuntimeError):
    pass


def integrate_trajectories(
    x0,
    p0,
    V: Potential,
    times: Iterable[float],
    dt: float = 1e-3,
    mass: float = 1.0,
    drift_tol: float = 1e-6,
    guard=None,
    max_halvings: int = 6,
) -> list[TrajectoryState]:
    """Velocity-Verlet trajectories sampled at ``times`` (which may be negative).

    The relative energy drift is monitored on the points selected by ``guard``
    (all points by default).  If it exceeds ``drift_tol`` the step is halved
    and the integration restarted.
    """
    times = np.asarray(list(times), dtype=float)
    x0 = np.asarray(x0, dtype=float)
    p0 = np.asarray(p0, dtype=float)
    E0 = V.energy(x0, p0, mass)
    scale = np.maximum(np.abs(E0), 1.0)
    mask = np.ones(x0.shape, bool) if guard is None else np.asarray(guard, bool)
    h_abs = dt
    for _ in range(max_halvings + 1):
        states = []
        x, p, t = x0.copy(), p0.copy(), 0.0
        drift = 0.0
        ok = True
        for target in times:
            nsteps = int(math.ceil(abs(target - t) / h_abs - 1e-9))
            h = (target - t) / nsteps if nsteps else 0.0
            # runaway trajectories overflow; the drift guard below rejects them
            with np.errstate(over="ignore", invalid="ignore"):
                f = -V.dV(x)
                for _ in range(nsteps):
                    p += 0.5 * h * f
                    x += h * p / mass
                    f = -V.dV(x)
                    p += 0.5 * h * f
                err = np.abs(V.energy(x, p, mass) - E0) / scale
            t = target
            err = np.where(np.isfinite(err), err, np.inf)
            drift = max(drift, float(err[mask].max(initial=0.0)))
            if not drift <= drift_tol:
                ok = False
                break
            states.append(TrajectoryState(x0, p0, x.copy(), p.copy(), float(target), drift))
        if ok:
            return states
        h_abs *= 0.5
    raise EnergyDriftError(f"energy drift {drift:.3g} exceeds {drift_tol:g} even at dt={h_abs * 2:.3g}")


def sample_field(values, grid: PhaseSpaceGrid, x, p, method: str = "cubic"):
    """Evaluate a periodic grid field at arbitrary points."""
    values = np.asarray(values)
    if method == "cubic":
        ix = (np.asarray(x) + 0.5 * grid.x_extent) / grid.dx
        ip = (np.asarray(p) + 0.5 * grid.p_extent) / grid.dp
        coords = np.array([ix.ravel(), ip.ravel()])

        def interp(a):
            return ndimage.map_coordinates(a, coords, order=3, mode="grid-wrap").reshape(np.shape(x))

        if np.iscomplexobj(values):
            return interp(values.real) + 1j * interp(values.imag)
        return interp(values)
    if method == "fourier":
        return _fourier_sample(values, grid, np.asarray(x), np.asarray(p))
    raise ValueError(f"unknown interpolation {method!r}")


def _trig_basis(u, n, spacing, origin):
    k = 2 * math.pi * np.fft.fftfreq(n, spacing)
    arg = np.outer(u - origin, k)
    basis = np.exp(1j * arg)
    basis[:, n // 2] = np.cos(arg[:, n // 2])
    return basis


def _fourier_sample(values, grid, x, p, chunk: int = 4096):
    coef = np.fft.fft2(values) / values.size
    xs, ps = x.ravel(), p.ravel()
    out = np.empty(xs.size, dtype=complex)
    for s in range(0, xs.size, chunk):
        ex = _trig_basis(xs[s : s + chunk], grid.n_x, grid.dx, grid.x[0])
        ep = _trig_basis(ps[s : s + chunk], grid.n_p, grid.dp, grid.p[0])
        out[s : s + chunk] = np.einsum("ik,kl,il->i", ex, coef, ep, optimize=True)
    out = out.reshape(x.shape)
    return out.real if np.isrealobj(values) else out


def _support_energy(psi0: ClassicalWaveFunction, V: Potential, rel: float = 1e-8) -> float:
    X, P = psi0.grid.mesh()
    a = np.abs(psi0.values)
    E = V.energy(X, P, psi0.grid.mass)
    return float(E[a > rel * a.max()].max())


def characteristics_series(
    psi0: ClassicalWaveFunction,
    V: Potential,
    times: Iterable[float],
    dt: float = 1e-3,
    interpolation: str = "cubic",
    drift_tol: float = 1e-6,
) -> list[tuple[float, ClassicalWaveFunction]]:
    """psi(x, p, t) = psi0(x0, p0) with (x0, p0) traced backwards from each grid point.

    The energy guard watches only grid points whose energy lies inside the
    energy range occupied by psi0; elsewhere psi(t) vanishes by energy
    conservation, whatever the trajectory error.
    """
    g = psi0.grid
    times = [float(t) for t in times]
    X, P = g.mesh()
    guard = V.energy(X, P, g.mass) <= _support_energy(psi0, V) * (1 + 1e-6) + 1e-12
    states = integrate_trajectories(
        X, P, V, [-t for t in times], dt=dt, mass=g.mass, drift_tol=drift_tol, guard=guard
    )
    out = []
    for t, st in zip(times, states):
        _caustic_check(st, g)
        vals = sample_field(psi0.values, g, st.x, st.p, interpolation)
        out.append((t, ClassicalWaveFunction(g, vals)))
    return out


def characteristics_solution(psi0, V, t: float, dt: float = 1e-3, interpolation: str = "cubic"):
    if t == 0:
        return psi0
    return characteristics_series(psi0, V, [t], dt=dt, interpolation=interpolation)[0][1]


def _caustic_check(state: TrajectoryState, grid: PhaseSpaceGrid):
    """Warn when the finite-difference Jacobian of the backward map changes sign."""
    dxx, dxp = np.gradient(state.x, grid.dx, grid.dp)
    dpx, dpp = np.gradient(state.p, grid.dx, grid.dp)
    det = dxx * dpp - dxp * dpx
    if np.any(det[1:-1, 1:-1] <= 0):
        warnings.warn("backward flow Jacobian changes sign (caustic)", RuntimeWarning, stacklevel=3)


def harmonic_flow(x, p, t, k: float, mass: float = 1.0):
    """Exact backward map of the harmonic oscillator: points reaching (x, p) at time t."""
    w = math.sqrt(k / mass)
    c, s = math.cos(w * t), math.sin(w * t)
    return x * c - p / (mass * w) * s, p * c + mass * w * x * s


# ---------------------------------------------------------------------------
# expectation values, stationary states, conservation


def phase_space_mean(psi: ClassicalWaveFunction, F) -> float:
    g = psi.grid
    X, P = g.mesh()
    vals = F(X, P) if callable(F) else np.asarray(F)
    return float(np.sum(vals * np.abs(psi.values) ** 2) * g.weight)


def evolve_expectations(psi: ClassicalWaveFunction, V: Potential, t: float, dt: float, stride: int = 1):
    """Time series of <x>, <p> and <V'> along Liouville evolution."""
    series = liouville_evolve(psi, V, t, dt, stride)
    ts = np.array([s[0] for s in series])
    xm = np.array([phase_space_mean(s[1], lambda x, p: x) for s in series])
    pm = np.array([phase_space_mean(s[1], lambda x, p: p) for s in series])
    force = np.array([phase_space_mean(s[1], lambda x, p: V.dV(x)) for s in series])
    return {"t": ts, "x": xm, "p": pm, "dV": force}


def stationary_state(f: Callable, grid: PhaseSpaceGrid, V: Potential) -> ClassicalWaveFunction:
    """psi = sqrt(f(E)) normalized; every such function of the energy is static."""
    X, P = grid.mesh()
    vals = np.asarray(f(V.energy(X, P, grid.mass)), dtype=float)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValidationError("energy profile must be finite and non-negative on the grid")
    psi = np.sqrt(vals)
    if np.sum(vals) * grid.weight <= 0:
        raise ValidationError("energy profile is not normalizable on the grid")
    return ClassicalWaveFunction(grid, psi).normalize()


def energy_expectation(psi: ClassicalWaveFunction, V: Potential, f: Callable = lambda E: E) -> float:
    g = psi.grid
    X, P = g.mesh()
    return float(np.sum(f(V.energy(X, P, g.mass)) * np.abs(psi.values) ** 2) * g.weight)


def conserved_functionals(series, f_list: Mapping[str, Callable], V: Potential) -> dict:
    """max_t |<f(E)>(t) - <f(E)>(0)| for each named profile in ``f_list``."""
    report = {}
    for name, f in f_list.items():
        vals = np.array([energy_expectation(psi, V, f) for _, psi in series])
        report[name] = {
            "initial": float(vals[0]),
            "values": vals,
            "drift": float(np.max(np.abs(vals - vals[0]))),
        }
    return report


def thermal_expectations(grid: PhaseSpaceGrid, V: Potential, mean_energy: float, f_list: Mapping[str, Callable]):
    """Canonical averages of ``f_list`` at the temperature matching ``mean_energy``."""
    from scipy.optimize import brentq

    X, P = grid.mesh()
    E = V.energy(X, P, grid.mass)
    Emin = E.min()

    def avg(beta, f):
        wts = np.exp(-beta * (E - Emin))
        return float(np.sum(f(E) * wts) / np.sum(wts))

    beta = brentq(lambda b: avg(b, lambda e: e) - mean_energy, 1e-6, 1e4)
    return beta, {name: avg(beta, f) for name, f in f_list.items()}


def extended_evolution(psi: ClassicalWaveFunction, V: Potential, t: float, dt: float = 1e-3, method: str = "liouville"):
    """Solution of the extended Hamiltonian H_cl + H_L: Liouville-evolved psi times exp(-i E t).

    Since H_L annihilates every function of the energy, the two parts commute
    and |psi|^2 coincides with plain Liouville evolution.
    """
    if not psi.real:
        raise ValidationError("extended evolution starts from a real wave function")
    if t == 0:
        return psi
    if method == "liouville":
        amp = liouville_evolve(psi, V, t, dt)[-1][1]
    else:
        amp = characteristics_solution(psi, V, t, dt=dt, interpolation=method)
    g = psi.grid
    X, P = g.mesh()
    return ClassicalWaveFunction(g, amp.values * np.exp(-1j * V.energy(X, P, g.mass) * t))
