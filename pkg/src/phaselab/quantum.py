"""Quantum evolution in three pictures plus closed-form Gaussian-packet results.

* position space: split-step Schroedinger for phi(x)
* Wigner space: Moyal evolution of rho_w(z, q); the potential factor is exact
  in the representation conjugate to q
* classical wave functions: the same Moyal generator acting on psi(x, p),
  with rho_w reconstructed from psi by a quadratic four-fold integral
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ._split import step_count, strang_evolve, strang_step
from .grid import (
    ClassicalWaveFunction,
    DensityMatrix,
    GridError,
    PhaseSpaceGrid,
    PositionWaveFunction,
    WignerFunction,
    check_boundary,
    fourier_upsample,
)
from .potentials import Potential

# ---------------------------------------------------------------------------
# position space


def schrodinger_step(phi: PositionWaveFunction, V: Potential, dt: float, check: bool = True) -> PositionWaveFunction:
    """Half potential phase, full kinetic phase in Fourier space, half potential phase."""
    g = phi.grid
    return PositionWaveFunction(g, _schrodinger_values(phi.values, g, V, dt, 1, check))


def _schrodinger_values(v, g, V, h, nsteps, check=True):
    k = g.kx
    half = np.exp(-0.5j * V.V(g.x) * h)
    kin = np.exp(-1j * k**2 * h / (2 * g.mass))
    v = np.asarray(v, dtype=complex)
    for _ in range(nsteps):
        v = half * sfft.ifft(kin * sfft.fft(half * v))
    if check:
        check_boundary(np.abs(v) ** 2, g, what="schrodinger")
    return v


def schrodinger_evolve(phi: PositionWaveFunction, V: Potential, t_final: float, dt: float, stride: int = 0):
    nsteps, h = step_count(t_final, dt)
    g = phi.grid
    out = [(0.0, phi)]
    v = phi.values
    done = 0
    marks = list(range(stride, nsteps, stride)) if stride else []
    for mark in marks + [nsteps]:
        if mark <= done:
            continue
        v = _schrodinger_values(v, g, V, h, mark - done)
        done = mark
        out.append((done * h, PositionWaveFunction(g, v)))
    return out


def gaussian_position_state(grid: PhaseSpaceGrid, x0: float = 0.0, p0: float = 0.0, width: float = 1.0) -> PositionWaveFunction:
    """phi(x) = (2 pi width^2)^(-1/4) exp(-(x - x0)^2 / (4 width^2) + i p0 x)."""
    x = grid.x
    phi = (2 * math.pi * width**2) ** -0.25 * np.exp(-((x - x0) ** 2) / (4 * width**2) + 1j * p0 * x)
    return PositionWaveFunction(grid, phi)


def hermite_state(grid: PhaseSpaceGrid, n: int, mass: float = 1.0, omega: float = 1.0) -> PositionWaveFunction:
    """Harmonic-oscillator eigenfunction of level ``n``."""
    from scipy.special import eval_hermite

    xi = math.sqrt(mass * omega) * grid.x
    norm = (mass * omega / math.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n))
    return PositionWaveFunction(grid, norm * eval_hermite(n, xi) * np.exp(-0.5 * xi**2))


# ---------------------------------------------------------------------------
# Wigner / Moyal


def moyal_step(rhow: WignerFunction, V: Potential, dt: float, check: bool = True) -> WignerFunction:
    g = rhow.grid
    v = strang_step(rhow.values, g, V, dt, mode="moyal")
    if check:
        check_boundary(v, g, what="moyal_step")
    return WignerFunction(g, v, tol=None)


def moyal_evolve(rhow: WignerFunction, V: Potential, t_final: float, dt: float, stride: int = 0):
    g = rhow.grid
    series = strang_evolve(rhow.values, g, V, t_final, dt, stride, mode="moyal", what="moyal")
    return [(t, WignerFunction(g, v, tol=None)) for t, v in series]


def moyal_truncated_step(rhow: WignerFunction, V: Potential, dt: float, order: int = 3) -> WignerFunction:
    """Moyal step with the potential term cut after V' (order 1) or V''' (order 3)."""
    if order not in (1, 3):
        raise ValueError("order must be 1 or 3")
    if order == 3 and V.kind not in ("free", "harmonic", "quartic", "tabulated"):
        raise ValueError("third derivative of the potential is unavailable")
    g = rhow.grid
    v = strang_step(rhow.values, g, V, dt, mode="truncated", order=order)
    return WignerFunction(g, v, tol=None)


def moyal_truncated_evolve(rhow, V, t_final, dt, order=3, stride=0):
    g = rhow.grid
    series = strang_evolve(rhow.values, g, V, t_final, dt, stride, mode="truncated", order=order, what="moyal")
    return [(t, WignerFunction(g, v, tol=None)) for t, v in series]


def classical_wavefunction_quantum_step(psi: ClassicalWaveFunction, V: Potential, dt: float, check: bool = True):
    """The Moyal generator applied to psi(x, p) instead of rho_w."""
    g = psi.grid
    v = strang_step(psi.values, g, V, dt, mode="moyal")
    if check:
        check_boundary(np.abs(v) ** 2, g, what="hw_step")
    return ClassicalWaveFunction(g, v)


def classical_wavefunction_quantum_evolve(psi, V, t_final, dt, stride=0):
    g = psi.grid
    series = strang_evolve(psi.values, g, V, t_final, dt, stride, mode="moyal", what="hw")
    return [(t, ClassicalWaveFunction(g, v)) for t, v in series]


RECONSTRUCT_MAX_N = 128


def reconstruct_density(psi: ClassicalWaveFunction, max_n: int = RECONSTRUCT_MAX_N) -> WignerFunction:
    """rho_w(x, p) = int dr dr' ds ds' / (2 pi)^2 psi(x + r/2, p + s) psi(x + r'/2, p + s') cos(s' r - s r').

    With s on the momentum grid the kernel is periodic in r and r' with period
    L_x, so both run over the centred window [-L_x/2, L_x/2) in steps of dx;
    half-grid values of psi come from Fourier interpolation along x.  For each
    x the (r, s) sum is a 2D FFT of the window and the (r', s') sum a circular
    correlation along p, O(n^3 log n) overall.  With this measure the result
    integrates to the norm of psi for every real psi.
    """
    g = psi.grid
    g.require_wigner_compatible()
    n = g.n_x
    if n > max_n:
        raise GridError(f"reconstruct_density grid n={n} exceeds the cost cap {max_n}")
    if not psi.real:
        if np.max(np.abs(psi.values.imag)) > 1e-12 * np.max(np.abs(psi.values)):
            raise ValueError("reconstruct_density expects a real wave function")
    fine = fourier_upsample(np.real(psi.values), 0)  # spacing dx/2 along x
    half = n // 2
    a = np.arange(n)
    kprime = a - half  # r' = kprime * dx
    sign = (-1.0) ** a  # exp(2 pi i l' k / n) with k = a - n/2
    phase_j = np.exp(2j * math.pi * np.outer(kprime, a) / n)  # (k', j)
    out = np.empty((n, n))
    for i in range(n):
        win = fine[(2 * i + kprime) % (2 * n)]  # W[a, L] = psi(x_i + r_a/2, p_L)
        spec = sfft.fft(win, axis=1)  # (k, c)
        H = sfft.ifft(spec, axis=0) * n * sign[:, None]  # (l', c)
        H = H[:, kprime % n]  # (l', k')
        # C[k', j] = sum_l' W[k', j + l'] H[l', k']
        C = sfft.ifft(sfft.fft(win, axis=1) * np.conj(sfft.fft(np.conj(H.T), axis=1)), axis=1)
        out[i] = np.real(np.sum(phase_j * C, axis=0))
    out *= (g.dx * g.dp / (2 * math.pi)) ** 2
    return WignerFunction(g, out, tol=None)


# ---------------------------------------------------------------------------
# Gaussian packet analytics


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Free Gaussian packet with momentum amplitude A(p) centred at ``p_mean``, starting at x = 0."""

    p_mean: float = 0.0
    p_width: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if not self.p_width > 0:
            raise ValueError("p_width must be positive")

    def width_at(self, t: float) -> float:
        """Effective momentum width entering the position spread at time t."""
        d = self.p_width
        return d / math.sqrt(1 + 4 * d**4 * t**2 / self.mass**2)

    def amplitude(self, p):
        d = self.p_width
        return (d**2 / (2 * math.pi)) ** -0.25 * np.exp(-((np.asarray(p) - self.p_mean) ** 2) / (4 * d**2))

    def wavefunction(self, x, t: float = 0.0):
        """phi(x, t) = int dp/2pi A(p) exp(i p x - i p^2 t / 2m), in closed form."""
        d, pb, m = self.p_width, self.p_mean, self.mass
        x = np.asarray(x, dtype=float)
        c = 1 + 2j * d**2 * t / m
        pref = (2 * d**2 / math.pi) ** 0.25 / np.sqrt(c)
        return pref * np.exp((-(d**2) * x**2 + 1j * pb * x - 0.5j * pb**2 * t / m) / c)

    def density_matrix(self, x, y, t: float = 0.0):
        d, pb, m = self.p_width, self.p_mean, self.mass
        db = self.width_at(t)
        x, y = np.asarray(x, float), np.asarray(y, float)
        c = 0.5 * (x + y) - pb * t / m
        r = x - y
        return (
            math.sqrt(2 / math.pi)
            * db
            * np.exp(-2 * db**2 * c**2 - 0.5 * db**2 * r**2)
            * np.exp(1j * r * (pb + 4 * d**2 * db**2 * t / m * c))
        )

    def wigner(self, z, q, t: float = 0.0):
        d, pb, m = self.p_width, self.p_mean, self.mass
        z, q = np.asarray(z, float), np.asarray(q, float)
        return 2 * np.exp(-((q - pb) ** 2) / (2 * d**2)) * np.exp(-2 * d**2 * (z - q * t / m) ** 2)

    def position_density(self, x, t: float = 0.0):
        db = self.width_at(t)
        return math.sqrt(2 / math.pi) * db * np.exp(-2 * db**2 * (np.asarray(x) - self.p_mean * t / self.mass) ** 2)

    def momentum_density(self, q):
        """Normalized with dq / 2pi; equals A(q)^2."""
        d = self.p_width
        return math.sqrt(2 * math.pi) / d * np.exp(-((np.asarray(q) - self.p_mean) ** 2) / (2 * d**2))


@dataclass(frozen=True)
class PacketAnalytics:
    time: float
    mean_x: float
    var_x: float
    mean_p: float
    var_p: float
    density_matrix: DensityMatrix | None
    wigner: WignerFunction | None


def packet_analytics(spec: GaussianPacketSpec, t: float, grid: PhaseSpaceGrid | None = None) -> PacketAnalytics:
    """Closed-form moments and, if a grid is given, the sampled rho and rho_w."""
    if t < 0:
        raise ValueError("t must be non-negative")
    db = spec.width_at(t)
    rho = rhow = None
    if grid is not None:
        X, Y = np.meshgrid(grid.x, grid.x, indexing="ij")
        rho = DensityMatrix(grid, spec.density_matrix(X, Y, t), tol=None)
        if grid.wigner_compatible:
            Z, Q = grid.mesh()
            rhow = WignerFunction(grid, spec.wigner(Z, Q, t), tol=None)
    return PacketAnalytics(
        time=t,
        mean_x=spec.p_mean * t / spec.mass,
        var_x=1 / (4 * db**2),
        mean_p=spec.p_mean,
        var_p=spec.p_width**2,
        density_matrix=rho,
        wigner=rhow,
    )


# ---------------------------------------------------------------------------
# correlation operators


def correlation_kernel(delta: float, a: float, xbar: float, x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    return np.exp(-(a * (x - y) ** 2 + (0.5 * (x + y) - xbar) ** 2 / a) / (4 * delta**2)) / (4 * math.pi * delta**2)


def correlation_eigenvalue(delta: float, a: float) -> float:
    return math.sqrt(a / math.pi) / ((1 + 2 * a) * delta)


@dataclass(frozen=True)
class CorrelationCheck:
    kernel: np.ndarray
    eigenvalue: float
    expected: float
    residual: float


def correlation_operator(delta: float, a: float, xbar: float, grid: PhaseSpaceGrid) -> CorrelationCheck:
    """Sample the correlation kernel and apply it to the static Gaussian of width ``delta`` at ``xbar``."""
    if not (delta > 0 and a > 0):
        raise ValueError("delta and a must be positive")
    x = grid.x
    K = correlation_kernel(delta, a, xbar, x[:, None], x[None, :])
    psi = gaussian_position_state(grid, xbar, 0.0, delta).values.real
    applied = K @ psi * grid.dx
    c = float(applied @ psi / (psi @ psi))
    expected = correlation_eigenvalue(delta, a)
    residual = float(np.max(np.abs(applied - expected * psi)))
    return CorrelationCheck(K, c, expected, residual)


def shift_expectation(rho: DensityMatrix, a: float) -> complex:
    """<delta(x - y - 2a)> = int dy rho(y + 2a, y), evaluated by Fourier interpolation."""
    g = rho.grid
    from .classical import sample_field

    y = g.x
    vals = sample_field(rho.values, PhaseSpaceGrid(g.n_x, g.n_x, g.x_extent, g.x_extent, g.mass), y + 2 * a, y, "fourier")
    return complex(np.sum(vals) * g.dx)
