"""Shared split-step machinery: cached Fourier multipliers for the exact shears."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .grid import PhaseSpaceGrid, check_boundary


def _freqs(n, spacing, full):
    f = np.fft.fftfreq(n, spacing) if full else np.fft.rfftfreq(n, spacing)
    return 2 * math.pi * f


def _symmetrize_nyquist(mult, axis, n, full):
    if full:
        idx = [slice(None)] * mult.ndim
        idx[axis] = n // 2
        mult[tuple(idx)] = mult[tuple(idx)].real
    return mult


@lru_cache(maxsize=64)
def drift_multiplier(grid: PhaseSpaceGrid, tau: float, full: bool):
    """Free streaming over ``tau`` along x (axis 0): exp(-i k p tau / m)."""
    k = _freqs(grid.n_x, grid.dx, full)
    mult = np.exp(-1j * np.outer(k, grid.p) * tau / grid.mass)
    return _symmetrize_nyquist(mult, 0, grid.n_x, full)


@lru_cache(maxsize=64)
def kick_multiplier(grid: PhaseSpaceGrid, V, tau: float, full: bool, mode: str = "liouville", order: int = 1):
    """Potential sub-step along p (axis 1) in the representation conjugate to p.

    ``liouville``: translation p -> p + V'(x) tau.
    ``moyal``: exact quantum factor exp(i [V(x + s/2) - V(x - s/2)] tau),
    with s the variable conjugate to p and V extended periodically.
    ``truncated``: the Taylor series of the moyal factor up to ``order``.
    """
    s = _freqs(grid.n_p, grid.dp, full)[None, :]
    x = grid.x[:, None]
    if mode == "liouville":
        phase = V.dV(x) * s
    elif mode == "moyal":
        phase = V.V(grid.wrap_x(x + 0.5 * s)) - V.V(grid.wrap_x(x - 0.5 * s))
    elif mode == "truncated":
        phase = V.dV(x) * s
        if order >= 3:
            phase = phase + V.d3V(x) * s**3 / 24.0
    else:
        raise ValueError(mode)
    mult = np.exp(1j * phase * tau)
    return _symmetrize_nyquist(mult, 1, grid.n_p, full)


def apply_multiplier(values, mult_fn, axis):
    """Multiply in Fourier space along ``axis``; real input stays real."""
    values = np.asarray(values)
    n = values.shape[axis]
    if np.isrealobj(values):
        spec = sfft.rfft(values, axis=axis, workers=-1)
        spec *= mult_fn(False)
        return sfft.irfft(spec, n=n, axis=axis, workers=-1)
    spec = sfft.fft(values, axis=axis, workers=-1)
    spec *= mult_fn(True)
    return sfft.ifft(spec, axis=axis, overwrite_x=True, workers=-1)


def drift(values, grid, tau):
    if tau == 0:
        return np.asarray(values)
    return apply_multiplier(values, lambda full: drift_multiplier(grid, tau, full), 0)


def kick(values, grid, V, tau, mode="liouville", order=1):
    if tau == 0 or V.kind == "free":
        return np.asarray(values)
    return apply_multiplier(values, lambda full: kick_multiplier(grid, V, tau, full, mode, order), 1)


def strang_step(values, grid, V, dt, mode="liouville", order=1):
    v = drift(values, grid, 0.5 * dt)
    v = kick(v, grid, V, dt, mode, order)
    return drift(v, grid, 0.5 * dt)


def step_count(t_final: float, dt: float) -> tuple[int, float]:
    """Steps of size t_final / round(t_final / dt), so that t_final is hit exactly."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_final <= 0:
        return 0, 0.0
    n = max(1, int(round(t_final / dt)))
    return n, t_final / n


def strang_evolve(values, grid, V, t_final, dt, stride=0, mode="liouville", order=1, what="field"):
    """Fused drift-kick-drift loop; yields ``(t, values)`` snapshots.

    Adjacent half drifts are merged into one full drift, which is exact
    because free streaming is a group.
    """
    nsteps, h = step_count(t_final, dt)
    out = [(0.0, np.asarray(values))]
    if nsteps == 0:
        return out
    v = drift(values, grid, 0.5 * h)
    for i in range(1, nsteps + 1):
        v = kick(v, grid, V, h, mode, order)
        if (stride and i % stride == 0) or i == nsteps:
            snap = drift(v, grid, 0.5 * h)
            check_boundary(np.abs(snap) ** 2, grid, what=what)
            out.append((i * h, snap))
        if i < nsteps:
            v = drift(v, grid, h)
    return out
