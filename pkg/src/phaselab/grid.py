"""Periodic phase-space grids, field containers and Wigner transforms.

Conventions: hbar = 1, fields are indexed ``values[i, j] = f(x_i, p_j)``
and phase-space integrals use the weight ``dx * dp / (2 pi)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np


class GridError(ValueError):
    """Raised when grids are malformed or mutually incompatible."""


class ValidationError(ValueError):
    """Raised when a field violates a container invariant."""


class BoundaryMassWarning(UserWarning):
    """Emitted when a field leaks into the periodic boundary margin."""


BOUNDARY_MARGIN = 0.1
BOUNDARY_TOL = 1e-8


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform periodic discretization of the box [-L_x/2, L_x/2) x [-L_p/2, L_p/2)."""

    n_x: int
    n_p: int
    x_extent: float
    p_extent: float
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("n_x", "n_p"):
            n = getattr(self, name)
            if int(n) != n or n < 8 or not _is_power_of_two(int(n)):
                raise GridError(f"{name}={n} must be a power of two >= 8")
        if not (self.x_extent > 0 and self.p_extent > 0):
            raise GridError("grid extents must be positive")
        if not self.mass > 0:
            raise GridError("mass must be positive")
        if self.hbar != 1.0:
            raise GridError("hbar is fixed to 1")

    @classmethod
    def square(cls, n: int, mass: float = 1.0, aspect: float = 1.0) -> "PhaseSpaceGrid":
        """Wigner-compatible grid with n_x = n_p = n and dx * dp = 2 pi / n.

        ``aspect`` is L_x / L_p; the default gives equal extents sqrt(2 pi n).
        """
        area = 2 * math.pi * n
        lx = math.sqrt(area * aspect)
        return cls(n, n, lx, area / lx, mass)

    @property
    def dx(self) -> float:
        return self.x_extent / self.n_x

    @property
    def dp(self) -> float:
        return self.p_extent / self.n_p

    @property
    def weight(self) -> float:
        return self.dx * self.dp / (2 * math.pi)

    @property
    def x(self) -> np.ndarray:
        return -0.5 * self.x_extent + self.dx * np.arange(self.n_x)

    @property
    def p(self) -> np.ndarray:
        return -0.5 * self.p_extent + self.dp * np.arange(self.n_p)

    def mesh(self):
        return np.meshgrid(self.x, self.p, indexing="ij")

    @property
    def kx(self) -> np.ndarray:
        """Angular wavenumbers conjugate to x, in FFT order."""
        return 2 * math.pi * np.fft.fftfreq(self.n_x, self.dx)

    @property
    def kp(self) -> np.ndarray:
        """Angular wavenumbers conjugate to p, in FFT order."""
        return 2 * math.pi * np.fft.fftfreq(self.n_p, self.dp)

    @property
    def wigner_compatible(self) -> bool:
        return self.n_x == self.n_p and math.isclose(
            self.dx * self.dp, 2 * math.pi / self.n_x, rel_tol=1e-12
        )

    def require_wigner_compatible(self):
        if not self.wigner_compatible:
            raise GridError(
                "Wigner transforms need n_p == n_x and dx * dp == 2 pi / n "
                f"(got n_x={self.n_x}, n_p={self.n_p}, dx*dp={self.dx * self.dp:.6g})"
            )

    def wrap_x(self, x):
        """Map coordinates back into the periodic box."""
        half = 0.5 * self.x_extent
        return np.mod(np.asarray(x) + half, self.x_extent) - half

    def header(self, kind: str) -> str:
        return (
            f"# phaselab kind={kind} n_x={self.n_x} n_p={self.n_p} "
            f"x_extent={self.x_extent!r} p_extent={self.p_extent!r} mass={self.mass!r}"
        )


# ---------------------------------------------------------------------------
# spectral helpers


def fourier_shift(values, shift, axis: int, spacing: float):
    """Translate periodic samples along ``axis``: result(u) = f(u - shift).

    ``shift`` broadcasts against the remaining axes, so each row may move by
    its own amount (a shear).  The Nyquist mode is treated symmetrically,
    which keeps real input real.
    """
    values = np.asarray(values)
    n = values.shape[axis]
    shape = [1] * values.ndim
    shape[axis] = -1
    shift = np.asarray(shift, dtype=float)
    if np.isrealobj(values):
        k = 2 * math.pi * np.fft.rfftfreq(n, spacing)
        spec = np.fft.rfft(values, axis=axis)
        spec *= np.exp(-1j * k.reshape(shape) * shift)
        return np.fft.irfft(spec, n=n, axis=axis)
    k = 2 * math.pi * np.fft.fftfreq(n, spacing)
    phase = np.exp(-1j * k.reshape(shape) * shift)
    nyq = [slice(None)] * values.ndim
    nyq[axis] = slice(n // 2, n // 2 + 1)
    phase = np.broadcast_to(phase, np.broadcast_shapes(phase.shape, values.shape)).copy()
    phase[tuple(nyq)] = phase[tuple(nyq)].real
    return np.fft.ifft(np.fft.fft(values, axis=axis) * phase, axis=axis)


def spectral_derivative(values, axis: int, spacing: float, order: int = 1):
    """Exact derivative of the trigonometric interpolant along ``axis``."""
    values = np.asarray(values)
    n = values.shape[axis]
    k = 2 * math.pi * np.fft.fftfreq(n, spacing)
    if order % 2:
        k[n // 2] = 0.0
    shape = [1] * values.ndim
    shape[axis] = -1
    out = np.fft.ifft(np.fft.fft(values, axis=axis) * (1j * k.reshape(shape)) ** order, axis=axis)
    return out.real if np.isrealobj(values) else out


def fourier_upsample(values, axis: int, factor: int = 2):
    """Trigonometric interpolation onto a grid ``factor`` times finer."""
    values = np.asarray(values)
    n = values.shape[axis]
    spec = np.fft.fft(values, axis=axis)
    shape = list(values.shape)
    shape[axis] = n * factor
    big = np.zeros(shape, dtype=complex)

    def sl(a, b):
        s = [slice(None)] * values.ndim
        s[axis] = slice(a, b)
        return tuple(s)

    h = n // 2
    big[sl(0, h)] = spec[sl(0, h)]
    big[sl(n * factor - h + 1, n * factor)] = spec[sl(h + 1, n)]
    big[sl(h, h + 1)] = 0.5 * spec[sl(h, h + 1)]
    big[sl(n * factor - h, n * factor - h + 1)] = 0.5 * spec[sl(h, h + 1)]
    out = np.fft.ifft(big, axis=axis) * factor
    return out.real if np.isrealobj(values) else out


def _centered_dft(values, axis: int, sign: int):
    """sum_k f_k exp(sign * 2 pi i (j - n/2)(k - n/2) / n) for centered grids."""
    shifted = np.fft.ifftshift(values, axes=axis)
    out = np.fft.fft(shifted, axis=axis) if sign < 0 else np.fft.ifft(shifted, axis=axis) * values.shape[axis]
    return np.fft.fftshift(out, axes=axis)


# ---------------------------------------------------------------------------
# boundary diagnostics


def boundary_mass(density, grid: PhaseSpaceGrid, margin: float = BOUNDARY_MARGIN) -> float:
    """Fraction of |density| sitting in the outer ``margin`` of the box.

    Works for phase-space fields (n_x, n_p) and position fields (n_x,).
    """
    d = np.abs(np.asarray(density))
    total = d.sum()
    if total == 0:
        return 0.0
    x = grid.x
    mask_x = np.abs(x) >= 0.5 * grid.x_extent * (1 - 2 * margin)
    if d.ndim == 1:
        return float(d[mask_x].sum() / total)
    p = grid.p
    mask_p = np.abs(p) >= 0.5 * grid.p_extent * (1 - 2 * margin)
    mask = mask_x[:, None] | mask_p[None, :]
    return float(d[mask].sum() / total)


def check_boundary(density, grid: PhaseSpaceGrid, tol: float = BOUNDARY_TOL, what: str = "field") -> float:
    frac = boundary_mass(density, grid)
    if frac > tol:
        warnings.warn(
            f"{what}: {frac:.3g} of the mass lies in the boundary margin (limit {tol:g})",
            BoundaryMassWarning,
            stacklevel=3,
        )
    return frac


# ---------------------------------------------------------------------------
# containers


def _frozen(a, dtype=None):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_shape(values, shape):
    if values.shape != shape:
        raise GridError(f"field shape {values.shape} does not match grid shape {shape}")


@dataclass(frozen=True, eq=False)
class ClassicalWaveFunction:
    """Phase-space amplitude psi(x, p) with w = |psi|^2."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        v = _frozen(v, float if np.isrealobj(v) else complex)
        _check_shape(v, (self.grid.n_x, self.grid.n_p))
        object.__setattr__(self, "values", v)

    @property
    def real(self) -> bool:
        return np.isrealobj(self.values)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.weight)

    def normalize(self) -> "ClassicalWaveFunction":
        nrm = self.norm()
        if not np.isfinite(nrm) or nrm <= 0:
            raise ValidationError("cannot normalize a field with zero or non-finite norm")
        return ClassicalWaveFunction(self.grid, self.values / math.sqrt(nrm))

    def density(self) -> "PhaseSpaceDensity":
        return PhaseSpaceDensity(self.grid, np.abs(self.values) ** 2)

    def phase(self) -> np.ndarray:
        return np.angle(self.values)


@dataclass(frozen=True, eq=False)
class PhaseSpaceDensity:
    """Non-negative classical probability density w(x, p)."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        v = _frozen(np.real_if_close(np.asarray(self.values)), float)
        _check_shape(v, (self.grid.n_x, self.grid.n_p))
        if v.min() < -self.tol:
            raise ValidationError(f"density has negative values (min {v.min():.3g})")
        total = v.sum() * self.grid.weight
        if abs(total - 1) > self.tol:
            raise ValidationError(f"density integrates to {total:.12g}, expected 1")
        object.__setattr__(self, "values", v)

    @classmethod
    def normalized(cls, grid, values) -> "PhaseSpaceDensity":
        v = np.asarray(values, dtype=float)
        return cls(grid, v / (v.sum() * grid.weight))

    def amplitude(self) -> ClassicalWaveFunction:
        """Non-negative root psi = sqrt(w)."""
        return ClassicalWaveFunction(self.grid, np.sqrt(np.clip(self.values, 0, None)))


@dataclass(frozen=True, eq=False)
class WignerFunction:
    """Real quasi-probability rho_w(z, q) on a Wigner-compatible grid."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    tol: float = field(default=1e-8, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if np.iscomplexobj(v):
            if np.max(np.abs(v.imag), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(v))):
                raise ValidationError("Wigner function must be real")
            v = v.real
        v = _frozen(v, float)
        _check_shape(v, (self.grid.n_x, self.grid.n_p))
        total = v.sum() * self.grid.weight
        if self.tol is not None and abs(total - 1) > self.tol:
            raise ValidationError(f"Wigner function integrates to {total:.12g}, expected 1")
        object.__setattr__(self, "values", v)

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.weight)


@dataclass(frozen=True, eq=False)
class PositionWaveFunction:
    """Ordinary wave function phi(x) on the x-axis of ``grid``."""

    grid: PhaseSpaceGrid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values, complex)
        _check_shape(v, (self.grid.n_x,))
        object.__setattr__(self, "values", v)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    def normalize(self) -> "PositionWaveFunction":
        return PositionWaveFunction(self.grid, self.values / math.sqrt(self.norm()))

    def density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(self.grid, np.outer(self.values, self.values.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian kernel rho(x_i, y_j); as an operator it acts with weight dx."""

    grid: PhaseSpaceGrid
    values: np.ndarray
    tol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        v = _frozen(self.values, complex)
        _check_shape(v, (self.grid.n_x, self.grid.n_x))
        scale = max(1.0, float(np.max(np.abs(v))))
        if np.max(np.abs(v - v.conj().T)) > 1e-12 * scale:
            raise ValidationError("density matrix is not Hermitian")
        if self.tol is not None and abs(self.trace() - 1) > self.tol:
            raise ValidationError(f"density matrix trace {self.trace():.12g}, expected 1")
        object.__setattr__(self, "values", v)

    def trace(self) -> float:
        return float(np.real(np.trace(self.values)) * self.grid.dx)

    def purity(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx**2)

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.values * self.grid.dx)[::-1]


# ---------------------------------------------------------------------------
# transforms


def _relative_samples(rho: np.ndarray) -> np.ndarray:
    """R[a, k] = rho(z_a + r_k/2, z_a - r_k/2) with half-step midpoints interpolated."""
    n = rho.shape[0]
    fine = fourier_upsample(fourier_upsample(rho, 0), 1)
    a = np.arange(n)[:, None]
    m = np.arange(n)[None, :] - n // 2
    out = fine[(2 * a + m) % (2 * n), (2 * a - m) % (2 * n)]
    # r = -L/2 has no partner inside the window; use its symmetric part
    out[:, 0] = out[:, 0].real
    return out


def wigner_transform(rho: DensityMatrix) -> WignerFunction:
    """rho_w(z, q) = sum_r exp(-i q r) rho(z + r/2, z - r/2) dx."""
    grid = rho.grid
    grid.require_wigner_compatible()
    values = _centered_dft(_relative_samples(rho.values), axis=1, sign=-1) * grid.dx
    return WignerFunction(grid, values.real, tol=None)


def _kernel_from_phase_space(values: np.ndarray, grid: PhaseSpaceGrid) -> np.ndarray:
    """k(x, y) = sum_p exp(i p (x - y)) f((x + y)/2, p) dp / (2 pi)."""
    grid.require_wigner_compatible()
    n = grid.n_x
    rel = _centered_dft(np.asarray(values, dtype=float), axis=1, sign=+1) * (grid.dp / (2 * math.pi))
    rel = fourier_upsample(rel, 0)
    i = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    m = i - j
    j_eff = np.where(m >= n // 2, j + n, np.where(m < -(n // 2), j - n, j))
    m = i - j_eff
    kernel = rel[(i + j_eff) % (2 * n), m + n // 2]
    return 0.5 * (kernel + kernel.conj().T)


def inverse_wigner(rhow: WignerFunction) -> DensityMatrix:
    """rho(x, y) = sum_p exp(i p (x - y)) rho_w((x + y)/2, p) dp / (2 pi)."""
    return DensityMatrix(rhow.grid, _kernel_from_phase_space(rhow.values, rhow.grid), tol=None)


def marginals(field_) -> tuple[np.ndarray, np.ndarray]:
    """Position density (integrate dp/2pi) and momentum density (integrate dx).

    The momentum density is returned in the convention where
    ``sum(rho_p) * dp / (2 pi) = 1``.
    """
    grid = field_.grid
    v = np.asarray(field_.values)
    if isinstance(field_, ClassicalWaveFunction):
        v = np.abs(v) ** 2
    rho_x = v.sum(axis=1) * grid.dp / (2 * math.pi)
    rho_p = v.sum(axis=0) * grid.dx
    return rho_x, rho_p


def position_variance(field_) -> float:
    grid = field_.grid
    rho_x, _ = marginals(field_)
    x = grid.x
    total = rho_x.sum()
    mean = (x * rho_x).sum() / total
    return float(((x - mean) ** 2 * rho_x).sum() / total)


def momentum_variance(field_) -> float:
    grid = field_.grid
    _, rho_p = marginals(field_)
    p = grid.p
    total = rho_p.sum()
    mean = (p * rho_p).sum() / total
    return float(((p - mean) ** 2 * rho_p).sum() / total)


# ---------------------------------------------------------------------------
# serialization

_KINDS = {
    "wavefunction": ClassicalWaveFunction,
    "density": PhaseSpaceDensity,
    "wigner": WignerFunction,
    "density-matrix": DensityMatrix,
    "position": PositionWaveFunction,
}


def _kind_of(obj) -> str:
    for name, cls in _KINDS.items():
        if isinstance(obj, cls):
            return name
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_field(path, obj) -> None:
    """Columnar text: ``x p value`` (real), ``x p re im`` (complex) or ``x y re im``."""
    kind = _kind_of(obj)
    g = obj.grid
    v = np.asarray(obj.values)
    if kind == "density-matrix":
        a, b = np.meshgrid(g.x, g.x, indexing="ij")
    elif kind == "position":
        a, b = g.x, np.zeros(g.n_x)
    else:
        a, b = g.mesh()
    cols = [a.ravel(), b.ravel()]
    if np.iscomplexobj(v):
        cols += [v.real.ravel(), v.imag.ravel()]
    else:
        cols.append(v.ravel())
    np.savetxt(path, np.column_stack(cols), fmt="%.17g", header=g.header(kind)[2:], comments="# ")


def read_field(path):
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("# phaselab"):
        raise ValidationError(f"{path}: missing phaselab header")
    meta = dict(tok.split("=", 1) for tok in header.split()[2:])
    grid = PhaseSpaceGrid(
        int(meta["n_x"]), int(meta["n_p"]), float(meta["x_extent"]), float(meta["p_extent"]), float(meta["mass"])
    )
    kind = meta["kind"]
    data = np.loadtxt(path, ndmin=2)
    vals = data[:, 2] if data.shape[1] == 3 else data[:, 2] + 1j * data[:, 3]
    if kind == "density-matrix":
        return DensityMatrix(grid, vals.reshape(grid.n_x, grid.n_x), tol=None)
    if kind == "position":
        return PositionWaveFunction(grid, vals)
    vals = vals.reshape(grid.n_x, grid.n_p)
    if kind == "wigner":
        return WignerFunction(grid, vals, tol=None)
    if kind == "density":
        return PhaseSpaceDensity(grid, vals.real)
    return ClassicalWaveFunction(grid, vals)
