"""Admissibility of phase-space functions as classical and as quantum states.

A real function f(x, p) is a valid classical state when it is a probability
density (f >= 0).  It is a valid quantum state when the kernel

    w~(x, y) = sum_p exp(i p (x - y)) f((x + y)/2, p) dp / (2 pi)

is a positive operator, i.e. f is the Wigner function of a density matrix.
The two flags are independent, so a function can be both, either or neither.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid import (
    ClassicalWaveFunction,
    DensityMatrix,
    PhaseSpaceGrid,
    PositionWaveFunction,
    ValidationError,
    WignerFunction,
    _kernel_from_phase_space,
    momentum_variance,
    position_variance,
    wigner_transform,
)

CLASSICAL_TOL = 1e-10
QUANTUM_TOL = 1e-8
PURITY_TOL = 1e-8
HEISENBERG_TOL = 1e-8
FOLDING_TOL = 1e-6
MARGINAL_BAND = 1e-6


def _field(f1) -> tuple[PhaseSpaceGrid, np.ndarray]:
    if isinstance(f1, ClassicalWaveFunction):
        return f1.grid, np.abs(f1.values) ** 2
    return f1.grid, np.asarray(f1.values, dtype=float)


@dataclass(frozen=True)
class _Field:
    grid: PhaseSpaceGrid
    values: np.ndarray


# ---------------------------------------------------------------------------
# individual checks


def purity_check(f1, tol: float = PURITY_TOL) -> tuple[float, bool]:
    """Return (integral of f1^2 over dx dp / 2 pi, purity <= 1 + tol)."""
    g, v = _field(f1)
    purity = float(np.sum(v**2) * g.weight)
    return purity, purity <= 1 + tol


@dataclass(frozen=True)
class PositivityReport:
    eigenvalues: np.ndarray  # descending
    quantum_valid: bool
    trace: float
    min_diagonal: float
    kernel: np.ndarray  # w~(x_i, y_j); acts as an operator with weight dx

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def diagonal_ok(self) -> bool:
        """Non-negative diagonal and unit trace."""
        return self.min_diagonal >= -QUANTUM_TOL and abs(self.trace - 1) <= 1e-8


def positivity_matrix(f1, tol: float = QUANTUM_TOL) -> PositivityReport:
    """Build w~ from f1 and decide positivity from its spectrum."""
    g, v = _field(f1)
    kernel = _kernel_from_phase_space(v, g)
    eig = np.linalg.eigvalsh(kernel * g.dx)[::-1]
    diag = np.real(np.diag(kernel))
    return PositivityReport(
        eigenvalues=eig,
        quantum_valid=bool(eig[-1] >= -tol),
        trace=float(diag.sum() * g.dx),
        min_diagonal=float(diag.min()),
        kernel=kernel,
    )


@dataclass(frozen=True)
class FoldingReport:
    residual: float  # Hilbert-Schmidt norm of w~^2 - w~
    passed: bool
    state: PositionWaveFunction | None
    trace: float


def folding_check(f1, tol: float = FOLDING_TOL) -> FoldingReport:
    """Test the pure-state property w~^2 = w~ and extract phi_Q when it holds.

    The recovered wave function is the dominant eigenvector of w~, normalised
    and with its global phase chosen so that the largest entry is real.
    """
    pos = positivity_matrix(f1)
    if not pos.quantum_valid:
        raise ValidationError(f"not a valid quantum state (min eigenvalue {pos.min_eigenvalue:.3g})")
    g, _ = _field(f1)
    A = pos.kernel * g.dx
    residual = float(np.linalg.norm(A @ A - A))
    state = None
    if residual <= tol:
        vals, vecs = np.linalg.eigh(A)
        phi = vecs[:, -1]
        k = np.argmax(np.abs(phi))
        phi = phi * np.exp(-1j * np.angle(phi[k])) / math.sqrt(g.dx)
        state = PositionWaveFunction(g, phi)
    return FoldingReport(residual, residual <= tol, state, pos.trace)


@dataclass(frozen=True)
class HeisenbergReport:
    var_x: float
    var_p: float
    product: float
    passed: bool


def heisenberg_check(f1, tol: float = HEISENBERG_TOL) -> HeisenbergReport:
    """Marginal variances and the test Var(X) Var(P) >= 1/4."""
    g, v = _field(f1)
    field_ = _Field(g, v)
    vx, vp = position_variance(field_), momentum_variance(field_)
    return HeisenbergReport(vx, vp, vx * vp, vx * vp >= 0.25 - tol)


# ---------------------------------------------------------------------------
# classification

LABELS = {
    (True, True): "both",
    (True, False): "classical-only",
    (False, True): "quantum-only",
    (False, False): "neither",
}


@dataclass(frozen=True)
class StateClassification:
    classical_valid: bool
    quantum_valid: bool
    purity: float
    min_wigner: float
    min_eigenvalue: float
    classical_marginal: bool = False
    quantum_marginal: bool = False

    @property
    def label(self) -> str:
        text = LABELS[(self.classical_valid, self.quantum_valid)]
        marginal = [name for name, m in (("classical", self.classical_marginal), ("quantum", self.quantum_marginal)) if m]
        if marginal:
            text += " (marginal: " + ", ".join(marginal) + ")"
        return text

    def report(self) -> str:
        """``key = value`` lines, one per field, followed by the label."""
        rows = [
            ("classical_valid", str(self.classical_valid).lower()),
            ("quantum_valid", str(self.quantum_valid).lower()),
            ("purity", repr(self.purity)),
            ("min_wigner", repr(self.min_wigner)),
            ("min_eigenvalue", repr(self.min_eigenvalue)),
            ("classical_marginal", str(self.classical_marginal).lower()),
            ("quantum_marginal", str(self.quantum_marginal).lower()),
            ("label", self.label),
        ]
        return "\n".join(f"{k} = {v}" for k, v in rows) + "\n"


def parse_report(text: str) -> dict[str, object]:
    """Inverse of :meth:`StateClassification.report`."""
    out: dict[str, object] = {}
    for line in text.splitlines():
        if "=" not in line:
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if value in ("true", "false"):
            out[key] = value == "true"
        else:
            try:
                out[key] = float(value)
            except ValueError:
                out[key] = value
    return out


def _near_miss(value: float, tol: float, band: float) -> bool:
    """A failing value that misses the threshold by less than the band."""
    return -band <= value < -tol


def classify(f1, classical_tol: float = CLASSICAL_TOL, quantum_tol: float = QUANTUM_TOL, band: float = MARGINAL_BAND) -> StateClassification:
    """Decide classical and quantum admissibility of f1.

    Failures within ``band`` of the threshold are flagged as marginal, since
    eigenvalues and minima that close to zero depend on the grid resolution.
    """
    g, v = _field(f1)
    min_w = float(v.min())
    pos = positivity_matrix(f1, quantum_tol)
    purity, _ = purity_check(f1)
    return StateClassification(
        classical_valid=min_w >= -classical_tol,
        quantum_valid=pos.quantum_valid,
        purity=purity,
        min_wigner=min_w,
        min_eigenvalue=pos.min_eigenvalue,
        classical_marginal=_near_miss(min_w, classical_tol, band),
        quantum_marginal=_near_miss(pos.min_eigenvalue, quantum_tol, band),
    )


# ---------------------------------------------------------------------------
# test families


def gaussian_field(grid: PhaseSpaceGrid, dx_width: float, dp_width: float, x0: float = 0.0, p0: float = 0.0) -> np.ndarray:
    """Normalised Gaussian phase-space density with the given widths."""
    x, p = grid.mesh()
    v = np.exp(-((x - x0) ** 2) / (2 * dx_width**2) - (p - p0) ** 2 / (2 * dp_width**2))
    return v / (v.sum() * grid.weight)


def neither_state(grid: PhaseSpaceGrid, eps: float = 0.05, omega: float = 1.0) -> WignerFunction:
    """Synthetic state that is neither classically nor quantum admissible.

    The first excited oscillator level has a negative Wigner function.
    Subtracting a small multiple of the ground-state Gaussian keeps the
    negativity and adds the eigenvalue -eps/(1 - eps) to the kernel.
    """
    from .quantum import hermite_state

    w1 = wigner_transform(hermite_state(grid, 1, grid.mass, omega).normalize().density_matrix()).values
    w0 = wigner_transform(hermite_state(grid, 0, grid.mass, omega).normalize().density_matrix()).values
    return WignerFunction(grid, (w1 - eps * w0) / (1 - eps))


def random_density_matrix(grid: PhaseSpaceGrid, rng: np.random.Generator, rank: int = 3, packets: int = 3) -> DensityMatrix:
    """Seeded random mixed state built from superpositions of Gaussian packets.

    Coherences rho(x, y) must die out before |x - y| reaches half the box,
    because that is the range of the relative coordinate on the grid.  The
    packet centres are therefore kept within a tenth of the box in both x and p, which on
    grids with n >= 128 keeps every state smooth, band-limited and vanishing
    at the boundary to below 1e-8.
    """
    x = grid.x
    vecs = []
    for _ in range(rank):
        phi = np.zeros(grid.n_x, complex)
        for _ in range(packets):
            x0 = rng.uniform(-grid.x_extent / 20, grid.x_extent / 20)
            p0 = rng.uniform(-grid.p_extent / 20, grid.p_extent / 20)
            width = rng.uniform(0.7, 1.0)
            c = rng.normal() + 1j * rng.normal()
            phi += c * np.exp(-((x - x0) ** 2) / (4 * width**2) + 1j * p0 * x)
        vecs.append(phi / math.sqrt(np.sum(np.abs(phi) ** 2) * grid.dx))
    weights = rng.dirichlet(np.ones(rank))
    rho = sum(wt * np.outer(v, v.conj()) for wt, v in zip(weights, vecs))
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(grid, rho / (np.real(np.trace(rho)) * grid.dx))
