"""Expectation values on phase space: pointwise, statistical, quantum and ordered.

Position and momentum act on phase-space fields as

    X_Q = x + (i/2) d/dp,    P_Q = p - (i/2) d/dx,

both on a Wigner function (ordered correlators) and on a classical wave
function psi(x, p) (quantum expectations).  Operator polynomials are plain
dicts mapping token strings such as ``"PXPX"`` to coefficients; the rightmost
token acts first.
"""

from __future__ import annotations

import itertools
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import ndimage

from .grid import (
    BOUNDARY_TOL,
    ClassicalWaveFunction,
    PhaseSpaceDensity,
    PhaseSpaceGrid,
    ValidationError,
    WignerFunction,
    boundary_mass,
    spectral_derivative,
)
from .potentials import Potential

MAX_SEQUENCE = 8

# ---------------------------------------------------------------------------
# pointwise expectations


def _field(obj) -> tuple[PhaseSpaceGrid, np.ndarray]:
    if isinstance(obj, ClassicalWaveFunction):
        return obj.grid, np.abs(obj.values) ** 2
    return obj.grid, np.asarray(obj.values)


def classical_expectation(w, F: Callable) -> float:
    """sum F(x, p) w(x, p) dx dp / (2 pi) for a density, Wigner function or wave function."""
    g, v = _field(w)
    X, P = g.mesh()
    return float(np.sum(F(X, P) * v) * g.weight)


def symmetrized_expectation(rhow: WignerFunction, F: Callable) -> float:
    """Totally symmetrized operator expectation, i.e. the phase-space average of F."""
    return classical_expectation(rhow, F)


# ---------------------------------------------------------------------------
# operator polynomials


def as_polynomial(spec) -> dict[str, complex]:
    if isinstance(spec, str):
        spec = {spec: 1.0}
    out = {}
    for seq, c in spec.items():
        seq = seq.upper()
        if not seq or set(seq) - {"X", "P"}:
            raise ValueError(f"operator sequence {seq!r} must be a non-empty string over X and P")
        if len(seq) > MAX_SEQUENCE:
            raise ValueError(f"operator sequence {seq!r} longer than {MAX_SEQUENCE}")
        out[seq] = out.get(seq, 0) + c
    return out


def poly_mul(a, b) -> dict[str, complex]:
    out: dict[str, complex] = defaultdict(complex)
    for (sa, ca), (sb, cb) in itertools.product(as_polynomial(a).items(), as_polynomial(b).items()):
        out[sa + sb] += ca * cb
    return dict(out)


def poly_add(*polys, weights=None) -> dict[str, complex]:
    weights = weights or [1.0] * len(polys)
    out: dict[str, complex] = defaultdict(complex)
    for w, p in zip(weights, polys):
        for s, c in as_polynomial(p).items():
            out[s] += w * c
    return {s: c for s, c in out.items() if c != 0}


def commutator(a, b) -> dict[str, complex]:
    return poly_add(poly_mul(a, b), poly_mul(b, a), weights=[1, -1])


def anticommutator(a, b) -> dict[str, complex]:
    return poly_add(poly_mul(a, b), poly_mul(b, a))


def symmetrized_sequences(n_x: int, n_p: int) -> dict[str, complex]:
    """Equal-weight average of all distinct orderings of n_x X's and n_p P's."""
    seqs = {"".join(s) for s in itertools.permutations("X" * n_x + "P" * n_p)}
    return {s: 1.0 / len(seqs) for s in sorted(seqs)}


def _apply_token(values, grid: PhaseSpaceGrid, token: str):
    X, P = grid.mesh()
    if token == "X":
        return X * values + 0.5j * spectral_derivative(values, 1, grid.dp)
    return P * values - 0.5j * spectral_derivative(values, 0, grid.dx)


def apply_polynomial(values, grid: PhaseSpaceGrid, poly) -> np.ndarray:
    """Act with a polynomial in (X_Q, P_Q) on a phase-space field, rightmost token first."""
    values = np.asarray(values, dtype=complex)
    out = np.zeros_like(values)
    cache = {"": values}
    for seq, c in sorted(as_polynomial(poly).items(), key=lambda kv: len(kv[0])):
        # reuse the longest already computed suffix
        for cut in range(len(seq) + 1):
            if seq[cut:] in cache:
                break
        v = cache[seq[cut:]]
        for k in range(cut - 1, -1, -1):
            v = _apply_token(v, grid, seq[k])
            cache[seq[k:]] = v
        out += c * v
    return out


def _require_boundary(values, grid, tol=BOUNDARY_TOL):
    frac = boundary_mass(values, grid)
    if frac > tol:
        raise ValidationError(
            f"{frac:.3g} of the field lies in the boundary margin; derivative terms would not integrate to zero"
        )


def ordered_correlator(rhow: WignerFunction, seq, check_boundary: bool = True) -> complex:
    """<S[X, P]> = integral of S[X_Q, P_Q] rho_w, with the first measurement on the right."""
    g = rhow.grid
    if check_boundary:
        _require_boundary(rhow.values, g)
    return complex(np.sum(apply_polynomial(rhow.values, g, seq)) * g.weight)


def symmetrized_correlator(rhow: WignerFunction, n_x: int, n_p: int) -> complex:
    return ordered_correlator(rhow, symmetrized_sequences(n_x, n_p))


def ordering_combination() -> dict[str, complex]:
    """PXPX + XPXP - XXPP - PPXX; in operator algebra this equals -[X, P]^2 = 1."""
    return {"PXPX": 1, "XPXP": 1, "XXPP": -1, "PPXX": -1}


def correlator_table(rhow: WignerFunction, sequences) -> list[tuple[str, complex]]:
    return [(s if isinstance(s, str) else format_polynomial(s), ordered_correlator(rhow, s)) for s in sequences]


def format_polynomial(poly) -> str:
    return " + ".join(f"({c:g}){s}" for s, c in as_polynomial(poly).items())


def format_table(rows) -> str:
    lines = []
    for seq, val in rows:
        val = complex(val)
        lines.append(f"{seq}\t{val.real:.12g}{val.imag:+.12g}i")
    return "\n".join(lines)


def quantum_expectation(psi: ClassicalWaveFunction, F) -> complex:
    """<psi| F(X_Q, P_Q) |psi> with X_Q = X_cl + X_s / 2 and P_Q = P_cl + P_s / 2."""
    g = psi.grid
    return complex(np.sum(np.conj(psi.values) * apply_polynomial(psi.values, g, F)) * g.weight)


def operator_commutator_residual(psi: ClassicalWaveFunction) -> float:
    """max |[X_Q, P_Q] psi - i psi| over the grid."""
    v = apply_polynomial(psi.values, psi.grid, commutator("X", "P"))
    return float(np.max(np.abs(v - 1j * np.asarray(psi.values))))


# ---------------------------------------------------------------------------
# statistical observables X_s = i d/dp, P_s = -i d/dx


@dataclass
class StatisticalMoments:
    x_s: float
    p_s: float
    x_s2: float
    p_s2: float
    x_s2_log: float | None
    p_s2_log: float | None
    g_table: dict


def statistical_moments(psi: ClassicalWaveFunction, max_order: int = 4, log_floor: float = 1e-10) -> StatisticalMoments:
    """Moments of X_s and P_s, all computed from derivatives of psi.

    The log-derivative forms 1/4 int w (d ln w)^2 are evaluated where
    w > ``log_floor`` max w and only for fields without sign changes; for
    fields with zeros inside the support they are reported as None.
    """
    g = psi.grid
    v = np.asarray(psi.values)
    if np.iscomplexobj(v):
        warnings.warn("statistical_moments uses |psi| for a complex wave function", stacklevel=2)
        v = np.abs(v)
    dx_psi = spectral_derivative(v, 0, g.dx)
    dp_psi = spectral_derivative(v, 1, g.dp)
    wt = g.weight
    x_s = float(np.sum(v * dp_psi) * wt)  # <X_s> = i int psi d_p psi, imaginary part of a real number
    p_s = float(np.sum(v * dx_psi) * wt)
    x_s2 = float(np.sum(dp_psi**2) * wt)
    p_s2 = float(np.sum(dx_psi**2) * wt)
    x_log = p_log = None
    if v.min() >= -1e-8 * np.abs(v).max():
        w = v**2
        keep = w > log_floor * w.max()
        dxw = spectral_derivative(w, 0, g.dx)
        dpw = spectral_derivative(w, 1, g.dp)
        p_log = float(0.25 * np.sum(dxw[keep] ** 2 / w[keep]) * wt)
        x_log = float(0.25 * np.sum(dpw[keep] ** 2 / w[keep]) * wt)
    table = {}
    for n in range(max_order + 1):
        d = spectral_derivative(v, 1, g.dp, n) if n else v
        for m in range(max_order + 1 - n):
            if n == m == 0:
                continue
            dd = spectral_derivative(d, 0, g.dx, m) if m else d
            table[(n, m)] = complex((1j) ** n * (-1j) ** m * np.sum(v * dd) * wt)
    return StatisticalMoments(x_s, p_s, x_s2, p_s2, x_log, p_log, table)


def hl_expectation(psi: ClassicalWaveFunction, V: Potential) -> float:
    """<H_L> with H_L = -i (p/m) d/dx + i V'(x) d/dp; zero for every real psi."""
    g = psi.grid
    v = np.asarray(psi.values, dtype=complex)
    X, P = g.mesh()
    hv = -1j * (P / g.mass) * spectral_derivative(v, 0, g.dx) + 1j * V.dV(X) * spectral_derivative(v, 1, g.dp)
    return float(np.real(np.sum(np.conj(v) * hv) * g.weight))


def hl_from_phase(psi: ClassicalWaveFunction, V: Potential) -> float:
    """<H_L> = int w ((p/m) d_x alpha - V' d_p alpha) with alpha the phase of psi."""
    g = psi.grid
    v = np.asarray(psi.values, dtype=complex)
    w = np.abs(v) ** 2
    # gradient of the phase via Im(conj(psi) grad psi) / w, which avoids unwrapping
    with np.errstate(invalid="ignore", divide="ignore"):
        ax = np.where(w > 0, np.imag(np.conj(v) * spectral_derivative(v, 0, g.dx)) / w, 0.0)
        ap = np.where(w > 0, np.imag(np.conj(v) * spectral_derivative(v, 1, g.dp)) / w, 0.0)
    X, P = g.mesh()
    return float(np.sum(w * (P / g.mass * ax - V.dV(X) * ap)) * g.weight)


# ---------------------------------------------------------------------------
# sign reconstruction psi = s sqrt(w)

NODAL_THRESHOLD = 1e-12
CONFLICT_CONFIDENCE = 0.9
MAX_NODAL_GAP = 3


@dataclass(frozen=True, eq=False)
class SignField:
    """Sign s(x, p) plus the nodal-domain labelling it was built from."""

    values: np.ndarray  # int8, +1 / -1 (nodal points carry the sign of a neighbour domain)
    nodal: np.ndarray  # bool mask of points with w below the threshold
    labels: np.ndarray  # nodal-domain label per point, 0 on the nodal set
    n_domains: int
    conflicts: int
    significant_conflicts: int
    ambiguous: bool


def _third_difference_cost(u: np.ndarray) -> np.ndarray:
    d3 = u[..., 3:] - 3 * u[..., 2:-1] + 3 * u[..., 1:-2] - u[..., :-3]
    return np.sum(d3**2, axis=-1)


def _line_edges(a: np.ndarray, nodal: np.ndarray, chunk: int = 4096):
    """Flip decisions between consecutive non-nodal points along the last axis.

    The window spans two extra points on each side of the pair.  Every sign
    pattern of the window is scored by the squared third differences of
    s sqrt(w); the decision is the relation between the pair in the best
    pattern and the margin is the cost gap to the best pattern deciding the
    other way.  Letting the outer points choose their own signs keeps a kink
    elsewhere in the window from biasing the central edge.  Returns arrays (row, i, j, flip, margin, confidence).
    """
    rows, n = a.shape
    pad = np.pad(a, ((0, 0), (2, MAX_NODAL_GAP + 3)))
    out = []
    for gap in range(MAX_NODAL_GAP + 1):
        r, i = np.nonzero(~nodal[:, : n - gap - 1])
        j = i + gap + 1
        ok = ~nodal[r, j]
        for g in range(1, gap + 1):
            ok &= nodal[r, i + g]
        r, i, j = r[ok], i[ok], j[ok]
        if not len(r):
            continue
        width = gap + 6
        patterns = 1 - 2 * ((np.arange(2 ** (width - 1))[:, None] >> np.arange(width - 1)) & 1)
        patterns = np.hstack([np.ones((len(patterns), 1), int), patterns])  # (K, width)
        flips = patterns[:, 2] != patterns[:, gap + 3]
        for start in range(0, len(r), chunk):
            rr, ii, jj = r[start : start + chunk], i[start : start + chunk], j[start : start + chunk]
            idx = ii[:, None] + np.arange(width)[None, :]  # padded index of i - 2 .. j + 2
            u = pad[rr[:, None], idx]
            cost = _third_difference_cost(u[:, None, :] * patterns[None, :, :])  # (E, K)
            keep = cost[:, ~flips].min(axis=1)
            flip = cost[:, flips].min(axis=1)
            decision = flip < keep
            margin = np.abs(keep - flip)
            conf = margin / np.maximum(keep + flip, np.finfo(float).tiny)
            out.append((rr, ii, jj, decision, margin, conf))
    if not out:
        e = np.zeros(0, int)
        return e, e, e, np.zeros(0, bool), np.zeros(0), np.zeros(0)
    return tuple(np.concatenate(c) for c in zip(*out))


class _ParityUnionFind:
    def __init__(self, n):
        self.parent = np.arange(n)
        self.parity = np.zeros(n, dtype=np.int8)  # parity relative to parent

    def find(self, a):
        path = []
        while self.parent[a] != a:
            path.append(a)
            a = self.parent[a]
        root = a
        # compress, accumulating parity from the top
        acc = 0
        for node in reversed(path):
            acc ^= int(self.parity[node])
            self.parity[node] = acc
            self.parent[node] = root
        return root

    def parity_of(self, a):
        self.find(a)
        return int(self.parity[a]) if self.parent[a] != a else 0

    def union(self, a, b, rel) -> bool:
        """Impose parity(a) xor parity(b) = rel; False if it contradicts earlier edges."""
        ra, rb = self.find(a), self.find(b)
        pa, pb = self.parity_of(a), self.parity_of(b)
        if ra == rb:
            return (pa ^ pb) == rel
        self.parent[rb] = ra
        self.parity[rb] = pa ^ pb ^ rel
        return True


def sign_reconstruct(w, threshold: float = NODAL_THRESHOLD) -> tuple[SignField, ClassicalWaveFunction]:
    """Choose s(x, p) so that psi = s sqrt(w) is as smooth as possible.

    Across every grid edge the sign is kept or flipped, whichever gives the
    smaller third differences of s sqrt(w) on a six-point stencil: a simple
    zero of psi makes sqrt(w) kink and is undone by a flip, a double zero
    stays smooth without one.  Edge decisions are merged into a consistent
    sign pattern, most confident first; confident decisions that contradict the
    pattern make the topology ambiguous, in which case s = +1 is used.  The
    domain holding the largest w is positive.
    """
    if isinstance(w, PhaseSpaceDensity):
        g, vals = w.grid, np.asarray(w.values)
    else:
        g, vals = w.grid, np.asarray(w.values, dtype=float)
    a = np.sqrt(np.clip(vals, 0, None))
    nodal = vals <= threshold * vals.max()
    n_x, n_p = vals.shape
    flat = np.arange(n_x * n_p).reshape(n_x, n_p)

    edges = []
    r, i, j, flip, margin, conf = _line_edges(a, nodal)  # along p
    edges.append((flat[r, i], flat[r, j], flip, margin, conf))
    r, i, j, flip, margin, conf = _line_edges(a.T, nodal.T)  # along x
    edges.append((flat[i, r], flat[j, r], flip, margin, conf))
    u, v, flip, margin, conf = (np.concatenate(c) for c in zip(*edges))

    uf = _ParityUnionFind(n_x * n_p)
    conflicts = significant = 0
    for k in np.lexsort((-margin, -conf)):
        if not uf.union(int(u[k]), int(v[k]), int(flip[k])):
            conflicts += 1
            if conf[k] > CONFLICT_CONFIDENCE:
                significant += 1
    roots = np.array([uf.find(q) for q in range(n_x * n_p)])
    parity = np.array([uf.parity_of(q) for q in range(n_x * n_p)])
    sign = np.where(parity == 0, 1, -1).reshape(n_x, n_p)
    # orient each connected component so that its largest-w point is positive
    roots = roots.reshape(n_x, n_p)
    for root in np.unique(roots[~nodal]):
        comp = roots == root
        peak = np.unravel_index(np.argmax(np.where(comp, vals, -np.inf)), vals.shape)
        if sign[peak] < 0:
            sign[comp] *= -1
    ambiguous = significant > 0
    if ambiguous:
        warnings.warn(
            f"sign reconstruction found {significant} confident contradictions; using s = +1",
            RuntimeWarning,
            stacklevel=2,
        )
        sign = np.ones_like(sign)
    sign = sign.astype(np.int8)
    pos, n_pos = ndimage.label((sign > 0) & ~nodal)
    neg, n_neg = ndimage.label((sign < 0) & ~nodal)
    labels = np.where(neg > 0, neg + n_pos, pos)
    field_ = SignField(sign, nodal, labels, n_pos + n_neg, conflicts, significant, ambiguous)
    return field_, ClassicalWaveFunction(g, sign * a)
