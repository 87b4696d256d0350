"""Exact finite-dimensional particles built from Q bits (M = 2^Q states).

Generators are Pauli strings, stored as monomial matrices: string k sends
basis state b to b XOR flip[k] with phase phase[k, b].  The first tensor
factor acts on the most significant bit, so ``np.kron(first, second)``
reproduces the dense matrix.  For Q = 2 the generators carry the fixed
labels L_1 ... L_15 used throughout the package; ``GeneratorBasis.label``
describes each one.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

PAULI = {
    "1": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# (sign, letters) for L_1 ... L_15; letters name tau_1 = x, tau_2 = y, tau_3 = z.
TWO_BIT_LABELS = (
    (1, "z1"), (1, "1z"), (1, "zz"),
    (1, "1x"), (1, "1y"), (1, "zx"), (1, "zy"),
    (1, "x1"), (1, "y1"), (1, "xz"), (1, "yz"),
    (1, "xx"), (1, "xy"), (-1, "yy"), (1, "yx"),
)
ONE_BIT_LABELS = ((1, "z"), (-1, "y"), (1, "x"))

MAX_Q = 6
DENSE_LIMIT = 256  # total generator matrices materialized at once


def _string_action(letters: str):
    """Flip mask and per-basis-state phase of a Pauli string."""
    Q = len(letters)
    b = np.arange(2**Q)
    flip = 0
    phase = np.ones(2**Q, dtype=complex)
    for q, c in enumerate(letters):
        shift = Q - 1 - q
        bit = (b >> shift) & 1
        if c in "xy":
            flip |= 1 << shift
        if c == "z":
            phase *= 1 - 2 * bit
        elif c == "y":
            # y|0> = i|1>, y|1> = -i|0>
            phase *= 1j * (1 - 2 * bit)
    return flip, phase


def _default_labels(Q: int):
    if Q == 1:
        return ONE_BIT_LABELS
    if Q == 2:
        return TWO_BIT_LABELS
    strings = ["".join(s) for s in itertools.product("1zxy", repeat=Q)][1:]
    diagonal = [s for s in strings if set(s) <= {"1", "z"}]
    rest = [s for s in strings if not set(s) <= {"1", "z"}]
    return tuple((1, s) for s in diagonal + rest)


@dataclass(frozen=True, eq=False)
class GeneratorBasis:
    """M^2 - 1 Hermitian, traceless, involutive M x M generators with tr(L_k L_l) = M delta_kl."""

    Q: int
    labels: tuple
    flip: np.ndarray  # (K,) int
    phase: np.ndarray  # (K, M) complex, sign included

    @property
    def M(self) -> int:
        return 2**self.Q

    def __len__(self) -> int:
        return len(self.labels)

    def label(self, k: int) -> str:
        """Readable name of generator k (1-based), e.g. ``-y(x)y``."""
        sign, letters = self.labels[k - 1]
        name = "(x)".join({"1": "1", "x": "t1", "y": "t2", "z": "t3"}[c] for c in letters)
        return ("-" if sign < 0 else "") + name

    def index(self, letters: str) -> tuple[int, int]:
        """1-based index and sign of the generator equal to +-(Pauli string ``letters``)."""
        for k, (sign, s) in enumerate(self.labels, start=1):
            if s == letters:
                return k, sign
        raise KeyError(letters)

    def matrix(self, k: int) -> np.ndarray:
        """Dense matrix of generator k (1-based)."""
        M = self.M
        out = np.zeros((M, M), dtype=complex)
        b = np.arange(M)
        out[b ^ self.flip[k - 1], b] = self.phase[k - 1]
        return out

    def matrices(self) -> np.ndarray:
        if len(self) > DENSE_LIMIT:
            raise MemoryError(f"{len(self)} dense generators exceed the limit {DENSE_LIMIT}; use matrix(k)")
        return np.stack([self.matrix(k) for k in range(1, len(self) + 1)])

    def expand(self, coeffs) -> np.ndarray:
        """sum_k c_k L_k as a dense matrix."""
        coeffs = np.asarray(coeffs, dtype=float)
        M = self.M
        out = np.zeros((M, M), dtype=complex)
        b = np.arange(M)
        rows = (b[None, :] ^ self.flip[:, None]).ravel()
        cols = np.broadcast_to(b, self.phase.shape).ravel()
        np.add.at(out, (rows, cols), (coeffs[:, None] * self.phase).ravel())
        return out

    def expectations(self, rho: np.ndarray) -> np.ndarray:
        """rho_k = tr(rho L_k) for all k."""
        b = np.arange(self.M)
        vals = np.einsum("kb,kb->k", self.phase, rho[b[None, :], b[None, :] ^ self.flip[:, None]])
        return vals.real

    def check(self, atol: float = 1e-12, sample: int | None = None, seed: int = 0) -> dict:
        """Verify trace, Hermiticity, involution and orthonormality (on a sample for large Q)."""
        K = len(self)
        ks = np.arange(1, K + 1)
        if sample is not None and sample < K:
            ks = np.sort(np.random.default_rng(seed).choice(ks, sample, replace=False))
        M = self.M
        worst = {"trace": 0.0, "hermitian": 0.0, "square": 0.0, "orthonormal": 0.0}
        mats = {k: self.matrix(k) for k in ks}
        eye = np.eye(M)
        for k, A in mats.items():
            worst["trace"] = max(worst["trace"], abs(np.trace(A)))
            worst["hermitian"] = max(worst["hermitian"], np.abs(A - A.conj().T).max())
            worst["square"] = max(worst["square"], np.abs(A @ A - eye).max())
        for k, l in itertools.combinations(ks, 2):
            worst["orthonormal"] = max(worst["orthonormal"], abs(np.trace(mats[k] @ mats[l])))
        worst["passed"] = all(v <= atol for v in worst.values())
        return worst


def build_generators(Q: int) -> GeneratorBasis:
    if not (isinstance(Q, (int, np.integer)) and 1 <= Q <= MAX_Q):
        raise ValueError(f"Q must be an integer in [1, {MAX_Q}], got {Q!r}")
    labels = _default_labels(int(Q))
    flips, phases = [], []
    for sign, letters in labels:
        f, ph = _string_action(letters)
        flips.append(f)
        phases.append(sign * ph)
    return GeneratorBasis(int(Q), labels, np.array(flips), np.array(phases))


def pauli_string(letters: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for c in letters:
        out = np.kron(out, PAULI[c])
    return out


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True, eq=False)
class FiniteState:
    """Expectation vector rho_k and the density matrix (1 + rho_k L_k) / M."""

    basis: GeneratorBasis
    rho_k: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @property
    def purity(self) -> float:
        return float(np.sum(self.rho_k**2))

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    @property
    def positive(self) -> bool:
        return bool(self.eigenvalues.min() >= -1e-12)

    def expectation(self, A: np.ndarray) -> float:
        return float(np.real(np.trace(self.matrix @ A)))


def state_from_expectations(rho_k, basis: GeneratorBasis) -> FiniteState:
    rho_k = np.asarray(rho_k, dtype=float)
    if rho_k.shape != (len(basis),):
        raise ValueError(f"need {len(basis)} expectation values, got shape {rho_k.shape}")
    if np.any(np.abs(rho_k) > 1 + 1e-12):
        raise ValueError("each expectation value of a two-level observable must lie in [-1, 1]")
    M = basis.M
    rho = (np.eye(M) + basis.expand(rho_k)) / M
    return FiniteState(basis, rho_k, rho)


def state_from_vector(psi, basis: GeneratorBasis) -> FiniteState:
    """Pure state rho = psi psi^dagger; then P = M - 1."""
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    rho = np.outer(psi, psi.conj())
    return FiniteState(basis, basis.expectations(rho), rho)


# ---------------------------------------------------------------------------
# location, momentum, angular momentum


def _check_M(M: int):
    if M < 2 or M & (M - 1):
        raise ValueError(f"M must be a power of two >= 2, got {M}")


def occupation_operators(M: int) -> np.ndarray:
    """Projectors N^(alpha) onto basis state alpha, stacked as (M, M, M)."""
    _check_M(M)
    out = np.zeros((M, M, M))
    a = np.arange(M)
    out[a, a, a] = 1.0
    return out


def occupation_expansion(basis: GeneratorBasis) -> np.ndarray:
    """Coefficients c[alpha, k] with N^(alpha) = (1 + sum_k c[alpha, k] L_k) / M."""
    M = basis.M
    b = np.arange(M)
    diag = np.where(basis.flip[:, None] == 0, basis.phase, 0.0)  # (L_k)_{alpha alpha}
    return np.real(diag.T[b])


def locations(M: int) -> np.ndarray:
    """Cell centres x(alpha) = (M + 1 - 2 alpha) pi / M for alpha = 1..M."""
    _check_M(M)
    alpha = np.arange(1, M + 1)
    return (M + 1 - 2 * alpha) * math.pi / M


def location_operator(M: int) -> np.ndarray:
    return np.diag(locations(M)).astype(complex)


def angular_momentum_operator(M: int, improved: bool = False) -> np.ndarray:
    """Nearest-neighbour angular momentum on the ring, or its doubler-free spectral version.

    The plain operator has (M)_{alpha, alpha+1} = i / N and (M)_{alpha+1, alpha} = -i / N
    with N = 2 sin(2 pi / M).  For M = 2 both links join the same pair and
    cancel, so the one-bit case uses the limiting form -tau_2.
    """
    _check_M(M)
    if improved:
        m = momentum_labels(M)
        vals = np.where(np.abs(m) < M / 2, m, 0).astype(float)
        U = angular_momentum_eigenstates(M)
        return (U * vals) @ U.conj().T
    if M == 2:
        return -PAULI["y"].copy()
    out = np.zeros((M, M), dtype=complex)
    a = np.arange(M)
    norm = 2 * math.sin(2 * math.pi / M)
    out[a, (a + 1) % M] = 1j / norm
    out[(a + 1) % M, a] = -1j / norm
    return out


def momentum_labels(M: int) -> np.ndarray:
    """m = -M/2 + 1, ..., M/2."""
    return np.arange(-M // 2 + 1, M // 2 + 1)


def angular_momentum_eigenstates(M: int) -> np.ndarray:
    """Columns exp(i m x(alpha)) / sqrt(M), unit-normalized, ordered as ``momentum_labels``."""
    x = locations(M)
    m = momentum_labels(M)
    return np.exp(1j * np.outer(x, m)) / math.sqrt(M)


def angular_momentum_spectrum(M: int) -> np.ndarray:
    """Plain-operator eigenvalue sin(2 pi m / M) / sin(2 pi / M) for each label m."""
    m = momentum_labels(M)
    if M == 2:
        return np.array([-1.0, 1.0])  # -tau_2, eigenvectors (1, -+i) / sqrt(2) rather than plane waves
    return np.sin(2 * math.pi * m / M) / math.sin(2 * math.pi / M)


def classical_operators(Q: int) -> tuple[np.ndarray, np.ndarray]:
    """X_cl = X_sqrtM (x) 1 and P_cl = 1 (x) P_sqrtM on Q/2 + Q/2 bits.

    X_sqrtM is the location operator and P_sqrtM the plain angular momentum
    on sqrt(M) cells.  For Q = 2 this gives X_cl = (pi/2) L_1 and P_cl = -L_5.
    """
    if Q % 2 or not 2 <= Q <= MAX_Q:
        raise ValueError(f"classical operators need an even Q in [2, {MAX_Q}], got {Q}")
    r = 2 ** (Q // 2)
    eye = np.eye(r)
    return np.kron(location_operator(r), eye), np.kron(eye, angular_momentum_operator(r))


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return A @ B - B @ A


# ---------------------------------------------------------------------------
# classical ensembles

ENUMERATE_LIMIT = 15  # signs; 2^15 sequences


def _signs(K: int) -> np.ndarray:
    """All sign sequences of length K, first index most significant, +1 first."""
    idx = np.arange(2**K)[:, None]
    bits = (idx >> np.arange(K - 1, -1, -1)) & 1
    return 1 - 2 * bits


@dataclass(frozen=True, eq=False)
class EnsembleDistribution:
    """Probabilities over sign sequences {sigma_k}: a product part plus an environment part.

    p(sigma) = [p_S(sigma_S) + delta(sigma_S)] p_R(sigma_R), where p_S and p_R are
    the product laws 2^-n prod (1 + rho_k sigma_k) of the signs inside and
    outside the 1-based index set ``subset``.  The environment table
    ``delta`` has zero sum and zero first moments, so it leaves every
    <sigma_j> unchanged.
    """

    rho_k: np.ndarray
    subset: tuple = ()
    delta: np.ndarray | None = None

    def __post_init__(self):
        rho = np.asarray(self.rho_k, dtype=float)
        if np.any(np.abs(rho) > 1 + 1e-12):
            raise ValueError("|rho_k| must not exceed 1")
        object.__setattr__(self, "rho_k", rho)
        if self.delta is not None:
            d = np.asarray(self.delta, dtype=float)
            if d.shape != (2 ** len(self.subset),):
                raise ValueError("delta must have one entry per sign pattern of the subset")
            object.__setattr__(self, "delta", d)
            moments = _signs(len(self.subset)).T @ d
            if abs(d.sum()) > 1e-12 or np.abs(moments).max(initial=0) > 1e-12:
                raise ValueError("environment part must have zero sum and zero first moments")
            if self.min_probability() < -1e-12:
                raise ValueError("environment part makes some probabilities negative")

    @property
    def K(self) -> int:
        return len(self.rho_k)

    def subset_table(self) -> tuple[np.ndarray, np.ndarray]:
        """Signs and joint probabilities of the signs in ``subset``."""
        S = [k - 1 for k in self.subset]
        sig = _signs(len(S))
        p = np.prod(1 + sig * self.rho_k[S], axis=1) / 2 ** len(S)
        if self.delta is not None:
            p = p + self.delta
        return sig, p

    def min_probability(self) -> float:
        """Smallest joint probability of the subset signs (the rest only rescales it)."""
        return float(self.subset_table()[1].min()) if self.subset else 0.0

    def table(self) -> np.ndarray:
        """Explicit probabilities for all 2^K sequences (K <= 15)."""
        if self.K > ENUMERATE_LIMIT:
            raise MemoryError(f"{self.K} signs exceed the enumeration limit {ENUMERATE_LIMIT}")
        sig = _signs(self.K)
        p = np.prod(1 + sig * self.rho_k, axis=1) / 2**self.K
        if self.delta is not None:
            S = [k - 1 for k in self.subset]
            R = [k for k in range(self.K) if k not in S]
            bits = (1 - sig[:, S]) // 2
            idx = bits @ (1 << np.arange(len(S) - 1, -1, -1))
            p_rest = np.prod(1 + sig[:, R] * self.rho_k[R], axis=1) / 2 ** len(R)
            p = p + self.delta[idx] * p_rest
        return p

    def mean(self, j: int) -> float:
        """<sigma_j> (1-based) from the factorized form."""
        return float(self.rho_k[j - 1])

    def correlation(self, indices) -> float:
        """<prod sigma_j> for 1-based indices; signs in ``indices`` flip the variable."""
        signs = np.sign(indices)
        idx = [abs(i) for i in indices]
        inside = [i for i in idx if i in self.subset]
        outside = [i for i in idx if i not in self.subset]
        value = float(np.prod(signs)) * float(np.prod([self.rho_k[i - 1] for i in outside]))
        if inside:
            sig, p = self.subset_table()
            cols = [self.subset.index(i) for i in inside]
            value *= float(np.sum(np.prod(sig[:, cols], axis=1) * p))
        return value


def ensemble_from_state(state: FiniteState) -> EnsembleDistribution:
    return EnsembleDistribution(state.rho_k)


def bit_chain_ensemble(state: FiniteState, chain) -> EnsembleDistribution:
    """Environment part that makes the (signed, 1-based) triple a comeasurable bit chain.

    The joint law of the triple becomes (1 + r1 s1 + r2 s2 + r3 s1 s2) / 4 on
    s3 = s1 s2 and zero otherwise, with r the signed expectations; all single
    expectations are unchanged.
    """
    idx = tuple(abs(i) for i in chain)
    sgn = np.sign(chain)
    r = sgn * state.rho_k[[i - 1 for i in idx]]
    sig = _signs(3)
    s = sig * sgn  # chain variables for each stored sign pattern
    target = np.where(s[:, 2] == s[:, 0] * s[:, 1], (1 + r[0] * s[:, 0] + r[1] * s[:, 1] + r[2] * s[:, 0] * s[:, 1]) / 4, 0)
    product = np.prod(1 + sig * state.rho_k[[i - 1 for i in idx]], axis=1) / 8
    return EnsembleDistribution(state.rho_k, idx, target - product)


QUARTIC_ROOTS = (1.0, 0.5, 0.0, -0.5)


def quartic_identity(a) -> np.ndarray:
    """a^4 - a^3 - a^2/4 + a/4, which vanishes on {1, 1/2, 0, -1/2}."""
    a = np.asarray(a, dtype=float)
    return a**4 - a**3 - 0.25 * a**2 + 0.25 * a


OCCUPATION_PATTERNS = ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1))


@dataclass
class BitChainReport:
    chain: tuple
    commuting: bool
    operator_relations: float
    expectation_relations: dict
    projector_moments: dict
    spectra: dict
    quartic_residual: float
    passed: bool


def bit_chain_check(ensemble: EnsembleDistribution, chain, basis: GeneratorBasis | None = None, tol: float = 1e-12) -> BitChainReport:
    """Check the bit-chain relations for a signed, 1-based triple of generator indices."""
    chain = tuple(int(c) for c in chain)
    if len(chain) != 3:
        raise ValueError("a bit chain has three members")
    commuting, op_err = True, 0.0
    if basis is not None:
        A = [np.sign(c) * basis.matrix(abs(c)) for c in chain]
        comm = max(np.abs(commutator(A[i], A[j])).max() for i, j in ((0, 1), (0, 2), (1, 2)))
        commuting = comm <= tol
        eye = np.eye(basis.M)
        op_err = max(
            np.abs(A[0] @ A[2] - A[1]).max(),
            np.abs(A[0] @ A[1] - A[2]).max(),
            np.abs(A[1] @ A[2] - A[0]).max(),
            np.abs(A[0] @ A[1] @ A[2] - eye).max(),
        )
    c1, c2, c3 = chain
    rel = {
        "s1 s3 - s2": ensemble.correlation((c1, c3)) - ensemble.correlation((c2,)),
        "s1 s2 - s3": ensemble.correlation((c1, c2)) - ensemble.correlation((c3,)),
        "s2 s3 - s1": ensemble.correlation((c2, c3)) - ensemble.correlation((c1,)),
        "s1 s2 s3 - 1": ensemble.correlation((c1, c2, c3)) - 1.0,
    }
    # joint law of the chain variables
    sig = _signs(3)
    probs = np.array([_joint_probability(ensemble, chain, s) for s in sig])
    moments, spectra, quartic = {}, {}, 0.0
    for pattern in OCCUPATION_PATTERNS:
        a = (1 + sig @ np.array(pattern)) / 4
        key = "".join("+" if v > 0 else "-" for v in pattern)
        moments[key] = [float(np.sum(a**q * probs)) for q in (1, 2, 3, 4)]
        spectra[key] = sorted({float(v) for v, w in zip(a, probs) if w > tol})
        quartic = max(quartic, float(np.abs(quartic_identity(a)).max()))
    projector = max(abs(m[q] - m[0]) for m in moments.values() for q in (1, 2, 3))
    passed = (
        commuting
        and op_err <= tol
        and max(abs(v) for v in rel.values()) <= tol
        and projector <= tol
        and all(set(s) <= {0.0, 1.0} for s in spectra.values())
    )
    return BitChainReport(chain, commuting, float(op_err), rel, moments, spectra, quartic, passed)


def _joint_probability(ensemble: EnsembleDistribution, chain, s) -> float:
    """P(chain variables = s) by inclusion of indicator products (1 + s_i sigma_i) / 2."""
    total = 0.0
    for mask in itertools.product((0, 1), repeat=3):
        picked = tuple(c for c, m in zip(chain, mask) if m)
        coef = np.prod([si for si, m in zip(s, mask) if m]) if picked else 1.0
        total += coef * (ensemble.correlation(picked) if picked else 1.0)
    return total / 8


# ---------------------------------------------------------------------------
# change of basis and matrix dumps


def change_of_basis(source_ops, target_ops) -> np.ndarray:
    """Unitary U with U S_i U^dagger = T_i for commuting involutions with diagonal targets.

    Joint eigenvectors of the sources are matched to the basis vectors whose
    diagonal target entries carry the same eigenvalues.
    """
    source_ops = [np.asarray(s) for s in source_ops]
    target_ops = [np.asarray(t) for t in target_ops]
    M = source_ops[0].shape[0]
    rng = np.random.default_rng(0)
    weights = rng.uniform(1, 2, len(source_ops))
    _, vecs = np.linalg.eigh(sum(w * s for w, s in zip(weights, source_ops)))
    U = np.zeros((M, M), dtype=complex)
    used = set()
    for v in vecs.T:
        key = tuple(np.round([np.real(v.conj() @ s @ v) for s in source_ops], 8))
        for alpha in range(M):
            if alpha in used:
                continue
            if tuple(np.round([t[alpha, alpha].real for t in target_ops], 8)) == key:
                U[alpha] = v.conj()
                used.add(alpha)
                break
        else:
            raise ValueError("source and target operators have different joint spectra")
    return U


def write_matrix(path, A: np.ndarray, comment: str = "") -> None:
    """Row-major text dump, one matrix row per line as ``re im`` pairs."""
    A = np.asarray(A, dtype=complex)
    pairs = np.stack([A.real, A.imag], axis=-1).reshape(A.shape[0], -1)
    header = f"phaselab matrix rows={A.shape[0]} cols={A.shape[1]}" + (f" {comment}" if comment else "")
    np.savetxt(path, pairs, fmt="%.17g", header=header)


def read_matrix(path) -> np.ndarray:
    data = np.atleast_2d(np.loadtxt(path))
    return data[:, 0::2] + 1j * data[:, 1::2]
