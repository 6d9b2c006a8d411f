"""Dense n-qubit states, Pauli observables and measurement statistics.

Qubits are numbered from 1 (leftmost tensor factor) to n. Matrices use the
big-endian convention, so qubit 1 is the most significant bit of a basis
index.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-9
PSD_TOL = 1e-10
COALESCE_TOL = 1e-9
ZERO_PROB_TOL = 1e-12

DEFAULT_MAX_QUBITS = 10
HARD_MAX_QUBITS = 12
_max_qubits = DEFAULT_MAX_QUBITS

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class DimensionError(ValueError):
    """Raised when qubit counts are inconsistent or exceed the configured cap."""


def max_qubits() -> int:
    return _max_qubits


def set_max_qubits(n: int) -> None:
    """Change the dense-simulation qubit cap (at most 12)."""
    global _max_qubits
    if not 1 <= n <= HARD_MAX_QUBITS:
        raise DimensionError(f"qubit cap must lie in [1, {HARD_MAX_QUBITS}], got {n}")
    _max_qubits = int(n)


def _check_cap(n: int) -> None:
    if n > _max_qubits:
        raise DimensionError(f"{n} qubits exceeds the configured cap of {_max_qubits}")


def _num_qubits(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimensionError(f"dimension {dim} is not a power of two >= 2")
    return n


def hermitize(a: np.ndarray) -> np.ndarray:
    return (a + a.conj().T) / 2


def clamped_eigvalsh(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a PSD matrix with round-off negatives in [-1e-10, 0) set to 0."""
    w = np.linalg.eigvalsh(hermitize(a))
    if w[0] < -PSD_TOL:
        raise ValueError(f"matrix is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return np.clip(w, 0.0, None)


class DensityMatrix:
    """Immutable Hermitian, positive semidefinite, unit-trace matrix on n qubits."""

    __slots__ = ("_data", "_n")

    def __init__(self, data, *, validate: bool = True):
        arr = np.array(data, dtype=complex)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"density matrix must be square, got shape {arr.shape}")
        n = _num_qubits(arr.shape[0])
        _check_cap(n)
        if validate:
            dev = np.max(np.abs(arr - arr.conj().T))
            if dev > HERMITIAN_TOL:
                raise ValueError(f"matrix is not Hermitian (deviation {dev:.3e})")
            tr = np.trace(arr).real
            if abs(tr - 1) > TRACE_TOL:
                raise ValueError(f"trace must be 1, got {tr!r}")
            arr = hermitize(arr)
            clamped_eigvalsh(arr)
        else:
            arr = hermitize(arr)
        arr.setflags(write=False)
        self._data = arr
        self._n = n

    @property
    def n(self) -> int:
        return self._n

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def data(self) -> np.ndarray:
        return self._data

    def eigenvalues(self) -> np.ndarray:
        return clamped_eigvalsh(self._data)

    def allclose(self, other: "DensityMatrix", atol: float = 1e-10) -> bool:
        return self.n == other.n and bool(np.allclose(self._data, other._data, atol=atol, rtol=0))

    def __repr__(self) -> str:
        return f"DensityMatrix(n={self._n})"

    # constructors

    @classmethod
    def from_vector(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex).ravel()
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            raise ValueError("zero state vector")
        psi = psi / nrm
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bits: str) -> "DensityMatrix":
        """Computational basis projector, e.g. ``basis("01")`` is |01><01|."""
        if not bits or set(bits) - {"0", "1"}:
            raise ValueError(f"invalid bit string {bits!r}")
        dim = 1 << len(bits)
        _check_cap(len(bits))
        rho = np.zeros((dim, dim), dtype=complex)
        idx = int(bits, 2)
        rho[idx, idx] = 1.0
        return cls(rho, validate=False)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        _check_cap(n)
        dim = 1 << n
        return cls(np.eye(dim, dtype=complex) / dim, validate=False)

    @classmethod
    def diagonal(cls, probs) -> "DensityMatrix":
        return cls(np.diag(np.asarray(probs, dtype=complex)))


def haar_pure_vector(n: int, rng: np.random.Generator) -> np.ndarray:
    dim = 1 << n
    psi = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return psi / np.linalg.norm(psi)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Dirichlet(1,...,1) mixture of ``rank`` Haar-random pure states.

    When ``rank`` is omitted it is drawn uniformly from 1..2^n.
    """
    _check_cap(n)
    if rank is None:
        rank = int(rng.integers(1, (1 << n) + 1))
    if rank < 1:
        raise ValueError("rank must be >= 1")
    weights = rng.dirichlet(np.ones(rank))
    vecs = np.stack([haar_pure_vector(n, rng) for _ in range(rank)], axis=1)
    rho = (vecs * weights) @ vecs.conj().T
    return DensityMatrix(rho / np.trace(rho).real)


@dataclass(frozen=True)
class QubitSubset:
    """Sorted set of 1-based qubit indices."""

    indices: tuple[int, ...]

    def __init__(self, indices: Iterable[int] = ()):
        idx = tuple(sorted({int(i) for i in indices}))
        if any(i < 1 for i in idx):
            raise ValueError(f"qubit indices are 1-based, got {idx}")
        object.__setattr__(self, "indices", idx)

    def check(self, n: int) -> "QubitSubset":
        if self.indices and self.indices[-1] > n:
            raise DimensionError(f"qubit index {self.indices[-1]} out of range for n={n}")
        return self

    def complement(self, n: int) -> "QubitSubset":
        self.check(n)
        return QubitSubset(i for i in range(1, n + 1) if i not in self.indices)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, i) -> bool:
        return i in self.indices

    def __or__(self, other: "QubitSubset") -> "QubitSubset":
        return QubitSubset(self.indices + other.indices)


@dataclass(frozen=True)
class PauliObservable:
    """Real-weighted sum of n-qubit Pauli strings."""

    n: int
    terms: tuple[tuple[float, str], ...]

    def __init__(self, n: int, terms: Iterable[tuple[float, str]]):
        terms = tuple((float(c), str(s).upper()) for c, s in terms)
        seen = set()
        for c, s in terms:
            if len(s) != n or set(s) - set("IXYZ"):
                raise ValueError(f"invalid Pauli string {s!r} for n={n}")
            if not np.isfinite(c):
                raise ValueError(f"non-finite coefficient for {s}")
            if s in seen:
                raise ValueError(f"duplicate Pauli string {s}")
            seen.add(s)
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_dict(cls, n: int, coeffs: dict[str, float]) -> "PauliObservable":
        return cls(n, coeffs.items())

    @classmethod
    def accumulate(cls, n: int, terms: Iterable[tuple[float, str]]) -> "PauliObservable":
        """Like the constructor but merges repeated strings by adding coefficients."""
        acc: dict[str, float] = {}
        for c, s in terms:
            acc[s] = acc.get(s, 0.0) + float(c)
        return cls(n, ((c, s) for s, c in acc.items() if c != 0.0))

    @classmethod
    def single(cls, n: int, ops: dict[int, str], coeff: float = 1.0) -> "PauliObservable":
        """One Pauli string given as {qubit: letter}, e.g. ``single(2, {1: "X", 2: "X"})``."""
        word = ["I"] * n
        for q, op in ops.items():
            word[q - 1] = op
        return cls(n, [(coeff, "".join(word))])

    def __add__(self, other: "PauliObservable") -> "PauliObservable":
        if self.n != other.n:
            raise DimensionError("observables act on different qubit counts")
        return PauliObservable.accumulate(self.n, self.terms + other.terms)

    def __mul__(self, scalar: float) -> "PauliObservable":
        return PauliObservable(self.n, ((c * scalar, s) for c, s in self.terms))

    __rmul__ = __mul__

    def support(self, word: str) -> set[int]:
        return {i + 1 for i, ch in enumerate(word) if ch != "I"}


def z_sum(n: int) -> PauliObservable:
    """The observable sum_i Z_i."""
    return PauliObservable(n, ((1.0, "I" * i + "Z" + "I" * (n - i - 1)) for i in range(n)))


def z_window_sum(n: int, ell: int) -> PauliObservable:
    """sum_i Z_i Z_{i+1} ... Z_{i+ell-1}, windows taken modulo n."""
    if not 1 <= ell <= n:
        raise ValueError(f"window length must lie in [1, {n}]")
    terms = []
    for i in range(n):
        word = ["I"] * n
        for j in range(ell):
            word[(i + j) % n] = "Z"
        terms.append((1.0, "".join(word)))
    return PauliObservable.accumulate(n, terms)


def pauli_string_matrix(word: str) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for ch in word:
        out = np.kron(out, PAULI_MATRICES[ch])
    return out


def observable_matrix(obs: PauliObservable) -> np.ndarray:
    _check_cap(obs.n)
    dim = 1 << obs.n
    mat = np.zeros((dim, dim), dtype=complex)
    for c, s in obs.terms:
        mat += c * pauli_string_matrix(s)
    return hermitize(mat)


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    _check_cap(a.n + b.n)
    return DensityMatrix(np.kron(a.data, b.data), validate=False)


def partial_trace(rho: DensityMatrix, discard: QubitSubset | Iterable[int]) -> DensityMatrix:
    """Trace out the qubits in ``discard``; the kept qubits retain their order."""
    discard = discard if isinstance(discard, QubitSubset) else QubitSubset(discard)
    n = rho.n
    discard.check(n)
    if not discard.indices:
        raise ValueError("nothing to discard")
    if len(discard) == n:
        raise ValueError("cannot discard every qubit")
    keep = [i for i in range(n) if (i + 1) not in discard]
    gone = [i for i in range(n) if (i + 1) in discard]
    t = rho.data.reshape((2,) * (2 * n))
    perm = keep + gone + [n + i for i in keep] + [n + i for i in gone]
    t = t.transpose(perm)
    dk, dg = 1 << len(keep), 1 << len(gone)
    t = t.reshape(dk, dg, dk, dg)
    return DensityMatrix(np.einsum("ajbj->ab", t), validate=False)


def marginal_mismatch(rho: DensityMatrix, sigma: DensityMatrix, discard: QubitSubset) -> float:
    """Max-abs entry difference of the two states after tracing out ``discard``."""
    if len(discard) == rho.n:
        return 0.0
    a = partial_trace(rho, discard).data
    b = partial_trace(sigma, discard).data
    return float(np.max(np.abs(a - b)))


def apply_operator(mat: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Left-multiply ``mat`` (2^n x 2^n) by ``op`` acting on 1-based ``targets``."""
    k = len(targets)
    axes = [q - 1 for q in targets]
    t = mat.reshape((2,) * n + (-1,))
    opt = op.reshape((2,) * (2 * k))
    t = np.tensordot(opt, t, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back to their slots
    t = np.moveaxis(t, list(range(k)), axes)
    return t.reshape(mat.shape)


def apply_unitary(rho: DensityMatrix, unitary: np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    """Conjugate ``rho`` by a unitary acting on the given 1-based qubits."""
    n = rho.n
    QubitSubset(targets).check(n)
    if unitary.shape != (1 << len(targets),) * 2:
        raise DimensionError("unitary shape does not match its target count")
    left = apply_operator(rho.data, unitary, targets, n)
    both = apply_operator(left.conj().T, unitary, targets, n).conj().T
    return DensityMatrix(both, validate=False)


def expectation(rho: DensityMatrix, obs: PauliObservable) -> float:
    if rho.n != obs.n:
        raise DimensionError(f"state has {rho.n} qubits, observable {obs.n}")
    val = np.trace(rho.data @ observable_matrix(obs))
    return float(val.real)


def purity(rho: DensityMatrix) -> float:
    return float(np.real(np.vdot(rho.data, rho.data)))


@dataclass(frozen=True)
class OutcomeDistribution:
    """Finite distribution over measurement outcomes (strictly increasing)."""

    outcomes: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.outcomes, dtype=float)
        p = np.asarray(self.probabilities, dtype=float)
        if x.shape != p.shape or x.ndim != 1 or x.size == 0:
            raise ValueError("outcomes and probabilities must be equal-length 1-D arrays")
        if np.any(p < -1e-12):
            raise ValueError("negative probability")
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum()!r}")
        if np.any(np.diff(x) <= 0):
            raise ValueError("outcomes must be strictly increasing")
        p = np.clip(p, 0.0, 1.0)
        x.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "outcomes", x)
        object.__setattr__(self, "probabilities", p)

    @classmethod
    def point_mass(cls, value: float) -> "OutcomeDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    def mean(self) -> float:
        return float(np.dot(self.outcomes, self.probabilities))


def coalesce(values: np.ndarray, weights: np.ndarray, tol: float = COALESCE_TOL):
    """Merge sorted ``values`` closer than ``tol`` to their group's first member."""
    order = np.argsort(values, kind="stable")
    values, weights = values[order], weights[order]
    out_x, out_p = [values[0]], [weights[0]]
    for v, w in zip(values[1:], weights[1:]):
        if v - out_x[-1] <= tol:
            out_p[-1] += w
        else:
            out_x.append(v)
            out_p.append(w)
    # snap near-integers produced by eigensolvers (e.g. 1.9999999999 -> 2)
    xs = np.array(out_x)
    snapped = np.round(xs)
    xs = np.where(np.abs(xs - snapped) <= tol, snapped, xs)
    return xs, np.array(out_p)


def measure_distribution(rho: DensityMatrix, obs: PauliObservable) -> OutcomeDistribution:
    """Outcome distribution of a projective measurement of ``obs`` on ``rho``."""
    if rho.n != obs.n:
        raise DimensionError(f"state has {rho.n} qubits, observable {obs.n}")
    w, v = np.linalg.eigh(observable_matrix(obs))
    probs = np.real(np.einsum("ij,ik,kj->j", v.conj(), rho.data, v))
    probs = np.clip(probs, 0.0, None)
    xs, ps = coalesce(w, probs)
    keep = ps > ZERO_PROB_TOL
    return OutcomeDistribution(xs[keep], ps[keep] / ps[keep].sum())


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def seed_sequence(seed) -> np.random.SeedSequence:
    """Accept an int, a sequence of ints or an existing SeedSequence."""
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def sample_outcomes(dist: OutcomeDistribution, shots: int, seed) -> np.ndarray:
    """``shots`` i.i.d. draws by inverse-CDF lookup on a seeded PCG64 stream."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    u = make_rng(seed).random(shots)
    cdf = np.cumsum(dist.probabilities)
    cdf[-1] = 1.0
    idx = np.searchsorted(cdf, u, side="right")
    return dist.outcomes[np.minimum(idx, len(cdf) - 1)]


def pauli_strings(n: int):
    return ("".join(w) for w in itertools.product("IXYZ", repeat=n))


def pauli_decompose(mat: np.ndarray, tol: float = 1e-12) -> PauliObservable:
    """Pauli expansion of a Hermitian matrix (exponential in n; small n only)."""
    n = _num_qubits(mat.shape[0])
    dim = 1 << n
    terms = []
    for word in pauli_strings(n):
        c = np.trace(pauli_string_matrix(word) @ mat).real / dim
        if abs(c) > tol:
            terms.append((c, word))
    return PauliObservable(n, terms)
