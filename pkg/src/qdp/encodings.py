"""Classical-to-quantum encodings and the neighbouring relations they induce.

A neighbouring relation says which pairs of states count as neighbours: trace
distance at most ``tau`` and equal marginals after discarding some subset of
qubits from ``xi``. Encodings map classical neighbours (close in a p-norm) to
quantum neighbours, and :func:`derive_relation` returns the relation each
encoding guarantees.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .channels import LightCone
from .divergences import trace_distance
from .qstate import (
    DensityMatrix,
    DimensionError,
    QubitSubset,
    apply_unitary,
    hermitize,
    make_rng,
    marginal_mismatch,
)

TAU_TOL = 1e-12
VERIFY_TOL = 1e-9

TRACE_TAU = "TraceTau"
XI_TAU = "XiTau"
ELL_TAU = "EllTau"
W1_TAU = "W1Tau"
RELATION_KINDS = (TRACE_TAU, XI_TAU, ELL_TAU, W1_TAU)


def ring_windows(n: int, ell: int) -> tuple[QubitSubset, ...]:
    """All runs of ``ell`` consecutive qubits, wrapping modulo n."""
    if ell >= n:
        return (QubitSubset(range(1, n + 1)),)
    return tuple(QubitSubset(((i + j) % n) + 1 for j in range(ell)) for i in range(n))


@dataclass(frozen=True)
class NeighbourRelation:
    """Which state pairs count as neighbours.

    Attributes:
        kind: One of ``TraceTau``, ``XiTau``, ``EllTau`` or ``W1Tau``.
        tau: Distance threshold (trace distance, or W1 for ``W1Tau``).
        n: Number of qubits.
        xi: Candidate subsets for ``XiTau``; filled in for the other kinds.
        ell: Window length for ``EllTau``.
    """

    kind: str
    tau: float
    n: int
    xi: tuple[QubitSubset, ...] = ()
    ell: int | None = None

    def __post_init__(self):
        if self.kind not in RELATION_KINDS:
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if not self.tau >= 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.kind != W1_TAU and self.tau > 1 + TAU_TOL:
            raise ValueError(f"trace-distance tau must be <= 1, got {self.tau}")
        full = (QubitSubset(range(1, self.n + 1)),)
        if self.kind == TRACE_TAU or self.kind == W1_TAU:
            xi = full
        elif self.kind == ELL_TAU:
            if self.ell is None or not 1 <= self.ell <= self.n:
                raise ValueError(f"window length must lie in [1, {self.n}], got {self.ell}")
            xi = ring_windows(self.n, self.ell)
        else:
            xi = tuple(s if isinstance(s, QubitSubset) else QubitSubset(s) for s in self.xi)
            if not xi or any(len(s) == 0 for s in xi):
                raise ValueError("XiTau needs a nonempty list of nonempty subsets")
            for s in xi:
                s.check(self.n)
        object.__setattr__(self, "xi", xi)

    @property
    def max_subset(self) -> int:
        return max(len(s) for s in self.xi)

    @classmethod
    def trace(cls, n: int, tau: float) -> "NeighbourRelation":
        return cls(TRACE_TAU, tau, n)

    @classmethod
    def window(cls, n: int, ell: int, tau: float) -> "NeighbourRelation":
        return cls(ELL_TAU, tau, n, ell=ell)

    @classmethod
    def subsets(cls, n: int, xi: Sequence, tau: float) -> "NeighbourRelation":
        return cls(XI_TAU, tau, n, xi=tuple(xi))

    @classmethod
    def w1(cls, n: int, tau: float) -> "NeighbourRelation":
        return cls(W1_TAU, tau, n)


def all_subsets_relation(n: int, size: int, tau: float) -> NeighbourRelation:
    """XiTau over every subset of the given size, TraceTau once the size reaches n."""
    tau = min(1.0, tau)
    if size >= n:
        return NeighbourRelation.trace(n, tau)
    xi = [QubitSubset(c) for c in itertools.combinations(range(1, n + 1), size)]
    return NeighbourRelation.subsets(n, xi, tau)


def w1_upper_bound(relation: NeighbourRelation) -> float:
    """Upper bound on W1 between two neighbours: min(1.5 max|I| tau, n tau)."""
    if relation.kind == W1_TAU:
        return relation.tau
    return min(1.5 * relation.max_subset * relation.tau, relation.n * relation.tau)


@dataclass(frozen=True)
class ClassicalNeighbourSpec:
    """Bounds on the 0-, 1- and 2-norm of x - x'. Unset bounds are ``None``."""

    gamma0: int | None = None
    gamma1: float | None = None
    gamma2: float | None = None

    def __post_init__(self):
        for name in ("gamma0", "gamma1", "gamma2"):
            v = getattr(self, name)
            if v is not None and v < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True, eq=False)
class Gate:
    generator: np.ndarray
    targets: tuple[int, ...]
    parameter_index: int


def schatten2_norm(h: np.ndarray) -> float:
    return float(np.linalg.norm(h, "fro"))


def spectral_norm(h: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(hermitize(h)))))


GENERATOR_NORMS = {"schatten2": schatten2_norm, "spectral": spectral_norm}


@dataclass(frozen=True, eq=False)
class HamiltonianCircuitSpec:
    """Ordered gates exp(-i x_j H_j) on 1- or 2-qubit targets.

    ``generator_norm_bound`` is the largest norm over the gate generators,
    taken on the local (target-sized) matrix. The Schatten-2 norm is the
    default because it keeps the sqrt(1/2) trace-distance bound valid; the
    spectral norm is available through ``norm="spectral"``.
    """

    n: int
    gates: tuple[Gate, ...]
    depth_1d: int | None = None
    norm: str = "schatten2"
    generator_norm_bound: float = field(init=False)

    def __post_init__(self):
        gates = []
        for g in self.gates:
            if not isinstance(g, Gate):
                g = Gate(*g)
            h = np.array(g.generator, dtype=complex)
            targets = tuple(int(t) for t in (g.targets if not isinstance(g.targets, QubitSubset) else g.targets.indices))
            if not 1 <= len(targets) <= 2:
                raise ValueError("gates act on one or two qubits")
            QubitSubset(targets).check(self.n)
            if h.shape != (1 << len(targets),) * 2:
                raise DimensionError("generator shape does not match its targets")
            if np.max(np.abs(h - h.conj().T)) > 1e-10:
                raise ValueError("generator is not Hermitian")
            h.setflags(write=False)
            gates.append(Gate(h, targets, int(g.parameter_index)))
        if self.norm not in GENERATOR_NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        object.__setattr__(self, "gates", tuple(gates))
        bound = max((GENERATOR_NORMS[self.norm](g.generator) for g in gates), default=0.0)
        object.__setattr__(self, "generator_norm_bound", bound)

    @property
    def num_parameters(self) -> int:
        return 1 + max((g.parameter_index for g in self.gates), default=-1)

    def lemma_bound(self, x, x2) -> float:
        """sqrt(1/2) * sum_j norm(H_j) |x_j - x'_j| over the gates."""
        x, x2 = np.asarray(x, float), np.asarray(x2, float)
        fn = GENERATOR_NORMS[self.norm]
        total = sum(fn(g.generator) * abs(x[g.parameter_index] - x2[g.parameter_index]) for g in self.gates)
        return math.sqrt(0.5) * total


def brickwork_spec(n: int, depth: int, generator: np.ndarray | None = None, **kw) -> HamiltonianCircuitSpec:
    """1D nearest-neighbour circuit of alternating even/odd two-qubit layers, one parameter per gate."""
    if generator is None:
        zz = np.diag([1.0, -1.0, -1.0, 1.0]).astype(complex)
        xx = np.kron([[0, 1], [1, 0]], [[0, 1], [1, 0]]).astype(complex)
        generator = (zz + xx) / 4
    gates = []
    idx = 0
    for layer in range(depth):
        for i in range(1 + layer % 2, n, 2):
            gates.append(Gate(generator, (i, i + 1), idx))
            idx += 1
    return HamiltonianCircuitSpec(n, tuple(gates), depth_1d=depth, **kw)


def _unit(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex).ravel()
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("zero vector")
    return x / nrm


def amplitude_encode(x, normalize: bool = False) -> DensityMatrix:
    """Projector onto sum_j x_j |j>."""
    x = np.asarray(x, dtype=complex).ravel()
    dim = x.size
    if dim < 2 or dim & (dim - 1):
        raise DimensionError(f"vector length {dim} is not a power of two >= 2")
    nrm = np.linalg.norm(x)
    if nrm == 0:
        raise ValueError("zero vector")
    if not normalize and abs(nrm - 1) > 1e-9:
        raise ValueError(f"vector norm is {nrm}, expected 1 (pass normalize=True to rescale)")
    return DensityMatrix.from_vector(x)


def rotation_vector(x) -> np.ndarray:
    psi = np.array([1.0 + 0j])
    for xi in np.asarray(x, dtype=float).ravel():
        psi = np.kron(psi, [math.cos(xi), math.sin(xi)])
    return psi


def rotation_encode(x, n: int | None = None) -> DensityMatrix:
    """Product state with qubit i in cos(x_i)|0> + sin(x_i)|1>."""
    x = np.asarray(x, dtype=float).ravel()
    if n is not None and x.size != n:
        raise DimensionError(f"expected {n} angles, got {x.size}")
    return DensityMatrix.from_vector(rotation_vector(x))


def coherent_overlap(x, x2) -> float:
    """Squared overlap exp(-||x - x'||^2) of two multimode coherent states."""
    x, x2 = np.asarray(x, float).ravel(), np.asarray(x2, float).ravel()
    if x.shape != x2.shape:
        raise DimensionError("vectors have different lengths")
    return math.exp(-float(np.sum((x - x2) ** 2)))


def coherent_distance(x, x2) -> float:
    return math.sqrt(max(0.0, 1 - coherent_overlap(x, x2)))


def gate_unitary(h: np.ndarray, theta: float) -> np.ndarray:
    w, v = np.linalg.eigh(hermitize(h))
    return (v * np.exp(-1j * theta * w)) @ v.conj().T


def hamiltonian_encode(spec: HamiltonianCircuitSpec, x, initial: DensityMatrix) -> DensityMatrix:
    """Apply exp(-i x_j H_j) for each gate in order."""
    x = np.asarray(x, dtype=float).ravel()
    if initial.n != spec.n:
        raise DimensionError("initial state width differs from the circuit")
    if x.size < spec.num_parameters:
        raise ValueError(f"circuit needs {spec.num_parameters} parameters, got {x.size}")
    rho = initial
    for g in spec.gates:
        rho = apply_unitary(rho, gate_unitary(g.generator, x[g.parameter_index]), g.targets)
    return rho


def noisy_encoding_tau(q: float, L: int, n: int) -> float:
    """2 min{sqrt(q^{2L} n / 2), sqrt(1 - exp(-q^{2L} n))}, via Pinsker or Bretagnolle-Huber."""
    if not 0 <= q < 1:
        raise ValueError(f"q must lie in [0, 1), got {q}")
    if L < 1:
        raise ValueError("L must be >= 1")
    d = q ** (2 * L) * n
    return 2 * min(math.sqrt(d / 2), math.sqrt(-math.expm1(-d)))


AMPLITUDE = "amplitude"
ROTATION = "rotation"
COHERENT = "coherent"
HAMILTONIAN = "hamiltonian"
HAMILTONIAN_LOW_NOISE = "hamiltonian-low-noise"
HAMILTONIAN_HIGH_NOISE = "hamiltonian-high-noise"
ENCODING_KINDS = (AMPLITUDE, ROTATION, COHERENT, HAMILTONIAN, HAMILTONIAN_LOW_NOISE, HAMILTONIAN_HIGH_NOISE)


def _require(classical: ClassicalNeighbourSpec, *names):
    missing = [nm for nm in names if getattr(classical, nm) is None]
    if missing:
        raise ValueError(f"classical spec is missing {', '.join(missing)}")


def derive_relation(encoding_kind: str, classical: ClassicalNeighbourSpec,
                    spec: HamiltonianCircuitSpec | None = None, *, n: int | None = None,
                    q: float | None = None, p: float | None = None, cone_size: int | None = None) -> NeighbourRelation:
    """Relation guaranteed by an encoding for classical neighbours within ``classical``.

    Args:
        encoding_kind: One of ``ENCODING_KINDS``.
        classical: Norm bounds on the classical perturbation.
        spec: Circuit for the Hamiltonian kinds.
        n: Qubit count (taken from ``spec`` for Hamiltonian kinds).
        q: Pauli-noise strength per layer, for the low-noise row.
        p: Depolarizing strength, for the high-noise row.
        cone_size: Per-layer light-cone size of the post-processing, for the high-noise row.
    """
    if encoding_kind not in ENCODING_KINDS:
        raise ValueError(f"unknown encoding {encoding_kind!r}")
    if spec is not None:
        n = spec.n
    if n is None:
        raise ValueError("qubit count n is required")

    if encoding_kind == AMPLITUDE:
        _require(classical, "gamma2")
        return NeighbourRelation.trace(n, min(1.0, classical.gamma2))

    if encoding_kind in (ROTATION, COHERENT):
        _require(classical, "gamma0", *(("gamma2",) if encoding_kind == COHERENT else ()))
        tau = 1.0 if encoding_kind == ROTATION else math.sqrt(-math.expm1(-classical.gamma2 ** 2))
        s = int(classical.gamma0)
        if s == 0:
            return NeighbourRelation.trace(n, 0.0)
        if s == 1 and n > 1:
            return NeighbourRelation.window(n, 1, tau)
        return all_subsets_relation(n, s, tau)

    if spec is None or spec.depth_1d is None:
        raise ValueError("Hamiltonian encodings need a circuit spec with depth_1d set")
    _require(classical, "gamma0", "gamma1")
    L = spec.depth_1d
    width = 2 * L * int(classical.gamma0)
    tau = min(1.0, math.sqrt(0.5) * classical.gamma1 * spec.generator_norm_bound)
    if encoding_kind == HAMILTONIAN_LOW_NOISE:
        if q is None:
            raise ValueError("low-noise row needs the noise strength q")
        tau = min(1.0, noisy_encoding_tau(q, L, n))
    elif encoding_kind == HAMILTONIAN_HIGH_NOISE:
        if p is None or cone_size is None:
            raise ValueError("high-noise row needs p and cone_size")
        w1 = min(1.5 * min(width, n) * tau, n * tau)
        tau = min(1.0, (2 * cone_size * (1 - p)) ** L * w1)
    if classical.gamma0 == 1 and width < n:
        return NeighbourRelation.window(n, width, tau)
    return all_subsets_relation(n, width, tau)


def transform_relation(relation: NeighbourRelation, cone: LightCone) -> NeighbourRelation:
    """Relation after post-processing by a channel with the given light-cone.

    Each subset is replaced by its image through the cone, so the largest
    subset grows by at most ``cone.bound``. ``tau`` is unchanged because the
    trace distance cannot increase under a channel.
    """
    if relation.kind == W1_TAU:
        raise ValueError("W1 relations are not supported")
    if cone.n != relation.n:
        raise DimensionError("light-cone and relation act on different qubit counts")
    if relation.kind == TRACE_TAU:
        return relation
    n = relation.n
    images = []
    for s in relation.xi:
        img = cone.image(s)
        if img not in images:
            images.append(img)
    if any(len(s) >= n for s in images):
        return NeighbourRelation.trace(n, relation.tau)
    if relation.kind == ELL_TAU and cone.bound == 1:
        return relation
    return NeighbourRelation.subsets(n, images, relation.tau)


@dataclass(frozen=True)
class Encoder:
    """An encoding map with the domain sampler used by :func:`verify_preserving`.

    Attributes:
        kind: Encoding name.
        n: Qubit count of the output.
        dim: Length of the classical input.
        encode: Maps an input vector to a state.
        sample: Draws a base input from a generator.
        perturb: Draws a neighbour ``x'`` of ``x`` within a classical spec.
    """

    kind: str
    n: int
    dim: int
    encode: Callable[[np.ndarray], DensityMatrix]
    sample: Callable[[np.random.Generator], np.ndarray]
    perturb: Callable[[np.ndarray, ClassicalNeighbourSpec, np.random.Generator], np.ndarray]


def _ball_radius_scale(d: np.ndarray, classical: ClassicalNeighbourSpec, rng) -> float:
    limits = []
    if classical.gamma1 is not None:
        limits.append(classical.gamma1 / max(np.sum(np.abs(d)), 1e-300))
    if classical.gamma2 is not None:
        limits.append(classical.gamma2 / max(np.linalg.norm(d), 1e-300))
    if not limits:
        return 1.0
    return min(limits) * rng.random() ** (1.0 / d.size)


def perturb_coordinates(x: np.ndarray, classical: ClassicalNeighbourSpec, rng: np.random.Generator) -> np.ndarray:
    """Perturb ``gamma0`` coordinates, chosen without replacement, inside the 1- and 2-norm balls."""
    x = np.asarray(x, float)
    s = x.size if classical.gamma0 is None else min(int(classical.gamma0), x.size)
    out = x.copy()
    if s == 0:
        return out
    idx = rng.choice(x.size, size=s, replace=False)
    d = rng.normal(size=s)
    out[idx] += d * _ball_radius_scale(d, classical, rng)
    return out


def rotation_encoder(n: int) -> Encoder:
    return Encoder(
        ROTATION, n, n,
        encode=lambda x: rotation_encode(x, n),
        sample=lambda rng: rng.uniform(0, 2 * math.pi, size=n),
        perturb=perturb_coordinates,
    )


def _amplitude_perturb(x: np.ndarray, classical: ClassicalNeighbourSpec, rng) -> np.ndarray:
    # rotate towards a random orthogonal direction so ||x - x'||_2 = gamma2 * U
    g2 = 2.0 if classical.gamma2 is None else min(classical.gamma2, 2.0)
    y = rng.normal(size=x.size) + 1j * rng.normal(size=x.size)
    y -= np.vdot(x, y) * x
    y /= np.linalg.norm(y)
    dist = g2 * rng.random()
    theta = 2 * math.asin(dist / 2)
    return math.cos(theta) * x + math.sin(theta) * y


def amplitude_encoder(n: int) -> Encoder:
    dim = 1 << n

    def sample(rng):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return v / np.linalg.norm(v)

    return Encoder(AMPLITUDE, n, dim, encode=lambda x: amplitude_encode(x), sample=sample,
                   perturb=_amplitude_perturb)


def hamiltonian_encoder(spec: HamiltonianCircuitSpec, initial: DensityMatrix | None = None) -> Encoder:
    initial = initial if initial is not None else DensityMatrix.basis("0" * spec.n)
    k = spec.num_parameters
    return Encoder(
        HAMILTONIAN, spec.n, k,
        encode=lambda x: hamiltonian_encode(spec, x, initial),
        sample=lambda rng: rng.uniform(-math.pi, math.pi, size=k),
        perturb=perturb_coordinates,
    )


@dataclass(frozen=True)
class PreservingReport:
    trials: int
    trace_violations: int
    marginal_violations: int
    max_trace_excess: float
    max_marginal_mismatch: float

    @property
    def violations(self) -> int:
        return self.trace_violations + self.marginal_violations

    @property
    def ok(self) -> bool:
        return self.violations == 0


def verify_preserving(encoder: Encoder, relation: NeighbourRelation, classical: ClassicalNeighbourSpec,
                      trials: int, seed) -> PreservingReport:
    """Sample classical neighbours, encode both and check the quantum relation.

    For each pair the trace distance must be at most ``relation.tau`` and some
    subset in ``relation.xi`` must leave equal marginals once discarded.
    Failures are counted in the report, never raised.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if relation.kind == W1_TAU:
        raise ValueError("W1 relations cannot be checked exactly")
    rng = make_rng(seed)
    tv = mv = 0
    worst_excess = -math.inf
    worst_marg = 0.0
    for _ in range(trials):
        x = encoder.sample(rng)
        x2 = encoder.perturb(x, classical, rng)
        a, b = encoder.encode(x), encoder.encode(x2)
        excess = trace_distance(a, b) - relation.tau
        worst_excess = max(worst_excess, excess)
        if excess > VERIFY_TOL:
            tv += 1
        best = min(marginal_mismatch(a, b, s) for s in relation.xi)
        worst_marg = max(worst_marg, best)
        if best > VERIFY_TOL:
            mv += 1
    return PreservingReport(trials, tv, mv, worst_excess, worst_marg)
