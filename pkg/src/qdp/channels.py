"""Noise channels and light-cone bookkeeping.

Channels are applied operationally. An inner channel is one of
:class:`Identity`, :class:`UnitaryConjugation`, :class:`PauliChannel` or a
:class:`Composite` of those, and :class:`MixtureChannel` wraps it as
``p * I/2^n + (1 - p) * inner(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

from .qstate import (
    PAULI_MATRICES,
    DensityMatrix,
    DimensionError,
    QubitSubset,
    apply_operator,
    apply_unitary,
    max_qubits,
)

KRAUS_TOL = 1e-12


@dataclass(frozen=True)
class Identity:
    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return rho


@dataclass(frozen=True, eq=False)
class UnitaryConjugation:
    """rho -> U rho U^dagger with U acting on ``targets`` (all qubits if omitted)."""

    unitary: np.ndarray
    targets: tuple[int, ...] | None = None

    def __post_init__(self):
        u = np.array(self.unitary, dtype=complex)
        dim = u.shape[0]
        if u.ndim != 2 or u.shape[1] != dim:
            raise DimensionError("unitary must be square")
        if not np.allclose(u.conj().T @ u, np.eye(dim), atol=1e-10):
            raise ValueError("matrix is not unitary")
        if self.targets is not None:
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        u.setflags(write=False)
        object.__setattr__(self, "unitary", u)

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        targets = self.targets if self.targets is not None else tuple(range(1, rho.n + 1))
        return apply_unitary(rho, self.unitary, targets)


def pauli_kraus_probabilities(qx: float, qy: float, qz: float) -> tuple[float, float, float, float]:
    """(p_I, p_X, p_Y, p_Z) of the Pauli channel contracting Bloch components by (qx, qy, qz)."""
    p_i = (1 + qx + qy + qz) / 4
    p_x = (1 + qx - qy - qz) / 4
    p_y = (1 - qx + qy - qz) / 4
    p_z = (1 - qx - qy + qz) / 4
    return p_i, p_x, p_y, p_z


@dataclass(frozen=True)
class PauliChannel:
    qx: float
    qy: float
    qz: float
    qubit: int

    def __post_init__(self):
        probs = pauli_kraus_probabilities(self.qx, self.qy, self.qz)
        if min(probs) < -KRAUS_TOL:
            raise ValueError(f"(qx, qy, qz) = {(self.qx, self.qy, self.qz)} is not completely positive")
        if self.qubit < 1:
            raise ValueError("qubit indices are 1-based")

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        return apply_pauli_channel(rho, self.qx, self.qy, self.qz, self.qubit)


@dataclass(frozen=True)
class Composite:
    """Inner channels applied left to right."""

    parts: tuple = ()

    def apply(self, rho: DensityMatrix) -> DensityMatrix:
        for part in self.parts:
            rho = part.apply(rho)
        return rho


InnerChannel = Union[Identity, UnitaryConjugation, PauliChannel, Composite]


@dataclass(frozen=True)
class MixtureChannel:
    n: int
    p: float
    inner: InnerChannel = field(default_factory=Identity)

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 1 <= self.n <= max_qubits():
            raise DimensionError(f"n = {self.n} outside [1, {max_qubits()}]")


def apply_mixture(ch: MixtureChannel, rho: DensityMatrix) -> DensityMatrix:
    """p * I/2^n + (1 - p) * inner(rho)."""
    if rho.n != ch.n:
        raise DimensionError(f"channel acts on {ch.n} qubits, state has {rho.n}")
    out = ch.inner.apply(rho)
    dim = 1 << ch.n
    return DensityMatrix(ch.p * np.eye(dim) / dim + (1 - ch.p) * out.data, validate=False)


def apply_pauli_channel(rho: DensityMatrix, qx: float, qy: float, qz: float, qubit: int) -> DensityMatrix:
    """Single-qubit Pauli channel as a Kraus sum over I, X, Y, Z."""
    probs = pauli_kraus_probabilities(qx, qy, qz)
    if min(probs) < -KRAUS_TOL:
        raise ValueError(f"(qx, qy, qz) = {(qx, qy, qz)} is not completely positive")
    QubitSubset([qubit]).check(rho.n)
    n = rho.n
    out = np.zeros_like(rho.data)
    for prob, name in zip(probs, "IXYZ"):
        prob = max(prob, 0.0)
        if prob == 0:
            continue
        if name == "I":
            out += prob * rho.data
            continue
        op = PAULI_MATRICES[name]
        left = apply_operator(rho.data, op, [qubit], n)
        out += prob * apply_operator(left.conj().T, op, [qubit], n).conj().T
    return DensityMatrix(out, validate=False)


def apply_local_depolarizing(rho: DensityMatrix, p: float, qubits: QubitSubset | Iterable[int]) -> DensityMatrix:
    """Apply sigma -> p I/2 + (1 - p) sigma independently on each listed qubit."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    qubits = qubits if isinstance(qubits, QubitSubset) else QubitSubset(qubits)
    qubits.check(rho.n)
    for q in qubits:
        rho = apply_pauli_channel(rho, 1 - p, 1 - p, 1 - p, q)
    return rho


def depolarizing(n: int, p: float) -> MixtureChannel:
    return MixtureChannel(n, p, Identity())


@dataclass(frozen=True)
class LightCone:
    """Forward light-cone: ``per_qubit[i]`` holds the output qubits input qubit i can affect."""

    n: int
    per_qubit: Mapping[int, QubitSubset]

    def __post_init__(self):
        cones = {}
        for i in range(1, self.n + 1):
            s = self.per_qubit.get(i, QubitSubset([i]))
            s = s if isinstance(s, QubitSubset) else QubitSubset(s)
            s.check(self.n)
            if i not in s:
                raise ValueError(f"light-cone of qubit {i} must contain the qubit itself")
            cones[i] = s
        object.__setattr__(self, "per_qubit", cones)

    @property
    def bound(self) -> int:
        return max(len(s) for s in self.per_qubit.values())

    def image(self, subset: QubitSubset) -> QubitSubset:
        """Output qubits reachable from any qubit of ``subset``."""
        out: set[int] = set()
        for i in subset:
            out.update(self.per_qubit[i])
        return QubitSubset(out)

    @classmethod
    def identity(cls, n: int) -> "LightCone":
        return cls(n, {})

    @classmethod
    def from_layer(cls, n: int, gates: Sequence[Sequence[int]]) -> "LightCone":
        """Cone of one layer of gates with the given target tuples."""
        cones = {i: {i} for i in range(1, n + 1)}
        for targets in gates:
            for t in targets:
                cones[t].update(targets)
        return cls(n, {i: QubitSubset(s) for i, s in cones.items()})


def lightcone_compose(a: LightCone, b: LightCone) -> LightCone:
    """Cone of applying ``a`` first and then ``b``."""
    if a.n != b.n:
        raise DimensionError("light-cones act on different qubit counts")
    return LightCone(a.n, {i: b.image(a.per_qubit[i]) for i in range(1, a.n + 1)})
