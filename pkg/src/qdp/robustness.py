"""Certified robustness of a noisy 4-qubit variational classifier.

The circuit applies two blocks of trainable ZYZ rotations with CNOT
entanglers to |0000>, then encodes features with R_x(x_i) on each qubit,
then applies local depolarizing noise. Class 0 is read from
O_1 = (1/8) sum_i (Z_i + 1) and class 1 from O_2 = 1 - O_1.

Two simulation paths are provided. :func:`build_circuit_state` is a dense
density-matrix reference. Training and classification use a statevector
shortcut: depolarizing noise scales each single-qubit Z by (1 - p), and the
final R_x rotation maps Z to cos(x) Z + sin(x) Y.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .channels import apply_local_depolarizing
from .privacy import delta_local_measurement
from .qstate import (
    PAULI_MATRICES,
    DensityMatrix,
    PauliObservable,
    QubitSubset,
    apply_unitary,
    make_rng,
    seed_sequence,
)

N_QUBITS = 4
N_BLOCKS = 2
THETA_SHAPE = (N_BLOCKS, N_QUBITS, 3)

_X, _Y, _Z = PAULI_MATRICES["X"], PAULI_MATRICES["Y"], PAULI_MATRICES["Z"]
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def rz(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def ry(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(a: float) -> np.ndarray:
    c, s = math.cos(a / 2), math.sin(a / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def rot(phi: float, theta: float, omega: float) -> np.ndarray:
    """RZ(omega) RY(theta) RZ(phi)."""
    return rz(omega) @ ry(theta) @ rz(phi)


def class_observables(n: int = N_QUBITS) -> tuple[PauliObservable, PauliObservable]:
    """O_1 = (1/8) sum_i (Z_i + 1) and O_2 = 1 - O_1 on n qubits (scaled by 1/(2n))."""
    c = 1.0 / (2 * n)
    terms = [(c * n, "I" * n)] + [(c, "I" * i + "Z" + "I" * (n - i - 1)) for i in range(n)]
    o1 = PauliObservable(n, terms)
    o2 = PauliObservable(n, [(1 - c * n, "I" * n)] + [(-c, w) for _, w in terms[1:]])
    return o1, o2


def entangler_pairs(block: int, ranges: Sequence[int]) -> list[tuple[int, int]]:
    """CNOT (control, target) pairs of one block: i -> i + r (mod 4) for i = 1..4."""
    r = ranges[block]
    return [(i, ((i - 1 + r) % N_QUBITS) + 1) for i in range(1, N_QUBITS + 1)]


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Trainable angles, noise level and class observables.

    Attributes:
        theta: Angles of shape (2, 4, 3), as (block, qubit, ZYZ angle).
        noise_p: Local depolarizing strength applied after the encoding.
        observables: Class observables with spectra in [0, 1].
        ranges: CNOT range of each block. (1, 1) gives ring entanglers
            in both blocks. (1, 2) gives the alternating pattern.
    """

    theta: np.ndarray
    noise_p: float = 0.0
    observables: tuple[PauliObservable, ...] = field(default_factory=class_observables)
    ranges: tuple[int, ...] = (1, 1)

    def __post_init__(self):
        th = np.array(self.theta, dtype=float)
        if th.shape != THETA_SHAPE:
            raise ValueError(f"theta must have shape {THETA_SHAPE}, got {th.shape}")
        if not 0 <= self.noise_p <= 1:
            raise ValueError("noise_p must lie in [0, 1]")
        if len(self.observables) < 2:
            raise ValueError("need at least two class observables")
        if len(self.ranges) != N_BLOCKS:
            raise ValueError("one CNOT range per block")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "ranges", tuple(int(r) for r in self.ranges))

    @property
    def k(self) -> int:
        return len(self.observables)

    def with_theta(self, theta) -> "ClassifierModel":
        return replace(self, theta=np.asarray(theta, float))


def init_model(seed, noise_p: float = 0.0, scale: float = 0.1, ranges=(1, 1)) -> ClassifierModel:
    theta = make_rng(seed).normal(0.0, scale, size=THETA_SHAPE)
    return ClassifierModel(theta, noise_p, ranges=tuple(ranges))


# dense reference path


def build_circuit_state(model: ClassifierModel, x) -> DensityMatrix:
    """Noisy output state for features ``x`` (dense density matrix)."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != N_QUBITS:
        raise ValueError(f"expected {N_QUBITS} features, got {x.size}")
    rho = DensityMatrix.basis("0" * N_QUBITS)
    for b in range(N_BLOCKS):
        for q in range(N_QUBITS):
            rho = apply_unitary(rho, rot(*model.theta[b, q]), [q + 1])
        for c, t in entangler_pairs(b, model.ranges):
            rho = apply_unitary(rho, CNOT, [c, t])
    for q in range(N_QUBITS):
        rho = apply_unitary(rho, rx(x[q]), [q + 1])
    if model.noise_p > 0:
        rho = apply_local_depolarizing(rho, model.noise_p, QubitSubset(range(1, N_QUBITS + 1)))
    return rho


# statevector path


def _apply_1q(psi: np.ndarray, u: np.ndarray, q: int) -> np.ndarray:
    t = np.moveaxis(psi.reshape((2,) * N_QUBITS), q, 0)
    t = np.tensordot(u, t, axes=(1, 0))
    return np.moveaxis(t, 0, q).reshape(-1)


def _apply_cnot(psi: np.ndarray, c: int, t: int) -> np.ndarray:
    s = psi.reshape((2,) * N_QUBITS).copy()
    idx = [slice(None)] * N_QUBITS
    idx[c] = 1
    sub = s[tuple(idx)]
    # after fixing the control axis the target axis shifts left if it came later
    tax = t if t < c else t - 1
    s[tuple(idx)] = np.flip(sub, axis=tax)
    return s.reshape(-1)


def trainable_state(theta: np.ndarray, ranges=(1, 1)) -> np.ndarray:
    """U(theta)|0000> as a statevector (before encoding and noise)."""
    psi = np.zeros(1 << N_QUBITS, dtype=complex)
    psi[0] = 1.0
    for b in range(N_BLOCKS):
        for q in range(N_QUBITS):
            psi = _apply_1q(psi, rot(*theta[b, q]), q)
        for c, t in entangler_pairs(b, ranges):
            psi = _apply_cnot(psi, c - 1, t - 1)
    return psi


def bloch_yz(psi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-qubit <Y_i> and <Z_i> of a statevector."""
    t = psi.reshape((2,) * N_QUBITS)
    ys, zs = np.empty(N_QUBITS), np.empty(N_QUBITS)
    for q in range(N_QUBITS):
        m = np.moveaxis(t, q, 0).reshape(2, -1)
        r = m @ m.conj().T
        zs[q] = float(np.real(r[0, 0] - r[1, 1]))
        ys[q] = float(2 * np.imag(r[1, 0]))
    return ys, zs


def _scores_from_bloch(ys, zs, X: np.ndarray, p: float) -> np.ndarray:
    z_enc = np.cos(X) * zs + np.sin(X) * ys
    return 0.5 + (1 - p) * z_enc.sum(axis=1) / (2 * N_QUBITS)


def expected_scores(model: ClassifierModel, X) -> np.ndarray:
    """Exact Tr[O_1 rho(theta; x)] for each row of ``X``."""
    X = np.atleast_2d(np.asarray(X, float))
    ys, zs = bloch_yz(trainable_state(model.theta, model.ranges))
    return _scores_from_bloch(ys, zs, X, model.noise_p)


def _shifted_bloch(theta: np.ndarray, ranges) -> tuple[np.ndarray, np.ndarray]:
    """Bloch components for theta shifted by +-pi/2 in each angle; shape (24, 2, 4)."""
    flat = theta.reshape(-1)
    out_y = np.empty((flat.size, 2, N_QUBITS))
    out_z = np.empty((flat.size, 2, N_QUBITS))
    for j in range(flat.size):
        for s, sign in enumerate((1.0, -1.0)):
            th = flat.copy()
            th[j] += sign * math.pi / 2
            out_y[j, s], out_z[j, s] = bloch_yz(trainable_state(th.reshape(THETA_SHAPE), ranges))
    return out_y, out_z


def loss_and_gradient(model: ClassifierModel, X: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error and its parameter-shift gradient."""
    p = model.noise_p
    f = expected_scores(model, X)
    resid = f - targets
    sy, sz = _shifted_bloch(model.theta, model.ranges)
    grad = np.empty(sy.shape[0])
    for j in range(sy.shape[0]):
        fp = _scores_from_bloch(sy[j, 0], sz[j, 0], X, p)
        fm = _scores_from_bloch(sy[j, 1], sz[j, 1], X, p)
        grad[j] = np.mean(2 * resid * (fp - fm) / 2)
    return float(np.mean(resid ** 2)), grad.reshape(THETA_SHAPE)


def outcome_probabilities(model: ClassifierModel, x) -> np.ndarray:
    """Probabilities of the O_1 outcomes j/4, j = 0..4 (number of qubits reading 0, over 4)."""
    psi = trainable_state(model.theta, model.ranges)
    for q in range(N_QUBITS):
        psi = _apply_1q(psi, rx(float(x[q])), q)
    probs = (np.abs(psi) ** 2).reshape((2,) * N_QUBITS)
    flip = model.noise_p / 2
    if flip > 0:
        m = np.array([[1 - flip, flip], [flip, 1 - flip]])
        for q in range(N_QUBITS):
            probs = np.moveaxis(np.tensordot(m, np.moveaxis(probs, q, 0), axes=(1, 0)), 0, q)
    probs = probs.reshape(-1)
    zeros = np.array([N_QUBITS - bin(i).count("1") for i in range(1 << N_QUBITS)])
    out = np.bincount(zeros, weights=probs, minlength=N_QUBITS + 1)
    return np.clip(out, 0.0, None) / out.sum()


@dataclass(frozen=True)
class LabeledDataset:
    """Features in rows, 0-based integer labels and the min/max used for scaling."""

    X: np.ndarray
    y: np.ndarray
    feature_min: np.ndarray | None = None
    feature_max: np.ndarray | None = None
    classes: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, float))
        y = np.asarray(self.y, int).ravel()
        if X.shape[0] != y.size:
            raise ValueError("feature and label counts differ")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if y.size and y.min() < 0:
            raise ValueError("labels are 0-based")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.y.size

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx], self.y[idx], self.feature_min, self.feature_max, self.classes)


def load_dataset(path, n_features: int = N_QUBITS) -> LabeledDataset:
    """Read a CSV with a header, ``n_features`` numeric columns and a label column.

    Only the first two distinct labels in file order are kept. They map to
    0 and 1. Features are min-max scaled to [0, 1] over the retained rows.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise ValueError(f"{path}: no data rows")
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) != n_features + 1:
        raise ValueError(f"{path}: expected {n_features + 1} columns, found {len(header)}")
    classes: list[str] = []
    feats, labels = [], []
    for lineno, r in enumerate(body, start=2):
        if len(r) != n_features + 1:
            raise ValueError(f"{path}:{lineno}: expected {n_features + 1} columns, found {len(r)}")
        lab = r[-1].strip()
        if lab not in classes:
            if len(classes) == 2:
                continue
            classes.append(lab)
        feats.append([float(v) for v in r[:-1]])
        labels.append(classes.index(lab))
    X = np.array(feats)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return LabeledDataset((X - lo) / span, np.array(labels), lo, hi, tuple(classes))


def stratified_split(data: LabeledDataset, test_fraction: float, seed) -> tuple[LabeledDataset, LabeledDataset]:
    rng = make_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(data.y):
        idx = rng.permutation(np.flatnonzero(data.y == c))
        n_test = int(round(test_fraction * idx.size))
        test_idx.extend(idx[:n_test].tolist())
        train_idx.extend(idx[n_test:].tolist())
    return data.subset(np.sort(train_idx)), data.subset(np.sort(test_idx))


def label_targets(y: np.ndarray) -> np.ndarray:
    """Target value of Tr[O_1 rho]: 1.0 for class 0, 0.0 for class 1."""
    return np.where(np.asarray(y) == 0, 1.0, 0.0)


@dataclass(frozen=True)
class TrainingHistory:
    losses: tuple[float, ...]


def train(model_init: ClassifierModel, train_set: LabeledDataset, lr: float, epochs: int, seed=None,
          optimizer: str = "gd", beta1: float = 0.9, beta2: float = 0.999, eps_adam: float = 1e-8,
          return_history: bool = False):
    """Full-batch minimization of the mean squared error with parameter-shift gradients.

    Args:
        model_init: Starting model; its noise level is used during training.
        train_set: Training rows with 0-based labels.
        lr: Step size.
        epochs: Number of full-batch steps.
        seed: Unused by the deterministic optimizers; kept so every stochastic
            entry point takes a seed.
        optimizer: ``"gd"`` (default) or ``"adam"``.

    Returns:
        The trained model, or (model, history) with ``return_history=True``.
    """
    if optimizer not in ("gd", "adam"):
        raise ValueError(f"unknown optimizer {optimizer!r}")
    X, t = train_set.X, label_targets(train_set.y)
    theta = np.array(model_init.theta, float)
    m1 = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    losses = []
    model = model_init
    for step in range(1, epochs + 1):
        loss, grad = loss_and_gradient(model, X, t)
        losses.append(loss)
        if optimizer == "gd":
            theta = theta - lr * grad
        else:
            m1 = beta1 * m1 + (1 - beta1) * grad
            m2 = beta2 * m2 + (1 - beta2) * grad ** 2
            mh = m1 / (1 - beta1 ** step)
            vh = m2 / (1 - beta2 ** step)
            theta = theta - lr * mh / (np.sqrt(vh) + eps_adam)
        model = model.with_theta(theta)
    if epochs > 0:
        losses.append(float(np.mean((expected_scores(model, X) - t) ** 2)))
    if return_history:
        return model, TrainingHistory(tuple(losses))
    return model


@dataclass(frozen=True)
class ClassificationResult:
    label: int
    scores: np.ndarray
    m: int


def classify(model: ClassifierModel, x, m: int | None, seed=None) -> ClassificationResult:
    """Estimate each class score from m shots and return the argmax (ties go to the lower index).

    ``m=None`` uses exact expectations instead of shots.
    """
    if m is not None and m < 1:
        raise ValueError("m must be >= 1")
    probs = outcome_probabilities(model, x)
    values = np.arange(N_QUBITS + 1) / N_QUBITS
    if m is None:
        s1 = float(values @ probs)
        scores = np.array([s1, 1 - s1])
    else:
        rngs = [np.random.Generator(np.random.PCG64(s)) for s in seed_sequence(seed).spawn(2)]
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        draws = [values[np.minimum(np.searchsorted(cdf, r.random(m), side="right"), N_QUBITS)] for r in rngs]
        scores = np.array([draws[0].mean(), 1 - draws[1].mean()])
    return ClassificationResult(int(np.argmax(scores)), scores, 0 if m is None else m)


def statistical_margin(k: int, beta: float, m: int) -> float:
    """g(k, beta, m) = sqrt((2/m) log(4k/beta))."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    if m < 1:
        raise ValueError("m must be >= 1")
    return math.sqrt(2 / m * math.log(4 * k / beta))


def _top_two(scores) -> tuple[float, float]:
    s = np.sort(np.asarray(scores, float))[::-1]
    return float(s[0]), float(s[1])


def robustness_margin(scores, eps: float, k: int, m: int | None, beta: float) -> float:
    """(y* - e^{2 eps} y_2 - g) / (1 + e^eps); g = 0 when m is None."""
    y1, y2 = _top_two(scores)
    g = 0.0 if m is None else statistical_margin(k, beta, m)
    return (y1 - math.exp(2 * eps) * y2 - g) / (1 + math.exp(eps))


def robustness_condition(scores, eps: float, delta: float, k: int, m: int | None, beta: float) -> bool:
    """y* > e^{2 eps} y_2 + (1 + e^eps) delta + g(k, beta, m)."""
    if not 0 < beta <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    y1, y2 = _top_two(scores)
    g = 0.0 if m is None else statistical_margin(k, beta, m)
    return y1 > math.exp(2 * eps) * y2 + (1 + math.exp(eps)) * delta + g


def default_eps_grid() -> np.ndarray:
    return np.logspace(-3, math.log10(3), 21)


@dataclass(frozen=True)
class RowCertificate:
    correct: bool
    scores: np.ndarray
    margins: np.ndarray


def row_seed(seed, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), *[int(p) for p in path]])


def certify_rows(model: ClassifierModel, test: LabeledDataset, beta: float, m: int, seed,
                 eps_grid=None, seed_path=()) -> list[RowCertificate]:
    """Classify every row once and record its robustness margin on the epsilon grid."""
    if len(test) == 0:
        raise ValueError("empty test set")
    eps_grid = default_eps_grid() if eps_grid is None else np.asarray(eps_grid, float)
    out = []
    for i in range(len(test)):
        res = classify(model, test.X[i], m, row_seed(seed, *seed_path, i))
        margins = np.array([robustness_margin(res.scores, e, model.k, m, beta) for e in eps_grid])
        out.append(RowCertificate(res.label == test.y[i], res.scores, margins))
    return out


def privacy_for_attack(p: float, tau: float, eps_grid) -> list:
    """(eps, delta_1) guarantees for a single-feature attack of size tau under local noise p."""
    from .encodings import NeighbourRelation
    from .privacy import PrivacyGuarantee

    rel = NeighbourRelation.window(N_QUBITS, 1, min(1.0, tau))
    return [PrivacyGuarantee(float(e), delta_local_measurement(p, 1, min(1.0, tau), float(e)), rel,
                             "local-noisy-measurement") for e in np.asarray(eps_grid, float)]


def certified_fraction(rows: Sequence[RowCertificate], p: float, tau: float, eps_grid=None) -> float:
    """Fraction of rows that are correct and whose margin beats delta_1 for some epsilon on the grid."""
    eps_grid = default_eps_grid() if eps_grid is None else np.asarray(eps_grid, float)
    deltas = np.array([g.delta for g in privacy_for_attack(p, tau, eps_grid)])
    hits = [r.correct and bool(np.any(deltas < r.margins)) for r in rows]
    return float(np.mean(hits))


def certified_accuracy(model: ClassifierModel, test: LabeledDataset, eps, delta, beta: float, m: int, seed) -> float:
    """Fraction of test rows classified correctly with delta below the row's robustness margin.

    ``eps`` and ``delta`` are scalars, or equal-length arrays. With arrays a
    row counts when any (eps, delta) pair certifies it.
    """
    eps = np.atleast_1d(np.asarray(eps, float))
    delta = np.broadcast_to(np.asarray(delta, float), eps.shape)
    rows = certify_rows(model, test, beta, m, seed, eps)
    return float(np.mean([r.correct and bool(np.any(delta < r.margins)) for r in rows]))


def accuracy(rows: Sequence[RowCertificate]) -> float:
    return float(np.mean([r.correct for r in rows]))


@dataclass(frozen=True)
class ExperimentConfig:
    p_values: tuple[float, ...] = (0.0, 0.1, 0.3)
    tau_values: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(11))
    m: int = 1000
    beta: float = 0.05
    lr: float = 2.0
    epochs: int = 200
    optimizer: str = "gd"
    init_scale: float = 0.1
    test_fraction: float = 0.2
    ranges: tuple[int, ...] = (1, 1)
    eps_min: float = 1e-3
    eps_max: float = 3.0
    eps_points: int = 21

    def eps_grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.eps_min), math.log10(self.eps_max), self.eps_points)


@dataclass(frozen=True)
class ExperimentRow:
    p: float
    tau: float
    certified_accuracy: float
    test_accuracy: float


def run_experiment(data: LabeledDataset, cfg: ExperimentConfig, seed: int) -> tuple[list[ExperimentRow], dict]:
    """Train one model per noise level and tabulate certified accuracy over tau."""
    train_set, test_set = stratified_split(data, cfg.test_fraction, row_seed(seed, 0))
    eps_grid = cfg.eps_grid()
    rows, info = [], {"train_size": len(train_set), "test_size": len(test_set), "final_loss": {}}
    init_theta = init_model(row_seed(seed, 1), scale=cfg.init_scale).theta
    for ip, p in enumerate(cfg.p_values):
        model0 = ClassifierModel(init_theta, p, ranges=cfg.ranges)
        model, hist = train(model0, train_set, cfg.lr, cfg.epochs, seed, optimizer=cfg.optimizer, return_history=True)
        info["final_loss"][repr(float(p))] = hist.losses[-1] if hist.losses else None
        certs = certify_rows(model, test_set, cfg.beta, cfg.m, seed, eps_grid, seed_path=(2, ip))
        acc = accuracy(certs)
        for tau in cfg.tau_values:
            rows.append(ExperimentRow(float(p), float(tau), certified_fraction(certs, p, tau, eps_grid), acc))
    return rows, info
