"""Quantum and classical divergences used by the privacy bounds.

Every routine works on dense matrices through eigendecompositions. Logarithms
are natural. Support violations return ``math.inf``, never a large float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .qstate import DensityMatrix, DimensionError, OutcomeDistribution, hermitize

SUPPORT_CUTOFF = 1e-12
CONVEXITY_TOL = 1e-9


def _match(rho: DensityMatrix, sigma: DensityMatrix) -> None:
    if rho.n != sigma.n:
        raise DimensionError(f"states act on {rho.n} and {sigma.n} qubits")


def _eigh(a: np.ndarray):
    return np.linalg.eigh(hermitize(a))


def trace_norm_hermitian(a: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(hermitize(a)))))


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Half the trace norm of ``rho - sigma``."""
    _match(rho, sigma)
    return 0.5 * trace_norm_hermitian(rho.data - sigma.data)


def hockey_stick(rho: DensityMatrix, sigma: DensityMatrix, gamma: float) -> float:
    """E_gamma(rho || sigma) = Tr(rho - gamma sigma)^+.

    Args:
        rho: First state.
        sigma: Second state.
        gamma: Threshold, at least 1.

    Returns:
        The sum of the positive eigenvalues of ``rho - gamma * sigma``.
    """
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    _match(rho, sigma)
    if math.isinf(gamma):
        return 0.0
    w = np.linalg.eigvalsh(hermitize(rho.data - gamma * sigma.data))
    return float(np.sum(w[w > 0]))


def dp_delta(rho: DensityMatrix, sigma: DensityMatrix, epsilon: float) -> float:
    """Smallest delta making the pair (epsilon, delta)-indistinguishable in this order."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    return hockey_stick(rho, sigma, math.exp(epsilon))


def _support_split(sigma: DensityMatrix):
    w, v = _eigh(sigma.data)
    mask = w > SUPPORT_CUTOFF
    return w, v, mask


def _outside_support(rho: DensityMatrix, v: np.ndarray, mask: np.ndarray) -> bool:
    """True when rho has weight outside the span of ``v[:, mask]``."""
    if mask.all():
        return False
    vk = v[:, ~mask]
    leak = np.real(np.trace(vk.conj().T @ rho.data @ vk))
    return leak > SUPPORT_CUTOFF


def _matrix_power_psd(w: np.ndarray, v: np.ndarray, power: float, mask: np.ndarray) -> np.ndarray:
    wp = np.zeros_like(w)
    wp[mask] = w[mask] ** power
    return (v * wp) @ v.conj().T


def petz_renyi(rho: DensityMatrix, sigma: DensityMatrix, alpha: float) -> float:
    """Petz-Renyi divergence of order ``alpha > 1`` (natural log)."""
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    _match(rho, sigma)
    ws, vs, ms = _support_split(sigma)
    if _outside_support(rho, vs, ms):
        return math.inf
    wr, vr = _eigh(rho.data)
    mr = wr > SUPPORT_CUTOFF
    rho_a = _matrix_power_psd(wr, vr, alpha, mr)
    sig_b = _matrix_power_psd(ws, vs, 1 - alpha, ms)
    q = float(np.real(np.trace(rho_a @ sig_b)))
    if q <= 0:
        return -math.inf
    return math.log(q) / (alpha - 1)


def relative_entropy(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Umegaki relative entropy Tr[rho (log rho - log sigma)]."""
    _match(rho, sigma)
    ws, vs, ms = _support_split(sigma)
    if _outside_support(rho, vs, ms):
        return math.inf
    wr, vr = _eigh(rho.data)
    mr = wr > SUPPORT_CUTOFF
    ent = float(np.sum(wr[mr] * np.log(wr[mr])))
    log_sig = np.zeros_like(ws)
    log_sig[ms] = np.log(ws[ms])
    cross = float(np.real(np.trace(rho.data @ ((vs * log_sig) @ vs.conj().T))))
    return max(ent - cross, 0.0)


def max_divergence(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """log of the largest eigenvalue of sigma^{-1/2} rho sigma^{-1/2} on supp(sigma)."""
    _match(rho, sigma)
    ws, vs, ms = _support_split(sigma)
    if _outside_support(rho, vs, ms):
        return math.inf
    proj = vs[:, ms] / np.sqrt(ws[ms])
    m = proj.conj().T @ rho.data @ proj
    lam = float(np.linalg.eigvalsh(hermitize(m))[-1])
    if lam <= 0:
        return -math.inf
    return math.log(lam)


def bh_bound(rel_entropy: float) -> float:
    """Bretagnolle-Huber style bound sqrt(1 - exp(-D)) on the trace distance."""
    if rel_entropy < 0 or math.isnan(rel_entropy):
        raise ValueError(f"relative entropy must be >= 0, got {rel_entropy}")
    if math.isinf(rel_entropy):
        return 1.0
    return math.sqrt(-math.expm1(-rel_entropy))


def pinsker_bound(rel_entropy: float) -> float:
    """Pinsker bound sqrt(D/2)."""
    if rel_entropy < 0 or math.isnan(rel_entropy):
        raise ValueError(f"relative entropy must be >= 0, got {rel_entropy}")
    return math.sqrt(rel_entropy / 2)


@dataclass(frozen=True)
class ConvexityReport:
    lhs: float
    rhs: float
    holds: bool
    slack: float


def ajc_parameters(p: float, gamma: float) -> tuple[float, float]:
    """(gamma', beta) for advanced joint convexity: gamma' = 1 + (1-p)(gamma-1), beta = gamma'/gamma."""
    gp = 1 + (1 - p) * (gamma - 1)
    return gp, gp / gamma


def check_advanced_joint_convexity(rho0: DensityMatrix, rho1: DensityMatrix, rho2: DensityMatrix,
                                   p: float, gamma: float) -> ConvexityReport:
    """Evaluate both sides of advanced joint convexity for one triple."""
    if not 0 <= p <= 1:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    _match(rho0, rho1)
    _match(rho0, rho2)
    gp, beta = ajc_parameters(p, gamma)
    a = DensityMatrix(p * rho0.data + (1 - p) * rho1.data, validate=False)
    b = DensityMatrix(p * rho0.data + (1 - p) * rho2.data, validate=False)
    lhs = hockey_stick(a, b, gp)
    rhs = (1 - p) * (1 - beta) * hockey_stick(rho1, rho0, gamma) + (1 - p) * beta * hockey_stick(rho1, rho2, gamma)
    return ConvexityReport(lhs=lhs, rhs=rhs, holds=lhs <= rhs + CONVEXITY_TOL, slack=rhs - lhs)


# classical counterparts


def _aligned(d1: OutcomeDistribution, d2: OutcomeDistribution, tol: float = 1e-9):
    xs = np.union1d(d1.outcomes, d2.outcomes)
    merged = [xs[0]]
    for x in xs[1:]:
        if x - merged[-1] > tol:
            merged.append(x)
    grid = np.array(merged)

    def project(d):
        out = np.zeros(len(grid))
        idx = np.argmin(np.abs(grid[:, None] - d.outcomes[None, :]), axis=0)
        np.add.at(out, idx, d.probabilities)
        return out

    return grid, project(d1), project(d2)


def classical_hockey_stick(d1: OutcomeDistribution, d2: OutcomeDistribution, gamma: float) -> float:
    """sum_x (P(x) - gamma Q(x))^+ for two finite distributions."""
    if not gamma >= 1:
        raise ValueError(f"gamma must be >= 1, got {gamma}")
    _, p, q = _aligned(d1, d2)
    return float(np.sum(np.clip(p - gamma * q, 0.0, None)))


def density_hockey_stick(f: np.ndarray, g: np.ndarray, grid: np.ndarray, gamma: float) -> float:
    """Trapezoid integral of (f - gamma g)^+ over a sampled grid."""
    integrand = np.clip(np.asarray(f) - gamma * np.asarray(g), 0.0, None)
    return float(np.trapezoid(integrand, grid))
