"""Privacy guarantees, profiles and mechanisms for noisy quantum measurements.

Every bound returns a plain float or a :class:`PrivacyGuarantee`. Profiles
are evaluated on an epsilon grid and returned as :class:`PrivacyProfile`.
Deltas are clamped to ``[0, 1]`` throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .encodings import ELL_TAU, TRACE_TAU, W1_TAU, XI_TAU, NeighbourRelation
from .qstate import (
    OutcomeDistribution,
    PauliObservable,
    QubitSubset,
    make_rng,
    observable_matrix,
    sample_outcomes,
    seed_sequence,
)

Eta = Union[float, Callable[[float], float], None]


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


def _check_unit(name: str, x: float) -> None:
    if not 0 <= x <= 1:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


@dataclass(frozen=True)
class PrivacyGuarantee:
    """An (epsilon, delta) pair with the relation and result that produced it."""

    epsilon: float
    delta: float
    relation: NeighbourRelation | None = None
    provenance: str = ""

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not -1e-12 <= self.delta <= 1 + 1e-12:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")
        object.__setattr__(self, "delta", _clamp01(self.delta))


@dataclass(frozen=True)
class PrivacyProfile:
    """delta(epsilon) on a strictly increasing grid.

    ``deltas`` is the reported profile. It is the pointwise minimum of the
    available branches, made non-increasing with a running minimum (an
    (eps, delta) guarantee also holds for every larger eps). ``delta_old`` and
    ``delta_new`` keep the raw branch values; ``delta_new`` is ``None`` when no
    eta was supplied.
    """

    epsilons: np.ndarray
    deltas: np.ndarray
    delta_old: np.ndarray
    delta_new: np.ndarray | None
    params: dict = field(default_factory=dict)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.epsilons.tolist(), self.deltas.tolist()))


def _grid(eps_grid) -> np.ndarray:
    eps = np.atleast_1d(np.asarray(eps_grid, dtype=float))
    if eps.size == 0:
        raise ValueError("empty epsilon grid")
    if np.any(eps < 0):
        raise ValueError("epsilon values must be >= 0")
    if np.any(np.diff(eps) <= 0):
        raise ValueError("epsilon grid must be strictly increasing")
    return eps


def mixture_gamma_beta(p_eff: float, eps: float) -> tuple[float, float]:
    """gamma = 1 + (e^eps - 1)/(1 - p) and beta = e^eps / gamma."""
    gamma = 1 + math.expm1(eps) / (1 - p_eff)
    return gamma, math.exp(eps) / gamma


def old_bound(p_eff: float, dim: float, tau: float, eps: float) -> float:
    """max{0, (1 - e^eps) p / dim + (1 - p) tau}."""
    return _clamp01(-math.expm1(eps) * p_eff / dim + (1 - p_eff) * tau)


def new_bound(p_eff: float, tau: float, eps: float, eta: Eta) -> float | None:
    """(1 - p)(1 - beta) eta + (1 - p) beta tau, or ``None`` when undefined."""
    if eta is None or p_eff >= 1:
        return None
    gamma, beta = mixture_gamma_beta(p_eff, eps)
    e = eta(gamma) if callable(eta) else float(eta)
    return _clamp01((1 - p_eff) * (1 - beta) * e + (1 - p_eff) * beta * tau)


def _profile(p_eff: float, dim: float, tau: float, eps_grid, eta: Eta, params: dict) -> PrivacyProfile:
    _check_unit("p", p_eff)
    _check_unit("tau", tau)
    eps = _grid(eps_grid)
    old = np.array([old_bound(p_eff, dim, tau, e) for e in eps])
    new = None
    best = old.copy()
    if eta is not None and p_eff < 1:
        new = np.array([new_bound(p_eff, tau, e, eta) for e in eps])
        best = np.minimum(old, new)
    best = np.minimum.accumulate(best)
    return PrivacyProfile(eps, best, old, new, params)


def profile_mixture_global(p: float, n: int, tau: float, eps_grid, eta: Eta = None) -> PrivacyProfile:
    """Profile of the mixture channel p I/2^n + (1 - p) M on tau-neighbouring states.

    Args:
        p: Mixing probability.
        n: Number of qubits.
        tau: Trace-distance bound between neighbours.
        eps_grid: Strictly increasing epsilon values.
        eta: Bound on E_gamma(rho || I/2^n). Either a constant or a function
            of gamma, since gamma changes along the grid.
    """
    return _profile(p, 2.0 ** n, tau, eps_grid, eta, {"p": p, "n": n, "tau": tau, "local": False})


def profile_mixture_local(p: float, k: int, tau: float, eps_grid, eta: Eta = None) -> PrivacyProfile:
    """Profile of k single-qubit depolarizing channels: p becomes p^k and 2^n becomes 2^k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    _check_unit("p", p)
    return _profile(p ** k, 2.0 ** k, tau, eps_grid, eta, {"p": p, "k": k, "tau": tau, "local": True})


def purity_eta(n_or_k: int, zeta: float, gamma: float) -> float:
    """Purity-based eta: sqrt(2 n zeta^(1/log 2) / gamma)."""
    return math.sqrt(2 * n_or_k * zeta ** (1 / math.log(2)) / gamma)


def purity_eta_sound(n_or_k: int, zeta: float, gamma: float) -> float:
    """sqrt(2 * 2^n * zeta / gamma), from D_2 = log(2^n zeta) in natural units."""
    return math.sqrt(2 * 2.0 ** n_or_k * zeta / gamma)


def profile_purity(p: float, n_or_k: int, tau: float, zeta: float, eps_grid, local: bool = False,
                   sound: bool = False) -> PrivacyProfile:
    """Profile for inputs with purity Tr[rho^2] <= zeta.

    The default eta follows the published closed form. With ``sound=True`` it
    uses sqrt(2 * 2^n * zeta / gamma) instead. The closed form can undercut the
    exact hockey-stick value once n grows (about n >= 7 near zeta = 1).
    """
    if not zeta < 1:
        raise ValueError(f"zeta must be < 1, got {zeta}")
    if not zeta > 0:
        raise ValueError("zeta must be positive")
    fn = purity_eta_sound if sound else purity_eta

    def eta(gamma: float) -> float:
        return fn(n_or_k, zeta, gamma)

    if local:
        prof = profile_mixture_local(p, n_or_k, tau, eps_grid, eta)
    else:
        prof = profile_mixture_global(p, n_or_k, tau, eps_grid, eta)
    prof.params.update(zeta=zeta, sound=sound)
    return prof


def delta_local_measurement(p: float, k: int, tau: float, eps: float, eta: float | None = None) -> float:
    """delta_k for measuring a commuting Pauli sum after local depolarizing noise.

    ``k`` is the largest subset size of the relation. The eta branch uses
    gamma = 1 + (e^eps - 1)/(1 - p^k).
    """
    _check_unit("p", p)
    _check_unit("tau", tau)
    pk = p ** k
    d = old_bound(pk, 2.0 ** k, tau, eps)
    alt = new_bound(pk, tau, eps, eta)
    return d if alt is None else min(d, alt)


def _acting_weight(obs: PauliObservable, subset: set[int]) -> float:
    total = 0.0
    for c, s in obs.terms:
        if any(s[i - 1] != "I" for i in subset):
            total += abs(c)
    return total


def worst_case_sensitivity(obs: PauliObservable, xi: Sequence) -> float:
    """max over I in xi of 2 * sum |c_P| over strings acting non-trivially on I."""
    if not xi:
        raise ValueError("xi must be nonempty")
    best = 0.0
    for s in xi:
        s = s if isinstance(s, QubitSubset) else QubitSubset(s)
        s.check(obs.n)
        best = max(best, 2 * _acting_weight(obs, set(s)))
    return best


def lipschitz_upper_bound(obs: PauliObservable) -> float:
    """max over qubits i of 2 * sum |c_P| over strings touching i."""
    return max((2 * _acting_weight(obs, {i}) for i in range(1, obs.n + 1)), default=0.0)


def spectral_norm(obs: PauliObservable) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(observable_matrix(obs)))))


def spectral_spread(obs: PauliObservable) -> float:
    w = np.linalg.eigvalsh(observable_matrix(obs))
    return float(w[-1] - w[0])


def average_sensitivity_bound(obs: PauliObservable, relation: NeighbourRelation) -> float:
    """Bound on max Tr[O(rho - sigma)] over neighbours.

    TraceTau uses (tau/2)||O||_inf, W1Tau uses Lip * tau, and XiTau/EllTau use
    min{1.5 Lip max|I| tau, Lip n tau}. The TraceTau rule is stated for
    ||rho - sigma||_1 <= tau. With the half-norm threshold used by
    :class:`NeighbourRelation` the tight value is
    :func:`trace_sensitivity_exact`.
    """
    tau = relation.tau
    if relation.kind == TRACE_TAU:
        return 0.5 * tau * spectral_norm(obs)
    lip = lipschitz_upper_bound(obs)
    if relation.kind == W1_TAU:
        return lip * tau
    return min(1.5 * lip * relation.max_subset * tau, lip * relation.n * tau)


def trace_sensitivity_exact(obs: PauliObservable, tau: float) -> float:
    """max Tr[O(rho - sigma)] over 0.5||rho - sigma||_1 <= tau, equal to tau (lambda_max - lambda_min)."""
    return tau * spectral_spread(obs)


def laplace_epsilon(delta_range: float, tau: float, b: float) -> float:
    """epsilon' = log(1 + tau (e^{Delta/b} - 1)) for Laplace noise after a measurement."""
    if not b > 0:
        raise ValueError(f"Laplace scale must be positive, got {b}")
    _check_unit("tau", tau)
    if delta_range < 0:
        raise ValueError("range width must be >= 0")
    return math.log1p(tau * math.expm1(delta_range / b))


def gaussian_sigma_squared(delta_range: float, eps: float, delta: float) -> float:
    return 2 * math.log(1.25 / delta) * delta_range ** 2 / eps ** 2


def gaussian_guarantee(delta_range: float, tau: float, eps: float, dp_delta_target: float,
                       relation: NeighbourRelation | None = None) -> tuple[float, PrivacyGuarantee]:
    """Gaussian noise variance and the resulting (epsilon', tau * delta) guarantee."""
    if not eps > 0:
        raise ValueError("epsilon must be positive")
    if not 0 < dp_delta_target < 1:
        raise ValueError(f"delta must lie in (0, 1), got {dp_delta_target}")
    _check_unit("tau", tau)
    s2 = gaussian_sigma_squared(delta_range, eps, dp_delta_target)
    g = PrivacyGuarantee(math.log1p(tau * math.expm1(eps)), tau * dp_delta_target, relation, "gaussian-post-processing")
    return s2, g


@dataclass(frozen=True)
class MechanismConfig:
    """Additive noise: ``kind`` is "laplace" (``scale`` = b) or "gaussian" (``scale`` = sigma)."""

    kind: str
    scale: float

    def __post_init__(self):
        if self.kind not in ("laplace", "gaussian"):
            raise ValueError(f"unknown mechanism {self.kind!r}")
        if not self.scale > 0:
            raise ValueError("noise scale must be positive")

    @classmethod
    def laplace(cls, b: float) -> "MechanismConfig":
        return cls("laplace", b)

    @classmethod
    def gaussian(cls, sigma: float) -> "MechanismConfig":
        return cls("gaussian", sigma)


def sample_noise(mech: MechanismConfig, rng: np.random.Generator, size=None):
    if mech.kind == "laplace":
        return rng.laplace(0.0, mech.scale, size=size)
    return rng.normal(0.0, mech.scale, size=size)


def add_noise(value: float, mech: MechanismConfig, seed) -> float:
    return float(value + sample_noise(mech, make_rng(seed)))


def multi_copy_width(sensitivity: float, m: int, delta_prime: float) -> float:
    """Delta + sqrt(log(4/delta')/m), the input gap the noise must hide."""
    return sensitivity + math.sqrt(math.log(4 / delta_prime) / m)


def multi_copy_half_width(m: int, delta_prime: float) -> float:
    return 0.5 * math.sqrt(math.log(4 / delta_prime) / m)


MechBuilder = Callable[[float], tuple[MechanismConfig, float, float]]


def laplace_builder(epsilon: float) -> MechBuilder:
    """Laplace noise of scale width/epsilon, which is (epsilon, 0) for gaps up to width."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    return lambda width: (MechanismConfig.laplace(width / epsilon), epsilon, 0.0)


def gaussian_builder(epsilon: float, delta: float) -> MechBuilder:
    if not epsilon > 0 or not 0 < delta < 1:
        raise ValueError("need epsilon > 0 and delta in (0, 1)")
    return lambda width: (MechanismConfig.gaussian(math.sqrt(gaussian_sigma_squared(width, epsilon, delta))), epsilon, delta)


def multi_copy_mechanism(dist: OutcomeDistribution, m: int, mech_builder: MechBuilder, delta_prime: float, seed,
                         sensitivity: float, relation: NeighbourRelation | None = None):
    """Average m measured outcomes and add noise calibrated to the multi-copy width.

    Args:
        dist: Outcome distribution of one measurement.
        m: Number of copies.
        mech_builder: Maps the width to (mechanism, epsilon, delta), see
            :func:`laplace_builder` and :func:`gaussian_builder`.
        delta_prime: Failure probability of the concentration step.
        seed: Seed for both the shots and the noise.
        sensitivity: Average sensitivity of the observable.

    Returns:
        (noisy mean, guarantee with delta = delta_mech + delta').
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if not 0 < delta_prime < 1:
        raise ValueError(f"delta' must lie in (0, 1), got {delta_prime}")
    ss = seed_sequence(seed)
    shot_seed, noise_seed = ss.spawn(2)
    mean = float(np.mean(sample_outcomes(dist, m, shot_seed)))
    mech, eps, delta = mech_builder(multi_copy_width(sensitivity, m, delta_prime))
    noisy = mean + float(sample_noise(mech, np.random.Generator(np.random.PCG64(noise_seed))))
    kind = "laplace" if mech.kind == "laplace" else "gaussian"
    return noisy, PrivacyGuarantee(eps, _clamp01(delta + delta_prime), relation, f"multi-copy-{kind}")


def inspired_sampling_alpha(u, u2) -> float:
    """1.5 * max of the normalized squared entries at indices where u and u' differ."""
    u, u2 = np.asarray(u, complex), np.asarray(u2, complex)
    diff = np.flatnonzero(u != u2)
    if diff.size == 0:
        return 0.0
    a = np.abs(u[diff]) ** 2 / np.sum(np.abs(u) ** 2)
    b = np.abs(u2[diff]) ** 2 / np.sum(np.abs(u2) ** 2)
    return 1.5 * float(max(a.max(), b.max()))


def subsample_amplification(eps: float, delta: float, m: int, alpha_bound: float) -> PrivacyGuarantee:
    """Amplification by sampling m indices with per-index probability at most ``alpha_bound``.

    Uses q = min(1, alpha_bound * m): epsilon' = log(1 + q (e^eps - 1)), delta' = q delta.
    """
    if eps < 0 or delta < 0 or m < 0 or alpha_bound < 0:
        raise ValueError("inputs must be non-negative")
    q = min(1.0, alpha_bound * m)
    return PrivacyGuarantee(math.log1p(q * math.expm1(eps)), q * delta, None, "inspired-subsampling")


def compose_parallel(g1: PrivacyGuarantee, g2: PrivacyGuarantee, measurements: bool) -> PrivacyGuarantee:
    """Parallel composition: epsilons add; deltas add for measurements, otherwise the symmetric channel form."""
    eps = g1.epsilon + g2.epsilon
    if measurements:
        delta = g1.delta + g2.delta
    else:
        delta = min(g1.delta + math.exp(g1.epsilon) * g2.delta, math.exp(g2.epsilon) * g1.delta + g2.delta)
    rel = g1.relation if g1.relation == g2.relation else None
    return PrivacyGuarantee(eps, _clamp01(delta), rel, "parallel-composition")


@dataclass(frozen=True)
class RDPGuarantee:
    alpha: float
    epsilon: float


def rdp_to_dp(alpha: float, eps_rdp: float, delta: float) -> PrivacyGuarantee:
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    return PrivacyGuarantee(eps_rdp + math.log(1 / delta) / (alpha - 1), delta, None, "rdp-to-dp")


def dp_to_rdp(eps: float, alpha: float) -> RDPGuarantee:
    if not alpha > 1:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    return RDPGuarantee(alpha, 2 * alpha * eps ** 2)


def convert_guarantee(direction: str, **params):
    """``"rdp->dp"`` takes alpha, epsilon, delta; ``"dp->rdp"`` takes epsilon, alpha."""
    if direction == "rdp->dp":
        return rdp_to_dp(params["alpha"], params["epsilon"], params["delta"])
    if direction == "dp->rdp":
        return dp_to_rdp(params["epsilon"], params["alpha"])
    raise ValueError(f"unknown direction {direction!r}")


def concentration_bound_trace(eps: float, tau: float, a: float, n: int) -> float:
    """e^{eps/tau} e^{-a^2 n}, evaluated in log space."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    return math.exp(eps / tau - a * a * n)


def w1_constant(eps: float, n: int) -> float:
    """K' = e^eps (n - e^{-eps}(n - 1))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.exp(eps) * (n - math.exp(-eps) * (n - 1))


def concentration_bound_w1(eps: float, a: float, n: int) -> float:
    return w1_constant(eps, n) * math.exp(-a * a * n)


def efficient_local_measurement(ell: int, tau: float, eps: float, a: float, b: float, t: float) -> tuple[float, float]:
    """Laplace magnitude alpha = 2 ell / log((e^eps - 1)/tau + 1) and failure bound b + e^{-t} at deviation a + t alpha."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not eps > 0 or ell < 1:
        raise ValueError("need eps > 0 and ell >= 1")
    alpha = 2 * ell / math.log1p(math.expm1(eps) / tau)
    return alpha, b + math.exp(-t)


def max_div_bound_trace(eps: float, tau: float) -> float:
    """D_inf between any two outputs of an eps-DP unital channel for tau-neighbours."""
    return eps / tau


def max_div_bound_w1(eps: float, n: int) -> float:
    return eps + math.log(n - n * math.exp(-eps) + math.exp(-eps))


def max_div_bound_local(eps: float, n: int, ell: int, tau: float) -> float:
    """Hybrid chain: ceil(n/ell) window swaps, each split into ceil(1/tau) mixing steps."""
    return eps * math.ceil(n / ell) * math.ceil(1 / tau - 1e-12)


def d2_to_hockey_stick(d2: float, eps: float) -> float:
    """delta = sqrt(2 e^{D_2 - eps}) clamped to [0, 1]."""
    if eps < 0:
        raise ValueError("epsilon must be >= 0")
    return _clamp01(math.sqrt(2 * math.exp(d2 - eps)))


def gradient_norm_bound(L: int, d: int, obs: PauliObservable) -> float:
    """UB = 3 L sqrt(d/2) Lip(O)."""
    if L < 1 or d < 1:
        raise ValueError("need L >= 1 and d >= 1")
    return 3 * L * math.sqrt(d / 2) * lipschitz_upper_bound(obs)
