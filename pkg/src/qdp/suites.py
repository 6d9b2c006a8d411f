"""Randomized property checks shared by the CLI and the test suite.

Each suite returns a :class:`FuzzReport`. Trials draw from per-trial seeds
spawned from one root seed, so results do not depend on execution order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .channels import Identity, MixtureChannel, UnitaryConjugation, apply_local_depolarizing, apply_mixture
from .divergences import (
    bh_bound,
    check_advanced_joint_convexity,
    classical_hockey_stick,
    density_hockey_stick,
    dp_delta,
    hockey_stick,
    relative_entropy,
    trace_distance,
)
from .encodings import rotation_encode
from .privacy import (
    delta_local_measurement,
    laplace_epsilon,
    mixture_gamma_beta,
    multi_copy_half_width,
    profile_mixture_global,
    profile_mixture_local,
)
from .qstate import (
    DensityMatrix,
    OutcomeDistribution,
    QubitSubset,
    hermitize,
    measure_distribution,
    random_density_matrix,
    sample_outcomes,
    seed_sequence,
    z_sum,
)

TOL = 1e-9


@dataclass
class FuzzReport:
    suite: str
    trials: int
    checks: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    details: dict = field(default_factory=dict)

    def record(self, slack: float, tol: float = TOL) -> None:
        self.checks += 1
        if slack < -tol:
            self.violations += 1
        if slack < self.worst_slack:
            self.worst_slack = slack

    @property
    def ok(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def trial_rngs(seed, trials: int):
    for ss in seed_sequence(seed).spawn(trials):
        yield np.random.Generator(np.random.PCG64(ss))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def full_rank(rho: DensityMatrix, weight: float = 0.01) -> DensityMatrix:
    dim = rho.dim
    return DensityMatrix((1 - weight) * rho.data + weight * np.eye(dim) / dim, validate=False)


def tau_pair(rho: DensityMatrix, other: DensityMatrix, tau: float) -> DensityMatrix:
    """sigma = (1 - tau) rho + tau rho', which has trace distance <= tau from rho."""
    return DensityMatrix((1 - tau) * rho.data + tau * other.data, validate=False)


def ajc_suite(trials: int = 1000, seed=0, n: int = 2, gammas=(1.0, 2.0, math.e)) -> FuzzReport:
    rep = FuzzReport("ajc", trials)
    for t, rng in enumerate(trial_rngs(seed, trials)):
        r0, r1, r2 = (random_density_matrix(n, rng) for _ in range(3))
        p = float(rng.random())
        gamma = gammas[t % len(gammas)]
        rep.record(check_advanced_joint_convexity(r0, r1, r2, p, gamma).slack)
    return rep


def bh_suite(trials: int = 500, seed=0, n_max: int = 3, identical: bool = False) -> FuzzReport:
    rep = FuzzReport("bh", trials, details={"identical": identical})
    for rng in trial_rngs(seed, trials):
        n = int(rng.integers(1, n_max + 1))
        rho = full_rank(random_density_matrix(n, rng))
        sigma = rho if identical else full_rank(random_density_matrix(n, rng))
        rep.record(bh_bound(relative_entropy(rho, sigma)) - trace_distance(rho, sigma))
    return rep


def hs_identity_suite(trials: int = 500, seed=0, n_max: int = 3,
                      gammas=(1.0, 1.5, 2.0, math.e ** 2)) -> FuzzReport:
    """Compare the eigenvalue route for E_gamma with 0.5||rho - gamma sigma||_1 + 0.5(1 - gamma) via singular values."""
    rep = FuzzReport("hs-identity", trials)
    worst = 0.0
    for rng in trial_rngs(seed, trials):
        n = int(rng.integers(1, n_max + 1))
        rho, sigma = random_density_matrix(n, rng), random_density_matrix(n, rng)
        for g in gammas:
            nuclear = float(np.sum(np.linalg.svd(hermitize(rho.data - g * sigma.data), compute_uv=False)))
            dev = abs(hockey_stick(rho, sigma, g) - (0.5 * nuclear + 0.5 * (1 - g)))
            worst = max(worst, dev)
            rep.record(TOL - dev, tol=0.0)
    rep.details["max_deviation"] = worst
    return rep


def _unital_inner(kind: str, n: int, rng):
    if kind == "identity":
        return Identity()
    return UnitaryConjugation(haar_unitary(1 << n, rng))


def dp_soundness_suite(trials: int = 200, seed=0, n_max: int = 3, p_values=(0.1, 0.5, 0.9),
                       eps_values=(0.0, 0.5, 1.0, 2.0), modes=("global", "local"),
                       inners=("identity", "unitary")) -> FuzzReport:
    """Exact hockey-stick after the channel against the profile value, both branches.

    The eta branch is fed the exact E_gamma(rho || I/2^n). That is a valid
    input because every inner channel here is unital.
    """
    rep = FuzzReport("dp-soundness", trials)
    eps = np.asarray(eps_values, float)
    for t, rng in enumerate(trial_rngs(seed, trials)):
        n = int(rng.integers(1, n_max + 1))
        tau = float(rng.random())
        rho = random_density_matrix(n, rng)
        sigma = tau_pair(rho, random_density_matrix(n, rng), tau)
        inner = _unital_inner(inners[t % len(inners)], n, rng)
        mixed = DensityMatrix.maximally_mixed(n)
        for mode in modes:
            for p in p_values:
                if mode == "global":
                    ch = MixtureChannel(n, p, inner)
                    a, b = apply_mixture(ch, rho), apply_mixture(ch, sigma)
                    p_eff = p
                else:
                    every = QubitSubset(range(1, n + 1))
                    a = apply_local_depolarizing(inner.apply(rho), p, every)
                    b = apply_local_depolarizing(inner.apply(sigma), p, every)
                    p_eff = p ** n
                etas = [hockey_stick(rho, mixed, mixture_gamma_beta(p_eff, e)[0]) for e in eps]
                lookup = dict(zip((mixture_gamma_beta(p_eff, e)[0] for e in eps), etas))

                def eta(gamma, lookup=lookup):
                    return lookup[gamma]

                if mode == "global":
                    prof = profile_mixture_global(p, n, tau, eps, eta)
                else:
                    prof = profile_mixture_local(p, n, tau, eps, eta)
                for e, bound in zip(eps, prof.deltas):
                    rep.record(bound - dp_delta(a, b, e))
    return rep


def local_dp_soundness_suite(trials: int = 100, seed=0, n: int = 3, p_values=(0.1, 0.5, 0.9),
                             eps_values=(0.0, 0.5, 1.0)) -> FuzzReport:
    """Rotation-encoded pairs differing on one qubit, measured with sum_i Z_i after local noise."""
    rep = FuzzReport("local-dp-soundness", trials)
    obs = z_sum(n)
    every = QubitSubset(range(1, n + 1))
    for t, rng in enumerate(trial_rngs(seed, trials)):
        x = rng.uniform(0, 2 * math.pi, size=n)
        x2 = x.copy()
        x2[int(rng.integers(n))] = rng.uniform(0, 2 * math.pi)
        rho, sigma = rotation_encode(x), rotation_encode(x2)
        tau = min(1.0, trace_distance(rho, sigma))
        p = p_values[t % len(p_values)]
        d1 = measure_distribution(apply_local_depolarizing(rho, p, every), obs)
        d2 = measure_distribution(apply_local_depolarizing(sigma, p, every), obs)
        for e in eps_values:
            bound = delta_local_measurement(p, 1, tau, e)
            g = math.exp(e)
            rep.record(bound - max(classical_hockey_stick(d1, d2, g), classical_hockey_stick(d2, d1, g)))
    return rep


def laplace_density(points: np.ndarray, weights: np.ndarray, b: float, grid: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grid)
    for x, w in zip(points, weights):
        out += w * np.exp(-np.abs(grid - x) / b) / (2 * b)
    return out


def laplace_pairs(delta_range: float, tau: float, rng: np.random.Generator, random_pairs: int = 3):
    """Outcome distributions on [0, Delta] with total variation exactly tau.

    The first pair moves tau mass between the two endpoints over a common
    midpoint background. This is the extreme case for Laplace noise. The
    remaining pairs share a random background and move tau mass between
    random points.
    """
    pts = np.array([0.0, delta_range / 2, delta_range])
    yield pts, np.array([tau, 1 - tau, 0.0]), np.array([0.0, 1 - tau, tau])
    for _ in range(random_pairs):
        pts = np.sort(rng.uniform(0, delta_range, size=5))
        pts[0], pts[-1] = 0.0, delta_range
        base = rng.dirichlet(np.ones(5))
        u, v = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        w1, w2 = (1 - tau) * base + tau * u, (1 - tau) * base + tau * v
        yield pts, w1, w2


def laplace_soundness_suite(seed=0, delta_values=(1.0, 2.0), tau_values=(0.25, 1.0), b_factors=(1.0, 2.0),
                            tail: float = 40.0, steps: int = 10_000) -> FuzzReport:
    """Trapezoid hockey-stick at gamma = e^{eps'} between Laplace-noised outcome densities.

    The grid spacing is at most Delta/``steps``, and the grid extends ``tail``
    scales past each end of the range.
    """
    rep = FuzzReport("laplace-soundness", 0)
    worst = 0.0
    rng = np.random.Generator(np.random.PCG64(seed))
    for d in delta_values:
        for tau in tau_values:
            for bf in b_factors:
                b = bf * d
                gamma = math.exp(laplace_epsilon(d, tau, b))
                lo, hi = -tail * b, d + tail * b
                num = int(math.ceil((hi - lo) / (d / steps))) + 1
                grid = np.linspace(lo, hi, num)
                for pts, w1, w2 in laplace_pairs(d, tau, rng):
                    f, g = laplace_density(pts, w1, b, grid), laplace_density(pts, w2, b, grid)
                    hs = max(density_hockey_stick(f, g, grid, gamma), density_hockey_stick(g, f, grid, gamma))
                    worst = max(worst, hs)
                    rep.trials += 1
                    rep.record(1e-6 - hs, tol=0.0)
    rep.details["max_hockey_stick"] = worst
    return rep


def multi_copy_coverage(dist: OutcomeDistribution, trials: int = 2000, m: int = 1000, delta_prime: float = 0.05,
                        seed=0) -> dict:
    """Fraction of seeded trials where |mean - E[O]| exceeds half the concentration width."""
    hw = multi_copy_half_width(m, delta_prime)
    mu = dist.mean()
    fails = 0
    for ss in seed_sequence(seed).spawn(trials):
        if abs(float(np.mean(sample_outcomes(dist, m, ss))) - mu) > hw:
            fails += 1
    return {"trials": trials, "failures": fails, "fraction": fails / trials, "half_width": hw}


def multi_copy_suite(trials: int = 2000, seed=0, m: int = 1000, delta_prime: float = 0.05,
                     outcomes=(0.0, 1.0), probabilities=(0.5, 0.5)) -> FuzzReport:
    """Coverage check against delta' plus three binomial standard deviations."""
    dist = OutcomeDistribution(np.asarray(outcomes, float), np.asarray(probabilities, float))
    cov = multi_copy_coverage(dist, trials, m, delta_prime, seed)
    limit = delta_prime + 3 * math.sqrt(delta_prime * (1 - delta_prime) / trials)
    rep = FuzzReport("multi-copy-coverage", trials, details={**cov, "limit": limit})
    rep.record(limit - cov["fraction"], tol=0.0)
    return rep


SUITES = {
    "ajc": ajc_suite,
    "bh": bh_suite,
    "hs-identity": hs_identity_suite,
    "dp-soundness": dp_soundness_suite,
    "local-dp-soundness": local_dp_soundness_suite,
    "laplace-soundness": laplace_soundness_suite,
    "multi-copy-coverage": multi_copy_suite,
}
