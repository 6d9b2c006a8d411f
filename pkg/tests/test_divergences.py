import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdp.divergences import (
    ajc_parameters,
    bh_bound,
    check_advanced_joint_convexity,
    classical_hockey_stick,
    density_hockey_stick,
    dp_delta,
    hockey_stick,
    max_divergence,
    petz_renyi,
    pinsker_bound,
    relative_entropy,
    trace_distance,
)
from qdp.qstate import DensityMatrix, OutcomeDistribution, random_density_matrix

ZERO = DensityMatrix.basis("0")
ONE = DensityMatrix.basis("1")
PLUS = DensityMatrix.from_vector(np.array([1, 1]) / math.sqrt(2))
HALF = DensityMatrix.maximally_mixed(1)


def states(n: int, seed: int, count: int = 2):
    rng = np.random.default_rng(seed)
    return [random_density_matrix(n, rng) for _ in range(count)]


class TestTraceDistance:
    def test_self(self):
        (rho,) = states(2, 0, 1)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal(self):
        assert trace_distance(ZERO, ONE) == pytest.approx(1.0)

    def test_zero_vs_plus(self):
        # pure states: sqrt(1 - |<0|+>|^2)
        assert trace_distance(ZERO, PLUS) == pytest.approx(math.sqrt(0.5), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            trace_distance(ZERO, DensityMatrix.basis("00"))


class TestHockeyStick:
    @pytest.mark.parametrize("gamma", [1.0, 1.7, 10.0])
    def test_self_is_zero(self, gamma):
        (rho,) = states(2, 1, 1)
        assert hockey_stick(rho, rho, gamma) == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_supports(self):
        assert hockey_stick(ZERO, ONE, 2.0) == pytest.approx(1.0)

    def test_mixed_vs_zero(self):
        assert hockey_stick(HALF, ZERO, 1.0) == pytest.approx(0.5)

    def test_gamma_below_one_rejected(self):
        with pytest.raises(ValueError):
            hockey_stick(ZERO, ONE, 0.5)

    def test_gamma_one_is_trace_distance(self):
        a, b = states(2, 2)
        assert hockey_stick(a, b, 1.0) == pytest.approx(trace_distance(a, b), abs=1e-12)

    def test_dp_delta(self):
        a, b = states(2, 3)
        assert dp_delta(a, b, 0.0) == pytest.approx(trace_distance(a, b), abs=1e-12)
        assert dp_delta(a, a, 0.4) == pytest.approx(0.0, abs=1e-12)
        assert dp_delta(ZERO, HALF, math.log(2)) == pytest.approx(0.0, abs=1e-12)


class TestRenyiAndRelativeEntropy:
    def test_petz_identical_mixed(self):
        assert petz_renyi(DensityMatrix.maximally_mixed(2), DensityMatrix.maximally_mixed(2), 2) == pytest.approx(0.0)

    def test_petz_pure_vs_mixed(self):
        assert petz_renyi(PLUS, HALF, 2) == pytest.approx(math.log(2))

    def test_petz_disjoint(self):
        assert petz_renyi(ZERO, ONE, 2) == math.inf

    def test_petz_alpha_must_exceed_one(self):
        with pytest.raises(ValueError):
            petz_renyi(ZERO, HALF, 1.0)

    def test_relative_entropy_values(self):
        (rho,) = states(2, 4, 1)
        assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-10)
        assert relative_entropy(ZERO, HALF) == pytest.approx(math.log(2))
        assert relative_entropy(ZERO, ONE) == math.inf

    def test_relative_entropy_diagonal_oracle(self):
        p, q = np.array([0.7, 0.2, 0.1, 0.0]), np.array([0.25, 0.25, 0.25, 0.25])
        expected = float(np.sum(p[p > 0] * np.log(p[p > 0] / q[p > 0])))
        assert relative_entropy(DensityMatrix.diagonal(p), DensityMatrix.diagonal(q)) == pytest.approx(expected)

    def test_max_divergence(self):
        (rho,) = states(1, 5, 1)
        assert max_divergence(rho, rho) == pytest.approx(0.0, abs=1e-10)
        assert max_divergence(DensityMatrix.basis("010"), DensityMatrix.maximally_mixed(3)) == pytest.approx(3 * math.log(2))
        assert max_divergence(DensityMatrix.diagonal([0.75, 0.25]), HALF) == pytest.approx(math.log(1.5))


class TestInequalityBounds:
    @pytest.mark.parametrize("d, expected", [(0.0, 0.0), (math.inf, 1.0), (math.log(2), math.sqrt(0.5))])
    def test_bh(self, d, expected):
        assert bh_bound(d) == pytest.approx(expected)

    @pytest.mark.parametrize("d, expected", [(0.0, 0.0), (2.0, 1.0), (0.5, 0.5), (50.0, 5.0)])
    def test_pinsker(self, d, expected):
        assert pinsker_bound(d) == pytest.approx(expected)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            bh_bound(-0.1)


class TestAdvancedJointConvexity:
    def test_parameters(self):
        gp, beta = ajc_parameters(0.25, 3.0)
        assert gp == pytest.approx(1 + 0.75 * 2)
        assert beta == pytest.approx(gp / 3.0)

    def test_identical_mixtures(self):
        r0, r1 = states(2, 6)
        rep = check_advanced_joint_convexity(r0, r1, r1, 0.4, 2.0)
        assert rep.lhs == pytest.approx(0.0, abs=1e-12)
        assert rep.holds

    def test_p_zero_is_equality(self):
        r0, r1, r2 = states(2, 7, 3)
        rep = check_advanced_joint_convexity(r0, r1, r2, 0.0, math.e)
        assert rep.lhs == pytest.approx(rep.rhs, abs=1e-12)
        assert rep.holds


class TestClassical:
    def test_discrete(self):
        d1 = OutcomeDistribution(np.array([0.0, 1.0]), np.array([0.8, 0.2]))
        d2 = OutcomeDistribution(np.array([0.0, 1.0]), np.array([0.3, 0.7]))
        assert classical_hockey_stick(d1, d2, 1.0) == pytest.approx(0.5)
        assert classical_hockey_stick(d1, d2, 2.0) == pytest.approx(0.2)

    def test_disjoint_supports_align(self):
        d1 = OutcomeDistribution.point_mass(-1.0)
        d2 = OutcomeDistribution.point_mass(1.0)
        assert classical_hockey_stick(d1, d2, 5.0) == pytest.approx(1.0)

    def test_density_trapezoid(self):
        grid = np.linspace(-30, 30, 600_001)
        f = np.exp(-np.abs(grid)) / 2
        g = np.exp(-np.abs(grid - 1)) / 2
        # Laplace(0, 1) vs Laplace(1, 1) at gamma = e is exactly zero; at gamma = 1, TV = 1 - e^{-1/2}
        assert density_hockey_stick(f, g, grid, math.e) < 1e-6
        assert density_hockey_stick(f, g, grid, 1.0) == pytest.approx(1 - math.exp(-0.5), abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), g1=st.floats(1.0, 5.0), g2=st.floats(1.0, 5.0))
def test_hockey_stick_non_increasing_in_gamma(seed, g1, g2):
    a, b = states(2, seed)
    lo, hi = sorted((g1, g2))
    assert hockey_stick(a, b, hi) <= hockey_stick(a, b, lo) + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(1.0, 8.0))
def test_hockey_stick_in_unit_interval(seed, gamma):
    a, b = states(2, seed)
    assert 0.0 <= hockey_stick(a, b, gamma) <= 1.0 + 1e-12


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_divergence_chain(seed):
    """TD <= Pinsker(D) and D <= D_2 <= D_inf for full-rank pairs."""
    a, b = states(2, seed)
    b = DensityMatrix(0.9 * b.data + 0.1 * np.eye(4) / 4)
    d = relative_entropy(a, b)
    assert trace_distance(a, b) <= pinsker_bound(d) + 1e-9
    assert d <= petz_renyi(a, b, 2) + 1e-9
    assert petz_renyi(a, b, 2) <= max_divergence(a, b) + 1e-9
