import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdp.channels import LightCone, lightcone_compose
from qdp.divergences import trace_distance
from qdp.encodings import (
    ELL_TAU,
    TRACE_TAU,
    XI_TAU,
    ClassicalNeighbourSpec,
    NeighbourRelation,
    all_subsets_relation,
    amplitude_encode,
    amplitude_encoder,
    brickwork_spec,
    coherent_distance,
    coherent_overlap,
    derive_relation,
    hamiltonian_encode,
    hamiltonian_encoder,
    noisy_encoding_tau,
    ring_windows,
    rotation_encode,
    rotation_encoder,
    transform_relation,
    verify_preserving,
    w1_upper_bound,
)
from qdp.qstate import DensityMatrix, QubitSubset, marginal_mismatch, random_density_matrix


class TestRelations:
    def test_ring_windows_wrap(self):
        wins = [tuple(w) for w in ring_windows(4, 2)]
        assert wins == [(1, 2), (2, 3), (3, 4), (1, 4)]

    def test_window_covering_all(self):
        assert [tuple(w) for w in ring_windows(3, 3)] == [(1, 2, 3)]

    def test_tau_above_one_rejected(self):
        with pytest.raises(ValueError):
            NeighbourRelation.trace(2, 1.5)

    def test_w1_allows_large_tau(self):
        assert NeighbourRelation.w1(3, 2.5).tau == 2.5

    def test_all_subsets_caps_to_trace(self):
        assert all_subsets_relation(3, 3, 0.2).kind == TRACE_TAU
        rel = all_subsets_relation(4, 2, 0.2)
        assert rel.kind == XI_TAU and len(rel.xi) == 6

    def test_w1_upper_bound(self):
        assert w1_upper_bound(NeighbourRelation.window(10, 2, 0.1)) == pytest.approx(0.3)
        assert w1_upper_bound(NeighbourRelation.trace(2, 0.5)) == pytest.approx(1.0)


class TestAmplitude:
    def test_first_basis_vector(self):
        assert amplitude_encode(np.eye(4)[0]).allclose(DensityMatrix.basis("00"))

    def test_plus(self):
        out = amplitude_encode(np.array([1, 1]) / math.sqrt(2))
        np.testing.assert_allclose(out.data, np.full((2, 2), 0.5), atol=1e-12)

    def test_unnormalized_rejected_unless_asked(self):
        with pytest.raises(ValueError):
            amplitude_encode(np.array([1.0, 1.0]))
        assert amplitude_encode(np.array([3.0, 0.0]), normalize=True).allclose(DensityMatrix.basis("0"))

    def test_bad_length(self):
        with pytest.raises(ValueError):
            amplitude_encode(np.ones(3) / math.sqrt(3))


class TestRotation:
    def test_zero_angles(self):
        assert rotation_encode(np.zeros(3)).allclose(DensityMatrix.basis("000"))

    def test_single_angle_difference(self):
        # cos x |0> + sin x |1>: overlap cos(0.6), so TD = sin(0.6)
        td = trace_distance(rotation_encode(np.array([0.3])), rotation_encode(np.array([0.9])))
        assert td == pytest.approx(math.sin(0.6), abs=1e-12)

    def test_untouched_qubits_agree(self):
        a = rotation_encode(np.array([0.1, 0.2, 0.3]))
        b = rotation_encode(np.array([0.1, 1.2, 0.3]))
        assert marginal_mismatch(a, b, QubitSubset([2])) < 1e-12


class TestCoherent:
    def test_identical(self):
        x = np.array([0.3, -1.0])
        assert coherent_overlap(x, x) == pytest.approx(1.0)
        assert coherent_distance(x, x) == pytest.approx(0.0)

    def test_unit_distance(self):
        assert coherent_distance(np.zeros(2), np.array([0.6, 0.8])) == pytest.approx(math.sqrt(1 - math.exp(-1)))

    def test_far_apart(self):
        assert coherent_distance(np.zeros(1), np.array([40.0])) == pytest.approx(1.0)


class TestHamiltonian:
    def test_zero_parameters_keep_state(self):
        spec = brickwork_spec(4, 2)
        rho = random_density_matrix(4, np.random.default_rng(0))
        assert hamiltonian_encode(spec, np.zeros(spec.num_parameters), rho).allclose(rho)

    def test_changed_parameter_stays_in_light_cone(self):
        spec = brickwork_spec(4, 2)
        x = np.random.default_rng(1).uniform(-1, 1, spec.num_parameters)
        x2 = x.copy()
        x2[0] += 0.7  # gate on qubits (1, 2) in the first layer
        start = DensityMatrix.basis("0000")
        a, b = hamiltonian_encode(spec, x, start), hamiltonian_encode(spec, x2, start)
        cone = lightcone_compose(LightCone.from_layer(4, [(1, 2), (3, 4)]), LightCone.from_layer(4, [(2, 3)]))
        region = cone.image(QubitSubset([1, 2]))
        assert len(region) <= 2 * spec.depth_1d
        assert marginal_mismatch(a, b, region) <= 1e-9
        assert trace_distance(a, b) > 1e-3

    def test_lemma_bound_default_norm(self):
        spec = brickwork_spec(3, 1)
        assert spec.norm == "schatten2"
        # (ZZ + XX)/4 has Frobenius norm sqrt(8)/4
        assert spec.generator_norm_bound == pytest.approx(math.sqrt(8) / 4)

    def test_spectral_option(self):
        assert brickwork_spec(3, 1, norm="spectral").generator_norm_bound == pytest.approx(0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hamiltonian_lemma_bound_holds(seed):
    rng = np.random.default_rng(seed)
    spec = brickwork_spec(4, 2)
    x = rng.uniform(-math.pi, math.pi, spec.num_parameters)
    x2 = x + rng.normal(scale=0.3, size=x.size)
    start = DensityMatrix.basis("0000")
    td = trace_distance(hamiltonian_encode(spec, x, start), hamiltonian_encode(spec, x2, start))
    assert td <= spec.lemma_bound(x, x2) + 1e-9


class TestNoisyTau:
    def test_full_noise(self):
        assert noisy_encoding_tau(0.0, 3, 5) == 0.0

    def test_value(self):
        assert noisy_encoding_tau(0.5, 4, 8) == pytest.approx(0.25)

    def test_vanishes_with_depth(self):
        assert noisy_encoding_tau(0.9, 400, 10) < 1e-12

    def test_q_range(self):
        with pytest.raises(ValueError):
            noisy_encoding_tau(1.0, 1, 2)


class TestDeriveRelation:
    def test_rotation(self):
        rel = derive_relation("rotation", ClassicalNeighbourSpec(gamma0=1), n=5)
        assert (rel.kind, rel.ell, rel.tau) == (ELL_TAU, 1, 1.0)

    def test_coherent(self):
        rel = derive_relation("coherent", ClassicalNeighbourSpec(gamma0=1, gamma2=1.0), n=3)
        assert rel.tau == pytest.approx(math.sqrt(1 - math.exp(-1)))

    def test_amplitude_zero(self):
        rel = derive_relation("amplitude", ClassicalNeighbourSpec(gamma2=0.0), n=2)
        assert (rel.kind, rel.tau) == (TRACE_TAU, 0.0)

    def test_rotation_many_coordinates(self):
        rel = derive_relation("rotation", ClassicalNeighbourSpec(gamma0=2), n=4)
        assert rel.kind == XI_TAU and rel.max_subset == 2

    def test_hamiltonian_window(self):
        spec = brickwork_spec(6, 2)
        rel = derive_relation("hamiltonian", ClassicalNeighbourSpec(gamma0=1, gamma1=0.1), spec)
        assert rel.kind == ELL_TAU and rel.ell == 4
        assert rel.tau == pytest.approx(math.sqrt(0.5) * 0.1 * spec.generator_norm_bound)

    def test_missing_bound(self):
        with pytest.raises(ValueError):
            derive_relation("coherent", ClassicalNeighbourSpec(gamma0=1), n=2)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            derive_relation("basis", ClassicalNeighbourSpec(), n=2)


class TestTransform:
    def test_identity_cone(self):
        rel = NeighbourRelation.window(5, 1, 0.3)
        assert transform_relation(rel, LightCone.identity(5)) == rel

    def test_window_grows_to_cone(self):
        cone = LightCone.from_layer(6, [(1, 2), (3, 4), (5, 6)])
        out = transform_relation(NeighbourRelation.window(6, 1, 0.3), cone)
        assert out.max_subset == cone.bound == 2
        assert out.tau == 0.3

    def test_full_cone_caps(self):
        cone = LightCone(3, {1: QubitSubset([1, 2, 3])})
        assert transform_relation(NeighbourRelation.window(3, 1, 0.2), cone).kind == TRACE_TAU


class TestVerifyPreserving:
    def test_rotation(self):
        classical = ClassicalNeighbourSpec(gamma0=1)
        rel = derive_relation("rotation", classical, n=3)
        assert verify_preserving(rotation_encoder(3), rel, classical, 200, seed=0).ok

    def test_amplitude(self):
        classical = ClassicalNeighbourSpec(gamma2=0.4)
        rel = derive_relation("amplitude", classical, n=2)
        rep = verify_preserving(amplitude_encoder(2), rel, classical, 200, seed=1)
        assert rep.trace_violations == 0

    def test_hamiltonian(self):
        spec = brickwork_spec(4, 1)
        classical = ClassicalNeighbourSpec(gamma0=1, gamma1=0.5)
        rel = derive_relation("hamiltonian", classical, spec)
        assert verify_preserving(hamiltonian_encoder(spec), rel, classical, 100, seed=2).ok

    def test_shrunken_tau_reports(self):
        classical = ClassicalNeighbourSpec(gamma0=1)
        rel = derive_relation("rotation", classical, n=3)
        halved = NeighbourRelation.window(3, 1, rel.tau / 2)
        rep = verify_preserving(rotation_encoder(3), halved, classical, 100, seed=3)
        assert rep.trace_violations > 0
        assert not rep.ok
