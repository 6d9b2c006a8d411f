import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdp.cli import default_dataset
from qdp.divergences import trace_distance
from qdp.qstate import DensityMatrix, QubitSubset, expectation, marginal_mismatch
from qdp.robustness import (
    ClassifierModel,
    ExperimentConfig,
    LabeledDataset,
    build_circuit_state,
    certified_accuracy,
    certified_fraction,
    certify_rows,
    class_observables,
    classify,
    entangler_pairs,
    expected_scores,
    init_model,
    load_dataset,
    loss_and_gradient,
    outcome_probabilities,
    robustness_condition,
    robustness_margin,
    run_experiment,
    statistical_margin,
    stratified_split,
    train,
)


@pytest.fixture(scope="module")
def iris():
    return load_dataset(default_dataset())


def random_model(seed, p=0.0, ranges=(1, 1)):
    return init_model(seed, noise_p=p, scale=1.0, ranges=ranges)


class TestObservables:
    def test_spectra_in_unit_interval(self):
        from qdp.qstate import observable_matrix

        for obs in class_observables():
            w = np.linalg.eigvalsh(observable_matrix(obs))
            assert w.min() >= -1e-9 and w.max() <= 1 + 1e-9

    def test_sum_to_identity(self):
        o1, o2 = class_observables()
        rho = DensityMatrix.basis("0110")
        assert expectation(rho, o1) + expectation(rho, o2) == pytest.approx(1.0)

    def test_entanglers(self):
        assert entangler_pairs(0, (1, 2)) == [(1, 2), (2, 3), (3, 4), (4, 1)]
        assert entangler_pairs(1, (1, 2)) == [(1, 3), (2, 4), (3, 1), (4, 2)]


class TestCircuit:
    def test_full_noise(self):
        out = build_circuit_state(random_model(0, p=1.0), np.array([0.1, 0.2, 0.3, 0.4]))
        assert out.allclose(DensityMatrix.maximally_mixed(4))

    def test_one_feature_changes_one_marginal(self):
        model = random_model(1, p=0.2)
        x = np.array([0.1, 0.5, 0.9, 0.3])
        x2 = x.copy()
        x2[2] = 0.75
        a, b = build_circuit_state(model, x), build_circuit_state(model, x2)
        assert marginal_mismatch(a, b, QubitSubset([3])) <= 1e-9

    def test_trace_distance_bounded_by_shift(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            model = ClassifierModel(rng.uniform(-math.pi, math.pi, (2, 4, 3)), 0.1)
            x = rng.uniform(0, 1, 4)
            x2 = x.copy()
            tau = rng.uniform(0, 0.5)
            x2[rng.integers(4)] += tau
            assert trace_distance(build_circuit_state(model, x), build_circuit_state(model, x2)) <= tau + 1e-12

    @pytest.mark.parametrize("p", [0.0, 0.1, 0.3])
    @pytest.mark.parametrize("ranges", [(1, 1), (1, 2)])
    def test_statevector_matches_dense(self, p, ranges):
        model = random_model(3, p=p, ranges=ranges)
        X = np.random.default_rng(4).uniform(0, 1, (5, 4))
        o1, _ = class_observables()
        dense = [expectation(build_circuit_state(model, x), o1) for x in X]
        np.testing.assert_allclose(expected_scores(model, X), dense, atol=1e-12)

    def test_outcome_probabilities_match_scores(self):
        model = random_model(5, p=0.3)
        x = np.array([0.2, 0.4, 0.6, 0.8])
        probs = outcome_probabilities(model, x)
        assert probs.sum() == pytest.approx(1.0)
        assert probs @ (np.arange(5) / 4) == pytest.approx(expected_scores(model, x)[0], abs=1e-12)

    def test_theta_shape_checked(self):
        with pytest.raises(ValueError):
            ClassifierModel(np.zeros((2, 4)), 0.0)


class TestGradient:
    def test_parameter_shift_matches_finite_difference(self):
        model = random_model(6, p=0.1)
        X = np.random.default_rng(7).uniform(0, 1, (6, 4))
        t = np.array([1.0, 0.0, 1.0, 0.0, 1.0, 0.0])
        _, grad = loss_and_gradient(model, X, t)
        h = 1e-6
        for idx in [(0, 0, 0), (0, 2, 1), (1, 3, 2)]:
            up, down = model.theta.copy(), model.theta.copy()
            up[idx] += h
            down[idx] -= h
            fd = (loss_and_gradient(model.with_theta(up), X, t)[0] - loss_and_gradient(model.with_theta(down), X, t)[0]) / (2 * h)
            assert grad[idx] == pytest.approx(fd, abs=1e-7)

    def test_training_reduces_loss(self):
        X = np.random.default_rng(8).uniform(0, 1, (10, 4))
        data = LabeledDataset(X, (X[:, 0] > 0.5).astype(int))
        _, hist = train(init_model(0), data, lr=1.0, epochs=15, return_history=True)
        assert hist.losses[-1] < hist.losses[0]
        assert len(hist.losses) == 16


class TestClassify:
    def test_exact_scores_give_argmax(self):
        model = random_model(9)
        x = np.array([0.3, 0.1, 0.7, 0.2])
        res = classify(model, x, None)
        s = expected_scores(model, x)[0]
        assert res.label == (0 if s >= 0.5 else 1)
        assert res.scores == pytest.approx([s, 1 - s])

    def test_point_mass_is_deterministic(self):
        model = ClassifierModel(np.zeros((2, 4, 3)), 0.0)
        for seed in range(3):
            res = classify(model, np.zeros(4), 50, seed)
            assert res.label == 0
            assert res.scores.tolist() == [1.0, 0.0]

    def test_seeded(self):
        model = random_model(10, p=0.1)
        x = np.array([0.5, 0.5, 0.5, 0.5])
        assert classify(model, x, 100, 4).scores.tolist() == classify(model, x, 100, 4).scores.tolist()


class TestRobustnessCondition:
    def test_statistical_margin(self):
        assert statistical_margin(2, 0.05, 1000) == pytest.approx(math.sqrt(0.002 * math.log(160)))
        assert statistical_margin(2, 0.05, 1000) == pytest.approx(0.10075, abs=1e-5)

    def test_exact_reduces_to_gap(self):
        assert robustness_condition([0.6, 0.4], 0.0, 0.0, 2, None, 0.05)
        assert not robustness_condition([0.5, 0.5], 0.0, 0.0, 2, None, 0.05)

    def test_delta_one_never_certifies(self):
        assert not robustness_condition([1.0, 0.0], 0.0, 1.0, 2, None, 0.05)

    def test_beta_range(self):
        with pytest.raises(ValueError):
            robustness_condition([0.9, 0.1], 0.1, 0.0, 2, 100, 0.0)


@settings(max_examples=80, deadline=None)
@given(y=st.floats(0, 1), eps=st.floats(0, 2), delta=st.floats(0, 1), m=st.one_of(st.none(), st.integers(1, 5000)))
def test_margin_matches_condition(y, eps, delta, m):
    scores = [y, 1 - y]
    margin = robustness_margin(scores, eps, 2, m, 0.05)
    if abs(margin - delta) > 1e-12:
        assert robustness_condition(scores, eps, delta, 2, m, 0.05) == (delta < margin)


class TestDataset:
    def test_bundled_iris(self, iris):
        assert len(iris) == 100
        assert iris.classes == ("setosa", "versicolor")
        assert np.bincount(iris.y).tolist() == [50, 50]
        assert iris.X.min() == 0.0 and iris.X.max() == 1.0

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,label\n1,2,x\n")
        with pytest.raises(ValueError):
            load_dataset(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            load_dataset(tmp_path / "absent.csv")

    def test_split_is_stratified(self, iris):
        train_set, test_set = stratified_split(iris, 0.2, 0)
        assert (len(train_set), len(test_set)) == (80, 20)
        assert np.bincount(test_set.y).tolist() == [10, 10]


class TestCertification:
    def test_all_wrong_gives_zero(self, iris):
        model = random_model(11)
        _, test_set = stratified_split(iris, 0.2, 0)
        labels = np.array([classify(model, x, None).label for x in test_set.X])
        flipped = LabeledDataset(test_set.X, 1 - labels)
        assert certified_accuracy(model, flipped, 0.1, 0.0, 0.05, 1000, 0) == 0.0

    def test_large_delta_gives_zero(self, iris):
        model = random_model(12)
        _, test_set = stratified_split(iris, 0.2, 0)
        assert certified_accuracy(model, test_set, 0.1, 0.99, 0.05, 1000, 0) == 0.0

    def test_monotone_in_tau(self, iris):
        model = train(ClassifierModel(init_model(0).theta, 0.1), stratified_split(iris, 0.2, 1)[0], 2.0, 40)
        rows = certify_rows(model, stratified_split(iris, 0.2, 1)[1], 0.05, 1000, 0)
        fracs = [certified_fraction(rows, 0.1, t) for t in np.linspace(0, 0.5, 11)]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))

    def test_reproducible(self, iris):
        model = train(ClassifierModel(init_model(0).theta, 0.1), stratified_split(iris, 0.2, 1)[0], 2.0, 20)
        test_set = stratified_split(iris, 0.2, 1)[1]
        a = certified_accuracy(model, test_set, [0.01, 0.1], [0.0, 0.0], 0.05, 1000, 5)
        b = certified_accuracy(model, test_set, [0.01, 0.1], [0.0, 0.0], 0.05, 1000, 5)
        assert 0.0 <= a <= 1.0 and a == b


def test_small_experiment(iris):
    cfg = ExperimentConfig(p_values=(0.0, 0.3), tau_values=(0.0, 0.1), epochs=10)
    rows, info = run_experiment(iris, cfg, seed=3)
    assert len(rows) == 4
    assert info["train_size"] == 80 and info["test_size"] == 20
    assert all(0 <= r.certified_accuracy <= r.test_accuracy <= 1 for r in rows)
