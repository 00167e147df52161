import numpy as np
import pytest

from faceunits import (ConvergenceError, CvConfig, InputError, LabeledDataset,
                       StratificationError, component_weight_summary,
                       nested_loo_evaluate, subsampled_weight_rows,
                       train_linear_svm)
from oracles import component_summary_direct, svm_by_qp


def blobs(rng, per_class=20, dims=2, gap=3.0):
    """Linearly separable blobs with margin about `gap`."""
    a = rng.standard_normal((per_class, dims)) * 0.4 + gap
    b = rng.standard_normal((per_class, dims)) * 0.4 - gap
    x = np.vstack([a, b])
    y = np.concatenate([np.ones(per_class), -np.ones(per_class)])
    return x, y


def as_dataset(x, y, pos="AUT", neg="NT"):
    labels = tuple(pos if v > 0 else neg for v in y)
    ids = tuple(f"v{i:03d}" for i in range(len(labels)))
    return LabeledDataset(features=x, labels=labels, video_ids=ids)


class TestTrainLinearSvm:
    def test_symmetric_pair_boundary_at_zero(self):
        model = train_linear_svm(np.array([[1.0], [-1.0]]),
                                 np.array([1.0, -1.0]), 100.0)
        assert model.bias == pytest.approx(0.0, abs=1e-9)
        decisions = model.decision(np.array([[1.0], [-1.0]]))
        assert decisions[0] > 0 and decisions[1] < 0

    def test_separable_blobs_perfect_training_accuracy(self):
        rng = np.random.default_rng(0)
        x, y = blobs(rng, per_class=50)
        model = train_linear_svm(x, y, 100.0)
        predictions = np.where(model.decision(x) >= 0, 1.0, -1.0)
        assert (predictions == y).all()

    def test_matches_qp_oracle_on_small_instances(self):
        rng = np.random.default_rng(1)
        for trial in range(12):
            n = int(rng.integers(4, 9))
            x = rng.standard_normal((n, 2)) * 2.0
            y = np.ones(n)
            y[: n // 2] = -1.0
            y = y[rng.permutation(n)]
            if abs(y.sum()) == n:   # single class; resample deterministically
                y[0] = -y[0]
            c = float(rng.choice([0.5, 1.0, 5.0]))
            model = train_linear_svm(x, y, c, tol=1e-10)
            w_ref, b_ref = svm_by_qp(x, y, c)
            np.testing.assert_allclose(model.weights, w_ref, atol=1e-4)
            assert model.bias == pytest.approx(b_ref, abs=1e-4)

    def test_label_swap_negates_decisions(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((12, 3))
        y = np.where(rng.standard_normal(12) > 0, 1.0, -1.0)
        if abs(y.sum()) == 12:
            y[0] = -y[0]
        a = train_linear_svm(x, y, 1.0)
        b = train_linear_svm(x, -y, 1.0)
        np.testing.assert_array_equal(b.weights, -a.weights)
        assert b.bias == -a.bias

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            train_linear_svm(np.zeros((3, 2)), np.ones(3), 1.0)

    def test_convergence_error(self):
        rng = np.random.default_rng(3)
        x, y = blobs(rng, per_class=10)
        with pytest.raises(ConvergenceError) as info:
            train_linear_svm(x, y, 100.0, max_iterations=1)
        assert info.value.iterations == 1
        assert info.value.last_update > 0


class TestNestedLoo:
    def test_separable_dataset_perfect_loo(self):
        rng = np.random.default_rng(4)
        x, y = blobs(rng, per_class=8)
        report = nested_loo_evaluate(as_dataset(x, y), CvConfig(seed=0))
        assert report.accuracy == 1.0
        assert set(report.per_class_accuracy.values()) == {1.0}
        assert len(report.predictions) == 16

    def test_noise_labels_stay_in_chance_band(self):
        accuracies = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            x = rng.standard_normal((40, 10))
            y = np.concatenate([np.ones(20), -np.ones(20)])
            y = y[rng.permutation(40)]
            cfg = CvConfig(c_grid=(0.1, 1.0, 10.0), seed=seed)
            report = nested_loo_evaluate(as_dataset(x, y), cfg)
            accuracies.append(report.accuracy)
        assert all(0.2 <= acc <= 0.8 for acc in accuracies)

    def test_boundary_video_count_rejected(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((5, 2))
        labels = ("A", "A", "A", "B", "B")
        data = LabeledDataset(features=x, labels=labels,
                              video_ids=tuple(f"v{i}" for i in range(5)))
        with pytest.raises(InputError):
            nested_loo_evaluate(data, CvConfig(inner_folds=5))

    def test_singleton_class_stratification_error(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((8, 2))
        labels = ("A",) * 7 + ("B",)
        data = LabeledDataset(features=x, labels=labels,
                              video_ids=tuple(f"v{i}" for i in range(8)))
        with pytest.raises(StratificationError):
            nested_loo_evaluate(data, CvConfig(inner_folds=3))

    def test_flat_inner_accuracy_ties_pick_smallest_c(self):
        # wide-margin separable data: every C gets inner accuracy 1.0
        rng = np.random.default_rng(7)
        x, y = blobs(rng, per_class=10, gap=5.0)
        report = nested_loo_evaluate(as_dataset(x, y), CvConfig(seed=1))
        assert set(report.chosen_c_per_fold) == {0.01}

    def test_label_swap_flips_predictions(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((14, 3))
        y = np.concatenate([np.ones(7), -np.ones(7)])
        cfg = CvConfig(c_grid=(0.1, 1.0), seed=3)
        direct = nested_loo_evaluate(as_dataset(x, y, pos="AUT", neg="NT"), cfg)
        # swap the label strings on the same points: the +1/-1 coding flips
        flipped = nested_loo_evaluate(as_dataset(x, -y, pos="AUT", neg="NT"), cfg)
        assert direct.accuracy == flipped.accuracy
        for p, q in zip(direct.predictions, flipped.predictions):
            assert {p.label, q.label} == {"AUT", "NT"} and p.label != q.label
            assert p.predicted != q.predicted
            assert q.decision_value == pytest.approx(-p.decision_value, abs=1e-12)

    def test_standardization_invariance(self):
        rng = np.random.default_rng(9)
        x, y = blobs(rng, per_class=8, dims=4, gap=1.5)
        x += 0.8 * rng.standard_normal(x.shape)
        scale = np.array([4.0, 0.25, 16.0, 0.5])    # exact powers of two
        cfg = CvConfig(seed=5, standardize=True)
        base = nested_loo_evaluate(as_dataset(x, y), cfg)
        scaled = nested_loo_evaluate(as_dataset(x * scale, y), cfg)
        for p, q in zip(base.predictions, scaled.predictions):
            assert p.predicted == q.predicted
            assert p.chosen_c == q.chosen_c

    def test_seeded_determinism(self):
        rng = np.random.default_rng(10)
        x = rng.standard_normal((12, 3))
        y = np.concatenate([np.ones(6), -np.ones(6)])
        cfg = CvConfig(c_grid=(0.1, 1.0), seed=11)
        a = nested_loo_evaluate(as_dataset(x, y), cfg)
        b = nested_loo_evaluate(as_dataset(x, y), cfg)
        assert a == b

    def test_report_metadata_flags(self):
        rng = np.random.default_rng(11)
        x, y = blobs(rng, per_class=4)
        report = nested_loo_evaluate(as_dataset(x, y), CvConfig(seed=2))
        obj = report.to_obj()
        assert obj["standardize"] is True
        assert obj["stratified_inner"] is True
        assert obj["inner_folds"] == 5
        assert obj["class_labels"] == ["AUT", "NT"]


class TestLabeledDataset:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(InputError):
            LabeledDataset(features=np.zeros((2, 2)), labels=("A", "B"),
                           video_ids=("v", "v"))

    def test_single_class_rejected(self):
        with pytest.raises(InputError):
            LabeledDataset(features=np.zeros((2, 2)), labels=("A", "A"),
                           video_ids=("a", "b"))


class TestComponentWeightSummary:
    def test_diagonal_feature_touches_one_component(self):
        q = 4
        weights = np.zeros((1, q * q))
        weights[0, 2 * q + 2] = 3.0   # feature (2, 2)
        summaries = component_weight_summary(weights, [f"c{i}" for i in range(q)])
        nonzero = [s for s in summaries if s.median > 0]
        assert len(nonzero) == 1
        assert nonzero[0].component == "c2"
        assert nonzero[0].median == pytest.approx(3.0 / (2 * q - 1))

    def test_uniform_weights_equal_summaries(self):
        q = 5
        weights = np.full((3, q * q), 0.7)
        summaries = component_weight_summary(weights, [f"c{i}" for i in range(q)])
        for s in summaries:
            assert s.median == pytest.approx(0.7)
        # ties sorted by component index
        assert [s.component_index for s in summaries] == list(range(q))

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(12)
        q = 6
        weights = rng.standard_normal((10, q * q))
        summaries = component_weight_summary(weights, [f"c{i}" for i in range(q)])
        want = component_summary_direct(weights, q)
        for s in summaries:
            np.testing.assert_allclose(s.values, want[:, s.component_index],
                                       atol=1e-12)
        medians = [s.median for s in summaries]
        assert medians == sorted(medians, reverse=True)

    def test_dimension_mismatch(self):
        with pytest.raises(InputError):
            component_weight_summary(np.zeros((2, 10)), ["a", "b", "c"])

    def test_subsampled_rows_deterministic(self):
        rng = np.random.default_rng(13)
        x, y = blobs(rng, per_class=8)
        data = as_dataset(x, y)
        cfg = CvConfig(c_grid=(0.1, 1.0), seed=4)
        rows_a, c_a = subsampled_weight_rows(data, cfg, subsample_count=5)
        rows_b, c_b = subsampled_weight_rows(data, cfg, subsample_count=5)
        assert c_a == c_b
        assert rows_a.tobytes() == rows_b.tobytes()
        assert rows_a.shape == (5, 2)
