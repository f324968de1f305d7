import numpy as np
import pytest

from pfcvm.data import Dataset
from pfcvm.errors import DegenerateModelError, DomainError
from pfcvm.experiments import (
    resample_per_class,
    run_loocv,
    run_stability,
)
from pfcvm.model import TrainConfig


def blob_dataset(n_per=6, seed=7, noise_col=True):
    # x0 separates the classes; x1 is pure noise when requested
    rng = np.random.default_rng(seed)
    x0 = np.concatenate([rng.normal(-2.0, 0.3, n_per), rng.normal(2.0, 0.3, n_per)])
    cols = [x0]
    if noise_col:
        cols.append(rng.normal(0.0, 1.0, 2 * n_per))
    X = np.column_stack(cols)
    y = np.array([-1.0] * n_per + [1.0] * n_per)
    return Dataset(X, y)


FAST = TrainConfig(max_iterations=60)


class TestRunLoocv:
    def test_fold_count_and_perfect_separation(self):
        ds = blob_dataset()
        res = run_loocv(ds, FAST)
        assert res.n_folds == ds.n
        assert res.n_failed == 0
        assert res.error_rate == 0.0
        assert res.auc == 1.0

    def test_per_fold_records(self):
        ds = blob_dataset(n_per=4)
        res = run_loocv(ds, FAST)
        assert len(res.per_fold) == ds.n
        folds = [rec["fold"] for rec in res.per_fold]
        assert folds == list(range(ds.n))
        for rec in res.per_fold:
            assert set(rec) >= {"fold", "proba", "predicted", "truth",
                                "selected_features", "relevance_vectors"}
            assert all(1 <= k <= ds.m for k in rec["selected_features"])
            assert rec["predicted"] in (-1.0, 1.0)
            assert 0.0 <= rec["proba"] <= 1.0

    def test_occurrence_counts_track_selection(self):
        ds = blob_dataset()
        res = run_loocv(ds, FAST)
        assert len(res.occurrence_counts) == ds.m
        total = sum(len(rec["selected_features"]) for rec in res.per_fold)
        assert sum(res.occurrence_counts) == total
        # the separating column must be picked in every fold
        assert res.occurrence_counts[0] == ds.n

    def test_deterministic(self):
        ds = blob_dataset()
        a = run_loocv(ds, FAST).to_dict()
        b = run_loocv(ds, FAST).to_dict()
        assert a == b

    def test_partial_fold_failure_is_recorded(self):
        # dropping the lone negative sample leaves a single-class fold
        X = np.array([[1.0], [1.2], [-1.1]])
        y = np.array([1.0, 1.0, -1.0])
        res = run_loocv(Dataset(X, y), FAST)
        assert res.n_failed == 1
        assert res.failed_folds[0]["fold"] == 2
        assert "both classes" in res.failed_folds[0]["error"]
        assert res.n_folds == 3
        assert res.auc is None  # surviving truths are one class

    def test_all_folds_failing_raises(self):
        X = np.array([[1.0], [-1.0]])
        y = np.array([1.0, -1.0])
        with pytest.raises(DegenerateModelError, match="fold"):
            run_loocv(Dataset(X, y), FAST)

    def test_unknown_standardize_rejected(self):
        with pytest.raises(DomainError, match="standardize"):
            run_loocv(blob_dataset(), FAST, standardize="zscore")

    def test_standardized_run_still_separates(self):
        ds = blob_dataset(seed=3)
        res = run_loocv(ds, FAST, standardize="columns")
        assert res.n_failed == 0
        assert res.error_rate <= 0.25


class TestResamplePerClass:
    def test_partition_and_counts(self):
        ds = blob_dataset(n_per=6)
        train, test = resample_per_class(ds, 4, seed=3)
        assert np.intersect1d(train, test).size == 0
        assert np.array_equal(np.sort(np.concatenate([train, test])),
                              np.arange(ds.n))
        assert (ds.y[train] > 0).sum() == 4
        assert (ds.y[train] < 0).sum() == 4
        assert np.array_equal(train, np.sort(train))

    def test_seed_determinism(self):
        ds = blob_dataset()
        t1, _ = resample_per_class(ds, 4, seed=5)
        t2, _ = resample_per_class(ds, 4, seed=5)
        t3, _ = resample_per_class(ds, 4, seed=6)
        assert np.array_equal(t1, t2)
        assert not np.array_equal(t1, t3)

    def test_train_size_must_leave_a_test_sample(self):
        ds = blob_dataset(n_per=6)
        with pytest.raises(DomainError):
            resample_per_class(ds, 6, seed=0)
        with pytest.raises(DomainError):
            resample_per_class(ds, 0, seed=0)


class TestRunStability:
    def test_separable_case_is_fully_stable(self):
        ds = blob_dataset(n_per=8, seed=11)
        res = run_stability(ds, repeats=3, per_class_train=5, config=FAST, seed=0)
        assert res.n_failed == 0
        assert res.jaccard == 1.0
        assert res.mean_accuracy == 1.0
        assert res.subsets == [[1]] * 3 or all(1 in s for s in res.subsets)

    def test_frequency_sum_identity(self):
        ds = blob_dataset(n_per=8, seed=11)
        res = run_stability(ds, repeats=4, per_class_train=5, config=FAST, seed=1)
        picks = sum(len(s) for s in res.subsets)
        assert sum(res.selection_frequencies) * res.repeats == pytest.approx(picks)
        assert res.mean_selected_features == pytest.approx(picks / res.repeats)

    def test_seed_determinism(self):
        ds = blob_dataset(n_per=8, seed=11)
        a = run_stability(ds, repeats=3, per_class_train=5, config=FAST, seed=2)
        b = run_stability(ds, repeats=3, per_class_train=5, config=FAST, seed=2)
        assert a.to_dict() == b.to_dict()

    def test_accuracies_are_held_out(self):
        ds = blob_dataset(n_per=8, seed=11)
        res = run_stability(ds, repeats=3, per_class_train=5, config=FAST, seed=0)
        assert len(res.accuracies) == 3
        assert all(0.0 <= a <= 1.0 for a in res.accuracies)

    def test_repeats_below_two_rejected(self):
        with pytest.raises(DomainError, match="repeats"):
            run_stability(blob_dataset(), repeats=1, per_class_train=4,
                          config=FAST, seed=0)

    def test_oversized_train_request_rejected(self):
        with pytest.raises(DomainError):
            run_stability(blob_dataset(n_per=6), repeats=2, per_class_train=6,
                          config=FAST, seed=0)

    def test_subsets_one_based_within_range(self):
        ds = blob_dataset(n_per=8, seed=11)
        res = run_stability(ds, repeats=3, per_class_train=5, config=FAST, seed=4)
        for s in res.subsets:
            assert s == sorted(s)
            assert all(1 <= k <= ds.m for k in s)
