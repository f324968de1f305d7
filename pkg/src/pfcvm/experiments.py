"""Experiment drivers: leave-one-out evaluation and stability studies.

Both drivers run one fit per fold or repeat, tolerate per-fit failures by
recording them and carrying on, and return plain dataclasses that
serialize deterministically (no timestamps, sorted keys downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, loocv_splits, standardize_columns, standardize_rows_then_columns
from .errors import DegenerateModelError, DomainError, PfcvmError, UndefinedMetricError
from .metrics import (
    SubsetCollection,
    auc,
    error_rate,
    jaccard_stability,
    pearson_stability,
    selection_frequency,
)
from .model import TrainConfig, fit

__all__ = ["LoocvResult", "StabilityResult", "run_loocv", "run_stability"]

STANDARDIZE_CHOICES = ("none", "columns", "rows-columns")


def _prepare(train_X, test_X, standardize):
    if standardize == "none":
        return train_X, test_X
    if standardize == "columns":
        train_out, test_out, _ = standardize_columns(train_X, test_X)
        return train_out, test_out
    if standardize == "rows-columns":
        train_out, test_out, _ = standardize_rows_then_columns(train_X, test_X)
        return train_out, test_out
    raise DomainError(
        f"unknown standardize choice {standardize!r}; pick one of {STANDARDIZE_CHOICES}"
    )


@dataclass
class LoocvResult:
    """Aggregated leave-one-out outcome."""

    n_folds: int
    n_failed: int
    failed_folds: list
    error_rate: float
    auc: float | None
    mean_selected_features: float
    mean_relevance_vectors: float
    occurrence_counts: list
    per_fold: list = field(repr=False, default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_folds": self.n_folds,
            "n_failed": self.n_failed,
            "failed_folds": self.failed_folds,
            "error_rate": self.error_rate,
            "auc": self.auc,
            "mean_selected_features": self.mean_selected_features,
            "mean_relevance_vectors": self.mean_relevance_vectors,
            "occurrence_counts": self.occurrence_counts,
            "per_fold": self.per_fold,
        }


def run_loocv(dataset: Dataset, config: TrainConfig | None = None,
              standardize: str = "none") -> LoocvResult:
    """Fit once per left-out sample and pool the held-out predictions.

    The error rate is the fraction of held-out misclassifications; the
    ranking score pools the held-out class probabilities, and is None when
    the successful folds cover a single class.  Feature occurrence counts
    are cumulative over folds (1-based feature k at position k-1).
    """
    config = config if config is not None else TrainConfig()
    plan = loocv_splits(dataset.n)
    occurrences = np.zeros(dataset.m, dtype=int)
    truths, probas, predictions = [], [], []
    failed = []
    per_fold = []
    n_features, n_rvs = [], []
    for fold, (train, test) in enumerate(plan.splits):
        train_X, test_X = _prepare(dataset.X[train], dataset.X[test], standardize)
        try:
            model = fit((train_X, dataset.y[train]), config)
        except PfcvmError as exc:
            failed.append({"fold": fold, "error": f"{type(exc).__name__}: {exc}"})
            continue
        proba = float(model.predict_probas(test_X)[0])
        label = 1.0 if proba >= 0.5 else -1.0
        truths.append(float(dataset.y[test[0]]))
        probas.append(proba)
        predictions.append(label)
        occurrences[model.feature_indices] += 1
        n_features.append(len(model.feature_indices))
        n_rvs.append(len(model.rv_indices))
        per_fold.append({
            "fold": fold,
            "test_index": int(test[0]),
            "truth": float(dataset.y[test[0]]),
            "predicted": label,
            "proba": proba,
            "selected_features": [int(k) + 1 for k in model.feature_indices],
            "relevance_vectors": len(model.rv_indices),
        })
    if not truths:
        raise DegenerateModelError("every leave-one-out fold failed")
    try:
        pooled_auc = auc(probas, truths)
    except UndefinedMetricError:
        pooled_auc = None
    return LoocvResult(
        n_folds=len(plan.splits),
        n_failed=len(failed),
        failed_folds=failed,
        error_rate=error_rate(predictions, truths),
        auc=pooled_auc,
        mean_selected_features=float(np.mean(n_features)),
        mean_relevance_vectors=float(np.mean(n_rvs)),
        occurrence_counts=occurrences.tolist(),
        per_fold=per_fold,
    )


@dataclass
class StabilityResult:
    """Aggregated repeated-resample outcome."""

    repeats: int
    per_class_train: int
    n_failed: int
    failed_repeats: list
    jaccard: float | None
    pearson: float | None
    selection_frequencies: list
    mean_accuracy: float
    mean_selected_features: float
    subsets: list
    accuracies: list

    def to_dict(self) -> dict:
        return {
            "repeats": self.repeats,
            "per_class_train": self.per_class_train,
            "n_failed": self.n_failed,
            "failed_repeats": self.failed_repeats,
            "jaccard": self.jaccard,
            "pearson": self.pearson,
            "selection_frequencies": self.selection_frequencies,
            "mean_accuracy": self.mean_accuracy,
            "mean_selected_features": self.mean_selected_features,
            "subsets": self.subsets,
            "accuracies": self.accuracies,
        }


def resample_per_class(dataset: Dataset, per_class_train: int, seed) -> tuple:
    """Draw a fixed number of training samples per class, rest as test."""
    if per_class_train < 1:
        raise DomainError(f"per_class_train must be positive, got {per_class_train}")
    rng = np.random.default_rng(seed)
    train_parts, test_parts = [], []
    for cls in np.unique(dataset.y):
        idx = np.flatnonzero(dataset.y == cls)
        if per_class_train >= idx.size:
            raise DomainError(
                f"per_class_train {per_class_train} leaves no test samples "
                f"for class {cls:g} (count {idx.size})"
            )
        chosen = rng.permutation(idx.size)
        train_parts.append(idx[chosen[:per_class_train]])
        test_parts.append(idx[chosen[per_class_train:]])
    return (
        np.sort(np.concatenate(train_parts)),
        np.sort(np.concatenate(test_parts)),
    )


def run_stability(dataset: Dataset, repeats: int, per_class_train: int = 200,
                  config: TrainConfig | None = None, seed: int = 0,
                  standardize: str = "none") -> StabilityResult:
    """Repeat train/test resampling and score feature-selection stability.

    Repeat r draws its training set with seed ``seed + r``, so results do
    not depend on execution order.  Stability scores that are undefined
    for the collected subsets (an empty subset for Jaccard, a full or
    empty one for Pearson) are reported as None rather than failing the
    whole study.
    """
    if repeats < 2:
        raise DomainError(f"stability needs at least 2 repeats, got {repeats}")
    config = config if config is not None else TrainConfig()
    subsets = []
    accuracies = []
    failed = []
    for r in range(repeats):
        train, test = resample_per_class(dataset, per_class_train, seed + r)
        train_X, test_X = _prepare(dataset.X[train], dataset.X[test], standardize)
        try:
            model = fit((train_X, dataset.y[train]), config)
        except PfcvmError as exc:
            failed.append({"repeat": r, "error": f"{type(exc).__name__}: {exc}"})
            continue
        predicted = model.predict_labels(test_X)
        accuracies.append(float(np.mean(predicted == dataset.y[test])))
        subsets.append(frozenset(int(k) + 1 for k in model.feature_indices))
    if len(subsets) < 2:
        raise DegenerateModelError(
            f"stability needs at least 2 successful repeats, got {len(subsets)}"
        )
    collection = SubsetCollection(tuple(subsets), dataset.m)
    try:
        jac = jaccard_stability(collection)
    except UndefinedMetricError:
        jac = None
    try:
        pea = pearson_stability(collection)
    except UndefinedMetricError:
        pea = None
    return StabilityResult(
        repeats=repeats,
        per_class_train=per_class_train,
        n_failed=len(failed),
        failed_repeats=failed,
        jaccard=jac,
        pearson=pea,
        selection_frequencies=selection_frequency(collection).tolist(),
        mean_accuracy=float(np.mean(accuracies)),
        mean_selected_features=float(np.mean([len(s) for s in subsets])),
        subsets=[sorted(s) for s in subsets],
        accuracies=accuracies,
    )
