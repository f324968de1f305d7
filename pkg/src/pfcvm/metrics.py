"""Evaluation metrics: classification quality, rater agreement, and
feature-selection stability across repeated runs.

Feature subsets are exchanged as 1-based index sets so that reports read
naturally ("feature 1" is the first column); model internals stay 0-based
and the CLI converts at the boundary.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DimensionError, DomainError, UndefinedMetricError

__all__ = [
    "SubsetCollection",
    "EvalReport",
    "error_rate",
    "auc",
    "cohen_kappa",
    "jaccard_stability",
    "pearson_stability",
    "friedman_cd",
    "selection_frequency",
]


@dataclass(frozen=True)
class SubsetCollection:
    """A family of selected-feature subsets from repeated selection runs.

    ``subsets`` holds one set of 1-based feature indices per run;
    ``total_features`` is the size of the full feature pool the indices
    are drawn from.
    """

    subsets: tuple
    total_features: int

    def __post_init__(self):
        m = int(self.total_features)
        if m < 1:
            raise DomainError("total_features must be at least 1")
        norm = []
        for i, subset in enumerate(self.subsets):
            fs = frozenset(int(k) for k in subset)
            for k in sorted(fs):
                if not 1 <= k <= m:
                    raise DomainError(
                        f"subset {i}: feature index {k} outside [1..{m}]"
                    )
            norm.append(fs)
        object.__setattr__(self, "subsets", tuple(norm))
        object.__setattr__(self, "total_features", m)

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)


@dataclass(frozen=True)
class EvalReport:
    """Held-out evaluation summary for one fitted classifier."""

    error_rate: float
    auc: float
    kappa: float
    kappa_stderr: float

    def to_dict(self) -> dict:
        return {
            "error_rate": self.error_rate,
            "auc": self.auc,
            "kappa": self.kappa,
            "kappa_stderr": self.kappa_stderr,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            error_rate=float(d["error_rate"]),
            auc=float(d["auc"]),
            kappa=float(d["kappa"]),
            kappa_stderr=float(d["kappa_stderr"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))


def _as_label_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values).ravel()
    if arr.size == 0:
        raise UndefinedMetricError(f"{name} is empty")
    return arr


def error_rate(predicted, actual) -> float:
    """Fraction of label mismatches (1 - accuracy)."""
    p = _as_label_vector(predicted, "predicted")
    a = _as_label_vector(actual, "actual")
    if p.shape != a.shape:
        raise DimensionError(
            f"predicted has {p.size} labels, actual has {a.size}"
        )
    return float(np.mean(p != a))


def auc(scores, labels) -> float:
    """Area under the ROC curve via the rank (Mann-Whitney) statistic.

    Ties in the scores contribute 1/2 through average ranks.  Labels may
    be {-1, +1} or {0, 1}; both classes must be present.
    """
    s = np.asarray(scores, dtype=float).ravel()
    y = _as_label_vector(labels, "labels")
    if s.shape != y.shape:
        raise DimensionError(f"{s.size} scores but {y.size} labels")
    if not np.all(np.isfinite(s)):
        raise DomainError("scores must be finite")
    bad = set(np.unique(y).tolist()) - {-1, 0, 1}
    if bad:
        raise DomainError(f"labels must be in {{-1,+1}} or {{0,1}}, got {sorted(bad)}")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("auc requires both classes present")
    ranks = rankdata(s, method="average")
    u = float(ranks[pos].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def cohen_kappa(predicted, actual) -> tuple:
    """Cohen's kappa and its asymptotic standard error.

    Returns (kappa, stderr) with stderr = sqrt(p_o(1-p_o) / (n(1-p_e)^2)).
    A 95% interval is kappa +/- 1.96*stderr.
    """
    p = _as_label_vector(predicted, "predicted")
    a = _as_label_vector(actual, "actual")
    if p.shape != a.shape:
        raise DimensionError(
            f"predicted has {p.size} labels, actual has {a.size}"
        )
    n = p.size
    p_o = float(np.mean(p == a))
    cats = np.unique(np.concatenate([p, a]))
    p_e = 0.0
    for c in cats:
        p_e += float(np.mean(p == c)) * float(np.mean(a == c))
    if p_e >= 1.0:
        raise UndefinedMetricError(
            "kappa undefined: chance agreement is 1 (single category)"
        )
    kappa = (p_o - p_e) / (1.0 - p_e)
    stderr = math.sqrt(p_o * (1.0 - p_o) / (n * (1.0 - p_e) ** 2))
    return kappa, stderr


def _stability_pairs(collection: SubsetCollection):
    r = collection.n_subsets
    if r < 2:
        raise UndefinedMetricError(
            f"stability needs at least 2 subsets, got {r}"
        )
    for i in range(r):
        for j in range(i + 1, r):
            yield collection.subsets[i], collection.subsets[j]


def jaccard_stability(collection: SubsetCollection) -> float:
    """Mean pairwise Jaccard overlap |A & B| / |A | B| over all subset pairs."""
    for i, s in enumerate(collection.subsets):
        if not s:
            raise UndefinedMetricError(f"subset {i} is empty")
    total = 0.0
    count = 0
    for a, b in _stability_pairs(collection):
        total += len(a & b) / len(a | b)
        count += 1
    return total / count


def pearson_stability(collection: SubsetCollection) -> float:
    """Mean pairwise Pearson correlation of subset indicator vectors.

    For subsets of sizes r_i, r_j with overlap r_ij out of M features the
    pair score is (M*r_ij - r_i*r_j) / sqrt(r_i r_j (M-r_i)(M-r_j)), which
    requires every subset size to lie strictly between 0 and M.
    """
    m = collection.total_features
    for i, s in enumerate(collection.subsets):
        if len(s) in (0, m):
            raise UndefinedMetricError(
                f"subset {i} has size {len(s)}: indicator variance is zero"
            )
    total = 0.0
    count = 0
    for a, b in _stability_pairs(collection):
        r_i, r_j, r_ij = len(a), len(b), len(a & b)
        num = m * r_ij - r_i * r_j
        den = math.sqrt(r_i * r_j * (m - r_i) * (m - r_j))
        total += num / den
        count += 1
    return total / count


def friedman_cd(num_algorithms: int, num_datasets: int, q_alpha: float) -> float:
    """Critical difference q_alpha * sqrt(p(p+1) / (6N)) for mean-rank plots."""
    p = int(num_algorithms)
    n = int(num_datasets)
    if p < 2:
        raise DomainError(f"need at least 2 algorithms, got {p}")
    if n < 1:
        raise DomainError(f"need at least 1 dataset, got {n}")
    if not q_alpha > 0:
        raise DomainError(f"q_alpha must be positive, got {q_alpha}")
    return q_alpha * math.sqrt(p * (p + 1) / (6.0 * n))


def selection_frequency(collection: SubsetCollection) -> np.ndarray:
    """Per-feature selection frequency across subsets, indexed 0..M-1 for feature 1..M."""
    r = collection.n_subsets
    if r < 1:
        raise UndefinedMetricError("selection frequency needs at least 1 subset")
    freq = np.zeros(collection.total_features)
    for s in collection.subsets:
        for k in s:
            freq[k - 1] += 1.0
    return freq / r
