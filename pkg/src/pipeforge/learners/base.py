"""Shared estimator machinery: training sets, scaling, predictor base."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional

import numpy as np

from pipeforge.features.extract import FeatureVector


class ModelKind(str, Enum):
    LOGISTIC_REGRESSION = "LogisticRegression"
    DECISION_TREE = "DecisionTree"
    RANDOM_FOREST = "RandomForest"
    EXTREMELY_RANDOMIZED_TREES = "ExtremelyRandomizedTrees"
    GRADIENT_BOOSTED_TREES = "GradientBoostedTrees"
    GAUSSIAN_NAIVE_BAYES = "GaussianNaiveBayes"

    def __str__(self) -> str:
        return self.value


TREE_KINDS = frozenset(
    {
        ModelKind.DECISION_TREE,
        ModelKind.RANDOM_FOREST,
        ModelKind.EXTREMELY_RANDOMIZED_TREES,
        ModelKind.GRADIENT_BOOSTED_TREES,
    }
)


class DegenerateLabelsWarning(UserWarning):
    """All binarized labels identical; the predictor degrades to the prior."""


@dataclass
class TrainingSet:
    """Feature rows plus per-question F-score labels for one component."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]

    def __post_init__(self) -> None:
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-d matrix")
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("row count of X must equal |y|")
        if self.X.shape[0] == 0:
            raise ValueError("training set is empty")
        if self.X.shape[1] != len(self.feature_names):
            raise ValueError("columns must align with feature_names")
        if not np.all(np.isfinite(self.X)):
            raise ValueError("X contains non-finite values")
        if np.any(self.y < 0.0) or np.any(self.y > 1.0):
            raise ValueError("labels must lie in [0, 1]")
        self.feature_names = tuple(self.feature_names)


@dataclass
class MinMaxScaler:
    """Per-column min-max scaling; fitted on training rows only.

    Constant columns scale to 0 so unseen test values cannot blow up.
    """

    mins: np.ndarray
    ranges: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "MinMaxScaler":
        mins = X.min(axis=0)
        ranges = X.max(axis=0) - mins
        return cls(mins=mins, ranges=ranges)

    def transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.ranges > 0.0, self.ranges, 1.0)
        scaled = (X - self.mins) / safe
        return np.where(self.ranges > 0.0, scaled, 0.0)

    def to_dict(self) -> dict:
        return {"mins": self.mins.tolist(), "ranges": self.ranges.tolist()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MinMaxScaler":
        return cls(
            mins=np.asarray(doc["mins"], dtype=np.float64),
            ranges=np.asarray(doc["ranges"], dtype=np.float64),
        )


@dataclass
class Predictor:
    """A trained per-component performance model.

    Scores are always finite and in [0, 1]; a predictor only accepts
    vectors whose names match its ``feature_names`` exactly.
    """

    kind: ModelKind
    feature_names: tuple[str, ...]
    seed: int
    hyper: dict = field(default_factory=dict)
    scaler: Optional[MinMaxScaler] = None

    def score_rows(self, X: np.ndarray) -> np.ndarray:
        """Score a raw (n, d) matrix whose columns follow feature_names."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise ValueError(
                f"expected {len(self.feature_names)} feature columns, got {X.shape}"
            )
        assert self.scaler is not None
        scores = self._score_scaled(np.ascontiguousarray(self.scaler.transform(X)))
        return np.clip(scores, 0.0, 1.0)

    def score(self, x: FeatureVector) -> float:
        if x.names != self.feature_names:
            raise ValueError(
                "feature names do not match the predictor "
                f"(got {len(x.names)} dims, expected {len(self.feature_names)})"
            )
        return float(self.score_rows(x.as_array()[None, :])[0])

    def _score_scaled(self, X: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def params_dict(self) -> dict:  # pragma: no cover
        raise NotImplementedError


def check_hyper(hyper: Optional[Mapping], defaults: Mapping, kind: ModelKind) -> dict:
    merged = dict(defaults)
    for key, val in (hyper or {}).items():
        if key not in defaults:
            raise ValueError(f"unknown hyperparameter {key!r} for {kind.value}")
        merged[key] = val
    return merged


def binarize_labels(y: np.ndarray) -> np.ndarray:
    """Answerability labels: strictly greater than 0.5 is positive."""
    return (y > 0.5).astype(np.float64)


def smoothed_prior(y_binary: np.ndarray) -> float:
    """Laplace-smoothed positive rate, used by degenerate constant models."""
    return (float(y_binary.sum()) + 1.0) / (float(y_binary.shape[0]) + 2.0)
