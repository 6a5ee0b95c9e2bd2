"""Tree and tree-ensemble predictors built on the kernel backend.

All ensembles derive per-tree RNG streams from (seed, tree index), so
trees can be trained in any order (or in parallel) without changing the
result, and a forest of one tree without bootstrapping reproduces a
plain decision tree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from pipeforge.learners import backend
from pipeforge.learners.base import (
    MinMaxScaler,
    ModelKind,
    Predictor,
    TrainingSet,
    binarize_labels,
    check_hyper,
)

TREE_DEFAULTS = {
    "max_depth": 12,
    "min_samples_leaf": 2,
    "max_features": None,
    "label_mode": "regression",
}

FOREST_DEFAULTS = dict(TREE_DEFAULTS, n_trees=100, bootstrap=True)
ERT_DEFAULTS = dict(TREE_DEFAULTS, n_trees=100, bootstrap=False)
GBT_DEFAULTS = {
    "n_trees": 100,
    "learning_rate": 0.1,
    "max_depth": 3,
    "min_samples_leaf": 2,
    "max_features": None,
    "label_mode": "regression",
}


@dataclass
class Tree:
    """Flat array form of one fitted tree; feature < 0 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    impurity: np.ndarray
    n_node: np.ndarray

    def apply(self, X: np.ndarray) -> np.ndarray:
        return backend.apply_tree(
            self.feature, self.threshold, self.left, self.right, self.value, X
        )

    @property
    def n_internal(self) -> int:
        return int(np.sum(self.feature >= 0))

    def importance(self, n_features: int) -> np.ndarray:
        """Weighted impurity decrease per feature, unnormalized."""
        out = np.zeros(n_features)
        n_root = float(self.n_node[0])
        for nid in np.nonzero(self.feature >= 0)[0]:
            li, ri = int(self.left[nid]), int(self.right[nid])
            nn = float(self.n_node[nid])
            dec = (
                self.impurity[nid]
                - (float(self.n_node[li]) / nn) * self.impurity[li]
                - (float(self.n_node[ri]) / nn) * self.impurity[ri]
            )
            out[int(self.feature[nid])] += (nn / n_root) * dec
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "impurity": self.impurity.tolist(),
            "n_node": self.n_node.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            threshold=np.asarray(doc["threshold"], dtype=np.float64),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=np.float64),
            impurity=np.asarray(doc["impurity"], dtype=np.float64),
            n_node=np.asarray(doc["n_node"], dtype=np.int64),
        )


def _resolve_max_features(spec, d: int) -> int:
    if spec is None or spec == "all":
        return d
    if spec == "sqrt":
        return max(1, int(math.sqrt(d)))
    if spec == "log2":
        return max(1, int(math.log2(d))) if d > 1 else 1
    k = int(spec)
    if k < 1:
        raise ValueError("max_features must be >= 1")
    return min(k, d)


def _fit_one_tree(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    tree_index: int,
    max_depth: int,
    min_leaf: int,
    k: int,
    ert: bool,
    gini: bool,
    bootstrap: bool,
) -> Tree:
    n, d = X.shape
    rng = np.random.default_rng((seed, tree_index))
    if bootstrap:
        idx0 = rng.integers(0, n, size=n).astype(np.int64)
    else:
        idx0 = np.arange(n, dtype=np.int64)
    per_attempt = (k if k < d else 0) + (min(k, d) if ert else 0)
    rand = rng.random((2 * n + 1) * per_attempt) if per_attempt else np.empty(0)
    arrays = backend.grow_tree(
        X, y, idx0, max_depth, min_leaf, k, ert, gini, rand
    )
    return Tree(*arrays)


@dataclass
class TreeEnsemblePredictor(Predictor):
    """DecisionTree / RandomForest / ExtremelyRandomizedTrees predictor.

    Regression mode regresses on raw F-scores and averages tree values;
    classification mode binarizes at 0.5, splits on Gini impurity and
    averages leaf positive fractions. Either way the ensemble mean lies
    between the per-tree extremes.
    """

    trees: list[Tree] = field(default_factory=list)

    def fit(self, training: TrainingSet) -> "TreeEnsemblePredictor":
        self.scaler = MinMaxScaler.fit(training.X)
        X = np.ascontiguousarray(self.scaler.transform(training.X))
        gini = self.hyper["label_mode"] == "classification"
        y = binarize_labels(training.y) if gini else training.y
        k = _resolve_max_features(self.hyper["max_features"], X.shape[1])
        ert = self.kind is ModelKind.EXTREMELY_RANDOMIZED_TREES
        n_trees = 1 if self.kind is ModelKind.DECISION_TREE else self.hyper["n_trees"]
        bootstrap = (
            False
            if self.kind is ModelKind.DECISION_TREE
            else bool(self.hyper["bootstrap"])
        )
        self.trees = [
            _fit_one_tree(
                X,
                y,
                self.seed,
                t,
                self.hyper["max_depth"],
                self.hyper["min_samples_leaf"],
                k,
                ert,
                gini,
                bootstrap,
            )
            for t in range(n_trees)
        ]
        return self

    def _score_scaled(self, X: np.ndarray) -> np.ndarray:
        preds = np.stack([tree.apply(X) for tree in self.trees])
        return preds.mean(axis=0)

    def params_dict(self) -> dict:
        return {"trees": [t.to_dict() for t in self.trees]}

    def load_params(self, doc: Mapping) -> None:
        self.trees = [Tree.from_dict(t) for t in doc["trees"]]


@dataclass
class GradientBoostedTreesPredictor(Predictor):
    """Least-squares boosting: shallow trees fitted to residuals.

    In classification mode the labels are binarized first; stage trees
    always use variance splits because residuals are continuous.
    """

    trees: list[Tree] = field(default_factory=list)
    base_score: float = 0.0

    def fit(self, training: TrainingSet) -> "GradientBoostedTreesPredictor":
        self.scaler = MinMaxScaler.fit(training.X)
        X = np.ascontiguousarray(self.scaler.transform(training.X))
        y = (
            binarize_labels(training.y)
            if self.hyper["label_mode"] == "classification"
            else training.y
        )
        k = _resolve_max_features(self.hyper["max_features"], X.shape[1])
        lr = float(self.hyper["learning_rate"])
        self.base_score = float(np.mean(y))
        current = np.full(y.shape[0], self.base_score)
        self.trees = []
        for t in range(self.hyper["n_trees"]):
            residual = y - current
            tree = _fit_one_tree(
                X,
                residual,
                self.seed,
                t,
                self.hyper["max_depth"],
                self.hyper["min_samples_leaf"],
                k,
                ert=False,
                gini=False,
                bootstrap=False,
            )
            current = current + lr * tree.apply(X)
            self.trees.append(tree)
        return self

    def _score_scaled(self, X: np.ndarray) -> np.ndarray:
        total = np.full(X.shape[0], self.base_score)
        lr = float(self.hyper["learning_rate"])
        for tree in self.trees:
            total = total + lr * tree.apply(X)
        return total

    def params_dict(self) -> dict:
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
        }

    def load_params(self, doc: Mapping) -> None:
        self.base_score = float(doc["base_score"])
        self.trees = [Tree.from_dict(t) for t in doc["trees"]]


def train_tree_kind(
    kind: ModelKind,
    training: TrainingSet,
    hyper: Optional[Mapping],
    seed: int,
):
    if kind is ModelKind.GRADIENT_BOOSTED_TREES:
        resolved = check_hyper(hyper, GBT_DEFAULTS, kind)
        predictor = GradientBoostedTreesPredictor(
            kind=kind,
            feature_names=training.feature_names,
            seed=seed,
            hyper=resolved,
        )
    else:
        defaults = {
            ModelKind.DECISION_TREE: TREE_DEFAULTS,
            ModelKind.RANDOM_FOREST: FOREST_DEFAULTS,
            ModelKind.EXTREMELY_RANDOMIZED_TREES: ERT_DEFAULTS,
        }[kind]
        resolved = check_hyper(hyper, defaults, kind)
        predictor = TreeEnsemblePredictor(
            kind=kind,
            feature_names=training.feature_names,
            seed=seed,
            hyper=resolved,
        )
    return predictor.fit(training)
