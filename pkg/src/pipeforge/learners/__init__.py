"""From-scratch supervised models behind one estimator interface.

Six model kinds share the :class:`Predictor` surface: logistic regression
and Gaussian naive Bayes binarize the F-score labels at 0.5, the tree
kinds regress on raw labels and clamp scores into [0, 1]. Training is
fully determined by (training set, hyperparameters, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np

from pipeforge.learners.backend import BACKEND
from pipeforge.learners.base import (
    DegenerateLabelsWarning,
    MinMaxScaler,
    ModelKind,
    Predictor,
    TREE_KINDS,
    TrainingSet,
)
from pipeforge.learners.linear import (
    GaussianNaiveBayesPredictor,
    LogisticRegressionPredictor,
    logistic_loss_and_grad,
    train_linear_kind,
)
from pipeforge.learners.trees import (
    GradientBoostedTreesPredictor,
    Tree,
    TreeEnsemblePredictor,
    train_tree_kind,
)

__all__ = [
    "BACKEND",
    "DegenerateLabelsWarning",
    "FoldPlan",
    "GaussianNaiveBayesPredictor",
    "GradientBoostedTreesPredictor",
    "LogisticRegressionPredictor",
    "MinMaxScaler",
    "ModelKind",
    "Predictor",
    "TREE_KINDS",
    "TrainingSet",
    "Tree",
    "TreeEnsemblePredictor",
    "gini_importance",
    "kfold",
    "load_predictor",
    "logistic_loss_and_grad",
    "save_predictor",
    "score",
    "train",
]


def train(
    kind: ModelKind | str,
    training: TrainingSet,
    hyper: Optional[Mapping] = None,
    seed: int = 0,
) -> Predictor:
    """Train one predictor; deterministic given (training, hyper, seed)."""
    kind = ModelKind(kind)
    if seed < 0:
        raise ValueError("seed must be unsigned")
    if kind in TREE_KINDS:
        return train_tree_kind(kind, training, hyper, seed)
    return train_linear_kind(kind, training, hyper, seed)


def score(predictor: Predictor, x) -> float:
    """Score one FeatureVector; finite, in [0, 1], pure."""
    return predictor.score(x)


def gini_importance(predictor: Predictor) -> dict[str, float]:
    """Mean-decrease-impurity feature importance of a tree ensemble.

    Per tree, each internal node contributes its sample-weighted impurity
    decrease to the feature it splits on; contributions are averaged over
    trees and normalized to sum 1.
    """
    if predictor.kind not in TREE_KINDS:
        raise ValueError(f"{predictor.kind.value} has no Gini importance")
    trees: Sequence[Tree] = predictor.trees  # type: ignore[union-attr]
    if not any(t.n_internal for t in trees):
        raise ValueError("importance undefined: ensemble contains no internal node")
    d = len(predictor.feature_names)
    total = np.zeros(d)
    for tree in trees:
        total += tree.importance(d)
    total /= float(len(trees))
    # zero-gain splits can leave sub-ulp negative noise behind
    total = np.maximum(total, 0.0)
    norm = float(total.sum())
    if norm <= 0.0:
        raise ValueError("importance undefined: no positive impurity decrease")
    total /= norm
    return dict(zip(predictor.feature_names, total.tolist()))


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of question ids to k folds; sizes differ by at most 1."""

    k: int
    assignments: Mapping[str, int]

    def test_ids(self, fold: int) -> list[str]:
        return [qid for qid, f in self.assignments.items() if f == fold]

    def train_ids(self, fold: int) -> list[str]:
        return [qid for qid, f in self.assignments.items() if f != fold]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.k
        for f in self.assignments.values():
            sizes[f] += 1
        return sizes


def kfold(ids: Sequence[str], k: int, seed: int = 0) -> FoldPlan:
    """Seeded shuffle followed by round-robin assignment."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(ids) < k:
        raise ValueError(f"need at least {k} items for {k} folds, got {len(ids)}")
    if len(set(ids)) != len(ids):
        raise ValueError("ids must be unique")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(ids))
    assignments = {ids[int(pos)]: i % k for i, pos in enumerate(order)}
    return FoldPlan(k=k, assignments=assignments)


_PREDICTOR_CLASSES = {
    ModelKind.LOGISTIC_REGRESSION: LogisticRegressionPredictor,
    ModelKind.GAUSSIAN_NAIVE_BAYES: GaussianNaiveBayesPredictor,
    ModelKind.DECISION_TREE: TreeEnsemblePredictor,
    ModelKind.RANDOM_FOREST: TreeEnsemblePredictor,
    ModelKind.EXTREMELY_RANDOMIZED_TREES: TreeEnsemblePredictor,
    ModelKind.GRADIENT_BOOSTED_TREES: GradientBoostedTreesPredictor,
}


def predictor_to_dict(predictor: Predictor) -> dict:
    assert predictor.scaler is not None
    return {
        "kind": predictor.kind.value,
        "feature_names": list(predictor.feature_names),
        "seed": predictor.seed,
        "hyper": dict(predictor.hyper),
        "parameters": {
            "scaler": predictor.scaler.to_dict(),
            **predictor.params_dict(),
        },
    }


def predictor_from_dict(doc: Mapping) -> Predictor:
    try:
        kind = ModelKind(doc["kind"])
    except ValueError:
        raise ValueError(f"unknown predictor kind {doc.get('kind')!r}") from None
    cls = _PREDICTOR_CLASSES[kind]
    predictor = cls(
        kind=kind,
        feature_names=tuple(doc["feature_names"]),
        seed=int(doc["seed"]),
        hyper=dict(doc["hyper"]),
    )
    params = doc["parameters"]
    predictor.scaler = MinMaxScaler.from_dict(params["scaler"])
    predictor.load_params(params)
    return predictor


def save_predictor(predictor: Predictor, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(predictor_to_dict(predictor), fh)
        fh.write("\n")


def load_predictor(path: str | Path) -> Predictor:
    with open(path) as fh:
        return predictor_from_dict(json.load(fh))
