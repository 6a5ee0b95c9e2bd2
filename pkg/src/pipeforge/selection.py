"""Per-task feature ranking and selection (tree importance and RFE).

Rankings order every input feature exactly once, descending by score
with lexicographic tie-breaks, so top-N selection is a stable prefix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from pipeforge.learners import (
    ModelKind,
    TrainingSet,
    TREE_KINDS,
    gini_importance,
    train,
)
from pipeforge.learners.linear import LogisticRegressionPredictor


@dataclass(frozen=True)
class FeatureRanking:
    method: str  # "ERT" | "RFE"
    ordered: tuple[tuple[str, float], ...]
    provenance: tuple[str, str, int]  # (config variant, task, seed)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.ordered)

    def __len__(self) -> int:
        return len(self.ordered)


def _sort_desc(scores: Mapping[str, float]) -> tuple[tuple[str, float], ...]:
    return tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0])))


def rank_ert(
    training: TrainingSet,
    params: Optional[Mapping] = None,
    seed: int = 0,
    provenance: tuple[str, str] = ("", ""),
) -> FeatureRanking:
    """Rank features by the Gini importance of a fitted ERT ensemble."""
    model = train(ModelKind.EXTREMELY_RANDOMIZED_TREES, training, params, seed)
    importance = gini_importance(model)
    return FeatureRanking(
        method="ERT",
        ordered=_sort_desc(importance),
        provenance=(provenance[0], provenance[1], seed),
    )


def _estimator_importance(kind: ModelKind, training: TrainingSet, hyper, seed: int) -> dict[str, float]:
    model = train(kind, training, hyper, seed)
    if kind in TREE_KINDS:
        try:
            return gini_importance(model)
        except ValueError:
            # degenerate fit: nothing to rank on, treat all features alike
            return {name: 0.0 for name in training.feature_names}
    if isinstance(model, LogisticRegressionPredictor):
        coef = np.abs(model.coefficients())
        return dict(zip(training.feature_names, coef.tolist()))
    raise ValueError(f"{kind.value} cannot drive RFE")


def rfe(
    training: TrainingSet,
    estimator_kind: ModelKind | str = ModelKind.EXTREMELY_RANDOMIZED_TREES,
    target_n: int = 15,
    seed: int = 0,
    estimator_hyper: Optional[Mapping] = None,
    provenance: tuple[str, str] = ("", ""),
) -> FeatureRanking:
    """Recursive feature elimination, one feature per round.

    Eliminated features score by their elimination round (earlier = less
    important); survivors score as final-fit importance offset above every
    eliminated feature, so the reversed elimination order defines the
    ranking tail and survivors strictly outrank it.
    """
    estimator_kind = ModelKind(estimator_kind)
    d = len(training.feature_names)
    if not (1 <= target_n <= d):
        raise ValueError(f"target_n must be in [1, {d}], got {target_n}")

    remaining = list(training.feature_names)
    name_to_col = {n: i for i, n in enumerate(training.feature_names)}
    eliminated: list[str] = []
    while len(remaining) > target_n:
        cols = [name_to_col[n] for n in remaining]
        sub = TrainingSet(
            X=training.X[:, cols],
            y=training.y,
            feature_names=tuple(remaining),
        )
        importance = _estimator_importance(estimator_kind, sub, estimator_hyper, seed)
        # worst = lowest importance, lexicographically last among ties
        low = min(importance[n] for n in remaining)
        worst = max(n for n in remaining if importance[n] == low)
        eliminated.append(worst)
        remaining.remove(worst)

    cols = [name_to_col[n] for n in remaining]
    final = TrainingSet(
        X=training.X[:, cols], y=training.y, feature_names=tuple(remaining)
    )
    final_importance = _estimator_importance(estimator_kind, final, estimator_hyper, seed)

    offset = float(len(eliminated))
    scores: dict[str, float] = {}
    for name in remaining:
        scores[name] = offset + final_importance[name]
    for round_idx, name in enumerate(eliminated):
        scores[name] = float(round_idx)
    return FeatureRanking(
        method="RFE",
        ordered=_sort_desc(scores),
        provenance=(provenance[0], provenance[1], seed),
    )


def select_top_n(ranking: FeatureRanking, n: int) -> list[str]:
    """First n feature names of the ranking."""
    if not (1 <= n <= len(ranking)):
        raise ValueError(f"n must be in [1, {len(ranking)}], got {n}")
    return list(ranking.names()[:n])


def write_ranking_csv(ranking: FeatureRanking, path: str | Path) -> None:
    config, task, seed = ranking.provenance
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "feature", "score", "method", "config", "task", "seed"])
        for rank, (name, score) in enumerate(ranking.ordered, start=1):
            writer.writerow([rank, name, f"{score:.9f}", ranking.method, config, task, seed])


def read_ranking_csv(path: str | Path) -> FeatureRanking:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[:3] != ["rank", "feature", "score"]:
        raise ValueError(f"unexpected ranking header: {header}")
    ordered = tuple((r[1], float(r[2])) for r in body)
    method = body[0][3] if body else "ERT"
    provenance = (body[0][4], body[0][5], int(body[0][6])) if body else ("", "", 0)
    return FeatureRanking(method=method, ordered=ordered, provenance=provenance)
