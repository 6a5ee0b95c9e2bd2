"""The local optimiser: per-component predictors, per-question component
ranking, greedy top-k pipeline composition and pipeline execution.

A pipeline's estimated quality is the product of its per-task top scores;
the first plan returned by :func:`compose` is therefore the per-task
argmax composition. Tie-breaking is lexicographic by component id
everywhere, for reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from pipeforge.components import Registry, invoke, stable_hash
from pipeforge.features import EmbeddingTable, FeatureConfig, extract
from pipeforge.learners import ModelKind, Predictor, TrainingSet, train
from pipeforge.model import (
    AnnotationSet,
    PerformanceMatrix,
    QATask,
    Question,
)

DEFAULT_GOAL_TASKS = (QATask.NED, QATask.RL, QATask.QB)


@dataclass(frozen=True)
class Goal:
    """An ordered set of tasks to accomplish, with per-task top-k widths."""

    tasks: tuple[QATask, ...]
    k: Mapping[QATask, int]

    def __post_init__(self) -> None:
        if not self.tasks:
            raise ValueError("goal must contain at least one task")
        if len(set(self.tasks)) != len(self.tasks):
            raise ValueError("goal tasks must be unique")
        for task in self.tasks:
            if self.k.get(task, 1) < 1:
                raise ValueError(f"k for {task} must be >= 1")

    def k_for(self, task: QATask) -> int:
        return self.k.get(task, 1)

    @classmethod
    def default(cls, include_cl: bool = False, k: Optional[Mapping[QATask, int]] = None) -> "Goal":
        tasks = (
            (QATask.NED, QATask.RL, QATask.CL, QATask.QB)
            if include_cl
            else DEFAULT_GOAL_TASKS
        )
        return cls(tasks=tasks, k=dict(k or {}))

    @classmethod
    def for_question(cls, question: Question, k: Optional[Mapping[QATask, int]] = None) -> "Goal":
        return cls.default(include_cl=question.has_gold(QATask.CL), k=k)


@dataclass(frozen=True)
class RankedComponents:
    """Components of one task ordered by predicted score (best first)."""

    task: QATask
    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        for _, score in self.entries:
            if not (0.0 <= score <= 1.0):
                raise ValueError(f"ranked score {score} outside [0, 1]")
        for (ca, sa), (cb, sb) in zip(self.entries, self.entries[1:]):
            if sa < sb or (sa == sb and ca > cb):
                raise ValueError("entries must be sorted by score, ties by id")

    def top(self, n: int) -> tuple[tuple[str, float], ...]:
        return self.entries[:n]

    def best(self) -> str:
        return self.entries[0][0]


@dataclass(frozen=True)
class PipelinePlan:
    """One concrete composition: an ordered candidate list per goal task.

    The primary choice is the head of each list; the remaining entries are
    fallbacks in rank order. estimated_quality is the product of the
    primary choices' scores.
    """

    choices: Mapping[QATask, tuple[tuple[str, float], ...]]
    estimated_quality: float

    def __post_init__(self) -> None:
        product = 1.0
        for task, entries in self.choices.items():
            if not entries:
                raise ValueError(f"empty choice list for {task}")
            product *= entries[0][1]
        if abs(product - self.estimated_quality) > 1e-9:
            raise ValueError(
                "estimated_quality must be the product of the top choice scores"
            )

    def primary(self, task: QATask) -> str:
        return self.choices[task][0][0]

    def to_dict(self) -> dict:
        return {
            "choices": {
                task.value: [{"component": cid, "score": s} for cid, s in entries]
                for task, entries in self.choices.items()
            },
            "estimated_quality": self.estimated_quality,
        }


def rank_from_scores(
    task: QATask, component_ids: Sequence[str], scores: Sequence[float]
) -> RankedComponents:
    """Order (component, score) pairs descending, ties by ascending id."""
    pairs = sorted(zip(component_ids, scores), key=lambda cs: (-cs[1], cs[0]))
    return RankedComponents(task=task, entries=tuple((c, float(s)) for c, s in pairs))


def build_training_rows(
    questions: Sequence[Question],
    config: FeatureConfig,
    table: Optional[EmbeddingTable] = None,
    selected: Optional[Sequence[str]] = None,
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Feature matrix for a list of questions under one config."""
    vectors = [extract(q, config, table) for q in questions]
    names = vectors[0].names if vectors else ()
    X = np.array([v.values for v in vectors], dtype=np.float64)
    if selected is not None:
        index = {n: i for i, n in enumerate(names)}
        cols = [index[n] for n in selected]
        X = X[:, cols]
        names = tuple(selected)
    return X, tuple(names)


def train_predictors(
    registry: Registry,
    questions: Sequence[Question],
    matrix: PerformanceMatrix,
    config: Mapping[QATask, FeatureConfig],
    model_kind: Mapping[QATask, ModelKind],
    selected: Optional[Mapping[QATask, Sequence[str]]] = None,
    seed: int = 0,
    hyper: Optional[Mapping[QATask, Mapping]] = None,
    table: Optional[EmbeddingTable] = None,
    tasks: Optional[Sequence[QATask]] = None,
) -> dict[str, Predictor]:
    """One predictor per registered component of the requested tasks.

    Rows where a component was never evaluated are skipped; a component
    with zero evaluated questions is an error.
    """
    predictors: dict[str, Predictor] = {}
    task_list = list(tasks) if tasks is not None else registry.tasks_present()
    for task in task_list:
        components = registry.components_for(task)
        if not components:
            continue
        chosen = selected.get(task) if selected else None
        X, names = build_training_rows(questions, config[task], table, chosen)
        for component in components:
            rows = [
                i for i, q in enumerate(questions) if matrix.has(q.id, component.id)
            ]
            if not rows:
                raise ValueError(
                    f"component {component.id!r} has no evaluated questions to train on"
                )
            y = np.array([matrix.get(questions[i].id, component.id) for i in rows])
            training = TrainingSet(X=X[rows], y=y, feature_names=names)
            predictors[component.id] = train(
                model_kind[task],
                training,
                (hyper or {}).get(task),
                seed=derive_seed(seed, component.id),
            )
    return predictors


def derive_seed(seed: int, *parts: object) -> int:
    """Stable sub-seed derivation for per-component training."""
    return stable_hash(f"{seed}|" + "|".join(str(p) for p in parts)) % (2**32)


def rank_components(
    predictors: Mapping[str, Predictor],
    question: Question,
    task: QATask,
    config: FeatureConfig,
    selected: Optional[Sequence[str]] = None,
    registry: Optional[Registry] = None,
    table: Optional[EmbeddingTable] = None,
) -> RankedComponents:
    """Score every component of the task on one question and order them."""
    if registry is None:
        raise ValueError("rank_components requires the registry")
    components = registry.components_for(task)
    if not components:
        raise ValueError(f"no components registered for {task}")
    vector = extract(question, config, table)
    if selected is not None:
        vector = vector.project(tuple(selected))
    ids, scores = [], []
    for component in components:
        predictor = predictors.get(component.id)
        if predictor is None:
            raise ValueError(f"missing predictor for component {component.id!r}")
        ids.append(component.id)
        scores.append(predictor.score(vector))
    return rank_from_scores(task, ids, scores)


def compose(goal: Goal, rankings: Mapping[QATask, RankedComponents]) -> list[PipelinePlan]:
    """Enumerate the Cartesian product of per-task top-k slices as plans.

    Plans come back sorted by estimated quality (descending), ties broken
    by the concatenation of primary component ids; the first plan is the
    per-task argmax composition.
    """
    slices: dict[QATask, tuple[tuple[str, float], ...]] = {}
    for task in goal.tasks:
        if task not in rankings:
            raise ValueError(f"no ranking supplied for task {task}")
        k = goal.k_for(task)
        if k > len(rankings[task].entries):
            raise ValueError(
                f"k={k} exceeds the {len(rankings[task].entries)} ranked "
                f"components for {task}"
            )
        slices[task] = rankings[task].top(k)

    plans: list[PipelinePlan] = []
    picks: list[tuple[tuple[str, float], ...]] = [slices[t] for t in goal.tasks]
    counts = [len(p) for p in picks]
    total = 1
    for c in counts:
        total *= c
    for flat in range(total):
        rem = flat
        chosen: list[tuple[str, float]] = []
        for c, options in zip(counts, picks):
            chosen.append(options[rem % c])
            rem //= c
        quality = 1.0
        choices: dict[QATask, tuple[tuple[str, float], ...]] = {}
        for task, head in zip(goal.tasks, chosen):
            rest = tuple(e for e in slices[task] if e[0] != head[0])
            choices[task] = (head,) + rest
            quality *= head[1]
        plans.append(PipelinePlan(choices=choices, estimated_quality=quality))
    plans.sort(
        key=lambda p: (
            -p.estimated_quality,
            "".join(p.primary(t) for t in goal.tasks),
        )
    )
    return plans


def _expand_sparql(entity: str, relation: str) -> str:
    return f"SELECT ?v0 {{ <{entity}> <{relation}> ?v0 . }}"


def execute(
    plan: PipelinePlan,
    question: Question,
    registry: Registry,
    seed: int = 0,
    fallback: bool = False,
) -> tuple[dict[QATask, AnnotationSet], Optional[str]]:
    """Run the plan's choices task by task, in goal order.

    In strict mode (default) only the primary choice per task runs and
    empty results propagate; with ``fallback`` enabled the next-ranked
    choice is tried whenever a stage comes back empty or failed. When the
    last task is QB and exactly one entity plus one relation were found, a
    built-in naive query builder emits the SPARQL string.
    """
    results: dict[QATask, AnnotationSet] = {}
    for task, entries in plan.choices.items():
        candidates = entries if fallback else entries[:1]
        outcome: Optional[AnnotationSet] = None
        for cid, _ in candidates:
            outcome = invoke(registry.get(cid), question, seed)
            if outcome.items and not outcome.failed:
                break
        assert outcome is not None
        results[task] = outcome

    sparql: Optional[str] = None
    tasks = list(plan.choices.keys())
    if tasks and tasks[-1] is QATask.QB:
        entities = results.get(QATask.NED)
        relations = results.get(QATask.RL)
        if (
            entities is not None
            and relations is not None
            and len(entities.items) == 1
            and len(relations.items) == 1
        ):
            (entity,) = entities.items
            (relation,) = relations.items
            sparql = _expand_sparql(entity, relation)
    return results, sparql
