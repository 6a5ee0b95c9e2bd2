"""Experiment driver: dataset ingestion, fold evaluation and reporting.

The fold metrics per task: #totalquestions (fold size),
#answerable (questions where some component scores strictly above 0.5)
and predicted top-N (questions where one of the N highest-ranked
components scores strictly above 0.5). Feature selection and scaling are
fitted on training folds only; timing is kept in separate outputs so
primary outputs byte-compare across reruns.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from time import perf_counter
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from pipeforge.components import Registry, build_matrix
from pipeforge.features import ConfigVariant, EmbeddingTable, FeatureConfig
from pipeforge.learners import ModelKind, TrainingSet, kfold, train
from pipeforge.model import (
    PerformanceMatrix,
    QATask,
    Question,
    validate_dataset,
    load_questions,
)
from pipeforge.optimiser import build_training_rows, derive_seed, rank_from_scores
from pipeforge.selection import (
    FeatureRanking,
    rank_ert,
    rfe,
    select_top_n,
    write_ranking_csv,
)

logger = logging.getLogger(__name__)

EVAL_TASKS = (QATask.NED, QATask.RL, QATask.CL, QATask.QB)
TOP_NS = (1, 2, 3)

SETTING_NAMES = (
    "Baseline",
    "FS",
    "NC",
    "FS+NC",
    "ML",
    "FS+NC+ML",
    "2.0-pruned",
)


class DatasetError(ValueError):
    pass


def load_dataset(path: str | Path) -> list[Question]:
    """Parse and validate a dataset file; aborts on any violation."""
    try:
        questions = load_questions(path)
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetError(f"cannot parse {path}: {exc}") from exc
    violations = validate_dataset(questions)
    if violations:
        lines = "; ".join(
            f"[{v.question_id or '?'}] {v.code}: {v.message}" for v in violations[:10]
        )
        raise DatasetError(f"{path} failed validation ({len(violations)} issues): {lines}")
    return questions


@dataclass
class ExperimentSetting:
    """One fully resolved run configuration."""

    name: str
    registry: Registry
    feature_config: Mapping[QATask, FeatureConfig]
    model: Mapping[QATask, ModelKind]
    selection: Mapping[QATask, Optional[tuple[str, int]]] = field(default_factory=dict)
    model_hyper: Mapping[QATask, Optional[Mapping]] = field(default_factory=dict)
    selection_hyper: Optional[Mapping] = None
    k: int = 10
    seed: int = 42
    tasks: Optional[tuple[QATask, ...]] = None

    def resolved_tasks(self, questions: Sequence[Question]) -> list[QATask]:
        if self.tasks is not None:
            return list(self.tasks)
        return [
            t
            for t in EVAL_TASKS
            if self.registry.components_for(t) and any(q.has_gold(t) for q in questions)
        ]

    def validate_for(self, tasks: Sequence[QATask]) -> None:
        for task in tasks:
            if task not in self.feature_config:
                raise ValueError(f"setting {self.name!r} lacks a feature config for {task}")
            if task not in self.model:
                raise ValueError(f"setting {self.name!r} lacks a model kind for {task}")


@dataclass
class FoldReport:
    """Per-fold counting results plus training/scoring wall time."""

    fold: int
    total_questions: int
    answerable: dict[QATask, int]
    predicted_top: dict[QATask, dict[int, int]]
    wall_ms: dict[QATask, float]
    selected_count: dict[QATask, int]

    def check_invariants(self) -> None:
        for task, tops in self.predicted_top.items():
            ordered = [tops[n] for n in sorted(tops)]
            for a, b in zip(ordered, ordered[1:]):
                if a > b:
                    raise AssertionError(f"top-N counts not monotone for {task}")
            if ordered and ordered[-1] > self.answerable[task]:
                raise AssertionError(f"top-N exceeds answerable for {task}")
            if self.answerable[task] > self.total_questions:
                raise AssertionError(f"answerable exceeds fold size for {task}")


def count_metrics(
    test_ids: Sequence[str],
    component_ids: Sequence[str],
    matrix: PerformanceMatrix,
    order_by_qid: Mapping[str, Sequence[str]],
    n_values: Sequence[int] = TOP_NS,
) -> tuple[int, dict[int, int]]:
    """Answerable and predicted-top-N counts over one fold and task."""
    answerable = 0
    tops = {n: 0 for n in n_values if n <= len(component_ids)}
    for qid in test_ids:
        scores = {cid: matrix.get(qid, cid) for cid in component_ids}
        if any(f > 0.5 for f in scores.values()):
            answerable += 1
        order = order_by_qid[qid]
        for n in tops:
            if any(scores[cid] > 0.5 for cid in order[:n]):
                tops[n] += 1
    return answerable, tops


RankerFactory = Callable[
    [QATask, int, Sequence[Question], Sequence[str]],
    Callable[[str], Sequence[str]],
]


def _pooled_training(
    X_train: np.ndarray,
    names: tuple[str, ...],
    train_questions: Sequence[Question],
    component_ids: Sequence[str],
    matrix: PerformanceMatrix,
) -> TrainingSet:
    """Stack (question, component) rows for task-level feature selection."""
    blocks, labels = [], []
    for cid in component_ids:
        rows = [
            i for i, q in enumerate(train_questions) if matrix.has(q.id, cid)
        ]
        if not rows:
            continue
        blocks.append(X_train[rows])
        labels.append(
            np.array([matrix.get(train_questions[i].id, cid) for i in rows])
        )
    if not blocks:
        raise ValueError("no evaluated (question, component) pairs in training folds")
    return TrainingSet(
        X=np.vstack(blocks), y=np.concatenate(labels), feature_names=names
    )


def select_features_for_task(
    setting: ExperimentSetting,
    task: QATask,
    X_train: np.ndarray,
    names: tuple[str, ...],
    train_questions: Sequence[Question],
    component_ids: Sequence[str],
    matrix: PerformanceMatrix,
    seed: int,
) -> tuple[Optional[list[str]], Optional[FeatureRanking]]:
    spec = setting.selection.get(task)
    if spec is None:
        return None, None
    method, n = spec
    pooled = _pooled_training(X_train, names, train_questions, component_ids, matrix)
    provenance = (setting.feature_config[task].variant.value, task.value)
    if method == "ERT":
        ranking = rank_ert(
            pooled, params=setting.selection_hyper, seed=seed, provenance=provenance
        )
    elif method == "RFE":
        ranking = rfe(
            pooled,
            target_n=min(n, len(names)),
            seed=seed,
            estimator_hyper=setting.selection_hyper,
            provenance=provenance,
        )
    else:
        raise ValueError(f"unknown selection method {method!r}")
    return select_top_n(ranking, min(n, len(names))), ranking


def evaluate(
    setting: ExperimentSetting,
    questions: Sequence[Question],
    matrix: Optional[PerformanceMatrix] = None,
    ranker_factory: Optional[RankerFactory] = None,
    table: Optional[EmbeddingTable] = None,
) -> tuple[list[FoldReport], dict]:
    """K-fold evaluation of one setting.

    Per fold: fit per-task feature selection and per-component predictors
    on the k-1 training folds, rank components for every test question and
    count the fold metrics. ``ranker_factory`` substitutes the whole
    training+ranking stage (used by metric-oracle tests).
    """
    if matrix is None:
        matrix = build_matrix(setting.registry, questions, seed=setting.seed)
    tasks = setting.resolved_tasks(questions)
    if not tasks:
        raise ValueError("nothing to evaluate: no task has components and gold")
    setting.validate_for(tasks)

    qids = [q.id for q in questions]
    if len(qids) < setting.k:
        raise ValueError(f"{len(qids)} questions cannot fill {setting.k} folds")
    plan = kfold(qids, setting.k, setting.seed)
    by_id = {q.id: q for q in questions}

    features: dict[QATask, tuple[np.ndarray, tuple[str, ...]]] = {}
    for task in tasks:
        features[task] = build_training_rows(questions, setting.feature_config[task], table)
    row_of = {qid: i for i, qid in enumerate(qids)}

    reports: list[FoldReport] = []
    for fold in range(setting.k):
        test_ids = plan.test_ids(fold)
        train_ids = plan.train_ids(fold)
        train_questions = [by_id[qid] for qid in train_ids]
        answerable: dict[QATask, int] = {}
        predicted: dict[QATask, dict[int, int]] = {}
        wall: dict[QATask, float] = {}
        selected_count: dict[QATask, int] = {}

        for task in tasks:
            component_ids = [c.id for c in setting.registry.components_for(task)]
            X_all, names = features[task]

            if ranker_factory is not None:
                started = perf_counter()
                ranker = ranker_factory(task, fold, train_questions, component_ids)
                order_by_qid = {qid: list(ranker(qid)) for qid in test_ids}
                selected_count[task] = len(names)
            else:
                X_train = X_all[[row_of[qid] for qid in train_ids]]
                selected, _ = select_features_for_task(
                    setting,
                    task,
                    X_train,
                    names,
                    train_questions,
                    component_ids,
                    matrix,
                    seed=derive_seed(setting.seed, fold, task.value, "fs"),
                )
                # the clock covers predictor training + test scoring, not the
                # one-off selection fit
                started = perf_counter()
                if selected is not None:
                    cols = [names.index(n) for n in selected]
                    use_names = tuple(selected)
                else:
                    cols = list(range(len(names)))
                    use_names = names
                selected_count[task] = len(cols)
                X_use = X_all[:, cols]
                X_test = X_use[[row_of[qid] for qid in test_ids]]

                score_columns: list[np.ndarray] = []
                for cid in component_ids:
                    rows = [
                        row_of[qid] for qid in train_ids if matrix.has(qid, cid)
                    ]
                    if not rows:
                        raise ValueError(
                            f"fold {fold}: component {cid!r} has no training data"
                        )
                    training = TrainingSet(
                        X=X_use[rows],
                        y=np.array([matrix.get(qids[r], cid) for r in rows]),
                        feature_names=use_names,
                    )
                    predictor = train(
                        setting.model[task],
                        training,
                        setting.model_hyper.get(task),
                        seed=derive_seed(setting.seed, fold, cid),
                    )
                    score_columns.append(predictor.score_rows(X_test))
                scores = np.column_stack(score_columns)
                order_by_qid = {
                    qid: [
                        cid
                        for cid, _ in rank_from_scores(
                            task, component_ids, scores[i]
                        ).entries
                    ]
                    for i, qid in enumerate(test_ids)
                }

            wall[task] = (perf_counter() - started) * 1000.0
            answerable[task], predicted[task] = count_metrics(
                test_ids, component_ids, matrix, order_by_qid
            )

        report = FoldReport(
            fold=fold,
            total_questions=len(test_ids),
            answerable=answerable,
            predicted_top=predicted,
            wall_ms=wall,
            selected_count=selected_count,
        )
        report.check_invariants()
        reports.append(report)

    return reports, aggregate_reports(reports, tasks)


def aggregate_reports(reports: Sequence[FoldReport], tasks: Sequence[QATask]) -> dict:
    """Arithmetic means over folds, timing kept under a separate key."""
    aggregate: dict = {"metrics": {}, "timing_ms": {}}
    k = float(len(reports))
    for task in tasks:
        entry = {
            "total_questions": sum(r.total_questions for r in reports) / k,
            "answerable": sum(r.answerable[task] for r in reports) / k,
            "selected_features": sum(r.selected_count[task] for r in reports) / k,
        }
        for n in TOP_NS:
            values = [r.predicted_top[task].get(n) for r in reports]
            entry[f"top{n}"] = (
                sum(values) / k if all(v is not None for v in values) else None
            )
        aggregate["metrics"][task.value] = entry
        aggregate["timing_ms"][task.value] = (
            sum(r.wall_ms[task] for r in reports) / k
        )
    return aggregate


def prune_registry(
    registry: Registry,
    matrix: PerformanceMatrix,
    keep: Mapping[QATask, int],
    scenario: Optional[str] = None,
) -> Registry:
    """Keep the top components per task by corpus mean F-score."""
    pruned = Registry(scenario=scenario or f"{registry.scenario}-pruned")
    for task in QATask:
        components = registry.components_for(task)
        if task in keep and len(components) > keep[task]:
            means = []
            for c in components:
                scores = [f for (qid, cid), f in matrix.items() if cid == c.id]
                means.append((-(sum(scores) / len(scores)) if scores else 0.0, c.id, c))
            means.sort(key=lambda t: (t[0], t[1]))
            components = [c for _, _, c in means[: keep[task]]]
        for c in components:
            pruned.register(c)
    return pruned


def balance_questions(
    questions: Sequence[Question],
    matrix: PerformanceMatrix,
    task: QATask,
    component_ids: Sequence[str],
    seed: int = 0,
) -> list[Question]:
    """Undersample the majority answerable-label class for one task.

    Provided for the balanced-dataset variant; not claimed equivalent to
    any particular published balancing scheme.
    """
    positive = [
        q
        for q in questions
        if any(matrix.get(q.id, cid) > 0.5 for cid in component_ids)
    ]
    negative = [q for q in questions if q not in positive]
    rng = np.random.default_rng(seed)
    if len(positive) > len(negative):
        keep = rng.choice(len(positive), size=len(negative), replace=False)
        positive = [positive[i] for i in sorted(keep)]
    elif len(negative) > len(positive):
        keep = rng.choice(len(negative), size=len(positive), replace=False)
        negative = [negative[i] for i in sorted(keep)]
    merged = {q.id: q for q in positive + negative}
    return [q for q in questions if q.id in merged]


# --- named settings grid -------------------------------------------------------


def make_setting(
    name: str,
    base_registry: Registry,
    plus_registry: Optional[Registry] = None,
    pruned_registry: Optional[Registry] = None,
    top_n: int = 15,
    k: int = 10,
    seed: int = 42,
    forest_hyper: Optional[Mapping] = None,
    selection_hyper: Optional[Mapping] = None,
) -> ExperimentSetting:
    """Resolve one named setting of the experiment grid."""
    if name not in SETTING_NAMES:
        raise ValueError(
            f"unknown setting {name!r}; valid names: {', '.join(SETTING_NAMES)}"
        )
    lr = {t: ModelKind.LOGISTIC_REGRESSION for t in EVAL_TASKS}
    mixed = {
        QATask.NED: ModelKind.RANDOM_FOREST,
        QATask.RL: ModelKind.RANDOM_FOREST,
        QATask.CL: ModelKind.LOGISTIC_REGRESSION,
        QATask.QB: ModelKind.LOGISTIC_REGRESSION,
    }
    cf1 = {t: FeatureConfig(ConfigVariant.CF1, for_task=t) for t in EVAL_TASKS}
    cf2 = {t: FeatureConfig(ConfigVariant.CF2, for_task=t) for t in EVAL_TASKS}
    fs = {t: ("ERT", top_n) for t in EVAL_TASKS}
    none = {t: None for t in EVAL_TASKS}
    tree_hyper = {
        t: (forest_hyper if mixed[t] is ModelKind.RANDOM_FOREST else None)
        for t in EVAL_TASKS
    }

    if name in ("NC", "FS+NC", "FS+NC+ML") and plus_registry is None:
        raise ValueError(f"setting {name!r} needs the extended registry")
    if name == "2.0-pruned" and pruned_registry is None:
        raise ValueError("setting '2.0-pruned' needs the pruned registry")

    grid: dict[str, tuple[Registry, Mapping, Mapping, Mapping, Mapping]] = {
        "Baseline": (base_registry, cf1, none, lr, {}),
        "FS": (base_registry, cf2, fs, lr, {}),
        "NC": (plus_registry, cf1, none, lr, {}),
        "FS+NC": (plus_registry, cf2, fs, lr, {}),
        "ML": (base_registry, cf1, none, mixed, tree_hyper),
        "FS+NC+ML": (plus_registry, cf2, fs, mixed, tree_hyper),
        "2.0-pruned": (pruned_registry, cf2, fs, mixed, tree_hyper),
    }
    registry, config, selection, model, hyper = grid[name]
    return ExperimentSetting(
        name=name,
        registry=registry,
        feature_config=config,
        selection=selection,
        model=model,
        model_hyper=hyper,
        selection_hyper=selection_hyper,
        k=k,
        seed=seed,
    )


# --- report files --------------------------------------------------------------


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def report(
    results: Mapping[str, tuple[list[FoldReport], dict]],
    out_dir: str | Path,
) -> None:
    """Write folds.csv, aggregate.json and normalized comparisons.

    Timing-derived values go to timing.csv / normalized_timing.csv only,
    so every other artifact byte-compares across identical reruns.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    with open(out / "folds.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "setting",
                "task",
                "fold",
                "total_questions",
                "answerable",
                "top1",
                "top2",
                "top3",
                "selected_features",
            ]
        )
        for name in results:
            reports, _ = results[name]
            for r in reports:
                for task in sorted(r.answerable, key=lambda t: t.value):
                    tops = r.predicted_top[task]
                    writer.writerow(
                        [
                            name,
                            task.value,
                            r.fold,
                            r.total_questions,
                            r.answerable[task],
                            tops.get(1, ""),
                            tops.get(2, ""),
                            tops.get(3, ""),
                            r.selected_count[task],
                        ]
                    )

    with open(out / "timing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "task", "fold", "train_predict_ms"])
        for name in results:
            reports, _ = results[name]
            for r in reports:
                for task in sorted(r.wall_ms, key=lambda t: t.value):
                    writer.writerow([name, task.value, r.fold, f"{r.wall_ms[task]:.3f}"])

    aggregate_doc = {name: results[name][1]["metrics"] for name in results}
    with open(out / "aggregate.json", "w") as fh:
        json.dump(aggregate_doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    timing_doc = {name: results[name][1]["timing_ms"] for name in results}
    with open(out / "aggregate_timing.json", "w") as fh:
        json.dump(timing_doc, fh, indent=1, sort_keys=True)
        fh.write("\n")

    # normalized comparisons: value / max per metric, min / value for inverses
    tasks = sorted(
        {task for _, agg in results.values() for task in agg["metrics"]},
    )
    with open(out / "normalized.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "task", "metric", "value", "normalized"])
        for task in tasks:
            for metric in ("top1", "top2", "top3"):
                values = {
                    name: agg["metrics"][task].get(metric)
                    for name, (_, agg) in results.items()
                    if task in agg["metrics"]
                }
                present = {n: v for n, v in values.items() if v is not None}
                if not present:
                    continue
                peak = max(present.values())
                for name, v in present.items():
                    norm = v / peak if peak > 0 else 0.0
                    writer.writerow([name, task, metric, _fmt(v), f"{norm:.6f}"])
            counts = {
                name: agg["metrics"][task]["selected_features"]
                for name, (_, agg) in results.items()
                if task in agg["metrics"]
            }
            if counts:
                low = min(counts.values())
                for name, v in counts.items():
                    norm = low / v if v > 0 else 0.0
                    writer.writerow(
                        [name, task, "inverse_features", _fmt(v), f"{norm:.6f}"]
                    )

    with open(out / "normalized_timing.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["setting", "task", "metric", "value", "normalized"])
        for task in tasks:
            times = {
                name: agg["timing_ms"].get(task)
                for name, (_, agg) in results.items()
                if task in agg["timing_ms"]
            }
            present = {n: v for n, v in times.items() if v is not None}
            if not present:
                continue
            low = min(present.values())
            for name, v in present.items():
                norm = low / v if v > 0 else 0.0
                writer.writerow([name, task, "inverse_time", f"{v:.3f}", f"{norm:.6f}"])


def normalized_values(values: Mapping[str, float], inverse: bool = False) -> dict[str, float]:
    """Per-setting normalized metric: value/max, or min/value for metrics
    where lower is better."""
    if not values:
        return {}
    if inverse:
        low = min(values.values())
        return {k: (low / v if v > 0 else 0.0) for k, v in values.items()}
    peak = max(values.values())
    return {k: (v / peak if peak > 0 else 0.0) for k, v in values.items()}


# --- experiment file driver ----------------------------------------------------


def run_experiment(
    exp: Mapping,
    out_dir: str | Path,
    base_registry: Registry,
    questions: Sequence[Question],
    plus_registry: Optional[Registry] = None,
    table: Optional[EmbeddingTable] = None,
) -> dict[str, tuple[list[FoldReport], dict]]:
    """Evaluate every named setting of an experiment grid and write reports."""
    names = list(exp.get("settings", []))
    if not names:
        raise ValueError("experiment file names no settings")
    for name in names:
        if name not in SETTING_NAMES:
            raise ValueError(
                f"unknown setting {name!r}; valid names: {', '.join(SETTING_NAMES)}"
            )
    seed = int(exp.get("seed", 42))
    k = int(exp.get("k", 10))
    top_n = int(exp.get("top_n", 15))
    forest_hyper = exp.get("forest_hyper")
    selection_hyper = exp.get("selection_hyper")

    matrices: dict[str, PerformanceMatrix] = {}
    matrices["base"] = build_matrix(base_registry, questions, seed=seed)
    pruned = None
    if plus_registry is not None:
        matrices["plus"] = build_matrix(plus_registry, questions, seed=seed)
        pruned = prune_registry(
            plus_registry,
            matrices["plus"],
            keep={QATask.NED: 5, QATask.RL: 3},
            scenario="pruned-5-3",
        )
        logger.info(
            "pruned registry counts: NED=%d RL=%d",
            len(pruned.components_for(QATask.NED)),
            len(pruned.components_for(QATask.RL)),
        )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    results: dict[str, tuple[list[FoldReport], dict]] = {}
    rankings_dir = out / "rankings"
    for name in names:
        setting = make_setting(
            name,
            base_registry,
            plus_registry,
            pruned,
            top_n=top_n,
            k=k,
            seed=seed,
            forest_hyper=forest_hyper,
            selection_hyper=selection_hyper,
        )
        matrix = (
            matrices["base"] if setting.registry is base_registry else matrices["plus"]
        )
        logger.info("evaluating setting %s (registry %s)", name, setting.registry.scenario)
        results[name] = evaluate(setting, questions, matrix, table=table)

        # full-data feature rankings per task, for the importance charts
        if any(setting.selection.get(t) for t in setting.resolved_tasks(questions)):
            rankings_dir.mkdir(exist_ok=True)
            for task in setting.resolved_tasks(questions):
                spec = setting.selection.get(task)
                if spec is None:
                    continue
                X_all, names_all = build_training_rows(
                    questions, setting.feature_config[task], table
                )
                _, ranking = select_features_for_task(
                    setting,
                    task,
                    X_all,
                    names_all,
                    list(questions),
                    [c.id for c in setting.registry.components_for(task)],
                    matrix,
                    seed=derive_seed(seed, "full", task.value, "fs"),
                )
                if ranking is not None:
                    safe = name.replace("+", "_").replace("/", "_")
                    write_ranking_csv(
                        ranking, rankings_dir / f"{safe}.{task.value}.csv"
                    )

    report(results, out)
    return results
