"""Command-line surface wiring all modules into reproducible runs.

Subcommands: extract, matrix, experiment, select-features, train, answer,
synth. Every run echoes its fully resolved configuration into the output
directory; identical inputs plus seed give byte-identical primary outputs
(timing lives in separate files). PIPEFORGE_LOG controls log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from pipeforge import bench, synth
from pipeforge.components import build_matrix, load_registry, save_registry
from pipeforge.features import (
    ConfigVariant,
    EmbeddingTable,
    FeatureConfig,
    extract,
    load_embeddings,
)
from pipeforge.learners import (
    ModelKind,
    load_predictor,
    save_predictor,
)
from pipeforge.model import QATask, save_dataset
from pipeforge.optimiser import (
    Goal,
    build_training_rows,
    compose,
    execute,
    rank_components,
    train_predictors,
)
from pipeforge.selection import rank_ert, rfe, select_top_n, write_ranking_csv

logger = logging.getLogger("pipeforge")


def _setup_logging() -> None:
    level = os.environ.get("PIPEFORGE_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _echo_config(out: Path, args: argparse.Namespace) -> None:
    out.mkdir(parents=True, exist_ok=True)
    resolved = {k: str(v) if isinstance(v, Path) else v for k, v in vars(args).items()}
    resolved.pop("func", None)
    with open(out / "config.json", "w") as fh:
        json.dump(resolved, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _load_table(path: Optional[str]) -> Optional[EmbeddingTable]:
    return load_embeddings(path) if path else None


def _feature_config(args: argparse.Namespace, task: QATask) -> FeatureConfig:
    return FeatureConfig(
        variant=ConfigVariant(args.config),
        for_task=task,
        embedding_source=getattr(args, "embeddings", None),
        max_tokens=getattr(args, "max_tokens", 30),
    )


def cmd_extract(args: argparse.Namespace) -> int:
    out = Path(args.out)
    _echo_config(out, args)
    questions = bench.load_dataset(args.dataset)
    task = QATask(args.task)
    config = _feature_config(args, task)
    table = _load_table(args.embeddings)
    if config.needs_embeddings and table is None:
        raise ValueError(f"{config.variant} requires --embeddings")
    rows = [extract(q, config, table) for q in questions]
    names = rows[0].names
    with open(out / "features.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question_id", *names])
        for q, vec in zip(questions, rows):
            writer.writerow([q.id, *[f"{v:.9f}" for v in vec.values]])
    print(f"wrote {len(rows)} rows x {len(names)} features to {out / 'features.csv'}")
    return 0


def cmd_matrix(args: argparse.Namespace) -> int:
    out = Path(args.out)
    _echo_config(out, args)
    questions = bench.load_dataset(args.dataset)
    registry = load_registry(args.registry)
    matrix = build_matrix(registry, questions, seed=args.seed, jobs=args.jobs)
    matrix.save_csv(out / "matrix.csv")
    print(f"wrote {len(matrix)} entries to {out / 'matrix.csv'}")
    return 0


def cmd_experiment(args: argparse.Namespace) -> int:
    out = Path(args.out)
    _echo_config(out, args)
    with open(args.file) as fh:
        exp = json.load(fh)
    base_dir = Path(args.file).parent

    def resolve(p: Optional[str]) -> Optional[Path]:
        if p is None:
            return None
        path = Path(p)
        return path if path.is_absolute() else base_dir / path

    questions = bench.load_dataset(resolve(exp["dataset"]))
    base_registry = load_registry(resolve(exp["registry"]))
    plus_path = resolve(exp.get("new_registry"))
    plus_registry = load_registry(plus_path) if plus_path else None
    table = _load_table(exp.get("embeddings"))
    bench.run_experiment(
        exp,
        out,
        base_registry,
        questions,
        plus_registry=plus_registry,
        table=table,
    )
    print(f"experiment complete; reports under {out}")
    return 0


def cmd_select_features(args: argparse.Namespace) -> int:
    from pipeforge.learners import TrainingSet
    from pipeforge.model import PerformanceMatrix

    out = Path(args.out)
    _echo_config(out, args)
    questions = bench.load_dataset(args.dataset)
    registry = load_registry(args.registry)
    matrix = PerformanceMatrix.load_csv(args.matrix)
    task = QATask(args.task)
    config = _feature_config(args, task)
    table = _load_table(args.embeddings)
    X, names = build_training_rows(questions, config, table)

    blocks, labels = [], []
    for component in registry.components_for(task):
        rows = [i for i, q in enumerate(questions) if matrix.has(q.id, component.id)]
        if not rows:
            continue
        blocks.append(X[rows])
        labels.append(np.array([matrix.get(questions[i].id, component.id) for i in rows]))
    if not blocks:
        raise ValueError(f"matrix holds no entries for task {task}")
    training = TrainingSet(
        X=np.vstack(blocks), y=np.concatenate(labels), feature_names=names
    )
    provenance = (config.variant.value, task.value)
    if args.method == "ERT":
        ranking = rank_ert(training, seed=args.seed, provenance=provenance)
    else:
        ranking = rfe(training, target_n=args.n, seed=args.seed, provenance=provenance)
    write_ranking_csv(ranking, out / "ranking.csv")
    chosen = select_top_n(ranking, min(args.n, len(ranking)))
    with open(out / "selected.json", "w") as fh:
        json.dump({"task": task.value, "features": chosen}, fh, indent=1)
        fh.write("\n")
    print(f"top {len(chosen)} features for {task.value}: {', '.join(chosen[:5])} ...")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from pipeforge.model import PerformanceMatrix

    out = Path(args.out)
    _echo_config(out, args)
    questions = bench.load_dataset(args.dataset)
    registry = load_registry(args.registry)
    matrix = PerformanceMatrix.load_csv(args.matrix)
    table = _load_table(args.embeddings)
    tasks = [t for t in bench.EVAL_TASKS if registry.components_for(t)]
    config = {t: _feature_config(args, t) for t in tasks}
    kind = ModelKind(args.model)
    hyper = json.loads(args.hyper) if args.hyper else None
    if args.label_mode != "default" and hyper is None:
        hyper = {"label_mode": args.label_mode}
    elif args.label_mode != "default":
        hyper = dict(hyper, label_mode=args.label_mode)

    selected = None
    if args.selected:
        with open(args.selected) as fh:
            loaded = json.load(fh)
        selected = {QATask(k): v for k, v in loaded.items()}

    predictors = train_predictors(
        registry,
        questions,
        matrix,
        config,
        {t: kind for t in tasks},
        selected=selected,
        seed=args.seed,
        hyper={t: hyper for t in tasks},
        table=table,
        tasks=tasks,
    )
    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    for cid, predictor in sorted(predictors.items()):
        save_predictor(predictor, models_dir / f"{cid}.json")
    manifest = {
        "config": {t.value: config[t].variant.value for t in tasks},
        "model": kind.value,
        "seed": args.seed,
        "selected": {t.value: list(selected[t]) for t in selected} if selected else None,
        "components": sorted(predictors),
        "embeddings": args.embeddings,
        "max_tokens": args.max_tokens,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"trained {len(predictors)} predictors into {models_dir}")
    return 0


def _parse_k(spec: Optional[str]) -> dict[QATask, int]:
    if not spec:
        return {}
    out = {}
    for part in spec.split(","):
        task, _, num = part.partition("=")
        out[QATask(task.strip())] = int(num)
    return out


def cmd_answer(args: argparse.Namespace) -> int:
    from pipeforge.model import Question

    _setup_logging()
    model_dir = Path(args.models)
    with open(model_dir / "manifest.json") as fh:
        manifest = json.load(fh)
    registry = load_registry(args.registry)
    table = _load_table(manifest.get("embeddings"))

    if args.question_id and args.dataset:
        questions = bench.load_dataset(args.dataset)
        matches = [q for q in questions if q.id == args.question_id]
        if not matches:
            raise ValueError(f"question id {args.question_id!r} not in dataset")
        question = matches[0]
    elif args.question:
        question = Question(id="cli-question", text=args.question)
    else:
        raise ValueError("provide --question TEXT or --question-id with --dataset")

    k = _parse_k(args.k)
    goal = Goal.for_question(question, k=k)
    goal = Goal(
        tasks=tuple(t for t in goal.tasks if registry.components_for(t)), k=k
    )

    predictors = {}
    for cid in manifest["components"]:
        predictors[cid] = load_predictor(model_dir / "models" / f"{cid}.json")

    selected = manifest.get("selected") or {}
    rankings = {}
    for task in goal.tasks:
        config = FeatureConfig(
            variant=ConfigVariant(manifest["config"][task.value]),
            for_task=task,
            max_tokens=manifest.get("max_tokens", 30),
        )
        rankings[task] = rank_components(
            predictors,
            question,
            task,
            config,
            selected=selected.get(task.value),
            registry=registry,
            table=table,
        )
    plans = compose(goal, rankings)
    plan = plans[0]
    results, sparql = execute(
        plan, question, registry, seed=args.seed, fallback=args.fallback
    )
    from pipeforge.components import micro_f_score

    result_docs = {}
    for task, ann in results.items():
        doc = {
            "component": ann.source_component,
            "items": sorted(ann.items),
            "latency_ms": round(ann.latency_ms, 3),
            "failed": ann.failed,
        }
        gold = question.gold.get(task)
        if gold is not None:
            doc["f_score"] = micro_f_score(ann, gold)
        result_docs[task.value] = doc
    trace = {
        "question": question.text,
        "goal": [t.value for t in goal.tasks],
        "plan": plan.to_dict(),
        "results": result_docs,
        "sparql": sparql,
    }
    print(json.dumps(trace, indent=1))
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    out = Path(args.out)
    _echo_config(out, args)
    if args.spec:
        spec = synth.spec_from_file(args.spec)
    else:
        registry = synth.PRESETS[args.preset]()
        spec = synth.SyntheticSpec(
            n_questions=args.n,
            seed=args.seed,
            components=tuple(registry.all_components()),
            scenario=registry.scenario,
        )
    questions, registry = synth.generate_synthetic(spec)
    save_dataset(questions, out / "dataset.json")
    save_registry(registry, out / "registry.json")
    print(
        f"wrote {len(questions)} questions and {len(registry)} components "
        f"({registry.scenario}) to {out}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pipeforge",
        description="Per-question QA component selection and pipeline composition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out: bool = True) -> None:
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--jobs", type=int, default=8)
        if out:
            p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("extract", help="write per-question feature rows")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default="CF1", choices=[v.value for v in ConfigVariant])
    p.add_argument("--task", default="NED", choices=[t.value for t in QATask])
    p.add_argument("--embeddings")
    p.add_argument("--max-tokens", type=int, default=30, dest="max_tokens")
    common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("matrix", help="build the performance matrix")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry", required=True)
    common(p)
    p.set_defaults(func=cmd_matrix)

    p = sub.add_parser("experiment", help="run a named-settings experiment grid")
    p.add_argument("--file", required=True, help="experiment JSON")
    common(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("select-features", help="rank and select features per task")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--task", required=True, choices=[t.value for t in QATask])
    p.add_argument("--config", default="CF2", choices=[v.value for v in ConfigVariant])
    p.add_argument("--method", default="ERT", choices=["ERT", "RFE"])
    p.add_argument("--n", type=int, default=15)
    p.add_argument("--embeddings")
    p.add_argument("--max-tokens", type=int, default=30, dest="max_tokens")
    common(p)
    p.set_defaults(func=cmd_select_features)

    p = sub.add_parser("train", help="train one predictor per component")
    p.add_argument("--dataset", required=True)
    p.add_argument("--registry", required=True)
    p.add_argument("--matrix", required=True)
    p.add_argument("--config", default="CF1", choices=[v.value for v in ConfigVariant])
    p.add_argument("--model", default="RandomForest", choices=[m.value for m in ModelKind])
    p.add_argument("--hyper", help="JSON hyperparameter overrides")
    p.add_argument(
        "--label-mode",
        default="default",
        choices=["default", "regression", "classification"],
        help="tree kinds: regress on raw F-scores or binarize at 0.5",
    )
    p.add_argument("--selected", help="JSON file {task: [feature names]}")
    p.add_argument("--embeddings")
    p.add_argument("--max-tokens", type=int, default=30, dest="max_tokens")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("answer", help="rank, compose and execute for one question")
    p.add_argument("--question")
    p.add_argument("--question-id", dest="question_id")
    p.add_argument("--dataset")
    p.add_argument("--models", required=True, help="directory from `pipeforge train`")
    p.add_argument("--registry", required=True)
    p.add_argument("--k", help="per-task top-k, e.g. NED=3,RL=1")
    p.add_argument("--fallback", action="store_true", help="try next-ranked on empty")
    common(p, out=False)
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("synth", help="generate a synthetic corpus and registry")
    p.add_argument("--preset", default="baseline", choices=sorted(synth.PRESETS))
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--spec", help="custom SyntheticSpec JSON")
    common(p)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, bench.DatasetError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
