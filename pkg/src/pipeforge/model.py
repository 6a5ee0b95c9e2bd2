"""Core domain types shared by all modules.

Types here are immutable after construction and safe to share across
threads; validation happens at construction time or through
:func:`validate_dataset`, which reports violations as data instead of
raising.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Mapping, Optional, Sequence

if TYPE_CHECKING:  # pragma: no cover
    from pipeforge.components import AdapterBinding

logger = logging.getLogger(__name__)


class QATask(Enum):
    """The five pipeline stages, in canonical iteration order.

    NER exists for completeness but the harness treats NER tools as NED
    components (recognition is only ever evaluated combined with
    disambiguation), so NER is never evaluated in isolation.
    """

    NER = "NER"
    NED = "NED"
    RL = "RL"
    CL = "CL"
    QB = "QB"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class GoldAnnotation:
    """Reference annotations for one question and one task.

    ``items`` holds IRIs (entities for NED, relation IRIs for RL, class
    IRIs for CL); QB gold lives in ``query_triples`` as canonical
    triple-pattern strings with variables normalised to ?v0, ?v1 in order
    of first appearance.
    """

    task: QATask
    items: frozenset[str] = frozenset()
    query_triples: Optional[frozenset[str]] = None

    def __post_init__(self) -> None:
        if self.task is QATask.QB:
            if not self.query_triples:
                raise ValueError("QB gold requires non-empty query_triples")
        else:
            if not self.items:
                raise ValueError(f"{self.task} gold requires non-empty items")
            for iri in self.items:
                if ":" not in iri:
                    raise ValueError(f"gold item {iri!r} is not an absolute IRI")

    def target_items(self) -> frozenset[str]:
        """The set a component's output is scored against."""
        if self.task is QATask.QB:
            assert self.query_triples is not None
            return self.query_triples
        return self.items


@dataclass(frozen=True)
class Question:
    """A natural-language question plus optional gold annotations."""

    id: str
    text: str
    gold: Mapping[QATask, GoldAnnotation] = field(default_factory=dict)
    precomputed_pos: Optional[tuple[tuple[str, str], ...]] = None

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"question {self.id!r} has empty text")
        for task, ann in self.gold.items():
            if ann.task is not task:
                raise ValueError(f"gold entry for {task} carries task {ann.task}")

    def has_gold(self, task: QATask) -> bool:
        return task in self.gold


@dataclass(frozen=True)
class AnnotationSet:
    """Output of one component invocation on one question.

    An empty ``items`` set is legal: the component found nothing. For QB
    components the items are triple-pattern strings instead of IRIs.
    """

    task: QATask
    items: frozenset[str]
    source_component: str
    latency_ms: float = 0.0
    failed: bool = False

    def __post_init__(self) -> None:
        if self.latency_ms < 0:
            raise ValueError("latency must be >= 0")


@dataclass(frozen=True)
class Component:
    """An independent implementation of one QA task behind an adapter."""

    id: str
    name: str
    task: QATask
    adapter: "AdapterBinding"


class PerformanceMatrix:
    """Per (question, component) micro F-scores in [0, 1].

    Missing entries mean "not evaluated" and are treated as 0.0 wherever
    a number is required (a component that was never run cannot be
    answerable); :meth:`get` logs a warning the first time that happens.
    """

    def __init__(self, entries: Optional[Mapping[tuple[str, str], float]] = None):
        self._entries: dict[tuple[str, str], float] = {}
        if entries:
            for key, f in entries.items():
                self.set(key[0], key[1], f)
        self._warned_missing = False

    def set(self, question_id: str, component_id: str, f_score: float) -> None:
        if not (0.0 <= f_score <= 1.0):
            raise ValueError(f"f_score {f_score} outside [0, 1]")
        self._entries[(question_id, component_id)] = float(f_score)

    def get(self, question_id: str, component_id: str) -> float:
        """F-score for the pair, 0.0 (with a one-shot warning) if missing."""
        try:
            return self._entries[(question_id, component_id)]
        except KeyError:
            if not self._warned_missing:
                logger.warning(
                    "missing matrix entry (%s, %s) treated as 0.0",
                    question_id,
                    component_id,
                )
                self._warned_missing = True
            return 0.0

    def has(self, question_id: str, component_id: str) -> bool:
        return (question_id, component_id) in self._entries

    def items(self) -> Iterable[tuple[tuple[str, str], float]]:
        return self._entries.items()

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PerformanceMatrix):
            return NotImplemented
        return self._entries == other._entries

    def question_ids(self) -> set[str]:
        return {q for q, _ in self._entries}

    def component_ids(self) -> set[str]:
        return {c for _, c in self._entries}

    def save_csv(self, path: str | Path) -> None:
        """Write `question_id,component_id,f_score` rows, sorted, with
        enough fractional digits that reachable scores round-trip exactly."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["question_id", "component_id", "f_score"])
            for (qid, cid) in sorted(self._entries):
                writer.writerow([qid, cid, f"{self._entries[(qid, cid)]:.17f}"])

    @classmethod
    def load_csv(cls, path: str | Path) -> "PerformanceMatrix":
        matrix = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["question_id", "component_id", "f_score"]:
                raise ValueError(f"unexpected matrix header: {header}")
            for row in reader:
                if len(row) != 3:
                    raise ValueError(f"malformed matrix row: {row}")
                matrix.set(row[0], row[1], float(row[2]))
        return matrix


@dataclass(frozen=True)
class Violation:
    """One dataset validation finding; violations are data, not errors."""

    code: str
    question_id: Optional[str]
    message: str


def validate_dataset(questions: Sequence[Question]) -> list[Violation]:
    """Check Question invariants plus id uniqueness; never mutates input.

    Returns an empty list iff the dataset is valid. Idempotent and
    side-effect free.
    """
    violations: list[Violation] = []
    seen: set[str] = set()
    for q in questions:
        if q.id in seen:
            violations.append(
                Violation("duplicate-id", q.id, f"id {q.id!r} appears more than once")
            )
        seen.add(q.id)
        if not q.text.strip():
            violations.append(
                Violation("empty-text", q.id, "text is empty after trimming")
            )
        if q.precomputed_pos is not None:
            joined = "".join(tok for tok, _ in q.precomputed_pos)
            if joined != "".join(q.text.split()):
                violations.append(
                    Violation(
                        "pos-mismatch",
                        q.id,
                        "precomputed POS tokens do not re-concatenate to text",
                    )
                )
    return violations


# --- dataset JSON (external interface) ---------------------------------------

_GOLD_TASKS = (QATask.NED, QATask.RL, QATask.CL, QATask.QB)


def question_to_dict(q: Question) -> dict:
    doc: dict = {"id": q.id, "text": q.text}
    if q.gold:
        gold: dict[str, list[str]] = {}
        for task in _GOLD_TASKS:
            ann = q.gold.get(task)
            if ann is None:
                continue
            gold[task.value] = sorted(ann.target_items())
        doc["gold"] = gold
    if q.precomputed_pos is not None:
        doc["pos"] = [[tok, tag] for tok, tag in q.precomputed_pos]
    return doc


def question_from_dict(doc: Mapping) -> Question:
    gold: dict[QATask, GoldAnnotation] = {}
    for key, values in (doc.get("gold") or {}).items():
        task = QATask(key)
        items = frozenset(str(v) for v in values)
        if task is QATask.QB:
            gold[task] = GoldAnnotation(task=task, query_triples=items)
        else:
            gold[task] = GoldAnnotation(task=task, items=items)
    pos = doc.get("pos")
    precomputed = tuple((str(t), str(g)) for t, g in pos) if pos is not None else None
    return Question(
        id=str(doc["id"]),
        text=str(doc["text"]),
        gold=gold,
        precomputed_pos=precomputed,
    )


def save_dataset(questions: Sequence[Question], path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump([question_to_dict(q) for q in questions], fh, indent=1)
        fh.write("\n")


def load_questions(path: str | Path) -> list[Question]:
    """Parse a dataset file without validating; see bench.load_dataset for
    the validating loader used by the CLI."""
    with open(path) as fh:
        docs = json.load(fh)
    if not isinstance(docs, list):
        raise ValueError("dataset file must contain a JSON array")
    return [question_from_dict(doc) for doc in docs]
