"""Component registry, execution adapters and the micro F-score scorer.

Real third-party services are represented by two adapter kinds: a
deterministic simulated profile (seeded success model over question
features) and a thin HTTP client speaking a fixed JSON contract. Either
way transport-level failures degrade to empty results and score 0; they
never abort an experiment.
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from time import perf_counter
from typing import Mapping, Optional, Sequence

import numpy as np
import requests

from pipeforge.features import ConfigVariant, FeatureConfig, extract
from pipeforge.model import (
    AnnotationSet,
    Component,
    GoldAnnotation,
    PerformanceMatrix,
    QATask,
    Question,
)

logger = logging.getLogger(__name__)

NOISE_MODES = ("empty", "partial", "spurious")

# predicates are evaluated over the full CF2 feature space (entity types
# included), regardless of which task the component implements
_PREDICATE_CONFIG = FeatureConfig(ConfigVariant.CF2, for_task=QATask.RL)

_OPS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


def stable_hash(text: str) -> int:
    """Process-independent 63-bit hash, used to derive RNG streams."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


class AdapterKind(str, Enum):
    SIMULATED = "Simulated"
    HTTP = "Http"


@dataclass(frozen=True)
class RulePredicate:
    """Threshold test over one extracted question feature."""

    feature: str
    op: str
    value: float

    def __post_init__(self) -> None:
        if self.op not in _OPS:
            raise ValueError(f"unknown predicate op {self.op!r}")

    def matches(self, features: Mapping[str, float]) -> bool:
        if self.feature not in features:
            raise ValueError(f"predicate references unknown feature {self.feature!r}")
        return _OPS[self.op](features[self.feature], self.value)


@dataclass(frozen=True)
class SimRule:
    """First-match rule: when the predicate holds, succeed with ``prob``."""

    predicate: Optional[RulePredicate]
    prob: float
    noise: str = "empty"

    def __post_init__(self) -> None:
        if not (0.0 <= self.prob <= 1.0):
            raise ValueError("rule probability must lie in [0, 1]")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.noise!r}")


@dataclass(frozen=True)
class SimProfile:
    """Seeded success model standing in for a real component."""

    rules: tuple[SimRule, ...] = ()
    base_rate: float = 0.0
    noise: str = "empty"
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 <= self.base_rate <= 1.0):
            raise ValueError("base_rate must lie in [0, 1]")
        if self.noise not in NOISE_MODES:
            raise ValueError(f"unknown noise mode {self.noise!r}")

    def resolve(self, features: Mapping[str, float]) -> tuple[float, str]:
        for rule in self.rules:
            if rule.predicate is None or rule.predicate.matches(features):
                return rule.prob, rule.noise
        return self.base_rate, self.noise


@dataclass(frozen=True)
class AdapterBinding:
    """Exactly one of profile (Simulated) or endpoint (Http) is populated."""

    kind: AdapterKind
    profile: Optional[SimProfile] = None
    endpoint: Optional[str] = None
    timeout_ms: int = 5000
    retries: int = 0

    def __post_init__(self) -> None:
        if self.kind is AdapterKind.SIMULATED:
            if self.profile is None or self.endpoint is not None:
                raise ValueError("Simulated adapters carry a profile and no endpoint")
        else:
            if self.endpoint is None or self.profile is not None:
                raise ValueError("Http adapters carry an endpoint and no profile")


class Registry:
    """Id-keyed component collection with per-task views."""

    def __init__(self, scenario: str = "unnamed"):
        self.scenario = scenario
        self._components: dict[str, Component] = {}

    def register(self, component: Component) -> "Registry":
        if component.id in self._components:
            raise ValueError(f"component id {component.id!r} already registered")
        self._components[component.id] = component
        return self

    def get(self, component_id: str) -> Component:
        try:
            return self._components[component_id]
        except KeyError:
            raise ValueError(f"component {component_id!r} is not registered") from None

    def components_for(self, task: QATask) -> list[Component]:
        return sorted(
            (c for c in self._components.values() if c.task is task),
            key=lambda c: c.id,
        )

    def all_components(self) -> list[Component]:
        return sorted(self._components.values(), key=lambda c: c.id)

    def task_counts(self) -> dict[QATask, int]:
        counts = {task: 0 for task in QATask}
        for c in self._components.values():
            counts[c.task] += 1
        return counts

    def tasks_present(self) -> list[QATask]:
        return [t for t in QATask if self.task_counts()[t] > 0]

    def __len__(self) -> int:
        return len(self._components)

    def __contains__(self, component_id: str) -> bool:
        return component_id in self._components


def register(registry: Registry, component: Component) -> Registry:
    return registry.register(component)


def question_features(question: Question) -> dict[str, float]:
    """Full CF2 feature dict used to evaluate simulated-profile predicates."""
    return extract(question, _PREDICATE_CONFIG).as_dict()


def _simulate(
    component: Component,
    question: Question,
    seed: int,
    features: Mapping[str, float],
) -> AnnotationSet:
    profile = component.adapter.profile
    assert profile is not None
    prob, noise = profile.resolve(features)
    rng = np.random.default_rng(
        (seed, profile.seed, stable_hash(question.id), stable_hash(component.id))
    )
    success = rng.random() < prob
    latency = float(rng.uniform(2.0, 40.0))
    gold = question.gold.get(component.task)
    gold_items: tuple[str, ...] = ()
    if gold is not None:
        gold_items = tuple(sorted(gold.target_items()))

    if success and gold_items:
        items = frozenset(gold_items)
    elif not gold_items or noise == "empty":
        items = frozenset()
    elif noise == "partial":
        dropped = int(rng.integers(0, len(gold_items)))
        items = frozenset(v for i, v in enumerate(gold_items) if i != dropped)
    else:  # spurious
        wrong = f"http://example.org/noise/{int(rng.integers(0, 10_000))}"
        items = frozenset(gold_items) | {wrong}
    return AnnotationSet(
        task=component.task,
        items=items,
        source_component=component.id,
        latency_ms=latency,
        failed=False,
    )


def _call_http(component: Component, question: Question) -> AnnotationSet:
    binding = component.adapter
    assert binding.endpoint is not None
    start = perf_counter()
    for attempt in range(binding.retries + 1):
        try:
            response = requests.post(
                binding.endpoint,
                json={"question": question.text},
                timeout=binding.timeout_ms / 1000.0,
            )
            if response.status_code != 200:
                logger.warning(
                    "component %s returned status %s",
                    component.id,
                    response.status_code,
                )
                continue
            payload = response.json()
            items = frozenset(str(v).strip() for v in payload.get("items", []))
            return AnnotationSet(
                task=component.task,
                items=items,
                source_component=component.id,
                latency_ms=(perf_counter() - start) * 1000.0,
            )
        except (requests.RequestException, ValueError) as exc:
            logger.warning(
                "component %s attempt %d failed: %s", component.id, attempt + 1, exc
            )
    return AnnotationSet(
        task=component.task,
        items=frozenset(),
        source_component=component.id,
        latency_ms=(perf_counter() - start) * 1000.0,
        failed=True,
    )


def invoke(
    component: Component,
    question: Question,
    seed: int = 0,
    _features: Optional[Mapping[str, float]] = None,
) -> AnnotationSet:
    """Run one component on one question.

    Simulated adapters are deterministic under (seed, question id,
    component id); HTTP transport failures return an empty result flagged
    failed instead of raising into the scoring path.
    """
    if component.adapter.kind is AdapterKind.SIMULATED:
        features = _features if _features is not None else question_features(question)
        return _simulate(component, question, seed, features)
    return _call_http(component, question)


def normalize_iri(value: str) -> str:
    return value.strip()


def micro_f_score(predicted: AnnotationSet, gold: GoldAnnotation) -> float:
    """Set precision/recall harmonic mean after IRI normalization."""
    if predicted.task is not gold.task:
        raise ValueError(
            f"task mismatch: prediction is {predicted.task}, gold is {gold.task}"
        )
    pred = {normalize_iri(v) for v in predicted.items}
    truth = {normalize_iri(v) for v in gold.target_items()}
    hit = len(pred & truth)
    precision = hit / len(pred) if pred else 0.0
    recall = hit / len(truth)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def build_matrix(
    registry: Registry,
    questions: Sequence[Question],
    seed: int = 0,
    jobs: int = 8,
) -> PerformanceMatrix:
    """Invoke every component on every question carrying gold for its task.

    RNG streams derive from (seed, question id, component id), so the
    result is independent of execution order and bit-for-bit reproducible.
    """
    features = {q.id: question_features(q) for q in questions}
    matrix = PerformanceMatrix()

    def run_component(component: Component) -> list[tuple[str, str, float]]:
        rows = []
        for q in questions:
            gold = q.gold.get(component.task)
            if gold is None:
                continue
            result = invoke(component, q, seed, _features=features[q.id])
            rows.append((q.id, component.id, micro_f_score(result, gold)))
        return rows

    components = registry.all_components()
    if jobs > 1 and len(components) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            all_rows = list(pool.map(run_component, components))
    else:
        all_rows = [run_component(c) for c in components]
    for rows in all_rows:
        for qid, cid, f in rows:
            matrix.set(qid, cid, f)
    return matrix


# --- registry scenario files --------------------------------------------------


def _profile_to_dict(profile: SimProfile) -> dict:
    doc: dict = {"base_rate": profile.base_rate}
    if profile.noise != "empty":
        doc["noise"] = profile.noise
    if profile.seed:
        doc["seed"] = profile.seed
    if profile.rules:
        doc["rules"] = [
            {
                **(
                    {
                        "feature": r.predicate.feature,
                        "op": r.predicate.op,
                        "value": r.predicate.value,
                    }
                    if r.predicate is not None
                    else {}
                ),
                "prob": r.prob,
                "noise": r.noise,
            }
            for r in profile.rules
        ]
    return doc


def _profile_from_dict(doc: Mapping) -> SimProfile:
    rules = []
    for r in doc.get("rules", []):
        predicate = None
        if "feature" in r:
            predicate = RulePredicate(
                feature=r["feature"], op=r.get("op", ">="), value=float(r["value"])
            )
        rules.append(
            SimRule(predicate=predicate, prob=float(r["prob"]), noise=r.get("noise", "empty"))
        )
    return SimProfile(
        rules=tuple(rules),
        base_rate=float(doc.get("base_rate", 0.0)),
        noise=doc.get("noise", "empty"),
        seed=int(doc.get("seed", 0)),
    )


def component_to_dict(component: Component) -> dict:
    binding = component.adapter
    if binding.kind is AdapterKind.SIMULATED:
        adapter = {"kind": "Simulated", "profile": _profile_to_dict(binding.profile)}
    else:
        adapter = {
            "kind": "Http",
            "endpoint": binding.endpoint,
            "timeout_ms": binding.timeout_ms,
            "retries": binding.retries,
        }
    return {
        "id": component.id,
        "name": component.name,
        "task": component.task.value,
        "adapter": adapter,
    }


def component_from_dict(doc: Mapping) -> Component:
    adapter_doc = doc["adapter"]
    kind = AdapterKind(adapter_doc["kind"])
    if kind is AdapterKind.SIMULATED:
        binding = AdapterBinding(
            kind=kind, profile=_profile_from_dict(adapter_doc["profile"])
        )
    else:
        binding = AdapterBinding(
            kind=kind,
            endpoint=adapter_doc["endpoint"],
            timeout_ms=int(adapter_doc.get("timeout_ms", 5000)),
            retries=int(adapter_doc.get("retries", 0)),
        )
    return Component(
        id=str(doc["id"]),
        name=str(doc.get("name", doc["id"])),
        task=QATask(doc["task"]),
        adapter=binding,
    )


def save_registry(registry: Registry, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(
            [component_to_dict(c) for c in registry.all_components()], fh, indent=1
        )
        fh.write("\n")


def load_registry(path: str | Path, scenario: Optional[str] = None) -> Registry:
    with open(path) as fh:
        docs = json.load(fh)
    registry = Registry(scenario=scenario or Path(path).stem)
    for doc in docs:
        registry.register(component_from_dict(doc))
    return registry
