"""Synthetic question corpus and simulated component scenarios.

The generator emits template-based questions with known gold for NED,
RL, QB (and CL on class templates) plus registries of simulated
components whose success rules reference extractable features, so
predictors have real signal to learn at desk scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from pipeforge.components import (
    AdapterBinding,
    AdapterKind,
    Registry,
    RulePredicate,
    SimProfile,
    SimRule,
    component_from_dict,
    component_to_dict,
)
from pipeforge.model import Component, GoldAnnotation, QATask, Question

DBR = "http://dbpedia.org/resource/"
DBO = "http://dbpedia.org/ontology/"

ENTITIES = (
    "India", "Germany", "France", "Spain", "Japan", "Brazil", "Canada",
    "Egypt", "Norway", "Poland", "Berlin", "Paris", "London", "Tokyo",
    "Seoul", "Madrid", "Warsaw", "Oslo", "Cairo", "Einstein", "Mozart",
    "Newton", "Tesla", "Darwin", "Nile", "Everest",
    "United States", "United Kingdom", "New Zealand", "South Korea",
    "New York City", "Barack Obama", "Isaac Newton", "Marie Curie",
    "Mount Everest", "Abraham Lincoln",
    "NASA", "USA", "NATO", "IBM", "UNESCO",
)

RELATIONS = (
    ("timezone", "timezones", "timeZone"),
    ("capital", "capitals", "capital"),
    ("population", "populations", "populationTotal"),
    ("author", "authors", "author"),
    ("spouse", "spouses", "spouse"),
    ("currency", "currencies", "currency"),
    ("mayor", "mayors", "mayor"),
    ("language", "languages", "language"),
    ("child", "children", "child"),
    ("president", "presidents", "president"),
    ("founder", "founders", "founder"),
    ("area", "areas", "areaTotal"),
)

DATE_RELATIONS = (
    ("founded", "foundingDate"),
    ("born", "birthDate"),
    ("discovered", "discoveryDate"),
)

CLASSES = (
    ("river", "rivers", "River"),
    ("city", "cities", "City"),
    ("country", "countries", "Country"),
    ("person", "people", "Person"),
    ("company", "companies", "Company"),
    ("mountain", "mountains", "Mountain"),
)


def entity_iri(surface: str) -> str:
    return DBR + surface.replace(" ", "_")


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one deterministic corpus + simulated registry."""

    n_questions: int
    seed: int = 42
    components: tuple[Component, ...] = ()
    scenario: str = "synthetic"
    entities: tuple[str, ...] = ENTITIES
    relations: tuple[tuple[str, str, str], ...] = RELATIONS
    classes: tuple[tuple[str, str, str], ...] = CLASSES

    def __post_init__(self) -> None:
        if self.n_questions < 1:
            raise ValueError("n_questions must be positive")


def _gold(
    ned: Sequence[str],
    rl: str,
    qb: str,
    cl: Optional[str] = None,
) -> dict[QATask, GoldAnnotation]:
    gold = {
        QATask.NED: GoldAnnotation(task=QATask.NED, items=frozenset(ned)),
        QATask.RL: GoldAnnotation(task=QATask.RL, items=frozenset({rl})),
        QATask.QB: GoldAnnotation(task=QATask.QB, query_triples=frozenset({qb})),
    }
    if cl is not None:
        gold[QATask.CL] = GoldAnnotation(task=QATask.CL, items=frozenset({cl}))
    return gold


def _instantiate(spec: SyntheticSpec, rng: np.random.Generator, qid: str) -> Question:
    template = int(rng.integers(0, 8))
    ent = spec.entities[int(rng.integers(0, len(spec.entities)))]
    rel_s, rel_p, rel_local = spec.relations[int(rng.integers(0, len(spec.relations)))]
    cls_s, cls_p, cls_local = spec.classes[int(rng.integers(0, len(spec.classes)))]
    e = entity_iri(ent)
    r = DBO + rel_local
    c = DBO + cls_local

    if template == 0:
        text = f"What is the {rel_s} of {ent}?"
        gold = _gold([e], r, f"<{e}> <{r}> ?v0")
    elif template == 1:
        text = f"Who is the {rel_s} of {ent}?"
        gold = _gold([e], r, f"<{e}> <{r}> ?v0")
    elif template == 2:
        text = f"Which {cls_s} is the {rel_s} of {ent}?"
        gold = _gold([e], r, f"<{e}> <{r}> ?v0", cl=c)
    elif template == 3:
        text = f"How many {rel_p} does {ent} have?"
        gold = _gold([e], r, f"<{e}> <{r}> ?v0")
    elif template == 4:
        other = ent
        while other == ent:
            other = spec.entities[int(rng.integers(0, len(spec.entities)))]
        e2 = entity_iri(other)
        text = f"Is {other} the {rel_s} of {ent}?"
        gold = _gold([e, e2], r, f"<{e}> <{r}> <{e2}>")
    elif template == 5:
        text = f"Give me all {rel_p} of {ent}."
        gold = _gold([e], r, f"<{e}> <{r}> ?v0")
    elif template == 6:
        text = f"Give me all {cls_p} whose {rel_s} is {ent}."
        gold = _gold([e], r, f"?v0 <{r}> <{e}>", cl=c)
    else:
        verb, date_local = DATE_RELATIONS[int(rng.integers(0, len(DATE_RELATIONS)))]
        rd = DBO + date_local
        text = f"When was {ent} {verb}?"
        gold = _gold([e], rd, f"<{e}> <{rd}> ?v0")
    return Question(id=qid, text=text, gold=gold)


def generate_synthetic(spec: SyntheticSpec) -> tuple[list[Question], Registry]:
    """Deterministic per seed; returns (questions, simulated registry)."""
    rng = np.random.default_rng(spec.seed)
    questions = [
        _instantiate(spec, rng, f"syn-{i:05d}") for i in range(spec.n_questions)
    ]
    registry = Registry(scenario=spec.scenario)
    for component in spec.components:
        if component.adapter.kind is not AdapterKind.SIMULATED:
            raise ValueError("synthetic scenarios use Simulated components only")
        registry.register(component)
    return questions, registry


# --- component profile helpers -------------------------------------------------


def rule_component(
    cid: str,
    task: QATask,
    rules: Sequence[tuple[str, str, float, float]],
    base_rate: float = 0.0,
    noise: str = "empty",
    name: Optional[str] = None,
) -> Component:
    """Component whose profile succeeds per (feature, op, value, prob) rules."""
    profile = SimProfile(
        rules=tuple(
            SimRule(
                predicate=RulePredicate(feature=f, op=op, value=v),
                prob=p,
            )
            for f, op, v, p in rules
        ),
        base_rate=base_rate,
        noise=noise,
    )
    return Component(
        id=cid,
        name=name or cid,
        task=task,
        adapter=AdapterBinding(kind=AdapterKind.SIMULATED, profile=profile),
    )


def flat_component(
    cid: str,
    task: QATask,
    rate: float,
    noise: str = "empty",
    name: Optional[str] = None,
) -> Component:
    """Pure base-rate component (no feature signal)."""
    profile = SimProfile(base_rate=rate, noise=noise)
    return Component(
        id=cid,
        name=name or cid,
        task=task,
        adapter=AdapterBinding(kind=AdapterKind.SIMULATED, profile=profile),
    )


def baseline_components() -> list[Component]:
    """The 18/5/2/2 scenario: a few feature-keyed strong components per
    task plus a tail of mediocre/noise ones."""
    ned = [
        rule_component("ned-01-what", QATask.NED, [("qt_what", ">=", 1.0, 0.93)]),
        rule_component(
            "ned-02-whowhich",
            QATask.NED,
            [("qt_who", ">=", 1.0, 0.88), ("qt_which", ">=", 1.0, 0.88)],
        ),
        rule_component("ned-03-caps", QATask.NED, [("case_allcaps", ">=", 1.0, 0.85)]),
        rule_component("ned-04-multi", QATask.NED, [("pos_NNP", ">=", 2.0, 0.4)]),
        rule_component("ned-05-short", QATask.NED, [("word_count", "<=", 5.0, 0.45)]),
        rule_component("ned-06-list", QATask.NED, [("qt_give_list", ">=", 1.0, 0.8)]),
        rule_component("ned-07-bool", QATask.NED, [("qt_boolean_aux", ">=", 1.0, 0.85)]),
        rule_component("ned-08-count", QATask.NED, [("at_number", ">=", 1.0, 0.65)]),
        rule_component("ned-09-long", QATask.NED, [("word_count", ">=", 9.0, 0.3)]),
        rule_component("ned-10-ent", QATask.NED, [("ent_country", ">=", 1.0, 0.35)]),
        rule_component("ned-11-mid", QATask.NED, [("pos_NNP", ">=", 2.0, 0.2)]),
        rule_component("ned-12-mid", QATask.NED, [("qt_what", ">=", 1.0, 0.15)]),
    ]
    ned += [
        flat_component(f"ned-{i:02d}-weak", QATask.NED, rate)
        for i, rate in zip(range(13, 19), (0.04, 0.03, 0.03, 0.02, 0.02, 0.01))
    ]
    rl = [
        rule_component("rl-01-what", QATask.RL, [("qt_what", ">=", 1.0, 0.8)]),
        rule_component("rl-02-long", QATask.RL, [("word_count", ">=", 8.0, 0.6)]),
        flat_component("rl-03-mid", QATask.RL, 0.25),
        flat_component("rl-04-weak", QATask.RL, 0.1),
        flat_component("rl-05-weak", QATask.RL, 0.04),
    ]
    cl = [
        rule_component("cl-01-which", QATask.CL, [("qt_which", ">=", 1.0, 0.8)]),
        rule_component(
            "cl-02-list",
            QATask.CL,
            [("qt_give_list", ">=", 1.0, 0.55)],
            base_rate=0.2,
        ),
    ]
    qb = [
        rule_component("qb-01-short", QATask.QB, [("word_count", "<=", 6.0, 0.8)]),
        rule_component(
            "qb-02-what",
            QATask.QB,
            [("qt_what", ">=", 1.0, 0.6)],
            base_rate=0.25,
        ),
    ]
    return ned + rl + cl + qb


def new_components() -> list[Component]:
    """Simulated stand-ins for the recently released high-F components,
    calibrated to their published aggregate F-scores."""
    return [
        flat_component("ned-new-earl", QATask.NED, 0.54),
        flat_component("ned-new-falcon", QATask.NED, 0.73),
        flat_component("ned-new-ambiverse", QATask.NED, 0.65),
        flat_component("rl-new-earl", QATask.RL, 0.27),
        flat_component("rl-new-falcon", QATask.RL, 0.56),
    ]


def selector_components() -> list[Component]:
    """Six NED components with one deterministic question-type rule each;
    together they cover every question."""
    return [
        rule_component("ned-qt-what", QATask.NED, [("qt_what", ">=", 1.0, 1.0)]),
        rule_component("ned-qt-who", QATask.NED, [("qt_who", ">=", 1.0, 1.0)]),
        rule_component("ned-qt-which", QATask.NED, [("qt_which", ">=", 1.0, 1.0)]),
        rule_component("ned-qt-bool", QATask.NED, [("qt_boolean_aux", ">=", 1.0, 1.0)]),
        rule_component("ned-qt-give", QATask.NED, [("qt_give_list", ">=", 1.0, 1.0)]),
        rule_component(
            "ned-qt-howwhen",
            QATask.NED,
            [("qt_how", ">=", 1.0, 1.0), ("qt_when", ">=", 1.0, 1.0)],
        ),
    ]


def build_registry(components: Sequence[Component], scenario: str) -> Registry:
    registry = Registry(scenario=scenario)
    for component in components:
        registry.register(component)
    return registry


def baseline_registry() -> Registry:
    return build_registry(baseline_components(), "baseline-18-5-2-2")


def plus_new_registry() -> Registry:
    return build_registry(
        baseline_components() + new_components(), "plus-new-components"
    )


def selector_registry() -> Registry:
    return build_registry(selector_components(), "selector-6-ned")


PRESETS = {
    "baseline": baseline_registry,
    "plus-new": plus_new_registry,
    "selector": selector_registry,
}


def spec_from_file(path: str | Path) -> SyntheticSpec:
    with open(path) as fh:
        doc = json.load(fh)
    components = tuple(component_from_dict(c) for c in doc.get("components", []))
    return SyntheticSpec(
        n_questions=int(doc["n_questions"]),
        seed=int(doc.get("seed", 42)),
        components=components,
        scenario=doc.get("scenario", "synthetic"),
    )


def spec_to_file(spec: SyntheticSpec, path: str | Path) -> None:
    doc = {
        "n_questions": spec.n_questions,
        "seed": spec.seed,
        "scenario": spec.scenario,
        "components": [component_to_dict(c) for c in spec.components],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")
