"""FeatureVector extraction under configurations CF1-CF6.

CF1 is the 28-dim basic NLP block (question type, answer type, word
count, POS counts). CF2 adds 6 character-case dims and 17 coarse
entity-type counts from the bundled gazetteer (entity types are omitted
for the NED task to avoid bias, leaving 34 dims). CF3/CF4/CF5 derive
from a word-embedding table (mean, concatenation, stop-word-filtered
mean) and CF6 concatenates CF1 with CF3.

Extraction is a pure function of (question, config, table): identical
inputs produce identical vectors across processes and runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Optional

import numpy as np

from pipeforge.features.embeddings import EmbeddingTable
from pipeforge.features.text import (
    ANSWER_TYPES,
    PUNCTUATION_TOKENS,
    QUESTION_TYPES,
    TAGSET,
    answer_type,
    pos_tag,
    question_type,
    tokenize,
)
from pipeforge.model import QATask, Question

POS_COUNT_TAGS = tuple(t for t in TAGSET if t != "OTHER")  # 14 dims

CASE_FEATURES = (
    "case_cap_noninitial",
    "case_allcaps",
    "case_mixed",
    "case_first_cap",
    "case_digit_tokens",
    "case_cap_run",
)

ENTITY_TYPES = (
    "person", "organization", "company", "country", "city", "location",
    "river", "mountain", "language", "nationality", "profession", "award",
    "artwork", "animal", "plant", "food", "sport",
)

_MAX_GAZETTEER_PHRASE = 3


class ConfigVariant(Enum):
    CF1 = "CF1"
    CF2 = "CF2"
    CF3 = "CF3"
    CF4 = "CF4"
    CF5 = "CF5"
    CF6 = "CF6"

    def __str__(self) -> str:
        return self.value


_EMBEDDING_VARIANTS = {
    ConfigVariant.CF3,
    ConfigVariant.CF4,
    ConfigVariant.CF5,
    ConfigVariant.CF6,
}


@dataclass(frozen=True)
class FeatureConfig:
    """Identity of one extraction setup.

    ``for_task`` controls task-aware exclusions (CF2 drops entity-type
    dims for NED); ``embedding_source`` is bookkeeping for CLI runs and
    predictor manifests, the loaded table itself is passed to
    :func:`extract` separately.
    """

    variant: ConfigVariant
    for_task: QATask = QATask.NED
    embedding_source: Optional[str] = None
    max_tokens: int = 30

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @property
    def needs_embeddings(self) -> bool:
        return self.variant in _EMBEDDING_VARIANTS


@dataclass(frozen=True)
class FeatureVector:
    """Named, ordered, finite feature values for one question."""

    config: FeatureConfig
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.values):
            raise ValueError("names and values must have the same length")
        if not all(np.isfinite(v) for v in self.values):
            raise ValueError("feature values must be finite")

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))

    def project(self, names: tuple[str, ...] | list[str]) -> "FeatureVector":
        """Restrict to a subset of dimensions, in the given order."""
        index = {n: i for i, n in enumerate(self.names)}
        try:
            values = tuple(self.values[index[n]] for n in names)
        except KeyError as exc:
            raise ValueError(f"unknown feature name {exc.args[0]!r}") from None
        return FeatureVector(config=self.config, names=tuple(names), values=values)


@lru_cache(maxsize=1)
def stop_words() -> frozenset[str]:
    text = resources.files(__package__).joinpath("data/stopwords.txt").read_text()
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


@lru_cache(maxsize=1)
def gazetteer() -> dict[str, str]:
    text = resources.files(__package__).joinpath("data/gazetteer.tsv").read_text()
    table: dict[str, str] = {}
    for line in text.splitlines():
        if not line.strip():
            continue
        surface, etype = line.split("\t")
        if etype not in ENTITY_TYPES:
            raise ValueError(f"gazetteer type {etype!r} not in the 17-type set")
        table[surface.strip().lower()] = etype
    return table


def _basic_names() -> list[str]:
    names = [f"qt_{label}" for label in QUESTION_TYPES]
    names += [f"at_{label}" for label in ANSWER_TYPES]
    names.append("word_count")
    names += [f"pos_{tag}" for tag in POS_COUNT_TAGS]
    return names


def _cf2_extra_names(for_task: QATask) -> list[str]:
    names = list(CASE_FEATURES)
    if for_task is not QATask.NED:
        names += [f"ent_{t}" for t in ENTITY_TYPES]
    return names


def feature_names(config: FeatureConfig, embedding_dim: Optional[int] = None) -> tuple[str, ...]:
    """Stable dimension names for a config; pure in (variant, for_task,
    embedding dimension, max_tokens)."""
    variant = config.variant
    if variant is ConfigVariant.CF1:
        return tuple(_basic_names())
    if variant is ConfigVariant.CF2:
        return tuple(_basic_names() + _cf2_extra_names(config.for_task))
    if embedding_dim is None or embedding_dim <= 0:
        raise ValueError(f"{variant} requires a positive embedding dimension")
    if variant is ConfigVariant.CF3:
        return tuple(f"emb_avg_{i}" for i in range(embedding_dim))
    if variant is ConfigVariant.CF4:
        return tuple(
            f"emb_tok{t}_{i}"
            for t in range(config.max_tokens)
            for i in range(embedding_dim)
        )
    if variant is ConfigVariant.CF5:
        return tuple(f"emb_avg_nostop_{i}" for i in range(embedding_dim))
    if variant is ConfigVariant.CF6:
        return tuple(_basic_names()) + tuple(f"emb_avg_{i}" for i in range(embedding_dim))
    raise AssertionError(f"unhandled variant {variant}")


def dimensionality(config: FeatureConfig, embedding_dim: Optional[int] = None) -> int:
    return len(feature_names(config, embedding_dim))


def _one_hot(labels: tuple[str, ...], value: str) -> list[float]:
    return [1.0 if label == value else 0.0 for label in labels]


def _longest_cap_run(words: list[str]) -> int:
    best = run = 0
    for w in words:
        if w[:1].isupper():
            run += 1
            best = max(best, run)
        else:
            run = 0
    return best


def _case_values(words: list[str]) -> list[float]:
    cap_noninitial = sum(1.0 for w in words[1:] if w[:1].isupper())
    allcaps = sum(1.0 for w in words if w.isalpha() and w.isupper() and len(w) > 1)
    mixed = sum(
        1.0
        for w in words
        if any(c.isupper() for c in w[1:]) and any(c.islower() for c in w)
    )
    first_cap = 1.0 if words and words[0][:1].isupper() else 0.0
    digits = sum(1.0 for w in words if w.isdigit())
    return [cap_noninitial, allcaps, mixed, first_cap, digits, float(_longest_cap_run(words))]


def _entity_type_counts(words: list[str]) -> dict[str, float]:
    """Greedy longest-match scan of the gazetteer over lowercased words."""
    table = gazetteer()
    lowered = [w.lower() for w in words]
    counts = {t: 0.0 for t in ENTITY_TYPES}
    i = 0
    while i < len(lowered):
        matched = 0
        for span in range(min(_MAX_GAZETTEER_PHRASE, len(lowered) - i), 0, -1):
            phrase = " ".join(lowered[i : i + span])
            etype = table.get(phrase)
            if etype is not None:
                counts[etype] += 1.0
                matched = span
                break
        i += matched if matched else 1
    return counts


def _basic_values(tokens: list[str], tags: list[tuple[str, str]], words: list[str]) -> list[float]:
    values = _one_hot(QUESTION_TYPES, question_type(tokens))
    values += _one_hot(ANSWER_TYPES, answer_type(tokens))
    values.append(float(len(words)))
    tag_counts = {t: 0.0 for t in POS_COUNT_TAGS}
    for tok, tag in tags:
        if tok not in PUNCTUATION_TOKENS and tag in tag_counts:
            tag_counts[tag] += 1.0
    values += [tag_counts[t] for t in POS_COUNT_TAGS]
    return values


def _mean_embedding(words: list[str], table: EmbeddingTable) -> np.ndarray:
    if not words:
        return np.zeros(table.dimension)
    total = np.zeros(table.dimension)
    for w in words:
        total = total + table.lookup(w)
    return total / float(len(words))


def extract(
    question: Question,
    config: FeatureConfig,
    table: Optional[EmbeddingTable] = None,
) -> FeatureVector:
    """Extract the FeatureVector of a question under one configuration."""
    if config.needs_embeddings and table is None:
        raise ValueError(f"{config.variant} requires an embedding table")
    tokens = tokenize(question.text)
    precomputed = None
    if question.precomputed_pos is not None:
        precomputed = [tag for _, tag in question.precomputed_pos]
    tags = pos_tag(tokens, precomputed)
    words = [t for t in tokens if t not in PUNCTUATION_TOKENS]

    variant = config.variant
    if variant is ConfigVariant.CF1:
        values = _basic_values(tokens, tags, words)
    elif variant is ConfigVariant.CF2:
        values = _basic_values(tokens, tags, words) + _case_values(words)
        if config.for_task is not QATask.NED:
            counts = _entity_type_counts(words)
            values += [counts[t] for t in ENTITY_TYPES]
    elif variant is ConfigVariant.CF3:
        assert table is not None
        values = list(_mean_embedding(words, table))
    elif variant is ConfigVariant.CF4:
        assert table is not None
        padded = np.zeros((config.max_tokens, table.dimension))
        for i, w in enumerate(words[: config.max_tokens]):
            padded[i] = table.lookup(w)
        values = list(padded.reshape(-1))
    elif variant is ConfigVariant.CF5:
        assert table is not None
        kept = [w for w in words if w.lower() not in stop_words()]
        values = list(_mean_embedding(kept, table))
    elif variant is ConfigVariant.CF6:
        assert table is not None
        values = _basic_values(tokens, tags, words) + list(_mean_embedding(words, table))
    else:  # pragma: no cover
        raise AssertionError(f"unhandled variant {variant}")

    names = feature_names(config, table.dimension if table is not None else None)
    return FeatureVector(config=config, names=names, values=tuple(float(v) for v in values))
