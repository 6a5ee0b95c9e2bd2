"""Deterministic feature extraction from questions (configurations CF1-CF6)."""

from pipeforge.features.embeddings import EmbeddingTable, load_embeddings
from pipeforge.features.extract import (
    ConfigVariant,
    FeatureConfig,
    FeatureVector,
    dimensionality,
    extract,
    feature_names,
)
from pipeforge.features.text import (
    PUNCTUATION_TOKENS,
    TAGSET,
    answer_type,
    pos_tag,
    question_type,
    tokenize,
)

__all__ = [
    "ConfigVariant",
    "EmbeddingTable",
    "FeatureConfig",
    "FeatureVector",
    "PUNCTUATION_TOKENS",
    "TAGSET",
    "answer_type",
    "dimensionality",
    "extract",
    "feature_names",
    "load_embeddings",
    "pos_tag",
    "question_type",
    "tokenize",
]
