"""Loader for pre-trained word-embedding tables in whitespace text format."""

from __future__ import annotations

from pathlib import Path

import numpy as np


class EmbeddingTable:
    """Case-insensitive token -> vector lookup with a fixed dimension."""

    def __init__(self, dimension: int, vectors: dict[str, np.ndarray]):
        if dimension <= 0:
            raise ValueError("embedding dimension must be positive")
        for token, vec in vectors.items():
            if vec.shape != (dimension,):
                raise ValueError(
                    f"vector for {token!r} has length {vec.shape[0]}, expected {dimension}"
                )
        self.dimension = dimension
        self._vectors = {tok.lower(): np.asarray(v, dtype=np.float64) for tok, v in vectors.items()}

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self._vectors

    def lookup(self, token: str) -> np.ndarray:
        """Vector for the token; unknown tokens map to the zero vector."""
        vec = self._vectors.get(token.lower())
        if vec is None:
            return np.zeros(self.dimension)
        return vec


def load_embeddings(path: str | Path) -> EmbeddingTable:
    """Parse `token v1 ... vd` lines; an optional first line `count dim`
    is consumed as a header and duplicate tokens keep the first occurrence."""
    dimension: int | None = None
    vectors: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            if lineno == 1 and len(parts) == 2:
                try:
                    int(parts[0]), int(parts[1])
                    continue  # header line
                except ValueError:
                    pass
            token, raw = parts[0], parts[1:]
            if not raw:
                raise ValueError(f"line {lineno}: token {token!r} has no vector")
            try:
                vec = np.array([float(x) for x in raw], dtype=np.float64)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: non-numeric value ({exc})") from None
            if dimension is None:
                dimension = len(vec)
            elif len(vec) != dimension:
                raise ValueError(
                    f"line {lineno}: vector length {len(vec)} != dimension {dimension}"
                )
            vectors.setdefault(token.lower(), vec)
    if dimension is None:
        raise ValueError("embedding file contains no data rows")
    return EmbeddingTable(dimension, vectors)
