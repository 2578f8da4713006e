"""Deterministic text embeddings.

Stand-in for a learned text encoder: each string is hashed to a seed and the
seed draws a fixed-dimension unit vector. Identical text always maps to the
identical vector, on any machine, with no model weights to ship. Exact-match
prompts therefore score the same relevancy a learned encoder would give a
perfectly aligned pair.
"""

from __future__ import annotations

import hashlib

import numpy as np

from semsplat.scene import EmbeddingTable
from semsplat.semantics import CANONICAL_NEGATIVES

DEFAULT_DIM = 16


def encode_text(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    if not isinstance(text, str) or not text:
        raise ValueError("text must be a non-empty string")
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    v = np.random.default_rng(seed).standard_normal(dim)
    return (v / np.linalg.norm(v)).astype(np.float32)


def encode_texts(labels: list[str], prompts: list[str] | None = None,
                 dim: int = DEFAULT_DIM,
                 ) -> tuple[EmbeddingTable, dict[str, np.ndarray]]:
    """Embeddings for dictionary labels, canonical negatives, and prompts.

    Returns (table, lookup). The lookup always covers the labels themselves
    so a trained scene can be queried by its own dictionary terms offline.
    """
    entry_vectors = np.stack([encode_text(t, dim) for t in labels]) \
        if labels else np.zeros((0, dim), np.float32)
    negative_vectors = np.stack([encode_text(t, dim) for t in CANONICAL_NEGATIVES])
    table = EmbeddingTable(entry_vectors=entry_vectors,
                           negative_vectors=negative_vectors,
                           negative_phrases=list(CANONICAL_NEGATIVES))
    lookup = {t: encode_text(t, dim) for t in labels}
    for prompt in prompts or []:
        lookup[prompt] = encode_text(prompt, dim)
    return table, lookup
