"""Open-vocabulary semantics: pixel labeling, relevancy scores, query resolution.

A query embedding is compared against each dictionary entry's embedding with a
pairwise softmax against canonical negatives (min over negatives). Entries
whose relevancy exceeds the threshold are "related"; the query answer carries
their stored dictionary labels, per-label pixel masks in the requested view,
member Gaussians and 3-d centroids, ranked by relevancy.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InvalidParameterError, UnavailableEncoderError
from .render import RenderSettings, render
from .scene import Camera, Scene, SemanticHead
from .validation import check_finite, check_unit_norm

DEFAULT_THRESHOLD = 0.5
CANONICAL_NEGATIVES = ("object", "things", "stuff", "texture")


def class_probabilities(features: np.ndarray, head: SemanticHead) -> np.ndarray:
    """Softmax class distribution for (..., 3) blended features."""
    features = np.asarray(features)
    check_finite(features, "features")
    logits = head.logits(features)
    logits = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=-1, keepdims=True)


def pixel_label_map(feature_map: np.ndarray, head: SemanticHead) -> np.ndarray:
    """Per-pixel argmax class; ties resolve to the lowest index."""
    logits = head.logits(np.asarray(feature_map))
    return np.argmax(logits, axis=-1)


def predict_label_map(scene: Scene, camera: Camera,
                      settings: RenderSettings | None = None) -> np.ndarray:
    out = render(scene, camera, settings or RenderSettings())
    return pixel_label_map(out.features, scene.head)


def relevancy(entry: np.ndarray, query: np.ndarray, negatives: np.ndarray) -> float:
    """min over negatives of exp(d.q) / (exp(d.q) + exp(d.neg_i)).

    All embeddings must be unit-norm (within 1e-3). The score is 0.5 exactly
    when the hardest negative ties the query.
    """
    entry = np.asarray(entry, dtype=np.float64)
    query = np.asarray(query, dtype=np.float64)
    negatives = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    check_unit_norm(entry, "entry", atol=1e-3)
    check_unit_norm(query, "query", atol=1e-3)
    check_unit_norm(negatives, "negatives", atol=1e-3)
    pos = np.exp(entry @ query)
    neg = np.exp(negatives @ entry)
    return float(np.min(pos / (pos + neg)))


@dataclass
class LabelHit:
    label: str
    relevancy: float
    pixel_mask: np.ndarray         # (H, W) bool in the requested view
    gaussian_ids: np.ndarray       # sorted int64 ids whose argmax class is this label
    centroid3d: np.ndarray         # opacity-weighted mean of member centers


@dataclass
class QueryResult:
    query: str
    ranked: list[LabelHit] = field(default_factory=list)
    threshold_used: float = DEFAULT_THRESHOLD


def resolve_query(scene: Scene, query_embedding: np.ndarray, camera: Camera,
                  threshold: float = DEFAULT_THRESHOLD,
                  settings: RenderSettings | None = None,
                  query_text: str = "") -> QueryResult:
    """Answer an open-vocabulary query with disambiguated dictionary labels.

    Never returns an unlabeled mask: every hit carries the stored dictionary
    label (e.g. a "coffee" prompt resolves to the entry "coffee machine").
    An empty ranked list (nothing related) is a valid answer, not an error.
    """
    query_embedding = np.asarray(query_embedding, dtype=np.float64)
    table = scene.embeddings
    if query_embedding.shape != (table.dim,):
        raise ConfigurationError(
            f"query embedding has dim {query_embedding.shape}, table has {table.dim}")
    check_unit_norm(query_embedding, "query_embedding", atol=1e-3)

    scores = np.array([
        relevancy(table.entry_vectors[i], query_embedding, table.negative_vectors)
        for i in range(len(scene.dictionary))])
    related = np.flatnonzero(scores > threshold)
    result = QueryResult(query=query_text, threshold_used=float(threshold))
    if related.size == 0:
        return result

    out = render(scene, camera, settings or RenderSettings())
    labels = pixel_label_map(out.features, scene.head)
    gauss_classes = np.argmax(
        class_probabilities(scene.gaussians.semantic_codes, scene.head), axis=-1)
    opac = scene.gaussians.opacities()

    for i in related[np.argsort(-scores[related], kind="stable")]:
        class_idx = int(i) + 1  # entry i sits at dictionary index i+1
        ids = np.flatnonzero(gauss_classes == class_idx).astype(np.int64)
        if ids.size:
            w = opac[ids]
            centroid = (w[:, None] * scene.gaussians.means[ids]).sum(0) / w.sum()
        else:
            centroid = np.zeros(3, dtype=np.float64)
        result.ranked.append(LabelHit(
            label=scene.dictionary.label_of(class_idx),
            relevancy=float(scores[i]),
            pixel_mask=labels == class_idx,
            gaussian_ids=ids,
            centroid3d=np.asarray(centroid, dtype=np.float64)))
    return result


def embed_query(text: str, lookup: dict[str, np.ndarray] | None = None,
                encoder_url: str | None = None) -> np.ndarray:
    """Query text to unit embedding, from a precomputed lookup or a live encoder.

    The lookup wins when it contains the prompt; otherwise the encoder service
    is asked. With neither able to answer, raises UnavailableEncoderError.
    """
    if not isinstance(text, str) or not text:
        raise InvalidParameterError("query text must be a non-empty string")
    if lookup is not None and text in lookup:
        v = np.asarray(lookup[text], dtype=np.float64)
    elif encoder_url is not None:
        import httpx
        try:
            resp = httpx.post(encoder_url, json={"text": text}, timeout=10.0)
        except httpx.HTTPError as exc:
            raise UnavailableEncoderError(
                f"encoder at {encoder_url} unreachable: {exc}") from exc
        if resp.status_code != 200:
            raise UnavailableEncoderError(
                f"encoder at {encoder_url} answered {resp.status_code}")
        try:
            v = np.asarray(resp.json()["vector"], dtype=np.float64)
        except (ValueError, KeyError, TypeError) as exc:
            raise UnavailableEncoderError(
                f"encoder at {encoder_url} returned a malformed payload") from exc
    else:
        raise UnavailableEncoderError(
            f"prompt {text!r} is not in the lookup and no encoder is configured")
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0:
        raise InvalidParameterError(f"embedding for {text!r} is degenerate")
    return v / norm
