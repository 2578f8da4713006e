"""Semantic scene editing: label-based selection, recolor, delete, translate, insert.

All edits mutate the scene in place and return it; callers needing isolation
(the HTTP service) copy the scene first. Edits never touch non-selected
Gaussians.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError
from .optim import Adam
from .scene import (GaussianSoA, Scene, SemanticDictionary, SemanticHead,
                    UNDETECTED_LABEL)
from .semantics import class_probabilities
from .sh import SH_C0
from .validation import as_array, check_in_range


def _check_ids(ids, n: int) -> np.ndarray:
    ids = np.atleast_1d(np.asarray(ids))
    if ids.size == 0:
        return ids.astype(np.int64)
    if not np.issubdtype(ids.dtype, np.integer):
        raise InvalidParameterError("gaussian ids must be integers")
    if ids.min() < 0 or ids.max() >= n:
        raise InvalidParameterError(f"gaussian id out of range [0, {n})")
    return np.unique(ids.astype(np.int64))


def select_by_label(scene: Scene, label: str) -> np.ndarray:
    """Ids of Gaussians whose own argmax class is ``label`` (sorted)."""
    idx = scene.dictionary.lookup(label)
    probs = class_probabilities(scene.gaussians.semantic_codes, scene.head)
    return np.flatnonzero(np.argmax(probs, axis=-1) == idx).astype(np.int64)


def recolor(scene: Scene, ids, rgb) -> Scene:
    """Give the selected Gaussians a flat (view-independent) color.

    Sets the constant SH band to encode ``rgb`` and zeroes the higher bands
    so the edit looks identical from every direction.
    """
    ids = _check_ids(ids, len(scene.gaussians))
    rgb = as_array(rgb, "rgb", shape=(3,), dtype=np.float64)
    check_in_range(rgb, "rgb", 0.0, 1.0)
    if ids.size == 0:
        return scene
    sh = scene.gaussians.sh_coeffs
    sh[ids, :, 0] = ((rgb - 0.5) / SH_C0).astype(scene.dtype)
    sh[ids, :, 1:] = 0.0
    return scene


def delete(scene: Scene, ids, adam: Adam | None = None) -> Scene:
    """Remove the selected Gaussians; optimizer moments compact alongside."""
    ids = _check_ids(ids, len(scene.gaussians))
    keep = np.ones(len(scene.gaussians), dtype=bool)
    keep[ids] = False
    keep_idx = np.flatnonzero(keep)
    scene.gaussians = scene.gaussians.select(keep_idx)
    if adam is not None:
        for name in GaussianSoA.FIELDS:
            adam.select_rows(name, keep_idx)
    return scene


def translate(scene: Scene, ids, offset) -> Scene:
    """Shift the selected Gaussians' centers by a world-space offset."""
    ids = _check_ids(ids, len(scene.gaussians))
    offset = as_array(offset, "offset", shape=(3,), dtype=np.float64)
    scene.gaussians.means[ids] += offset.astype(scene.dtype)
    return scene


def insert(scene: Scene, sub_scene: Scene, offset=(0.0, 0.0, 0.0)) -> Scene:
    """Append another scene's Gaussians at ``offset``, merging dictionaries.

    Labels shared by both scenes merge to the host's index. New labels extend
    the dictionary; the host head and embedding table gain zero / copied rows
    for them. The inserted Gaussians keep their semantic codes as-is, so
    queries against newly added labels need fine-tuning to become meaningful.
    """
    offset = as_array(offset, "offset", shape=(3,), dtype=np.float64)
    new_labels = [e for e in sub_scene.dictionary.entries
                  if e not in scene.dictionary and e != UNDETECTED_LABEL]
    if new_labels:
        merged = SemanticDictionary(scene.dictionary.entries + new_labels)
        pad = len(new_labels)
        head = scene.head
        scene.head = SemanticHead(
            np.concatenate([head.matrix, np.zeros((pad, 3), head.matrix.dtype)]),
            np.concatenate([head.bias, np.zeros(pad, head.bias.dtype)]))
        sub_rows = np.stack([
            sub_scene.embeddings.entry_vectors[sub_scene.dictionary.lookup(lbl) - 1]
            for lbl in new_labels])
        scene.embeddings.entry_vectors = np.concatenate(
            [scene.embeddings.entry_vectors, sub_rows.astype(np.float32)])
        scene.dictionary = merged

    if len(sub_scene.gaussians):
        moved = sub_scene.gaussians.copy().astype(scene.dtype)
        moved.means = moved.means + offset.astype(scene.dtype)
        if moved.sh_coeffs.shape[2] != scene.gaussians.sh_coeffs.shape[2]:
            raise InvalidParameterError(
                "inserted scene must use the same SH degree as the host")
        scene.gaussians = GaussianSoA.concatenate([scene.gaussians, moved])
    return scene
