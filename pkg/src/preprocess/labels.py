"""Dictionary construction and label-map rasterization."""

from __future__ import annotations

import numpy as np

from semsplat.scene import SemanticDictionary

from .models import Detection


def build_dictionary(detections_per_image: list[list[Detection]]) -> SemanticDictionary:
    """Deduplicated labels in first-seen order across all images."""
    entries: list[str] = []
    seen = set()
    for detections in detections_per_image:
        for det in detections:
            if det.label not in seen:
                seen.add(det.label)
                entries.append(det.label)
    return SemanticDictionary(entries)


def rasterize_labels(masks: list[tuple[str, np.ndarray]],
                     dictionary: SemanticDictionary,
                     shape: tuple[int, int]) -> np.ndarray:
    """Paint per-object masks into a single uint16 label map.

    Unlabeled pixels stay 0. Overlaps resolve smaller-mask-on-top: masks are
    painted in decreasing area order, so a small object sitting on a large
    one keeps its own label.
    """
    out = np.zeros(shape, dtype=np.uint16)
    order = sorted(range(len(masks)), key=lambda i: -int(masks[i][1].sum()))
    for i in order:
        label, mask = masks[i]
        out[mask] = dictionary.entries.index(label) + 1
    return out
