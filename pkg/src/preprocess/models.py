"""Detector / segmenter interface and the synthetic color-blob implementation.

A model is anything with ``detect(image, vocab_hints)`` and
``segment(image, label, bbox)``. Real open-set detectors and promptable
segmenters plug in behind the same two methods; what a vocab hint *means* is
up to the model (BlobModel takes label -> reference RGB).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from scipy import ndimage

# 8-connectivity: diagonal pixels of a ragged blob edge belong together
_STRUCTURE = np.ones((3, 3), dtype=bool)

_HUE_NAMES = (
    (15.0, "red object"),
    (45.0, "orange object"),
    (75.0, "yellow object"),
    (165.0, "green object"),
    (200.0, "cyan object"),
    (260.0, "blue object"),
    (315.0, "purple object"),
    (345.0, "magenta object"),
    (360.0, "red object"),
)


@dataclass
class Detection:
    label: str
    bbox: tuple[int, int, int, int]  # x0, y0, x1, y1 (exclusive)


class DetectorSegmenter(Protocol):
    def detect(self, image: np.ndarray, vocab_hints: dict | None) -> list[Detection]: ...

    def segment(self, image: np.ndarray, label: str, bbox) -> np.ndarray: ...


def _hue_name(rgb: np.ndarray) -> str:
    r, g, b = float(rgb[0]), float(rgb[1]), float(rgb[2])
    hi, lo = max(r, g, b), min(r, g, b)
    if hi - lo < 0.08:
        return "gray object"
    if hi == r:
        hue = 60.0 * (((g - b) / (hi - lo)) % 6.0)
    elif hi == g:
        hue = 60.0 * ((b - r) / (hi - lo) + 2.0)
    else:
        hue = 60.0 * ((r - g) / (hi - lo) + 4.0)
    for upper, name in _HUE_NAMES:
        if hue < upper:
            return name
    return "red object"


class BlobModel:
    """Finds connected same-color regions against a uniform-ish background.

    The background color is estimated from the image border. A detection's
    label comes from the nearest vocab hint color when one is close enough,
    otherwise from the blob's hue, so un-hinted objects still get stable
    open-set names.
    """

    def __init__(self, foreground_tol: float = 0.12, hint_tol: float = 0.18,
                 min_area: int = 24):
        self.foreground_tol = foreground_tol
        self.hint_tol = hint_tol
        self.min_area = min_area

    def _background(self, image: np.ndarray) -> np.ndarray:
        border = np.concatenate([image[0], image[-1], image[:, 0], image[:, -1]])
        return np.median(border, axis=0)

    def _foreground(self, image: np.ndarray) -> np.ndarray:
        bg = self._background(image)
        return np.abs(image - bg).max(axis=-1) > self.foreground_tol

    def detect(self, image: np.ndarray, vocab_hints: dict[str, np.ndarray] | None = None,
               ) -> list[Detection]:
        image = np.asarray(image, dtype=np.float64)
        components, count = ndimage.label(self._foreground(image), _STRUCTURE)
        detections = []
        for region in range(1, count + 1):
            mask = components == region
            if mask.sum() < self.min_area:
                continue
            ys, xs = np.nonzero(mask)
            bbox = (int(xs.min()), int(ys.min()), int(xs.max()) + 1, int(ys.max()) + 1)
            color = image[mask].mean(axis=0)
            label = self._match_hint(color, vocab_hints)
            detections.append(Detection(label=label, bbox=bbox))
        detections.sort(key=lambda d: (d.bbox[1], d.bbox[0]))
        return detections

    def _match_hint(self, color: np.ndarray, vocab_hints) -> str:
        if vocab_hints:
            labels = list(vocab_hints)
            refs = np.asarray([vocab_hints[k] for k in labels], dtype=np.float64)
            dist = np.linalg.norm(refs - color, axis=1)
            best = int(np.argmin(dist))
            if dist[best] <= self.hint_tol:
                return labels[best]
        return _hue_name(color)

    def segment(self, image: np.ndarray, label: str, bbox) -> np.ndarray:
        """Full-image boolean mask of the largest blob inside ``bbox``.

        ``label`` is part of the interface (promptable segmenters condition
        on it); this model segments purely by color.
        """
        image = np.asarray(image, dtype=np.float64)
        x0, y0, x1, y1 = bbox
        window = np.zeros(image.shape[:2], dtype=bool)
        window[y0:y1, x0:x1] = True
        components, count = ndimage.label(self._foreground(image) & window,
                                          _STRUCTURE)
        if count == 0:
            return np.zeros(image.shape[:2], dtype=bool)
        sizes = ndimage.sum_labels(np.ones_like(components), components,
                                   index=np.arange(1, count + 1))
        return components == (1 + int(np.argmax(sizes)))
