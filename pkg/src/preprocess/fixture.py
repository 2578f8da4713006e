"""Synthetic raw-capture generator: posed images of colored blobs.

Produces the *input* side of the pipeline (images + poses.json + vocab.json)
together with ground-truth masks, so tests can check the emitted label maps
against what was actually drawn.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

FIXTURE_VOCAB = {
    "coffee machine": [0.75, 0.25, 0.20],
    "kettle": [0.20, 0.45, 0.80],
    "apple": [0.25, 0.70, 0.30],
}
EXTRA_COLOR = [0.80, 0.76, 0.22]  # yellow-ish, deliberately absent from vocab
BACKGROUND = [0.06, 0.06, 0.09]

# (cx, cy, rx, ry) in unit image coordinates, per object, frame 0
_BLOBS = [
    (0.26, 0.30, 0.13, 0.17),
    (0.72, 0.34, 0.15, 0.12),
    (0.50, 0.74, 0.10, 0.10),
]
_EXTRA_BLOB = (0.82, 0.78, 0.08, 0.11)


def _draw(size: int, blobs: list[tuple[str, tuple, list]], shift: float):
    img = np.tile(np.asarray(BACKGROUND, np.float64), (size, size, 1))
    truth = []
    ys, xs = np.mgrid[0:size, 0:size]
    for label, (cx, cy, rx, ry), color in blobs:
        cx = (cx + shift) * size
        cy = cy * size
        mask = (((xs - cx) / (rx * size)) ** 2
                + ((ys - cy) / (ry * size)) ** 2) <= 1.0
        img[mask] = color
        truth.append((label, mask))
    return img, truth


def write_fixture_captures(out_dir, num_frames: int = 4, size: int = 96,
                           extra_object: bool = False):
    """Write frame_XXX.png + poses.json (+ vocab.json) under ``out_dir``.

    Returns the per-frame ground truth: list of (label, mask) lists in draw
    order. ``extra_object`` adds a fourth blob whose color is not in the
    vocab, which only open-set mode should pick up.
    """
    out_dir = Path(out_dir)
    (out_dir).mkdir(parents=True, exist_ok=True)
    blobs = [(label, geom, FIXTURE_VOCAB[label])
             for label, geom in zip(FIXTURE_VOCAB, _BLOBS)]
    if extra_object:
        blobs.append(("extra", _EXTRA_BLOB, EXTRA_COLOR))

    truths, frames = [], []
    for f in range(num_frames):
        img, truth = _draw(size, blobs, shift=0.02 * f)
        truths.append(truth)
        name = f"frame_{f:03d}.png"
        Image.fromarray(np.round(img * 255.0).astype(np.uint8)).save(out_dir / name)
        pose = np.eye(4)
        pose[0, 3] = 0.3 * f  # simple sideways track; poses are inputs, not estimates
        frames.append({
            "image": name,
            "camera_to_world": pose.tolist(),
            "fx": 1.15 * size, "fy": 1.15 * size,
            "cx": (size - 1) / 2.0, "cy": (size - 1) / 2.0,
        })
    (out_dir / "poses.json").write_text(json.dumps({"frames": frames}, indent=2))
    (out_dir / "vocab.json").write_text(json.dumps(FIXTURE_VOCAB, indent=2))
    return truths
