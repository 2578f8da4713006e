"""End-to-end preprocessing: posed captures in, training dataset out."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from semsplat.dataset_io import (load_image, save_dictionary, save_embeddings,
                                 save_image, save_label_map, save_manifest,
                                 save_query_lookup)
from semsplat.errors import FormatError, MissingFileError

from .labels import build_dictionary, rasterize_labels
from .models import BlobModel, DetectorSegmenter
from .text_encoder import DEFAULT_DIM, encode_texts

_POSE_KEYS = ("image", "camera_to_world", "fx", "fy", "cx", "cy")


def _load_poses(images_dir: Path) -> list[dict]:
    poses_path = images_dir / "poses.json"
    if not poses_path.is_file():
        raise MissingFileError(
            "poses.json not found; camera poses are an input to preprocessing",
            path=str(poses_path))
    data = json.loads(poses_path.read_text("utf-8"))
    frames = data.get("frames")
    if not isinstance(frames, list) or not frames:
        raise FormatError("poses.json must carry a non-empty 'frames' list",
                          path=str(poses_path), key="frames")
    for i, frame in enumerate(frames):
        for key in _POSE_KEYS:
            if key not in frame:
                raise FormatError(f"frames[{i}] missing {key!r}",
                                  path=str(poses_path), key=f"frames[{i}]")
    return frames


def run_pipeline(images_dir, out_dir, *, closed_set_only: bool = False,
                 vocab: dict[str, list[float]] | None = None,
                 prompts: list[str] | None = None, dim: int = DEFAULT_DIM,
                 model: DetectorSegmenter | None = None, jobs: int | None = None):
    """Detect, segment, and serialize a training dataset under ``out_dir``.

    With ``closed_set_only`` every detection outside the vocab is dropped;
    otherwise vocab hints seed the labels and un-hinted objects keep their
    open-set names. Returns the loaded manifest dict for convenience.
    """
    images_dir, out_dir = Path(images_dir), Path(out_dir)
    if closed_set_only and not vocab:
        raise FormatError("closed-set mode needs a vocab file",
                          path=str(images_dir), key="vocab")
    model = model or BlobModel()
    poses = _load_poses(images_dir)
    images = [load_image(images_dir / frame["image"]) for frame in poses]

    def process(image):
        detections = model.detect(image, vocab)
        if closed_set_only:
            detections = [d for d in detections if d.label in vocab]
        return [(d, model.segment(image, d.label, d.bbox)) for d in detections]

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        per_frame = list(pool.map(process, images))

    dictionary = build_dictionary([[d for d, _ in frame] for frame in per_frame])

    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    frames = []
    for frame_info, image, detected in zip(poses, images, per_frame):
        masks = [(d.label, mask) for d, mask in detected]
        label_map = rasterize_labels(masks, dictionary, image.shape[:2])
        name = Path(frame_info["image"]).stem
        image_rel = f"images/{name}.png"
        labels_rel = f"labels/{name}.png"
        save_image(image, out_dir / image_rel)
        save_label_map(label_map, out_dir / labels_rel)
        frames.append({
            "image_path": image_rel, "label_map_path": labels_rel,
            "camera_to_world": frame_info["camera_to_world"],
            "fx": frame_info["fx"], "fy": frame_info["fy"],
            "cx": frame_info["cx"], "cy": frame_info["cy"],
            "width": image.shape[1], "height": image.shape[0],
        })

    table, lookup = encode_texts(dictionary.entries, prompts, dim)
    save_dictionary(dictionary, out_dir / "dictionary.json")
    save_embeddings(table, dictionary.entries, out_dir / "embeddings.bin")
    save_query_lookup(lookup, out_dir / "query_lookup.bin")
    save_manifest(frames, "dictionary.json", "embeddings.bin",
                  out_dir / "manifest.json")
    return {"num_frames": len(frames), "dictionary": dictionary.entries}
