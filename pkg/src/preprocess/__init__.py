"""Offline pipeline turning raw posed images into the training dataset format.

Detector and segmenter are pluggable behind the two-method interface in
:mod:`preprocess.models`; the built-in :class:`BlobModel` handles synthetic
solid-color scenes so the pipeline runs without any foundation model. Output
files are written with the trainer's own dataset writers, so "valid" means
exactly one thing: ``semsplat.dataset_io.load_dataset`` accepts them.
"""

from .models import BlobModel, Detection
from .labels import build_dictionary, rasterize_labels
from .text_encoder import encode_text, encode_texts
from .pipeline import run_pipeline

__all__ = [
    "BlobModel",
    "Detection",
    "build_dictionary",
    "rasterize_labels",
    "encode_text",
    "encode_texts",
    "run_pipeline",
]
