"""Differentiable semantic Gaussian splatting.

Joint single-phase training of geometry, appearance and per-Gaussian semantic
codes; open-vocabulary queries that answer with disambiguated dictionary
labels; label-driven scene editing; bit-specified dataset and checkpoint
formats; a CLI and a local HTTP service.
"""

from .backward import GradientBuffer, backward_render
from .dataset_io import (TrainingDataset, load_checkpoint, load_dataset,
                         load_query_embeddings, save_checkpoint)
from .errors import (BadMagicError, ConfigurationError, DimensionMismatchError,
                     FormatError, InvalidParameterError, LabelOutOfRangeError,
                     MissingFileError, NotFittedSceneError, SplatError,
                     TruncatedFileError, UnavailableEncoderError,
                     UnsupportedVersionError)
from .estimator import SemanticSplat
from .losses import l1_loss, photometric_loss, semantic_loss, ssim
from .metrics import (iou_per_class, localization_accuracy, mask_miou,
                      mean_iou, psnr)
from .optim import Adam
from .render import (RenderOutput, RenderSettings, render, render_naive)
from .scene import (Camera, EmbeddingTable, GaussianSoA, Scene,
                    SemanticDictionary, SemanticHead, covariance_of,
                    look_at_camera)
from .semantics import (QueryResult, class_probabilities, embed_query,
                        pixel_label_map, predict_label_map, relevancy,
                        resolve_query)
from .training import (LossConfig, TrainConfig, densify_and_prune,
                       evaluate_scene, train)

__version__ = "0.1.0"

__all__ = [
    "Adam", "BadMagicError", "Camera", "ConfigurationError",
    "DimensionMismatchError", "EmbeddingTable", "FormatError", "GaussianSoA",
    "GradientBuffer", "InvalidParameterError", "LabelOutOfRangeError",
    "LossConfig", "MissingFileError", "NotFittedSceneError", "QueryResult",
    "RenderOutput", "RenderSettings", "Scene", "SemanticDictionary",
    "SemanticHead", "SemanticSplat", "SplatError", "TrainConfig",
    "TrainingDataset", "TruncatedFileError", "UnavailableEncoderError",
    "UnsupportedVersionError", "backward_render", "class_probabilities",
    "covariance_of", "densify_and_prune", "embed_query", "evaluate_scene",
    "iou_per_class", "l1_loss", "load_checkpoint", "load_dataset",
    "load_query_embeddings", "localization_accuracy", "look_at_camera",
    "mask_miou", "mean_iou", "photometric_loss",
    "pixel_label_map", "predict_label_map", "psnr", "relevancy", "render",
    "render_naive", "resolve_query", "save_checkpoint", "semantic_loss",
    "ssim", "train",
]
