"""Scikit-learn style estimator facade over the training loop.

SemanticSplat exposes the train/render/label pipeline through the familiar
fit/transform/predict surface with flat constructor parameters, so it plugs
into sklearn tooling (get_params, set_params, clone).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .render import RenderSettings, render
from .scene import Camera
from .semantics import DEFAULT_THRESHOLD, predict_label_map, resolve_query
from .training import LossConfig, TrainConfig, train


def _cameras_of(X) -> list[Camera]:
    if hasattr(X, "cameras"):
        return list(X.cameras)
    if isinstance(X, Camera):
        return [X]
    return list(X)


class SemanticSplat(BaseEstimator):
    """Joint Gaussian-splat reconstruction with per-Gaussian semantics.

    fit(dataset) trains a scene; transform(cameras) renders color images;
    predict(cameras) produces per-pixel class label maps; query(...) answers
    open-vocabulary prompts with disambiguated dictionary labels.
    """

    def __init__(self, iterations: int = 2000, seed: int = 0,
                 dssim_weight: float = 0.2, semantic_weight: float = 1.0,
                 weight_undetected: float = 0.1,
                 lr_means: float = 1.6e-4, lr_means_final: float = 1.6e-6,
                 lr_quats: float = 1e-3, lr_scales: float = 5e-3,
                 lr_opacity: float = 5e-2, lr_sh: float = 2.5e-3,
                 lr_semantic: float = 2.5e-3, lr_head: float = 2.5e-3,
                 densify_interval: int = 100, densify_grad_threshold: float = 2e-4,
                 opacity_reset_interval: int = 3000, sh_degree: int = 3,
                 num_gaussians: int = 1000):
        self.iterations = iterations
        self.seed = seed
        self.dssim_weight = dssim_weight
        self.semantic_weight = semantic_weight
        self.weight_undetected = weight_undetected
        self.lr_means = lr_means
        self.lr_means_final = lr_means_final
        self.lr_quats = lr_quats
        self.lr_scales = lr_scales
        self.lr_opacity = lr_opacity
        self.lr_sh = lr_sh
        self.lr_semantic = lr_semantic
        self.lr_head = lr_head
        self.densify_interval = densify_interval
        self.densify_grad_threshold = densify_grad_threshold
        self.opacity_reset_interval = opacity_reset_interval
        self.sh_degree = sh_degree
        self.num_gaussians = num_gaussians

    def _configs(self) -> tuple[TrainConfig, LossConfig]:
        train_cfg = TrainConfig(
            iterations=self.iterations, seed=self.seed, lr_means=self.lr_means,
            lr_means_final=self.lr_means_final, lr_quats=self.lr_quats,
            lr_scales=self.lr_scales, lr_opacity=self.lr_opacity,
            lr_sh=self.lr_sh, lr_semantic=self.lr_semantic, lr_head=self.lr_head,
            densify_interval=self.densify_interval,
            densify_grad_threshold=self.densify_grad_threshold,
            opacity_reset_interval=self.opacity_reset_interval)
        loss_cfg = LossConfig(
            dssim_weight=self.dssim_weight, semantic_weight=self.semantic_weight,
            weight_undetected=self.weight_undetected)
        return train_cfg, loss_cfg

    def fit(self, X, y=None, scene=None):
        """Train on a dataset (TrainingDataset or an object with the same
        attributes). ``scene`` optionally seeds the initial Gaussians."""
        train_cfg, loss_cfg = self._configs()
        if scene is None:
            from .training import init_scene
            scene = init_scene(X, num_gaussians=self.num_gaussians,
                               sh_degree=self.sh_degree, seed=self.seed)
        self.scene_, self.metrics_log_ = train(X, train_cfg, loss_cfg, scene=scene)
        return self

    def transform(self, X) -> np.ndarray:
        """Render color images for cameras (or a dataset's cameras)."""
        check_is_fitted(self, "scene_")
        settings = RenderSettings()
        return np.stack([render(self.scene_, cam, settings).color
                         for cam in _cameras_of(X)])

    def predict(self, X) -> np.ndarray:
        """Per-pixel class label maps for cameras."""
        check_is_fitted(self, "scene_")
        return np.stack([predict_label_map(self.scene_, cam)
                         for cam in _cameras_of(X)])

    def query(self, query_embedding, camera: Camera,
              threshold: float = DEFAULT_THRESHOLD):
        check_is_fitted(self, "scene_")
        return resolve_query(self.scene_, query_embedding, camera, threshold)

    def score(self, X, y=None) -> float:
        """Mean PSNR over the dataset's views (higher is better)."""
        check_is_fitted(self, "scene_")
        from .metrics import psnr
        cams = _cameras_of(X)
        images = X.images if hasattr(X, "images") else y
        vals = [psnr(render(self.scene_, cam).color, img)
                for cam, img in zip(cams, images)]
        return float(np.mean(vals))
