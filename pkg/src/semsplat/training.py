"""Single-phase joint training of geometry, appearance and semantics.

Every iteration renders one training view, evaluates the photometric loss on
the color image and the weighted cross-entropy on the blended semantic
features, backpropagates both through the rasterizer in one pass, and steps
Adam on all parameter groups together. Densification, pruning and opacity
resets mutate the Gaussian set in place between iterations.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .backward import backward_render
from .errors import ConfigurationError, InvalidParameterError
from .losses import (DSSIM_WEIGHT, WEIGHT_LABELED, WEIGHT_UNDETECTED,
                     photometric_loss, semantic_loss)
from .metrics import mean_iou, psnr
from .optim import Adam, exponential_lr
from .render import RenderSettings, prepare_render, render, render_prepared
from .scene import (Camera, GaussianSoA, Scene, SemanticHead, quat_normalize,
                    rotation_from_quat)
from .sh import num_coeffs


@dataclass(frozen=True)
class LossConfig:
    dssim_weight: float = DSSIM_WEIGHT
    weight_labeled: float = WEIGHT_LABELED
    weight_undetected: float = WEIGHT_UNDETECTED
    semantic_weight: float = 1.0

    def validate(self) -> None:
        if not 0.0 <= self.dssim_weight <= 1.0:
            raise InvalidParameterError("dssim_weight must lie in [0, 1]")
        for name in ("weight_labeled", "weight_undetected", "semantic_weight"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0")


@dataclass
class TrainConfig:
    iterations: int = 30000
    seed: int = 0
    lr_means: float = 1.6e-4
    lr_means_final: float = 1.6e-6
    lr_quats: float = 1e-3
    lr_scales: float = 5e-3
    lr_opacity: float = 5e-2
    lr_sh: float = 2.5e-3
    lr_semantic: float = 2.5e-3
    lr_head: float = 2.5e-3
    sh_degree_interval: int = 1000      # raise active SH degree every N iters; 0 = full
    densify_start: int = 500
    densify_interval: int = 100         # 0 disables densification
    densify_stop: int | None = None     # default: iterations // 2
    densify_grad_threshold: float = 2e-4
    densify_size_fraction: float = 0.01  # of scene extent; clone under, split over
    split_samples: int = 2
    split_scale_factor: float = 1.6
    prune_opacity: float = 0.005
    opacity_reset_interval: int = 3000  # 0 disables resets
    render: RenderSettings = field(default_factory=RenderSettings)

    def validate(self) -> None:
        if self.iterations <= 0:
            raise InvalidParameterError("iterations must be positive")
        for name in ("lr_means", "lr_means_final", "lr_quats", "lr_scales",
                     "lr_opacity", "lr_sh", "lr_semantic", "lr_head"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")
        if self.split_samples < 1 or self.split_scale_factor <= 0:
            raise InvalidParameterError("bad split configuration")


PARAM_GROUPS = ("means", "quats", "log_scales", "opacity_logits", "sh_coeffs",
                "semantic_codes")


def _lr_table(cfg: TrainConfig) -> dict[str, float]:
    return {"means": cfg.lr_means, "quats": cfg.lr_quats,
            "log_scales": cfg.lr_scales, "opacity_logits": cfg.lr_opacity,
            "sh_coeffs": cfg.lr_sh, "semantic_codes": cfg.lr_semantic,
            "head_matrix": cfg.lr_head, "head_bias": cfg.lr_head}


def camera_extent(cameras: list[Camera]) -> float:
    """Radius of the camera rig around its centroid; floor of 1 for degenerate rigs."""
    pos = np.stack([c.position for c in cameras])
    radius = float(np.linalg.norm(pos - pos.mean(axis=0), axis=1).max())
    return max(radius, 1.0)


def _rig_focus(cameras: list[Camera]) -> np.ndarray:
    """Least-squares intersection of the cameras' optical axes."""
    a = np.zeros((3, 3))
    b = np.zeros(3)
    for cam in cameras:
        fwd = cam.rotation[2]
        proj = np.eye(3) - np.outer(fwd, fwd)
        a += proj
        b += proj @ cam.position
    if np.linalg.matrix_rank(a) < 3:
        return np.stack([c.position for c in cameras]).mean(axis=0)
    return np.linalg.solve(a, b)


def init_scene(dataset, *, num_gaussians: int = 1000, sh_degree: int = 3,
               seed: int = 0, dtype=np.float32) -> Scene:
    """Random-cloud initialization around the camera rig's focus point."""
    rng = np.random.default_rng(seed)
    cams = dataset.cameras
    center = _rig_focus(cams)
    extent = camera_extent(cams)
    means = center + rng.standard_normal((num_gaussians, 3)) * (0.3 * extent)

    from scipy.spatial import cKDTree
    tree = cKDTree(means)
    dists, _ = tree.query(means, k=min(4, num_gaussians))
    nn = dists[:, -1] if num_gaussians > 1 else np.full(num_gaussians, 0.1 * extent)
    log_scales = np.repeat(np.log(np.maximum(nn, 1e-4))[:, None], 3, axis=1)

    quats = np.zeros((num_gaussians, 4))
    quats[:, 0] = 1.0
    k = num_coeffs(sh_degree)
    gaussians = GaussianSoA(
        means=means.astype(dtype), quats=quats.astype(dtype),
        log_scales=log_scales.astype(dtype),
        opacity_logits=np.full(num_gaussians, np.log(0.1 / 0.9), dtype),
        sh_coeffs=np.zeros((num_gaussians, 3, k), dtype),
        # small noise: all-zero codes with an all-zero head is a saddle point
        # of the cross-entropy (both gradients vanish identically)
        semantic_codes=(0.1 * rng.standard_normal((num_gaussians, 3))).astype(dtype))
    head = SemanticHead(
        (0.1 * rng.standard_normal((len(dataset.dictionary) + 1, 3))).astype(dtype),
        np.zeros(len(dataset.dictionary) + 1, dtype))
    return Scene(gaussians=gaussians, head=head, dictionary=dataset.dictionary,
                 embeddings=dataset.embeddings, sh_degree=sh_degree)


def reset_opacity(scene: Scene, adam: Adam, ceiling: float = 0.01) -> None:
    """Clamp every opacity to at most ``ceiling`` and clear its Adam moments."""
    op = scene.gaussians.opacities()
    new = np.minimum(op, ceiling)
    scene.gaussians.opacity_logits[:] = np.log(new / (1.0 - new)).astype(scene.dtype)
    adam.reset_rows("opacity_logits", slice(None))


def densify_and_prune(scene: Scene, adam: Adam, accum_grad: np.ndarray,
                      accum_count: np.ndarray, cfg: TrainConfig, extent: float,
                      rng: np.random.Generator) -> None:
    """Clone small / split large high-gradient Gaussians, prune transparent ones.

    New Gaussians inherit semantic codes verbatim; optimizer moment rows are
    filtered and extended to track the new layout (fresh rows start at zero).
    """
    g = scene.gaussians
    avg = accum_grad / np.maximum(accum_count, 1.0)
    high = avg > cfg.densify_grad_threshold
    max_scale = np.exp(g.log_scales).max(axis=1)
    size_limit = cfg.densify_size_fraction * extent
    prune = g.opacities() < cfg.prune_opacity
    clone = high & (max_scale <= size_limit) & ~prune
    split = high & (max_scale > size_limit) & ~prune

    clones = g.select(clone)

    split_src = g.select(split)
    reps = cfg.split_samples
    splits = split_src.select(np.repeat(np.arange(len(split_src)), reps))
    if len(splits):
        scales = np.exp(splits.log_scales)
        eps = rng.standard_normal(splits.means.shape).astype(g.dtype)
        rot = rotation_from_quat(splits.quats)
        splits.means = splits.means + np.einsum("nij,nj->ni", rot, scales * eps)
        splits.log_scales = splits.log_scales - g.dtype.type(
            np.log(cfg.split_scale_factor))

    keep_idx = np.flatnonzero(~(split | prune))
    scene.gaussians = GaussianSoA.concatenate(
        [g.select(keep_idx), clones, splits])
    added = len(clones) + len(splits)
    for name in PARAM_GROUPS:
        adam.select_rows(name, keep_idx)
        adam.append_zero_rows(name, added)


def _visible_mask(prep, camera: Camera) -> np.ndarray:
    p = prep.projection
    return (p.valid
            & (p.mean2d[:, 0] + p.radius >= 0)
            & (p.mean2d[:, 0] - p.radius <= camera.width - 1)
            & (p.mean2d[:, 1] + p.radius >= 0)
            & (p.mean2d[:, 1] - p.radius <= camera.height - 1))


def train(dataset, train_cfg: TrainConfig | None = None,
          loss_cfg: LossConfig | None = None, scene: Scene | None = None,
          log_callback=None):
    """Run the joint training loop; returns (scene, metrics_log).

    The metrics log holds one record per iteration:
    {iteration, L_gs, L_ce, psnr, num_gaussians, wall_ms} where the two loss
    entries are the photometric and semantic terms of that iteration's view.
    """
    cfg = train_cfg or TrainConfig()
    losses = loss_cfg or LossConfig()
    cfg.validate()
    losses.validate()
    if len(dataset.cameras) == 0:
        raise ConfigurationError("dataset has no frames")

    if scene is None:
        scene = init_scene(dataset, seed=cfg.seed)
    scene.validate()
    if scene.head.num_classes != len(dataset.dictionary) + 1:
        raise ConfigurationError(
            f"scene head has {scene.head.num_classes} classes, dataset dictionary "
            f"needs {len(dataset.dictionary) + 1}")
    for i, lm in enumerate(dataset.label_maps):
        if lm.max() >= scene.head.num_classes:
            raise ConfigurationError(f"frame {i} label map exceeds dictionary size")

    adam = Adam(_lr_table(cfg))
    rng = np.random.default_rng(cfg.seed)
    n_views = len(dataset.cameras)
    extent = camera_extent(dataset.cameras)
    densify_stop = cfg.densify_stop if cfg.densify_stop is not None else cfg.iterations // 2

    accum_grad = np.zeros(len(scene.gaussians), scene.dtype)
    accum_count = np.zeros(len(scene.gaussians), scene.dtype)
    log: list[dict] = []
    perm = np.arange(n_views)
    start = time.perf_counter()

    for it in range(cfg.iterations):
        if it % n_views == 0:
            perm = rng.permutation(n_views)
        vi = int(perm[it % n_views])
        camera = dataset.cameras[vi]
        target = dataset.images[vi]
        labels = dataset.label_maps[vi]

        if cfg.sh_degree_interval > 0:
            active_deg = min(scene.sh_degree, it // cfg.sh_degree_interval)
        else:
            active_deg = scene.sh_degree
        prep = prepare_render(scene, camera, active_deg)
        out = render_prepared(scene, camera, prep, cfg.render)

        loss_photo, g_color = photometric_loss(out.color, target, losses.dssim_weight)
        loss_sem, g_feat, g_mat, g_bias = semantic_loss(
            out.features, labels, scene.head,
            weight_undetected=losses.weight_undetected,
            weight_labeled=losses.weight_labeled)
        sw = losses.semantic_weight
        grads = backward_render(scene, camera, g_color, sw * g_feat, cfg.render, prep)
        grads.head_matrix += (sw * g_mat).astype(scene.head.matrix.dtype)
        grads.head_bias += (sw * g_bias).astype(scene.head.bias.dtype)

        # position lr is per unit of rig extent so world scale drops out
        adam.set_lr("means", extent * exponential_lr(it, cfg.iterations,
                                                     cfg.lr_means,
                                                     cfg.lr_means_final))
        g = scene.gaussians
        for name in PARAM_GROUPS:
            adam.step(name, getattr(g, name), getattr(grads, name))
        adam.step("head_matrix", scene.head.matrix, grads.head_matrix)
        adam.step("head_bias", scene.head.bias, grads.head_bias)
        g.quats[:] = quat_normalize(g.quats)

        vis = _visible_mask(prep, camera)
        accum_grad[vis] += np.linalg.norm(grads.mean2d, axis=1)[vis]
        accum_count[vis] += 1.0

        entry = {"iteration": it,
                 "L_gs": float(loss_photo),
                 "L_ce": float(loss_sem),
                 "psnr": psnr(out.color, target),
                 "num_gaussians": len(scene.gaussians),
                 "wall_ms": (time.perf_counter() - start) * 1000.0}
        log.append(entry)
        if log_callback is not None:
            log_callback(entry)

        step = it + 1
        if (cfg.densify_interval > 0 and cfg.densify_start <= step <= densify_stop
                and step % cfg.densify_interval == 0):
            densify_and_prune(scene, adam, accum_grad, accum_count, cfg, extent, rng)
            accum_grad = np.zeros(len(scene.gaussians), scene.dtype)
            accum_count = np.zeros(len(scene.gaussians), scene.dtype)
        if (cfg.opacity_reset_interval > 0 and step % cfg.opacity_reset_interval == 0
                and step < densify_stop):
            reset_opacity(scene, adam)

    return scene, log


def evaluate_scene(scene: Scene, dataset, settings: RenderSettings | None = None) -> dict:
    """Whole-dataset quality report.

    Returns mean PSNR/SSIM over views, label-map mIoU, per-entry
    localization accuracy (peak class-probability pixel inside the
    ground-truth region, pooled over views) and the wall-clock spent.
    """
    from .losses import ssim as ssim_fn
    from .metrics import localization_accuracy
    from .semantics import class_probabilities, predict_label_map

    settings = settings or RenderSettings()
    started = time.perf_counter()
    psnrs, ssims = [], []
    preds, gts = [], []
    rel_maps, gt_masks = [], []
    for camera, img, labels in zip(dataset.cameras, dataset.images, dataset.label_maps):
        out = render(scene, camera, settings)
        psnrs.append(psnr(out.color, img))
        ssims.append(ssim_fn(out.color, img, with_grad=False)[0])
        preds.append(predict_label_map(scene, camera, settings))
        gts.append(labels)
        probs = class_probabilities(out.features, scene.head)
        for cls in range(1, scene.head.num_classes):
            rel_maps.append(probs[:, :, cls])
            gt_masks.append(labels == cls)
    pred = np.stack(preds)
    gt = np.stack(gts)
    return {"psnr": float(np.mean(psnrs)),
            "ssim": float(np.mean(ssims)),
            "miou": mean_iou(pred, gt, scene.head.num_classes),
            "localization_accuracy": localization_accuracy(
                np.stack(rel_maps), np.stack(gt_masks)),
            "num_gaussians": len(scene.gaussians),
            "wall_ms": (time.perf_counter() - started) * 1000.0}
