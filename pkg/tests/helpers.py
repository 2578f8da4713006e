"""Shared finite-difference machinery for the gradient tests.

The training loss here is the real one: photometric term on the rendered
color plus weighted cross-entropy on the blended semantic features, evaluated
through the tiled rasterizer. Cutoff thresholds are zeroed so the loss is
smooth at the evaluation point (the skip and termination tests are step
functions of the parameters).
"""

import numpy as np

from semsplat.backward import backward_render
from semsplat.losses import photometric_loss, semantic_loss
from semsplat.render import RenderSettings, render

SMOOTH = RenderSettings(alpha_skip=0.0, transmittance_min=0.0)

SEMANTIC_WEIGHT = 0.5
GAUSSIAN_GROUPS = ("means", "quats", "log_scales", "opacity_logits",
                   "sh_coeffs", "semantic_codes")
HEAD_GROUPS = ("head_matrix", "head_bias")


def full_loss(scene, camera, target, labels, dssim_weight=0.2):
    out = render(scene, camera, SMOOTH)
    photo, _ = photometric_loss(out.color, target, dssim_weight)
    sem, _, _, _ = semantic_loss(out.features, labels, scene.head)
    return photo + SEMANTIC_WEIGHT * sem


def analytic_gradients(scene, camera, target, labels, dssim_weight=0.2):
    out = render(scene, camera, SMOOTH)
    _, g_color = photometric_loss(out.color, target, dssim_weight)
    _, g_feat, g_mat, g_bias = semantic_loss(out.features, labels, scene.head)
    grads = backward_render(scene, camera, g_color,
                            SEMANTIC_WEIGHT * g_feat, SMOOTH)
    grads.head_matrix += SEMANTIC_WEIGHT * g_mat
    grads.head_bias += SEMANTIC_WEIGHT * g_bias
    return grads


def _param_array(scene, group):
    if group == "head_matrix":
        return scene.head.matrix
    if group == "head_bias":
        return scene.head.bias
    return getattr(scene.gaussians, group)


def gradient_errors(scene, camera, target, labels, rng, *,
                    samples_per_group=40, h=1e-5):
    """Central-difference relative errors per parameter group.

    Returns {group: array of per-coordinate relative errors}. Coordinates
    where both the analytic and numeric derivative are below 1e-12 count as
    exact matches.
    """
    grads = analytic_gradients(scene, camera, target, labels)
    results = {}
    for group in GAUSSIAN_GROUPS + HEAD_GROUPS:
        param = _param_array(scene, group)
        analytic = getattr(grads, group).reshape(-1)
        flat = param.reshape(-1)
        count = min(samples_per_group, flat.size)
        idx = rng.choice(flat.size, size=count, replace=False)
        errs = np.empty(count)
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            plus = full_loss(scene, camera, target, labels)
            flat[i] = orig - h
            minus = full_loss(scene, camera, target, labels)
            flat[i] = orig
            fd = (plus - minus) / (2.0 * h)
            denom = max(abs(analytic[i]), abs(fd))
            errs[j] = 0.0 if denom < 1e-12 else abs(analytic[i] - fd) / denom
        results[group] = errs
    return results
