"""Training losses with analytic gradients.

Photometric: (1 - w) * L1 + w * (1 - SSIM) / 2 against the target image.
Semantic: per-pixel weighted cross-entropy of head(blended features) against
a label map, with the undetected class (index 0) down-weighted.

Every loss returns its value together with the gradient with respect to the
rendered input so the rasterizer backward pass can consume it directly.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .errors import InvalidParameterError, LabelOutOfRangeError
from .scene import SemanticHead
from .validation import as_array, check_same_shape

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2

DSSIM_WEIGHT = 0.2
WEIGHT_UNDETECTED = 0.1
WEIGHT_LABELED = 1.0


def _ssim_kernel(dtype) -> np.ndarray:
    half = (SSIM_WINDOW - 1) / 2.0
    x = np.arange(SSIM_WINDOW, dtype=np.float64) - half
    w = np.exp(-0.5 * (x / SSIM_SIGMA) ** 2)
    return (w / w.sum()).astype(dtype)


def _window_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable windowed mean, valid region only. img is (H, W) or (H, W, C)."""
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    m = (SSIM_WINDOW - 1) // 2
    return out[m:-m, m:-m]


def _window_spread(grad: np.ndarray, kernel: np.ndarray, shape) -> np.ndarray:
    """Adjoint of :func:`_window_mean`: spread valid-region gradients back.

    The kernel is symmetric, so the adjoint of crop-after-correlate is
    zero-embed followed by the same separable correlation.
    """
    m = (SSIM_WINDOW - 1) // 2
    out = np.zeros(shape, grad.dtype)
    out[m:-m, m:-m] = grad
    out = correlate1d(out, kernel, axis=0, mode="constant")
    return correlate1d(out, kernel, axis=1, mode="constant")


def ssim(img: np.ndarray, target: np.ndarray, *, with_grad: bool = True):
    """Mean SSIM over valid 11x11 windows and channels, optionally with the
    gradient with respect to ``img``. Inputs are (H, W, C) in [0, 1]."""
    img = np.asarray(img)
    target = np.asarray(target)
    check_same_shape(img, target, "img", "target")
    if img.shape[0] < SSIM_WINDOW or img.shape[1] < SSIM_WINDOW:
        raise InvalidParameterError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for ssim")
    kernel = _ssim_kernel(img.dtype)

    mu_x = _window_mean(img, kernel)
    mu_y = _window_mean(target, kernel)
    e_xx = _window_mean(img * img, kernel)
    e_yy = _window_mean(target * target, kernel)
    e_xy = _window_mean(img * target, kernel)
    var_x = e_xx - mu_x * mu_x
    var_y = e_yy - mu_y * mu_y
    cov = e_xy - mu_x * mu_y

    a1 = 2.0 * mu_x * mu_y + SSIM_C1
    a2 = 2.0 * cov + SSIM_C2
    b1 = mu_x * mu_x + mu_y * mu_y + SSIM_C1
    b2 = var_x + var_y + SSIM_C2
    smap = (a1 * a2) / (b1 * b2)
    value = float(smap.mean())
    if not with_grad:
        return value, None

    npix = smap.size
    d = b1 * b2
    p_mu = 2.0 * mu_y * a2 / d - 2.0 * mu_x * smap / b1
    p_var = -smap / b2          # d(smap)/d(e_xx)
    p_cov = 2.0 * a1 / d        # d(smap)/d(e_xy)
    # fold the mu_x dependence of var_x and cov into the mu term
    g_mu = p_mu - 2.0 * p_var * mu_x - p_cov * mu_y
    grad = (_window_spread(g_mu, kernel, img.shape)
            + 2.0 * img * _window_spread(p_var, kernel, img.shape)
            + target * _window_spread(p_cov, kernel, img.shape)) / npix
    return value, grad


def l1_loss(img: np.ndarray, target: np.ndarray):
    """Mean absolute error and its gradient with respect to ``img``."""
    img = np.asarray(img)
    target = np.asarray(target)
    check_same_shape(img, target, "img", "target")
    diff = img - target
    value = float(np.abs(diff).mean())
    grad = np.sign(diff) / diff.size
    return value, grad.astype(img.dtype)


def photometric_loss(img: np.ndarray, target: np.ndarray,
                     dssim_weight: float = DSSIM_WEIGHT):
    """(1 - w) * L1 + w * (1 - SSIM) / 2 with gradient for ``img``."""
    if not 0.0 <= dssim_weight <= 1.0:
        raise InvalidParameterError("dssim_weight must lie in [0, 1]")
    l1, g_l1 = l1_loss(img, target)
    if dssim_weight == 0.0:
        return l1, g_l1
    s, g_s = ssim(img, target)
    value = (1.0 - dssim_weight) * l1 + dssim_weight * (1.0 - s) / 2.0
    grad = (1.0 - dssim_weight) * g_l1 - (dssim_weight / 2.0) * g_s
    return value, grad


def semantic_loss(features: np.ndarray, labels: np.ndarray, head: SemanticHead, *,
                  weight_undetected: float = WEIGHT_UNDETECTED,
                  weight_labeled: float = WEIGHT_LABELED):
    """Weighted cross-entropy of head logits against a per-pixel label map.

    ``features`` is the rendered (H, W, 3) semantic image, ``labels`` an
    (H, W) integer map with 0 meaning undetected. The mean is taken over all
    pixels; the undetected class only has its per-pixel weight reduced.

    Returns (value, grad_features, grad_matrix, grad_bias).
    """
    features = np.asarray(features)
    labels = as_array(labels, "labels", shape=features.shape[:2])
    if not np.issubdtype(labels.dtype, np.integer):
        raise InvalidParameterError("labels must be an integer array")
    c = head.num_classes
    if labels.min() < 0 or labels.max() >= c:
        raise LabelOutOfRangeError(
            f"labels must lie in [0, {c - 1}], got [{labels.min()}, {labels.max()}]")

    flat = features.reshape(-1, 3)
    y = labels.reshape(-1)
    logits = head.logits(flat)                      # (P, C)
    logits = logits - logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    denom = expl.sum(axis=1)
    log_p = logits - np.log(denom)[:, None]

    w = np.where(y == 0, weight_undetected, weight_labeled).astype(features.dtype)
    npix = y.size
    value = float(-(w * log_p[np.arange(npix), y]).sum() / npix)

    g_logits = expl / denom[:, None]                # softmax
    g_logits[np.arange(npix), y] -= 1.0
    g_logits *= (w / npix)[:, None]

    grad_features = (g_logits @ head.matrix).reshape(features.shape)
    grad_matrix = g_logits.T @ flat
    grad_bias = g_logits.sum(axis=0)
    return value, grad_features.astype(features.dtype), grad_matrix, grad_bias
