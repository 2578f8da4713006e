"""Analytic gradients of the tiled renderer.

Given upstream gradients on the rendered color and feature images, produces
gradients for every Gaussian parameter by replaying the forward compositing
per tile and chaining through projection, spherical harmonics and the
covariance factorization. Depth and alpha outputs carry no gradient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .render import Prepared, RenderSettings, bin_gaussians, blend_forward, prepare_render
from .scene import Camera, Scene, quat_normalize, rotation_from_quat
from .sh import num_coeffs, sh_basis_jacobian
from .validation import check_same_shape


@dataclass
class GradientBuffer:
    """Per-parameter gradients: GaussianSoA layout plus the semantic head and
    the raw screen-space positional gradient used for densification."""

    means: np.ndarray
    quats: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    semantic_codes: np.ndarray
    head_matrix: np.ndarray
    head_bias: np.ndarray
    mean2d: np.ndarray  # (N, 2) d(loss)/d(projected center), summed over pixels

    @staticmethod
    def zeros_like(scene: Scene) -> "GradientBuffer":
        g = scene.gaussians
        return GradientBuffer(
            means=np.zeros_like(g.means), quats=np.zeros_like(g.quats),
            log_scales=np.zeros_like(g.log_scales),
            opacity_logits=np.zeros_like(g.opacity_logits),
            sh_coeffs=np.zeros_like(g.sh_coeffs),
            semantic_codes=np.zeros_like(g.semantic_codes),
            head_matrix=np.zeros_like(scene.head.matrix),
            head_bias=np.zeros_like(scene.head.bias),
            mean2d=np.zeros((len(g), 2), g.dtype))


def backward_render(scene: Scene, camera: Camera, g_color: np.ndarray,
                    g_features: np.ndarray, settings: RenderSettings | None = None,
                    prep: Prepared | None = None) -> GradientBuffer:
    """Backpropagate image-space gradients to Gaussian parameters.

    ``g_color`` and ``g_features`` are (H, W, 3) gradients of the loss with
    respect to the rendered color and blended semantic feature images.
    """
    settings = settings or RenderSettings()
    if prep is None:
        prep = prepare_render(scene, camera)
    g_color = np.asarray(g_color)
    g_features = np.asarray(g_features)
    check_same_shape(g_color, g_features, "g_color", "g_features")

    grads = GradientBuffer.zeros_like(scene)
    gauss_all, tile_ids, starts = bin_gaussians(
        prep.projection, settings.tile_size, camera.width, camera.height)
    n = len(scene.gaussians)

    # per-Gaussian accumulators over all pixels
    g_op = np.zeros(n, scene.dtype)
    g_cov2d = np.zeros((n, 2, 2), scene.dtype)
    g_colors = np.zeros((n, 3), scene.dtype)

    if gauss_all.size:
        _accumulate_tiles(scene, camera, prep, settings, gauss_all, tile_ids, starts,
                          g_color, g_features, grads, g_op, g_cov2d, g_colors)

    _chain_projection(scene, camera, prep, grads, g_cov2d)
    _chain_color(scene, prep, grads, g_colors)

    op = prep.opacities
    grads.opacity_logits += g_op * op * (1.0 - op)
    return grads


def _accumulate_tiles(scene, camera, prep, settings, gauss_all, tile_ids, starts,
                      g_color, g_features, grads, g_op, g_cov2d, g_colors):
    proj = prep.projection
    dtype = scene.dtype
    ts = settings.tile_size
    h, w = camera.height, camera.width
    tiles_x = (w + ts - 1) // ts
    base = np.arange(ts, dtype=dtype)
    bg = scene.background_color.astype(dtype)
    semantic = scene.gaussians.semantic_codes
    conic, mean2d = proj.conic, proj.mean2d

    for k in range(len(tile_ids)):
        g = gauss_all[starts[k]:starts[k + 1]]
        ty, tx = divmod(int(tile_ids[k]), tiles_x)
        y0, x0 = ty * ts, tx * ts
        th, tw = min(ts, h - y0), min(ts, w - x0)
        px = (x0 + base[:tw])[None, :].repeat(th, axis=0).ravel()
        py = (y0 + base[:th])[:, None].repeat(tw, axis=1).ravel()

        dx = px[None, :] - mean2d[g, 0, None]
        dy = py[None, :] - mean2d[g, 1, None]
        a = conic[g, 0, 0, None]
        b = conic[g, 0, 1, None]
        c = conic[g, 1, 1, None]
        sigma = 0.5 * (a * dx * dx + c * dy * dy) + b * dx * dy
        alpha_raw = prep.opacities[g, None] * np.exp(-sigma)
        state = blend_forward(alpha_raw, settings)

        sl = (slice(y0, y0 + th), slice(x0, x0 + tw))
        gc = g_color[sl].reshape(-1, 3).astype(dtype)   # (P, 3)
        gf = g_features[sl].reshape(-1, 3).astype(dtype)

        # d(loss)/d(weight) per (Gaussian, pixel)
        u = prep.colors[g] @ gc.T + semantic[g] @ gf.T
        contrib = u * state.weights
        v = gc @ bg  # d(loss)/d(t_final) per pixel
        total = contrib.sum(axis=0) + v * state.t_final
        suffix = total - np.cumsum(contrib, axis=0)
        passes = state.keep & state.active & (alpha_raw < settings.alpha_max)
        g_alpha = (u * state.t_prefix - suffix / (1.0 - state.alpha)) * passes

        g_sigma = -alpha_raw * g_alpha
        ux = a * dx + b * dy
        uy = b * dx + c * dy

        grads.mean2d[g, 0] += (-g_sigma * ux).sum(axis=1)
        grads.mean2d[g, 1] += (-g_sigma * uy).sum(axis=1)
        half = -0.5 * g_sigma
        g_cov2d[g, 0, 0] += (half * ux * ux).sum(axis=1)
        g_cov2d[g, 1, 1] += (half * uy * uy).sum(axis=1)
        cross = (half * ux * uy).sum(axis=1)
        g_cov2d[g, 0, 1] += cross
        g_cov2d[g, 1, 0] += cross

        g_op[g] += (g_alpha * alpha_raw).sum(axis=1) / prep.opacities[g]
        g_colors[g] += state.weights @ gc
        grads.semantic_codes[g] += state.weights @ gf


def _chain_projection(scene, camera, prep, grads, g_cov2d):
    """Screen-space center and covariance gradients back to 3-d parameters."""
    proj = prep.projection
    g = scene.gaussians
    dtype = scene.dtype
    rot = proj.rotation                    # (3, 3) world-to-camera
    jac = proj.jacobian                    # (N, 2, 3)
    t = proj.t_cam
    valid = proj.valid.astype(dtype)

    # center path: mean2d = perspective(t), t = rot @ mu + trans
    g_t = np.einsum("nij,ni->nj", jac, grads.mean2d)

    # covariance path: cov2d = (J rot) cov3d (J rot)^T + blur I
    quats = quat_normalize(g.quats)
    r3 = rotation_from_quat(quats)
    s = np.exp(g.log_scales)
    nmat = r3 * s[:, None, :]                       # R diag(s)
    cov3d = nmat @ np.swapaxes(nmat, -1, -2)
    m = jac @ rot[None]                             # (N, 2, 3)

    g_sigma3 = np.swapaxes(m, -1, -2) @ g_cov2d @ m  # (N, 3, 3)

    cov_cam = rot[None] @ cov3d @ rot.T[None]
    g_jac = 2.0 * g_cov2d @ (jac @ cov_cam)          # (N, 2, 3)

    x, y, z = t[:, 0], t[:, 1], t[:, 2]
    zs = np.where(proj.valid, z, 1.0)
    inv_z2 = 1.0 / zs ** 2
    fx, fy = dtype.type(camera.fx), dtype.type(camera.fy)
    g_t[:, 0] += g_jac[:, 0, 2] * (-fx * inv_z2) * valid
    g_t[:, 1] += g_jac[:, 1, 2] * (-fy * inv_z2) * valid
    g_t[:, 2] += (g_jac[:, 0, 0] * (-fx * inv_z2)
                  + g_jac[:, 1, 1] * (-fy * inv_z2)
                  + g_jac[:, 0, 2] * (2.0 * fx * x * inv_z2 / zs)
                  + g_jac[:, 1, 2] * (2.0 * fy * y * inv_z2 / zs)) * valid

    grads.means += g_t @ rot

    # cov3d = N N^T with N = R diag(s)
    g_n = 2.0 * g_sigma3 @ nmat
    grads.log_scales += np.einsum("nrk,nrk->nk", r3, g_n) * s
    g_r = g_n * s[:, None, :]

    qw, qx, qy, qz = quats[:, 0], quats[:, 1], quats[:, 2], quats[:, 3]
    g_hat = np.stack([
        2 * (-qz * g_r[:, 0, 1] + qy * g_r[:, 0, 2] + qz * g_r[:, 1, 0]
             - qx * g_r[:, 1, 2] - qy * g_r[:, 2, 0] + qx * g_r[:, 2, 1]),
        2 * (qy * g_r[:, 0, 1] + qz * g_r[:, 0, 2] + qy * g_r[:, 1, 0]
             - 2 * qx * g_r[:, 1, 1] - qw * g_r[:, 1, 2] + qz * g_r[:, 2, 0]
             + qw * g_r[:, 2, 1] - 2 * qx * g_r[:, 2, 2]),
        2 * (-2 * qy * g_r[:, 0, 0] + qx * g_r[:, 0, 1] + qw * g_r[:, 0, 2]
             + qx * g_r[:, 1, 0] + qz * g_r[:, 1, 2] - qw * g_r[:, 2, 0]
             + qz * g_r[:, 2, 1] - 2 * qy * g_r[:, 2, 2]),
        2 * (-2 * qz * g_r[:, 0, 0] - qw * g_r[:, 0, 1] + qx * g_r[:, 0, 2]
             + qw * g_r[:, 1, 0] - 2 * qz * g_r[:, 1, 1] + qy * g_r[:, 1, 2]
             + qx * g_r[:, 2, 0] + qy * g_r[:, 2, 1]),
    ], axis=-1)
    # through normalization: q_hat = q / |q|
    norm = np.linalg.norm(g.quats, axis=-1, keepdims=True)
    grads.quats += (g_hat - quats * np.sum(quats * g_hat, axis=-1, keepdims=True)) / norm


def _chain_color(scene, prep, grads, g_colors):
    """Per-Gaussian RGB gradients back to SH coefficients and centers."""
    g = scene.gaussians
    k = num_coeffs(prep.sh_degree)
    g_raw = g_colors * prep.clamp_mask
    grads.sh_coeffs[:, :, :k] += np.einsum("nc,nk->nck", g_raw, prep.basis)
    if prep.sh_degree == 0:
        return
    g_basis = np.einsum("nc,nck->nk", g_raw, g.sh_coeffs[:, :, :k])
    jac = sh_basis_jacobian(prep.viewdirs, prep.sh_degree)
    g_dir = np.einsum("nk,nkj->nj", g_basis, jac)
    dist = prep.view_dist
    safe = np.where(dist > 0, dist, 1.0)[:, None]
    radial = np.sum(prep.viewdirs * g_dir, axis=-1, keepdims=True)
    grads.means += np.where(dist[:, None] > 0,
                            (g_dir - prep.viewdirs * radial) / safe, 0.0)
