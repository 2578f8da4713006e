"""EWA projection of 3-d Gaussians to screen-space 2-d Gaussians."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import Camera, build_covariances

# Screen-space blur added to every projected covariance (px^2). Guarantees a
# positive-definite 2-d covariance and acts as a small anti-aliasing filter.
BLUR_PX2 = 0.3

# Gaussians whose unblurred 3-sigma footprint is below this radius are culled.
MIN_FOOTPRINT_PX = 0.3

# Half-extent multiplier for the conservative screen-space bounding box: at
# 3.4 sigma the Gaussian falls below the 1/255 alpha cutoff for any opacity,
# so truncating outside the box cannot change a rendered pixel.
RECT_SIGMA = 3.4


@dataclass
class Projection:
    """Per-Gaussian screen-space quantities; rows where ``valid`` is False are zeroed."""

    valid: np.ndarray    # (N,)  bool
    mean2d: np.ndarray   # (N, 2) pixel coords
    cov2d: np.ndarray    # (N, 2, 2) blurred screen covariance
    conic: np.ndarray    # (N, 2, 2) inverse of cov2d
    depth: np.ndarray    # (N,)  camera-space z
    radius: np.ndarray   # (N,)  RECT_SIGMA * sqrt(max eigenvalue)
    t_cam: np.ndarray    # (N, 3) camera-space centers
    jacobian: np.ndarray  # (N, 2, 3) perspective Jacobian at t_cam
    rotation: np.ndarray  # (3, 3) world-to-camera rotation used


def eigvals_2x2(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(min, max) eigenvalues of symmetric 2x2 matrices, batched."""
    a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
    mid = 0.5 * (a + c)
    # clip guards tiny negative values from rounding
    root = np.sqrt(np.maximum(0.25 * (a - c) ** 2 + b ** 2, 0.0))
    return mid - root, mid + root


def invert_2x2(cov: np.ndarray) -> np.ndarray:
    a, b, c = cov[..., 0, 0], cov[..., 0, 1], cov[..., 1, 1]
    det = a * c - b * b
    inv = np.empty_like(cov)
    inv[..., 0, 0] = c
    inv[..., 0, 1] = -b
    inv[..., 1, 0] = -b
    inv[..., 1, 1] = a
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = inv / det[..., None, None]
    return inv


def project_gaussians(means: np.ndarray, quats: np.ndarray, log_scales: np.ndarray,
                      camera: Camera, *, blur: float = BLUR_PX2) -> Projection:
    """Project world-space Gaussians through ``camera``.

    Culls Gaussians behind the near plane, past the far plane, or whose
    unblurred footprint is under MIN_FOOTPRINT_PX.
    """
    dtype = means.dtype
    n = means.shape[0]
    rot = camera.rotation.astype(dtype)
    trans = camera.translation.astype(dtype)

    t = means @ rot.T + trans
    x, y, z = t[..., 0], t[..., 1], t[..., 2]
    valid = (z > camera.near) & (z < camera.far)

    zs = np.where(valid, z, 1.0)  # placeholder to keep divisions finite
    inv_z = 1.0 / zs
    mean2d = np.stack([camera.fx * x * inv_z + camera.cx,
                       camera.fy * y * inv_z + camera.cy], axis=-1)

    jac = np.zeros((n, 2, 3), dtype=dtype)
    jac[:, 0, 0] = camera.fx * inv_z
    jac[:, 0, 2] = -camera.fx * x * inv_z ** 2
    jac[:, 1, 1] = camera.fy * inv_z
    jac[:, 1, 2] = -camera.fy * y * inv_z ** 2

    cov3d = build_covariances(quats, log_scales)
    m = jac @ rot[None]
    cov2d_raw = m @ cov3d @ np.swapaxes(m, -1, -2)

    _, lam_max_raw = eigvals_2x2(cov2d_raw)
    valid &= 3.0 * np.sqrt(np.maximum(lam_max_raw, 0.0)) >= MIN_FOOTPRINT_PX

    cov2d = cov2d_raw.copy()
    cov2d[..., 0, 0] += blur
    cov2d[..., 1, 1] += blur
    _, lam_max = eigvals_2x2(cov2d)
    radius = RECT_SIGMA * np.sqrt(np.maximum(lam_max, 0.0))
    conic = invert_2x2(cov2d)

    # zero out culled rows so downstream code never sees garbage
    mask = valid.astype(dtype)
    mean2d *= mask[:, None]
    cov2d *= mask[:, None, None]
    conic = np.where(valid[:, None, None], conic, 0.0).astype(dtype)
    radius *= mask
    depth = z * mask

    return Projection(valid=valid, mean2d=mean2d, cov2d=cov2d, conic=conic,
                      depth=depth, radius=radius, t_cam=t, jacobian=jac, rotation=rot)
