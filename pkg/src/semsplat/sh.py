"""Real spherical harmonics up to degree 3, splatting sign convention."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError

SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
         -1.0925484305920792, 0.5462742152960396)
SH_C3 = (-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
         0.3731763325901154, -0.4570457994644658, 1.445305721320277,
         -0.5900435899266435)

MAX_DEGREE = 3


def num_coeffs(degree: int) -> int:
    if not 0 <= degree <= MAX_DEGREE:
        raise InvalidParameterError(f"sh degree must be in [0, {MAX_DEGREE}], got {degree}")
    return (degree + 1) ** 2


def sh_basis(dirs: np.ndarray, degree: int) -> np.ndarray:
    """Evaluate the basis at unit directions; (..., 3) -> (..., (degree+1)^2)."""
    k = num_coeffs(degree)
    dirs = np.asarray(dirs)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    out = np.empty(dirs.shape[:-1] + (k,), dtype=dirs.dtype)
    out[..., 0] = SH_C0
    if degree >= 1:
        out[..., 1] = -SH_C1 * y
        out[..., 2] = SH_C1 * z
        out[..., 3] = -SH_C1 * x
    if degree >= 2:
        xx, yy, zz = x * x, y * y, z * z
        out[..., 4] = SH_C2[0] * x * y
        out[..., 5] = SH_C2[1] * y * z
        out[..., 6] = SH_C2[2] * (2.0 * zz - xx - yy)
        out[..., 7] = SH_C2[3] * x * z
        out[..., 8] = SH_C2[4] * (xx - yy)
    if degree >= 3:
        out[..., 9] = SH_C3[0] * y * (3.0 * xx - yy)
        out[..., 10] = SH_C3[1] * x * y * z
        out[..., 11] = SH_C3[2] * y * (4.0 * zz - xx - yy)
        out[..., 12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy)
        out[..., 13] = SH_C3[4] * x * (4.0 * zz - xx - yy)
        out[..., 14] = SH_C3[5] * z * (xx - yy)
        out[..., 15] = SH_C3[6] * x * (xx - 3.0 * yy)
    return out


def sh_basis_jacobian(dirs: np.ndarray, degree: int) -> np.ndarray:
    """d(basis)/d(direction); (..., 3) -> (..., (degree+1)^2, 3)."""
    k = num_coeffs(degree)
    dirs = np.asarray(dirs)
    x, y, z = dirs[..., 0], dirs[..., 1], dirs[..., 2]
    zero = np.zeros_like(x)
    jac = np.zeros(dirs.shape[:-1] + (k, 3), dtype=dirs.dtype)
    if degree >= 1:
        jac[..., 1, 1] = -SH_C1
        jac[..., 2, 2] = SH_C1
        jac[..., 3, 0] = -SH_C1
    if degree >= 2:
        jac[..., 4, 0] = SH_C2[0] * y
        jac[..., 4, 1] = SH_C2[0] * x
        jac[..., 5, 1] = SH_C2[1] * z
        jac[..., 5, 2] = SH_C2[1] * y
        jac[..., 6, 0] = SH_C2[2] * (-2.0 * x)
        jac[..., 6, 1] = SH_C2[2] * (-2.0 * y)
        jac[..., 6, 2] = SH_C2[2] * (4.0 * z)
        jac[..., 7, 0] = SH_C2[3] * z
        jac[..., 7, 2] = SH_C2[3] * x
        jac[..., 8, 0] = SH_C2[4] * (2.0 * x)
        jac[..., 8, 1] = SH_C2[4] * (-2.0 * y)
    if degree >= 3:
        xx, yy, zz = x * x, y * y, z * z
        jac[..., 9, 0] = SH_C3[0] * (6.0 * x * y)
        jac[..., 9, 1] = SH_C3[0] * (3.0 * xx - 3.0 * yy)
        jac[..., 9, 2] = zero
        jac[..., 10, 0] = SH_C3[1] * (y * z)
        jac[..., 10, 1] = SH_C3[1] * (x * z)
        jac[..., 10, 2] = SH_C3[1] * (x * y)
        jac[..., 11, 0] = SH_C3[2] * (-2.0 * x * y)
        jac[..., 11, 1] = SH_C3[2] * (4.0 * zz - xx - 3.0 * yy)
        jac[..., 11, 2] = SH_C3[2] * (8.0 * y * z)
        jac[..., 12, 0] = SH_C3[3] * (-6.0 * x * z)
        jac[..., 12, 1] = SH_C3[3] * (-6.0 * y * z)
        jac[..., 12, 2] = SH_C3[3] * (6.0 * zz - 3.0 * xx - 3.0 * yy)
        jac[..., 13, 0] = SH_C3[4] * (4.0 * zz - 3.0 * xx - yy)
        jac[..., 13, 1] = SH_C3[4] * (-2.0 * x * y)
        jac[..., 13, 2] = SH_C3[4] * (8.0 * x * z)
        jac[..., 14, 0] = SH_C3[5] * (2.0 * x * z)
        jac[..., 14, 1] = SH_C3[5] * (-2.0 * y * z)
        jac[..., 14, 2] = SH_C3[5] * (xx - yy)
        jac[..., 15, 0] = SH_C3[6] * (3.0 * xx - 3.0 * yy)
        jac[..., 15, 1] = SH_C3[6] * (-6.0 * x * y)
        jac[..., 15, 2] = zero
    return jac


def sh_to_color(sh_coeffs: np.ndarray, dirs: np.ndarray, degree: int) -> np.ndarray:
    """RGB from SH coefficients and unit view directions, clamped to [0, 1].

    sh_coeffs (..., 3, K) with K >= (degree+1)^2 (extra coefficients ignored),
    dirs (..., 3). The DC-only convention adds 0.5 before clamping.
    """
    k = num_coeffs(degree)
    sh_coeffs = np.asarray(sh_coeffs)
    if sh_coeffs.shape[-1] < k:
        raise InvalidParameterError(
            f"need {k} sh coefficients for degree {degree}, got {sh_coeffs.shape[-1]}")
    basis = sh_basis(dirs, degree)
    raw = np.einsum("...ck,...k->...c", sh_coeffs[..., :k], basis) + 0.5
    return np.clip(raw, 0.0, 1.0)
