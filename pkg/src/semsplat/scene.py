"""Scene representation: Gaussians, cameras, class dictionary, embeddings, semantic head.

All Gaussian attributes are stored structure-of-arrays so optimizer steps,
densification and (de)serialization are plain array ops. Parameters live in
unconstrained form (log-scales, opacity logits); activations are applied at
render time.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, InvalidParameterError
from .validation import as_array, check_finite, check_unit_norm

UNDETECTED_LABEL = "undetected"


# ---------------------------------------------------------------------------
# quaternion / covariance helpers
# ---------------------------------------------------------------------------

def quat_normalize(q: np.ndarray) -> np.ndarray:
    """Normalize quaternions (wxyz) along the last axis."""
    q = np.asarray(q)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product a*b for wxyz quaternions (broadcasts)."""
    aw, ax, ay, az = np.moveaxis(np.asarray(a), -1, 0)
    bw, bx, by, bz = np.moveaxis(np.asarray(b), -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def rotation_from_quat(q: np.ndarray) -> np.ndarray:
    """Rotation matrices from wxyz quaternions; input is normalized first.

    Accepts (..., 4) and returns (..., 3, 3).
    """
    q = quat_normalize(q)
    w, x, y, z = np.moveaxis(q, -1, 0)
    r = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return r.reshape(q.shape[:-1] + (3, 3))


def build_covariances(quats: np.ndarray, log_scales: np.ndarray) -> np.ndarray:
    """Batched R diag(exp(2*log_scale)) R^T; no precondition checks (internal)."""
    rot = rotation_from_quat(quats)
    m = rot * np.exp(np.asarray(log_scales))[..., None, :]
    return m @ np.swapaxes(m, -1, -2)


def covariance_of(q, log_scale) -> np.ndarray:
    """World-space covariance of one Gaussian from its quaternion and log-scales.

    Requires a unit quaternion (within 1e-4) and finite inputs.
    """
    q = as_array(q, "q", shape=(4,), dtype=np.float64)
    log_scale = as_array(log_scale, "log_scale", shape=(3,), dtype=np.float64)
    check_finite(q, "q")
    check_finite(log_scale, "log_scale")
    check_unit_norm(q, "q", atol=1e-4)
    return build_covariances(q, log_scale)


# ---------------------------------------------------------------------------
# Gaussians
# ---------------------------------------------------------------------------

@dataclass
class GaussianSoA:
    """Structure-of-arrays of Gaussian parameters.

    means           (N, 3) world-space centers
    quats           (N, 4) wxyz rotations, kept unit-norm between steps
    log_scales      (N, 3) log of per-axis scale
    opacity_logits  (N,)   opacity = sigmoid(logit)
    sh_coeffs       (N, 3, K) RGB spherical-harmonics coefficients, K=(degree+1)^2
    semantic_codes  (N, 3) per-Gaussian class code blended by the rasterizer
    """

    means: np.ndarray
    quats: np.ndarray
    log_scales: np.ndarray
    opacity_logits: np.ndarray
    sh_coeffs: np.ndarray
    semantic_codes: np.ndarray

    FIELDS = ("means", "quats", "log_scales", "opacity_logits", "sh_coeffs",
              "semantic_codes")

    def __post_init__(self):
        for name in self.FIELDS:
            setattr(self, name, np.asarray(getattr(self, name)))

    def __len__(self) -> int:
        return self.means.shape[0]

    @property
    def dtype(self):
        return self.means.dtype

    @property
    def sh_degree(self) -> int:
        return int(round(np.sqrt(self.sh_coeffs.shape[2]))) - 1

    def validate(self) -> None:
        n = len(self)
        expect = {
            "means": (n, 3), "quats": (n, 4), "log_scales": (n, 3),
            "opacity_logits": (n,), "semantic_codes": (n, 3),
        }
        for name, shape in expect.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise InvalidParameterError(f"gaussians.{name}: shape {arr.shape} != {shape}")
        if self.sh_coeffs.ndim != 3 or self.sh_coeffs.shape[:2] != (n, 3):
            raise InvalidParameterError(f"gaussians.sh_coeffs: bad shape {self.sh_coeffs.shape}")
        k = self.sh_coeffs.shape[2]
        deg = int(round(np.sqrt(k))) - 1
        if (deg + 1) ** 2 != k or not 0 <= deg <= 3:
            raise InvalidParameterError(f"gaussians.sh_coeffs: {k} coefficients is not a degree 0..3 basis")
        for name in self.FIELDS:
            check_finite(getattr(self, name), f"gaussians.{name}")
        norms = np.linalg.norm(self.quats, axis=-1)
        if n and np.any(np.abs(norms - 1.0) > 1e-4):
            raise InvalidParameterError("gaussians.quats drifted from unit norm")

    def copy(self) -> "GaussianSoA":
        return GaussianSoA(**{f: getattr(self, f).copy() for f in self.FIELDS})

    def astype(self, dtype) -> "GaussianSoA":
        return GaussianSoA(**{f: getattr(self, f).astype(dtype) for f in self.FIELDS})

    def select(self, index) -> "GaussianSoA":
        """Row subset (mask or integer index array)."""
        return GaussianSoA(**{f: getattr(self, f)[index] for f in self.FIELDS})

    @staticmethod
    def concatenate(parts: list["GaussianSoA"]) -> "GaussianSoA":
        return GaussianSoA(**{
            f: np.concatenate([getattr(p, f) for p in parts], axis=0)
            for f in GaussianSoA.FIELDS})

    @staticmethod
    def empty(sh_degree: int = 3, dtype=np.float32) -> "GaussianSoA":
        k = (sh_degree + 1) ** 2
        return GaussianSoA(
            means=np.zeros((0, 3), dtype), quats=np.zeros((0, 4), dtype),
            log_scales=np.zeros((0, 3), dtype), opacity_logits=np.zeros((0,), dtype),
            sh_coeffs=np.zeros((0, 3, k), dtype), semantic_codes=np.zeros((0, 3), dtype))

    def opacities(self) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.opacity_logits))


# ---------------------------------------------------------------------------
# Camera
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Camera:
    """Pinhole camera, OpenCV axes (x right, y down, z forward).

    ``world_to_camera`` is a 4x4 rigid transform; pixel centers sit at integer
    coordinates, so a world point projects to (fx*x/z + cx, fy*y/z + cy).
    """

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    world_to_camera: np.ndarray
    near: float = 0.01
    far: float = 1000.0

    def __post_init__(self):
        object.__setattr__(self, "world_to_camera",
                           as_array(self.world_to_camera, "world_to_camera", shape=(4, 4),
                                    dtype=np.float64))
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidParameterError("camera focal lengths must be positive")
        if not (0 < self.near < self.far):
            raise InvalidParameterError("camera must satisfy 0 < near < far")
        r = self.rotation
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise InvalidParameterError("world_to_camera rotation block is not orthonormal")

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_camera[:3, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_camera[:3, 3]

    @property
    def position(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation

    @classmethod
    def from_camera_to_world(cls, c2w, **kwargs) -> "Camera":
        c2w = as_array(c2w, "camera_to_world", shape=(4, 4), dtype=np.float64)
        w2c = np.eye(4)
        r = c2w[:3, :3]
        w2c[:3, :3] = r.T
        w2c[:3, 3] = -r.T @ c2w[:3, 3]
        return cls(world_to_camera=w2c, **kwargs)

    def camera_to_world(self) -> np.ndarray:
        c2w = np.eye(4)
        r = self.rotation
        c2w[:3, :3] = r.T
        c2w[:3, 3] = self.position
        return c2w


def look_at_camera(eye, target, *, fx: float, fy: float, cx: float, cy: float,
                   width: int, height: int, up=(0.0, 1.0, 0.0), near: float = 0.01,
                   far: float = 1000.0) -> Camera:
    """Camera at ``eye`` with +z toward ``target`` (OpenCV convention)."""
    eye = np.asarray(eye, dtype=np.float64)
    fwd = np.asarray(target, dtype=np.float64) - eye
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    nr = np.linalg.norm(right)
    if nr < 1e-8:
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        nr = np.linalg.norm(right)
    right /= nr
    down = np.cross(fwd, right)
    down /= np.linalg.norm(down)
    w2c = np.eye(4)
    w2c[:3, :3] = np.stack([right, down, fwd])
    w2c[:3, 3] = -w2c[:3, :3] @ eye
    return Camera(fx=fx, fy=fy, cx=cx, cy=cy, width=width, height=height,
                  world_to_camera=w2c, near=near, far=far)


# ---------------------------------------------------------------------------
# Dictionary / embeddings / head
# ---------------------------------------------------------------------------

class SemanticDictionary:
    """Ordered set of class labels; index 0 is reserved for "undetected".

    Detected labels occupy indices 1..N in insertion order.
    """

    def __init__(self, entries: list[str]):
        entries = list(entries)
        if len(entries) < 1:
            raise InvalidParameterError("dictionary needs at least one entry")
        if len(set(entries)) != len(entries):
            raise InvalidParameterError("dictionary labels must be unique")
        if UNDETECTED_LABEL in entries:
            raise InvalidParameterError(f"label {UNDETECTED_LABEL!r} is reserved for index 0")
        self.entries = entries
        self._index = {label: i + 1 for i, label in enumerate(entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, label: str) -> bool:
        return label in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, SemanticDictionary) and self.entries == other.entries

    def lookup(self, label: str) -> int:
        if label == UNDETECTED_LABEL:
            return 0
        try:
            return self._index[label]
        except KeyError:
            raise InvalidParameterError(f"unknown label {label!r}") from None

    def label_of(self, index: int) -> str:
        if index == 0:
            return UNDETECTED_LABEL
        if not 1 <= index <= len(self.entries):
            raise InvalidParameterError(f"class index {index} out of range [0, {len(self.entries)}]")
        return self.entries[index - 1]


@dataclass
class EmbeddingTable:
    """Unit-norm text embeddings for dictionary entries plus canonical negatives."""

    entry_vectors: np.ndarray      # (N, dim)
    negative_vectors: np.ndarray   # (M, dim)
    negative_phrases: list[str]

    def __post_init__(self):
        self.entry_vectors = np.asarray(self.entry_vectors, dtype=np.float32)
        self.negative_vectors = np.asarray(self.negative_vectors, dtype=np.float32)
        self.negative_phrases = list(self.negative_phrases)

    @property
    def dim(self) -> int:
        return self.entry_vectors.shape[1]

    def validate(self, dictionary: SemanticDictionary | None = None) -> None:
        if self.negative_vectors.shape[0] < 1:
            raise InvalidParameterError("embedding table needs at least one negative")
        if self.negative_vectors.shape[0] != len(self.negative_phrases):
            raise InvalidParameterError("negative phrase/vector counts differ")
        if self.negative_vectors.shape[1] != self.dim:
            raise InvalidParameterError("negative vectors have wrong dimension")
        check_unit_norm(self.entry_vectors, "entry_vectors", atol=1e-5)
        check_unit_norm(self.negative_vectors, "negative_vectors", atol=1e-5)
        if dictionary is not None and self.entry_vectors.shape[0] != len(dictionary):
            raise ConfigurationError(
                f"embedding rows ({self.entry_vectors.shape[0]}) != dictionary size ({len(dictionary)})")

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.entry_vectors.copy(), self.negative_vectors.copy(),
                              list(self.negative_phrases))


@dataclass
class SemanticHead:
    """Affine map from blended 3-d codes to class logits (undetected + N entries)."""

    matrix: np.ndarray  # (N+1, 3)
    bias: np.ndarray    # (N+1,)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix)
        self.bias = np.asarray(self.bias)

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[0]

    @staticmethod
    def zeros(num_entries: int, dtype=np.float32) -> "SemanticHead":
        return SemanticHead(np.zeros((num_entries + 1, 3), dtype),
                            np.zeros((num_entries + 1,), dtype))

    def validate(self, dictionary: SemanticDictionary | None = None) -> None:
        if self.matrix.ndim != 2 or self.matrix.shape[1] != 3:
            raise InvalidParameterError(f"head matrix has bad shape {self.matrix.shape}")
        if self.bias.shape != (self.matrix.shape[0],):
            raise InvalidParameterError("head bias length != number of classes")
        check_finite(self.matrix, "head.matrix")
        check_finite(self.bias, "head.bias")
        if dictionary is not None and self.num_classes != len(dictionary) + 1:
            raise ConfigurationError(
                f"head classes ({self.num_classes}) != dictionary size + 1 ({len(dictionary) + 1})")

    def logits(self, features: np.ndarray) -> np.ndarray:
        """(..., 3) features -> (..., N+1) logits."""
        return np.asarray(features) @ self.matrix.T + self.bias

    def copy(self) -> "SemanticHead":
        return SemanticHead(self.matrix.copy(), self.bias.copy())


# ---------------------------------------------------------------------------
# Scene
# ---------------------------------------------------------------------------

@dataclass
class Scene:
    """A trainable semantic splat scene.

    Reads are thread-safe; mutation (training step, edit) requires exclusive
    access. ``background_color`` composites behind remaining transmittance.
    """

    gaussians: GaussianSoA
    head: SemanticHead
    dictionary: SemanticDictionary
    embeddings: EmbeddingTable
    sh_degree: int = 3
    background_color: np.ndarray = field(default_factory=lambda: np.zeros(3, dtype=np.float32))

    def __post_init__(self):
        self.background_color = np.asarray(self.background_color, dtype=np.float64)

    @property
    def dtype(self):
        return self.gaussians.dtype

    def validate(self) -> None:
        self.gaussians.validate()
        self.head.validate(self.dictionary)
        self.embeddings.validate(self.dictionary)
        if self.gaussians.sh_degree != self.sh_degree:
            raise ConfigurationError(
                f"sh_coeffs sized for degree {self.gaussians.sh_degree}, scene says {self.sh_degree}")
        if self.background_color.shape != (3,):
            raise InvalidParameterError("background_color must be a 3-vector")
        if np.any(self.background_color < 0) or np.any(self.background_color > 1):
            raise InvalidParameterError("background_color components must lie in [0, 1]")

    def copy(self) -> "Scene":
        return Scene(gaussians=self.gaussians.copy(), head=self.head.copy(),
                     dictionary=SemanticDictionary(list(self.dictionary.entries)),
                     embeddings=self.embeddings.copy(), sh_degree=self.sh_degree,
                     background_color=self.background_color.copy())

    def astype(self, dtype) -> "Scene":
        out = self.copy()
        out.gaussians = out.gaussians.astype(dtype)
        out.head = SemanticHead(out.head.matrix.astype(dtype), out.head.bias.astype(dtype))
        return out
