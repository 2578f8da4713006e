"""Synthetic scenes and datasets for tests, benchmarks and the golden fixture.

The training fixture is fully self-labeling: ground-truth label maps are
derived from the true scene's own blending weights (per-class accumulated
weight vs final transmittance), so segmentation targets are exactly
consistent with what the rasterizer can represent.
"""

from __future__ import annotations

import numpy as np

from .render import RenderSettings, render
from .scene import (Camera, EmbeddingTable, GaussianSoA, Scene,
                    SemanticDictionary, SemanticHead, look_at_camera,
                    quat_normalize)
from .semantics import CANONICAL_NEGATIVES
from .sh import SH_C0, num_coeffs

FIXTURE_ENTRIES = ["coffee machine", "kettle", "apple"]
FIXTURE_CLASS_COLORS = np.array([
    [0.75, 0.25, 0.20],   # coffee machine: red-ish
    [0.20, 0.45, 0.80],   # kettle: blue-ish
    [0.25, 0.70, 0.30],   # apple: green-ish
])
FIXTURE_CLASS_CENTERS = np.array([
    [-0.85, 0.05, 0.0],
    [0.85, 0.25, 0.1],
    [0.0, -0.70, 0.25],
])
FIXTURE_CLASS_SIZES = (7, 7, 6)


def _logit(p):
    return np.log(p / (1.0 - p))


def random_scene(rng: np.random.Generator, num_gaussians: int = 50,
                 sh_degree: int = 1, width: int = 32, height: int = 32,
                 dtype=np.float32, embedding_dim: int = 8,
                 background=None) -> tuple[Scene, Camera]:
    """A random test scene with every Gaussian comfortably inside the frustum."""
    fx = fy = 1.1 * width
    camera = Camera(fx=fx, fy=fy, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
                    width=width, height=height, world_to_camera=np.eye(4),
                    near=0.1, far=100.0)
    z = rng.uniform(2.0, 6.0, num_gaussians)
    px = rng.uniform(2.0, width - 3.0, num_gaussians)
    py = rng.uniform(2.0, height - 3.0, num_gaussians)
    means = np.stack([(px - camera.cx) * z / fx, (py - camera.cy) * z / fy, z], axis=1)

    quats = quat_normalize(rng.standard_normal((num_gaussians, 4)))
    log_scales = np.log(rng.uniform(0.05, 0.4, (num_gaussians, 3)))
    opacity_logits = _logit(rng.uniform(0.05, 0.95, num_gaussians))
    k = num_coeffs(sh_degree)
    sh = np.zeros((num_gaussians, 3, k))
    sh[:, :, 0] = (rng.uniform(0.1, 0.9, (num_gaussians, 3)) - 0.5) / SH_C0
    if k > 1:
        sh[:, :, 1:] = rng.normal(0.0, 0.05, (num_gaussians, 3, k - 1))
    codes = rng.normal(0.0, 1.0, (num_gaussians, 3))

    gaussians = GaussianSoA(
        means=means.astype(dtype), quats=quats.astype(dtype),
        log_scales=log_scales.astype(dtype),
        opacity_logits=opacity_logits.astype(dtype),
        sh_coeffs=sh.astype(dtype), semantic_codes=codes.astype(dtype))

    table, _, _ = make_embedding_fixture(embedding_dim)
    if background is None:
        background = rng.uniform(0.0, 1.0, 3)
    scene = Scene(gaussians=gaussians,
                  head=SemanticHead.zeros(len(FIXTURE_ENTRIES), dtype),
                  dictionary=SemanticDictionary(FIXTURE_ENTRIES),
                  embeddings=table, sh_degree=sh_degree,
                  background_color=background)
    return scene, camera


def make_embedding_fixture(dim: int = 8):
    """Deterministic unit embeddings where prompt "coffee" lands nearest the
    entry "coffee machine" and "tea" has no entry of its own but is still
    closer to "coffee machine" than to any canonical negative.

    Returns (EmbeddingTable, query_lookup, entries).
    """
    if dim < 8:
        raise ValueError("fixture needs at least 8 dimensions")
    eye = np.eye(dim, dtype=np.float64)
    entries = list(FIXTURE_ENTRIES)
    entry_vectors = eye[:3].copy()
    negative_vectors = eye[4:8].copy()
    lookup = {
        "coffee": 0.8 * eye[0] + 0.6 * eye[3],
        "tea": 0.6 * eye[0] + 0.8 * eye[3],
        "kettle": eye[1].copy(),
        "apple": eye[2].copy(),
    }
    table = EmbeddingTable(entry_vectors=entry_vectors.astype(np.float32),
                           negative_vectors=negative_vectors.astype(np.float32),
                           negative_phrases=list(CANONICAL_NEGATIVES))
    return table, lookup, entries


def fixture_cameras(num_views: int = 10, size: int = 64) -> list[Camera]:
    """Inward-facing arc of cameras around the fixture objects."""
    cams = []
    for az in np.linspace(-0.9, 0.9, num_views):
        eye = np.array([4.6 * np.sin(az), -1.2, -4.6 * np.cos(az)])
        cams.append(look_at_camera(
            eye, target=(0.0, 0.0, 0.0), fx=1.15 * size, fy=1.15 * size,
            cx=(size - 1) / 2.0, cy=(size - 1) / 2.0, width=size, height=size,
            up=(0.0, -1.0, 0.0), near=0.5, far=50.0))
    return cams


def make_true_scene(seed: int = 7, dtype=np.float32) -> tuple[Scene, np.ndarray]:
    """The generating scene for the training fixture.

    Returns (scene, class_of_gaussian) where classes are dictionary indices
    (1-based; 0 never occurs here).
    """
    rng = np.random.default_rng(seed)
    means, classes = [], []
    for ci, (center, count) in enumerate(zip(FIXTURE_CLASS_CENTERS, FIXTURE_CLASS_SIZES)):
        means.append(center + rng.normal(0.0, 0.32, (count, 3)))
        classes.extend([ci + 1] * count)
    means = np.concatenate(means)
    classes = np.asarray(classes)
    n = len(classes)

    quats = quat_normalize(rng.standard_normal((n, 4)))
    log_scales = np.log(rng.uniform(0.15, 0.35, (n, 3)))
    opacity_logits = _logit(rng.uniform(0.65, 0.95, n))
    sh = np.zeros((n, 3, 1))
    base = FIXTURE_CLASS_COLORS[classes - 1]
    rgb = np.clip(base + rng.normal(0.0, 0.05, (n, 3)), 0.12, 0.88)
    sh[:, :, 0] = (rgb - 0.5) / SH_C0

    codes = np.zeros((n, 3))
    codes[np.arange(n), classes - 1] = 2.0
    # Ideal head: class c reads channel c, the undetected bias sets the
    # coverage margin (a pixel is labeled once a class holds > 50% of the
    # blend weight: 4 * (2 * w) > 4).
    head = SemanticHead(np.vstack([np.zeros(3), 4.0 * np.eye(3)]).astype(dtype),
                        np.array([4.0, 0.0, 0.0, 0.0], dtype))

    table, _, entries = make_embedding_fixture()
    gaussians = GaussianSoA(
        means=means.astype(dtype), quats=quats.astype(dtype),
        log_scales=log_scales.astype(dtype),
        opacity_logits=opacity_logits.astype(dtype),
        sh_coeffs=sh.astype(dtype), semantic_codes=codes.astype(dtype))
    scene = Scene(gaussians=gaussians, head=head,
                  dictionary=SemanticDictionary(entries), embeddings=table,
                  sh_degree=0, background_color=np.array([0.05, 0.05, 0.08]))
    return scene, classes


def ground_truth_label_map(true_scene: Scene, camera: Camera,
                           settings: RenderSettings | None = None) -> np.ndarray:
    """Pixel labels of the true scene under its ideal head.

    Empty pixels blend to a zero feature and fall to the undetected class
    through the head's bias margin, so the maps are exactly reproducible by
    a trained scene.
    """
    from .semantics import predict_label_map

    return predict_label_map(true_scene, camera, settings or RenderSettings())


class FixtureDataset:
    """In-memory dataset with the same attribute surface as TrainingDataset."""

    def __init__(self, cameras, images, label_maps, dictionary, embeddings):
        self.cameras = cameras
        self.images = images
        self.label_maps = label_maps
        self.dictionary = dictionary
        self.embeddings = embeddings

    def __len__(self):
        return len(self.cameras)


def make_training_fixture(seed: int = 7, num_views: int = 10, size: int = 64,
                          noise: float = 0.1):
    """The synthetic single-phase training benchmark.

    Returns (dataset, init_scene, true_scene, classes). The initial scene is
    the true geometry/appearance under parameter noise, with semantic codes
    and head reduced to uninformative noise so semantics must be learned
    jointly from scratch.
    """
    true_scene, classes = make_true_scene(seed)
    cameras = fixture_cameras(num_views, size)
    settings = RenderSettings()
    images = [render(true_scene, cam, settings).color for cam in cameras]
    labels = [ground_truth_label_map(true_scene, cam, settings)
              for cam in cameras]

    rng = np.random.default_rng(seed + 1)
    g = true_scene.gaussians.copy()
    n = len(g)
    g.means = (g.means + rng.normal(0.0, noise, (n, 3))).astype(g.dtype)
    g.log_scales = (g.log_scales + rng.normal(0.0, 0.08, (n, 3))).astype(g.dtype)
    g.quats = quat_normalize(g.quats + rng.normal(0.0, 0.05, (n, 4))).astype(g.dtype)
    g.opacity_logits = (g.opacity_logits + rng.normal(0.0, 0.2, n)).astype(g.dtype)
    g.sh_coeffs = (g.sh_coeffs + rng.normal(0.0, 0.15, g.sh_coeffs.shape)).astype(g.dtype)
    # uninformative but symmetry-breaking: zero codes with a zero head is a
    # cross-entropy saddle where neither receives gradient
    g.semantic_codes = (0.1 * rng.standard_normal(g.semantic_codes.shape)).astype(g.dtype)

    init_scene = Scene(gaussians=g,
                       head=SemanticHead(
                           (0.1 * rng.standard_normal((4, 3))).astype(g.dtype),
                           np.zeros(4, g.dtype)),
                       dictionary=SemanticDictionary(list(true_scene.dictionary.entries)),
                       embeddings=true_scene.embeddings.copy(), sh_degree=0,
                       background_color=true_scene.background_color.copy())
    dataset = FixtureDataset(cameras, images, labels, init_scene.dictionary,
                             init_scene.embeddings)
    return dataset, init_scene, true_scene, classes
