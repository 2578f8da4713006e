#!/usr/bin/env python3
"""Regenerate the committed golden test data under tests/data/.

Run from the repository root:

    python3 scripts/make_fixtures.py

Outputs are deterministic; re-running on the same code must produce
byte-identical files (PNG encoding included). The test suite treats these
as read-only ground truth, so regenerate only when the fixture definition
itself changes, and commit the result.
"""

from pathlib import Path

import numpy as np

from semsplat.dataset_io import (save_checkpoint, save_dictionary,
                                 save_embeddings, save_image, save_label_map,
                                 save_manifest, save_query_lookup)
from semsplat.scene import GaussianSoA, Scene, SemanticDictionary, SemanticHead
from semsplat.sh import SH_C0
from semsplat.synthetic import (FIXTURE_CLASS_COLORS, make_embedding_fixture,
                                make_training_fixture)

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "tests" / "data"


def write_golden_dataset() -> None:
    out = DATA / "golden_dataset"
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)

    dataset, _, true_scene, _ = make_training_fixture(seed=7, num_views=10,
                                                      size=64)
    save_dictionary(true_scene.dictionary, out / "dictionary.json")
    save_embeddings(true_scene.embeddings, true_scene.dictionary.entries,
                    out / "embeddings.bin")

    frames = []
    for i, camera in enumerate(dataset.cameras):
        image_rel = f"images/frame_{i:03d}.png"
        label_rel = f"labels/frame_{i:03d}.png"
        save_image(dataset.images[i], out / image_rel)
        save_label_map(dataset.label_maps[i], out / label_rel)
        frames.append({
            "image_path": image_rel,
            "label_map_path": label_rel,
            "camera_to_world": camera.camera_to_world().tolist(),
            "fx": camera.fx, "fy": camera.fy,
            "cx": camera.cx, "cy": camera.cy,
            "width": camera.width, "height": camera.height,
        })
    save_manifest(frames, "dictionary.json", "embeddings.bin",
                  out / "manifest.json")
    print(f"wrote dataset with {len(frames)} frames to {out}")


def write_golden_scene() -> None:
    _, _, true_scene, _ = make_training_fixture(seed=7, num_views=1, size=16)
    save_checkpoint(true_scene, DATA / "golden_scene.ckpt")
    print(f"wrote {DATA / 'golden_scene.ckpt'}")


def write_query_lookup() -> None:
    _, lookup, _ = make_embedding_fixture()
    save_query_lookup(lookup, DATA / "query_lookup.bin")
    print(f"wrote {DATA / 'query_lookup.bin'} with prompts {sorted(lookup)}")


def write_viewer_scene(seed: int = 13, dtype=np.float32) -> None:
    """Scene for the viewer's edit-diff test.

    Clusters are compact and far apart so no pixel mixes two classes, and
    the undetected bias is set so any pixel a class touches visibly is
    labeled: labeled when 8 * class_weight > bias0, while 8-bit render
    quantization only shows a recolor where class_weight * delta exceeds
    1.5/255. With bias0 = 8/512 every quantization-visible change therefore
    falls inside the label mask, from every dataset camera.
    """
    rng = np.random.default_rng(seed)
    centers = np.array([[-1.1, 0.1, 0.0], [1.1, 0.3, 0.05], [0.0, -0.95, 0.2]])
    sizes = (7, 7, 6)
    means, classes = [], []
    for center, count in zip(centers, sizes):
        means.append(center + rng.normal(0.0, 0.12, (count, 3)))
        classes.extend([len(means)] * count)
    means = np.concatenate(means)
    classes = np.asarray(classes)
    n = len(classes)

    quats = np.zeros((n, 4))
    quats[:, 0] = 1.0
    log_scales = np.log(rng.uniform(0.06, 0.10, (n, 3)))
    p = rng.uniform(0.90, 0.97, n)
    opacity_logits = np.log(p / (1.0 - p))
    sh = np.zeros((n, 3, 1))
    rgb = np.clip(FIXTURE_CLASS_COLORS[classes - 1] + rng.normal(0.0, 0.04, (n, 3)),
                  0.12, 0.88)
    sh[:, :, 0] = (rgb - 0.5) / SH_C0
    codes = np.zeros((n, 3))
    codes[np.arange(n), classes - 1] = 2.0

    head = SemanticHead(np.vstack([np.zeros(3), 4.0 * np.eye(3)]).astype(dtype),
                        np.array([8.0 / 512.0, 0.0, 0.0, 0.0], dtype))
    table, _, entries = make_embedding_fixture()
    gaussians = GaussianSoA(
        means=means.astype(dtype), quats=quats.astype(dtype),
        log_scales=log_scales.astype(dtype),
        opacity_logits=opacity_logits.astype(dtype),
        sh_coeffs=sh.astype(dtype), semantic_codes=codes.astype(dtype))
    scene = Scene(gaussians=gaussians, head=head,
                  dictionary=SemanticDictionary(entries), embeddings=table,
                  sh_degree=0, background_color=np.array([0.05, 0.05, 0.08]))
    save_checkpoint(scene, DATA / "viewer_scene.ckpt")
    print(f"wrote {DATA / 'viewer_scene.ckpt'}")


if __name__ == "__main__":
    DATA.mkdir(parents=True, exist_ok=True)
    write_golden_dataset()
    write_golden_scene()
    write_query_lookup()
    write_viewer_scene()
