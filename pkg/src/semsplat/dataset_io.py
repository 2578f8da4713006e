"""On-disk formats: datasets, checkpoints, embedding tables, query lookups.

Binary layouts are little-endian and length-checked; every validation failure
raises a named error carrying the file path and byte offset or key. See
docs/formats.md for byte-level documentation with hex dumps.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (BadMagicError, DimensionMismatchError, FormatError,
                     LabelOutOfRangeError, MissingFileError, TruncatedFileError,
                     UnsupportedVersionError)
from .scene import (Camera, EmbeddingTable, GaussianSoA, Scene,
                    SemanticDictionary, SemanticHead)

CHECKPOINT_MAGIC = b"SEMSPLAT1"
CHECKPOINT_VERSION = 1
EMBEDDINGS_MAGIC = b"SEMEMB01"
QUERY_LOOKUP_MAGIC = b"SEMQRY01"
MANIFEST_VERSION = 1


# ---------------------------------------------------------------------------
# low-level binary helpers
# ---------------------------------------------------------------------------

class _Reader:
    """Byte cursor that raises truncation errors with path and offset."""

    def __init__(self, data: bytes, path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedFileError(
                f"needed {n} bytes, file ends after {len(self.data) - self.pos}",
                path=self.path, offset=self.pos)
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        n = self.u32()
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise FormatError("invalid utf-8 in string field", path=self.path,
                              offset=self.pos) from e

    def f32_array(self, shape) -> np.ndarray:
        count = int(np.prod(shape, dtype=np.int64))
        raw = self.take(count * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(shape).copy()


def _write_string(chunks: list[bytes], s: str) -> None:
    b = s.encode("utf-8")
    chunks.append(struct.pack("<I", len(b)))
    chunks.append(b)


def _check_footer(reader: _Reader) -> None:
    declared = reader.u64()
    if declared != len(reader.data):
        raise TruncatedFileError(
            f"length footer says {declared} bytes, file has {len(reader.data)}",
            path=reader.path, offset=reader.pos - 8)
    if reader.pos != len(reader.data):
        raise FormatError(f"{len(reader.data) - reader.pos} trailing bytes after footer",
                          path=reader.path, offset=reader.pos)


def _with_footer(chunks: list[bytes]) -> bytes:
    body = b"".join(chunks)
    return body + struct.pack("<Q", len(body) + 8)


def _atomic_write(path, data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# checkpoint
# ---------------------------------------------------------------------------

def checkpoint_to_bytes(scene: Scene) -> bytes:
    """Serialize a scene; arrays are cast to little-endian float32."""
    g = scene.gaussians
    header = {
        "num_gaussians": len(g),
        "sh_degree": scene.sh_degree,
        "dictionary": list(scene.dictionary.entries),
        "negative_phrases": list(scene.embeddings.negative_phrases),
        "embedding_dim": scene.embeddings.dim,
        "background_color": [float(v) for v in scene.background_color],
    }
    hjson = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [CHECKPOINT_MAGIC, struct.pack("<II", CHECKPOINT_VERSION, len(hjson)), hjson]
    arrays = [g.means, g.quats, g.log_scales, g.opacity_logits, g.sh_coeffs,
              g.semantic_codes, scene.embeddings.entry_vectors,
              scene.embeddings.negative_vectors, scene.head.matrix, scene.head.bias]
    for arr in arrays:
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return _with_footer(chunks)


def checkpoint_from_bytes(data: bytes, path="<bytes>") -> Scene:
    r = _Reader(data, path)
    magic = r.take(len(CHECKPOINT_MAGIC))
    if magic != CHECKPOINT_MAGIC:
        raise BadMagicError(f"magic {magic!r} != {CHECKPOINT_MAGIC!r}", path=path, offset=0)
    version = r.u32()
    if version != CHECKPOINT_VERSION:
        raise UnsupportedVersionError(f"checkpoint version {version} unsupported",
                                      path=path, offset=len(CHECKPOINT_MAGIC))
    hlen = r.u32()
    hstart = r.pos
    try:
        header = json.loads(r.take(hlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"header is not valid JSON: {e}", path=path, offset=hstart) from e
    try:
        n = int(header["num_gaussians"])
        sh_degree = int(header["sh_degree"])
        entries = list(header["dictionary"])
        negatives = list(header["negative_phrases"])
        dim = int(header["embedding_dim"])
        background = np.asarray(header["background_color"], dtype=np.float64)
    except KeyError as e:
        raise FormatError(f"header missing key {e}", path=path, offset=hstart, key=str(e)) from e
    if n < 0 or not 0 <= sh_degree <= 3:
        raise FormatError(f"bad counts in header: n={n} sh_degree={sh_degree}",
                          path=path, offset=hstart)
    k = (sh_degree + 1) ** 2
    ne = len(entries)

    gaussians = GaussianSoA(
        means=r.f32_array((n, 3)), quats=r.f32_array((n, 4)),
        log_scales=r.f32_array((n, 3)), opacity_logits=r.f32_array((n,)),
        sh_coeffs=r.f32_array((n, 3, k)), semantic_codes=r.f32_array((n, 3)))
    table = EmbeddingTable(entry_vectors=r.f32_array((ne, dim)),
                           negative_vectors=r.f32_array((len(negatives), dim)),
                           negative_phrases=negatives)
    head = SemanticHead(matrix=r.f32_array((ne + 1, 3)), bias=r.f32_array((ne + 1,)))
    _check_footer(r)

    scene = Scene(gaussians=gaussians, head=head,
                  dictionary=SemanticDictionary(entries), embeddings=table,
                  sh_degree=sh_degree, background_color=background)
    scene.validate()
    return scene


def save_checkpoint(scene: Scene, path) -> None:
    """Atomic write (temp file + rename) so readers never see a torn file."""
    _atomic_write(path, checkpoint_to_bytes(scene))


def load_checkpoint(path) -> Scene:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"checkpoint not found", path=str(path))
    return checkpoint_from_bytes(path.read_bytes(), str(path))


# ---------------------------------------------------------------------------
# embedding tables and query lookups
# ---------------------------------------------------------------------------

def save_embeddings(table: EmbeddingTable, entry_phrases: list[str], path) -> None:
    if len(entry_phrases) != table.entry_vectors.shape[0]:
        raise DimensionMismatchError(
            f"{len(entry_phrases)} phrases for {table.entry_vectors.shape[0]} vectors",
            path=str(path))
    chunks = [EMBEDDINGS_MAGIC,
              struct.pack("<III", table.dim, len(entry_phrases),
                          len(table.negative_phrases))]
    for p in entry_phrases:
        _write_string(chunks, p)
    for p in table.negative_phrases:
        _write_string(chunks, p)
    chunks.append(np.ascontiguousarray(table.entry_vectors, dtype="<f4").tobytes())
    chunks.append(np.ascontiguousarray(table.negative_vectors, dtype="<f4").tobytes())
    _atomic_write(path, _with_footer(chunks))


def load_embeddings(path) -> tuple[EmbeddingTable, list[str]]:
    """Returns (table, entry_phrases); phrase order defines dictionary order."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("embeddings file not found", path=str(path))
    r = _Reader(path.read_bytes(), str(path))
    magic = r.take(len(EMBEDDINGS_MAGIC))
    if magic != EMBEDDINGS_MAGIC:
        raise BadMagicError(f"magic {magic!r} != {EMBEDDINGS_MAGIC!r}",
                            path=str(path), offset=0)
    dim, n_entries, n_neg = r.u32(), r.u32(), r.u32()
    entry_phrases = [r.string() for _ in range(n_entries)]
    negative_phrases = [r.string() for _ in range(n_neg)]
    entry_vectors = r.f32_array((n_entries, dim))
    negative_vectors = r.f32_array((n_neg, dim))
    _check_footer(r)
    table = EmbeddingTable(entry_vectors=entry_vectors,
                           negative_vectors=negative_vectors,
                           negative_phrases=negative_phrases)
    return table, entry_phrases


def save_query_lookup(lookup: dict[str, np.ndarray], path) -> None:
    prompts = list(lookup.keys())
    vectors = np.stack([np.asarray(lookup[p], dtype=np.float32) for p in prompts]) \
        if prompts else np.zeros((0, 0), np.float32)
    dim = vectors.shape[1] if prompts else 0
    chunks = [QUERY_LOOKUP_MAGIC, struct.pack("<II", dim, len(prompts))]
    for p in prompts:
        _write_string(chunks, p)
    chunks.append(np.ascontiguousarray(vectors, dtype="<f4").tobytes())
    _atomic_write(path, _with_footer(chunks))


def load_query_embeddings(path) -> dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("query lookup file not found", path=str(path))
    r = _Reader(path.read_bytes(), str(path))
    magic = r.take(len(QUERY_LOOKUP_MAGIC))
    if magic != QUERY_LOOKUP_MAGIC:
        raise BadMagicError(f"magic {magic!r} != {QUERY_LOOKUP_MAGIC!r}",
                            path=str(path), offset=0)
    dim, count = r.u32(), r.u32()
    prompts = [r.string() for _ in range(count)]
    vectors = r.f32_array((count, dim))
    _check_footer(r)
    return {p: vectors[i] for i, p in enumerate(prompts)}


# ---------------------------------------------------------------------------
# images and label maps
# ---------------------------------------------------------------------------

def encode_image_png(img: np.ndarray) -> bytes:
    """Float [0,1] (H, W, 3) to deterministic 8-bit PNG bytes."""
    import io
    arr = np.clip(np.asarray(img), 0.0, 1.0)
    u8 = np.round(arr * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(u8, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_image(img: np.ndarray, path) -> None:
    _atomic_write(path, encode_image_png(img))


def load_image(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("image not found", path=str(path))
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def save_label_map(labels: np.ndarray, path) -> None:
    """16-bit single-channel PNG; value 0 means undetected."""
    import io
    labels = np.asarray(labels)
    if labels.min() < 0 or labels.max() > 65535:
        raise LabelOutOfRangeError("labels must fit in uint16", path=str(path))
    buf = io.BytesIO()
    Image.fromarray(labels.astype(np.uint16)).save(buf, format="PNG")
    _atomic_write(path, buf.getvalue())


def load_label_map(path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("label map not found", path=str(path))
    with Image.open(path) as im:
        if im.mode not in ("I;16", "I", "L"):
            raise FormatError(f"label map must be single-channel, got mode {im.mode}",
                              path=str(path))
        arr = np.asarray(im)
    return arr.astype(np.int32)


# ---------------------------------------------------------------------------
# dictionary files and dataset manifests
# ---------------------------------------------------------------------------

def save_dictionary(dictionary: SemanticDictionary, path) -> None:
    data = {"version": 1, "entries": list(dictionary.entries)}
    _atomic_write(path, json.dumps(data, indent=2).encode("utf-8"))


def load_dictionary(path) -> SemanticDictionary:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("dictionary file not found", path=str(path))
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"dictionary is not valid JSON: {e}", path=str(path)) from e
    if "entries" not in data:
        raise FormatError("dictionary missing 'entries'", path=str(path), key="entries")
    return SemanticDictionary(list(data["entries"]))


@dataclass
class TrainingDataset:
    """Fully loaded, validated training data."""

    cameras: list[Camera]
    images: list[np.ndarray]      # float32 (H, W, 3) in [0, 1]
    label_maps: list[np.ndarray]  # int32 (H, W), 0 = undetected
    dictionary: SemanticDictionary
    embeddings: EmbeddingTable
    root: Path

    def __len__(self) -> int:
        return len(self.cameras)


def save_manifest(frames: list[dict], dictionary_path: str, embeddings_path: str,
                  path) -> None:
    data = {"version": MANIFEST_VERSION, "dictionary_path": dictionary_path,
            "embeddings_path": embeddings_path, "frames": frames}
    _atomic_write(path, json.dumps(data, indent=2).encode("utf-8"))


_FRAME_KEYS = ("image_path", "label_map_path", "camera_to_world", "fx", "fy",
               "cx", "cy", "width", "height")


def load_dataset(path) -> TrainingDataset:
    """Load and validate a dataset directory (or explicit manifest path)."""
    path = Path(path)
    manifest_path = path / "manifest.json" if path.is_dir() else path
    if not manifest_path.is_file():
        raise MissingFileError("manifest not found", path=str(manifest_path))
    root = manifest_path.parent
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"manifest is not valid JSON: {e}", path=str(manifest_path)) from e

    version = manifest.get("version")
    if version != MANIFEST_VERSION:
        raise UnsupportedVersionError(f"manifest version {version!r} unsupported",
                                      path=str(manifest_path), key="version")
    for key in ("dictionary_path", "embeddings_path", "frames"):
        if key not in manifest:
            raise FormatError(f"manifest missing {key!r}", path=str(manifest_path), key=key)

    dictionary = load_dictionary(root / manifest["dictionary_path"])
    embeddings, phrases = load_embeddings(root / manifest["embeddings_path"])
    if phrases != dictionary.entries:
        raise DimensionMismatchError(
            f"embedding phrases {phrases} do not match dictionary {dictionary.entries}",
            path=str(root / manifest["embeddings_path"]))
    embeddings.validate(dictionary)

    cameras, images, label_maps = [], [], []
    for i, frame in enumerate(manifest["frames"]):
        fkey = f"frames[{i}]"
        for key in _FRAME_KEYS:
            if key not in frame:
                raise FormatError(f"{fkey} missing {key!r}", path=str(manifest_path),
                                  key=f"{fkey}.{key}")
        c2w = np.asarray(frame["camera_to_world"], dtype=np.float64)
        if c2w.shape != (4, 4):
            raise FormatError(f"{fkey}: camera_to_world must be 4x4",
                              path=str(manifest_path), key=f"{fkey}.camera_to_world")
        try:
            camera = Camera.from_camera_to_world(
                c2w, fx=float(frame["fx"]), fy=float(frame["fy"]),
                cx=float(frame["cx"]), cy=float(frame["cy"]),
                width=int(frame["width"]), height=int(frame["height"]))
        except Exception as e:
            raise FormatError(f"{fkey}: bad camera: {e}", path=str(manifest_path),
                              key=fkey) from e

        img = load_image(root / frame["image_path"])
        if img.shape != (camera.height, camera.width, 3):
            raise DimensionMismatchError(
                f"{fkey}: image is {img.shape[1]}x{img.shape[0]}, manifest says "
                f"{camera.width}x{camera.height}", path=str(root / frame["image_path"]))
        labels = load_label_map(root / frame["label_map_path"])
        if labels.shape != (camera.height, camera.width):
            raise DimensionMismatchError(
                f"{fkey}: label map is {labels.shape[1]}x{labels.shape[0]}, manifest "
                f"says {camera.width}x{camera.height}",
                path=str(root / frame["label_map_path"]))
        if labels.max() > len(dictionary):
            raise LabelOutOfRangeError(
                f"{fkey}: label {labels.max()} exceeds dictionary size {len(dictionary)}",
                path=str(root / frame["label_map_path"]), key=fkey)
        cameras.append(camera)
        images.append(img)
        label_maps.append(labels)

    return TrainingDataset(cameras=cameras, images=images, label_maps=label_maps,
                           dictionary=dictionary, embeddings=embeddings, root=root)


# ---------------------------------------------------------------------------
# train/loss config files and metrics logs
# ---------------------------------------------------------------------------

def load_config(path):
    """JSON config file to (TrainConfig, LossConfig); unknown keys are errors."""
    from .errors import ConfigurationError
    from .training import LossConfig, TrainConfig

    path = Path(path)
    if not path.is_file():
        raise MissingFileError("config file not found", path=str(path))
    try:
        data = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"config is not valid JSON: {e}", path=str(path)) from e

    def build(cls, section):
        fields = {f for f in cls.__dataclass_fields__ if f != "render"}
        unknown = set(section) - fields
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        return cls(**section)

    train_cfg = build(TrainConfig, data.get("train", {}))
    loss_cfg = build(LossConfig, data.get("loss", {}))
    train_cfg.validate()
    loss_cfg.validate()
    return train_cfg, loss_cfg


def write_metrics_log(entries: list[dict], path) -> None:
    lines = "".join(json.dumps(e, sort_keys=True) + "\n" for e in entries)
    _atomic_write(path, lines.encode("utf-8"))


def read_metrics_log(path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("metrics log not found", path=str(path))
    return [json.loads(line) for line in path.read_text("utf-8").splitlines() if line]
