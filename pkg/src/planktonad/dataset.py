"""Plankton anomaly dataset: annotation parsing, OK/NOK labelling, splits and
image preprocessing.

Annotations come in the three-label scheme used by the published dataset:

* ``Anomaly`` marks the parasite or another attached structure,
* ``<Species>_Anomaly`` marks a plankton cell with an attached anomaly,
* ``<Species>_Clean`` marks the plankton cell itself.

A sample is NOK as soon as one of the first two kinds is present.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import cv2
import numpy as np
from PIL import Image, UnidentifiedImageError
from skimage import color

from planktonad.errors import (
    AnnotationParseError,
    CapacityError,
    DomainError,
    ImageLoadError,
    SchemaError,
)

logger = logging.getLogger(__name__)

# OK / NOK sample counts of the published dataset.
SPECIES_COUNTS: dict[str, tuple[int, int]] = {
    "Aphanizomenon": (830, 140),
    "Centrales": (400, 57),
    "Dolichospermum": (515, 406),
    "Chaetocero": (606, 371),
    "Nodularia": (118, 357),
    "Pauliella": (160, 433),
    "Peridiniella Chain": (183, 31),
    "Peridiniella Single": (459, 63),
    "Skeletonem": (769, 419),
}
SPECIES = tuple(SPECIES_COUNTS)

# Majority width:height ratio per species (five at 1:4, three at 1:1, one at 1:2).
# Used when the ratio is not measured from the data with majority_aspect_ratio().
DEFAULT_ASPECT_RATIOS: dict[str, int] = {
    "Aphanizomenon": 4,
    "Nodularia": 4,
    "Skeletonem": 4,
    "Chaetocero": 4,
    "Pauliella": 4,
    "Centrales": 1,
    "Peridiniella Single": 1,
    "Dolichospermum": 1,
    "Peridiniella Chain": 2,
}
ALL_SPECIES_RATIO = 2
CANONICAL_SIZES: dict[int, tuple[int, int]] = {1: (128, 128), 2: (128, 256), 4: (128, 512)}

ALL = "all"
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp")


class BoxKind(str, enum.Enum):
    ANOMALY = "Anomaly"
    SPECIES_ANOMALY = "SpeciesAnomaly"
    SPECIES_CLEAN = "SpeciesClean"


class SampleLabel(str, enum.Enum):
    OK = "OK"
    NOK = "NOK"


@dataclass(frozen=True)
class BoundingBox:
    kind: BoxKind
    x: float
    y: float
    w: float
    h: float
    species: str = ""

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise DomainError(f"bounding box must have positive size, got w={self.w}, h={self.h}")
        if self.kind is BoxKind.ANOMALY and self.species:
            raise DomainError("an Anomaly box carries no species")

    @property
    def area(self) -> float:
        return self.w * self.h

    def clamp(self, width: int, height: int) -> BoundingBox | None:
        """Clip the box to the image; returns None when nothing is left."""
        x0, y0 = max(0.0, self.x), max(0.0, self.y)
        x1, y1 = min(float(width), self.x + self.w), min(float(height), self.y + self.h)
        if x1 <= x0 or y1 <= y0:
            return None
        return replace(self, x=x0, y=y0, w=x1 - x0, h=y1 - y0)

    def iou(self, other: BoundingBox) -> float:
        ix = max(0.0, min(self.x + self.w, other.x + other.w) - max(self.x, other.x))
        iy = max(0.0, min(self.y + self.h, other.y + other.h) - max(self.y, other.y))
        inter = ix * iy
        if inter == 0.0:
            return 0.0
        return inter / (self.area + other.area - inter)


@dataclass(frozen=True)
class AnnotatedImage:
    id: str
    pixels: np.ndarray
    species: str
    boxes: tuple[BoundingBox, ...] = ()

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=np.float32)
        if px.ndim == 2:
            px = px[:, :, None]
        if px.ndim != 3 or px.shape[2] not in (1, 3):
            raise DomainError(f"image {self.id}: expected HxW, HxWx1 or HxWx3 pixels, got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DomainError(f"image {self.id} is empty")
        px = px.copy()
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "boxes", tuple(self.boxes))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def label(self) -> SampleLabel:
        return derive_sample_label(self.boxes)


@dataclass
class DatasetSplit:
    train: list[str]
    validation: list[tuple[str, SampleLabel]]
    test: list[tuple[str, SampleLabel]]
    seed: int
    species_scope: str = ALL

    def to_json(self) -> dict:
        return {
            "species_scope": self.species_scope,
            "seed": self.seed,
            "train": list(self.train),
            "validation": [[i, lab.value] for i, lab in self.validation],
            "test": [[i, lab.value] for i, lab in self.test],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> DatasetSplit:
        try:
            return cls(
                train=[str(i) for i in doc["train"]],
                validation=[(str(i), SampleLabel(lab)) for i, lab in doc["validation"]],
                test=[(str(i), SampleLabel(lab)) for i, lab in doc["test"]],
                seed=int(doc["seed"]),
                species_scope=str(doc.get("species_scope", ALL)),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise AnnotationParseError(f"invalid split manifest: {exc}") from exc

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> DatasetSplit:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise AnnotationParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
        return cls.from_json(doc)


@dataclass(frozen=True)
class AugmentationPolicy:
    """Random photometric/geometric augmentation; jitter ranges follow the
    torchvision ``ColorJitter`` convention (factor drawn from [1-j, 1+j],
    hue shift from [-j, j])."""

    flip_h: float = 0.5
    flip_v: float = 0.5
    contrast: float = 0.2
    saturation: float = 0.2
    brightness: float = 0.2
    hue: float = 0.05
    invert: float = 0.1
    salt_pepper_fraction: float = 0.05
    seed: int = 0

    def __post_init__(self):
        for name in ("flip_h", "flip_v", "invert", "salt_pepper_fraction"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {v}")
        for name in ("contrast", "saturation", "brightness"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} jitter must be non-negative")
        if not 0.0 <= self.hue <= 0.5:
            raise DomainError(f"hue jitter must lie in [0, 0.5], got {self.hue}")

    @classmethod
    def identity(cls, seed: int = 0) -> AugmentationPolicy:
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, seed)


# --------------------------------------------------------------------------
# annotation parsing


def canonical_species(name: str) -> str:
    """Map label spellings like ``peridiniella_chain`` onto the dataset names."""
    cleaned = " ".join(name.replace("_", " ").split())
    for known in SPECIES:
        if known.lower() == cleaned.lower():
            return known
    return cleaned


def parse_label(name: str) -> tuple[BoxKind, str]:
    """Return (kind, species) for an annotation label string."""
    stripped = name.strip()
    if stripped.lower() == "anomaly":
        return BoxKind.ANOMALY, ""
    head, sep, tail = stripped.rpartition("_")
    if sep and head:
        if tail.lower() == "anomaly":
            return BoxKind.SPECIES_ANOMALY, canonical_species(head)
        if tail.lower() == "clean":
            return BoxKind.SPECIES_CLEAN, canonical_species(head)
    raise SchemaError(f"unknown annotation label {name!r}")


def load_pixels(path: Path, image_id: str) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode in ("L", "I;16", "I", "F"):
                arr = np.asarray(img, dtype=np.float64)
                scale = {"L": 255.0, "I;16": 65535.0}.get(img.mode, max(float(arr.max()), 1.0))
                arr = arr[:, :, None] / scale
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageLoadError(f"cannot load image for id {image_id!r} from {path}: {exc}") from exc
    return np.clip(arr, 0.0, 1.0).astype(np.float32)


def _image_species(boxes: Sequence[BoundingBox], fallback: str) -> str:
    counts = Counter(b.species for b in boxes if b.species)
    if counts:
        return counts.most_common(1)[0][0]
    return canonical_species(fallback) if fallback else ""


def _finish_boxes(raw: Iterable[BoundingBox], width: int, height: int, image_id: str) -> list[BoundingBox]:
    boxes = []
    for box in raw:
        clamped = box.clamp(width, height)
        if clamped is None:
            logger.warning("dropping box outside image %s: %s", image_id, box)
            continue
        boxes.append(clamped)
    return boxes


def _resolve_image(root: Path, file_name: str, image_id: str) -> Path:
    candidates = [root / file_name, root / "images" / file_name, root / Path(file_name).name,
                  root / "images" / Path(file_name).name]
    for cand in candidates:
        if cand.is_file():
            return cand
    raise ImageLoadError(f"image file for id {image_id!r} not found: {file_name} (searched under {root})")


def _parse_coco(path: Path, image_root: Path) -> list[AnnotatedImage]:
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise AnnotationParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        categories = {c["id"]: c["name"] for c in doc["categories"]}
        images = doc["images"]
        annotations = doc["annotations"]
    except (KeyError, TypeError) as exc:
        raise AnnotationParseError(f"{path}: missing COCO section {exc}") from exc

    by_image: dict[object, list[BoundingBox]] = defaultdict(list)
    for k, ann in enumerate(annotations):
        try:
            name = categories[ann["category_id"]]
            x, y, w, h = (float(v) for v in ann["bbox"])
            image_key = ann["image_id"]
        except (KeyError, TypeError, ValueError) as exc:
            raise AnnotationParseError(f"{path}: annotations[{k}] is malformed ({exc})") from exc
        kind, species = parse_label(name)
        try:
            by_image[image_key].append(BoundingBox(kind, x, y, w, h, species))
        except DomainError as exc:
            raise AnnotationParseError(f"{path}: annotations[{k}]: {exc}") from exc

    out = []
    for k, entry in enumerate(images):
        try:
            key, file_name = entry["id"], entry["file_name"]
        except (KeyError, TypeError) as exc:
            raise AnnotationParseError(f"{path}: images[{k}] is malformed ({exc})") from exc
        image_id = Path(file_name).stem
        pixels = load_pixels(_resolve_image(image_root, file_name, image_id), image_id)
        boxes = _finish_boxes(by_image.get(key, []), pixels.shape[1], pixels.shape[0], image_id)
        species = _image_species(boxes, Path(file_name).parent.name)
        out.append(AnnotatedImage(image_id, pixels, species, tuple(boxes)))
    return out


def _read_class_names(root: Path) -> list[str]:
    for name in ("classes.txt", "obj.names", "names.txt"):
        p = root / name
        if p.is_file():
            return [line.strip() for line in p.read_text(encoding="utf-8").splitlines() if line.strip()]
    for name in ("data.yaml", "dataset.yaml"):
        p = root / name
        if p.is_file():
            import yaml

            names = yaml.safe_load(p.read_text(encoding="utf-8")).get("names")
            if isinstance(names, dict):
                return [names[k] for k in sorted(names)]
            if isinstance(names, list):
                return [str(n) for n in names]
    raise AnnotationParseError(f"{root}: no class-name mapping file (classes.txt or data.yaml)")


def _parse_yolo(root: Path) -> list[AnnotatedImage]:
    names = _read_class_names(root)
    label_dir = root / "labels" if (root / "labels").is_dir() else root
    image_dir = root / "images" if (root / "images").is_dir() else root
    images = {p.stem: p for p in sorted(image_dir.rglob("*")) if p.suffix.lower() in IMAGE_SUFFIXES}
    out = []
    for txt in sorted(label_dir.rglob("*.txt")):
        if txt.parent == root and txt.name in ("classes.txt", "obj.names", "names.txt"):
            continue
        image_id = txt.stem
        if image_id not in images:
            raise ImageLoadError(f"image file for id {image_id!r} not found under {image_dir}")
        pixels = load_pixels(images[image_id], image_id)
        height, width = pixels.shape[:2]
        raw = []
        for lineno, line in enumerate(txt.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split()
            try:
                cls_idx = int(parts[0])
                cx, cy, w, h = (float(v) for v in parts[1:5])
                if len(parts) < 5:
                    raise ValueError("expected 5 fields")
                name = names[cls_idx]
            except (ValueError, IndexError) as exc:
                raise AnnotationParseError(f"{txt}:{lineno}: {exc}") from exc
            kind, species = parse_label(name)
            try:
                raw.append(BoundingBox(kind, (cx - w / 2) * width, (cy - h / 2) * height,
                                       w * width, h * height, species))
            except DomainError as exc:
                raise AnnotationParseError(f"{txt}:{lineno}: {exc}") from exc
        boxes = _finish_boxes(raw, width, height, image_id)
        species = _image_species(boxes, images[image_id].parent.name)
        out.append(AnnotatedImage(image_id, pixels, species, tuple(boxes)))
    return out


def parse_annotations(path: str | Path, format: str = "COCO", image_root: str | Path | None = None
                      ) -> list[AnnotatedImage]:
    """Load every annotated image of a COCO JSON file or a YOLO directory.

    Args:
      path: COCO annotation JSON, or the root of a YOLO export (``labels/``,
        ``images/`` and a ``classes.txt``/``data.yaml`` name mapping).
      format: ``"COCO"`` or ``"YOLO"``.
      image_root: directory COCO ``file_name`` entries are relative to;
        defaults to the annotation file's directory.
    """
    path = Path(path)
    if not path.exists():
        raise AnnotationParseError(f"annotation path does not exist: {path}")
    fmt = format.upper()
    if fmt == "COCO":
        if path.is_dir():
            jsons = sorted(path.glob("*.json"))
            if len(jsons) != 1:
                raise AnnotationParseError(f"{path}: expected exactly one COCO json file, found {len(jsons)}")
            path = jsons[0]
        return _parse_coco(path, Path(image_root) if image_root else path.parent)
    if fmt == "YOLO":
        if not path.is_dir():
            raise AnnotationParseError(f"{path}: YOLO annotations must be a directory")
        return _parse_yolo(path)
    raise DomainError(f"unknown annotation format {format!r}")


# --------------------------------------------------------------------------
# labels and splits


def resolve_boxes(boxes: Sequence[BoundingBox]) -> list[BoundingBox]:
    """Drop SpeciesClean boxes that overlap a SpeciesAnomaly box (IoU > 0)."""
    anomalous = [b for b in boxes if b.kind is BoxKind.SPECIES_ANOMALY]
    return [
        b for b in boxes
        if not (b.kind is BoxKind.SPECIES_CLEAN and any(b.iou(a) > 0 for a in anomalous))
    ]


def derive_sample_label(boxes: Sequence[BoundingBox]) -> SampleLabel:
    kept = resolve_boxes(boxes)
    if any(b.kind in (BoxKind.ANOMALY, BoxKind.SPECIES_ANOMALY) for b in kept):
        return SampleLabel.NOK
    return SampleLabel.OK


def default_eval_count(n_ok: int, n_nok: int, n_train: int) -> int:
    """Largest balanced per-class count for validation and test of one species."""
    return max(0, min(n_nok // 2, (n_ok - n_train) // 2))


def build_split(
    samples: Sequence[tuple[AnnotatedImage, SampleLabel]],
    species_scope: str = ALL,
    train_frac: float = 0.7,
    val_count: int | None = None,
    test_count: int | None = None,
    seed: int = 0,
) -> DatasetSplit:
    """One-class split: OK-only training ids, balanced validation and test.

    ``val_count``/``test_count`` are per-class counts. For ``species_scope="all"``
    they apply per species and default to 10; for a single species they
    default to :func:`default_eval_count`.
    """
    if not 0.0 < train_frac <= 1.0:
        raise DomainError(f"train_frac must lie in (0, 1], got {train_frac}")
    rng = np.random.default_rng(seed)

    groups: dict[str, tuple[list[str], list[str]]] = defaultdict(lambda: ([], []))
    for image, label in samples:
        if species_scope != ALL and image.species != species_scope:
            continue
        ok, nok = groups[image.species]
        (ok if label is SampleLabel.OK else nok).append(image.id)
    if not groups:
        raise CapacityError(f"no samples for species scope {species_scope!r}")

    train: list[str] = []
    validation: list[tuple[str, SampleLabel]] = []
    test: list[tuple[str, SampleLabel]] = []
    for species in sorted(groups):
        ok, nok = (sorted(ids) for ids in groups[species])
        n_train = math.floor(train_frac * len(ok))
        if species_scope == ALL:
            n_val = 10 if val_count is None else val_count
            n_test = 10 if test_count is None else test_count
        else:
            default = default_eval_count(len(ok), len(nok), n_train)
            n_val = default if val_count is None else val_count
            n_test = default if test_count is None else test_count
        ok_short = n_train + n_val + n_test - len(ok)
        nok_short = n_val + n_test - len(nok)
        if ok_short > 0 or nok_short > 0:
            raise CapacityError(
                f"species {species!r}: need {n_train + n_val + n_test} OK and {n_val + n_test} NOK, "
                f"have {len(ok)} OK and {len(nok)} NOK (short by {max(ok_short, 0)} OK, {max(nok_short, 0)} NOK)"
            )
        ok = [ok[i] for i in rng.permutation(len(ok))]
        nok = [nok[i] for i in rng.permutation(len(nok))]
        train += ok[:n_train]
        validation += [(i, SampleLabel.OK) for i in ok[n_train:n_train + n_val]]
        validation += [(i, SampleLabel.NOK) for i in nok[:n_val]]
        test += [(i, SampleLabel.OK) for i in ok[n_train + n_val:n_train + n_val + n_test]]
        test += [(i, SampleLabel.NOK) for i in nok[n_val:n_val + n_test]]
    return DatasetSplit(train, validation, test, seed, species_scope)


# --------------------------------------------------------------------------
# preprocessing


def majority_aspect_ratio(images: Iterable[AnnotatedImage | np.ndarray]) -> int:
    """Most common width:height ratio among 1, 2 and 4 (nearest in log scale)."""
    votes: Counter[int] = Counter()
    for img in images:
        px = img.pixels if isinstance(img, AnnotatedImage) else np.asarray(img)
        r = px.shape[1] / px.shape[0]
        votes[min(CANONICAL_SIZES, key=lambda c: abs(math.log(r) - math.log(c)))] += 1
    if not votes:
        raise DomainError("cannot measure an aspect ratio from zero images")
    return min(votes, key=lambda c: (-votes[c], c))


def target_size(species_scope: str, ratios: Mapping[str, int] | None = None) -> tuple[int, int]:
    """Canonical (height, width) for a species scope."""
    if species_scope == ALL:
        return CANONICAL_SIZES[ALL_SPECIES_RATIO]
    table = DEFAULT_ASPECT_RATIOS if ratios is None else ratios
    ratio = table.get(canonical_species(species_scope))
    if ratio is None:
        raise DomainError(f"no aspect ratio known for species {species_scope!r}")
    return CANONICAL_SIZES[ratio]


def _as_array(image: AnnotatedImage | np.ndarray) -> np.ndarray:
    px = image.pixels if isinstance(image, AnnotatedImage) else np.asarray(image, dtype=np.float32)
    if px.ndim == 2:
        px = px[:, :, None]
    return px


def canonical_resize(image: AnnotatedImage | np.ndarray, species_scope: str = ALL,
                     ratios: Mapping[str, int] | None = None) -> np.ndarray:
    """Pad to the scope's aspect ratio with edge replication, then resize
    bilinearly to its canonical size. Returns an HxWxC float32 array."""
    px = _as_array(image)
    if px.size == 0 or px.shape[0] == 0 or px.shape[1] == 0:
        raise DomainError("cannot resize an empty image")
    out_h, out_w = target_size(species_scope, ratios)
    h, w = px.shape[:2]
    ratio = out_w / out_h
    if w / h < ratio:
        extra = math.ceil(h * ratio) - w
        pad = ((0, 0), (extra // 2, extra - extra // 2), (0, 0))
    else:
        extra = math.ceil(w / ratio) - h
        pad = ((extra // 2, extra - extra // 2), (0, 0), (0, 0))
    padded = np.pad(px, pad, mode="edge")
    resized = cv2.resize(padded, (out_w, out_h), interpolation=cv2.INTER_LINEAR)
    if resized.ndim == 2:
        resized = resized[:, :, None]
    return np.clip(resized, 0.0, 1.0).astype(np.float32)


def _gray(px: np.ndarray) -> np.ndarray:
    if px.shape[2] == 1:
        return px[:, :, 0]
    return color.rgb2gray(px)


def _blend(a: np.ndarray, b: np.ndarray | float, factor: float) -> np.ndarray:
    return np.clip(factor * a + (1.0 - factor) * b, 0.0, 1.0)


def augment(image: AnnotatedImage | np.ndarray, policy: AugmentationPolicy) -> np.ndarray:
    """Random flips, colour jitter and inversion; a pure function of
    ``(image, policy)``. Hue and saturation do nothing on grayscale input."""
    px = _as_array(image).astype(np.float64)
    rng = np.random.default_rng(policy.seed)
    # draw everything up front so the stream does not depend on which ops run
    u_flip_h, u_flip_v, u_invert = rng.random(3)
    f_bright, f_contrast, f_sat = rng.uniform(-1.0, 1.0, 3)
    hue_shift = rng.uniform(-1.0, 1.0)
    order = rng.permutation(4)

    if u_flip_h < policy.flip_h:
        px = px[:, ::-1]
    if u_flip_v < policy.flip_v:
        px = px[::-1]
    px = np.ascontiguousarray(px)
    for op in order:
        if op == 0 and policy.brightness > 0:
            px = _blend(px, 0.0, max(0.0, 1.0 + policy.brightness * f_bright))
        elif op == 1 and policy.contrast > 0:
            px = _blend(px, float(_gray(px).mean()), max(0.0, 1.0 + policy.contrast * f_contrast))
        elif op == 2 and policy.saturation > 0 and px.shape[2] == 3:
            px = _blend(px, _gray(px)[:, :, None], max(0.0, 1.0 + policy.saturation * f_sat))
        elif op == 3 and policy.hue > 0 and px.shape[2] == 3:
            hsv = color.rgb2hsv(px)
            hsv[:, :, 0] = (hsv[:, :, 0] + policy.hue * hue_shift) % 1.0
            px = color.hsv2rgb(hsv)
    if u_invert < policy.invert:
        px = 1.0 - px
    return np.clip(px, 0.0, 1.0).astype(np.float32)


def add_salt_pepper(image: AnnotatedImage | np.ndarray, fraction: float, seed: int) -> np.ndarray:
    """Set exactly ``round(fraction * H * W)`` distinct pixel positions to 0 or 1.

    All channels of a chosen position receive the same value.
    """
    if not 0.0 <= fraction <= 1.0:
        raise DomainError(f"salt-and-pepper fraction must lie in [0, 1], got {fraction}")
    px = _as_array(image).astype(np.float32, copy=True)
    h, w = px.shape[:2]
    n = h * w
    k = int(math.floor(fraction * n + 0.5))
    if k == 0:
        return px
    rng = np.random.default_rng(seed)
    positions = rng.choice(n, size=k, replace=False)
    values = rng.integers(0, 2, size=k).astype(np.float32)
    flat = px.reshape(n, px.shape[2])
    flat[positions] = values[:, None]
    return px


def split_manifest(split: DatasetSplit) -> str:
    return json.dumps(split.to_json(), indent=2)


__all__ = [
    "ALL", "SPECIES", "SPECIES_COUNTS", "DEFAULT_ASPECT_RATIOS", "CANONICAL_SIZES",
    "BoxKind", "SampleLabel", "BoundingBox", "AnnotatedImage", "DatasetSplit", "AugmentationPolicy",
    "parse_annotations", "parse_label", "derive_sample_label", "resolve_boxes", "build_split",
    "canonical_resize", "target_size", "majority_aspect_ratio", "augment", "add_salt_pepper",
]
