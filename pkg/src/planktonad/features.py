"""Feature extractors over (original, reconstruction, difference) triplets.

Six extractors are available:

=========== ================================================================
ErrMetrics  [L2 distance, SSIM, average-hash Hamming distance, MSE]
SIFT        keypoint statistics of the difference image (6 values)
HardNet1    descriptor of the whole difference image resized to 32x32
HardNet2    per 32x32 block of the difference image: distance of the block
            descriptor from the descriptor of an empty (all-zero) block
HardNet3    per block: cosine similarity of original vs reconstruction
HardNet4    per block: log of the clamped HardNet3 similarity
=========== ================================================================
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import cv2
import numpy as np
import torch
from skimage.metrics import structural_similarity
from torch import nn

from planktonad.autoencoder.training import ReconstructionTriplet
from planktonad.errors import DomainError, NumericError, ShapeError

logger = logging.getLogger(__name__)

PATCH = 32
DESCRIPTOR_DIM = 128
LOG_FLOOR = 1e-6


class Extractor(str, enum.Enum):
    ErrMetrics = "ErrMetrics"
    SIFT = "SIFT"
    HardNet1 = "HardNet1"
    HardNet2 = "HardNet2"
    HardNet3 = "HardNet3"
    HardNet4 = "HardNet4"


ALL_EXTRACTORS = tuple(Extractor)


@dataclass(frozen=True)
class FeatureVector:
    extractor: Extractor
    values: np.ndarray
    sample_id: str = ""


# --------------------------------------------------------------------------
# patch descriptors


class PatchDescriptor(Protocol):
    backend: str

    def __call__(self, patches: np.ndarray) -> np.ndarray:
        """Map normalised (N, 32, 32) patches to (N, 128) vectors."""


class HardNet(nn.Module):
    """HardNet patch descriptor network (L2-normalised 128-d output)."""

    def __init__(self):
        super().__init__()

        def block(cin, cout, stride=1):
            return [nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False),
                    nn.BatchNorm2d(cout, affine=False), nn.ReLU()]

        self.features = nn.Sequential(
            *block(1, 32), *block(32, 32), *block(32, 64, 2), *block(64, 64),
            *block(64, 128, 2), *block(128, 128), nn.Dropout(0.3),
            nn.Conv2d(128, 128, 8, bias=False), nn.BatchNorm2d(128, affine=False),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.features(x).flatten(1)


class PretrainedHardNet:
    """Descriptor backed by published HardNet weights loaded from ``path``."""

    backend = "pretrained_hardnet"

    def __init__(self, path: str | Path):
        state = torch.load(Path(path), map_location="cpu", weights_only=False)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        self.net = HardNet()
        self.net.load_state_dict(state)
        self.net.eval()

    def __call__(self, patches: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(patches, dtype=np.float32))[:, None]
            return self.net(x).numpy().astype(np.float64)


@dataclass
class RandomProjectionDescriptor:
    """Deterministic stand-in: fixed-seed Gaussian projection 1024 -> 128."""

    seed: int = 1234
    backend: str = "deterministic_fallback"
    _matrix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        self._matrix = rng.standard_normal((PATCH * PATCH, DESCRIPTOR_DIM)) / PATCH

    def __call__(self, patches: np.ndarray) -> np.ndarray:
        return patches.reshape(len(patches), -1).astype(np.float64) @ self._matrix


def load_descriptor(weights: str | Path | None = None) -> PatchDescriptor:
    """Pretrained HardNet if a weights file is given and exists, else the fallback."""
    if weights and Path(weights).is_file():
        return PretrainedHardNet(weights)
    if weights:
        logger.warning("HardNet weights %s not found; using the deterministic fallback descriptor", weights)
    else:
        logger.warning("no HardNet weights configured; using the deterministic fallback descriptor")
    return RandomProjectionDescriptor()


def _fallback_direction() -> np.ndarray:
    v = np.random.default_rng(0).standard_normal(DESCRIPTOR_DIM)
    return v / np.linalg.norm(v)


_DEGENERATE = _fallback_direction()


def normalize_patches(patches: np.ndarray) -> np.ndarray:
    """Per-patch zero mean, unit standard deviation."""
    p = np.asarray(patches, dtype=np.float64)
    mean = p.mean(axis=(1, 2), keepdims=True)
    std = p.std(axis=(1, 2), keepdims=True)
    return (p - mean) / (std + 1e-7)


def describe_patches(patches: np.ndarray, descriptor: PatchDescriptor) -> np.ndarray:
    """Unit-norm descriptors for a stack of (N, 32, 32) patches."""
    patches = np.asarray(patches)
    if patches.ndim != 3 or patches.shape[1:] != (PATCH, PATCH):
        raise ShapeError(f"patches must have shape (N, 32, 32), got {patches.shape}")
    raw = np.asarray(descriptor(normalize_patches(patches)), dtype=np.float64)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    degenerate = norms[:, 0] < 1e-12
    out = raw / np.where(norms < 1e-12, 1.0, norms)
    out[degenerate] = _DEGENERATE
    return out


def describe_patch(patch: np.ndarray, descriptor: PatchDescriptor) -> np.ndarray:
    patch = np.asarray(patch)
    if patch.ndim == 3 and patch.shape[2] == 1:
        patch = patch[:, :, 0]
    if patch.shape != (PATCH, PATCH):
        raise ShapeError(f"patch must be 32x32, got {patch.shape}")
    return describe_patches(patch[None], descriptor)[0]


# --------------------------------------------------------------------------
# image helpers


def to_gray(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        return image.mean(axis=2)
    return image


def split_blocks(image: np.ndarray) -> np.ndarray:
    """Row-major (rows*cols, 32, 32) stack of non-overlapping blocks."""
    gray = to_gray(image)
    h, w = gray.shape
    if h % PATCH or w % PATCH or h == 0 or w == 0:
        raise ShapeError(f"image dimensions must be multiples of 32, got {h}x{w}")
    rows, cols = h // PATCH, w // PATCH
    return gray.reshape(rows, PATCH, cols, PATCH).swapaxes(1, 2).reshape(rows * cols, PATCH, PATCH)


def average_hash(image: np.ndarray, size: int = 8) -> np.ndarray:
    small = cv2.resize(to_gray(image).astype(np.float32), (size, size), interpolation=cv2.INTER_AREA)
    return (small > small.mean()).ravel()


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """SSIM with an 11x11 Gaussian window (sigma 1.5) on [0, 1] images."""
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a, b = a[:, :, 0], b[:, :, 0]
    channel_axis = 2 if a.ndim == 3 else None
    return float(structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                       use_sample_covariance=False, channel_axis=channel_axis))


def error_metrics(original: np.ndarray, reconstruction: np.ndarray) -> np.ndarray:
    diff = np.asarray(original, np.float64) - np.asarray(reconstruction, np.float64)
    l2 = float(np.sqrt(np.sum(diff * diff)))
    hash_dist = float(np.count_nonzero(average_hash(original) != average_hash(reconstruction)))
    return np.array([l2, ssim(original, reconstruction), hash_dist, float(np.mean(diff * diff))])


_SIFT = None


def sift_statistics(difference: np.ndarray) -> np.ndarray:
    """[count, mean scale, max scale, mean response, max response, sum response]."""
    global _SIFT
    if _SIFT is None:
        _SIFT = cv2.SIFT_create()
    img = np.clip(to_gray(difference) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    keypoints = _SIFT.detect(img, None)
    if not keypoints:
        return np.zeros(6)
    sizes = np.array([k.size for k in keypoints])
    responses = np.array([k.response for k in keypoints])
    return np.array([len(keypoints), sizes.mean(), sizes.max(), responses.mean(), responses.max(),
                     responses.sum()])


def feature_length(kind: Extractor | str, shape: Sequence[int]) -> int:
    kind = _kind(kind)
    if kind is Extractor.ErrMetrics:
        return 4
    if kind is Extractor.SIFT:
        return 6
    if kind is Extractor.HardNet1:
        return DESCRIPTOR_DIM
    return (shape[0] // PATCH) * (shape[1] // PATCH)


def _kind(kind) -> Extractor:
    try:
        return kind if isinstance(kind, Extractor) else Extractor(kind)
    except ValueError:
        raise DomainError(f"unknown feature extractor {kind!r}; expected one of "
                          f"{[e.value for e in Extractor]}") from None


def _check_triplet(t: ReconstructionTriplet) -> None:
    shape = t.original.shape
    if t.reconstruction.shape != shape or t.difference.shape != shape:
        raise ShapeError("triplet images must share one shape")
    if shape[0] % PATCH or shape[1] % PATCH:
        raise ShapeError(f"image dimensions must be multiples of 32, got {shape[0]}x{shape[1]}")


def _cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # rows of a and b are unit vectors
    return np.clip(np.sum(a * b, axis=1), -1.0, 1.0)


def extract_batch(kind: Extractor | str, triplets: Sequence[ReconstructionTriplet],
                  descriptor: PatchDescriptor | None = None, sample_ids: Sequence[str] | None = None,
                  hardnet1_source: str = "difference") -> list[FeatureVector]:
    """Feature vectors for many triplets; descriptor calls are batched."""
    kind = _kind(kind)
    ids = list(sample_ids) if sample_ids is not None else [""] * len(triplets)
    for t in triplets:
        _check_triplet(t)
    if kind.value.startswith("HardNet") and descriptor is None:
        descriptor = load_descriptor(None)

    if kind is Extractor.ErrMetrics:
        rows = [error_metrics(t.original, t.reconstruction) for t in triplets]
    elif kind is Extractor.SIFT:
        rows = [sift_statistics(t.difference) for t in triplets]
    elif kind is Extractor.HardNet1:
        if hardnet1_source not in ("difference", "original"):
            raise DomainError(f"hardnet1_source must be 'difference' or 'original', got {hardnet1_source!r}")
        src = [t.difference if hardnet1_source == "difference" else t.original for t in triplets]
        small = np.stack([cv2.resize(to_gray(s).astype(np.float32), (PATCH, PATCH),
                                     interpolation=cv2.INTER_AREA) for s in src]) if src else np.zeros((0, 32, 32))
        rows = list(describe_patches(small, descriptor))
    elif kind is Extractor.HardNet2:
        blocks = [split_blocks(t.difference) for t in triplets]
        zero_ref = describe_patches(np.zeros((1, PATCH, PATCH)), descriptor)[0]
        rows = [np.linalg.norm(describe_patches(b, descriptor) - zero_ref, axis=1) for b in blocks]
    else:
        rows = []
        for t in triplets:
            a = describe_patches(split_blocks(t.original), descriptor)
            b = describe_patches(split_blocks(t.reconstruction), descriptor)
            cos = _cosines(a, b)
            rows.append(cos if kind is Extractor.HardNet3 else np.log(np.clip(cos, LOG_FLOOR, 1.0)))

    out = []
    for sid, row in zip(ids, rows):
        row = np.asarray(row, dtype=np.float64)
        if not np.all(np.isfinite(row)):
            raise NumericError(f"{kind.value} produced non-finite features for sample {sid!r}")
        out.append(FeatureVector(kind, row, sid))
    return out


def extract_features(kind: Extractor | str, triplet: ReconstructionTriplet,
                     descriptor: PatchDescriptor | None = None, sample_id: str = "",
                     hardnet1_source: str = "difference") -> FeatureVector:
    return extract_batch(kind, [triplet], descriptor, [sample_id], hardnet1_source)[0]


def feature_matrix(vectors: Iterable[FeatureVector]) -> np.ndarray:
    rows = [v.values for v in vectors]
    return np.vstack(rows) if rows else np.zeros((0, 0))


def write_feature_csv(path: str | Path, vectors: Sequence[FeatureVector], labels: Sequence[str]) -> None:
    """CSV with header ``sample_id, label, f0..fK-1``."""
    width = len(vectors[0].values) if vectors else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "label"] + [f"f{i}" for i in range(width)])
        for vec, label in zip(vectors, labels):
            writer.writerow([vec.sample_id, label] + [repr(float(x)) for x in vec.values])


def read_feature_csv(path: str | Path) -> tuple[list[str], list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    body = rows[1:]
    ids = [r[0] for r in body]
    labels = [r[1] for r in body]
    values = np.array([[float(x) for x in r[2:]] for r in body]) if body else np.zeros((0, 0))
    return ids, labels, values
