"""Synthetic ellipse/blob fixture used by the tests and the demo config."""

from __future__ import annotations

import numpy as np

from planktonad.dataset import AnnotatedImage, BoundingBox, BoxKind

SPECIES_NAME = "Synthetic"


def _ellipse_mask(shape, cy, cx, ay, ax, theta):
    yy, xx = np.mgrid[: shape[0], : shape[1]].astype(np.float64)
    dy, dx = yy - cy, xx - cx
    c, s = np.cos(theta), np.sin(theta)
    u = (dx * c + dy * s) / ax
    v = (-dx * s + dy * c) / ay
    return u * u + v * v


def _soft(r2, edge=0.08):
    # r2 is the squared normalised radius; 1 on the boundary
    return np.clip((1.0 - r2) / edge + 0.5, 0.0, 1.0)


def make_sample(rng: np.random.Generator, size: tuple[int, int] = (128, 128), anomalous: bool = False,
                sample_id: str = "s") -> AnnotatedImage:
    """One grayscale image of a bright ellipse on a dark background.

    Anomalous samples get a bright round blob of 8-16 px diameter attached to
    the ellipse boundary.
    """
    h, w = size
    cy, cx = h / 2 + rng.uniform(-6, 6), w / 2 + rng.uniform(-6, 6)
    ay, ax = rng.uniform(0.16, 0.24) * h, rng.uniform(0.28, 0.38) * w
    theta = rng.uniform(-0.4, 0.4)
    level = rng.uniform(0.55, 0.7)
    img = 0.1 + (level - 0.1) * _soft(_ellipse_mask(size, cy, cx, ay, ax, theta))
    boxes = [BoundingBox(BoxKind.SPECIES_CLEAN, cx - ax, cy - ay, 2 * ax, 2 * ay, SPECIES_NAME)]
    if anomalous:
        phi = rng.uniform(0, 2 * np.pi)
        r = rng.uniform(4.0, 8.0)
        by = cy + ay * np.sin(phi) * np.cos(theta) + ax * np.cos(phi) * np.sin(theta)
        bx = cx + ax * np.cos(phi) * np.cos(theta) - ay * np.sin(phi) * np.sin(theta)
        blob = _soft(_ellipse_mask(size, by, bx, r, r, 0.0), edge=0.3)
        img = np.maximum(img, 0.1 + 0.85 * blob)
        boxes = [BoundingBox(BoxKind.SPECIES_ANOMALY, cx - ax, cy - ay, 2 * ax, 2 * ay, SPECIES_NAME),
                 BoundingBox(BoxKind.ANOMALY, bx - r, by - r, 2 * r, 2 * r)]
    img = img + rng.normal(0.0, 0.01, size)
    px = np.clip(img, 0.0, 1.0).astype(np.float32)[:, :, None]
    clipped = [b.clamp(w, h) for b in boxes]
    return AnnotatedImage(sample_id, px, SPECIES_NAME, tuple(b for b in clipped if b is not None))


def make_fixture(n_ok: int = 500, n_nok: int = 100, size: tuple[int, int] = (128, 128),
                 seed: int = 0) -> list[AnnotatedImage]:
    rng = np.random.default_rng(seed)
    out = [make_sample(rng, size, False, f"ok{i:04d}") for i in range(n_ok)]
    out += [make_sample(rng, size, True, f"nok{i:04d}") for i in range(n_nok)]
    return out
