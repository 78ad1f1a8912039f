"""Reconstruction panels, 2-D feature-space projection and ROC plots."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import cv2
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402
from sklearn.decomposition import PCA  # noqa: E402

from planktonad.autoencoder import TrainedAE, encode_latent, reconstruct  # noqa: E402
from planktonad.errors import DomainError  # noqa: E402
from planktonad.evaluation import roc_auc  # noqa: E402
from planktonad.features import read_feature_csv  # noqa: E402
from planktonad.oneclass import DecisionThreshold, error_rates, nok_mask  # noqa: E402
from planktonad.runner.pipeline import read_scores, read_threshold  # noqa: E402


@dataclass(frozen=True)
class PlotArtifact:
    path: Path
    legend: tuple[str, ...] = ()
    eer_points: int = 0


def _to_uint8(img: np.ndarray) -> np.ndarray:
    return (np.clip(img, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def _latent_view(latent: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Channel-mean of the latent map (or the raw vector laid out in a
    square), min-max scaled and nearest-upsampled to ``shape``."""
    z = np.asarray(latent, dtype=np.float64)
    if z.ndim == 3:
        z = z.mean(0)
    elif z.ndim == 1:
        side = int(np.ceil(np.sqrt(z.size)))
        z = np.pad(z, (0, side * side - z.size)).reshape(side, side)
    span = z.max() - z.min()
    z = (z - z.min()) / span if span > 0 else np.zeros_like(z)
    return cv2.resize(z, (shape[1], shape[0]), interpolation=cv2.INTER_NEAREST)


def reconstruction_panel(model: TrainedAE, image: np.ndarray, path: str | Path) -> PlotArtifact:
    """Original | latent | reconstruction | difference, side by side at full size."""
    t = reconstruct(model, image)
    h, w, c = t.original.shape
    latent = encode_latent(model, image)["latent"]
    latent_img = np.repeat(_latent_view(latent, (h, w))[:, :, None], c, axis=2)
    panel = np.concatenate([t.original, latent_img, t.reconstruction, t.difference], axis=1)
    panel = _to_uint8(panel)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(panel[:, :, 0] if c == 1 else panel).save(path)
    return PlotArtifact(path)


def feature_space_plot(features: np.ndarray, labels: Sequence, path: str | Path, title: str = "") -> PlotArtifact:
    """Scatter of the first two principal components with OK/NOK markers."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise DomainError(f"need at least two feature rows, got shape {x.shape}")
    nok = nok_mask(labels)
    if x.shape[1] >= 2:
        xy = PCA(n_components=2).fit_transform(x)
    else:
        xy = np.column_stack([x[:, 0], np.zeros(len(x))])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.scatter(xy[~nok, 0], xy[~nok, 1], s=14, c="tab:blue", marker="o", label="OK")
    ax.scatter(xy[nok, 0], xy[nok, 1], s=18, c="tab:red", marker="x", label="NOK")
    ax.set_xlabel("PC 1")
    ax.set_ylabel("PC 2")
    if title:
        ax.set_title(title)
    legend = ax.legend()
    names = tuple(t.get_text() for t in legend.get_texts())
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return PlotArtifact(path, legend=names)


def roc_plot(scores: Sequence[float], labels: Sequence, threshold: DecisionThreshold, path: str | Path,
             title: str = "") -> PlotArtifact:
    """ROC curve (NOK as the detected class) with the operating point of the
    EER threshold on these scores (it may come from another split)."""
    points, auc = roc_auc(scores, labels)
    fpr, fnr = error_rates(np.asarray(scores, dtype=np.float64), nok_mask(labels), threshold.value)
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.plot(points[:, 0], points[:, 1], color="tab:blue", label=f"ROC (AUC {auc:.2f})")
    ax.plot([0, 1], [0, 1], color="0.7", linestyle="--", linewidth=0.8)
    eer = ax.plot([fpr], [1.0 - fnr], linestyle="none", marker="o", color="tab:red",
                  label=f"EER threshold {threshold.value:.3g} ({threshold.source})")
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return PlotArtifact(path, eer_points=len(eer[0].get_xdata()))


def render_plots(cell_dir: str | Path, model: TrainedAE | None = None,
                 samples: Mapping[str, np.ndarray] | None = None) -> list[PlotArtifact]:
    """Render the plots of one grid cell into ``<cell_dir>/plots``.

    Needs ``scores.csv``, ``threshold.json`` and ``features_test.csv`` in the
    cell; reconstruction panels are drawn for ``samples`` when a model is given.
    """
    cell = Path(cell_dir)
    required = [cell / "scores.csv", cell / "threshold.json", cell / "features_test.csv"]
    missing = [str(p) for p in required if not p.exists()]
    if missing:
        raise DomainError(f"missing artifacts for plotting: {missing}")
    if samples and model is None:
        raise DomainError("reconstruction panels need a trained model")
    out = cell / "plots"
    _, parts, labels, scores = read_scores(cell / "scores.csv")
    test = np.array([p == "test" for p in parts])
    threshold = read_threshold(cell / "threshold.json")
    name = cell.name.replace("__", " / ")
    artifacts = [roc_plot(scores[test], list(np.array(labels)[test]), threshold, out / "roc.png", name)]
    _, f_labels, feats = read_feature_csv(cell / "features_test.csv")
    artifacts.append(feature_space_plot(feats, f_labels, out / "feature_space.png", name))
    for sid, image in (samples or {}).items():
        artifacts.append(reconstruction_panel(model, image, out / f"panel_{sid}.png"))
    return artifacts
