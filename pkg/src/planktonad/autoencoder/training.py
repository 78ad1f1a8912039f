"""Denoising training on OK samples, inference, and checkpoint I/O."""

from __future__ import annotations

import copy
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch
from torch import nn

from planktonad.autoencoder.architectures import ModelSpec, build_model
from planktonad.autoencoder.cores import AutoEncoder, compute_loss
from planktonad.dataset import (
    AnnotatedImage,
    AugmentationPolicy,
    DatasetSplit,
    SampleLabel,
    add_salt_pepper,
    augment,
    derive_sample_label,
)
from planktonad.errors import ContractError, NumericError, ShapeError, TrainingError

logger = logging.getLogger(__name__)

ImageProvider = Mapping[str, "np.ndarray | AnnotatedImage"]


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 200
    batch_size: int = 32
    learning_rate: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    weight_decay: float = 0.0
    patience: int = 20
    seed: int = 0
    augmentation: AugmentationPolicy = field(default_factory=AugmentationPolicy)
    restore_best: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping) -> TrainingConfig:
        doc = dict(doc)
        if "augmentation" in doc and not isinstance(doc["augmentation"], AugmentationPolicy):
            doc["augmentation"] = AugmentationPolicy(**doc["augmentation"])
        if "betas" in doc:
            doc["betas"] = tuple(doc["betas"])
        return cls(**doc)


@dataclass(frozen=True)
class ReconstructionTriplet:
    original: np.ndarray
    reconstruction: np.ndarray
    difference: np.ndarray

    @classmethod
    def from_pair(cls, original: np.ndarray, reconstruction: np.ndarray) -> ReconstructionTriplet:
        original = np.asarray(original, dtype=np.float32)
        reconstruction = np.clip(np.asarray(reconstruction, dtype=np.float32), 0.0, 1.0)
        if original.shape != reconstruction.shape:
            raise ShapeError(f"original {original.shape} and reconstruction {reconstruction.shape} differ")
        return cls(original, reconstruction, np.abs(original - reconstruction))


@dataclass(frozen=True)
class TrainedAE:
    spec: ModelSpec
    network: nn.Module
    training_log: tuple[float, ...] = ()
    validation_log: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        self.network.eval()
        for p in self.network.parameters():
            p.requires_grad_(False)

    def checkpoint_hash(self) -> str:
        h = hashlib.sha256()
        for name, tensor in sorted(self.network.state_dict().items()):
            h.update(name.encode())
            h.update(tensor.detach().cpu().numpy().tobytes())
        return h.hexdigest()[:16]

    def save(self, directory: str | Path) -> Path:
        """Write ``weights.pt`` plus the ``model.json`` sidecar."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        torch.save(self.network.state_dict(), directory / "weights.pt")
        sidecar = {
            "core": self.spec.core.value,
            "conv_pair": self.spec.conv_pair.value,
            "input_shape": list(self.spec.input_shape),
            "latent_config": dict(self.spec.latent_config),
            "seed": self.seed,
            "training_log": list(self.training_log),
            "validation_log": list(self.validation_log),
            "checkpoint_hash": self.checkpoint_hash(),
        }
        (directory / "model.json").write_text(json.dumps(sidecar, indent=2), encoding="utf-8")
        return directory


def load_checkpoint(directory: str | Path) -> TrainedAE:
    directory = Path(directory)
    meta = json.loads((directory / "model.json").read_text(encoding="utf-8"))
    spec = build_model(meta["core"], meta["conv_pair"], tuple(meta["input_shape"]), meta["latent_config"])
    net = AutoEncoder(spec)
    net.load_state_dict(torch.load(directory / "weights.pt", map_location="cpu", weights_only=True))
    return TrainedAE(spec, net, tuple(meta["training_log"]), tuple(meta.get("validation_log", ())),
                     int(meta["seed"]))


def _pixels(item) -> np.ndarray:
    px = item.pixels if isinstance(item, AnnotatedImage) else np.asarray(item, dtype=np.float32)
    return px[:, :, None] if px.ndim == 2 else px


def _to_tensor(batch: Sequence[np.ndarray]) -> torch.Tensor:
    return torch.from_numpy(np.stack(batch).transpose(0, 3, 1, 2).copy()).float()


def _sub_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def _check_train_ids(split: DatasetSplit, images: ImageProvider,
                     labels: Mapping[str, SampleLabel] | None) -> None:
    known = dict(split.validation) | dict(split.test)
    if labels:
        known |= dict(labels)
    for sid in split.train:
        label = known.get(sid)
        item = images.get(sid)
        if label is None and isinstance(item, AnnotatedImage):
            label = derive_sample_label(item.boxes)
        if label is SampleLabel.NOK:
            raise ContractError(f"training list contains NOK sample {sid!r}")
        if item is None:
            raise ContractError(f"no image provided for training sample {sid!r}")


def _mean_loss(net: AutoEncoder, images: list[np.ndarray], batch_size: int) -> float:
    net.eval()
    total, n = 0.0, 0
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            x = _to_tensor(images[start:start + batch_size])
            total += float(torch.mean((net(x)["recon"] - x) ** 2)) * len(x)
            n += len(x)
    return total / max(n, 1)


def train(spec: ModelSpec, split: DatasetSplit, images: ImageProvider, config: TrainingConfig,
          labels: Mapping[str, SampleLabel] | None = None) -> TrainedAE:
    """Fit an autoencoder on the OK training ids of ``split``.

    Inputs are re-augmented and salt-and-pepper corrupted every epoch; the
    clean augmented image is the target. Early stopping watches the mean
    reconstruction MSE on the OK half of the validation split.

    Args:
      spec: resolved architecture.
      split: dataset split; ``split.train`` must hold OK ids only.
      images: id -> pre-resized HxWxC image (array or AnnotatedImage).
      config: optimisation settings.
      labels: optional id -> label map used to verify the OK-only contract.
    """
    _check_train_ids(split, images, labels)
    if not split.train:
        raise ContractError("training list is empty")
    train_px = [_pixels(images[i]) for i in split.train]
    for sid, px in zip(split.train, train_px):
        if px.shape != spec.input_shape:
            raise ShapeError(f"sample {sid!r} has shape {px.shape}, model expects {spec.input_shape}")
    val_px = [_pixels(images[i]) for i, lab in split.validation if lab is SampleLabel.OK and i in images]

    torch.manual_seed(config.seed)
    net = AutoEncoder(spec)
    opt = torch.optim.Adam(net.parameters(), lr=config.learning_rate, betas=config.betas,
                           weight_decay=config.weight_decay)
    rng = np.random.default_rng(config.seed)
    policy = config.augmentation
    log: list[float] = []
    val_log: list[float] = []
    best, best_state, stale = math.inf, None, 0

    for epoch in range(config.epochs):
        net.train()
        order = rng.permutation(len(train_px))
        epoch_loss, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            idx = order[start:start + config.batch_size]
            if len(idx) < 2 and len(order) > 1:
                continue  # batch norm needs more than one sample
            targets, inputs = [], []
            for k in idx:
                s = _sub_seed(config.seed, epoch, k)
                clean = augment(train_px[k], replace(policy, seed=s))
                targets.append(clean)
                inputs.append(add_salt_pepper(clean, policy.salt_pepper_fraction, s + 1))
            x, y = _to_tensor(inputs), _to_tensor(targets)
            try:
                loss, _ = compute_loss(spec.core, x, y, net(x))
            except NumericError as exc:
                raise TrainingError(f"loss diverged in epoch {epoch}: {exc}", epoch) from exc
            opt.zero_grad()
            loss.backward()
            opt.step()
            epoch_loss += float(loss.detach()) * len(idx)
            seen += len(idx)
        mean = epoch_loss / max(seen, 1)
        if not math.isfinite(mean):
            raise TrainingError(f"loss diverged in epoch {epoch}", epoch)
        log.append(mean)

        monitor = _mean_loss(net, val_px, config.batch_size) if val_px else mean
        val_log.append(monitor)
        logger.info("%s epoch %d loss %.6f val %.6f", spec.name, epoch, mean, monitor)
        if monitor < best:
            best, stale = monitor, 0
            best_state = copy.deepcopy(net.state_dict())
        else:
            stale += 1
            if stale >= config.patience:
                logger.info("%s early stop after epoch %d", spec.name, epoch)
                break

    if config.restore_best and best_state is not None:
        net.load_state_dict(best_state)
    return TrainedAE(spec, net, tuple(log), tuple(val_log), config.seed)


def _batch_tensor(model: TrainedAE, images: Sequence[np.ndarray]) -> torch.Tensor:
    px = [_pixels(im) for im in images]
    for p in px:
        if p.shape != model.spec.input_shape:
            raise ShapeError(f"image shape {p.shape} does not match model input {model.spec.input_shape}")
    return _to_tensor(px)


def reconstruct_batch(model: TrainedAE, images: Sequence[np.ndarray], batch_size: int = 32
                      ) -> list[ReconstructionTriplet]:
    out = []
    for start in range(0, len(images), batch_size):
        chunk = images[start:start + batch_size]
        x = _batch_tensor(model, chunk)
        with torch.no_grad():
            recon = model.network(x)["recon"].numpy().transpose(0, 2, 3, 1)
        originals = x.numpy().transpose(0, 2, 3, 1)
        out += [ReconstructionTriplet.from_pair(o, r) for o, r in zip(originals, recon)]
    return out


def reconstruct(model: TrainedAE, image: np.ndarray) -> ReconstructionTriplet:
    """Reconstruction and absolute difference image for one sample."""
    return reconstruct_batch(model, [image])[0]


def encode_latent(model: TrainedAE, image: np.ndarray) -> dict[str, np.ndarray]:
    """Latent code of one image.

    Returns ``{"latent": array}``; VQVAE1 adds ``"indices"`` (the codebook
    index grid) and ``"latent"`` holds the quantized vectors.
    """
    x = _batch_tensor(model, [image])
    return {k: v[0].numpy() for k, v in model.network.encode(x).items()}
