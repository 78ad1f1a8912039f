"""Autoencoder cores crossed with convolutional encoder/decoder pairs."""

from planktonad.autoencoder.architectures import (
    ALL_CORES,
    ALL_PAIRS,
    ConvPair,
    Core,
    Layer,
    ModelSpec,
    build_model,
)
from planktonad.autoencoder.cores import AutoEncoder, compute_loss, kl_divergence
from planktonad.autoencoder.training import (
    ReconstructionTriplet,
    TrainedAE,
    TrainingConfig,
    encode_latent,
    load_checkpoint,
    reconstruct,
    reconstruct_batch,
    train,
)

__all__ = [
    "ALL_CORES", "ALL_PAIRS", "ConvPair", "Core", "Layer", "ModelSpec", "build_model",
    "AutoEncoder", "compute_loss", "kl_divergence",
    "ReconstructionTriplet", "TrainedAE", "TrainingConfig", "encode_latent", "load_checkpoint",
    "reconstruct", "reconstruct_batch", "train",
]
