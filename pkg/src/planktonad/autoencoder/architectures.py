"""Encoder/decoder layer tables and shape resolution for the ConvM pairs.

The printed decoder tables do not always undo the encoder's downsampling
(ConvM2 lists seven 2x upsamplings against a 16x encoder, ConvM3 and ConvM6
list one upsampling too few). ``resolve_decoder`` reconciles them: surplus
upsamplings are dropped starting from the earliest one, missing upsamplings
are inserted after the earliest convolutions that are not already followed
by one. ``ModelSpec.layer_table()`` prints the result for auditing.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

from planktonad.errors import DomainError, ShapeError


class Core(str, enum.Enum):
    BAE1 = "BAE1"
    BAE2 = "BAE2"
    VAE1 = "VAE1"
    VAE2 = "VAE2"
    VQVAE1 = "VQVAE1"


class ConvPair(str, enum.Enum):
    ConvM1 = "ConvM1"
    ConvM2 = "ConvM2"
    ConvM3 = "ConvM3"
    ConvM4 = "ConvM4"
    ConvM5 = "ConvM5"
    ConvM6 = "ConvM6"


@dataclass(frozen=True)
class Layer:
    """One row of an encoder or decoder table.

    ``kind`` is ``conv``, ``convT`` (transposed, 2x upsampling), ``maxpool``
    or ``upsample``. ``filters=None`` stands for "image channels".
    """

    name: str
    kind: str
    filters: int | None = None
    kernel: int = 3
    stride: int = 1

    @property
    def scale(self) -> int:
        """Spatial down- (>1) or up-sampling (<0 encoded as -2) factor."""
        if self.kind == "maxpool" or (self.kind == "conv" and self.stride == 2):
            return 2
        if self.kind in ("upsample", "convT"):
            return -2
        return 1


def _c(name, filters, kernel, stride=1):
    return Layer(name, "conv", filters, kernel, stride)


def _pool():
    return Layer("MaxPool", "maxpool", None, 2, 2)


def _up():
    return Layer("Upsampling", "upsample", None, 2, 1)


ENCODERS: dict[str, tuple[Layer, ...]] = {
    "ConvM1": (_c("ConvE1", 32, 3, 2), _c("ConvE2", 64, 3, 2), _c("ConvE3", 64, 3, 2),
               _c("ConvE4", 64, 3, 2), _c("ConvE5", 64, 3, 2)),
    "ConvM2": (_c("ConvE1", 32, 4, 2), _c("ConvE2", 32, 4, 2), _c("ConvE3", 32, 3),
               _c("ConvE4", 64, 4, 2), _c("ConvE5", 64, 3), _c("ConvE6", 128, 4, 2),
               _c("ConvE7", 64, 3), _c("ConvE8", 32, 3), _c("ConvE8", 1, 8)),
    "ConvM3": (_c("ConvE1", 32, 3, 2), _c("ConvE2", 64, 3, 2)),
    "ConvM4": (_c("ConvE1", 8, 5), _pool(), _c("ConvE2", 4, 3), _pool()),
    "ConvM5": (_c("ConvE1", 16, 3), _pool(), _c("ConvE2", 8, 3), _pool(), _c("ConvE3", 4, 3), _pool()),
}

DECODERS: dict[str, tuple[Layer, ...]] = {
    "ConvM1": tuple(Layer(f"ConvT{i + 1}", "convT", f, 3, 2)
                    for i, f in enumerate((64, 64, 64, 32, None))),
    "ConvM2": (_c("ConvD1", 16, 3), _c("ConvD2", 64, 3), _up(), _c("ConvD3", 128, 4), _up(),
               _c("ConvD4", 64, 3), _up(), _c("ConvD5", 64, 4), _up(), _c("ConvD6", 32, 3), _up(),
               _c("ConvD7", 32, 4), _up(), _c("ConvD8", 32, 4), _up(), _c("ConvD8", None, 8)),
    "ConvM3": (_c("ConvD1", 64, 3), _c("ConvD2", 32, 3), _up(), _c("ConvD3", None, 3)),
    "ConvM4": (_c("ConvD1", 4, 3), _up(), _c("ConvD2", 8, 3), _up(), _c("ConvD3", None, 3)),
    "ConvM5": (_c("ConvD1", 4, 3), _up(), _c("ConvD2", 8, 3), _up(), _c("ConvD3", 16, 3), _up(),
               _c("ConvD4", None, 3)),
}

# ConvM6: ConvM5 encoder with the ConvM4 decoder.
PAIR_TABLES: dict[str, tuple[str, str]] = {
    "ConvM1": ("ConvM1", "ConvM1"),
    "ConvM2": ("ConvM2", "ConvM2"),
    "ConvM3": ("ConvM3", "ConvM3"),
    "ConvM4": ("ConvM4", "ConvM4"),
    "ConvM5": ("ConvM5", "ConvM5"),
    "ConvM6": ("ConvM5", "ConvM4"),
}

DEFAULT_LATENT: dict[str, dict[str, int]] = {
    "BAE1": {},
    "BAE2": {"fc_width": 256},
    "VAE1": {"latent_channels": 16},
    "VAE2": {"fc_width": 256, "latent_channels": 16},
    "VQVAE1": {"codebook_size": 512, "embedding_dim": 64},
}


def downsampling_factor(layers: tuple[Layer, ...]) -> int:
    return math.prod(layer.scale for layer in layers if layer.scale > 1)


def _n_up(layers: list[Layer]) -> int:
    return sum(1 for layer in layers if layer.scale < 0)


def resolve_decoder(decoder: tuple[Layer, ...], factor: int) -> tuple[Layer, ...]:
    """Adjust a decoder so its upsampling exactly undoes ``factor``."""
    needed = int(round(math.log2(factor)))
    layers = list(decoder)
    surplus = _n_up(layers) - needed
    while surplus > 0:
        idx = next(i for i, layer in enumerate(layers) if layer.kind == "upsample")
        del layers[idx]
        surplus -= 1
    missing = needed - _n_up(layers)
    i = 0
    while missing > 0 and i < len(layers) - 1:
        layer, nxt = layers[i], layers[i + 1]
        if layer.kind == "conv" and nxt.scale >= 0:
            layers.insert(i + 1, _up())
            missing -= 1
        i += 1
    layers[:0] = [_up()] * missing
    if _n_up(layers) != needed:
        raise ShapeError(f"decoder cannot be reconciled with a {factor}x encoder")
    return tuple(layers)


@dataclass(frozen=True)
class ModelSpec:
    core: Core
    conv_pair: ConvPair
    input_shape: tuple[int, int, int]
    latent_config: Mapping[str, int] = field(default_factory=dict)
    encoder: tuple[Layer, ...] = ()
    decoder: tuple[Layer, ...] = ()

    @property
    def name(self) -> str:
        return f"{self.conv_pair.value}-{self.core.value}"

    @property
    def activation(self) -> str:
        return "leaky_relu" if self.conv_pair is ConvPair.ConvM1 else "relu"

    @property
    def factor(self) -> int:
        return downsampling_factor(self.encoder)

    @property
    def channels(self) -> int:
        return self.input_shape[2]

    def encoded_shape(self) -> tuple[int, int, int]:
        """(height, width, channels) of the conv encoder output."""
        h, w, _ = self.input_shape
        filters = [layer.filters for layer in self.encoder if layer.kind == "conv"]
        return h // self.factor, w // self.factor, filters[-1]

    def decoder_input_channels(self) -> int:
        cfg = self.latent_config
        if self.core in (Core.VAE1, Core.VAE2):
            return cfg["latent_channels"]
        if self.core is Core.VQVAE1:
            return cfg["embedding_dim"]
        return self.encoded_shape()[2]

    def layer_shapes(self) -> list[tuple[str, str, tuple[int, int, int]]]:
        """Per-layer (section, layer name, output HxWxC) for encoder and decoder."""
        h, w, c = self.input_shape
        rows = []
        for layer in self.encoder:
            if layer.scale > 1:
                h, w = h // 2, w // 2
            if layer.kind == "conv":
                c = layer.filters
            rows.append(("encoder", layer.name, (h, w, c)))
        c = self.decoder_input_channels()
        for layer in self.decoder:
            if layer.scale < 0:
                h, w = h * 2, w * 2
            if layer.kind in ("conv", "convT"):
                c = layer.filters if layer.filters is not None else self.channels
            rows.append(("decoder", layer.name, (h, w, c)))
        return rows

    def layer_table(self) -> str:
        """Text dump in the layout of the published architecture tables."""
        lines = [f"{self.name}  input {self.input_shape}  latent {dict(self.latent_config)}",
                 f"{'Part':<8} {'Layer name':<11} {'Filters':>14} {'Kernel':>7} {'Stride':>6}  Output"]
        shapes = iter(self.layer_shapes())
        for part, layers in (("encoder", self.encoder), ("decoder", self.decoder)):
            for layer in layers:
                _, _, shape = next(shapes)
                if layer.kind in ("maxpool", "upsample"):
                    filters, stride = "-", "-"
                else:
                    filters = "Image channels" if layer.filters is None else str(layer.filters)
                    stride = str(layer.stride)
                kernel = f"{layer.kernel}x{layer.kernel}"
                lines.append(f"{part:<8} {layer.name:<11} {filters:>14} {kernel:>7} {stride:>6}  {shape}")
        return "\n".join(lines)


def _enum(cls, value, what):
    try:
        return value if isinstance(value, cls) else cls(value)
    except ValueError:
        raise DomainError(f"unknown {what} {value!r}; expected one of {[m.value for m in cls]}") from None


def build_model(core: Core | str, conv_pair: ConvPair | str, input_shape: tuple[int, int, int],
                latent_config: Mapping[str, int] | None = None) -> ModelSpec:
    """Resolve a (core, conv pair) combination into a full layer specification."""
    core = _enum(Core, core, "autoencoder core")
    conv_pair = _enum(ConvPair, conv_pair, "convolutional pair")
    if len(input_shape) == 2:
        input_shape = (*input_shape, 1)
    h, w, c = (int(v) for v in input_shape)
    if c not in (1, 3) or h < 1 or w < 1:
        raise ShapeError(f"input shape must be HxWx1 or HxWx3, got {input_shape}")
    enc_name, dec_name = PAIR_TABLES[conv_pair.value]
    encoder = ENCODERS[enc_name]
    factor = downsampling_factor(encoder)
    if h % factor or w % factor:
        raise ShapeError(f"{conv_pair.value} needs height and width divisible by {factor}, got {h}x{w}")
    latent = dict(DEFAULT_LATENT[core.value])
    latent.update(latent_config or {})
    for key, value in latent.items():
        if int(value) < 1:
            raise DomainError(f"latent setting {key} must be positive, got {value}")
    decoder = resolve_decoder(DECODERS[dec_name], factor)
    return ModelSpec(core, conv_pair, (h, w, c), latent, encoder, decoder)


ALL_CORES = tuple(Core)
ALL_PAIRS = tuple(ConvPair)
