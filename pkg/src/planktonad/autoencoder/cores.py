"""PyTorch modules for the five autoencoder cores and their training losses."""

from __future__ import annotations

import math
import warnings

import torch
import torch.nn.functional as F
from torch import nn

from planktonad.autoencoder.architectures import Core, Layer, ModelSpec
from planktonad.errors import NumericError, ShapeError

COMMITMENT_BETA = 0.25

warnings.filterwarnings("ignore", message="Using padding='same' with even kernel")


def _activation(kind: str) -> nn.Module:
    return nn.LeakyReLU(0.2) if kind == "leaky_relu" else nn.ReLU()


def _conv(layer: Layer, in_ch: int, out_ch: int) -> nn.Module:
    if layer.kind == "convT":
        pad = (layer.kernel - 1) // 2
        return nn.ConvTranspose2d(in_ch, out_ch, layer.kernel, stride=2, padding=pad, output_padding=1)
    if layer.stride == 1:
        return nn.Conv2d(in_ch, out_ch, layer.kernel, padding="same")
    return nn.Conv2d(in_ch, out_ch, layer.kernel, stride=layer.stride, padding=(layer.kernel - 1) // 2)


def make_stack(layers: tuple[Layer, ...], in_ch: int, out_ch: int, activation: str,
               final_output: bool) -> tuple[nn.Sequential, int]:
    """Build a conv stack; every conv gets batch norm + activation except the
    last one when ``final_output`` is set (the image-producing layer)."""
    modules: list[nn.Module] = []
    conv_idx = [i for i, layer in enumerate(layers) if layer.kind in ("conv", "convT")]
    ch = in_ch
    for i, layer in enumerate(layers):
        if layer.kind == "maxpool":
            modules.append(nn.MaxPool2d(2))
        elif layer.kind == "upsample":
            modules.append(nn.Upsample(scale_factor=2, mode="nearest"))
        else:
            filters = out_ch if layer.filters is None else layer.filters
            modules.append(_conv(layer, ch, filters))
            ch = filters
            if not (final_output and i == conv_idx[-1]):
                modules += [nn.BatchNorm2d(ch), _activation(activation)]
    return nn.Sequential(*modules), ch


class VectorQuantizer(nn.Module):
    """Nearest-neighbour codebook lookup with a straight-through gradient."""

    def __init__(self, codebook_size: int, embedding_dim: int):
        super().__init__()
        self.codebook = nn.Embedding(codebook_size, embedding_dim)
        self.codebook.weight.data.uniform_(-1.0 / codebook_size, 1.0 / codebook_size)

    def forward(self, z_e: torch.Tensor):
        b, d, h, w = z_e.shape
        flat = z_e.permute(0, 2, 3, 1).reshape(-1, d)
        weight = self.codebook.weight
        dist = (flat.pow(2).sum(1, keepdim=True) - 2 * flat @ weight.t() + weight.pow(2).sum(1)[None, :])
        indices = dist.argmin(1)
        z_q = weight[indices].view(b, h, w, d).permute(0, 3, 1, 2)
        return z_q, indices.view(b, h, w)


class AutoEncoder(nn.Module):
    """Conv encoder -> core bottleneck -> conv decoder -> sigmoid.

    ``forward`` returns a dict with ``recon`` and the core's latent terms:
    ``mu``/``logvar`` (VAE cores) or ``z_e``/``z_q``/``indices`` (VQVAE1).
    VAE cores sample only in training mode unless ``sample_latent`` is set.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__()
        self.spec = spec
        self.sample_latent = False
        core, cfg, act = spec.core, spec.latent_config, spec.activation
        self.encoder, enc_ch = make_stack(spec.encoder, spec.channels, spec.channels, act, final_output=False)
        h, w, _ = spec.encoded_shape()
        self._enc_hw = (h, w)
        flat = enc_ch * h * w
        dec_in = spec.decoder_input_channels()

        if core is Core.BAE2:
            self.fc_in = nn.Linear(flat, cfg["fc_width"])
            self.fc_out = nn.Sequential(nn.Linear(cfg["fc_width"], flat), _activation(act))
        elif core is Core.VAE1:
            self.mu_head = nn.Conv2d(enc_ch, cfg["latent_channels"], 1)
            self.logvar_head = nn.Conv2d(enc_ch, cfg["latent_channels"], 1)
        elif core is Core.VAE2:
            self.mu_head = nn.Linear(flat, cfg["fc_width"])
            self.logvar_head = nn.Linear(flat, cfg["fc_width"])
            self.fc_out = nn.Sequential(nn.Linear(cfg["fc_width"], cfg["latent_channels"] * h * w),
                                        _activation(act))
        elif core is Core.VQVAE1:
            self.pre_quant = nn.Conv2d(enc_ch, cfg["embedding_dim"], 1)
            self.quantizer = VectorQuantizer(cfg["codebook_size"], cfg["embedding_dim"])
        self.decoder, _ = make_stack(spec.decoder, dec_in, spec.channels, act, final_output=True)

    def _check(self, x: torch.Tensor) -> None:
        h, w, c = self.spec.input_shape
        if tuple(x.shape[1:]) != (c, h, w):
            raise ShapeError(f"expected input of shape (N, {c}, {h}, {w}), got {tuple(x.shape)}")

    def _sample(self, mu, logvar):
        if self.training or self.sample_latent:
            return mu + torch.randn_like(mu) * torch.exp(0.5 * logvar)
        return mu

    def forward(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        self._check(x)
        core = self.spec.core
        e = self.encoder(x)
        out: dict[str, torch.Tensor] = {}
        h, w = self._enc_hw
        if core is Core.BAE1:
            d = e
        elif core is Core.BAE2:
            out["z"] = self.fc_in(e.flatten(1))
            d = self.fc_out(out["z"]).view_as(e)
        elif core is Core.VAE1:
            out["mu"], out["logvar"] = self.mu_head(e), self.logvar_head(e)
            d = self._sample(out["mu"], out["logvar"])
        elif core is Core.VAE2:
            out["mu"], out["logvar"] = self.mu_head(e.flatten(1)), self.logvar_head(e.flatten(1))
            z = self._sample(out["mu"], out["logvar"])
            d = self.fc_out(z).view(e.shape[0], -1, h, w)
        else:
            z_e = self.pre_quant(e)
            z_q, indices = self.quantizer(z_e)
            out.update(z_e=z_e, z_q=z_q, indices=indices)
            d = z_e + (z_q - z_e).detach()
        out["recon"] = torch.sigmoid(self.decoder(d))
        return out

    @torch.no_grad()
    def encode(self, x: torch.Tensor) -> dict[str, torch.Tensor]:
        """Bottleneck activation (posterior mean for VAE cores)."""
        self._check(x)
        core = self.spec.core
        e = self.encoder(x)
        if core is Core.BAE1:
            return {"latent": e}
        if core is Core.BAE2:
            return {"latent": self.fc_in(e.flatten(1))}
        if core is Core.VAE1:
            return {"latent": self.mu_head(e)}
        if core is Core.VAE2:
            return {"latent": self.mu_head(e.flatten(1))}
        z_q, indices = self.quantizer(self.pre_quant(e))
        return {"latent": z_q, "indices": indices}


def kl_divergence(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """KL(N(mu, exp(logvar)) || N(0, 1)) summed per sample, averaged over the batch."""
    per_elem = 0.5 * (mu.pow(2) + logvar.exp() - 1.0 - logvar)
    return per_elem.flatten(1).sum(1).mean()


def compute_loss(core: Core | str, inputs: torch.Tensor, targets: torch.Tensor,
                 outputs: dict[str, torch.Tensor]) -> tuple[torch.Tensor, dict[str, float]]:
    """Total training loss and its named components.

    The KL term is divided by the number of elements of one input so that it
    lives on the same per-pixel scale as the reconstruction MSE.
    """
    core = Core(core)
    recon = outputs["recon"]
    if recon.shape != targets.shape:
        raise ShapeError(f"reconstruction {tuple(recon.shape)} does not match target {tuple(targets.shape)}")
    mse = F.mse_loss(recon, targets)
    parts = {"reconstruction": mse}
    if core in (Core.VAE1, Core.VAE2):
        per_input = math.prod(inputs.shape[1:])
        parts["kl"] = kl_divergence(outputs["mu"], outputs["logvar"]) / per_input
    elif core is Core.VQVAE1:
        z_e, z_q = outputs["z_e"], outputs["z_q"]
        parts["codebook"] = F.mse_loss(z_q, z_e.detach())
        parts["commitment"] = COMMITMENT_BETA * F.mse_loss(z_e, z_q.detach())
    total = sum(parts.values())
    if not torch.isfinite(total):
        raise NumericError(f"non-finite loss: { {k: float(v) for k, v in parts.items()} }")
    return total, {k: float(v.detach()) for k, v in parts.items()}
