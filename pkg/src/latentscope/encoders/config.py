"""Encoder configuration and validation."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

KINDS = ("tft", "vae_conv", "vae_lstm")

#: Attention window for the transformer encoder.  The transformer
#: resamples any segment into this bounded window (quadratic attention
#: cost); the shape-bound VAEs default to the native segment grid, which
#: is what their architectures are sized to.
TFT_DEFAULT_WINDOW = 128
VAE_LSTM_MAX_LEN = 1024


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    kind: str
    latent_dim: int = 8
    model_input_len: Optional[int] = None  # None -> kind default at resolve()
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    conv_kernels: tuple[int, ...] = (7, 5, 3)
    conv_strides: tuple[int, ...] = (4, 4, 2)
    conv_channels: tuple[int, ...] = (192, 256, 256)
    lr: Optional[float] = None  # None -> kind default at resolve()
    epochs: int = 50
    batch_size: int = 32
    kl_weight: float = 1.0
    grad_clip_norm: float = 10.0  # 0 disables clipping
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown encoder kind {self.kind!r}")
        if self.latent_dim < 1:
            raise ConfigError(f"latent_dim must be >= 1, got {self.latent_dim}")
        if self.model_input_len is not None and self.model_input_len < 8:
            raise ConfigError(
                f"model_input_len must be >= 8, got {self.model_input_len}"
            )
        if self.lr is not None and self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.kl_weight < 0:
            raise ConfigError("kl_weight must be >= 0")
        if self.kind == "tft" and self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model {self.d_model} not divisible by n_heads {self.n_heads}"
            )
        if self.kind == "vae_lstm" and self.d_model % 2 != 0:
            raise ConfigError("vae_lstm needs an even d_model (split per direction)")
        if self.kind == "vae_conv":
            if not (
                len(self.conv_kernels) == len(self.conv_strides) == len(self.conv_channels)
            ):
                raise ConfigError("conv kernels/strides/channels lengths differ")

    def resolve(self, native_len: int) -> "EncoderConfig":
        """Pin model_input_len and lr for a dataset's native segment length.

        The transformer resamples into its bounded attention window; the
        shape-bound VAEs take the native grid (the recurrent one capped,
        and trained at a lower rate: its wide flattened heads are
        unstable under Adam at 1e-3).
        """
        cfg = self
        if cfg.model_input_len is None:
            if cfg.kind == "tft":
                length = min(TFT_DEFAULT_WINDOW, native_len)
            elif cfg.kind == "vae_lstm":
                length = min(VAE_LSTM_MAX_LEN, native_len)
            else:
                length = native_len
            cfg = replace(cfg, model_input_len=max(8, length))
        if cfg.lr is None:
            cfg = replace(cfg, lr=1e-4 if cfg.kind == "vae_lstm" else 1e-3)
        return cfg

    def conv_layer_lengths(self) -> list[int]:
        """Sequence lengths through the conv stack, input first."""
        if self.model_input_len is None:
            raise ConfigError("resolve() the config before sizing the conv stack")
        lengths = [self.model_input_len]
        for k, s in zip(self.conv_kernels, self.conv_strides):
            prev = lengths[-1]
            if prev < k:
                raise ConfigError(
                    f"conv stack collapses: length {prev} < kernel {k}"
                )
            lengths.append((prev - k) // s + 1)
        if lengths[-1] < 1:
            raise ConfigError("conv stack collapses below length 1")
        return lengths

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "latent_dim": self.latent_dim,
            "model_input_len": self.model_input_len,
            "d_model": self.d_model,
            "n_layers": self.n_layers,
            "n_heads": self.n_heads,
            "conv_kernels": list(self.conv_kernels),
            "conv_strides": list(self.conv_strides),
            "conv_channels": list(self.conv_channels),
            "lr": self.lr,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "kl_weight": self.kl_weight,
            "grad_clip_norm": self.grad_clip_norm,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderConfig":
        kwargs = dict(d)
        for key in ("conv_kernels", "conv_strides", "conv_channels"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        known = {f.name for f in cls.__dataclass_fields__.values()}
        kwargs = {k: v for k, v in kwargs.items() if k in known}
        return cls(**kwargs)
