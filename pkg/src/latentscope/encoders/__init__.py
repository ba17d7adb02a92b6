"""Encoder families (transformer, conv VAE, LSTM VAE) and training."""

from .checkpoint import load_checkpoint, load_latents, save_checkpoint, save_latents
from .config import ConfigError, EncoderConfig, KINDS
from .models import TrainedModel, build_model, sinusoidal_positions
from .training import (
    LatentMatrix,
    TrainingError,
    TrainReport,
    extract_latents,
    prepare_inputs,
    reparameterize,
    train,
    train_new,
    vae_loss,
)

__all__ = [
    "ConfigError",
    "EncoderConfig",
    "KINDS",
    "LatentMatrix",
    "TrainedModel",
    "TrainingError",
    "TrainReport",
    "build_model",
    "extract_latents",
    "load_checkpoint",
    "load_latents",
    "prepare_inputs",
    "reparameterize",
    "save_checkpoint",
    "save_latents",
    "sinusoidal_positions",
    "train",
    "train_new",
    "vae_loss",
]
