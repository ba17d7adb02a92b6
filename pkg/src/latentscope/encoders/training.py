"""Training loops, losses, and latent extraction."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import AdamState, Tape, Tensor, adam_step, ops
from ..ingest import SegmentSet
from ..ingest.preprocess import resample_to_length
from .config import EncoderConfig
from .models import (
    TrainedModel,
    build_model,
    forward_tft,
    forward_vae_conv_decode,
    forward_vae_conv_encode,
    forward_vae_lstm_decode,
    forward_vae_lstm_encode,
)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainReport:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_recon: list[float] = field(default_factory=list)
    epoch_kl: list[float] = field(default_factory=list)
    wall_time_s: float = 0.0
    epochs_completed: int = 0

    def to_dict(self) -> dict:
        return {
            "epoch_loss": self.epoch_loss,
            "epoch_recon": self.epoch_recon,
            "epoch_kl": self.epoch_kl,
            "wall_time_s": self.wall_time_s,
            "epochs_completed": self.epochs_completed,
        }


@dataclass
class LatentMatrix:
    segment_ids: list[str]
    vectors: np.ndarray  # (n, latent_dim)
    config: EncoderConfig

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.segment_ids):
            raise ValueError("latent rows != segment ids")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite latent values")

    @property
    def latent_dim(self) -> int:
        return self.vectors.shape[1]


def _clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> None:
    """Scale all gradients so their joint L2 norm stays under max_norm.

    Keeps the long-unroll recurrent models stable under the summed
    reconstruction objective.
    """
    if max_norm <= 0:
        return
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm:
        scale = max_norm / total
        for name in grads:
            grads[name] = grads[name] * scale


def reparameterize(mu: Tensor, logvar: Tensor, noise: Tensor) -> Tensor:
    """z = mu + exp(logvar / 2) * noise, differentiable in mu and logvar."""
    if mu.shape != logvar.shape or mu.shape != noise.shape:
        raise ValueError(
            f"reparameterize: shapes differ {mu.shape}/{logvar.shape}/{noise.shape}"
        )
    sigma = ops.exp(ops.mul(logvar, Tensor(0.5)))
    return ops.add(mu, ops.mul(sigma, noise))


def vae_loss(recon: Tensor, x: Tensor, mu: Tensor, logvar: Tensor, beta: float):
    """Batch-mean of per-sample [summed squared error + beta * KL].

    KL is the closed-form divergence from N(mu, sigma^2) to N(0, 1):
    -0.5 * sum(1 + logvar - mu^2 - exp(logvar)) per sample.
    Returns (loss tensor, recon value, kl value).
    """
    if recon.shape != x.shape:
        raise ValueError(f"vae_loss: recon {recon.shape} != input {x.shape}")
    if not (np.all(np.isfinite(x.data)) and np.all(np.isfinite(logvar.data))):
        raise ValueError("vae_loss: non-finite inputs")
    b = x.shape[0]
    diff = ops.sub(recon, x)
    recon_term = ops.mul(ops.sum_all(ops.mul(diff, diff)), Tensor(1.0 / b))
    inner = ops.sub(
        ops.sub(ops.add(Tensor(1.0), logvar), ops.mul(mu, mu)), ops.exp(logvar)
    )
    kl_term = ops.mul(ops.sum_all(inner), Tensor(-0.5 / b))
    loss = ops.add(recon_term, ops.mul(kl_term, Tensor(beta)))
    return loss, float(recon_term.data), float(kl_term.data)


def reconstruction_loss(recon: Tensor, x: Tensor):
    """Batch-mean per-sample summed squared error (transformer objective)."""
    b = x.shape[0]
    diff = ops.sub(recon, x)
    return ops.mul(ops.sum_all(ops.mul(diff, diff)), Tensor(1.0 / b))


def prepare_inputs(segment_set: SegmentSet, model_input_len: int) -> np.ndarray:
    """Segments as (n, T_model, channels), linearly resampled as needed."""
    data = segment_set.stacked()  # (n, C, L)
    if data.shape[2] != model_input_len:
        data = np.stack([resample_to_length(seg, model_input_len) for seg in data])
    return np.ascontiguousarray(data.transpose(0, 2, 1))


def _forward_loss(model: TrainedModel, x: Tensor, noise: np.ndarray | None):
    cfg = model.config
    if cfg.kind == "tft":
        _, recon = forward_tft(model, x, with_recon=True)
        loss = reconstruction_loss(recon, x)
        return loss, float(loss.data), 0.0
    if cfg.kind == "vae_conv":
        mu, logvar = forward_vae_conv_encode(model, x)
    else:
        mu, logvar = forward_vae_lstm_encode(model, x)
    z = reparameterize(mu, logvar, Tensor(noise))
    if cfg.kind == "vae_conv":
        recon = forward_vae_conv_decode(model, z)
    else:
        recon = forward_vae_lstm_decode(model, z, x.shape[1])
    loss, recon_val, kl_val = vae_loss(recon, x, mu, logvar, cfg.kl_weight)
    if kl_val < -1e-9:
        raise TrainingError(f"negative KL component: {kl_val}")
    return loss, recon_val, kl_val


def train(
    model: TrainedModel, segment_set: SegmentSet, config: EncoderConfig | None = None
) -> tuple[TrainedModel, TrainReport]:
    """Adam training over seeded shuffled mini-batches.

    Deterministic for a given seed: the permutation stream and the VAE
    noise stream both come from one generator seeded by the config.
    """
    cfg = config or model.config
    if len(segment_set) == 0:
        raise TrainingError("empty segment set")
    if cfg.lr is None or cfg.model_input_len is None:
        cfg = cfg.resolve(segment_set.seg_len)
    if segment_set.n_channels != model.channels:
        raise TrainingError(
            f"channel mismatch: dataset has {segment_set.n_channels}, "
            f"model expects {model.channels}"
        )
    inputs = prepare_inputs(segment_set, cfg.model_input_len)
    n = inputs.shape[0]
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr)
    report = TrainReport()
    t0 = time.perf_counter()

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        totals = np.zeros(3)
        for start in range(0, n, cfg.batch_size):
            batch_idx = perm[start : start + cfg.batch_size]
            xb = Tensor(inputs[batch_idx])
            noise = None
            if cfg.kind != "tft":
                noise = rng.standard_normal((len(batch_idx), cfg.latent_dim))
            with Tape() as tape:
                loss, recon_val, kl_val = _forward_loss(model, xb, noise)
            if not np.isfinite(loss.data):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {start // cfg.batch_size}"
                )
            tape.backward(loss)
            grads = {}
            for name, p in model.params.items():
                grads[name] = p.grad if p.grad is not None else np.zeros_like(p.data)
                p.zero_grad()
            _clip_global_norm(grads, cfg.grad_clip_norm)
            adam_step(model.params, grads, state)
            totals += np.array([float(loss.data), recon_val, kl_val]) * len(batch_idx)
        report.epoch_loss.append(totals[0] / n)
        report.epoch_recon.append(totals[1] / n)
        report.epoch_kl.append(totals[2] / n)
        report.epochs_completed += 1

    report.wall_time_s = time.perf_counter() - t0
    return model, report


def train_new(
    config: EncoderConfig, segment_set: SegmentSet, dataset_fingerprint: str = ""
) -> tuple[TrainedModel, TrainReport]:
    """Resolve the config against the dataset, build, and train."""
    cfg = config.resolve(segment_set.seg_len)
    model = build_model(cfg, segment_set.n_channels)
    model.dataset_fingerprint = dataset_fingerprint
    return train(model, segment_set, cfg)


def extract_latents(model: TrainedModel, segment_set: SegmentSet,
                    batch_size: int = 256) -> LatentMatrix:
    """Deterministic embeddings: VAEs emit mu, the transformer its pooled head."""
    if segment_set.n_channels != model.channels:
        raise TrainingError(
            f"channel mismatch: dataset has {segment_set.n_channels}, "
            f"model expects {model.channels}"
        )
    inputs = prepare_inputs(segment_set, model.config.model_input_len)
    rows = []
    for start in range(0, inputs.shape[0], batch_size):
        xb = Tensor(inputs[start : start + batch_size])
        if model.config.kind == "tft":
            z, _ = forward_tft(model, xb, with_recon=False)
        elif model.config.kind == "vae_conv":
            z, _ = forward_vae_conv_encode(model, xb)
        else:
            z, _ = forward_vae_lstm_encode(model, xb)
        rows.append(z.data)
    vectors = np.concatenate(rows, axis=0) if rows else np.zeros((0, model.config.latent_dim))
    return LatentMatrix(
        segment_ids=segment_set.segment_ids, vectors=vectors, config=model.config
    )
