"""The three encoder families and their forward passes.

All models consume batches shaped (batch, time, channels) and produce a
latent matrix row per sample.  Training-time forwards also produce a
full-sequence reconstruction:

* tft: linear input projection + sinusoidal positions + pre-LN
  transformer blocks + mean pooling over time + linear latent head; the
  reconstruction head maps the pooled latent back to every time step
  through a per-position linear map.
* vae_conv: strided conv stack -> mu/logvar heads -> reparameterized
  sample -> linear seed -> mirrored transposed-conv stack.
* vae_lstm: bidirectional recurrence (hidden d_model/2 per direction),
  flattened sequence outputs -> mu/logvar -> linear seed repeated as
  decoder input -> unidirectional recurrence -> per-step channel head.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..autodiff import Tensor, ops
from .config import ConfigError, EncoderConfig


@dataclass
class TrainedModel:
    config: EncoderConfig
    params: dict[str, Tensor]
    channels: int
    dataset_fingerprint: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def input_shape(self) -> tuple[int, int]:
        return (self.channels, self.config.model_input_len)

    def parameters(self) -> dict[str, Tensor]:
        return self.params


def _uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(1, fan_in))
    return rng.uniform(-bound, bound, size=shape)


def _param(params, rng, name, shape, fan_in):
    params[name] = Tensor(_uniform(rng, shape, fan_in), requires_grad=True)


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    """Fixed sinusoidal position table of shape (t, d)."""
    pos = np.arange(t)[:, None].astype(np.float64)
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    table = np.zeros((t, d))
    table[:, 0::2] = np.sin(angle[:, 0::2])
    table[:, 1::2] = np.cos(angle[:, 1::2])
    return table


def build_model(config: EncoderConfig, channels: int) -> TrainedModel:
    """Initialize parameters for the configured encoder kind.

    Weights use seeded uniform fan-in scaling; LSTM forget-gate biases
    start at 1.
    """
    if config.model_input_len is None:
        raise ConfigError("resolve() the config against a dataset first")
    if channels < 1:
        raise ConfigError("channels must be >= 1")
    rng = np.random.default_rng(config.seed)
    t, d, dim = config.model_input_len, config.d_model, config.latent_dim
    params: dict[str, Tensor] = {}
    extras: dict = {}

    if config.kind == "tft":
        _param(params, rng, "embed.w", (channels, d), channels)
        _param(params, rng, "embed.b", (d,), channels)
        for i in range(config.n_layers):
            for side in ("ln1", "ln2"):
                params[f"layer{i}.{side}.gamma"] = Tensor(np.ones(d), requires_grad=True)
                params[f"layer{i}.{side}.beta"] = Tensor(np.zeros(d), requires_grad=True)
            for w in ("wq", "wk", "wv", "wo"):
                _param(params, rng, f"layer{i}.attn.{w}", (d, d), d)
            _param(params, rng, f"layer{i}.ffn.w1", (d, 4 * d), d)
            _param(params, rng, f"layer{i}.ffn.b1", (4 * d,), d)
            _param(params, rng, f"layer{i}.ffn.w2", (4 * d, d), 4 * d)
            _param(params, rng, f"layer{i}.ffn.b2", (d,), 4 * d)
        _param(params, rng, "latent.w", (d, dim), d)
        _param(params, rng, "latent.b", (dim,), d)
        _param(params, rng, "recon.w", (dim, t * channels), dim)
        _param(params, rng, "recon.b", (t * channels,), dim)
        extras["posenc"] = Tensor(sinusoidal_positions(t, d))

    elif config.kind == "vae_conv":
        lengths = config.conv_layer_lengths()
        chans = [channels, *config.conv_channels]
        flat = chans[-1] * lengths[-1]
        if dim > flat:
            raise ConfigError(
                f"latent_dim {dim} exceeds flattened encoder width {flat}"
            )
        for i, (k, _s) in enumerate(zip(config.conv_kernels, config.conv_strides)):
            _param(params, rng, f"enc{i}.w", (chans[i + 1], chans[i], k), chans[i] * k)
            params[f"enc{i}.b"] = Tensor(np.zeros((chans[i + 1], 1)), requires_grad=True)
        _param(params, rng, "mu.w", (flat, dim), flat)
        _param(params, rng, "mu.b", (dim,), flat)
        _param(params, rng, "logvar.w", (flat, dim), flat)
        params["logvar.b"] = Tensor(np.zeros(dim), requires_grad=True)
        _param(params, rng, "seed.w", (dim, flat), dim)
        _param(params, rng, "seed.b", (flat,), dim)
        n_conv = len(config.conv_kernels)
        for j in range(n_conv):
            i = n_conv - 1 - j  # mirror of encoder layer i
            k = config.conv_kernels[i]
            _param(
                params, rng, f"dec{j}.w",
                (chans[i + 1], chans[i], k), chans[i + 1] * k,
            )
            params[f"dec{j}.b"] = Tensor(np.zeros((chans[i], 1)), requires_grad=True)
        extras["conv_lengths"] = lengths

    else:  # vae_lstm
        h = d // 2
        flat = t * d  # bidirectional outputs, 2h per step
        if dim > flat:
            raise ConfigError(
                f"latent_dim {dim} exceeds flattened encoder width {flat}"
            )
        for direction in ("fwd", "bwd"):
            _param(params, rng, f"{direction}.w_ih", (channels, 4 * h), channels)
            _param(params, rng, f"{direction}.w_hh", (h, 4 * h), h)
            bias = np.zeros(4 * h)
            bias[h : 2 * h] = 1.0  # forget gate starts open
            params[f"{direction}.b"] = Tensor(bias, requires_grad=True)
        _param(params, rng, "mu.w", (flat, dim), flat)
        _param(params, rng, "mu.b", (dim,), flat)
        _param(params, rng, "logvar.w", (flat, dim), flat)
        params["logvar.b"] = Tensor(np.zeros(dim), requires_grad=True)
        _param(params, rng, "seed.w", (dim, d), dim)
        _param(params, rng, "seed.b", (d,), dim)
        _param(params, rng, "dec.w_ih", (d, 4 * d), d)
        _param(params, rng, "dec.w_hh", (d, 4 * d), d)
        dec_bias = np.zeros(4 * d)
        dec_bias[d : 2 * d] = 1.0
        params["dec.b"] = Tensor(dec_bias, requires_grad=True)
        _param(params, rng, "out.w", (d, channels), d)
        _param(params, rng, "out.b", (channels,), d)

    return TrainedModel(config=config, params=params, channels=channels, extras=extras)


# ---------------------------------------------------------------------------
# forward passes
# ---------------------------------------------------------------------------

def _linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    return ops.add(ops.matmul(x, w), b)


def forward_tft(model: TrainedModel, x: Tensor, with_recon: bool):
    p = model.params
    cfg = model.config
    b, t, c = x.shape
    h = _linear(x, p["embed.w"], p["embed.b"])
    h = ops.add(h, model.extras["posenc"])
    for i in range(cfg.n_layers):
        normed = ops.layer_norm(h, p[f"layer{i}.ln1.gamma"], p[f"layer{i}.ln1.beta"])
        attn = ops.multi_head_attention(
            normed,
            p[f"layer{i}.attn.wq"],
            p[f"layer{i}.attn.wk"],
            p[f"layer{i}.attn.wv"],
            p[f"layer{i}.attn.wo"],
            n_heads=cfg.n_heads,
        )
        h = ops.add(h, attn)
        normed = ops.layer_norm(h, p[f"layer{i}.ln2.gamma"], p[f"layer{i}.ln2.beta"])
        ff = _linear(
            ops.relu(_linear(normed, p[f"layer{i}.ffn.w1"], p[f"layer{i}.ffn.b1"])),
            p[f"layer{i}.ffn.w2"],
            p[f"layer{i}.ffn.b2"],
        )
        h = ops.add(h, ff)
    pooled = ops.mean_pool_time(h)
    z = _linear(pooled, p["latent.w"], p["latent.b"])
    if not with_recon:
        return z, None
    recon = _linear(z, p["recon.w"], p["recon.b"])
    recon = ops.reshape(recon, (b, t, c))
    return z, recon


def forward_vae_conv_encode(model: TrainedModel, x: Tensor):
    p = model.params
    h = ops.transpose(x, (0, 2, 1))  # (B, C, T)
    for i in range(len(model.config.conv_kernels)):
        h = ops.conv1d(h, p[f"enc{i}.w"], stride=model.config.conv_strides[i])
        h = ops.relu(ops.add(h, p[f"enc{i}.b"]))
    b = h.shape[0]
    flat = ops.reshape(h, (b, h.shape[1] * h.shape[2]))
    mu = _linear(flat, p["mu.w"], p["mu.b"])
    logvar = _linear(flat, p["logvar.w"], p["logvar.b"])
    return mu, logvar


def forward_vae_conv_decode(model: TrainedModel, z: Tensor):
    p = model.params
    cfg = model.config
    lengths = model.extras["conv_lengths"]
    chans = [model.channels, *cfg.conv_channels]
    b = z.shape[0]
    h = ops.relu(_linear(z, p["seed.w"], p["seed.b"]))
    h = ops.reshape(h, (b, chans[-1], lengths[-1]))
    n_conv = len(cfg.conv_kernels)
    for j in range(n_conv):
        i = n_conv - 1 - j
        h = ops.conv1d_transpose(
            h, p[f"dec{j}.w"], stride=cfg.conv_strides[i], output_length=lengths[i]
        )
        h = ops.add(h, p[f"dec{j}.b"])
        if j < n_conv - 1:
            h = ops.relu(h)
    return ops.transpose(h, (0, 2, 1))  # back to (B, T, C)


def _run_lstm(x: Tensor, w_ih: Tensor, w_hh: Tensor, b: Tensor,
              reverse: bool) -> list[Tensor]:
    """Unrolled recurrence over (B, T, C); returns per-step h tensors."""
    bsz, t, _ = x.shape
    hidden = w_hh.shape[0]
    hc = Tensor(np.zeros((bsz, 2 * hidden)))
    outputs: list[Optional[Tensor]] = [None] * t
    steps = range(t - 1, -1, -1) if reverse else range(t)
    for step in steps:
        xt = ops.reshape(ops.slice_axis(x, 1, step, step + 1), (bsz, x.shape[2]))
        hc = ops.lstm_cell(xt, hc, w_ih, w_hh, b)
        outputs[step] = ops.slice_axis(hc, 1, 0, hidden)
    return outputs


def forward_vae_lstm_encode(model: TrainedModel, x: Tensor):
    p = model.params
    b, t, _ = x.shape
    fwd = _run_lstm(x, p["fwd.w_ih"], p["fwd.w_hh"], p["fwd.b"], reverse=False)
    bwd = _run_lstm(x, p["bwd.w_ih"], p["bwd.w_hh"], p["bwd.b"], reverse=True)
    steps = [
        ops.concat([f, w], axis=1) for f, w in zip(fwd, bwd)
    ]  # each (B, 2H)
    seq = ops.concat(steps, axis=1)  # (B, T*2H), step-major
    mu = _linear(seq, p["mu.w"], p["mu.b"])
    logvar = _linear(seq, p["logvar.w"], p["logvar.b"])
    return mu, logvar


def forward_vae_lstm_decode(model: TrainedModel, z: Tensor, t: int):
    p = model.params
    b = z.shape[0]
    d = model.config.d_model
    seed = ops.tanh(_linear(z, p["seed.w"], p["seed.b"]))
    hc = Tensor(np.zeros((b, 2 * d)))
    outs = []
    for _ in range(t):
        hc = ops.lstm_cell(seed, hc, p["dec.w_ih"], p["dec.w_hh"], p["dec.b"])
        h = ops.slice_axis(hc, 1, 0, d)
        step = _linear(h, p["out.w"], p["out.b"])  # (B, C)
        outs.append(ops.reshape(step, (b, 1, model.channels)))
    return ops.concat(outs, axis=1)  # (B, T, C)
