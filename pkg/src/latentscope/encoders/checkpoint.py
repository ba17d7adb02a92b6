"""Checkpoint and latent-matrix file formats (little-endian float32)."""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..autodiff import Tensor
from .config import EncoderConfig
from .models import TrainedModel, build_model
from .training import LatentMatrix

PARAMS_NAME = "params.bin"
CONFIG_NAME = "config.json"
LATENTS_BIN = "latents.bin"
LATENTS_META = "latents.meta.json"


def save_checkpoint(model: TrainedModel, out_dir: Union[str, Path]) -> Path:
    """params.bin: repeated [u32 name_len][name][u32 ndim][u32 dims][f32 data]."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chunks = []
    for name in sorted(model.params):
        data = model.params[name].data.astype("<f4")
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", data.ndim))
        chunks.append(struct.pack(f"<{data.ndim}I", *data.shape))
        chunks.append(data.tobytes(order="C"))
    (out / PARAMS_NAME).write_bytes(b"".join(chunks))
    meta = {
        "config": model.config.to_dict(),
        "channels": model.channels,
        "dataset_fingerprint": model.dataset_fingerprint,
    }
    (out / CONFIG_NAME).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def load_checkpoint(ckpt_dir: Union[str, Path]) -> TrainedModel:
    root = Path(ckpt_dir)
    meta = json.loads((root / CONFIG_NAME).read_text(encoding="utf-8"))
    config = EncoderConfig.from_dict(meta["config"])
    model = build_model(config, meta["channels"])
    model.dataset_fingerprint = meta.get("dataset_fingerprint", "")

    blob = (root / PARAMS_NAME).read_bytes()
    offset = 0
    loaded: dict[str, np.ndarray] = {}
    while offset < len(blob):
        (name_len,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        name = blob[offset : offset + name_len].decode("utf-8")
        offset += name_len
        (ndim,) = struct.unpack_from("<I", blob, offset)
        offset += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, offset)
        offset += 4 * ndim
        count = int(np.prod(shape)) if ndim else 1
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        loaded[name] = data.reshape(shape).astype(np.float64)
    if set(loaded) != set(model.params):
        raise ValueError(
            f"checkpoint parameter names do not match the architecture: "
            f"{sorted(set(loaded) ^ set(model.params))}"
        )
    for name, arr in loaded.items():
        model.params[name] = Tensor(arr, requires_grad=True)
    return model


def save_latents(latents: LatentMatrix, out_dir: Union[str, Path],
                 config_hash: str = "") -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / LATENTS_BIN).write_bytes(latents.vectors.astype("<f4").tobytes(order="C"))
    meta = {
        "segment_ids": latents.segment_ids,
        "latent_dim": latents.latent_dim,
        "config": latents.config.to_dict(),
        "config_hash": config_hash,
    }
    (out / LATENTS_META).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def load_latents(latents_dir: Union[str, Path]) -> LatentMatrix:
    root = Path(latents_dir)
    meta = json.loads((root / LATENTS_META).read_text(encoding="utf-8"))
    ids = meta["segment_ids"]
    dim = meta["latent_dim"]
    raw = np.frombuffer((root / LATENTS_BIN).read_bytes(), dtype="<f4")
    vectors = raw.reshape(len(ids), dim).astype(np.float64)
    return LatentMatrix(
        segment_ids=ids,
        vectors=vectors,
        config=EncoderConfig.from_dict(meta["config"]),
    )
