"""Glue between the on-disk corpus, the visual autoencoders and the model."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from . import cae, checkpoint
from .grammar import VOCAB
from .model import PGAE, ModelConfig
from .synth import (
    VIEWPOINTS,
    SampleRecord,
    load_frames,
    load_joints,
    load_manifest,
    micro_set,
    read_matrix_csv,
    records_from_manifest,
    write_matrix_csv,
)
from .tasks import Sample

log = logging.getLogger(__name__)

SPLITS = ("train", "test", "all", "micro")


def select(manifest: dict, split: str) -> list[SampleRecord]:
    records = records_from_manifest(manifest)
    if split == "all":
        return records
    if split == "micro":
        return micro_set(records)
    if split not in manifest["split"]:
        raise ValueError(f"unknown split {split!r}; choose from {', '.join(SPLITS)}")
    wanted = set(manifest["split"][split])
    return [r for r in records if r.name in wanted]


def frame_size(manifest: dict) -> tuple[int, int]:
    return tuple(manifest.get("frame_size", (60, 80)))


def training_frames(data_dir, records: list[SampleRecord], stride: int, size) -> np.ndarray:
    """Every ``stride``-th frame of both viewpoints of every record."""
    chunks = [load_frames(data_dir, r, vp, size)[::stride] for r in records for vp in VIEWPOINTS]
    return np.concatenate(chunks)


def train_caes(frames: np.ndarray, epochs: int = 20, lr: float = 1e-3, seed: int = 0, channels=(0, 1, 2), previous=None):
    """Train the requested channels; others are copied from ``previous``."""
    out = list(previous) if previous is not None else [None, None, None]
    for c in channels:
        out[c] = cae.cae_train(
            frames, c, epochs=epochs, lr=lr, seed=seed + c,
            log=lambda ep, mse, c=c: log.info("cae %s epoch %d mse %.6f", cae.CHANNELS[c], ep + 1, mse),
        )
    return out


def cae_checkpoint(caes, config: dict) -> checkpoint.Checkpoint:
    tensors = {f"{cae.CHANNELS[c]}.{k}": v for c, p in enumerate(caes) for k, v in p.items()}
    return checkpoint.Checkpoint({"kind": "cae"} | config, tensors)


def caes_from_tensors(tensors: dict, prefix: str = "") -> list[dict] | None:
    caes = []
    for ch in cae.CHANNELS:
        head = f"{prefix}{ch}."
        p = {k[len(head):]: v for k, v in tensors.items() if k.startswith(head)}
        if not p:
            return None
        caes.append(p)
    return caes


def encode_features(data_dir, records: list[SampleRecord], caes, size) -> None:
    for r in records:
        d = Path(data_dir) / "samples" / r.name
        d.mkdir(parents=True, exist_ok=True)
        for vp in VIEWPOINTS:
            write_matrix_csv(d / f"features_{vp}.csv", cae.extract_features(caes, load_frames(data_dir, r, vp, size)))


def load_samples(data_dir, records: list[SampleRecord], viewpoints=VIEWPOINTS) -> list[Sample]:
    out = []
    for r in records:
        d = Path(data_dir) / "samples" / r.name
        feats = {}
        for vp in viewpoints:
            path = d / f"features_{vp}.csv"
            if not path.exists():
                raise FileNotFoundError(f"missing visual features {path}; run `pgae cae encode` first")
            feats[vp] = read_matrix_csv(path)
        out.append(Sample(r.name, r.description, load_joints(data_dir, r), feats, r.action, r.to_dict()))
    return out


def model_checkpoint(model: PGAE, word_w: np.ndarray, config: dict, caes=None) -> checkpoint.Checkpoint:
    tensors = dict(model.params)
    if caes is not None:
        tensors |= {f"cae.{cae.CHANNELS[c]}.{k}": v for c, p in enumerate(caes) for k, v in p.items()}
    cfg = {"kind": "pgae", "model": model.config.to_dict(), "gate_input_order": "action,language"} | config
    return checkpoint.Checkpoint(cfg, tensors, list(VOCAB.symbols), np.asarray(word_w, dtype=np.float64))


def model_from_checkpoint(ckpt: checkpoint.Checkpoint):
    """Returns ``(model, word_weights, caes_or_None)``."""
    if ckpt.config.get("kind") != "pgae":
        raise checkpoint.CheckpointError("checkpoint does not hold a PGAE model")
    if ckpt.vocab != VOCAB.symbols:
        raise checkpoint.CheckpointError("checkpoint vocabulary differs from this build's vocabulary")
    config = ModelConfig(**ckpt.config["model"])
    dt = np.float32 if config.precision == "float32" else np.float64
    params = {k: v.astype(dt) for k, v in ckpt.tensors.items() if not k.startswith("cae.")}
    return PGAE(config, params), ckpt.word_weights, caes_from_tensors(ckpt.tensors, "cae.")
