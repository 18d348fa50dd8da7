"""Gated multimodal unit joining the language and action encodings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, ShapeError, init_uniform, sigmoid

PREFIX = "gmu"


@dataclass
class LatentPair:
    L_feats: np.ndarray
    A_feats: np.ndarray
    L_h: np.ndarray
    A_h: np.ndarray
    z: np.ndarray
    h: np.ndarray


def init_gmu(store: dict, hidden: int, rng: RngStream, dtype=np.float64, feats: int | None = None) -> None:
    feats = feats or 2 * hidden
    store["gmu.W_L"] = init_uniform(rng, feats, hidden, dtype=dtype)
    store["gmu.b_L"] = np.zeros(hidden, dtype=dtype)
    store["gmu.W_A"] = init_uniform(rng, feats, hidden, dtype=dtype)
    store["gmu.b_A"] = np.zeros(hidden, dtype=dtype)
    # gate input is [A_feats; L_feats]
    store["gmu.W_z"] = init_uniform(rng, 2 * feats, hidden, dtype=dtype)
    store["gmu.b_z"] = np.zeros(hidden, dtype=dtype)


def gmu_fuse(p: dict, L_feats: np.ndarray, A_feats: np.ndarray) -> LatentPair:
    """Fuse one vector pair or a batch of rows."""
    feats = p["gmu.W_L"].shape[1]
    if L_feats.shape[-1] != feats or A_feats.shape[-1] != feats:
        raise ShapeError(
            f"GMU expects {feats}-wide encodings, got {L_feats.shape[-1]} (language) and {A_feats.shape[-1]} (action)"
        )
    L_h = np.tanh(L_feats @ p["gmu.W_L"].T + p["gmu.b_L"])
    A_h = np.tanh(A_feats @ p["gmu.W_A"].T + p["gmu.b_A"])
    z = sigmoid(np.concatenate([A_feats, L_feats], axis=-1) @ p["gmu.W_z"].T + p["gmu.b_z"])
    h = z * A_h + (1.0 - z) * L_h
    return LatentPair(L_feats, A_feats, L_h, A_h, z, h)


def gmu_backward(p: dict, lp: LatentPair, dh: np.ndarray, grads: dict | None = None):
    """Returns ``(grads, dL_feats, dA_feats)``; parameter gradients are
    accumulated into ``grads`` when given."""
    if dh.shape != lp.h.shape:
        raise ShapeError(f"upstream gradient {dh.shape} does not match cached h {lp.h.shape}")
    if grads is None:
        grads = {k: np.zeros_like(v) for k, v in p.items() if k.startswith("gmu.")}
    L2, A2, dh2 = np.atleast_2d(lp.L_feats), np.atleast_2d(lp.A_feats), np.atleast_2d(dh)
    z, A_h, L_h = np.atleast_2d(lp.z), np.atleast_2d(lp.A_h), np.atleast_2d(lp.L_h)
    daz = dh2 * (A_h - L_h) * z * (1.0 - z)
    daA = dh2 * z * (1.0 - A_h * A_h)
    daL = dh2 * (1.0 - z) * (1.0 - L_h * L_h)
    grads["gmu.W_z"] += daz.T @ np.concatenate([A2, L2], axis=1)
    grads["gmu.b_z"] += daz.sum(axis=0)
    grads["gmu.W_A"] += daA.T @ A2
    grads["gmu.b_A"] += daA.sum(axis=0)
    grads["gmu.W_L"] += daL.T @ L2
    grads["gmu.b_L"] += daL.sum(axis=0)
    dcat = daz @ p["gmu.W_z"]
    feats = L2.shape[1]
    dA = dcat[:, :feats] + daA @ p["gmu.W_A"]
    dL = dcat[:, feats:] + daL @ p["gmu.W_L"]
    if dh.ndim == 1:
        dA, dL = dA[0], dL[0]
    return grads, dL, dA
