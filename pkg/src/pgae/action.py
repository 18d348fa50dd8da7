"""Action encoder over (visual feature, joint) steps and the joint decoder.

The decoder is fed the visual features of each step as given (teacher
forcing) but its own previous joint prediction, starting from the true
first posture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lstm import LstmParams, init_lstm, lstm_forward, lstm_step, lstm_step_backward, lstm_backward, zero_grads
from .numerics import RngStream, ShapeError, init_uniform
from .language import init_state

ENC = "aenc.lstm"
DEC = "adec.lstm"
JOINTS = 5


def init_action(store: dict, vis_dim: int, hidden: int, rng: RngStream, dtype=np.float64, joints: int = JOINTS) -> None:
    init_lstm(store, ENC, vis_dim + joints, hidden, rng, dtype)
    store["adec.init.W"] = init_uniform(rng, hidden, 2 * hidden, dtype=dtype)
    store["adec.init.b"] = np.zeros(2 * hidden, dtype=dtype)
    init_lstm(store, DEC, vis_dim + joints, hidden, rng, dtype)
    store["adec.out.W"] = init_uniform(rng, hidden, joints, dtype=dtype)
    store["adec.out.b"] = np.zeros(joints, dtype=dtype)


def check_joints(j: np.ndarray) -> None:
    if np.any(np.abs(j) > 1.0):
        raise ValueError(f"joint values must lie in [-1, 1], got range [{j.min():.4f}, {j.max():.4f}]")


@dataclass
class EncoderCache:
    caches: list
    T: int


def encode_batch(store: dict, seqs: list[np.ndarray]):
    """Encode a batch of (T_b, vis+joints) step arrays into (B, 2H)."""
    if any(len(s) == 0 for s in seqs):
        raise ValueError("cannot encode an empty action sequence")
    p = LstmParams.from_store(store, ENC)
    T = max(len(s) for s in seqs)
    X = np.zeros((T, len(seqs), p.input_size), dtype=p.W.dtype)
    masks = np.zeros((T, len(seqs)), dtype=p.W.dtype)
    for b, s in enumerate(seqs):
        if s.shape[1] != p.input_size:
            raise ShapeError(f"action step width {s.shape[1]}, expected {p.input_size}")
        X[: len(s), b] = s
        masks[: len(s), b] = 1.0
    hs, c, caches = lstm_forward(p, X, masks=masks)
    return np.concatenate([hs[-1], c], axis=1), EncoderCache(caches, T)


def encode_batch_backward(store: dict, cache: EncoderCache, dfeats: np.ndarray, grads: dict) -> None:
    p = LstmParams.from_store(store, ENC)
    H = p.hidden
    dhs = np.zeros((cache.T,) + dfeats[:, :H].shape, dtype=dfeats.dtype)
    dhs[-1] = dfeats[:, :H]
    g, _, _, _ = lstm_backward(p, cache.caches, dhs, dfeats[:, H:])
    for k, v in g.items():
        grads[f"{ENC}.{k}"] += v


def act_encode(store: dict, vis: np.ndarray, joints: np.ndarray) -> np.ndarray:
    """Final ``[h; c]`` for one sequence of visual features and joints."""
    if len(joints) == 0 or len(vis) != len(joints):
        raise ValueError("action sequence must be non-empty with one visual vector per joint vector")
    check_joints(joints)
    feats, _ = encode_batch(store, [np.concatenate([vis, joints], axis=1)])
    return feats[0]


@dataclass
class DecoderCache:
    h_shared: np.ndarray
    hs: list
    caches: list
    preds: list
    vis_dim: int


def rollout_batch(store: dict, h_shared: np.ndarray, vis: np.ndarray, j1: np.ndarray, steps: int):
    """Autoregressive joint rollout.

    ``vis`` is (>= steps, B, vis_dim) with the features of steps 1..steps;
    returns predictions for steps 2..steps+1 as (steps, B, joints).
    """
    if steps > vis.shape[0]:
        raise ValueError(f"rollout of {steps} steps needs {steps} visual frames, only {vis.shape[0]} given")
    p = LstmParams.from_store(store, DEC)
    W, b = store["adec.out.W"], store["adec.out.b"]
    h, c = init_state(store, "adec", h_shared)
    j = j1
    hs, caches, preds = [], [], []
    for t in range(steps):
        h, c, cache = lstm_step(p, np.concatenate([vis[t], j], axis=1), h, c)
        j = np.tanh(h @ W.T + b)
        hs.append(h)
        caches.append(cache)
        preds.append(j)
    return np.stack(preds), DecoderCache(h_shared, hs, caches, preds, vis.shape[2])


def rollout_batch_backward(store: dict, cache: DecoderCache, dpreds: np.ndarray, grads: dict) -> np.ndarray:
    """Backprop through the rollout, including the joint feedback path.

    Returns the gradient on ``h_shared``.
    """
    p = LstmParams.from_store(store, DEC)
    W = store["adec.out.W"]
    g = zero_grads(p)
    dh = np.zeros_like(cache.hs[0])
    dc = np.zeros_like(dh)
    dj_carry = np.zeros_like(cache.preds[0])
    for t in range(len(cache.caches) - 1, -1, -1):
        jt = cache.preds[t]
        dpre = (dpreds[t] + dj_carry) * (1.0 - jt * jt)
        grads["adec.out.W"] += dpre.T @ cache.hs[t]
        grads["adec.out.b"] += dpre.sum(axis=0)
        dx, dh, dc = lstm_step_backward(p, cache.caches[t], dh + dpre @ W, dc, g)
        dj_carry = dx[:, cache.vis_dim :]
    for k, v in g.items():
        grads[f"{DEC}.{k}"] += v
    ds = np.concatenate([dh, dc], axis=1)
    grads["adec.init.W"] += ds.T @ cache.h_shared
    grads["adec.init.b"] += ds.sum(axis=0)
    return ds @ store["adec.init.W"]


def act_decode(store: dict, h_shared: np.ndarray, vis: np.ndarray, j1: np.ndarray, steps: int) -> np.ndarray:
    """Predicted joints for steps 2..steps, shape (steps - 1, joints)."""
    check_joints(np.asarray(j1))
    if steps > len(vis):
        raise ValueError(f"rollout of {steps} steps needs {steps} visual frames, only {len(vis)} given")
    if steps < 2:
        return np.zeros((0, len(j1)))
    preds, _ = rollout_batch(store, np.atleast_2d(h_shared), vis[: steps - 1, None, :], np.atleast_2d(j1), steps - 1)
    return preds[:, 0, :]


def rollout(store: dict, h_shared: np.ndarray, vis: np.ndarray, j1: np.ndarray, steps: int) -> np.ndarray:
    """Full trajectory ``[j1, j2_hat, ..., j_steps_hat]``."""
    return np.concatenate([np.atleast_2d(j1), act_decode(store, h_shared, vis, j1, steps)])
