"""Peephole LSTM with a hand-written backward pass.

Gate rows are packed in the order (i, f, g, o). The input and forget gates
peek at the previous cell state, the output gate at the new one:

    i = sig(W_i x + U_i h' + p_i * c' + b_i)
    f = sig(W_f x + U_f h' + p_f * c' + b_f)
    g = tanh(W_g x + U_g h' + b_g)
    c = f * c' + i * g
    o = sig(W_o x + U_o h' + p_o * c + b_o)
    h = o * tanh(c)

Every step works on a batch of rows. An optional 0/1 ``mask`` per row
freezes the state of rows whose sequence has already ended, which makes a
padded batch exactly equivalent to running each sequence on its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, ShapeError, init_uniform, sigmoid

PARAM_NAMES = ("W", "U", "b", "p_i", "p_f", "p_o")


@dataclass
class LstmParams:
    W: np.ndarray  # (4H, I)
    U: np.ndarray  # (4H, H)
    b: np.ndarray  # (4H,)
    p_i: np.ndarray
    p_f: np.ndarray
    p_o: np.ndarray

    @property
    def hidden(self) -> int:
        return self.U.shape[1]

    @property
    def input_size(self) -> int:
        return self.W.shape[1]

    @classmethod
    def from_store(cls, store: dict[str, np.ndarray], prefix: str) -> "LstmParams":
        return cls(*(store[f"{prefix}.{n}"] for n in PARAM_NAMES))


def init_lstm(store: dict, prefix: str, input_size: int, hidden: int, rng: RngStream, dtype=np.float64) -> None:
    W = np.concatenate([init_uniform(rng, input_size, hidden, dtype=dtype) for _ in range(4)])
    U = np.concatenate([init_uniform(rng, hidden, hidden, dtype=dtype) for _ in range(4)])
    store[f"{prefix}.W"] = W
    store[f"{prefix}.U"] = U
    store[f"{prefix}.b"] = np.zeros(4 * hidden, dtype=dtype)
    for n in ("p_i", "p_f", "p_o"):
        store[f"{prefix}.{n}"] = init_uniform(rng, hidden, 1, shape=(hidden,), dtype=dtype)


@dataclass
class StepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    g: np.ndarray
    o: np.ndarray
    c: np.ndarray
    tc: np.ndarray
    mask: np.ndarray | None


def lstm_step(p: LstmParams, x, h_prev=None, c_prev=None, mask=None):
    """One recurrence step; returns ``(h, c, cache)``.

    ``x`` may be a single vector or a (batch, input) block. Missing states
    start from zeros.
    """
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != p.input_size:
        raise ShapeError(f"LSTM input has width {x.shape[1]}, expected {p.input_size}")
    B, H = x.shape[0], p.hidden
    if h_prev is None:
        h_prev = np.zeros((B, H), dtype=p.W.dtype)
    if c_prev is None:
        c_prev = np.zeros((B, H), dtype=p.W.dtype)
    h_prev = np.atleast_2d(h_prev)
    c_prev = np.atleast_2d(c_prev)
    a = x @ p.W.T + h_prev @ p.U.T + p.b
    i = sigmoid(a[:, :H] + p.p_i * c_prev)
    f = sigmoid(a[:, H : 2 * H] + p.p_f * c_prev)
    g = np.tanh(a[:, 2 * H : 3 * H])
    c = f * c_prev + i * g
    o = sigmoid(a[:, 3 * H :] + p.p_o * c)
    tc = np.tanh(c)
    h = o * tc
    cache = StepCache(x, h_prev, c_prev, i, f, g, o, c, tc, mask)
    if mask is not None:
        m = mask[:, None]
        h = m * h + (1.0 - m) * h_prev
        c = m * c + (1.0 - m) * c_prev
    return h, c, cache


def zero_grads(p: LstmParams) -> dict[str, np.ndarray]:
    return {n: np.zeros_like(getattr(p, n)) for n in PARAM_NAMES}


def lstm_step_backward(p: LstmParams, cache: StepCache, dh, dc, grads: dict[str, np.ndarray]):
    """Backprop one step. Accumulates into ``grads`` and returns
    ``(dx, dh_prev, dc_prev)``."""
    H = p.hidden
    if cache.mask is not None:
        m = cache.mask[:, None]
        dh_pass, dc_pass = (1.0 - m) * dh, (1.0 - m) * dc
        dh, dc = m * dh, m * dc
    else:
        dh_pass = dc_pass = 0.0
    i, f, g, o, tc, c_prev = cache.i, cache.f, cache.g, cache.o, cache.tc, cache.c_prev
    dao = dh * tc * o * (1.0 - o)
    dc = dc + dh * o * (1.0 - tc * tc) + dao * p.p_o
    dai = dc * g * i * (1.0 - i)
    daf = dc * c_prev * f * (1.0 - f)
    dag = dc * i * (1.0 - g * g)
    dc_prev = dc * f + dai * p.p_i + daf * p.p_f + dc_pass
    da = np.concatenate([dai, daf, dag, dao], axis=1)
    grads["W"] += da.T @ cache.x
    grads["U"] += da.T @ cache.h_prev
    grads["b"] += da.sum(axis=0)
    grads["p_i"] += (dai * c_prev).sum(axis=0)
    grads["p_f"] += (daf * c_prev).sum(axis=0)
    grads["p_o"] += (dao * cache.c).sum(axis=0)
    dx = da @ p.W
    dh_prev = da @ p.U + dh_pass
    return dx, dh_prev, dc_prev


def lstm_forward(p: LstmParams, xs: np.ndarray, h0=None, c0=None, masks=None):
    """Unroll over ``xs`` of shape (T, batch, input).

    Returns ``(hs, c_final, caches)`` with ``hs`` of shape (T, batch, hidden).
    """
    h, c = h0, c0
    hs, caches = [], []
    for t in range(xs.shape[0]):
        h, c, cache = lstm_step(p, xs[t], h, c, None if masks is None else masks[t])
        hs.append(h)
        caches.append(cache)
    return np.stack(hs), c, caches


def lstm_backward(p: LstmParams, caches: list[StepCache], dhs: np.ndarray, dc_final=None):
    """Reverse-mode pass over a full unroll.

    ``dhs`` holds the upstream gradient on every emitted ``h_t``;
    ``dc_final`` the one on the last cell state. Returns
    ``(param_grads, dxs, dh0, dc0)``.
    """
    if len(caches) != dhs.shape[0]:
        raise ShapeError(f"{len(caches)} cached steps but {dhs.shape[0]} upstream gradients")
    grads = zero_grads(p)
    dh_next = np.zeros_like(dhs[0])
    dc_next = np.zeros_like(dhs[0]) if dc_final is None else np.atleast_2d(dc_final)
    dxs = [None] * len(caches)
    for t in range(len(caches) - 1, -1, -1):
        dxs[t], dh_next, dc_next = lstm_step_backward(p, caches[t], dhs[t] + dh_next, dc_next, grads)
    return grads, np.stack(dxs), dh_next, dc_next
