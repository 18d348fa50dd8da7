"""Dense numeric helpers shared by every layer: activations, a portable PRNG,
Adam, Glorot-style initialisation and a central-difference gradient checker.

Tensors are plain numpy arrays. Parameters are held in ``dict[str, ndarray]``
stores so the optimiser, checkpointing and gradient checks can walk them by
name.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable

import numpy as np

MASK64 = (1 << 64) - 1

DEFAULT_LR = 1e-5


class ShapeError(ValueError):
    """Raised when tensor extents do not line up."""


def dtype_for(precision: str) -> np.dtype:
    if precision == "float64":
        return np.dtype(np.float64)
    if precision == "float32":
        return np.dtype(np.float32)
    raise ValueError(f"unknown precision mode {precision!r}")


def matvec(W: np.ndarray, x: np.ndarray) -> np.ndarray:
    if W.ndim != 2 or x.ndim != 1:
        raise ShapeError(f"matvec expects a matrix and a vector, got {W.shape} and {x.shape}")
    if W.shape[1] != x.shape[0]:
        raise ShapeError(f"matvec inner dims differ: matrix has {W.shape[1]} columns, vector has {x.shape[0]}")
    return W @ x


def sigmoid(v: np.ndarray) -> np.ndarray:
    # split on sign so exp never overflows
    v = np.asarray(v)
    out = np.empty_like(v, dtype=np.result_type(v, np.float32))
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def softmax(v: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def activate(kind: str, v: np.ndarray) -> np.ndarray:
    """Apply ``sigmoid``, ``tanh`` or ``softmax`` (last axis)."""
    if kind == "sigmoid":
        return sigmoid(v)
    if kind == "tanh":
        return np.tanh(v)
    if kind == "softmax":
        return softmax(v)
    raise ValueError(f"unknown activation {kind!r}")


class RngStream:
    """xorshift64* generator seeded through splitmix64.

    Pure integer arithmetic, so a given seed yields the same sequence on
    every platform and numpy version.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & MASK64
        z = (self.seed + 0x9E3779B97F4A7C15) & MASK64
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        z ^= z >> 31
        self._state = z or 0x2545F4914F6CDD1D

    def next_u64(self) -> int:
        x = self._state
        x ^= x >> 12
        x ^= (x << 25) & MASK64
        x ^= x >> 27
        self._state = x
        return (x * 0x2545F4914F6CDD1D) & MASK64

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (1.0 / 9007199254740992.0)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None):
        if size is None:
            return low + (high - low) * self.random()
        n = int(np.prod(size))
        nxt = self.next_u64
        scale = 1.0 / 9007199254740992.0
        raw = np.fromiter(((nxt() >> 11) * scale for _ in range(n)), dtype=np.float64, count=n)
        return (low + (high - low) * raw).reshape(size)

    def integers(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("n must be positive")
        # rejection sampling removes modulo bias
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def choice(self, seq):
        return seq[self.integers(len(seq))]

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.integers(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        idx = list(range(n))
        self.shuffle(idx)
        return idx

    def spawn(self, key: int) -> "RngStream":
        """Independent child stream keyed by ``seed ^ key``."""
        return RngStream(self.seed ^ (int(key) & MASK64))


def init_uniform(rng: RngStream, fan_in: int, fan_out: int, shape=None, dtype=np.float64) -> np.ndarray:
    """Glorot-uniform tensor with entries in +-sqrt(6 / (fan_in + fan_out)).

    ``shape`` defaults to ``(fan_out, fan_in)``.
    """
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError("fan_in and fan_out must be positive")
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_out, fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class AdamState:
    """First/second moment accumulators keyed like the parameter store."""

    def __init__(self, params: dict[str, np.ndarray] | None = None):
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        if params is not None:
            for k, p in params.items():
                self.m[k] = np.zeros_like(p)
                self.v[k] = np.zeros_like(p)


def adam_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float | None = None,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """In-place Adam update with bias correction."""
    if lr is None:
        lr = DEFAULT_LR
    for k, g in grads.items():
        if k not in params:
            raise KeyError(f"gradient for unknown parameter {k!r}")
        if g.shape != params[k].shape:
            raise ShapeError(f"gradient {k!r} has shape {g.shape}, parameter has {params[k].shape}")
    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step
    for k, g in grads.items():
        p = params[k]
        if k not in state.m:
            state.m[k] = np.zeros_like(p)
            state.v[k] = np.zeros_like(p)
        m, v = state.m[k], state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1e-8, abs(analytic) + abs(numeric))


def grad_check(
    loss_fn: Callable[[], float],
    params: dict[str, np.ndarray],
    analytic: dict[str, np.ndarray],
    probe_count: int = 20,
    step: float = 1e-5,
    rng: RngStream | None = None,
    names: Iterable[str] | None = None,
) -> float:
    """Largest relative error between ``analytic`` and central differences.

    ``loss_fn`` is re-evaluated after perturbing ``params`` in place, so it
    must read the same arrays. Coordinates are drawn uniformly over the
    flattened union of ``names`` (all parameters by default).
    """
    rng = rng or RngStream(0)
    names = sorted(names if names is not None else params)
    sizes = [params[n].size for n in names]
    total = sum(sizes)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for _ in range(probe_count):
        flat = rng.integers(total)
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[k]
        idx = np.unravel_index(flat - offsets[k], params[name].shape)
        p = params[name]
        orig = p[idx]
        p[idx] = orig + step
        fp = loss_fn()
        p[idx] = orig - step
        fm = loss_fn()
        p[idx] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise FloatingPointError(f"non-finite loss while probing {name}{list(idx)}")
        numeric = (fp - fm) / (2.0 * step)
        worst = max(worst, relative_error(float(analytic[name][idx]), numeric))
    return worst
