"""Language encoder and autoregressive language decoder.

Sequences are fed one-hot, one token per step, without padding tokens:
batches of different lengths are masked so every row ends on its own final
state. The decoder's start symbol is the all-zero input vector, which has no
vocabulary index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grammar import EOS, VOCAB, Signal, Vocab
from .lstm import LstmParams, init_lstm, lstm_backward, lstm_forward, lstm_step, lstm_step_backward, zero_grads
from .numerics import RngStream, init_uniform, softmax

ENC = "lenc.lstm"
DEC = "ldec.lstm"


class TokenError(ValueError):
    pass


def tokenize(description: str | list[str], signal: Signal, vocab: Vocab = VOCAB) -> list[int]:
    """``[signal, words..., EOS]`` as vocabulary indices."""
    if signal is None:
        raise TokenError("a signal token is required")
    signal = Signal(signal)
    words = description.split() if isinstance(description, str) else list(description)
    unknown = [w for w in words if w not in vocab or vocab.is_signal(vocab[w]) or w == EOS]
    if unknown:
        raise TokenError(f"unknown word(s): {', '.join(unknown)}")
    return [vocab.signal_id(signal)] + [vocab[w] for w in words] + [vocab.eos]


def detokenize(tokens: list[int], vocab: Vocab = VOCAB) -> str:
    """Words between the optional leading signal and the first EOS."""
    out = []
    for k, t in enumerate(tokens):
        if t == vocab.eos:
            break
        if k == 0 and vocab.is_signal(t):
            continue
        out.append(vocab.symbols[t])
    return " ".join(out)


def target_tokens(description: str | list[str], vocab: Vocab = VOCAB) -> list[int]:
    """Decoder target: the words followed by EOS."""
    words = description.split() if isinstance(description, str) else list(description)
    return [vocab[w] for w in words] + [vocab.eos]


def init_language(store: dict, vocab_size: int, hidden: int, rng: RngStream, dtype=np.float64) -> None:
    init_lstm(store, ENC, vocab_size, hidden, rng, dtype)
    store["ldec.init.W"] = init_uniform(rng, hidden, 2 * hidden, dtype=dtype)
    store["ldec.init.b"] = np.zeros(2 * hidden, dtype=dtype)
    init_lstm(store, DEC, vocab_size, hidden, rng, dtype)
    store["ldec.out.W"] = init_uniform(rng, hidden, vocab_size, dtype=dtype)
    store["ldec.out.b"] = np.zeros(vocab_size, dtype=dtype)


def one_hot_batch(seqs: list[list[int]], vocab_size: int, dtype=np.float64):
    """(T, B, V) one-hot block plus the (T, B) validity mask."""
    T = max(len(s) for s in seqs)
    X = np.zeros((T, len(seqs), vocab_size), dtype=dtype)
    masks = np.zeros((T, len(seqs)), dtype=dtype)
    for b, s in enumerate(seqs):
        X[np.arange(len(s)), b, s] = 1.0
        masks[: len(s), b] = 1.0
    return X, masks


@dataclass
class EncoderCache:
    caches: list
    T: int


def encode_batch(store: dict, seqs: list[list[int]], prefix: str = ENC):
    if any(len(s) == 0 for s in seqs):
        raise TokenError("cannot encode an empty token sequence")
    p = LstmParams.from_store(store, prefix)
    X, masks = one_hot_batch(seqs, p.input_size, p.W.dtype)
    hs, c, caches = lstm_forward(p, X, masks=masks)
    return np.concatenate([hs[-1], c], axis=1), EncoderCache(caches, X.shape[0])


def encode_batch_backward(store: dict, cache: EncoderCache, dfeats: np.ndarray, grads: dict, prefix: str = ENC) -> None:
    p = LstmParams.from_store(store, prefix)
    H = p.hidden
    dhs = np.zeros((cache.T,) + dfeats[:, :H].shape, dtype=dfeats.dtype)
    dhs[-1] = dfeats[:, :H]
    g, _, _, _ = lstm_backward(p, cache.caches, dhs, dfeats[:, H:])
    for k, v in g.items():
        grads[f"{prefix}.{k}"] += v


def lang_encode(store: dict, seq: list[int]) -> np.ndarray:
    """Final ``[h; c]`` of the language encoder for one token sequence."""
    feats, _ = encode_batch(store, [seq])
    return feats[0]


def init_state(store: dict, prefix: str, h_shared: np.ndarray):
    s = h_shared @ store[f"{prefix}.init.W"].T + store[f"{prefix}.init.b"]
    H = s.shape[1] // 2
    return s[:, :H], s[:, H:]


@dataclass
class DecoderCache:
    h_shared: np.ndarray
    hs: list
    caches: list


def decode_teacher_forced(store: dict, h_shared: np.ndarray, inputs: np.ndarray):
    """Run the decoder on given inputs (T, B, V); returns softmax rows (T, B, V)."""
    p = LstmParams.from_store(store, DEC)
    h, c = init_state(store, "ldec", h_shared)
    W, b = store["ldec.out.W"], store["ldec.out.b"]
    probs, hs, caches = [], [], []
    for t in range(inputs.shape[0]):
        h, c, cache = lstm_step(p, inputs[t], h, c)
        probs.append(softmax(h @ W.T + b))
        hs.append(h)
        caches.append(cache)
    return np.stack(probs), DecoderCache(h_shared, hs, caches)


def decode_teacher_forced_backward(store: dict, cache: DecoderCache, dlogits: np.ndarray, grads: dict) -> np.ndarray:
    """Backprop logit gradients (T, B, V); returns the gradient on ``h_shared``."""
    p = LstmParams.from_store(store, DEC)
    W = store["ldec.out.W"]
    g = zero_grads(p)
    dh = np.zeros_like(cache.hs[0])
    dc = np.zeros_like(dh)
    for t in range(len(cache.caches) - 1, -1, -1):
        grads["ldec.out.W"] += dlogits[t].T @ cache.hs[t]
        grads["ldec.out.b"] += dlogits[t].sum(axis=0)
        _, dh, dc = lstm_step_backward(p, cache.caches[t], dh + dlogits[t] @ W, dc, g)
    for k, v in g.items():
        grads[f"{DEC}.{k}"] += v
    ds = np.concatenate([dh, dc], axis=1)
    grads["ldec.init.W"] += ds.T @ cache.h_shared
    grads["ldec.init.b"] += ds.sum(axis=0)
    return ds @ store["ldec.init.W"]


def greedy_decode_batch(store: dict, h_shared: np.ndarray, max_steps: int = 4):
    """Greedy argmax rollout feeding each prediction back as the next input.

    Returns per-row token lists (cut after the first EOS) and the full
    (max_steps, B, V) probability block.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be at least 1")
    p = LstmParams.from_store(store, DEC)
    h, c = init_state(store, "ldec", h_shared)
    W, b = store["ldec.out.W"], store["ldec.out.b"]
    B, V = h_shared.shape[0], W.shape[0]
    y = np.zeros((B, V), dtype=W.dtype)
    eos = VOCAB.eos
    tokens = [[] for _ in range(B)]
    done = [False] * B
    probs = []
    for _ in range(max_steps):
        h, c, _ = lstm_step(p, y, h, c)
        pr = softmax(h @ W.T + b)
        probs.append(pr)
        # argmax returns the lowest index on ties
        k = np.argmax(pr, axis=1)
        y = np.zeros_like(y)
        y[np.arange(B), k] = 1.0
        for r in range(B):
            if not done[r]:
                tokens[r].append(int(k[r]))
                done[r] = int(k[r]) == eos
    return tokens, np.stack(probs)


def lang_decode(store: dict, h_shared: np.ndarray, max_steps: int = 4):
    """Greedy decode from one shared vector; returns ``(tokens, probs)``."""
    tokens, probs = greedy_decode_batch(store, np.atleast_2d(h_shared), max_steps)
    return tokens[0], probs[:, 0, :]
