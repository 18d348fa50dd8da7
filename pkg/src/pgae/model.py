"""The paired gated autoencoder: both encoders, the GMU and both decoders,
with a batched forward/backward pass over signal-conditioned task rows."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import action, language
from .gmu import LatentPair, gmu_backward, gmu_fuse, init_gmu
from .grammar import VOCAB, Signal
from .numerics import RngStream, dtype_for
from .tasks import TaskIO

MAX_WORDS = 4  # three words + EOS


@dataclass
class ModelConfig:
    hidden: int = 50
    vocab_size: int = 28
    vis_dim: int = 30
    joints: int = 5
    precision: str = "float64"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BatchResult:
    loss: float
    lang: np.ndarray  # per-row language loss
    act: np.ndarray  # per-row action loss
    grads: dict | None
    latent: LatentPair


class PGAE:
    def __init__(self, config: ModelConfig | None = None, params: dict | None = None, seed: int = 0):
        self.config = config or ModelConfig()
        if params is None:
            params = init_params(self.config, seed)
        self.params = params

    @property
    def dtype(self):
        return dtype_for(self.config.precision)

    def zero_grads(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def encode(self, rows: list[TaskIO]):
        p = self.params
        L, lcache = language.encode_batch(p, [r.lang_in for r in rows])
        A, acache = action.encode_batch(p, [r.act_in.astype(self.dtype, copy=False) for r in rows])
        return gmu_fuse(p, L, A), lcache, acache

    def forward_backward(
        self,
        rows: list[TaskIO],
        word_w: np.ndarray,
        alpha: float = 1.0,
        beta: float = 1.0,
        grad: bool = True,
    ) -> BatchResult:
        """Mean over rows of ``alpha * L_lang + beta * L_act`` and its gradient.

        Rows may differ in length; each row's loss is normalised by its own
        target length, so the result equals averaging per-row passes.
        """
        p, dt = self.params, self.dtype
        B, V = len(rows), self.config.vocab_size
        lat, lcache, acache = self.encode(rows)

        # language decoder, teacher forced from the zero start vector
        Tl = max(len(r.lang_target) for r in rows)
        y_in = np.zeros((Tl, B, V), dtype=dt)
        tgt = np.zeros((Tl, B), dtype=int)
        lmask = np.zeros((Tl, B), dtype=dt)
        for b, r in enumerate(rows):
            n = len(r.lang_target)
            tgt[:n, b] = r.lang_target
            lmask[:n, b] = 1.0 / n
            y_in[np.arange(1, n), b, r.lang_target[:-1]] = 1.0
        probs, ldcache = language.decode_teacher_forced(p, lat.h, y_in)
        picked = np.take_along_axis(probs, tgt[:, :, None], axis=2)[:, :, 0]
        wt = word_w[tgt]
        lang_rows = np.sum(lmask * -wt * np.log(np.maximum(picked, 1e-12)), axis=0)

        # action decoder rollout
        R = max(r.rollout for r in rows)
        vis = np.zeros((R, B, self.config.vis_dim), dtype=dt)
        jt = np.zeros((R, B, self.config.joints), dtype=dt)
        amask = np.zeros((R, B), dtype=dt)
        for b, r in enumerate(rows):
            n = r.rollout
            vis[:n, b] = r.dec_vis
            jt[:n, b] = r.act_target
            amask[:n, b] = 1.0 / n
        j1 = np.stack([r.j1 for r in rows]).astype(dt)
        preds, adcache = action.rollout_batch(p, lat.h, vis, j1, R)
        act_rows = np.sum(amask * np.sum((preds - jt) ** 2, axis=2), axis=0)

        loss = float(np.mean(alpha * lang_rows + beta * act_rows))
        if not grad:
            return BatchResult(loss, lang_rows, act_rows, None, lat)

        grads = self.zero_grads()
        onehot = np.zeros_like(probs)
        np.put_along_axis(onehot, tgt[:, :, None], 1.0, axis=2)
        live = (picked >= 1e-12).astype(dt)
        dlogits = (alpha / B) * (lmask * wt * live)[:, :, None] * (probs - onehot)
        dh = language.decode_teacher_forced_backward(p, ldcache, dlogits, grads)
        dpreds = (beta / B) * 2.0 * amask[:, :, None] * (preds - jt)
        dh += action.rollout_batch_backward(p, adcache, dpreds, grads)
        _, dL, dA = gmu_backward(p, lat, dh, grads)
        language.encode_batch_backward(p, lcache, dL, grads)
        action.encode_batch_backward(p, acache, dA, grads)
        return BatchResult(loss, lang_rows, act_rows, grads, lat)

    def infer(self, rows: list[TaskIO], max_words: int = MAX_WORDS):
        """Greedy descriptions and full joint trajectories (first row = j1)."""
        lat, _, _ = self.encode(rows)
        tokens, _ = language.greedy_decode_batch(self.params, lat.h, max_words)
        R = max(r.rollout for r in rows)
        vis = np.zeros((R, len(rows), self.config.vis_dim), dtype=self.dtype)
        for b, r in enumerate(rows):
            vis[: r.rollout, b] = r.dec_vis
        j1 = np.stack([r.j1 for r in rows]).astype(self.dtype)
        preds, _ = action.rollout_batch(self.params, lat.h, vis, j1, R)
        trajs = [np.concatenate([r.j1[None, :], preds[: r.rollout, b]]) for b, r in enumerate(rows)]
        return tokens, trajs, lat


def init_params(config: ModelConfig, seed: int = 0) -> dict[str, np.ndarray]:
    rng = RngStream(seed)
    dt = dtype_for(config.precision)
    store: dict[str, np.ndarray] = {}
    language.init_language(store, config.vocab_size, config.hidden, rng, dt)
    action.init_action(store, config.vis_dim, config.hidden, rng, dt, config.joints)
    init_gmu(store, config.hidden, rng, dt)
    return store


def signal_of(tokens: list[int]) -> Signal | None:
    if tokens and VOCAB.is_signal(tokens[0]):
        return Signal(VOCAB.symbols[tokens[0]][1:-1])
    return None
