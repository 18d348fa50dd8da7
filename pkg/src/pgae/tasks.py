"""Signal-conditioned inputs/targets and the loss terms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grammar import VOCAB, Signal, Vocab
from .language import target_tokens, tokenize


@dataclass
class Sample:
    """One paired datum as the network sees it."""

    name: str
    description: str
    joints: np.ndarray  # (M, 5) in [-1, 1]
    features: dict[str, np.ndarray] = field(default_factory=dict)  # viewpoint -> (M, vis_dim)
    action: int = -1
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return len(self.joints)


@dataclass
class TaskIO:
    signal: Signal
    lang_in: list[int]
    act_in: np.ndarray  # (T_a, vis_dim + 5), rows are [v_t; j_t]
    lang_target: list[int]
    dec_vis: np.ndarray  # (M - 1, vis_dim): v_1 .. v_{M-1}
    j1: np.ndarray
    act_target: np.ndarray  # (M - 1, 5)

    @property
    def rollout(self) -> int:
        return len(self.act_target)


# which modality inputs are full sequences / which targets are full
_LANG_IN_FULL = {Signal.EXECUTE, Signal.REPEAT_BOTH, Signal.REPEAT_LANGUAGE}
_ACT_IN_FULL = {Signal.DESCRIBE, Signal.REPEAT_ACTION, Signal.REPEAT_BOTH}
_LANG_OUT_FULL = {Signal.DESCRIBE, Signal.REPEAT_BOTH, Signal.REPEAT_LANGUAGE}


def build_task_io(sample: Sample, signal: Signal, viewpoint: str = "self", vocab: Vocab = VOCAB) -> TaskIO:
    signal = Signal(signal)
    if signal in _LANG_IN_FULL | _LANG_OUT_FULL and not sample.description:
        raise ValueError(f"signal {signal.value} requires a description for sample {sample.name}")
    if viewpoint not in sample.features:
        raise ValueError(f"signal {signal.value} requires {viewpoint!r} visual features for sample {sample.name}")
    vis = sample.features[viewpoint]
    j = sample.joints
    if len(j) < 2 or len(vis) != len(j):
        raise ValueError(f"sample {sample.name}: need >= 2 steps with one feature row per joint row")
    steps = np.concatenate([vis, j], axis=1)

    lang_in = tokenize(sample.description if signal in _LANG_IN_FULL else "", signal, vocab)
    act_in = steps if signal in _ACT_IN_FULL else steps[:1]
    lang_target = target_tokens(sample.description, vocab) if signal in _LANG_OUT_FULL else [vocab.eos]
    if signal is Signal.DESCRIBE:
        act_target = np.repeat(j[-1:], len(j) - 1, axis=0)
    elif signal is Signal.REPEAT_LANGUAGE:
        act_target = np.repeat(j[:1], len(j) - 1, axis=0)
    else:
        act_target = j[1:]
    return TaskIO(signal, lang_in, act_in, lang_target, vis[:-1], j[0], act_target)


def lang_loss(targets: list[int], probs: np.ndarray, w: np.ndarray) -> float:
    """Weighted cross entropy averaged over target positions."""
    if len(targets) != len(probs):
        raise ValueError(f"{len(targets)} target tokens but {len(probs)} probability rows")
    picked = probs[np.arange(len(targets)), targets]
    return float(np.mean(-w[targets] * np.log(np.maximum(picked, 1e-12))))


def act_loss(target: np.ndarray, pred: np.ndarray) -> float:
    """Mean over steps of the squared L2 joint error."""
    if target.shape != pred.shape:
        raise ValueError(f"joint target {target.shape} and prediction {pred.shape} differ")
    return float(np.mean(np.sum((target - pred) ** 2, axis=1)))


def total_loss(l_lang: float, l_act: float, alpha: float = 1.0, beta: float = 1.0) -> float:
    return alpha * l_lang + beta * l_act


def word_weights(target_seqs, vocab_size: int = len(VOCAB)) -> np.ndarray:
    """Inverse-frequency weights: total / (V * count), clipped to [0.1, 10]."""
    counts = np.zeros(vocab_size)
    for seq in target_seqs:
        np.add.at(counts, np.asarray(seq, dtype=int), 1)
    total = counts.sum()
    if total == 0:
        raise ValueError("word_weights needs a non-empty corpus")
    w = np.ones(vocab_size)
    present = counts > 0
    w[present] = np.clip(total / (vocab_size * counts[present]), 0.1, 10.0)
    return w


def corpus_word_weights(samples: list[Sample], vocab: Vocab = VOCAB) -> np.ndarray:
    """Weights from the decoder targets every training signal would produce."""
    seqs = []
    for s in samples:
        full = target_tokens(s.description, vocab)
        seqs.extend([full] * len(_LANG_OUT_FULL) + [[vocab.eos]] * (len(Signal) - len(_LANG_OUT_FULL)))
    return word_weights(seqs, len(vocab))
