"""End-to-end training with a random task signal per sample."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .grammar import Signal
from .model import PGAE
from .numerics import DEFAULT_LR, AdamState, RngStream, adam_step
from .tasks import Sample, build_task_io, corpus_word_weights

log = logging.getLogger(__name__)

# signals whose action input can come from the opposite agent's view
_VIEW_MIXED = {Signal.DESCRIBE, Signal.REPEAT_ACTION, Signal.REPEAT_BOTH}
SIGNAL_ORDER = tuple(Signal)


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 6000
    batch_size: int = 6
    lr: float = DEFAULT_LR
    alpha: float = 1.0
    beta: float = 1.0
    seed: int = 0
    hidden: int = 50
    precision: str = "float64"
    max_iterations: int | None = None
    mix_viewpoints: bool = True

    def __post_init__(self):
        if self.epochs <= 0 or self.batch_size <= 0 or self.lr <= 0 or self.hidden <= 0:
            raise ValueError("epochs, batch_size, lr and hidden must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class History:
    rows: list[dict] = field(default_factory=list)

    def columns(self) -> list[str]:
        return ["epoch", "mean_total", "mean_lang", "mean_act"] + [s.value for s in SIGNAL_ORDER]

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.columns())
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (f"{v:.8f}" if isinstance(v, float) else v) for k, v in r.items()})


def draw_signal(rng: RngStream) -> Signal:
    return SIGNAL_ORDER[rng.integers(len(SIGNAL_ORDER))]


def draw_viewpoint(rng: RngStream, sample: Sample, signal: Signal, mix: bool = True) -> str:
    if mix and signal in _VIEW_MIXED and "opposite" in sample.features:
        return ("self", "opposite")[rng.integers(2)]
    return "self"


def train(model: PGAE, samples: list[Sample], config: TrainConfig, word_w: np.ndarray | None = None, on_epoch=None) -> History:
    """Adam on the batch-mean loss; every parameter gets a gradient each step.

    Deterministic given ``config.seed``. ``on_epoch(epoch, row)`` is called
    after each epoch.
    """
    if not samples:
        raise ValueError("training set is empty")
    if word_w is None:
        word_w = corpus_word_weights(samples)
    rng = RngStream(config.seed)
    state = AdamState(model.params)
    history = History()
    names = set(model.params)
    iteration = 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(samples))
        sums = {"total": 0.0, "lang": 0.0, "act": 0.0}
        per_signal = {s: [0.0, 0] for s in SIGNAL_ORDER}
        n = 0
        for start in range(0, len(order), config.batch_size):
            batch = [samples[i] for i in order[start : start + config.batch_size]]
            rows = []
            for s in batch:
                sig = draw_signal(rng)
                rows.append(build_task_io(s, sig, draw_viewpoint(rng, s, sig, config.mix_viewpoints)))
            res = model.forward_backward(rows, word_w, config.alpha, config.beta)
            row_loss = config.alpha * res.lang + config.beta * res.act
            if not np.all(np.isfinite(row_loss)):
                k = int(np.flatnonzero(~np.isfinite(row_loss))[0])
                raise TrainingError(
                    f"non-finite loss at epoch {epoch} for sample {batch[k].name} under signal {rows[k].signal.value}"
                )
            if set(res.grads) != names:
                raise TrainingError(f"parameters without gradient: {sorted(names - set(res.grads))}")
            adam_step(model.params, res.grads, state, lr=config.lr)
            for r, lt, ll, la in zip(rows, row_loss, res.lang, res.act):
                sums["total"] += lt
                sums["lang"] += ll
                sums["act"] += la
                per_signal[r.signal][0] += lt
                per_signal[r.signal][1] += 1
            n += len(rows)
            iteration += 1
            if config.max_iterations is not None and iteration >= config.max_iterations:
                break
        row = {"epoch": epoch, "mean_total": sums["total"] / n, "mean_lang": sums["lang"] / n, "mean_act": sums["act"] / n}
        for s, (tot, cnt) in per_signal.items():
            row[s.value] = tot / cnt if cnt else math.nan
        history.rows.append(row)
        if on_epoch is not None:
            on_epoch(epoch, row)
        if epoch == 1 or epoch % 50 == 0:
            log.info("epoch %d  total %.5f  lang %.5f  act %.6f", epoch, row["mean_total"], row["mean_lang"], row["mean_act"])
        if config.max_iterations is not None and iteration >= config.max_iterations:
            break
    return history
