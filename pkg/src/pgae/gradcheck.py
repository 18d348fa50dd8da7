"""Finite-difference check of the full model loss, one signal at a time."""

from __future__ import annotations

import numpy as np

from .grammar import Signal
from .model import PGAE, ModelConfig
from .numerics import RngStream, grad_check
from .synth import micro_set, plan_corpus, sample_joints
from .tasks import Sample, build_task_io, corpus_word_weights


def reduced_samples(steps: int = 6, vis_dim: int = 30, count: int = 2, seed: int = 0) -> list[Sample]:
    """Generator trajectories cut to ``steps`` rows, with random visual features."""
    recs = micro_set(plan_corpus(seed))[:: max(1, 12 // count)][:count]
    rng = np.random.default_rng(seed)
    out = []
    for r in recs:
        j = sample_joints(r)
        j = j[np.linspace(0, len(j) - 1, steps).round().astype(int)]
        feats = {vp: rng.normal(size=(steps, vis_dim)) for vp in ("self", "opposite")}
        out.append(Sample(r.name, r.description, j, feats, r.action))
    return out


def model_gradcheck(probes: int = 500, hidden: int = 8, steps: int = 6, seed: int = 0, step: float = 1e-5) -> dict[Signal, float]:
    """Max relative error per signal on a reduced float64 model."""
    model = PGAE(ModelConfig(hidden=hidden, precision="float64"), seed=seed)
    samples = reduced_samples(steps, model.config.vis_dim, seed=seed)
    w = corpus_word_weights(samples)
    out = {}
    for k, sig in enumerate(Signal):
        rows = [build_task_io(s, sig) for s in samples]
        res = model.forward_backward(rows, w)

        def loss():
            return model.forward_backward(rows, w, grad=False).loss

        out[sig] = grad_check(loss, model.params, res.grads, probe_count=probes, step=step, rng=RngStream(seed + 101 * k))
    return out
