"""Description accuracy, joint nRMSE and the four-task evaluation table."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .grammar import VOCAB, Signal, meaning_of
from .model import PGAE
from .tasks import Sample, build_task_io

# Translation results reported for the original robot data, for context only.
REFERENCE_TABLE = {
    "single-view": {
        "describe": (93.05, 0.23),
        "repeat-language": (96.30, 0.37),
        "execute": (100.0, 0.44),
        "repeat-action": (100.0, 0.44),
    },
    "mixed-view": {
        "describe-self": (80.56, 0.58),
        "describe-opposite": (65.28, 2.40),
        "repeat-language": (93.98, 0.73),
        "execute": (100.0, 0.79),
        "repeat-action-self": (100.0, 0.89),
        "repeat-action-opposite": (100.0, 0.80),
    },
}


def _symbols(seq) -> list[str]:
    return [VOCAB.symbols[t] if isinstance(t, (int, np.integer)) else t for t in seq]


def describe_accuracy(predicted, truth) -> tuple[float, float]:
    """Exact-match and synonym-tolerant match rates, both in percent.

    A prediction counts only if every token, EOS included, lines up.
    """
    if len(predicted) != len(truth):
        raise ValueError(f"{len(predicted)} predictions for {len(truth)} references")
    if not truth:
        return 0.0, 0.0
    exact = semantic = 0
    for p, t in zip(predicted, truth):
        p, t = _symbols(p), _symbols(t)
        exact += p == t
        semantic += meaning_of(p) == meaning_of(t)
    n = len(truth)
    return 100.0 * exact / n, 100.0 * semantic / n


def nrmse(predicted: np.ndarray, truth: np.ndarray, observed_range: float) -> float:
    """Root of the per-element mean squared joint error over the observed
    joint range, in percent."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError(f"prediction {predicted.shape} and ground truth {truth.shape} differ")
    if not observed_range > 0:
        raise ValueError("observed joint range must be positive")
    return float(100.0 * np.sqrt(np.mean((predicted - truth) ** 2)) / observed_range)


@dataclass
class TaskResult:
    accuracy: float
    semantic_accuracy: float
    nrmse: float
    n: int


@dataclass
class EvalReport:
    tasks: dict[str, TaskResult]
    joint_range: float
    reference: dict = field(default_factory=lambda: REFERENCE_TABLE)

    def to_json(self) -> str:
        doc = {
            "joint_range": round(self.joint_range, 10),
            "tasks": {
                k: {
                    "accuracy": round(v.accuracy, 6),
                    "semantic_accuracy": round(v.semantic_accuracy, 6),
                    "nrmse": round(v.nrmse, 6),
                    "n": v.n,
                }
                for k, v in self.tasks.items()
            },
            "reference": self.reference,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        ref = self.reference["mixed-view"] if any(k.endswith("-opposite") for k in self.tasks) else self.reference["single-view"]
        lines = [f"{'task':<24}{'acc %':>9}{'sem %':>9}{'nRMSE %':>9}{'ref acc':>11}{'ref nRMSE':>13}"]
        for k, v in self.tasks.items():
            base = k if k in ref else k.rsplit("-", 1)[0]
            pa, pn = ref.get(base, (float("nan"), float("nan")))
            lines.append(f"{k:<24}{v.accuracy:>9.2f}{v.semantic_accuracy:>9.2f}{v.nrmse:>9.3f}{pa:>11.2f}{pn:>13.2f}")
        return "\n".join(lines)


def task_names(viewpoints) -> list[tuple[str, Signal, str]]:
    names = []
    for sig in (Signal.DESCRIBE, Signal.REPEAT_LANGUAGE, Signal.EXECUTE, Signal.REPEAT_ACTION):
        if sig in (Signal.DESCRIBE, Signal.REPEAT_ACTION) and len(viewpoints) > 1:
            names.extend((f"{sig.value}-{vp}", sig, vp) for vp in viewpoints)
        else:
            names.append((sig.value, sig, "self"))
    return names


def eval_all_tasks(model: PGAE, samples: list[Sample], viewpoints=("self", "opposite"), batch: int = 64) -> EvalReport:
    """Run every sample under each inference signal from one parameter set."""
    viewpoints = [vp for vp in viewpoints if all(vp in s.features for s in samples)]
    joint_range = float(max(s.joints.max() for s in samples) - min(s.joints.min() for s in samples))
    tasks = {}
    for name, sig, vp in task_names(viewpoints):
        pred_tokens, true_tokens, pred_j, true_j = [], [], [], []
        for start in range(0, len(samples), batch):
            rows = [build_task_io(s, sig, vp) for s in samples[start : start + batch]]
            tokens, trajs, _ = model.infer(rows)
            pred_tokens.extend(tokens)
            true_tokens.extend(r.lang_target for r in rows)
            pred_j.extend(t[1:] for t in trajs)
            true_j.extend(r.act_target for r in rows)
        acc, sem = describe_accuracy(pred_tokens, true_tokens)
        err = nrmse(np.concatenate(pred_j), np.concatenate(true_j), joint_range)
        tasks[name] = TaskResult(acc, sem, err, len(samples))
    return EvalReport(tasks, joint_range)
