"""Command-line entry point: ``pgae <command> [<subcommand>] [options]``.

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import cae, checkpoint, pipeline, plotting
from .evaluate import eval_all_tasks
from .gradcheck import model_gradcheck
from .grammar import INFERENCE_SIGNALS, MEANING_OF, Signal
from .language import detokenize
from .model import PGAE, ModelConfig
from .synth import (
    DESK_SIZE,
    FULL_SIZE,
    HOME,
    SIDES,
    Pattern,
    build_dataset,
    load_manifest,
    micro_set,
    plan_corpus,
    read_ppm,
    read_matrix_csv,
    render_sequence,
    sequence_length,
    write_matrix_csv,
)
from .synth import split as split_corpus
from .tasks import Sample, build_task_io, corpus_word_weights
from .train import TrainConfig, train

log = logging.getLogger("pgae")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _signal(value: str) -> Signal:
    if value == Signal.REPEAT_BOTH.value:
        raise argparse.ArgumentTypeError("repeat-both is a training-only signal")
    try:
        return Signal(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown signal {value!r}; choose from {', '.join(s.value for s in INFERENCE_SIGNALS)}"
        ) from None


def build_parser() -> Parser:
    p = Parser(prog="pgae", description="Paired gated autoencoders for action/language translation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=Parser)

    ds = sub.add_parser("dataset", help="synthetic corpus").add_subparsers(dest="action", required=True, parser_class=Parser)
    g = ds.add_parser("gen", help="generate the corpus")
    g.add_argument("--out", required=True, type=Path)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", choices=("desk", "full"), default="desk", help="60x80 or 120x160 frames")
    g.add_argument("--no-frames", action="store_true", help="skip writing PPM frames (they are re-rendered on demand)")
    g.add_argument("--split", choices=pipeline.SPLITS, default="all", help="which samples get directories")

    cs = sub.add_parser("cae", help="visual autoencoders").add_subparsers(dest="action", required=True, parser_class=Parser)
    t = cs.add_parser("train", help="train the per-channel autoencoders")
    t.add_argument("--data", required=True, type=Path)
    t.add_argument("--out", required=True, type=Path)
    t.add_argument("--split", choices=pipeline.SPLITS, default="train")
    t.add_argument("--epochs", type=int, default=20)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--stride", type=int, default=5, help="use every n-th frame")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--channels", default="RGB", help="subset of RGB to (re)train; others come from --init")
    t.add_argument("--init", type=Path, help="existing CAE checkpoint to start from")
    e = cs.add_parser("encode", help="write features_<view>.csv for each sample")
    e.add_argument("--data", required=True, type=Path)
    e.add_argument("--cae", required=True, type=Path)
    e.add_argument("--split", choices=pipeline.SPLITS, default="all")

    tr = sub.add_parser("train", help="train the model")
    tr.add_argument("--data", required=True, type=Path)
    tr.add_argument("--out", required=True, type=Path)
    tr.add_argument("--split", choices=pipeline.SPLITS, default="train")
    tr.add_argument("--epochs", type=int, default=6000)
    tr.add_argument("--batch-size", type=int, default=6)
    tr.add_argument("--lr", type=float, default=1e-5)
    tr.add_argument("--alpha", type=float, default=1.0)
    tr.add_argument("--beta", type=float, default=1.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--hidden", type=int, default=50)
    tr.add_argument("--precision", choices=("float64", "float32"), default="float64")
    tr.add_argument("--max-iterations", type=int)
    tr.add_argument("--self-view-only", action="store_true", help="never show opposite-agent features")
    tr.add_argument("--cae", type=Path, help="embed this CAE checkpoint for text-only translation")
    tr.add_argument("--history", type=Path, help="training history CSV (default: next to --out)")
    tr.add_argument("--figures", type=Path, help="directory for the loss-curve figure")

    ev = sub.add_parser("eval", help="evaluate all four inference tasks")
    ev.add_argument("--data", required=True, type=Path)
    ev.add_argument("--checkpoint", required=True, type=Path)
    ev.add_argument("--split", choices=pipeline.SPLITS, default="test")
    ev.add_argument("--out", type=Path, help="eval.json path")
    ev.add_argument("--self-view-only", action="store_true")
    ev.add_argument("--figures", type=Path, help="directory for the report figure")

    ts = sub.add_parser("translate", help="run one inference signal")
    ts.add_argument("--signal", required=True, type=_signal)
    ts.add_argument("--checkpoint", required=True, type=Path)
    src = ts.add_mutually_exclusive_group(required=True)
    src.add_argument("--sample-dir", type=Path, help="sample directory (action input)")
    src.add_argument("--text", help="description (language input)")
    ts.add_argument("--viewpoint", choices=("self", "opposite"), default="self")
    ts.add_argument("--side", choices=SIDES, default="left", help="target position for a text-only scene")
    ts.add_argument("--out", type=Path, help="trajectory CSV (default trajectory.csv for action outputs)")
    ts.add_argument("--figure", type=Path, help="plot the trajectory to this file")

    gc = sub.add_parser("gradcheck", help="finite-difference check of all gradients")
    gc.add_argument("--probes", type=int, default=500)
    gc.add_argument("--seed", type=int, default=0)
    gc.add_argument("--hidden", type=int, default=8)
    gc.add_argument("--steps", type=int, default=6)
    return p


def cmd_dataset_gen(a) -> int:
    size = DESK_SIZE if a.size == "desk" else FULL_SIZE
    subset = None
    if a.split != "all":
        recs = plan_corpus(a.seed)
        tr, te = split_corpus(recs, a.seed)
        subset = {"train": tr, "test": te, "micro": [r.name for r in micro_set(recs)]}[a.split]
    m = build_dataset(a.out, a.seed, size, frames=not a.no_frames, subset=subset)
    print(f"wrote {len(m['samples'])} samples ({len(m['split']['train'])} train / {len(m['split']['test'])} test) to {a.out}")
    return 0


def cmd_cae_train(a) -> int:
    manifest = load_manifest(a.data)
    size = pipeline.frame_size(manifest)
    recs = pipeline.select(manifest, a.split)
    chans = [cae.CHANNELS.index(c) for c in a.channels.upper()]
    previous = None
    if a.init:
        previous = pipeline.caes_from_tensors(checkpoint.load(a.init).tensors)
    elif len(chans) < 3:
        raise UsageError("training a subset of channels needs --init")
    frames = pipeline.training_frames(a.data, recs, a.stride, size)
    log.info("training CAE on %d frames", len(frames))
    before = [cae.reconstruction_mse(cae.init_cae(size, cae.RngStream(a.seed + c)), frames, c) for c in chans]
    caes = pipeline.train_caes(frames, a.epochs, a.lr, a.seed, chans, previous)
    after = [cae.reconstruction_mse(caes[c], frames, c) for c in chans]
    for c, b0, b1 in zip(chans, before, after):
        print(f"channel {cae.CHANNELS[c]}: reconstruction MSE {b0:.6f} -> {b1:.6f}")
    cfg = {"frame_size": list(size), "epochs": a.epochs, "lr": a.lr, "stride": a.stride, "seed": a.seed, "split": a.split}
    checkpoint.save(a.out, pipeline.cae_checkpoint(caes, cfg))
    return 0


def cmd_cae_encode(a) -> int:
    manifest = load_manifest(a.data)
    caes = pipeline.caes_from_tensors(checkpoint.load(a.cae).tensors)
    if caes is None:
        raise checkpoint.CheckpointError(f"{a.cae} holds no CAE tensors")
    recs = pipeline.select(manifest, a.split)
    pipeline.encode_features(a.data, recs, caes, pipeline.frame_size(manifest))
    print(f"wrote features for {len(recs)} samples")
    return 0


def cmd_train(a) -> int:
    manifest = load_manifest(a.data)
    recs = pipeline.select(manifest, a.split)
    views = ("self",) if a.self_view_only else ("self", "opposite")
    samples = pipeline.load_samples(a.data, recs, views)
    cfg = TrainConfig(
        epochs=a.epochs, batch_size=a.batch_size, lr=a.lr, alpha=a.alpha, beta=a.beta, seed=a.seed,
        hidden=a.hidden, precision=a.precision, max_iterations=a.max_iterations, mix_viewpoints=not a.self_view_only,
    )
    model = PGAE(ModelConfig(hidden=a.hidden, vis_dim=samples[0].features["self"].shape[1], precision=a.precision), seed=a.seed)
    w = corpus_word_weights(samples)
    t0 = time.time()
    history = train(model, samples, cfg, w)
    extra = {"train": cfg.to_dict(), "split": a.split, "frame_size": list(pipeline.frame_size(manifest))}
    caes = pipeline.caes_from_tensors(checkpoint.load(a.cae).tensors) if a.cae else None
    checkpoint.save(a.out, pipeline.model_checkpoint(model, w, extra, caes))
    hist_path = a.history or a.out.with_suffix(".history.csv")
    history.write_csv(hist_path)
    fig_dir = a.figures or a.out.parent
    plotting.plot_history(history.rows, fig_dir / (a.out.stem + "_loss.png"), [s.value for s in Signal])
    last = history.rows[-1]
    print(f"trained {len(history.rows)} epochs in {time.time() - t0:.0f}s; final mean loss {last['mean_total']:.6f}")
    return 0


def cmd_eval(a) -> int:
    manifest = load_manifest(a.data)
    model, _, _ = pipeline.model_from_checkpoint(checkpoint.load(a.checkpoint))
    views = ("self",) if a.self_view_only else ("self", "opposite")
    samples = pipeline.load_samples(a.data, pipeline.select(manifest, a.split), views)
    report = eval_all_tasks(model, samples, views)
    print(report.table())
    out = a.out or a.checkpoint.with_name("eval.json")
    out.write_text(report.to_json())
    plotting.plot_report(report, (a.figures or out.parent) / (out.stem + ".png"))
    return 0


def _text_scene(text: str, side: str, cae_params, size):
    words = text.split()
    meanings = [MEANING_OF.get(w) for w in words]
    slots = {m[0]: m[1] for m in meanings if m}
    if len(words) != 3 or set(slots) != {"verb", "colour", "speed"}:
        raise UsageError(f"cannot build a scene for {text!r}; expected '<verb> <colour> <speed>'")
    pat = Pattern(slots["verb"], slots["colour"], slots["speed"], side, 0)
    M = sequence_length(pat.speed)
    if cae_params is None:
        raise UsageError("a text-only scene needs a checkpoint trained with --cae")
    vis = cae.extract_features(cae_params, render_sequence(pat, "self", size))
    return Sample("text", text, np.repeat(HOME[None, :], M, axis=0), {"self": vis})


def _sample_from_dir(d: Path, viewpoint: str, cae_params) -> Sample:
    meta = json.loads((d / "meta.json").read_text())
    joints = read_matrix_csv(d / "joints.csv")
    path = d / f"features_{viewpoint}.csv"
    if path.exists():
        vis = read_matrix_csv(path)
    elif cae_params is not None:
        vis = cae.extract_features(cae_params, np.stack([read_ppm(f) for f in sorted((d / f"frames_{viewpoint}").glob("*.ppm"))]))
    else:
        raise FileNotFoundError(f"{path} missing and the checkpoint embeds no CAE")
    return Sample(meta["name"], meta["description"], joints, {viewpoint: vis}, meta.get("action", -1))


def cmd_translate(a) -> int:
    ckpt = checkpoint.load(a.checkpoint)
    model, _, caes = pipeline.model_from_checkpoint(ckpt)
    size = tuple(ckpt.config.get("frame_size", DESK_SIZE))
    if a.text is not None:
        if a.signal in (Signal.DESCRIBE, Signal.REPEAT_ACTION):
            raise UsageError(f"signal {a.signal.value} needs an action input (--sample-dir)")
        sample, vp = _text_scene(a.text, a.side, caes, size), "self"
    else:
        sample, vp = _sample_from_dir(a.sample_dir, a.viewpoint, caes), a.viewpoint
    row = build_task_io(sample, a.signal, vp)
    tokens, trajs, _ = model.infer([row])
    print(f"description: {detokenize(tokens[0])}")
    out = a.out
    if out is None and a.signal in (Signal.EXECUTE, Signal.REPEAT_ACTION):
        out = Path("trajectory.csv")
    if out is not None:
        write_matrix_csv(out, trajs[0])
        print(f"trajectory: {len(trajs[0])} steps -> {out}")
    if a.figure is not None:
        truth = sample.joints if a.sample_dir is not None else None
        plotting.plot_trajectory(trajs[0], truth, a.figure, f"{a.signal.value}")
    return 0


def cmd_gradcheck(a) -> int:
    errs = model_gradcheck(a.probes, a.hidden, a.steps, a.seed)
    ok = True
    for sig, err in errs.items():
        good = err < 1e-4
        ok &= good
        print(f"{sig.value:<16} max rel. error {err:.3e}  {'ok' if good else 'FAIL'}")
    return 0 if ok else 2


COMMANDS = {
    ("dataset", "gen"): cmd_dataset_gen,
    ("cae", "train"): cmd_cae_train,
    ("cae", "encode"): cmd_cae_encode,
    ("train", None): cmd_train,
    ("eval", None): cmd_eval,
    ("translate", None): cmd_translate,
    ("gradcheck", None): cmd_gradcheck,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if exc.code in (0, None) else 1
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING, format="%(asctime)s %(name)s %(message)s")
    try:
        return COMMANDS[(a.command, getattr(a, "action", None))](a)
    except UsageError as exc:
        print(f"pgae: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        log.debug("failure", exc_info=True)
        print(f"pgae: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
