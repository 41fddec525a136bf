"""Command line: gen-data, train, eval, rollout."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io
from .baseline import CIMEDNet
from .data import DEFAULT_N, TASKS, evaluate_motions, load_dataset, make_dataset, write_dataset
from .dmp import BasisSet, concat_segments, rollout_batch
from .errors import ParameterError
from .metrics import aggregate
from .model import DEFAULT_DT, DSDNet, load_model

MODELS = ("dsdnet", "cimednet-eq", "cimednet-plus")
REQUIRED = {
    "gen-data": ("out",),
    "train": ("dataset", "weights"),
    "eval": ("dataset",),
    "rollout": ("image", "weights", "out"),
}


def load_estimator(path):
    variant = load_model(path)[0]
    return DSDNet.load(path) if variant == "dsdnet" else CIMEDNet.load(path)


def cmd_gen_data(args):
    ds = make_dataset(args.task, args.count, args.seed, N=args.N, M=args.M)
    out = write_dataset(ds, args.out)
    sizes = {k: len(v) for k, v in ds.splits.items()}
    print(f"wrote {len(ds.ids)} records to {out} (M={ds.M}, N={ds.N}, d={ds.d}; splits {sizes})")


def _estimator(args):
    common = dict(lr=args.lr, batch_size=args.batch, max_epochs=args.epochs, random_state=args.seed)
    if args.model == "dsdnet":
        return DSDNet(**common)
    return CIMEDNet(args.model.split("-")[1], **common)


def _labels(ds, model, split):
    if model == "dsdnet":
        return ds.subset(split)
    variant = model.split("-")[1]
    if variant not in ds.baseline:
        raise ParameterError(f"dataset has no baseline labels for variant {variant!r}")
    return ds.baseline_labels(variant, split)


def cmd_train(args):
    ds = load_dataset(args.dataset)
    est = _estimator(args)
    if not ds.splits["train"]:
        raise ParameterError(f"{args.dataset}: empty training split")
    if ds.splits["val"]:
        val = ds.images("val"), _labels(ds, args.model, "val")
    else:
        print("note: empty validation split; monitoring the training split")
        val = None, None
    est.fit(ds.images("train"), _labels(ds, args.model, "train"), *val)
    est.save(args.weights)
    log_path = args.log or str(args.weights) + ".log.csv"
    io.write_csv(log_path, ["epoch", "train_loss", "val_loss"],
                 [[e, repr(t), repr(v)] for e, t, v in est.log_])
    print(f"{args.model}: {est.n_iter_} epochs, best val loss {est.log_[est.best_epoch_][2]:.6g} "
          f"at epoch {est.best_epoch_}; wrote {args.weights} and {log_path}")
    if est.diverged_:
        print("error: training diverged; wrote the last finite checkpoint", file=sys.stderr)
        return 1
    return 0


def cmd_eval(args):
    ds = load_dataset(args.dataset)
    ids = ds.splits[args.split]
    if args.expert:
        motions = {rid: ds.demos[rid] for rid in ids}
        title = "expert"
    else:
        if not args.weights:
            raise ParameterError("eval needs --weights (or --expert)")
        est = load_estimator(args.weights)
        est.dt = ds.meta.get("dt") or DEFAULT_DT
        images = np.stack([ds.records[r].image for r in ids])
        motions = dict(zip(ids, est.predict_motion(images)))
        title = Path(args.weights).name
    report = aggregate(evaluate_motions(ds, motions))
    Path(args.out).write_text(report.to_csv())
    print(report.table(f"{title} on {args.split} ({len(ids)} records)"))


def svg_overlay(image, segments, size=500) -> str:
    """Motion projected on the image: one polyline per segment, green start dot,
    crosses at segment joints."""
    img = np.asarray(image, dtype=float)
    H, W = img.shape
    px = size / W

    def xy(p):
        return f"{p[0] * size:.2f},{(1.0 - p[1]) * size:.2f}"

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">',
           f'<rect width="{size}" height="{size}" fill="black"/>']
    for r, c in zip(*np.nonzero(img)):
        g = int(round(img[r, c] * 255))
        out.append(f'<rect x="{c * px:.2f}" y="{r * px:.2f}" width="{px:.2f}" height="{px:.2f}" '
                   f'fill="rgb({g},{g},{g})"/>')
    colors = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#42d4f4")
    for k, seg in enumerate(segments):
        pts = " ".join(xy(p) for p in seg.points[:, :2])
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors[k % len(colors)]}" '
                   f'stroke-width="2"/>')
    for seg in segments[:-1]:
        x, y = (float(v) for v in xy(seg.points[-1]).split(","))
        out.append(f'<path d="M{x - 5:.2f},{y - 5:.2f} L{x + 5:.2f},{y + 5:.2f} '
                   f'M{x - 5:.2f},{y + 5:.2f} L{x + 5:.2f},{y - 5:.2f}" stroke="white" stroke-width="2"/>')
    x, y = xy(segments[0].points[0]).split(",")
    out.append(f'<circle cx="{x}" cy="{y}" r="6" fill="lime"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_rollout(args):
    image = io.read_pgm(args.image)
    est = load_estimator(args.weights)
    est.dt = args.dt
    if isinstance(est, DSDNet):
        pred = est.predict(image[None])[0]
        n = pred.n_segments
        segments = rollout_batch(pred.params()[:n], BasisSet.default(est.spec_.N), args.dt)
    else:
        segments = est.predict_motion(image[None])
    motion = concat_segments(segments, len(segments))
    io.write_trajectory(args.out, motion)
    msg = f"wrote {len(motion)} samples in {len(segments)} segment(s) to {args.out}"
    if args.svg:
        Path(args.svg).write_text(svg_overlay(image, segments))
        msg += f" and {args.svg}"
    print(msg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dsdnet", description=__doc__)
    p.add_argument("--config", help="JSON file with default values for any flag")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a benchmark dataset")
    g.add_argument("--task", choices=sorted(TASKS), default="cut")
    g.add_argument("--count", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--M", type=int, default=None, help="segment capacity (default: task maximum)")
    g.add_argument("--N", type=int, default=DEFAULT_N, help="basis functions per segment")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train DSDNet or a baseline")
    t.add_argument("--dataset")
    t.add_argument("--weights", help="output weights file")
    t.add_argument("--model", choices=MODELS, default="dsdnet")
    t.add_argument("--epochs", type=int, default=500)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--batch", type=int, default=16)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--log", help="CSV log path (default: <weights>.log.csv)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate on a dataset split")
    e.add_argument("--dataset")
    e.add_argument("--weights")
    e.add_argument("--expert", action="store_true", help="score the expert demonstrations instead")
    e.add_argument("--split", choices=("train", "val", "test"), default="test")
    e.add_argument("--out", default="report.csv", help="CSV report path")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("rollout", help="predict a motion for one image")
    r.add_argument("--image")
    r.add_argument("--weights")
    r.add_argument("--out", help="trajectory text file")
    r.add_argument("--svg", help="also write an SVG overlay here")
    r.add_argument("--dt", type=float, default=DEFAULT_DT)
    r.set_defaults(func=cmd_rollout)
    return p


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        config = json.loads(Path(args.config).read_text())
        explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in (argv or sys.argv[1:])
                    if a.startswith("--")}
        for key, value in config.items():
            key = key.replace("-", "_")
            if not hasattr(args, key):
                parser.error(f"unknown config key {key!r} for {args.command}")
            if key not in explicit:
                setattr(args, key, value)
    missing = [f"--{k}" for k in REQUIRED[args.command] if getattr(args, k) is None]
    if missing:
        parser.error(f"{args.command} needs {', '.join(missing)}")
    return args


def main(argv=None) -> int:
    args = parse_args(argv)
    try:
        return args.func(args) or 0
    except (ParameterError, FileNotFoundError, OSError, ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
