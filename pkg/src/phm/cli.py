"""Command line entry point: ``phm <subcommand> ...``.

Exit codes: 0 on success, 1 for usage errors, 2 for runtime errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import classic
from .data import (DEGRADE_KINDS, DegradeSpec, degrade, generate_shapes_dataset, load_dataset,
                   save_dataset, split)
from .errors import FormatError, ShapeError
from .image import load_ppm, save_ppm
from .matcher import init_linear_ramp, load_params, phm_forward, save_params
from .model import load_model, save_model
from .train import TrainConfig, evaluate, train, write_metrics_csv

log = logging.getLogger("phm")

EXIT_USAGE = 1
EXIT_RUNTIME = 2

EVAL_SUITE = tuple(DegradeSpec(k, 0.7) for k in DEGRADE_KINDS)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _image_size(text: str) -> tuple[int, int]:
    w, sep, h = text.lower().partition("x")
    try:
        out = int(w), int(h)
    except ValueError:
        out = None
    if not sep or out is None or min(out) < 1:
        raise argparse.ArgumentTypeError(f"expected WxH, got {text!r}")
    return out


def _degrade_arg(text: str) -> DegradeSpec:
    try:
        return DegradeSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _drops_arg(text: str):
    drops = []
    for item in filter(None, text.split(",")):
        epoch, _, factor = item.partition(":")
        try:
            drops.append((int(epoch), float(factor or 0.1)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected epoch[:factor],..., got {text!r}") from None
    return tuple(drops)


def _load_samples(data: str, per_class: int, classes: int, seed: int):
    if data == "synthetic":
        return generate_shapes_dataset(classes, per_class, seed)
    root = Path(data)
    if not root.is_dir():
        raise FileNotFoundError(f"data directory not found: {root}")
    try:
        return load_dataset(root)
    except ValueError as exc:
        raise ValueError(f"cannot load dataset from {root}: {exc}") from None


# -- subcommands -------------------------------------------------------------

def cmd_hist(args):
    image = load_ppm(args.input)
    hists = [classic.histogram(image[c]) for c in range(image.shape[0])]
    out = open(args.csv, "w", newline="") if args.csv else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["bin", "r", "g", "b"])
        for b in range(classic.NBINS):
            w.writerow([b] + [int(h[b]) for h in hists])
    finally:
        if args.csv:
            out.close()


def cmd_equalize(args):
    save_ppm(classic.equalize(load_ppm(args.input)), args.output)


def cmd_match(args):
    save_ppm(classic.match_histograms(load_ppm(args.source), load_ppm(args.target)), args.output)


def cmd_phm_init(args):
    save_params(init_linear_ramp(args.channels, args.size), args.output)


def cmd_phm_apply(args):
    pc = load_params(args.params)
    out, _ = phm_forward(load_ppm(args.input), pc)
    save_ppm(out, args.output)


def _config(args, size=None) -> TrainConfig:
    return TrainConfig(
        epochs=args.epochs,
        batch_size=args.batch_size,
        lr=args.lr,
        lr_drops=args.lr_drops if args.lr_drops is not None else TrainConfig.lr_drops,
        seed=args.seed,
        size=size if size is not None else args.size,
        phm_enabled=not args.no_phm,
        augment=not args.no_augment,
    )


def cmd_train(args):
    samples = _load_samples(args.data, args.per_class, args.classes, args.seed)
    result = train(samples, _config(args))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(result.history, out / "metrics.csv")
    save_model(result.model, out / "model.tcn1")
    save_params(result.params, out / "params.phm1")
    last = result.history[-1]
    print(f"epochs={last.epoch} loss={last.loss:.6f} train_acc={last.train_acc:.4f} out={out}")


def cmd_eval(args):
    model = load_model(args.model)
    pc = load_params(args.params) if args.params else None
    samples = _load_samples(args.data, args.per_class, model.num_classes, args.seed)
    top1 = evaluate(model, pc, samples, phm_enabled=pc is not None, degradation=args.degrade, seed=args.seed)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["degrade", "n", "top1"])
        w.writerow([str(args.degrade) if args.degrade else "none", len(samples), repr(top1)])
    print(f"top1={top1}")


def cmd_ablate(args):
    samples = _load_samples(args.data, args.per_class, args.classes, args.seed)
    trainset, testset = split(samples, args.train_frac, seed=args.seed)
    names = ["clean"] + [s.kind for s in EVAL_SUITE]
    rows = []
    for s in args.sizes:
        res = train(trainset, _config(args, size=s))
        accs = [evaluate(res.model, res.params, testset, phm_enabled=not args.no_phm, seed=args.seed)]
        accs += [evaluate(res.model, res.params, testset, phm_enabled=not args.no_phm, degradation=d,
                          seed=args.seed) for d in EVAL_SUITE]
        row = [s] + accs + [float(np.mean(accs[1:]))]
        rows.append(row)
        print(",".join([str(s)] + [f"{a:.4f}" for a in row[1:]]))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["s"] + names + ["adverse_mean"])
        for row in rows:
            w.writerow([row[0]] + [repr(a) for a in row[1:]])


def _time(fn, iters: int) -> list[float]:
    fn()  # warm-up, excluded
    out = []
    for _ in range(iters):
        t0 = time.perf_counter()
        fn()
        out.append((time.perf_counter() - t0) * 1e3)
    return out


def cmd_bench(args):
    w, h = args.image
    rng = np.random.default_rng(args.seed)
    image = rng.integers(0, 256, size=(3, h, w)) / 255.0
    reference = rng.integers(0, 256, size=(3, h, w)) / 255.0
    pc = init_linear_ramp(3, args.size)
    kernels = {
        "phm_forward": lambda: phm_forward(image, pc),
        "equalize": lambda: classic.equalize(image),
        "match": lambda: classic.match_histograms(image, reference),
    }
    with threadpool_limits(limits=1):
        for name, fn in kernels.items():
            ts = _time(fn, args.iters)
            print(f"{name} mean_ms={np.mean(ts):.3f} min_ms={np.min(ts):.3f} iters={args.iters}")


def cmd_gen_data(args):
    samples = generate_shapes_dataset(args.classes, args.per_class, args.seed)
    save_dataset(samples, args.out)
    print(f"wrote {len(samples)} images to {args.out}")


def cmd_degrade(args):
    src = Path(args.input)
    if not src.is_dir():
        raise FileNotFoundError(f"input directory not found: {src}")
    spec = DegradeSpec(args.kind, args.severity)
    files = sorted(src.glob("*/*.ppm"))
    if not files:
        raise ValueError(f"no .ppm images found under {src}")
    dst = Path(args.output)
    for i, f in enumerate(files):
        out = dst / f.parent.name / f.name
        out.parent.mkdir(parents=True, exist_ok=True)
        save_ppm(degrade(load_ppm(f), spec, seed=(args.seed, i)), out)
    print(f"wrote {len(files)} images to {dst}")


# -- parser --------------------------------------------------------------------

def _add_train_flags(p):
    p.add_argument("--data", default="synthetic", help="dataset directory or 'synthetic'")
    p.add_argument("--per-class", type=int, default=200, help="samples per class for synthetic data")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--lr-drops", type=_drops_arg, default=None, help="e.g. 15:0.1,25:0.1")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=2048, help="trainable parameters per channel")
    p.add_argument("--no-phm", action="store_true", help="train the classifier without the matcher")
    p.add_argument("--no-augment", action="store_true", help="disable random horizontal flips")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="phm", description="Parametric histogram matching toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("hist", help="256-bin histogram CSV")
    p.add_argument("input")
    p.add_argument("--csv", help="output file (default: stdout)")
    p.set_defaults(func=cmd_hist)

    p = sub.add_parser("equalize", help="classical histogram equalization")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_equalize)

    p = sub.add_parser("match", help="classical histogram matching onto a target image")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("output")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("phm-init", help="write a linear-ramp parameter file")
    p.add_argument("--channels", type=int, default=3)
    p.add_argument("--size", type=int, default=2048)
    p.add_argument("output")
    p.set_defaults(func=cmd_phm_init)

    p = sub.add_parser("phm-apply", help="apply a parameter file to an image")
    p.add_argument("params")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_phm_apply)

    p = sub.add_parser("train", help="train classifier and matcher jointly")
    _add_train_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="top-1 accuracy of a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--params", help="matcher parameters; omit for the no-preprocessing baseline")
    p.add_argument("--data", required=True, help="dataset directory or 'synthetic'")
    p.add_argument("--per-class", type=int, default=50)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--degrade", type=_degrade_arg, help="kind:severity applied before evaluation")
    p.add_argument("--out", default="eval.csv")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train + evaluate once per parameter size")
    _add_train_flags(p)
    p.set_defaults(per_class=250)
    p.add_argument("--sizes", type=_int_list, default=[256, 512, 1024, 2048, 4096])
    p.add_argument("--train-frac", type=float, default=0.8)
    p.add_argument("--out", default="ablate.csv")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("bench", help="time the preprocessing kernels")
    p.add_argument("--image", type=_image_size, default=(224, 224), help="WxH")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--size", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-data", help="write the synthetic dataset as PPM files")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=100)
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("degrade", help="degrade a PPM dataset directory")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--kind", choices=DEGRADE_KINDS, required=True)
    p.add_argument("--severity", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_degrade)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (FileNotFoundError, FormatError, ShapeError, ValueError, OSError) as exc:
        print(f"phm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
