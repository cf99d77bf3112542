"""``featdistill`` command line: distort | prepare | train | infer | eval.

Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.
``FEATDISTILL_LOG`` sets the log level and nothing else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from featdistill import __version__
from featdistill.config import load_config
from featdistill.distortions import PipelineMode
from featdistill.errors import FeatDistillError

EXIT_OK, EXIT_PARTIAL, EXIT_USAGE = 0, 1, 2

log = logging.getLogger("featdistill")


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _mode(text: str) -> PipelineMode:
    try:
        return PipelineMode.parse(text)
    except FeatDistillError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_distort(args) -> int:
    from featdistill.pipeline import distort_folder

    ok, failed = distort_folder(args.in_dir, args.out_dir, args.mode, args.seed, args.count,
                                args.jobs, args.manifest)
    print(f"distorted {ok} image(s) x {args.count}; {failed} unreadable")
    return EXIT_PARTIAL if failed and not ok else EXIT_OK


def cmd_prepare(args) -> int:
    from featdistill.pipeline import prepare_blobs, prepare_images

    if args.dataset == "blobs":
        path = prepare_blobs(args.out, args.seed, args.items)
    else:
        path = prepare_images(args.out, args.seed, args.train, args.test, args.size)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_train(args) -> int:
    from featdistill.pipeline import train_run

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"seed": args.seed})
    summary = train_run(cfg, jobs=args.jobs)
    for name, stats in summary["experts"].items():
        print(f"{name}\tstage1_auc={stats['stage1_train_auc']:.6f}\tfinal_auc={stats['final_train_auc']:.6f}")
    return EXIT_OK


def cmd_infer(args) -> int:
    from featdistill.pipeline import infer_run

    cfg = load_config(args.config)
    written, failed = infer_run(cfg, args.manifest, args.out, jobs=args.jobs)
    print(f"predicted {written} item(s); {len(failed)} skipped")
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_eval(args) -> int:
    from featdistill.pipeline import eval_run

    eval_run(args.predictions, args.manifest, args.out)
    with open(os.path.join(args.out, "report.txt"), encoding="utf-8") as fh:
        sys.stdout.write(fh.read())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="featdistill", description="Robust AI-generated image detection toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=_seed, default=0, help="root seed (default 0)")
    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument("--jobs", type=_positive, default=1, help="worker threads; output does not depend on it")

    p = sub.add_parser("distort", parents=[seeded, jobs], help="write degraded copies of a PNG folder")
    p.add_argument("in_dir")
    p.add_argument("out_dir")
    p.add_argument("--mode", type=_mode, default=PipelineMode.MIXED_EQUAL,
                   help="clean | official_only | extended_only | mixed_equal")
    p.add_argument("--count", type=_positive, default=1, help="degraded copies per image")
    p.add_argument("--manifest", help="input manifest; an output manifest with distortion tags is written")
    p.set_defaults(func=cmd_distort)

    p = sub.add_parser("prepare", parents=[seeded], help="generate a toy dataset with a matching config")
    p.add_argument("dataset", choices=["blobs", "images"])
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--items", type=_positive, default=512, help="blobs: number of items")
    p.add_argument("--train", type=_positive, default=64, help="images: train items")
    p.add_argument("--test", type=_positive, default=32, help="images: test items")
    p.add_argument("--size", type=_positive, default=48, help="images: side in pixels")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[jobs], help="train every expert in a config")
    p.add_argument("config")
    p.add_argument("--seed", type=_seed, default=None, help="override the config seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", parents=[jobs], help="ensemble predictions CSV for a manifest")
    p.add_argument("config")
    p.add_argument("--manifest", help="manifest to score (default: the config's)")
    p.add_argument("--out", help="predictions CSV (default: <output_dir>/predictions.csv)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="robust ROC-AUC report from predictions and a manifest")
    p.add_argument("predictions")
    p.add_argument("manifest")
    p.add_argument("--out", required=True, help="report directory (report.json, report.txt, figures)")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("FEATDISTILL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FeatDistillError as exc:
        print(f"featdistill {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
