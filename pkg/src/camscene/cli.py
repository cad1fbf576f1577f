"""Command-line entry point: classify, evaluate, quantize, bench, inspect.

Results go to stdout (fixed field order, one record per line); diagnostics
go to stderr. Exit codes: 0 success, 1 runtime failure, 2 usage error.
Output files are written to a temp path and renamed on success, so a failed
run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from . import csdm
from .evalbench import DatasetError, benchmark, evaluate, load_dataset
from .graph import GraphError, infer
from .image import ImageError, load_image, preprocess
from .ops import OpError
from .quantize import QuantizeError, calibrate, quantize_model
from .tensor import TensorError

_RUNTIME_ERRORS = (csdm.CsdmError, GraphError, OpError, TensorError, ImageError,
                   DatasetError, QuantizeError, OSError, ValueError)

DEFAULT_CALIBRATION_LIMIT = 100


def _write_output(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_bytes(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_model(path: str):
    return csdm.load_model(Path(path).read_bytes())


def _cmd_classify(args) -> int:
    model = _load_model(args.model)
    for image_path in args.image:
        raw = load_image(image_path)
        x = preprocess(raw, model.input_h, model.input_w)
        prediction = infer(model, x, top_k=args.top, reject_threshold=args.threshold)
        if prediction.is_empty:
            print(f"{image_path}\tno confident prediction")
            continue
        for index, label, prob in prediction.entries:
            print(f"{image_path}\t{index}\t{label}\t{prob:.9f}")
    return 0


def _cmd_evaluate(args) -> int:
    model = _load_model(args.model)
    dataset = load_dataset(args.data_dir)
    for warning in dataset.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    report = evaluate(model, dataset, workers=args.workers,
                      calibration_note=args.note)
    text = report.to_text()
    if args.format == "table":
        text = _human_eval_table(report)
    if args.report:
        _write_output(Path(args.report), text)
        print(f"report written to {args.report}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def _human_eval_table(report) -> str:
    lines = [
        f"{'model':<12} {'quantized':<10} {'images':<8} {'top-1':<8} {'top-3':<8}",
        f"{report.model_name:<12} {'yes' if report.quantized else 'no':<10} "
        f"{report.image_count:<8} {report.top1:<8.4f} {report.top3:<8.4f}",
    ]
    return "\n".join(lines) + "\n"


def _cmd_quantize(args) -> int:
    model = _load_model(args.model)
    dataset = load_dataset(args.calib_dir)
    items = dataset.items[:args.calib_limit]
    images = (preprocess(load_image(path), model.input_h, model.input_w)
              for path, _ in items)
    stats = calibrate(model, images)
    print(f"calibrated on {stats.image_count} images "
          f"(limit {args.calib_limit})", file=sys.stderr)
    quantized = quantize_model(model, stats)
    _write_bytes(Path(args.out), csdm.save_model(quantized))
    print(f"quantized model written to {args.out}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    model = _load_model(args.model)
    raw = load_image(args.image)
    x = preprocess(raw, model.input_h, model.input_w)
    report = benchmark(model, x, warmup=args.warmup, iters=args.iters,
                       threads=args.threads)
    sys.stdout.write(report.to_text())
    return 0


def _cmd_inspect(args) -> int:
    print(csdm.inspect(Path(args.model).read_bytes()))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="camscene",
        description="Camera scene classification: classify images, evaluate "
                    "datasets, quantize models, benchmark throughput, inspect "
                    "CSDM files.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="classify one or more images")
    p.add_argument("--model", required=True, help="CSDM model file")
    p.add_argument("--image", required=True, action="append",
                   help="image file (.ppm or .png); repeatable")
    p.add_argument("--top", type=int, default=3, help="entries to report (default 3)")
    p.add_argument("--threshold", type=float, default=0.0,
                   help="reject when the best probability is below this (default 0)")
    p.set_defaults(func=_cmd_classify)

    p = sub.add_parser("evaluate", help="top-1/top-3 accuracy over a dataset tree")
    p.add_argument("--model", required=True)
    p.add_argument("--data-dir", required=True)
    p.add_argument("--report", help="write the report here instead of stdout")
    p.add_argument("--format", choices=("text", "table"), default="text")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--note", default="", help="free-form note recorded in the report")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("quantize", help="calibrate and convert a float model to int8")
    p.add_argument("--model", required=True)
    p.add_argument("--calib-dir", required=True,
                   help="calibration images in the dataset directory layout")
    p.add_argument("--out", required=True)
    p.add_argument("--calib-limit", type=int, default=DEFAULT_CALIBRATION_LIMIT,
                   help=f"max calibration images (default {DEFAULT_CALIBRATION_LIMIT})")
    p.set_defaults(func=_cmd_quantize)

    p = sub.add_parser("bench", help="latency/throughput benchmark")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--warmup", type=int, default=5)
    p.add_argument("--iters", type=int, default=50)
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("inspect", help="summarize a CSDM file")
    p.add_argument("--model", required=True)
    p.set_defaults(func=_cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _RUNTIME_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
