"""Dataset ingestion (30-folder layout), top-1/top-3 accuracy with confusion
matrix, and the host throughput benchmark.

Accuracy runs disable threshold rejection. The benchmark times a strictly
sequential single-thread loop by default; an opt-in thread count fans the
iterations out over a pool, and the report records the setting.
"""

from __future__ import annotations

import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .graph import Model, ScenePrediction, infer, run_layers, validate
from .image import SUPPORTED_EXTENSIONS, ImageError, load_image, preprocess
from .labels import NUM_CATEGORIES, SLUG_TO_INDEX
from .tensor import Tensor


class DatasetError(ValueError):
    """Dataset directory layout violation."""


@dataclass
class LabeledDataset:
    """Ordered (image path, category index) items plus per-class counts."""

    items: list[tuple[Path, int]]
    category_names: tuple[str, ...]
    per_class_counts: list[int]
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.items)


def load_dataset(root) -> LabeledDataset:
    """Scan a directory of per-category folders named by canonical slug
    (01_portrait ... 30_monitor_screen). Non-image files are skipped with a
    warning; missing categories only warn, unknown directories are an error."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    warnings: list[str] = []
    items: list[tuple[Path, int]] = []
    counts = [0] * NUM_CATEGORIES
    seen = set()
    for entry in sorted(root.iterdir()):
        if not entry.is_dir():
            warnings.append(f"skipped non-directory {entry.name}")
            continue
        if entry.name not in SLUG_TO_INDEX:
            raise DatasetError(f"unknown category directory {entry.name!r}")
        index = SLUG_TO_INDEX[entry.name]
        seen.add(index)
        for path in sorted(entry.iterdir()):
            if path.suffix.lower() in SUPPORTED_EXTENSIONS:
                items.append((path, index))
                counts[index] += 1
            else:
                warnings.append(f"skipped non-image file {path.relative_to(root)}")
    for slug, index in SLUG_TO_INDEX.items():
        if index not in seen:
            warnings.append(f"category {slug} has no directory")
    if not items:
        raise DatasetError(f"no images found under {root}")
    names = tuple(sorted(SLUG_TO_INDEX, key=SLUG_TO_INDEX.get))
    return LabeledDataset(items, names, counts, warnings)


def split_dataset(dataset: LabeledDataset, train_fraction: float = 0.9,
                  seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """Seeded per-class split (convenience utility; evaluation itself always
    reports on exactly the tree it was given)."""
    if not 0.0 < train_fraction < 1.0:
        raise DatasetError(f"train fraction {train_fraction} outside (0, 1)")
    rng = random.Random(seed)
    by_class: dict[int, list[tuple[Path, int]]] = {}
    for item in dataset.items:
        by_class.setdefault(item[1], []).append(item)
    train_items, val_items = [], []
    for index in sorted(by_class):
        members = list(by_class[index])
        rng.shuffle(members)
        cut = int(round(train_fraction * len(members)))
        train_items.extend(members[:cut])
        val_items.extend(members[cut:])
    train_items.sort()
    val_items.sort()

    def build(items):
        counts = [0] * NUM_CATEGORIES
        for _, idx in items:
            counts[idx] += 1
        return LabeledDataset(items, dataset.category_names, counts)

    return build(train_items), build(val_items)


def topk_accuracy(predictions: list[ScenePrediction], labels: list[int], k: int) -> float:
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions vs {len(labels)} labels")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not predictions:
        return 0.0
    hits = sum(1 for pred, truth in zip(predictions, labels)
               if truth in [idx for idx, _, _ in pred.entries[:k]])
    return hits / len(predictions)


@dataclass
class EvalReport:
    model_name: str
    quantized: bool
    image_count: int
    top1: float
    top3: float
    confusion: np.ndarray           # (30, 30) rows = truth, cols = top-1
    per_class_accuracy: list[float]
    decode_failures: list[str] = field(default_factory=list)
    workers: int = 1
    calibration_note: str = ""

    def to_text(self) -> str:
        lines = [
            f"model {self.model_name}",
            f"quantized {'yes' if self.quantized else 'no'}",
            f"images {self.image_count}",
            f"workers {self.workers}",
            f"top1 {self.top1:.6f}",
            f"top3 {self.top3:.6f}",
        ]
        if self.calibration_note:
            lines.append(f"calibration {self.calibration_note}")
        for i, acc in enumerate(self.per_class_accuracy):
            lines.append(f"class_acc {i:02d} {acc:.6f}")
        for i in range(self.confusion.shape[0]):
            row = " ".join(str(int(v)) for v in self.confusion[i])
            lines.append(f"confusion {i:02d} {row}")
        for failure in self.decode_failures:
            lines.append(f"decode_failure {failure}")
        return "\n".join(lines) + "\n"


def evaluate(model: Model, dataset: LabeledDataset, *, top_k: int = 3,
             workers: int = 1, collect_probabilities: bool = False,
             calibration_note: str = "") -> EvalReport:
    """Full accuracy pass with threshold rejection disabled.

    Images that fail decoding are recorded and excluded, never abort the run.
    Results are deterministic and independent of the worker count.
    """
    diags = validate(model)
    if diags:
        raise DatasetError("model failed validation: " + "; ".join(diags))

    def classify(item):
        path, truth = item
        try:
            img = load_image(path)
        except (ImageError, OSError) as e:
            return None, truth, str(path), str(e)
        x = preprocess(img, model.input_h, model.input_w)
        if collect_probabilities:
            probs = run_layers(model, x)
            order = np.argsort(-probs, kind="stable")[:top_k]
            pred = ScenePrediction([(int(i), model.labels[int(i)], float(probs[i]))
                                    for i in order])
            return pred, truth, str(path), probs
        return infer(model, x, top_k=top_k, reject_threshold=0.0), truth, str(path), None

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(classify, dataset.items))
    else:
        results = [classify(item) for item in dataset.items]

    predictions, labels, failures, prob_vectors = [], [], [], []
    for pred, truth, path, extra in results:
        if pred is None:
            failures.append(f"{path}: {extra}")
            continue
        predictions.append(pred)
        labels.append(truth)
        if collect_probabilities:
            prob_vectors.append(extra)

    confusion = np.zeros((NUM_CATEGORIES, NUM_CATEGORIES), dtype=np.int64)
    for pred, truth in zip(predictions, labels):
        confusion[truth, pred.entries[0][0]] += 1
    per_class = []
    for i in range(NUM_CATEGORIES):
        row_total = int(confusion[i].sum())
        per_class.append(float(confusion[i, i] / row_total) if row_total else 0.0)
    report = EvalReport(
        model_name=model.name,
        quantized=model.quantized,
        image_count=len(predictions),
        top1=topk_accuracy(predictions, labels, 1),
        top3=topk_accuracy(predictions, labels, min(top_k, 3)),
        confusion=confusion,
        per_class_accuracy=per_class,
        decode_failures=failures,
        workers=workers,
        calibration_note=calibration_note,
    )
    if collect_probabilities:
        report.probabilities = prob_vectors  # type: ignore[attr-defined]
    return report


@dataclass
class BenchReport:
    warmup: int
    iters: int
    threads: int
    latencies_ms: list[float]
    fps: float
    p50_ms: float
    p90_ms: float
    p99_ms: float

    def to_text(self) -> str:
        return (
            f"warmup {self.warmup}\n"
            f"iters {self.iters}\n"
            f"threads {self.threads}\n"
            f"fps {self.fps:.3f}\n"
            f"p50_ms {self.p50_ms:.3f}\n"
            f"p90_ms {self.p90_ms:.3f}\n"
            f"p99_ms {self.p99_ms:.3f}\n"
        )


def _percentile(sorted_values: list[float], q: float) -> float:
    # Nearest-rank on the sorted latency list.
    rank = max(1, int(np.ceil(q / 100.0 * len(sorted_values))))
    return sorted_values[rank - 1]


def benchmark(model: Model, image: Tensor, warmup: int = 5, iters: int = 50,
              threads: int = 1,
              infer_fn: Optional[Callable[[], object]] = None) -> BenchReport:
    """Latency/throughput measurement on the monotonic clock.

    Warmup runs are excluded from timing. ``infer_fn`` overrides the timed
    callable (test hook).
    """
    if warmup < 0 or iters < 1 or threads < 1:
        raise ValueError("warmup >= 0, iters >= 1 and threads >= 1 required")
    run = infer_fn if infer_fn is not None else (lambda: run_layers(model, image))

    def timed() -> float:
        start = time.perf_counter()
        run()
        return (time.perf_counter() - start) * 1000.0

    for _ in range(warmup):
        run()
    if threads == 1:
        latencies = [timed() for _ in range(iters)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            latencies = list(pool.map(lambda _: timed(), range(iters)))
    total_s = sum(latencies) / 1000.0
    fps = iters / (total_s / threads)
    ordered = sorted(latencies)
    return BenchReport(
        warmup=warmup, iters=iters, threads=threads, latencies_ms=latencies,
        fps=fps,
        p50_ms=_percentile(ordered, 50.0),
        p90_ms=_percentile(ordered, 90.0),
        p99_ms=_percentile(ordered, 99.0),
    )
