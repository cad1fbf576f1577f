import time

import numpy as np
import pytest

import oracles
from camscene.evalbench import (DatasetError, benchmark, evaluate,
                                load_dataset, split_dataset, topk_accuracy)
from camscene.graph import ScenePrediction
from camscene.labels import SLUGS
from camscene.tensor import Tensor

from test_graph import uniform_output_model


class TestLoadDataset:
    def test_full_fixture_tree(self, toy_dataset):
        assert len(toy_dataset) == 60
        assert toy_dataset.per_class_counts == [2] * 30
        assert [w for w in toy_dataset.warnings if "no directory" in w] == []

    def test_unknown_directory_rejected(self, tmp_path):
        (tmp_path / "not_a_scene").mkdir()
        with pytest.raises(DatasetError, match="not_a_scene"):
            load_dataset(tmp_path)

    def test_subset_loads_with_warnings(self, tmp_path, toy_dataset_dir):
        import shutil
        for slug in SLUGS[:3]:
            shutil.copytree(toy_dataset_dir / slug, tmp_path / slug)
        ds = load_dataset(tmp_path)
        assert len(ds) == 6
        assert sum(1 for w in ds.warnings if "no directory" in w) == 27

    def test_non_image_files_skipped_with_warning(self, tmp_path):
        d = tmp_path / SLUGS[0]
        d.mkdir()
        (d / "img.ppm").write_bytes(b"P6 1 1 255\n\x00\x00\x00")
        (d / "notes.txt").write_text("not an image")
        ds = load_dataset(tmp_path)
        assert len(ds) == 1
        assert any("notes.txt" in w for w in ds.warnings)

    def test_empty_tree_rejected(self, tmp_path):
        (tmp_path / SLUGS[0]).mkdir()
        with pytest.raises(DatasetError, match="no images"):
            load_dataset(tmp_path)

    def test_deterministic_ordering(self, toy_dataset_dir):
        a = load_dataset(toy_dataset_dir)
        b = load_dataset(toy_dataset_dir)
        assert a.items == b.items
        assert a.items == sorted(a.items)


class TestSplitDataset:
    def _synthetic(self, per_class=20):
        from pathlib import Path
        from camscene.evalbench import LabeledDataset
        items = [(Path(f"{slug}/img_{i:03d}.ppm"), idx)
                 for idx, slug in enumerate(SLUGS) for i in range(per_class)]
        return LabeledDataset(items, tuple(SLUGS), [per_class] * 30)

    def test_seeded_90_10(self):
        ds = self._synthetic()
        train, val = split_dataset(ds, 0.9, seed=5)
        assert len(train) + len(val) == len(ds)
        assert len(val) == 60  # 10% of 20 per class
        assert set(train.items).isdisjoint(val.items)
        again_train, again_val = split_dataset(ds, 0.9, seed=5)
        assert train.items == again_train.items and val.items == again_val.items
        other_train, _ = split_dataset(ds, 0.9, seed=6)
        assert train.items != other_train.items  # seed actually matters


def _pred(ranking):
    return ScenePrediction([(i, f"c{i}", 1.0 / (r + 1)) for r, i in enumerate(ranking)])


class TestTopkAccuracy:
    def test_truth_first(self):
        preds = [_pred([i, (i + 1) % 30, (i + 2) % 30]) for i in range(30)]
        labels = list(range(30))
        assert topk_accuracy(preds, labels, 1) == 1.0
        assert topk_accuracy(preds, labels, 3) == 1.0

    def test_truth_always_second(self):
        preds = [_pred([(i + 1) % 30, i, (i + 2) % 30]) for i in range(30)]
        labels = list(range(30))
        assert topk_accuracy(preds, labels, 1) == 0.0
        assert topk_accuracy(preds, labels, 3) == 1.0

    def test_matches_counting_oracle(self, rng):
        rankings = [list(rng.permutation(30)[:3]) for _ in range(1000)]
        labels = [int(rng.integers(0, 30)) for _ in range(1000)]
        preds = [_pred(r) for r in rankings]
        for k in (1, 2, 3):
            expected = oracles.topk_count_ref(rankings, labels, k) / 1000
            assert topk_accuracy(preds, labels, k) == pytest.approx(expected)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            topk_accuracy([_pred([0])], [0, 1], 1)


class TestEvaluate:
    def test_toy_model_perfect_on_its_data(self, toy_model, toy_dataset):
        report = evaluate(toy_model, toy_dataset)
        assert report.image_count == 60
        assert report.top1 == 1.0 and report.top3 == 1.0
        assert int(np.trace(report.confusion)) == 60

    def test_confusion_trace_equals_top1(self, tiny_model, toy_dataset):
        report = evaluate(tiny_model, toy_dataset)
        assert report.top1 == pytest.approx(
            np.trace(report.confusion) / report.image_count)
        assert report.confusion.sum() == report.image_count
        # row sums match per-class counts (no decode failures here)
        assert list(report.confusion.sum(axis=1)) == toy_dataset.per_class_counts
        assert report.top1 <= report.top3

    def test_uniform_model_top1_is_class_zero_rate(self, toy_dataset):
        # all-equal probabilities -> tie-break picks category 0 every time
        model = uniform_output_model(input_size=32)
        report = evaluate(model, toy_dataset)
        assert report.top1 == pytest.approx(2 / 60)
        assert report.top3 == pytest.approx(6 / 60)

    def test_decode_failures_recorded_not_fatal(self, toy_model, tmp_path, toy_dataset_dir):
        import shutil
        shutil.copytree(toy_dataset_dir / SLUGS[0], tmp_path / SLUGS[0])
        bad = tmp_path / SLUGS[0] / "broken.ppm"
        bad.write_bytes(b"P6 4 4 255\n\x00")  # truncated
        ds = load_dataset(tmp_path)
        report = evaluate(toy_model, ds)
        assert report.image_count == 2
        assert len(report.decode_failures) == 1 and "broken.ppm" in report.decode_failures[0]

    def test_worker_counts_agree_bitwise(self, toy_model, toy_dataset):
        r1 = evaluate(toy_model, toy_dataset, workers=1, collect_probabilities=True)
        r8 = evaluate(toy_model, toy_dataset, workers=8, collect_probabilities=True)
        assert r1.top1 == r8.top1
        for a, b in zip(r1.probabilities, r8.probabilities):
            assert np.array_equal(a, b)

    def test_report_text_stable_key_order(self, toy_model, toy_dataset):
        text = evaluate(toy_model, toy_dataset).to_text()
        keys = [line.split()[0] for line in text.strip().splitlines()]
        assert keys[:6] == ["model", "quantized", "images", "workers", "top1", "top3"]
        assert keys.count("confusion") == 30


class TestBenchmark:
    def test_latency_list_length(self, tiny_model, rng):
        x = Tensor(rng.uniform(-1, 1, (1, 32, 32, 3)).astype(np.float32))
        report = benchmark(tiny_model, x, warmup=1, iters=10)
        assert len(report.latencies_ms) == 10
        assert report.warmup == 1 and report.threads == 1

    def test_fps_definition_and_percentile_ordering(self, tiny_model, rng):
        x = Tensor(rng.uniform(-1, 1, (1, 32, 32, 3)).astype(np.float32))
        report = benchmark(tiny_model, x, warmup=0, iters=12)
        assert report.fps == pytest.approx(
            12 / (sum(report.latencies_ms) / 1000.0))
        assert report.p50_ms <= report.p90_ms <= report.p99_ms
        assert report.fps > 0

    def test_warmup_excluded(self):
        calls = {"n": 0}

        def fake_run():
            calls["n"] += 1
            if calls["n"] == 1:
                time.sleep(0.25)  # artificially slow first iteration

        report = benchmark(None, None, warmup=1, iters=5, infer_fn=fake_run)
        assert calls["n"] == 6
        assert max(report.latencies_ms) < 200.0  # the slow call was warmup

    def test_warmup_zero_includes_slow_first(self):
        calls = {"n": 0}

        def fake_run():
            calls["n"] += 1
            if calls["n"] == 1:
                time.sleep(0.25)

        report = benchmark(None, None, warmup=0, iters=5, infer_fn=fake_run)
        assert max(report.latencies_ms) >= 200.0

    def test_multithread_reports_setting(self):
        report = benchmark(None, None, warmup=0, iters=8, threads=4,
                           infer_fn=lambda: None)
        assert report.threads == 4
        assert len(report.latencies_ms) == 8

    def test_preconditions(self, tiny_model, rng):
        x = Tensor(rng.uniform(-1, 1, (1, 32, 32, 3)).astype(np.float32))
        with pytest.raises(ValueError):
            benchmark(tiny_model, x, warmup=-1, iters=5)
        with pytest.raises(ValueError):
            benchmark(tiny_model, x, warmup=0, iters=0)

    def test_report_text_fields(self):
        report = benchmark(None, None, warmup=0, iters=3, infer_fn=lambda: None)
        text = report.to_text()
        keys = [line.split()[0] for line in text.strip().splitlines()]
        assert keys == ["warmup", "iters", "threads", "fps", "p50_ms", "p90_ms", "p99_ms"]
