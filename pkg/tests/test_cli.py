import pytest

from camscene import csdm
from camscene.cli import main
from camscene.labels import SLUGS


@pytest.fixture(scope="module")
def cli_env(tmp_path_factory):
    """Models and a small dataset on disk for end-to-end CLI runs."""
    import make_fixtures
    root = tmp_path_factory.mktemp("cli")
    toy = make_fixtures.build_toy_color_model()
    model_path = root / "toy.csdm"
    model_path.write_bytes(csdm.save_model(toy))
    data_dir = root / "data"
    make_fixtures.write_toy_dataset(data_dir, per_class=2, seed=3)
    image = next((data_dir / SLUGS[0]).glob("*.ppm"))
    return {"root": root, "model": str(model_path), "data": str(data_dir),
            "image": str(image)}


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestClassify:
    def test_three_ranked_lines(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "classify", "--model", cli_env["model"],
                               "--image", cli_env["image"])
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 3
        probs = [float(line.split("\t")[-1]) for line in lines]
        assert probs == sorted(probs, reverse=True)
        # fixed field order: path, index, label, probability
        fields = lines[0].split("\t")
        assert fields[0] == cli_env["image"]
        assert fields[1].isdigit()

    def test_high_threshold_uniform_model_says_no_prediction(self, tmp_path, capsys):
        from test_graph import uniform_output_model
        model_path = tmp_path / "uniform.csdm"
        model_path.write_bytes(csdm.save_model(uniform_output_model(32)))
        px = tmp_path / "img.ppm"
        px.write_bytes(b"P6 1 1 255\n\x80\x80\x80")
        code, out, _ = run_cli(capsys, "classify", "--model", str(model_path),
                               "--image", str(px), "--threshold", "0.9")
        assert code == 0
        assert "no confident prediction" in out

    def test_multiple_images(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "classify", "--model", cli_env["model"],
                               "--image", cli_env["image"],
                               "--image", cli_env["image"], "--top", "1")
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_missing_model_file_is_runtime_error(self, cli_env, capsys):
        code, out, err = run_cli(capsys, "classify", "--model", "/nope.csdm",
                                 "--image", cli_env["image"])
        assert code == 1
        assert err.startswith("error:")
        assert out == ""

    def test_unknown_flag_is_usage_error(self, cli_env):
        with pytest.raises(SystemExit) as exc:
            main(["classify", "--model", cli_env["model"], "--bogus"])
        assert exc.value.code == 2


class TestEvaluate:
    def test_report_to_stdout(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "evaluate", "--model", cli_env["model"],
                               "--data-dir", cli_env["data"])
        assert code == 0
        assert out.startswith("model ")
        assert "top1 1.000000" in out

    def test_report_file_written_atomically(self, cli_env, capsys, tmp_path):
        report = tmp_path / "report.txt"
        code, _, err = run_cli(capsys, "evaluate", "--model", cli_env["model"],
                               "--data-dir", cli_env["data"],
                               "--report", str(report))
        assert code == 0
        assert report.exists()
        assert "top3" in report.read_text()
        leftovers = [p for p in tmp_path.iterdir() if p != report]
        assert leftovers == []

    def test_table_format(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "evaluate", "--model", cli_env["model"],
                               "--data-dir", cli_env["data"], "--format", "table")
        assert code == 0
        assert "top-1" in out


class TestQuantizeFlow:
    def test_quantize_then_classify_and_bench(self, cli_env, capsys, tmp_path):
        qpath = tmp_path / "toy_q.csdm"
        code, _, err = run_cli(capsys, "quantize", "--model", cli_env["model"],
                               "--calib-dir", cli_env["data"], "--out", str(qpath))
        assert code == 0
        assert "calibrated on 60 images" in err
        # quantized model classifies the same image to the same class
        code, out_q, _ = run_cli(capsys, "classify", "--model", str(qpath),
                                 "--image", cli_env["image"], "--top", "1")
        assert code == 0
        code, out_f, _ = run_cli(capsys, "classify", "--model", cli_env["model"],
                                 "--image", cli_env["image"], "--top", "1")
        assert out_q.split("\t")[1] == out_f.split("\t")[1]
        # bench runs on the quantized model
        code, out, _ = run_cli(capsys, "bench", "--model", str(qpath),
                               "--image", cli_env["image"],
                               "--warmup", "1", "--iters", "3")
        assert code == 0
        assert "fps " in out

    def test_failed_quantize_leaves_no_partial_file(self, cli_env, capsys, tmp_path):
        qpath = tmp_path / "never.csdm"
        code, _, err = run_cli(capsys, "quantize", "--model", cli_env["model"],
                               "--calib-dir", str(tmp_path / "missing"),
                               "--out", str(qpath))
        assert code == 1
        assert not qpath.exists()


class TestBenchCli:
    def test_bench_report_fields(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "bench", "--model", cli_env["model"],
                               "--image", cli_env["image"],
                               "--warmup", "0", "--iters", "4", "--threads", "2")
        assert code == 0
        keys = [line.split()[0] for line in out.strip().splitlines()]
        assert keys == ["warmup", "iters", "threads", "fps", "p50_ms", "p90_ms", "p99_ms"]
        assert "threads 2" in out


class TestInspectCli:
    def test_inspect_prints_labels(self, cli_env, capsys):
        code, out, _ = run_cli(capsys, "inspect", "--model", cli_env["model"])
        assert code == 0
        assert "Portrait" in out and "Monitor Screen" in out
        assert "total parameters:" in out
