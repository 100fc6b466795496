import csv
import json

import pytest

from chansep.cli import main
from chansep.dataset import load_manifest
from pipeline import TINY, run_pipeline, write_config


@pytest.fixture(scope="module")
def pipeline_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    run_pipeline(root)
    return root


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


class TestUsage:
    def test_unknown_flag(self, tmp_path, capsys):
        assert main(["synth", "--bogus", "--out", str(tmp_path / "o")]) == 2
        err = capsys.readouterr().err
        assert "usage:" in err
        assert not any(tmp_path.iterdir())

    def test_missing_subcommand(self, capsys):
        assert main([]) == 2

    def test_missing_required(self, tmp_path, capsys):
        assert main(["train", "--alg", "alg3", "--manifest", "m.jsonl", "--out", str(tmp_path / "o")]) == 2
        assert "--ae-dir" in capsys.readouterr().err
        assert not any(tmp_path.iterdir())

    def test_bad_choice(self, capsys):
        assert main(["train-ae", "--class", "Z", "--manifest", "m.jsonl"]) == 2
        assert main(["eval", "--alg", "alg1", "--model", "m", "--manifest", "m", "--jobs", "0"]) == 2


class TestRuntimeErrors:
    def test_missing_manifest(self, tmp_path, capsys):
        code = main(["train-ae", "--class", "A", "--manifest", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path)])
        assert code == 1
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1 and err[0].startswith("chansep: error: FileNotFoundError:")

    def test_wrong_model_kind(self, pipeline_dir, capsys):
        code = main(["eval", "--alg", "alg1", "--model", str(pipeline_dir / "models" / "alg3.json"),
                     "--manifest", str(pipeline_dir / "data" / "manifest.jsonl"), "--out", "x.csv"])
        assert code == 1
        assert capsys.readouterr().err.startswith("chansep: error: ValueError:")

    def test_bad_config_section(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", {"nonsense": {}})
        code = main(["train-ae", "--class", "A", "--config", str(cfg), "--manifest", "m.jsonl"])
        assert code == 1
        assert "unknown config sections" in capsys.readouterr().err


class TestPipeline:
    def test_synth_outputs(self, pipeline_dir):
        recs = load_manifest(pipeline_dir / "data" / "manifest.jsonl")
        assert len(recs) == 40
        assert (pipeline_dir / "data" / "dataset_config.json").exists()
        assert all((pipeline_dir / "data" / r.mixture).exists() for r in recs)

    def test_models_written(self, pipeline_dir):
        names = sorted(p.name for p in (pipeline_dir / "models").iterdir())
        assert names == ["ae_A.json", "ae_B.json", "ae_C.json", "ae_D.json", "alg3.json"]

    def test_report_keys_match_manifest(self, pipeline_dir):
        rows = list(csv.DictReader(open(pipeline_dir / "report.csv")))
        test_cats = {r.category for r in load_manifest(pipeline_dir / "data" / "manifest.jsonl") if r.split == "test"}
        assert {r["category"] for r in rows} - {"*"} == test_cats
        assert {r["algorithm"] for r in rows} == {"alg3"}

    def test_byte_identical_rerun(self, pipeline_dir, tmp_path):
        run_pipeline(tmp_path)
        assert tree_bytes(tmp_path) == tree_bytes(pipeline_dir)

    def test_seed_matters(self, pipeline_dir, tmp_path):
        run_pipeline(tmp_path, seed=4)
        assert (tmp_path / "report.csv").read_bytes() != (pipeline_dir / "report.csv").read_bytes()

    def test_inputs_untouched(self, pipeline_dir, tmp_path):
        before = tree_bytes(pipeline_dir)
        main(["eval", "--alg", "alg3", "--model", str(pipeline_dir / "models" / "alg3.json"),
              "--manifest", str(pipeline_dir / "data" / "manifest.jsonl"), "--out", str(tmp_path)])
        assert tree_bytes(pipeline_dir) == before
        assert (tmp_path / "report_alg3.csv").exists()


class TestSubcommands:
    def test_echoes_config_and_seed(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", TINY)
        assert main(["synth", "--config", str(cfg), "--seed", "12", "--out", str(tmp_path / "d")]) == 0
        out = capsys.readouterr().out.splitlines()
        assert out[0] == "# chansep synth seed=12"
        assert json.loads(out[1][len("# config "):])["seed"] == 12

    def test_out_from_environment(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("CHANSEP_OUT", str(tmp_path / "env"))
        cfg = write_config(tmp_path / "c.json", TINY)
        assert main(["synth", "--config", str(cfg)]) == 0
        assert (tmp_path / "env" / "manifest.jsonl").exists()

    def test_search_streams_csv(self, pipeline_dir, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", TINY)
        code = main(["search", "--alg", "alg2", "--ae-dir", str(pipeline_dir / "models"), "--config", str(cfg),
                     "--manifest", str(pipeline_dir / "data" / "manifest.jsonl"), "--out", str(tmp_path / "s")])
        assert code == 0
        lines = [ln for ln in capsys.readouterr().out.splitlines() if not ln.startswith("#")]
        rows = list(csv.DictReader(lines))
        n_test = sum(r.split == "test" for r in load_manifest(pipeline_dir / "data" / "manifest.jsonl"))
        assert len(rows) == n_test
        assert all(float(r["best_lr"]) in (0.1, 0.01, 0.001) and float(r["best_loss"]) >= 0 for r in rows)
        assert len(list((tmp_path / "s" / "separated").glob("*.wav"))) == 4 * n_test
        assert (tmp_path / "s" / "alg2.json").exists()
        assert (tmp_path / "s" / "search_log.csv").read_text().splitlines()[1:] == lines[1:]

    def test_jobs_do_not_change_results(self, pipeline_dir, tmp_path):
        common = ["eval", "--alg", "alg3", "--model", str(pipeline_dir / "models" / "alg3.json"),
                  "--manifest", str(pipeline_dir / "data" / "manifest.jsonl")]
        assert main(common + ["--out", str(tmp_path / "a.csv")]) == 0
        assert main(common + ["--jobs", "2", "--out", str(tmp_path / "b.csv")]) == 0
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_separate_writes_channels(self, pipeline_dir, tmp_path):
        mix = next((pipeline_dir / "data" / "audio").glob("BCD-*_mix.wav"))
        assert main(["separate", "--model", str(pipeline_dir / "models" / "alg3.json"), "--input", str(mix),
                     "--out", str(tmp_path)]) == 0
        assert sorted(p.name for p in tmp_path.iterdir()) == [f"{mix.stem}_{c}.wav" for c in "ABCD"]

    def test_separate_rejects_autoencoder(self, pipeline_dir, tmp_path, capsys):
        mix = next((pipeline_dir / "data" / "audio").glob("A-*_mix.wav"))
        code = main(["separate", "--model", str(pipeline_dir / "models" / "ae_A.json"), "--input", str(mix),
                     "--out", str(tmp_path)])
        assert code == 1

    def test_report(self, pipeline_dir, tmp_path, capsys):
        assert main(["report", str(pipeline_dir / "report.csv"), "--out", str(tmp_path)]) == 0
        text = capsys.readouterr().out
        assert "SI-SNR_s" in text and "alg3" in text
        assert (tmp_path / "tables.txt").read_text().strip() in text

    def test_demo_tiny(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.json", TINY)
        assert main(["demo", "--config", str(cfg), "--alg", "alg1", "--out", str(tmp_path / "demo")]) == 0
        assert (tmp_path / "demo" / "report_alg1.csv").exists()
        assert "timings_s" in capsys.readouterr().out
