import json

import pytest

from kgeir.cli import ABLATIONS, main
from kgeir.config import RunConfig, dump_config, load_config, parse_config


class TestConfig:
    def test_defaults(self):
        cfg = RunConfig()
        assert (cfg.attention_embed_size, cfg.top_k, cfg.dropout, cfg.learning_rate, cfg.epochs) == (200, 5, 0.2, 0.002, 100)
        assert (cfg.alpha1, cfg.alpha2, cfg.alpha3) == (0.7, 0.15, 0.15)
        assert cfg.simulation().alphas == (0.7, 0.15, 0.15)
        assert cfg.model_settings().attention_embed_size == 200

    def test_parse(self):
        cfg = parse_config("# comment\ntop_k = 3\nalpha1=0.5\nuse_embeddings=false\ncdm=mirt\n")
        assert cfg.top_k == 3 and cfg.alpha1 == 0.5 and cfg.use_embeddings is False and cfg.cdm == "mirt"

    def test_unknown_key(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config("topk=3\n")

    def test_bad_value(self):
        with pytest.raises(ValueError, match="top_k"):
            parse_config("top_k=many\n")

    def test_round_trip(self, tmp_path):
        cfg = RunConfig(seed=4, top_k=2, edge_values=False)
        (tmp_path / "c.txt").write_text(dump_config(cfg))
        assert load_config(tmp_path / "c.txt") == cfg

    def test_replace_ignores_none(self):
        assert RunConfig().replace(seed=None, steps=7).steps == 7


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("data")
    assert main(["synth", "--out", str(out), "--students", "6", "--exercises", "24", "--skills", "4", "--seed", "2"]) == 0
    (out / "run.cfg").write_text("cdm=mirt\nepochs=2\nlearning_rate=0.02\nmirt_dim=2\nsteps=3\n")
    return out


def _data(d):
    return ["--log", str(d / "log.csv"), "--q", str(d / "q.csv"), "--graph", str(d / "graph.json")]


class TestCli:
    def test_ingest(self, dataset, capsys):
        assert main(["ingest", *_data(dataset)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["n_students"] == 6 and summary["n_questions"] == 24 and summary["n_skills"] == 4

    def test_ingest_error_exit_code(self, tmp_path, capsys):
        (tmp_path / "log.csv").write_text("student_id,exercise_id,correct,timestamp\ns,e,7,0\n")
        (tmp_path / "q.csv").write_text("exercise_id,skill_id\ne,k\n")
        assert main(["ingest", "--log", str(tmp_path / "log.csv"), "--q", str(tmp_path / "q.csv")]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_train_and_reuse_checkpoint(self, dataset, tmp_path):
        cfg = str(dataset / "run.cfg")
        assert main(["train", *_data(dataset), "--config", cfg, "--out", str(tmp_path / "t")]) == 0
        for name in ("checkpoint/manifest.json", "losses.csv", "skill_importance.csv", "exercise_embeddings.csv", "config.txt"):
            assert (tmp_path / "t" / name).exists()
        out = tmp_path / "sim"
        args = ["simulate", *_data(dataset), "--config", cfg, "--checkpoint", str(tmp_path / "t" / "checkpoint"), "--out", str(out)]
        assert main(args) == 0
        assert (out / "heatmap.csv").exists()

    def test_weights(self, dataset, tmp_path):
        assert main(["weights", *_data(dataset), "--need", "prerequisite", "--out", str(tmp_path / "w.csv")]) == 0
        assert (tmp_path / "w.csv").read_text().startswith("skill_id,f1,f2,f3,f4,f5,w_nov,w_pop,w_k\n")

    def test_simulate_is_deterministic_and_exports(self, dataset, tmp_path):
        cfg = str(dataset / "run.cfg")
        files = {}
        for run in ("a", "b"):
            out = tmp_path / run
            args = ["simulate", *_data(dataset), "--config", cfg, "--out", str(out),
                    "--strategy", "random", "--strategy", "expectimax", "--strategy", "kg-eir", "--audit"]
            assert main(args) == 0
            files[run] = {p.name: p.read_bytes() for p in out.iterdir() if p.is_file()}
        assert files["a"] == files["b"]
        assert set(files["a"]) == {"traces.csv", "per_step.csv", "heatmap.csv", "manifest.json"}
        assert list((tmp_path / "a" / "audit" / "kg-eir").glob("*.csv"))

    def test_simulate_ablation_flags(self, dataset, tmp_path):
        args = ["simulate", *_data(dataset), "--config", str(dataset / "run.cfg"), "--out", str(tmp_path),
                "--disable-representativeness", "--students", "2"]
        assert main(args) == 0
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["strategies"] == ["kg-eir-no-ER"]
        assert manifest["students"] == 2

    def test_ablate_and_export_plots(self, dataset, tmp_path):
        assert main(["ablate", *_data(dataset), "--config", str(dataset / "run.cfg"), "--out", str(tmp_path / "ab")]) == 0
        manifest = json.loads((tmp_path / "ab" / "manifest.json").read_text())
        assert manifest["strategies"] == ["kg-eir"] + [f"kg-eir-no-{k}" for k in ABLATIONS]
        assert main(["export-plots", "--traces", str(tmp_path / "ab" / "traces.csv"), "--out", str(tmp_path / "plots")]) == 0
        assert (tmp_path / "plots" / "heatmap.csv").read_bytes() == (tmp_path / "ab" / "heatmap.csv").read_bytes()

    def test_unknown_need(self, dataset, tmp_path):
        assert main(["weights", *_data(dataset), "--need", "curiosity", "--out", str(tmp_path / "w.csv")]) == 2
