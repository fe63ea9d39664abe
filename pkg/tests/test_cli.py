import json

import pytest

from mdgcn.cli import main


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def synth_files(tmp_path):
    out = tmp_path / "toy"
    assert run(["synth", "--nodes", 60, "--num-dims", 2, "--communities", 2,
                "--intra", 0.4, "--inter", 0.05, "--noise", 0.2,
                "--seed", 5, "--out", out]) == 0
    return {
        "dims": [f"{out}.dim0.edges", f"{out}.dim1.edges"],
        "labels": f"{out}.labels",
        "out": out,
    }


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


class TestSynth:
    def test_writes_expected_files(self, synth_files, tmp_path):
        for p in synth_files["dims"] + [synth_files["labels"]]:
            assert read(p)

    def test_deterministic_regeneration(self, synth_files, tmp_path):
        out2 = tmp_path / "again"
        run(["synth", "--nodes", 60, "--num-dims", 2, "--communities", 2,
             "--intra", 0.4, "--inter", 0.05, "--noise", 0.2, "--seed", 5, "--out", out2])
        assert read(synth_files["dims"][0]) == read(f"{out2}.dim0.edges")

    def test_zero_noise_identical_dimension_files(self, tmp_path):
        out = tmp_path / "flat"
        run(["synth", "--nodes", 30, "--num-dims", 3, "--communities", 2,
             "--intra", 0.4, "--inter", 0.05, "--noise", 0.0, "--seed", 1, "--out", out])
        assert read(f"{out}.dim0.edges") == read(f"{out}.dim1.edges") == read(f"{out}.dim2.edges")

    def test_invalid_probability_fails(self, tmp_path, capsys):
        code = run(["synth", "--intra", 0.1, "--inter", 0.5, "--out", tmp_path / "x"])
        assert code == 1
        assert "error" in capsys.readouterr().err


class TestTrain:
    def test_outputs_and_epoch_loss(self, synth_files, tmp_path, capsys):
        out = tmp_path / "run"
        code = run(["train", "--dim-files", *synth_files["dims"], "--labels",
                    synth_files["labels"], "--embed", 8, "--epochs", 2,
                    "--batch", 128, "--seed", 3, "--out", out])
        assert code == 0
        stdout = capsys.readouterr().out
        assert "epoch 0 loss" in stdout and "epoch 1 loss" in stdout
        for suffix in (".ckpt", ".emb", ".config.json"):
            assert read(f"{out}{suffix}")

    def test_missing_edge_file_errors(self, tmp_path, capsys):
        code = run(["train", "--dim-files", tmp_path / "absent.edges", "--out", tmp_path / "r"])
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_no_input_errors(self, tmp_path, capsys):
        assert run(["train", "--out", tmp_path / "r"]) == 1

    def test_single_edge_file_input(self, tmp_path):
        edge_file = tmp_path / "all.edges"
        edge_file.write_text("0 0 1\n0 1 2\n1 0 2\n1 2 3\n")
        out = tmp_path / "run"
        assert run(["train", "--edge-file", edge_file, "--embed", 4, "--epochs", 1,
                    "--batch", 32, "--seed", 0, "--out", out]) == 0
        assert read(f"{out}.emb")

    def test_seed_reproducibility_byte_identical(self, synth_files, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        args = ["train", "--dim-files", *synth_files["dims"], "--embed", 8,
                "--epochs", 2, "--batch", 128, "--seed", 11]
        run(args + ["--out", out1])
        run(args + ["--out", out2])
        assert read(f"{out1}.emb") == read(f"{out2}.emb")

    def test_zero_epochs_still_exports(self, synth_files, tmp_path):
        out = tmp_path / "init"
        assert run(["train", "--dim-files", *synth_files["dims"], "--embed", 8,
                    "--epochs", 0, "--seed", 0, "--out", out]) == 0
        assert read(f"{out}.emb")

    def test_config_round_trip(self, synth_files, tmp_path):
        out1, out2 = tmp_path / "c1", tmp_path / "c2"
        run(["train", "--dim-files", *synth_files["dims"], "--embed", 8,
             "--epochs", 1, "--batch", 128, "--seed", 7, "--out", out1])
        # rerun purely from the echoed config, overriding only the output path
        run(["train", "--config", f"{out1}.config.json", "--out", out2])
        assert read(f"{out1}.emb") == read(f"{out2}.emb")

    def test_unknown_config_key_rejected(self, synth_files, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"learning_rte": 0.1}))
        code = run(["train", "--config", cfg, "--dim-files", *synth_files["dims"],
                    "--out", tmp_path / "r"])
        assert code == 1
        assert "unknown config keys" in capsys.readouterr().err


class TestLinkPredict:
    def test_report_row_per_dimension(self, synth_files, tmp_path):
        out = tmp_path / "lp"
        code = run(["link-predict", "--dim-files", *synth_files["dims"],
                    "--embed", 8, "--epochs", 1, "--batch", 128, "--fraction", 0.3,
                    "--seed", 2, "--out", out])
        assert code == 0
        lines = open(f"{out}.report.kv").read().splitlines()
        dims = {line.split()[1] for line in lines}
        assert dims == {"0", "1"}

    def test_variant_sweep_comparable_rows(self, synth_files, tmp_path):
        out = tmp_path / "sweep"
        code = run(["link-predict", "--dim-files", *synth_files["dims"],
                    "--variant", "mgcn", "mgcn-noa", "gcn", "--dims", 0,
                    "--embed", 8, "--epochs", 1, "--batch", 128, "--fraction", 0.3,
                    "--seed", 2, "--out", out])
        assert code == 0
        tasks = {line.split()[0] for line in open(f"{out}.report.kv").read().splitlines()}
        assert tasks == {"link_prediction.mgcn", "link_prediction.mgcn_noa",
                         "link_prediction.gcn_baseline"}

    def test_invalid_dimension_errors(self, synth_files, tmp_path, capsys):
        code = run(["link-predict", "--dim-files", *synth_files["dims"], "--dims", 9,
                    "--out", tmp_path / "lp"])
        assert code == 1
        assert "out of range" in capsys.readouterr().err

    def test_deterministic_reports(self, synth_files, tmp_path):
        args = ["link-predict", "--dim-files", *synth_files["dims"], "--dims", 0,
                "--embed", 8, "--epochs", 1, "--batch", 128, "--fraction", 0.3, "--seed", 4]
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run(args + ["--out", out1])
        run(args + ["--out", out2])
        assert read(f"{out1}.report.kv") == read(f"{out2}.report.kv")


class TestNodeClassify:
    def test_default_ratio_grid(self, synth_files, tmp_path):
        out = tmp_path / "nc"
        code = run(["node-classify", "--dim-files", *synth_files["dims"],
                    "--labels", synth_files["labels"], "--embed", 8, "--epochs", 1,
                    "--batch", 128, "--splits", 2, "--seed", 0, "--out", out])
        assert code == 0
        rows = [l.split() for l in open(f"{out}.report.kv").read().splitlines()]
        ratios = {r[2] for r in rows}
        assert ratios == {"0.1", "0.3", "0.5", "0.7", "0.9"}
        mean_rows = [r for r in rows if r[3] == "mean"]
        assert len(mean_rows) == 5 * 2  # per ratio: f1_macro and f1_micro

    def test_missing_labels_errors(self, synth_files, tmp_path, capsys):
        code = run(["node-classify", "--dim-files", *synth_files["dims"],
                    "--out", tmp_path / "nc"])
        assert code == 1
        assert "labels" in capsys.readouterr().err

    def test_alpha_sweep_writes_report_per_alpha(self, synth_files, tmp_path):
        out = tmp_path / "sweep"
        code = run(["node-classify", "--dim-files", *synth_files["dims"],
                    "--labels", synth_files["labels"], "--embed", 8, "--epochs", 1,
                    "--batch", 128, "--splits", 1, "--ratios", 0.5, "--seed", 0,
                    "--alpha", 0.0, 0.3, 0.5, 0.7, 1.0, "--out", out])
        assert code == 0
        for alpha in ("0", "0.3", "0.5", "0.7", "1"):
            assert read(f"{out}.alpha_{alpha}.report.kv")


class TestGradCheck:
    def test_default_model_passes(self, capsys):
        assert run(["grad-check", "--seed", 0]) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "worst" in out

    def test_corrupted_gradient_fails(self, capsys):
        assert run(["grad-check", "--seed", 0, "--corrupt", "layers.0.combine"]) == 1
        out = capsys.readouterr().out
        assert "FAIL" in out and "layers.0.combine" in out

    def test_reports_worst_tensor_name(self, capsys):
        run(["grad-check", "--seed", 1, "--layers", 2])
        out = capsys.readouterr().out
        assert "worst" in out
