import csv
import json

import numpy as np
import pytest

import nsgp.cli as cli
from nsgp.cli import RunConfig, main
from nsgp.data import Standardizer, load_csv
from nsgp.errors import ConfigError, Diverged
from nsgp.model import FULL, load_model, pack
from nsgp.train import init


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


@pytest.fixture()
def smooth_csv(tmp_path):
    x = np.linspace(0, 6, 40)
    y = np.sin(x) + 1e-3 * np.random.default_rng(0).standard_normal(40)
    p = tmp_path / "smooth.csv"
    p.write_text("t,v\n" + "".join(f"{float(a)!r},{float(b)!r}\n" for a, b in zip(x, y)))
    return p


class TestSynth:
    def test_synth1d_rows(self, tmp_path):
        assert main(["synth", "--dataset", "synth1d", "--out", str(tmp_path / "o")]) == 0
        rows = read_rows(tmp_path / "o" / "synth1d.csv")
        assert len(rows) == 201
        assert rows[0] == ["x", "y", "ell_true", "sigma_true", "omega_true", "f_true"]
        assert (tmp_path / "o" / "manifest.json").is_file()

    def test_unknown_name_writes_nothing(self, tmp_path, capsys):
        assert main(["synth", "--dataset", "nope", "--out", str(tmp_path / "o")]) == 2
        assert not (tmp_path / "o").exists()
        assert "config error" in capsys.readouterr().err

    def test_same_seed_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            main(["synth", "--dataset", "jump1d", "--seed", "4", "--out", str(tmp_path / name)])
        assert (tmp_path / "a" / "jump1d.csv").read_bytes() == (tmp_path / "b" / "jump1d.csv").read_bytes()

    def test_no_temp_files_left(self, tmp_path):
        main(["synth", "--dataset", "nonstat2d", "--out", str(tmp_path / "o")])
        assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["manifest.json", "nonstat2d.csv"]


class TestFitPredict:
    def test_zero_epochs_equals_init(self, tmp_path, smooth_csv):
        out = tmp_path / "f"
        code = main(["fit", "--csv", str(smooth_csv), "--x-cols", "t", "--y-col", "v", "--latent-ell",
                     "--latent-sigma", "--latent-omega", "--M", "5", "--epochs", "0", "--seed", "3", "--out", str(out)])
        assert code == 0
        model, std = load_model(out / "model.json")
        d = load_csv(smooth_csv, ["t"], "v")
        scaled = Standardizer.fit(d, x=False).apply(d)
        np.testing.assert_array_equal(pack(model).values, pack(init(FULL, scaled, 5, seed=3)).values)
        assert std["columns"] == ["t"]
        assert len(read_rows(out / "fit_report.csv")) == 2

    def test_predict_recovers_training_targets(self, tmp_path, smooth_csv):
        main(["fit", "--csv", str(smooth_csv), "--x-cols", "t", "--y-col", "v", "--epochs", "300", "--out", str(tmp_path / "f")])
        code = main(["predict", "--model", str(tmp_path / "f" / "model.json"), "--query", str(smooth_csv), "--out", str(tmp_path / "p")])
        assert code == 0
        rows = read_rows(tmp_path / "p" / "predictions.csv")
        assert rows[0] == ["t", "mean", "var_f", "var_noise", "var_y"]
        table = np.array(rows[1:], dtype=float)
        y = load_csv(smooth_csv, ["t"], "v").y
        np.testing.assert_allclose(table[:, 1], y, atol=0.02)
        np.testing.assert_allclose(table[:, 4], table[:, 2] + table[:, 3], rtol=1e-15)

    def test_round_trip_identical_predictions(self, tmp_path, smooth_csv):
        main(["fit", "--csv", str(smooth_csv), "--x-cols", "t", "--y-col", "v", "--latent-omega", "--epochs", "20", "--out", str(tmp_path / "f")])
        for name in ("p1", "p2"):
            main(["predict", "--model", str(tmp_path / "f" / "model.json"), "--grid", "25", "--out", str(tmp_path / name)])
        a = (tmp_path / "p1" / "predictions.csv").read_bytes()
        assert a == (tmp_path / "p2" / "predictions.csv").read_bytes()
        model, std = load_model(tmp_path / "f" / "model.json")
        table = np.array(read_rows(tmp_path / "p1" / "predictions.csv")[1:], dtype=float)
        p = model.predict(table[:, :1])
        np.testing.assert_array_equal(table[:, 1], p.mean * std["y_std"] + std["y_mean"])
        assert table.shape[0] == 25

    def test_missing_model_is_io_error(self, tmp_path):
        assert main(["predict", "--model", str(tmp_path / "none.json"), "--out", str(tmp_path / "p")]) == 4
        assert not (tmp_path / "p").exists()

    def test_corrupt_model_is_io_error(self, tmp_path):
        (tmp_path / "m.json").write_text("{not json")
        assert main(["predict", "--model", str(tmp_path / "m.json"), "--out", str(tmp_path / "p")]) == 4

    def test_training_failure_exit_code(self, tmp_path, monkeypatch):
        def boom(*a, **k):
            raise Diverged("forced")

        monkeypatch.setattr(cli, "fit", boom)
        assert main(["fit", "--dataset", "jump1d", "--out", str(tmp_path / "f")]) == 3


class TestAblate:
    def test_rows_and_columns(self, tmp_path, smooth_csv):
        args = ["ablate", "--csv", str(smooth_csv), "--x-cols", "t", "--y-col", "v", "--k", "3", "--M", "3", "--epochs", "2"]
        assert main(args + ["--out", str(tmp_path / "a")]) == 0
        rows = read_rows(tmp_path / "a" / "ablation.csv")
        assert len(rows) == 9
        assert "nlpd_mean" in rows[0] and "rmse_mean" in rows[0]
        assert "NLPD" in (tmp_path / "a" / "ablation.txt").read_text()
        main(args + ["--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "ablation.csv").read_bytes() == (tmp_path / "b" / "ablation.csv").read_bytes()

    def test_needs_datasets(self, tmp_path):
        assert main(["ablate", "--out", str(tmp_path / "a")]) == 2


class TestActive:
    def test_two_arms(self, tmp_path):
        assert main(["active", "--epochs", "5", "--out", str(tmp_path / "al")]) == 0
        names = sorted(p.name for p in (tmp_path / "al").iterdir())
        assert names == ["al_var_f.csv", "al_var_f_predictions.csv", "al_var_y.csv", "al_var_y_predictions.csv", "manifest.json"]
        assert len(read_rows(tmp_path / "al" / "al_var_f.csv")) == 1 + 1 + 50
        manifest = json.loads((tmp_path / "al" / "manifest.json").read_text())
        assert manifest["config"]["initial_n"] == 30 and manifest["config"]["M"] == 10

    def test_single_arm(self, tmp_path):
        assert main(["active", "--arms", "var_y", "--acquisitions", "4", "--epochs", "2", "--out", str(tmp_path / "al")]) == 0
        assert not (tmp_path / "al" / "al_var_f.csv").exists()
        assert len(read_rows(tmp_path / "al" / "al_var_y.csv")) == 6

    def test_bad_arm(self, tmp_path):
        assert main(["active", "--arms", "entropy", "--out", str(tmp_path / "al")]) == 2
        assert not (tmp_path / "al").exists()


class TestGradcheck:
    def test_healthy(self, capsys):
        assert main(["gradcheck", "--configs", "8"]) == 0
        out = capsys.readouterr().out
        worst = float(out.strip().splitlines()[-1].split("error ")[1].split()[0])
        assert worst < 1e-4

    def test_perturbed_gradient_fails(self, capsys):
        assert main(["gradcheck", "--configs", "2", "--perturb", "0.01"]) != 0
        assert "FAIL" in capsys.readouterr().out

    def test_deterministic(self, capsys, tmp_path):
        main(["gradcheck", "--configs", "3", "--seed", "2", "--out", str(tmp_path / "a")])
        main(["gradcheck", "--configs", "3", "--seed", "2", "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "gradcheck.txt").read_bytes() == (tmp_path / "b" / "gradcheck.txt").read_bytes()

    def test_single_variant(self, capsys):
        assert main(["gradcheck", "--latent-omega", "--configs", "2"]) == 0
        assert "(ω)-GP" in capsys.readouterr().out


class TestConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError, match="bogus"):
            RunConfig.from_dict({"command": "synth", "dataset": "synth1d", "out": "x", "bogus": 1})

    @pytest.mark.parametrize(
        "args",
        [
            ["fit", "--dataset", "synth1d", "--lr", "-1"],
            ["fit", "--dataset", "synth1d", "--epochs", "-3"],
            ["fit", "--dataset", "synth1d", "--M", "0"],
            ["fit", "--csv", "x.csv"],
            ["fit"],
            ["ablate", "--datasets", "synth1d,mnist"],
            ["active", "--dataset", "synth1d", "--retrain", "sometimes"],
        ],
    )
    def test_invalid_before_any_file(self, tmp_path, args):
        out = tmp_path / "o"
        assert main(args + ["--out", str(out)]) == 2
        assert not out.exists()

    def test_argparse_errors_exit_2(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["fit", "--epochs", "many", "--out", str(tmp_path)])
        assert exc.value.code == 2

    def test_manifest_contents(self, tmp_path):
        main(["synth", "--dataset", "synth1d", "--seed", "7", "--out", str(tmp_path / "o")])
        doc = json.loads((tmp_path / "o" / "manifest.json").read_text())
        assert doc["schema"] == "nsgp-manifest/1"
        assert doc["seed"] == 7 and doc["config"]["seed"] == 7
        assert set(doc["versions"]) == {"nsgp", "numpy", "scipy", "python"}
        assert doc["outputs"] == ["synth1d.csv"]
        assert RunConfig.from_dict(doc["config"]).dataset == "synth1d"

    def test_replay_rejects_foreign_manifest(self, tmp_path):
        (tmp_path / "m.json").write_text(json.dumps({"config": {"command": "synth"}}))
        assert main(["replay", str(tmp_path / "m.json")]) == 2

    def test_replay_in_place_is_identical(self, tmp_path):
        out = tmp_path / "o"
        main(["fit", "--dataset", "jump1d", "--latent-omega", "--epochs", "10", "--out", str(out)])
        before = {p.name: p.read_bytes() for p in out.iterdir()}
        assert main(["replay", str(out / "manifest.json")]) == 0
        assert {p.name: p.read_bytes() for p in out.iterdir()} == before
