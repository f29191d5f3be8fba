import pandas as pd
import pytest

from ordinal_qwk.cli import kappa_of_predictions_file, main

TINY = ["--n", "150", "--d", "3", "--k", "3", "--hidden", "5", "--epochs", "2", "--batch-size", "25"]


def test_generate_data(tmp_path, capsys):
    out = tmp_path / "data.csv"
    code = main(["generate-data", "--out", str(out), "--n", "200", "--k", "3", "--label-noise-rate", "0",
                 "--data_seed", "4"])
    assert code == 0
    df = pd.read_csv(out)
    assert len(df) == 200
    assert df["label"].value_counts().sort_index().tolist() == [67, 67, 66]
    assert "Сохранено" in capsys.readouterr().out


def test_kappa_command(tmp_path, capsys):
    path = tmp_path / "pred.csv"
    pd.DataFrame({"label": [0, 1, 2], "prediction": [0, 2, 1]}).to_csv(path, index=False)
    assert main(["kappa", "--predictions", str(path)]) == 0
    assert float(capsys.readouterr().out.strip()) == 0.5
    assert kappa_of_predictions_file(path, k=3, weights="discrete") == pytest.approx(0.0, abs=1e-12)


def test_train_then_evaluate(tmp_path, capsys):
    run_dir = tmp_path / "run"
    assert main(["train", "--loss", "cross-entropy", "--output-dir", str(run_dir)] + TINY) == 0
    assert (run_dir / "metrics.csv").exists()
    assert "val_qwk" in capsys.readouterr().out

    assert main(["evaluate", "--run-dir", str(run_dir), "--decode-rule", "conditional-risk"]) == 0
    out = capsys.readouterr().out
    assert "conditional-risk" in out
    assert (run_dir / "eval" / "predictions.csv").exists()
    assert (run_dir / "eval" / "class_prob_summary.csv").exists()

    preds = pd.read_csv(run_dir / "predictions.csv")
    assert len(preds) == pd.read_csv(run_dir / "eval" / "predictions.csv").shape[0]


def test_evaluate_on_external_csv(tmp_path):
    run_dir = tmp_path / "run"
    data = tmp_path / "extra.csv"
    assert main(["train", "--loss", "fix-a", "--output-dir", str(run_dir)] + TINY) == 0
    assert main(["generate-data", "--out", str(data), "--n", "90", "--d", "3", "--k", "3", "--data-seed", "9"]) == 0
    assert main(["evaluate", "--run-dir", str(run_dir), "--data", str(data), "--out", str(tmp_path / "ev")]) == 0
    assert len(pd.read_csv(tmp_path / "ev" / "predictions.csv")) == 90


def test_train_with_config_file_and_preset(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("epochs = 1\nbatch_size = 50\n", encoding="utf-8")
    run_dir = tmp_path / "run"
    code = main(["train", "--preset", "cheng", "--config", str(cfg), "--output-dir", str(run_dir),
                 "--n", "150", "--k", "3", "--hidden", "4"])
    assert code == 0
    snapshot = (run_dir / "config.snapshot").read_text(encoding="utf-8")
    assert "loss = cheng" in snapshot
    assert "epochs = 1" in snapshot


def test_config_errors_exit_with_code_2(tmp_path, capsys):
    assert main(["train", "--loss", "ordinal", "--output-dir", str(tmp_path)]) == 2
    assert "Ошибка" in capsys.readouterr().err
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = red\n", encoding="utf-8")
    assert main(["train", "--config", str(bad)]) == 2
    assert main(["kappa", "--predictions", str(tmp_path / "missing.csv")]) == 2
    assert main(["train", "--preset", "nope"]) == 2


def test_gradcheck_and_presets_commands(capsys):
    assert main(["gradcheck", "--instances", "3", "--loss", "fix-a,qwk"]) == 0
    out = capsys.readouterr().out
    assert "fix-a" in out and "qwk" in out and "FAIL" not in out
    assert main(["presets"]) == 0
    assert "fix-a-run2" in capsys.readouterr().out


def test_compare_command(tmp_path):
    code = main(["compare", "--out", str(tmp_path), "--experiments", "fix-a,qwk-cold", "--runs", "1"] + TINY)
    assert code == 0
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "summary.xlsx").exists()
