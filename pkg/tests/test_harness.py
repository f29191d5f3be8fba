import numpy as np
import pandas as pd
import pytest

from ordinal_qwk.config_store import build_config
from ordinal_qwk.diagnostics import dump_correct_class_probabilities, dump_per_class_probability_summary
from ordinal_qwk.errors import ConfigError, ParseError, UnsupportedHeadError
from ordinal_qwk.harness import (
    METRIC_COLUMNS,
    active_loss,
    build_params,
    evaluate,
    prepare_data,
    run_experiment,
    train_epoch,
)
from ordinal_qwk.models import Dataset, DecodeRule, Layer, LossKind, NetworkParams, OptimizerState
from ordinal_qwk.qwk import one_hot, weight_matrix
from ordinal_qwk.render.params_file import load_params, params_from_bytes, params_to_bytes, save_params


def _linear_head(weight, bias, activation="softmax", head="cross-entropy"):
    return NetworkParams(
        layers=[Layer(weight=np.asarray(weight, dtype=float), bias=np.asarray(bias, dtype=float), activation=activation)],
        head=head,
    )


def _labelled(k=5, n=40, seed=0):
    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    return Dataset(features=one_hot(labels, k), labels=labels, k=k)


def test_zero_epochs_emits_initial_metrics_only(small_config):
    cfg = small_config(epochs=0)
    result = run_experiment(cfg)
    metrics = pd.read_csv(result.run_dir / "metrics.csv")
    assert list(metrics.columns) == METRIC_COLUMNS
    assert metrics["epoch"].tolist() == [0]

    train, _ = prepare_data(cfg)
    initial = build_params(cfg, train.d)
    assert np.array_equal(load_params(result.run_dir / "params.bin").flatten(), initial.flatten())


def test_run_outputs(small_config):
    result = run_experiment(small_config(loss="fix-a", epochs=3))
    run_dir = result.run_dir
    metrics = pd.read_csv(run_dir / "metrics.csv")
    assert len(metrics) == 4
    assert metrics["val_qwk_round_soft_argmax"].notna().all()
    assert metrics["val_qwk_cheng_first_zero"].isna().all()
    for name in ("timing.csv", "predictions.csv", "config.snapshot", "params.bin",
                 "hist_correct_prob.csv", "correct_prob.csv", "class_prob_summary.csv"):
        assert (run_dir / name).exists(), name
    assert list(run_dir.glob("train_*.log"))

    hist = pd.read_csv(run_dir / "hist_correct_prob.csv")
    assert len(hist) == 20
    assert hist["count"].sum() == result.val.n

    summary = pd.read_csv(run_dir / "class_prob_summary.csv")
    cols = ["min", "q1", "median", "q3", "max"]
    assert (summary[cols].diff(axis=1).iloc[:, 1:] >= 0).all().all()

    preds = pd.read_csv(run_dir / "predictions.csv")
    assert len(preds) == result.val.n
    assert "score" in preds.columns


def test_runs_are_byte_reproducible(small_config):
    a = run_experiment(small_config("a", loss="learn-a-sigm", epochs=2))
    b = run_experiment(small_config("b", loss="learn-a-sigm", epochs=2))
    assert (a.run_dir / "metrics.csv").read_bytes() == (b.run_dir / "metrics.csv").read_bytes()
    assert (a.run_dir / "params.bin").read_bytes() == (b.run_dir / "params.bin").read_bytes()


def test_warm_start_prefix_matches_first_loss_run(small_config):
    common = dict(lr_schedule="0:0.01", decode_rule="argmax")
    warm = run_experiment(small_config("warm", loss="qwk", epochs=4, warm_start="cross-entropy:2", **common))
    pure = run_experiment(small_config("pure", loss="cross-entropy", epochs=2, **common))
    warm_df = pd.read_csv(warm.run_dir / "metrics.csv")
    pure_df = pd.read_csv(pure.run_dir / "metrics.csv")
    pd.testing.assert_frame_equal(warm_df.iloc[:3].reset_index(drop=True), pure_df)
    assert warm_df["loss"].tolist() == ["cross-entropy"] * 3 + ["qwk"] * 2
    assert load_params(warm.run_dir / "params.bin").head == "qwk"


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_default_learn_a_sigm_run_predicts_several_classes(tmp_path, seed):
    cfg = build_config({"loss": "learn-a-sigm", "seed": str(seed), "output_dir": str(tmp_path)})
    assert cfg.warm_start.loss is LossKind.CROSS_ENTROPY
    result = run_experiment(cfg)
    losses = pd.read_csv(result.run_dir / "metrics.csv")["loss"]
    assert losses.iloc[0] == "cross-entropy" and losses.iloc[-1] == "learn-a-sigm"
    assert len(np.unique(result.evaluation.predictions)) > 1
    assert result.evaluation.kappa > 0.0


def test_cheng_run_has_no_cross_entropy_or_dumps(small_config):
    result = run_experiment(small_config(loss="cheng", epochs=1))
    metrics = pd.read_csv(result.run_dir / "metrics.csv")
    assert metrics["val_cross_entropy"].isna().all()
    assert metrics["val_qwk_cheng_first_zero"].notna().all()
    assert not (result.run_dir / "hist_correct_prob.csv").exists()
    assert result.evaluation.cross_entropy is None


def test_active_loss():
    cfg = build_config({"loss": "qwk", "epochs": "10", "warm_start": "cross-entropy:4"})
    assert [active_loss(cfg, e).value for e in (0, 1, 4, 5, 10)] == [
        "cross-entropy", "cross-entropy", "cross-entropy", "qwk", "qwk",
    ]
    assert active_loss(build_config({"loss": "cheng"}), 3) is LossKind.CHENG


def test_degenerate_qwk_batches_are_skipped(small_config, caplog):
    cfg = small_config(loss="qwk")
    train, _ = prepare_data(cfg)
    params = build_params(cfg, train.d)
    state = OptimizerState(velocity=params.zeros_like(), learning_rate=0.01)
    new_params, _, loss, skipped = train_epoch(
        params, state, train, LossKind.QWK, 1, weight_matrix(cfg.k), np.random.default_rng(0),
    )
    assert skipped == train.n
    assert loss is None
    assert np.array_equal(new_params.flatten(), params.flatten())
    assert "Батч пропущен" in caplog.text


def test_evaluate_perfect_predictor():
    ds = _labelled()
    params = _linear_head(50.0 * np.eye(5), np.zeros(5))
    ev = evaluate(params, ds, DecodeRule.ARGMAX)
    assert ev.kappa == 1.0
    assert ev.cross_entropy < 1e-15 + 5 * np.exp(-50.0)
    assert set(ev.kappa_by_rule) == {DecodeRule.ARGMAX, DecodeRule.ROUND_SOFT_ARGMAX, DecodeRule.CONDITIONAL_RISK}

    _, hist = dump_correct_class_probabilities(params, ds)
    assert hist["count"].iloc[-1] == ds.n


def test_evaluate_constant_predictor_has_no_agreement():
    ds = _labelled()
    params = _linear_head(np.zeros((5, 5)), [10.0, 0, 0, 0, 0])
    ev = evaluate(params, ds, DecodeRule.ARGMAX)
    assert np.all(ev.predictions == 0)
    assert ev.kappa <= 1e-9


def test_evaluate_cheng_head():
    ds = _labelled(k=4)
    params = _linear_head(np.zeros((4, 3)), np.zeros(3), activation="sigmoid", head="cheng")
    ev = evaluate(params, ds, DecodeRule.CHENG_FIRST_ZERO)
    assert ev.cross_entropy is None
    assert ev.scores is None
    # σ(0) = 0.5 считается единицей: все биты 1 -> класс k-1
    assert np.all(ev.predictions == 3)
    with pytest.raises(ConfigError):
        evaluate(params, ds, DecodeRule.ARGMAX)
    with pytest.raises(UnsupportedHeadError):
        dump_correct_class_probabilities(params, ds)


def test_evaluate_rejects_width_mismatch():
    params = _linear_head(np.zeros((5, 4)), np.zeros(4))
    with pytest.raises(ConfigError):
        evaluate(params, _labelled(), DecodeRule.ARGMAX)


def test_uniform_predictor_dumps(tmp_path):
    ds = _labelled()
    params = _linear_head(np.zeros((5, 5)), np.zeros(5))
    per_example, hist = dump_correct_class_probabilities(params, ds, tmp_path)
    assert np.allclose(per_example["p_correct"], 0.2)
    assert hist["count"].sum() == ds.n
    summary = dump_per_class_probability_summary(params, ds, tmp_path)
    assert np.allclose(summary[["min", "q1", "median", "q3", "max"]].to_numpy(), 0.2)
    assert (tmp_path / "class_prob_summary.csv").exists()
    assert (tmp_path / "hist_correct_prob.csv").exists()


def test_always_class_zero_summary():
    ds = _labelled()
    params = _linear_head(np.zeros((5, 5)), [100.0, 0, 0, 0, 0])
    summary = dump_per_class_probability_summary(params, ds)
    values = summary[["min", "q1", "median", "q3", "max"]].to_numpy()
    assert np.allclose(values[0], 1.0)
    assert np.allclose(values[1:], 0.0, atol=1e-12)


def test_params_container(tmp_path):
    cfg = build_config({"loss": "learn-a", "hidden": "6,3", "k": "4"})
    params = build_params(cfg, 5)
    path = save_params(params, tmp_path / "p.bin")
    back = load_params(path)
    assert back.head == "learn-a"
    assert [l.activation for l in back.layers] == ["relu", "relu", "softmax"]
    assert np.array_equal(back.anchor, params.anchor)
    assert params_to_bytes(back) == path.read_bytes()

    blob = path.read_bytes()
    assert blob[:4] == b"ORDQ"
    with pytest.raises(ParseError):
        params_from_bytes(b"XXXX" + blob[4:])
    with pytest.raises(ParseError):
        params_from_bytes(blob[:-8])
    with pytest.raises(ParseError):
        params_from_bytes(blob[:10])
