import json
from pathlib import Path

import pytest

import ordinal_qwk.config as app_config
from ordinal_qwk.config import ASSETS_DIR, DR_PROPORTIONS, PACKAGE_DIR, PRESETS_JSON
from ordinal_qwk.config_store import (
    PresetStore,
    build_config,
    config_to_text,
    config_to_values,
    learning_rate_at,
    load_config,
    parse_config_text,
    resolve_decode_rule,
    resolve_schedule,
    with_overrides,
)
from ordinal_qwk.errors import ConfigError
from ordinal_qwk.models import DecodeRule, LossKind, WarmStart


def test_parse_config_text():
    text = "# комментарий\nloss = cheng\nlr-schedule = 0:0.01  # хвост\n\n"
    assert parse_config_text(text) == {"loss": "cheng", "lr_schedule": "0:0.01"}


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("loss = fix-a\nbogus = 1\n", "строка 2"),
        ("loss = fix-a\nloss = cheng\n", "повторно"),
        ("just text\n", "строка 1"),
    ],
)
def test_parse_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


def test_defaults():
    cfg = build_config({})
    assert cfg.loss is LossKind.FIX_A
    assert cfg.k == 5
    assert cfg.generator.class_proportions == DR_PROPORTIONS
    assert cfg.hidden == (32,)
    assert cfg.generator.latent_noise_sd == 1.75
    assert cfg.warm_start is None
    assert cfg.batch_size == 128
    assert cfg.momentum == 0.9
    assert resolve_decode_rule(cfg) is DecodeRule.ROUND_SOFT_ARGMAX


def test_auto_proportions_are_uniform_for_other_k():
    assert build_config({"k": "4"}).generator.class_proportions == (0.25,) * 4


@pytest.mark.parametrize(
    "loss, epochs, schedule",
    [
        ("fix-a", 250, [(0, 0.01), (200, 0.001)]),
        ("fix-a", 60, [(0, 0.01), (48, 0.001)]),
        ("cross-entropy", 60, [(0, 0.01), (48, 0.001)]),
        ("learn-a-sigm", 60, [(0, 0.01), (48, 0.001)]),
        ("qwk", 250, [(0, 0.01), (200, 0.001)]),
    ],
)
def test_auto_schedule_scales_reference_points(loss, epochs, schedule):
    assert resolve_schedule(build_config({"loss": loss, "epochs": str(epochs)})) == schedule


def test_auto_schedule_collapses_on_short_runs():
    schedule = resolve_schedule(build_config({"loss": "fix-a", "epochs": "1"}))
    assert schedule[0][0] == 0
    assert [s for s, _ in schedule] == sorted(set(s for s, _ in schedule))


def test_learning_rate_at():
    schedule = [(0, 0.1), (61, 0.01), (200, 0.001)]
    assert learning_rate_at(schedule, 0) == 0.1
    assert learning_rate_at(schedule, 60) == 0.1
    assert learning_rate_at(schedule, 61) == 0.01
    assert learning_rate_at(schedule, 249) == 0.001


def test_explicit_schedule_and_validation():
    cfg = build_config({"lr_schedule": "0:0.5,10:0.05"})
    assert resolve_schedule(cfg) == [(0, 0.5), (10, 0.05)]
    for bad in ("5:0.1", "0:0.1,0:0.2", "0:-1", "0.1"):
        with pytest.raises(ConfigError):
            build_config({"lr_schedule": bad})


def test_warm_start_parsing():
    cfg = build_config({"loss": "qwk", "epochs": "60", "warm_start": "cross-entropy:auto"})
    assert cfg.warm_start == WarmStart(LossKind.CROSS_ENTROPY, 36)
    cfg = build_config({"loss": "qwk", "epochs": "250", "warm_start": "cross-entropy:150"})
    assert cfg.warm_start.epochs == 150


@pytest.mark.parametrize(
    "loss, epochs, expected",
    [
        ("learn-a-sigm", 60, WarmStart(LossKind.CROSS_ENTROPY, 36)),
        ("learn-a-sigm", 2, WarmStart(LossKind.CROSS_ENTROPY, 1)),
        ("learn-a-sigm", 1, None),
        ("learn-a-sigm", 0, None),
        ("fix-a", 60, None),
        ("learn-a", 60, None),
        ("qwk", 60, None),
    ],
)
def test_auto_warm_start(loss, epochs, expected):
    cfg = build_config({"loss": loss, "epochs": str(epochs)})
    assert cfg.warm_start == expected


def test_auto_warm_start_can_be_disabled_or_replaced():
    assert build_config({"loss": "learn-a-sigm", "warm_start": "none"}).warm_start is None
    assert build_config({"loss": "learn-a-sigm", "warm_start": ""}).warm_start is None
    cfg = build_config({"loss": "learn-a-sigm", "warm_start": "fix-a:5"})
    assert cfg.warm_start == WarmStart(LossKind.FIX_A, 5)


def test_auto_warm_start_is_resolved_in_snapshot():
    cfg = build_config({"loss": "learn-a-sigm", "epochs": "60"})
    text = config_to_text(cfg)
    assert "warm_start = cross-entropy:36" in text
    assert build_config(parse_config_text(text)).warm_start == cfg.warm_start


@pytest.mark.parametrize(
    "values",
    [
        {"loss": "qwk", "warm_start": "cheng:5"},
        {"loss": "cheng", "warm_start": "cross-entropy:5"},
        {"loss": "qwk", "epochs": "10", "warm_start": "cross-entropy:10"},
        {"loss": "cheng", "decode_rule": "argmax"},
        {"loss": "fix-a", "decode_rule": "cheng-first-zero"},
        {"weights": "linear"},
        {"loss": "ordinal"},
        {"momentum": "1.0"},
        {"batch_size": "0"},
        {"epochs": "-1"},
        {"epochs": "many"},
    ],
)
def test_invalid_configs(values):
    with pytest.raises(ConfigError):
        build_config(values)


def test_load_config_priority(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("loss = learn-a\nepochs = 20\n", encoding="utf-8")
    preset = {"loss": "cheng", "epochs": "5", "batch_size": "16"}
    cfg = load_config(path, overrides={"epochs": "7"}, preset=preset)
    assert cfg.loss is LossKind.LEARN_A
    assert cfg.epochs == 7
    assert cfg.batch_size == 16

    with pytest.raises(ConfigError):
        load_config(overrides={"nonsense": "1"})
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.cfg")


def test_snapshot_round_trip():
    cfg = build_config({"loss": "qwk", "epochs": "40", "warm_start": "cross-entropy:auto", "k": "3"})
    text = config_to_text(cfg)
    again = build_config(parse_config_text(text))
    assert config_to_values(again) == config_to_values(cfg)
    assert "lr_schedule = 0:0.01,32:0.001" in text
    assert "decode_rule = argmax" in text


def test_with_overrides_revalidates():
    cfg = build_config({"loss": "cheng"})
    assert with_overrides(cfg, epochs=3).epochs == 3
    with pytest.raises(ConfigError):
        with_overrides(cfg, decode_rule=DecodeRule.ARGMAX)


def test_packaged_presets():
    store = PresetStore(PRESETS_JSON)
    ids = store.load()
    for name in ("cross-entropy", "fix-a-run1", "fix-a-run2", "learn-a", "learn-a-sigm", "cheng", "qwk-cold", "qwk-warm"):
        assert name in ids
        build_config(store.get(name))
    run1 = build_config(store.get("fix-a-run1"))
    run2 = build_config(store.get("fix-a-run2"))
    assert resolve_schedule(run1) == [(0, 0.1), (61, 0.01), (200, 0.001)]
    assert resolve_schedule(run2) == [(0, 0.1), (118, 0.01), (200, 0.001)]
    with pytest.raises(KeyError):
        store.get("missing")


def test_preset_store_rejects_bad_files(tmp_path):
    path = tmp_path / "presets.json"
    path.write_text("{not json", encoding="utf-8")
    with pytest.raises(ValueError):
        PresetStore(path).load()
    path.write_text(json.dumps({"presets": [{"id": "x", "values": {"colour": "red"}}]}), encoding="utf-8")
    with pytest.raises(ValueError, match="colour"):
        PresetStore(path).load()


def test_assets_live_next_to_package():
    assert PACKAGE_DIR == Path(app_config.__file__).resolve().parent
    assert ASSETS_DIR == PACKAGE_DIR / "assets"
    assert PRESETS_JSON.is_file()
    assert not hasattr(app_config, "sys")
