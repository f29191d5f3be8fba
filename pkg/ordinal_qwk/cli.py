"""
Командная строка: generate-data, train, evaluate, gradcheck, kappa, compare, presets.

Любой ключ конфигурации задаётся флагом с тем же именем (--lr-schedule или --lr_schedule).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from ordinal_qwk.config import APP_NAME, CLI_WEIGHT_KINDS, DECODE_TOKENS, DEFAULT_RUNS, LOSS_TOKENS, PRESETS_JSON
from ordinal_qwk.config_store import CONFIG_KEYS, PresetStore, build_config, load_config, resolve_decode_rule
from ordinal_qwk.data.csv_reader import load_csv, save_csv
from ordinal_qwk.data.excel_reader import load_xlsx
from ordinal_qwk.data.generator import generate
from ordinal_qwk.data.split import standardize
from ordinal_qwk.errors import ConfigError
from ordinal_qwk.gradcheck import check_all
from ordinal_qwk.harness import evaluate, prepare_data, run_experiment, write_run_outputs
from ordinal_qwk.logger import attach_run_log, detach_run_log, setup_console_logger
from ordinal_qwk.models import DecodeRule, LossKind
from ordinal_qwk.qwk import kappa_from_labels, weight_matrix
from ordinal_qwk.render.params_file import load_params
from ordinal_qwk.suite import DEFAULT_EXPERIMENTS, run_suite

log = logging.getLogger(__name__)

GENERATOR_KEYS = ["n", "d", "k", "data_seed", "proportions", "latent_noise_sd", "label_noise_rate"]


def _add_config_flags(parser: argparse.ArgumentParser, keys: Sequence[str]) -> None:
    group = parser.add_argument_group("ключи конфигурации")
    for key in keys:
        names = [f"--{key.replace('_', '-')}"]
        if "_" in key:
            names.append(f"--{key}")
        group.add_argument(*names, dest=f"cfg_{key}", default=None, metavar="VALUE")


def _collect_overrides(args: argparse.Namespace) -> Dict[str, str]:
    return {
        name[len("cfg_"):]: value
        for name, value in vars(args).items()
        if name.startswith("cfg_") and value is not None
    }


def _load_store() -> PresetStore:
    store = PresetStore(PRESETS_JSON)
    store.load()
    return store


def cmd_generate_data(args: argparse.Namespace) -> int:
    cfg = build_config(_collect_overrides(args))
    dataset = generate(cfg.generator)
    out = save_csv(dataset, args.out)
    print(f"Сохранено: {out} (n={dataset.n}, d={dataset.d}, k={dataset.k}, классы {dataset.class_counts().tolist()})")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    preset = _load_store().get(args.preset) if args.preset else None
    cfg = load_config(Path(args.config) if args.config else None, _collect_overrides(args), preset)
    result = run_experiment(cfg)
    ev = result.evaluation
    ce = "-" if ev.cross_entropy is None else f"{ev.cross_entropy:.5f}"
    print(f"Итог: val_qwk={ev.kappa:.5f}, val_cross_entropy={ce}, каталог: {result.run_dir}")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    snapshot = run_dir / "config.snapshot"
    cfg = load_config(snapshot)
    params = load_params(run_dir / "params.bin")
    rule = DecodeRule.parse(args.decode_rule) if args.decode_rule else resolve_decode_rule(cfg)

    train, dataset = prepare_data(cfg)
    if args.data:
        path = Path(args.data)
        raw = load_xlsx(path, k=cfg.k) if path.suffix.lower() == ".xlsx" else load_csv(path, k=cfg.k)
        _, dataset = standardize(train, raw)

    out_dir = Path(args.out) if args.out else run_dir / "eval"
    out_dir.mkdir(parents=True, exist_ok=True)
    handler = attach_run_log(out_dir, prefix="evaluate")
    try:
        ev = evaluate(params, dataset, rule, weight_matrix(cfg.k, cfg.weights))
        write_run_outputs(params, dataset, ev, out_dir)
    finally:
        detach_run_log(handler)

    ce = "-" if ev.cross_entropy is None else f"{ev.cross_entropy:.5f}"
    print(f"val_qwk ({rule.value}) = {ev.kappa:.5f}, val_cross_entropy = {ce}")
    for r, value in ev.kappa_by_rule.items():
        print(f"  {r.value:<20} {value:.5f}")
    print(f"Сохранено в: {out_dir}")
    return 0


def cmd_gradcheck(args: argparse.Namespace) -> int:
    kinds = [LossKind.parse(t) for t in args.loss.split(",")] if args.loss else None
    reports = check_all(args.instances, args.seed, kinds)
    failed = 0
    for rep in reports:
        ok = rep.passed(args.tol)
        failed += not ok
        print(f"{rep.kind.value:<14} экземпляров {rep.instances:>4}  макс. отн. ошибка {rep.max_rel_error:.3e}  {'OK' if ok else 'FAIL'}")
    return 1 if failed else 0


def kappa_of_predictions_file(path: Path, k: Optional[int] = None, weights: str = "quadratic") -> float:
    """κ из CSV со столбцами label и prediction."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Не найден файл прогнозов: {path}")
    df = pd.read_csv(path)
    missing = [c for c in ("label", "prediction") if c not in df.columns]
    if missing:
        raise ConfigError(f"{path}: нет столбцов {missing}")
    labels = df["label"].to_numpy(dtype=np.int64)
    preds = df["prediction"].to_numpy(dtype=np.int64)
    if k is None:
        k = max(int(max(labels.max(), preds.max())) + 1, 2)
    return kappa_from_labels(labels, preds, k, weight_matrix(k, weights))


def cmd_kappa(args: argparse.Namespace) -> int:
    value = kappa_of_predictions_file(Path(args.predictions), args.k, args.weights)
    print(f"{value:.10f}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    experiments = [e.strip() for e in args.experiments.split(",") if e.strip()]
    result = run_suite(
        Path(args.out),
        experiments=experiments,
        runs=args.runs,
        base_seed=args.base_seed,
        overrides=_collect_overrides(args),
        jobs=args.jobs,
        store=_load_store(),
    )
    print(result.summary[["experiment", "runs", "mean_val_qwk", "mean_val_cross_entropy"]].to_string(index=False))
    if not result.decoders.empty:
        print(f"Макс. разница QWK между декодерами: {result.decoders['qwk_gap'].max():.4f}")
    print(f"Сохранено в: {result.out_dir}")
    return 0


def cmd_presets(args: argparse.Namespace) -> int:
    store = _load_store()
    for preset_id in store.load():
        values = ", ".join(f"{k}={v}" for k, v in store.get(preset_id).items())
        print(f"{preset_id:<14} {store.describe(preset_id)}  [{values}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ordinal_qwk", description=f"{APP_NAME}: порядковая классификация и QWK")
    parser.add_argument("-v", "--verbose", action="store_true", help="подробный лог")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="сгенерировать синтетический набор в CSV")
    p.add_argument("--out", required=True, help="путь к CSV")
    _add_config_flags(p, GENERATOR_KEYS)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="обучить один эксперимент")
    p.add_argument("--config", help="файл key = value")
    p.add_argument("--preset", help="имя пресета (см. команду presets)")
    _add_config_flags(p, CONFIG_KEYS)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="оценить сохранённый прогон")
    p.add_argument("--run-dir", required=True)
    p.add_argument("--data", help="CSV/XLSX для оценки (по умолчанию: валидационная часть прогона)")
    p.add_argument("--decode-rule", choices=DECODE_TOKENS)
    p.add_argument("--out", help="каталог вывода (по умолчанию <run-dir>/eval)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="сверить градиенты с конечными разностями")
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--loss", help=f"через запятую из: {', '.join(LOSS_TOKENS)}")
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("kappa", help="посчитать κ по CSV с прогнозами")
    p.add_argument("--predictions", required=True, help="CSV со столбцами label, prediction")
    p.add_argument("--k", type=int)
    p.add_argument("--weights", choices=CLI_WEIGHT_KINDS, default="quadratic")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("compare", help="серия экспериментов × сиды со сводкой")
    p.add_argument("--out", required=True)
    p.add_argument("--experiments", default=",".join(DEFAULT_EXPERIMENTS))
    p.add_argument("--runs", type=int, default=DEFAULT_RUNS)
    p.add_argument("--base-seed", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p, [k for k in CONFIG_KEYS if k not in ("loss", "seed", "output_dir")])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("presets", help="список пресетов")
    p.set_defaults(func=cmd_presets)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_console_logger(args.verbose)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as e:
        log.error("%s", e)
        print(f"Ошибка: {e}", file=sys.stderr)
        return 2
