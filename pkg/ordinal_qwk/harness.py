"""
Раннер эксперимента: данные -> сеть -> обучение по эпохам -> метрики и файлы.

Каталог прогона:
    metrics.csv            строка на эпоху (0 = до обучения), воспроизводим побайтно
    timing.csv             секунды на эпоху (вне metrics.csv)
    predictions.csv        метка, прогноз и непрерывная оценка на валидации
    hist_correct_prob.csv, correct_prob.csv, class_prob_summary.csv  (softmax-головы)
    config.snapshot        разрешённая конфигурация
    params.bin             итоговые параметры
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from ordinal_qwk.config import CLAMP_EPS, default_output_dir
from ordinal_qwk.config_store import (
    config_to_text,
    learning_rate_at,
    resolve_decode_rule,
    resolve_schedule,
    validate_config,
)
from ordinal_qwk.data.csv_reader import load_csv
from ordinal_qwk.data.excel_reader import load_xlsx
from ordinal_qwk.data.generator import generate
from ordinal_qwk.data.split import split, standardize
from ordinal_qwk.decode import check_rule_for_head, decode_outputs, rules_for_head
from ordinal_qwk.diagnostics import dump_correct_class_probabilities, dump_per_class_probability_summary
from ordinal_qwk.errors import ConfigError, DegenerateBatchError
from ordinal_qwk.heads import head_loss, head_score
from ordinal_qwk.logger import attach_run_log, detach_run_log
from ordinal_qwk.models import (
    Dataset,
    DecodeRule,
    EpochMetrics,
    ExperimentConfig,
    LossKind,
    NetworkParams,
    OptimizerState,
    Tensor,
    WeightMatrix,
)
from ordinal_qwk.netcore import backward, forward, init_params, sgd_nesterov_step
from ordinal_qwk.qwk import kappa_from_labels, weight_matrix
from ordinal_qwk.render.params_file import save_params

log = logging.getLogger(__name__)

METRIC_COLUMNS = [
    "epoch", "split", "loss", "learning_rate", "train_loss", "val_cross_entropy", "val_qwk",
] + [rule.column for rule in DecodeRule] + ["skipped_batches"]


@dataclass
class Evaluation:
    cross_entropy: Optional[float]
    kappa: float
    predictions: np.ndarray
    kappa_by_rule: Dict[DecodeRule, float]
    predictions_by_rule: Dict[DecodeRule, np.ndarray]
    scores: Optional[Tensor]
    outputs: Tensor


@dataclass
class RunResult:
    run_dir: Path
    config: ExperimentConfig
    params: NetworkParams
    metrics: List[EpochMetrics]
    evaluation: Evaluation
    val: Dataset = field(repr=False)


def load_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.data_path is None:
        return generate(cfg.generator)
    suffix = cfg.data_path.suffix.lower()
    if suffix == ".xlsx":
        dataset = load_xlsx(cfg.data_path, k=cfg.k)
    elif suffix == ".xls":
        raise ConfigError("Поддержка .xls отключена. Сохраните файл как .xlsx.")
    else:
        dataset = load_csv(cfg.data_path, k=cfg.k)
    log.info("Загружено из %s: n=%d, d=%d, k=%d", cfg.data_path, dataset.n, dataset.d, dataset.k)
    return dataset


def prepare_data(cfg: ExperimentConfig) -> Tuple[Dataset, Dataset]:
    train, val = split(load_dataset(cfg), cfg.val_fraction, cfg.generator.seed)
    return standardize(train, val)


def _weights(cfg: ExperimentConfig) -> WeightMatrix:
    return weight_matrix(cfg.k, cfg.weights)


def evaluate(
    params: NetworkParams,
    dataset: Dataset,
    decode_rule: DecodeRule,
    weights: Optional[WeightMatrix] = None,
) -> Evaluation:
    """κ по жёстким прогнозам; кросс-энтропия только для softmax-головы ширины k."""
    kind = LossKind.parse(params.head)
    check_rule_for_head(decode_rule, kind)
    if params.output_width != kind.output_width(dataset.k):
        raise ConfigError(
            f"Голова '{kind.value}' ожидает ширину {kind.output_width(dataset.k)}, у сети {params.output_width}"
        )
    if weights is None:
        weights = weight_matrix(dataset.k)

    outputs = forward(params, dataset.features)[-1]
    scores = head_score(kind, outputs, params.anchor)

    cross_entropy = None
    if kind is not LossKind.CHENG:
        picked = np.maximum(outputs[np.arange(dataset.n), dataset.labels], CLAMP_EPS)
        cross_entropy = float(np.mean(-np.log(picked)))

    preds: Dict[DecodeRule, np.ndarray] = {}
    kappas: Dict[DecodeRule, float] = {}
    for rule in rules_for_head(kind):
        preds[rule] = decode_outputs(rule, outputs, anchor=params.anchor, weights=weights, scores=scores)
        kappas[rule] = kappa_from_labels(dataset.labels, preds[rule], dataset.k, weights)

    return Evaluation(
        cross_entropy=cross_entropy,
        kappa=kappas[decode_rule],
        predictions=preds[decode_rule],
        kappa_by_rule=kappas,
        predictions_by_rule=preds,
        scores=scores,
        outputs=outputs,
    )


def build_params(cfg: ExperimentConfig, input_dim: int) -> NetworkParams:
    rng = np.random.default_rng([cfg.seed, 0])
    anchor = np.arange(cfg.k, dtype=np.float64) if cfg.loss.learns_anchor else None
    return init_params(
        input_dim,
        cfg.hidden,
        cfg.loss.output_width(cfg.k),
        cfg.loss.output_activation,
        rng,
        anchor=anchor,
        head=cfg.loss.value,
    )


def active_loss(cfg: ExperimentConfig, epoch: int) -> LossKind:
    """Функция потерь эпохи с номером epoch (1..E); эпоха 0 считается первой."""
    ws = cfg.warm_start
    if ws is not None and max(epoch, 1) <= ws.epochs:
        return ws.loss
    return cfg.loss


def _batch_loss(
    params: NetworkParams, features: Tensor, labels: np.ndarray, kind: LossKind, k: int, weights: WeightMatrix,
):
    trace = forward(params, features)
    return trace, head_loss(kind, trace[-1], labels, k, anchor=params.anchor, weights=weights)


def dataset_loss(params: NetworkParams, dataset: Dataset, kind: LossKind, weights: WeightMatrix) -> Optional[float]:
    try:
        return _batch_loss(params, dataset.features, dataset.labels, kind, dataset.k, weights)[1].value
    except DegenerateBatchError:
        return None


def train_epoch(
    params: NetworkParams,
    state: OptimizerState,
    train: Dataset,
    kind: LossKind,
    batch_size: int,
    weights: WeightMatrix,
    rng: np.random.Generator,
) -> Tuple[NetworkParams, OptimizerState, Optional[float], int]:
    order = rng.permutation(train.n)
    losses: List[float] = []
    skipped = 0

    for start in range(0, train.n, batch_size):
        idx = order[start:start + batch_size]
        try:
            trace, hl = _batch_loss(params, train.features[idx], train.labels[idx], kind, train.k, weights)
        except DegenerateBatchError as e:
            skipped += 1
            log.warning("Батч пропущен (%s); пропущено за эпоху: %d", e, skipped)
            continue

        grads, _ = backward(params, trace, hl.grad_output)
        if hl.grad_anchor is not None:
            grads = grads.with_arrays(grads.arrays()[:-1] + [hl.grad_anchor])
        params, state = sgd_nesterov_step(params, grads, state)
        losses.append(hl.value)

    return params, state, (float(np.mean(losses)) if losses else None), skipped


def _metrics_row(m: EpochMetrics) -> Dict[str, object]:
    row: Dict[str, object] = {
        "epoch": m.epoch,
        "split": m.split,
        "loss": m.loss,
        "learning_rate": m.learning_rate,
        "train_loss": m.train_loss,
        "val_cross_entropy": m.val_cross_entropy,
        "val_qwk": m.val_qwk,
        "skipped_batches": m.skipped_batches,
    }
    for rule in DecodeRule:
        row[rule.column] = m.val_qwk_by_rule.get(rule)
    return row


def metrics_frame(metrics: List[EpochMetrics]) -> pd.DataFrame:
    return pd.DataFrame([_metrics_row(m) for m in metrics], columns=METRIC_COLUMNS)


def write_metrics(metrics: List[EpochMetrics], run_dir: Path) -> None:
    metrics_frame(metrics).to_csv(run_dir / "metrics.csv", index=False, float_format="%.17g")
    pd.DataFrame(
        {"epoch": [m.epoch for m in metrics], "wall_seconds": [m.wall_seconds for m in metrics]}
    ).to_csv(run_dir / "timing.csv", index=False, float_format="%.6f")


def write_predictions(evaluation: Evaluation, dataset: Dataset, path: Path) -> None:
    df = pd.DataFrame({"label": dataset.labels, "prediction": evaluation.predictions})
    if evaluation.scores is not None:
        df["score"] = evaluation.scores
    df.to_csv(path, index=False, float_format="%.17g")


def write_run_outputs(params: NetworkParams, val: Dataset, evaluation: Evaluation, run_dir: Path) -> None:
    write_predictions(evaluation, val, run_dir / "predictions.csv")
    if LossKind.parse(params.head) is not LossKind.CHENG:
        dump_correct_class_probabilities(params, val, run_dir)
        dump_per_class_probability_summary(params, val, run_dir)


def resolve_run_dir(cfg: ExperimentConfig) -> Path:
    if cfg.output_dir is not None:
        return Path(cfg.output_dir)
    return default_output_dir() / f"{cfg.loss.value}_seed{cfg.seed}"


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    validate_config(cfg)
    run_dir = resolve_run_dir(cfg)
    run_dir.mkdir(parents=True, exist_ok=True)
    handler = attach_run_log(run_dir)
    try:
        return _run(cfg, run_dir)
    except Exception as e:
        log.error("Ошибка прогона: %s", e)
        raise
    finally:
        detach_run_log(handler)


def _run(cfg: ExperimentConfig, run_dir: Path) -> RunResult:
    cfg = replace(cfg, output_dir=run_dir)
    (run_dir / "config.snapshot").write_text(config_to_text(cfg), encoding="utf-8")

    schedule = resolve_schedule(cfg)
    rule = resolve_decode_rule(cfg)
    weights = _weights(cfg)
    log.info(
        "Эксперимент '%s' (seed=%d): эпох %d, батч %d, расписание %s, декодер %s, тёплый старт %s",
        cfg.loss.value, cfg.seed, cfg.epochs, cfg.batch_size, schedule, rule.value,
        f"{cfg.warm_start.loss.value}:{cfg.warm_start.epochs}" if cfg.warm_start else "нет",
    )

    train, val = prepare_data(cfg)
    params = build_params(cfg, train.d)
    params.head = active_loss(cfg, 0).value
    state = OptimizerState(
        velocity=params.zeros_like(),
        learning_rate=learning_rate_at(schedule, 0),
        momentum=cfg.momentum,
    )
    shuffle_rng = np.random.default_rng([cfg.seed, 1])

    def record(epoch: int, kind: LossKind, train_loss: Optional[float], skipped: int, started: float) -> Evaluation:
        ev = evaluate(params, val, rule, weights)
        metrics.append(EpochMetrics(
            epoch=epoch,
            split="val",
            loss=kind.value,
            learning_rate=state.learning_rate,
            train_loss=train_loss,
            val_cross_entropy=ev.cross_entropy,
            val_qwk=ev.kappa,
            val_qwk_by_rule=ev.kappa_by_rule,
            skipped_batches=skipped,
            wall_seconds=time.perf_counter() - started,
        ))
        log.info(
            "Эпоха %d [%s, alpha=%g]: train_loss=%s, val_ce=%s, val_qwk=%.4f",
            epoch, kind.value, state.learning_rate,
            "-" if train_loss is None else f"{train_loss:.5f}",
            "-" if ev.cross_entropy is None else f"{ev.cross_entropy:.5f}",
            ev.kappa,
        )
        return ev

    metrics: List[EpochMetrics] = []
    started = time.perf_counter()
    evaluation = record(0, active_loss(cfg, 0), dataset_loss(params, train, active_loss(cfg, 0), weights), 0, started)

    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        kind = active_loss(cfg, epoch)
        if kind.value != params.head:
            log.info("Эпоха %d: переключение функции потерь %s -> %s", epoch, params.head, kind.value)
            params.head = kind.value
        state = replace(state, learning_rate=learning_rate_at(schedule, epoch - 1))
        params, state, train_loss, skipped = train_epoch(
            params, state, train, kind, cfg.batch_size, weights, shuffle_rng,
        )
        evaluation = record(epoch, kind, train_loss, skipped, started)

    write_metrics(metrics, run_dir)
    save_params(params, run_dir / "params.bin")
    write_run_outputs(params, val, evaluation, run_dir)
    log.info("Готово: %s (итоговая val_qwk=%.4f)", run_dir, evaluation.kappa)

    return RunResult(run_dir=run_dir, config=cfg, params=params, metrics=metrics, evaluation=evaluation, val=val)
