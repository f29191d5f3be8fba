"""
Серия экспериментов × сиды: сводка κ и кросс-энтропии, средние кривые по
эпохам и сравнение декодеров round-soft-argmax / conditional-risk.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ordinal_qwk.config import DEFAULT_RUNS, PRESETS_JSON
from ordinal_qwk.config_store import PresetStore, load_config
from ordinal_qwk.errors import ConfigError
from ordinal_qwk.harness import RunResult, metrics_frame, run_experiment
from ordinal_qwk.models import DecodeRule
from ordinal_qwk.render.excel_report import render_suite_report

log = logging.getLogger(__name__)

DEFAULT_EXPERIMENTS = ["cross-entropy", "fix-a", "learn-a", "learn-a-sigm", "cheng", "qwk-cold", "qwk-warm"]


@dataclass
class SuiteResult:
    out_dir: Path
    runs: Dict[str, List[RunResult]]
    summary: pd.DataFrame
    curves: pd.DataFrame
    decoders: pd.DataFrame


def decoder_comparison(run: RunResult) -> Optional[Dict[str, object]]:
    """κ при round-soft-argmax и conditional-risk и доля совпавших прогнозов."""
    preds = run.evaluation.predictions_by_rule
    if DecodeRule.ROUND_SOFT_ARGMAX not in preds or DecodeRule.CONDITIONAL_RISK not in preds:
        return None
    k_round = run.evaluation.kappa_by_rule[DecodeRule.ROUND_SOFT_ARGMAX]
    k_risk = run.evaluation.kappa_by_rule[DecodeRule.CONDITIONAL_RISK]
    return {
        "loss": run.config.loss.value,
        "seed": run.config.seed,
        "qwk_round_soft_argmax": k_round,
        "qwk_conditional_risk": k_risk,
        "qwk_gap": abs(k_round - k_risk),
        "agreement": float(np.mean(preds[DecodeRule.ROUND_SOFT_ARGMAX] == preds[DecodeRule.CONDITIONAL_RISK])),
    }


def summarize(runs: Mapping[str, List[RunResult]]) -> pd.DataFrame:
    rows = []
    for name, results in runs.items():
        kappas = [r.evaluation.kappa for r in results]
        ces = [r.evaluation.cross_entropy for r in results if r.evaluation.cross_entropy is not None]
        rows.append({
            "experiment": name,
            "loss": results[0].config.loss.value,
            "runs": len(results),
            "mean_val_qwk": float(np.mean(kappas)),
            "std_val_qwk": float(np.std(kappas)),
            "mean_val_cross_entropy": float(np.mean(ces)) if ces else None,
            "seeds": " ".join(str(r.config.seed) for r in results),
            "val_qwk_per_seed": " ".join(f"{k:.6f}" for k in kappas),
        })
    return pd.DataFrame(rows)


def mean_curves(runs: Mapping[str, List[RunResult]]) -> pd.DataFrame:
    frames = []
    for name, results in runs.items():
        stacked = pd.concat([metrics_frame(r.metrics) for r in results])
        mean = stacked.groupby("epoch", as_index=False)[["val_cross_entropy", "val_qwk"]].mean()
        mean.insert(0, "experiment", name)
        frames.append(mean)
    return pd.concat(frames, ignore_index=True)


def run_suite(
    out_dir: Path,
    experiments: Sequence[str] = DEFAULT_EXPERIMENTS,
    runs: int = DEFAULT_RUNS,
    base_seed: int = 1,
    overrides: Optional[Mapping[str, str]] = None,
    jobs: int = 1,
    store: Optional[PresetStore] = None,
) -> SuiteResult:
    overrides = dict(overrides or {})
    for key in ("loss", "seed", "output_dir"):
        if key in overrides:
            raise ConfigError(f"'{key}' задаётся самой серией экспериментов и не может быть переопределён")
    if runs < 1:
        raise ConfigError(f"Число прогонов должно быть >= 1, получено {runs}")

    if store is None:
        store = PresetStore(PRESETS_JSON)
        store.load()

    out_dir = Path(out_dir)
    tasks = []
    for name in experiments:
        preset = store.get(name)
        for i in range(runs):
            seed = base_seed + i
            values = dict(overrides, seed=str(seed), output_dir=str(out_dir / name / f"seed_{seed}"))
            tasks.append((name, load_config(overrides=values, preset=preset)))

    log.info("Серия: %d экспериментов × %d прогонов, потоков: %d", len(experiments), runs, jobs)
    with ThreadPoolExecutor(max_workers=max(jobs, 1)) as pool:
        results = list(pool.map(lambda t: run_experiment(t[1]), tasks))

    grouped: Dict[str, List[RunResult]] = {name: [] for name in experiments}
    for (name, _), result in zip(tasks, results):
        grouped[name].append(result)

    summary = summarize(grouped)
    curves = mean_curves(grouped)
    decoder_rows = []
    for name, results in grouped.items():
        for r in results:
            row = decoder_comparison(r)
            if row is not None:
                decoder_rows.append({"experiment": name, **row})
    decoders = pd.DataFrame(
        decoder_rows,
        columns=["experiment", "loss", "seed", "qwk_round_soft_argmax", "qwk_conditional_risk", "qwk_gap", "agreement"],
    )

    out_dir.mkdir(parents=True, exist_ok=True)
    summary.to_csv(out_dir / "summary.csv", index=False, float_format="%.17g")
    curves.to_csv(out_dir / "curves.csv", index=False, float_format="%.17g")
    decoders.to_csv(out_dir / "decoders.csv", index=False, float_format="%.17g")

    render_suite_report(summary, curves, decoders, out_dir / "summary.xlsx")
    log.info("Сводка сохранена: %s", out_dir)
    for row in summary.itertuples():
        log.info("  %-14s mean val_qwk=%.4f (runs=%d)", row.experiment, row.mean_val_qwk, row.runs)

    return SuiteResult(out_dir=out_dir, runs=grouped, summary=summary, curves=curves, decoders=decoders)

