"""
Диагностические выгрузки для softmax-голов: вероятность правильного класса
(гистограмма) и распределение предсказанных вероятностей по классам.
"""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd

from ordinal_qwk.config import HIST_BINS
from ordinal_qwk.errors import UnsupportedHeadError
from ordinal_qwk.models import Dataset, NetworkParams, Tensor
from ordinal_qwk.netcore import forward

log = logging.getLogger(__name__)


def _softmax_outputs(params: NetworkParams, dataset: Dataset) -> Tensor:
    last = params.layers[-1]
    if last.activation != "softmax" or last.fan_out != dataset.k:
        raise UnsupportedHeadError(
            f"Для выгрузки вероятностей нужна softmax-голова ширины {dataset.k}, "
            f"а у сети '{last.activation}' ширины {last.fan_out}"
        )
    return forward(params, dataset.features)[-1]


def correct_class_histogram(p_correct: Tensor, bins: int = HIST_BINS) -> pd.DataFrame:
    counts, edges = np.histogram(p_correct, bins=bins, range=(0.0, 1.0))
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def dump_correct_class_probabilities(
    params: NetworkParams,
    dataset: Dataset,
    out_dir: Optional[Path] = None,
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    probs = _softmax_outputs(params, dataset)
    p_correct = probs[np.arange(dataset.n), dataset.labels]
    per_example = pd.DataFrame({"label": dataset.labels, "p_correct": p_correct})
    hist = correct_class_histogram(p_correct)

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        per_example.to_csv(out_dir / "correct_prob.csv", index=False, float_format="%.17g")
        hist.to_csv(out_dir / "hist_correct_prob.csv", index=False, float_format="%.17g")
        log.info("Сохранено: %s", out_dir / "hist_correct_prob.csv")
    return per_example, hist


def dump_per_class_probability_summary(
    params: NetworkParams,
    dataset: Dataset,
    out_dir: Optional[Path] = None,
) -> pd.DataFrame:
    probs = _softmax_outputs(params, dataset)
    # линейная интерполяция между порядковыми статистиками
    q = np.percentile(probs, [0, 25, 50, 75, 100], axis=0, method="linear")
    iqr = q[3] - q[1]
    low = np.array([probs[:, c][probs[:, c] >= q[1, c] - 1.5 * iqr[c]].min() for c in range(dataset.k)])
    high = np.array([probs[:, c][probs[:, c] <= q[3, c] + 1.5 * iqr[c]].max() for c in range(dataset.k)])

    summary = pd.DataFrame({
        "class": np.arange(dataset.k),
        "min": q[0],
        "q1": q[1],
        "median": q[2],
        "q3": q[3],
        "max": q[4],
        "whisker_low": low,
        "whisker_high": high,
    })

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        summary.to_csv(out_dir / "class_prob_summary.csv", index=False, float_format="%.17g")
        log.info("Сохранено: %s", out_dir / "class_prob_summary.csv")
    return summary
