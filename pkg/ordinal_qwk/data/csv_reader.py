from __future__ import annotations

from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from ordinal_qwk.errors import ParseError
from ordinal_qwk.models import Dataset

LABEL_COLUMN = "label"


def _numeric_column(df: pd.DataFrame, col: str, source: Union[str, Path]) -> np.ndarray:
    values = pd.to_numeric(df[col].str.strip(), errors="coerce").to_numpy(dtype=np.float64)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        row = int(bad[0])
        # +2: строка заголовка и нумерация с 1
        raise ParseError(
            f"{source}: строка {row + 2}, столбец '{col}': не число ('{df[col].iloc[row]}')"
        )
    return values


def frame_to_dataset(df: pd.DataFrame, k: Optional[int], source: Union[str, Path]) -> Dataset:
    df.columns = [str(c).strip() for c in df.columns]
    if LABEL_COLUMN not in df.columns:
        raise ParseError(f"{source}: нет столбца '{LABEL_COLUMN}' в заголовке {list(df.columns)}")
    if df.empty:
        raise ParseError(f"{source}: нет строк с данными")

    feature_cols: List[str] = [c for c in df.columns if c != LABEL_COLUMN]
    if not feature_cols:
        raise ParseError(f"{source}: кроме '{LABEL_COLUMN}' нет ни одного столбца признаков")

    raw_labels = _numeric_column(df, LABEL_COLUMN, source)
    not_int = np.flatnonzero(raw_labels != np.round(raw_labels))
    if not_int.size:
        row = int(not_int[0])
        raise ParseError(f"{source}: строка {row + 2}, столбец '{LABEL_COLUMN}': метка должна быть целой")
    labels = raw_labels.astype(np.int64)

    if k is None:
        k = max(int(labels.max()) + 1, 2)
    out_of_range = np.flatnonzero((labels < 0) | (labels >= k))
    if out_of_range.size:
        row = int(out_of_range[0])
        raise ParseError(
            f"{source}: строка {row + 2}, столбец '{LABEL_COLUMN}': метка {labels[row]} вне диапазона [0, {k - 1}]"
        )

    features = np.column_stack([_numeric_column(df, c, source) for c in feature_cols])
    return Dataset(features=features, labels=labels, k=k)


def load_csv(path: Union[str, Path], k: Optional[int] = None) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Не найден файл данных: {path}")
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise ParseError(f"Некорректный CSV в {path}: {e}") from e
    return frame_to_dataset(df, k, path)


def save_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df = pd.DataFrame(dataset.features, columns=[f"x{i}" for i in range(dataset.d)])
    df[LABEL_COLUMN] = dataset.labels
    df.to_csv(path, index=False, float_format="%.17g", encoding="utf-8")
    return path
