from __future__ import annotations

from pathlib import Path
from typing import Optional, Tuple, Union

import pandas as pd
from openpyxl import load_workbook

from ordinal_qwk.data.csv_reader import LABEL_COLUMN, frame_to_dataset
from ordinal_qwk.errors import ParseError
from ordinal_qwk.models import Dataset


def _norm(s: str) -> str:
    return str(s).strip().lower()


def read_dataset_from_excel(path: Union[str, Path], k: Optional[int] = None) -> Tuple[Dataset, str]:
    """Первый лист книги: строка заголовка со столбцом 'label', под ней данные до первой пустой строки."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Не найден файл данных: {path}")
    wb = load_workbook(path, data_only=True, read_only=True)
    ws = wb.active
    rows = list(ws.iter_rows(values_only=True))
    sheet = ws.title
    wb.close()

    header_idx = None
    for r, values in enumerate(rows[:80]):
        if any(v is not None and _norm(v) == LABEL_COLUMN for v in values):
            header_idx = r
            break

    if header_idx is None:
        raise ParseError(f"{path}: не удалось найти строку заголовка со столбцом '{LABEL_COLUMN}'")

    header = [_norm(v) if v is not None else "" for v in rows[header_idx]]
    width = max(i for i, h in enumerate(header) if h) + 1
    header = header[:width]

    body = []
    for values in rows[header_idx + 1:]:
        cells = list(values[:width]) + [None] * (width - len(values[:width]))
        if all(v is None or str(v).strip() == "" for v in cells):
            if body:
                break
            continue
        body.append(["" if v is None else repr(v) if isinstance(v, float) else str(v) for v in cells])

    df = pd.DataFrame(body, columns=header, dtype=str)
    return frame_to_dataset(df, k, f"{path} [{sheet}]"), sheet


def load_xlsx(path: Union[str, Path], k: Optional[int] = None) -> Dataset:
    dataset, _ = read_dataset_from_excel(path, k)
    return dataset
