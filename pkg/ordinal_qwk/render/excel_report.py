from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd
from openpyxl import Workbook
from openpyxl.styles import Font
from openpyxl.worksheet.worksheet import Worksheet

from ordinal_qwk.config import APP_NAME

# Подписи столбцов отчёта
HEADERS: Dict[str, str] = {
    "experiment": "Эксперимент",
    "loss": "Функция потерь",
    "runs": "Прогонов",
    "mean_val_qwk": "Средняя val QWK",
    "std_val_qwk": "СКО val QWK",
    "mean_val_cross_entropy": "Средняя val кросс-энтропия",
    "seeds": "Сиды",
    "val_qwk_per_seed": "val QWK по сидам",
    "epoch": "Эпоха",
    "val_cross_entropy": "val кросс-энтропия",
    "val_qwk": "val QWK",
    "seed": "Сид",
    "qwk_round_soft_argmax": "QWK (округление aᵀf)",
    "qwk_conditional_risk": "QWK (мин. условного риска)",
    "qwk_gap": "Разница QWK",
    "agreement": "Доля совпадений",
}


def _cell_value(v):
    if v is None or (isinstance(v, float) and v != v):
        return None
    if hasattr(v, "item"):
        return v.item()
    return v


def _write_table(ws: Worksheet, df: pd.DataFrame, header_row: int) -> int:
    columns: List[str] = list(df.columns)
    for c, name in enumerate(columns, start=1):
        cell = ws.cell(header_row, c)
        cell.value = HEADERS.get(name, name)
        cell.font = Font(bold=True)

    for i, values in enumerate(df.itertuples(index=False), start=1):
        for c, v in enumerate(values, start=1):
            ws.cell(header_row + i, c).value = _cell_value(v)

    for c, name in enumerate(columns, start=1):
        width = max(len(HEADERS.get(name, name)), 10)
        ws.column_dimensions[ws.cell(header_row, c).column_letter].width = width + 2

    return header_row + len(df) + 1


def create_report(summary: pd.DataFrame, curves: pd.DataFrame, decoders: Optional[pd.DataFrame]) -> Workbook:
    wb = Workbook()
    ws = wb.active
    ws.title = "Итоги"
    ws["A1"] = f"{APP_NAME}: сводка серии экспериментов"
    ws["A1"].font = Font(bold=True, size=13)
    _write_table(ws, summary, header_row=3)

    ws_curves = wb.create_sheet("Кривые")
    _write_table(ws_curves, curves, header_row=1)

    if decoders is not None and not decoders.empty:
        ws_dec = wb.create_sheet("Декодеры")
        after = _write_table(ws_dec, decoders, header_row=1)
        ws_dec.cell(after + 1, 1).value = "Макс. разница"
        ws_dec.cell(after + 1, list(decoders.columns).index("qwk_gap") + 1).value = float(decoders["qwk_gap"].max())

    return wb


def render_suite_report(
    summary: pd.DataFrame,
    curves: pd.DataFrame,
    decoders: Optional[pd.DataFrame],
    output_path: Path,
) -> Path:
    wb = create_report(summary, curves, decoders)
    wb.save(output_path)
    return Path(output_path)
