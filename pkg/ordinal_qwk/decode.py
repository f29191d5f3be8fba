"""
Правила получения класса из выхода сети.

Построчные функции соответствуют одному примеру; decode_outputs применяет
правило ко всему батчу.
"""
from __future__ import annotations

from typing import Optional

import numpy as np

from ordinal_qwk.errors import ConfigError, ShapeError
from ordinal_qwk.models import DecodeRule, LossKind, Tensor, WeightMatrix

SOFTMAX_RULES = (DecodeRule.ROUND_SOFT_ARGMAX, DecodeRule.ARGMAX, DecodeRule.CONDITIONAL_RISK)


def default_rule(kind: LossKind) -> DecodeRule:
    if kind is LossKind.CHENG:
        return DecodeRule.CHENG_FIRST_ZERO
    if kind in (LossKind.CROSS_ENTROPY, LossKind.QWK):
        return DecodeRule.ARGMAX
    return DecodeRule.ROUND_SOFT_ARGMAX


def rules_for_head(kind: LossKind):
    return (DecodeRule.CHENG_FIRST_ZERO,) if kind is LossKind.CHENG else SOFTMAX_RULES


def check_rule_for_head(rule: DecodeRule, kind: LossKind) -> None:
    if rule not in rules_for_head(kind):
        raise ConfigError(f"Правило '{rule.value}' неприменимо к голове '{kind.value}'")


def round_half_up(scores, k: int) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    return np.clip(np.floor(scores + 0.5), 0, k - 1).astype(np.int64)


def round_soft_argmax(f, a=None) -> int:
    f = np.asarray(f, dtype=np.float64)
    a = np.arange(f.size, dtype=np.float64) if a is None else np.asarray(getattr(a, "a", a), dtype=np.float64)
    if a.shape != f.shape:
        raise ShapeError(f"Длины f {f.shape} и a {a.shape} различаются")
    return int(round_half_up(a @ f, f.size))


def argmax_decode(f) -> int:
    # np.argmax возвращает первый индекс максимума
    return int(np.argmax(np.asarray(f, dtype=np.float64)))


def cheng_decode(g) -> int:
    bits = np.asarray(g, dtype=np.float64) >= 0.5
    zeros = np.flatnonzero(~bits)
    return int(zeros[0]) if zeros.size else int(bits.size)


def conditional_risk_decode(f, W) -> int:
    Wm = W.W if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)
    risks = np.asarray(f, dtype=np.float64) @ Wm
    return int(np.argmin(risks))


def decode_outputs(
    rule: DecodeRule,
    outputs: Tensor,
    anchor: Optional[Tensor] = None,
    weights: Optional[WeightMatrix] = None,
    scores: Optional[Tensor] = None,
) -> np.ndarray:
    """Классы для всего батча.

    scores: готовый непрерывный прогноз головы (например (k−1)σ(aᵀf) для
    learn-a-sigm); если не задан, берётся aᵀf.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.ndim != 2:
        raise ShapeError(f"Ожидалась матрица выходов, получена форма {outputs.shape}")

    if rule is DecodeRule.CHENG_FIRST_ZERO:
        bits = outputs >= 0.5
        width = outputs.shape[1]
        has_zero = ~np.all(bits, axis=1)
        return np.where(has_zero, np.argmin(bits, axis=1), width).astype(np.int64)

    k = outputs.shape[1]
    if rule is DecodeRule.ARGMAX:
        return np.argmax(outputs, axis=1).astype(np.int64)
    if rule is DecodeRule.ROUND_SOFT_ARGMAX:
        if scores is None:
            a = np.arange(k, dtype=np.float64) if anchor is None else np.asarray(anchor, dtype=np.float64)
            scores = outputs @ a
        return round_half_up(scores, k)
    if rule is DecodeRule.CONDITIONAL_RISK:
        if weights is None:
            raise ConfigError("Для conditional-risk нужна матрица весов W")
        return np.argmin(outputs @ weights.W, axis=1).astype(np.int64)
    raise ConfigError(f"Неизвестное правило декодирования {rule}")  # pragma: no cover
