"""
Порядковые головы и функции потерь.

Построчные функции (cross_entropy_loss, fix_a_loss, ...) считают значение на
одном примере. head_loss считает среднюю по батчу потерю вместе с
градиентом по выходу сети и, для learn-a, по вектору a.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ordinal_qwk.config import CLAMP_EPS, STOCHASTIC_TOL
from ordinal_qwk.errors import ConfigError, DomainError, LabelError, ShapeError
from ordinal_qwk.models import AnchorVector, GaussianHeadParams, LossKind, Tensor, WeightMatrix
from ordinal_qwk.netcore import sigmoid
from ordinal_qwk import qwk
from ordinal_qwk.qwk import one_hot


@dataclass(frozen=True)
class HeadLoss:
    value: float
    grad_output: Tensor              # dL/d(выход сети), n x width
    grad_anchor: Optional[Tensor]    # dL/da, только для learn-a


def _row(f) -> Tensor:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ShapeError(f"Ожидалась строка вероятностей, получена форма {f.shape}")
    return f


def _check_stochastic(f: Tensor) -> None:
    if np.any(f < -STOCHASTIC_TOL) or np.any(np.abs(f.sum(axis=-1) - 1.0) > STOCHASTIC_TOL):
        raise DomainError("Строка f не является распределением вероятностей (f >= 0, сумма = 1)")


def _check_label(c: int, k: int) -> int:
    if int(c) != c or not 0 <= c <= k - 1:
        raise LabelError(f"Метка {c} вне диапазона [0, {k - 1}]")
    return int(c)


def _anchor_values(anchor, k: int) -> Tensor:
    if anchor is None:
        return np.arange(k, dtype=np.float64)
    a = anchor.a if isinstance(anchor, AnchorVector) else np.asarray(anchor, dtype=np.float64)
    if a.shape != (k,):
        raise ShapeError(f"Длина a = {a.shape} не совпадает с k = {k}")
    return a


def cross_entropy_loss(f, y) -> float:
    f, y = _row(f), _row(y)
    if f.shape != y.shape:
        raise ShapeError(f"Длины f {f.shape} и y {y.shape} различаются")
    _check_stochastic(f)
    return float(-np.sum(y * np.log(np.maximum(f, CLAMP_EPS))))


def soft_argmax(f, a=None) -> float:
    f = _row(f)
    return float(_anchor_values(a, f.size) @ f)


def fix_a_loss(f, c: int) -> float:
    f = _row(f)
    _check_stochastic(f)
    c = _check_label(c, f.size)
    a = np.arange(f.size, dtype=np.float64)
    return float((c - a @ f) ** 2)


def learn_a_loss(f, c: int, a) -> float:
    f = _row(f)
    _check_stochastic(f)
    c = _check_label(c, f.size)
    a = _anchor_values(a, f.size)
    return float((c - a @ f) ** 2)


def _bounded_sigm(z, k: int):
    # в float64 σ(z) округляется до 1 уже при z ≳ 37: держим прогноз строго внутри (0, k−1)
    return np.clip((k - 1) * sigmoid(z), np.nextafter(0.0, 1.0), np.nextafter(k - 1.0, 0.0))


def learn_a_sigm_prediction(f, a) -> float:
    f = _row(f)
    return float(_bounded_sigm(_anchor_values(a, f.size) @ f, f.size))


def learn_a_sigm_loss(f, c: int, a) -> float:
    f = _row(f)
    _check_stochastic(f)
    c = _check_label(c, f.size)
    return float((c - learn_a_sigm_prediction(f, a)) ** 2)


def cheng_encode(c: int, k: int) -> np.ndarray:
    if k < 2:
        raise ConfigError(f"k должно быть >= 2, получено {k}")
    c = _check_label(c, k)
    code = np.zeros(k - 1, dtype=np.int64)
    code[:c] = 1
    return code


def cheng_bce_loss(g, y_code) -> float:
    g, y = _row(g), _row(y_code)
    if g.shape != y.shape:
        raise ShapeError(f"Длины g {g.shape} и кода {y.shape} различаются")
    g = np.clip(g, CLAMP_EPS, 1.0 - CLAMP_EPS)
    return float(np.sum(-y * np.log(g) - (1.0 - y) * np.log(1.0 - g)))


def gaussian_nll(f, c: int, a=None, params: GaussianHeadParams = GaussianHeadParams()) -> float:
    """-log N(c; aᵀf, σ²). При фиксированной σ² это аффинная функция от (c − aᵀf)²."""
    mean = soft_argmax(f, a)
    return float(0.5 * np.log(2.0 * np.pi * params.sigma_sq) + (c - mean) ** 2 / (2.0 * params.sigma_sq))


def head_score(kind: LossKind, output: Tensor, anchor: Optional[Tensor] = None) -> Optional[Tensor]:
    """Непрерывный прогноз класса; None для голов без него (cheng)."""
    if kind is LossKind.CHENG:
        return None
    k = output.shape[1]
    z = output @ _anchor_values(anchor, k)
    if kind is LossKind.LEARN_A_SIGM:
        return _bounded_sigm(z, k)
    return z


def _check_batch(kind: LossKind, output: Tensor, labels: np.ndarray, k: int) -> None:
    if output.ndim != 2 or output.shape[0] != labels.size:
        raise ShapeError(f"Выход {output.shape} и метки {labels.shape} несогласованы")
    if output.shape[1] != kind.output_width(k):
        raise ShapeError(f"Голова {kind.value} требует ширину {kind.output_width(k)}, получено {output.shape[1]}")
    if labels.size and (labels.min() < 0 or labels.max() > k - 1):
        raise LabelError(f"Метки вне диапазона [0, {k - 1}]")


def head_loss(
    kind: LossKind,
    output: Tensor,
    labels,
    k: int,
    anchor: Optional[Tensor] = None,
    weights: Optional[WeightMatrix] = None,
) -> HeadLoss:
    """Средняя по батчу потеря и её градиенты.

    output: выход сети после активации (softmax ширины k или sigmoid ширины k−1).
    Для qwk потеря считается на батче целиком; вырожденный батч
    поднимает DegenerateBatchError.
    """
    output = np.asarray(output, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch(kind, output, labels, k)
    n = labels.size
    grad_anchor = None

    if kind is LossKind.CROSS_ENTROPY:
        f = np.maximum(output, CLAMP_EPS)
        picked = f[np.arange(n), labels]
        value = float(np.mean(-np.log(picked)))
        grad = np.zeros_like(output)
        # производная clamp равна нулю там, где f < eps
        live = output[np.arange(n), labels] >= CLAMP_EPS
        grad[np.arange(n), labels] = np.where(live, -1.0 / picked, 0.0) / n

    elif kind in (LossKind.FIX_A, LossKind.LEARN_A):
        a = _anchor_values(anchor if kind is LossKind.LEARN_A else None, k)
        resid = labels - output @ a
        value = float(np.mean(resid ** 2))
        dz = -2.0 * resid / n
        grad = np.outer(dz, a)
        if kind is LossKind.LEARN_A:
            grad_anchor = output.T @ dz

    elif kind is LossKind.LEARN_A_SIGM:
        a = _anchor_values(anchor, k)
        s = sigmoid(output @ a)
        resid = labels - (k - 1) * s
        value = float(np.mean(resid ** 2))
        dz = -2.0 * resid * (k - 1) * s * (1.0 - s) / n
        grad = np.outer(dz, a)
        grad_anchor = output.T @ dz

    elif kind is LossKind.CHENG:
        codes = (labels[:, None] > np.arange(k - 1)[None, :]).astype(np.float64)
        g = np.clip(output, CLAMP_EPS, 1.0 - CLAMP_EPS)
        value = float(np.mean(np.sum(-codes * np.log(g) - (1.0 - codes) * np.log(1.0 - g), axis=1)))
        live = (output > CLAMP_EPS) & (output < 1.0 - CLAMP_EPS)
        grad = np.where(live, (-codes / g + (1.0 - codes) / (1.0 - g)) / n, 0.0)

    elif kind is LossKind.QWK:
        if weights is None:
            weights = qwk.weight_matrix(k, "quadratic")
        value, grad = qwk.qwk_surrogate_loss_grad(one_hot(labels, k), output, weights)

    else:  # pragma: no cover
        raise ConfigError(f"Неизвестная функция потерь {kind}")

    return HeadLoss(value=value, grad_output=grad, grad_anchor=grad_anchor)
