"""
Квадратично взвешенная каппа (QWK) через матрицы O, E, W и дифференцируемая
суррогатная потеря ΣW∘O / ΣW∘E.

O = YᵀP, E = colsum(Y) ⊗ colsum(P) / ΣP, κ = 1 − ΣW∘O / ΣW∘E.
Строки Y считаются one-hot: тогда ΣO = ΣP, а ΣE = n.
При стохастических строках P обе суммы равны n.
"""
from __future__ import annotations

from typing import Tuple, Union

import numpy as np

from ordinal_qwk.errors import ConfigError, DegenerateBatchError, DomainError, LabelError, ShapeError
from ordinal_qwk.models import RatingMatrices, Tensor, WeightKind, WeightMatrix


def one_hot(labels, k: int) -> Tensor:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() > k - 1):
        raise LabelError(f"Метки вне диапазона [0, {k - 1}]")
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels] = 1.0
    return out


def weight_matrix(k: int, kind: Union[WeightKind, str] = WeightKind.QUADRATIC) -> WeightMatrix:
    if k < 2:
        raise ConfigError(f"k должно быть >= 2, получено {k}")
    try:
        kind = WeightKind(kind)
    except ValueError:
        raise ConfigError(f"Неизвестный тип весов '{kind}'") from None

    i, j = np.indices((k, k))
    if kind is WeightKind.QUADRATIC:
        W = (i - j).astype(np.float64) ** 2
    elif kind is WeightKind.DISCRETE:
        W = (i != j).astype(np.float64)
    elif kind is WeightKind.LINEAR:
        W = np.abs(i - j).astype(np.float64)
    else:
        raise ConfigError("Для произвольной матрицы используйте from_array")
    return WeightMatrix(W=W, kind=kind)


def from_array(W) -> WeightMatrix:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] < 2:
        raise ShapeError(f"W должна быть квадратной k×k (k >= 2), получена форма {W.shape}")
    if not np.allclose(W, W.T) or np.any(np.diag(W) != 0) or np.any(W < 0):
        raise ConfigError("W должна быть симметричной, неотрицательной и с нулевой диагональю")
    return WeightMatrix(W=W, kind=WeightKind.CUSTOM)


def _as_matrix(W) -> Tensor:
    return W.W if isinstance(W, WeightMatrix) else np.asarray(W, dtype=np.float64)


def _check_pair(Y, P) -> Tuple[Tensor, Tensor]:
    Y = np.asarray(Y, dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if Y.ndim != 2 or Y.shape != P.shape:
        raise ShapeError(f"Формы Y {Y.shape} и P {P.shape} должны совпадать (n×k)")
    return Y, P


def observed_matrix(Y, P) -> Tensor:
    Y, P = _check_pair(Y, P)
    return Y.T @ P


def _normalizer(Y: Tensor, P: Tensor) -> float:
    if Y.shape[0] == 0:
        raise DomainError("Матрица E не определена при n = 0")
    total = float(P.sum())
    if total <= 0:
        raise DomainError("Сумма P равна нулю, нормировка E невозможна")
    return total


def expected_matrix(Y, P) -> Tensor:
    Y, P = _check_pair(Y, P)
    total = _normalizer(Y, P)
    return np.outer(Y.sum(axis=0), P.sum(axis=0)) / total


def rating_matrices(Y, P) -> RatingMatrices:
    return RatingMatrices(O=observed_matrix(Y, P), E=expected_matrix(Y, P))


def _fraction_terms(Y: Tensor, P: Tensor, W: Tensor) -> Tuple[float, float]:
    if W.shape != (Y.shape[1], Y.shape[1]):
        raise ShapeError(f"W {W.shape} не соответствует k = {Y.shape[1]}")
    num = float(np.sum(W * observed_matrix(Y, P)))
    # ΣW∘E = ΣW∘(colsum(Y) ⊗ colsum(P)) / ΣP: делим один раз в конце
    den = float(np.sum(W * np.outer(Y.sum(axis=0), P.sum(axis=0)))) / _normalizer(Y, P)
    return num, den


def kappa_from_terms(num: float, den: float) -> float:
    if den <= 0.0:
        if num <= 0.0:
            # полное согласие на вырожденном наборе
            return 1.0
        raise DomainError(f"ΣW∘E = 0 при ΣW∘O = {num}: каппа не определена")
    return 1.0 - num / den


def kappa(Y, P, W) -> float:
    Y, P = _check_pair(Y, P)
    num, den = _fraction_terms(Y, P, _as_matrix(W))
    return kappa_from_terms(num, den)


def kappa_from_labels(labels, predictions, k: int, W=None) -> float:
    """κ по жёстким прогнозам (one-hot P)."""
    if W is None:
        W = weight_matrix(k)
    return kappa(one_hot(labels, k), one_hot(predictions, k), W)


def _check_surrogate_batch(Y: Tensor) -> None:
    if Y.shape[0] < 2:
        raise DegenerateBatchError(f"Батч из {Y.shape[0]} примеров: нужен минимум 2")
    if np.count_nonzero(Y.sum(axis=0)) < 2:
        raise DegenerateBatchError("В батче один класс: знаменатель QWK вырожден")


def qwk_surrogate_loss(Y, P, W) -> float:
    Y, P = _check_pair(Y, P)
    _check_surrogate_batch(Y)
    num, den = _fraction_terms(Y, P, _as_matrix(W))
    if den <= 0.0:
        raise DegenerateBatchError("ΣW∘E = 0 на батче")
    return num / den


def qwk_surrogate_loss_grad(Y, P, W) -> Tuple[float, Tensor]:
    """Значение ΣW∘O / ΣW∘E и градиент по P.

    N = Σ_ij W_ij (YᵀP)_ij        → dN/dP = Y W
    D = yᵀ W p / S, S = ΣP         → dD/dP_mj = (Wᵀy)_j / S − D / S
    """
    Y, P = _check_pair(Y, P)
    _check_surrogate_batch(Y)
    Wm = _as_matrix(W)
    num, den = _fraction_terms(Y, P, Wm)
    if den <= 0.0:
        raise DegenerateBatchError("ΣW∘E = 0 на батче")

    total = P.sum()
    y_marg = Y.sum(axis=0)
    d_num = Y @ Wm
    d_den = np.broadcast_to((Wm.T @ y_marg) / total - den / total, P.shape)
    value = num / den
    grad = (d_num - value * d_den) / den
    return value, grad


class KappaAccumulator:
    """Накопление O, colsum(Y), colsum(P) по шардам; κ по всем шардам сразу."""

    def __init__(self, k: int):
        self.k = k
        self.observed = np.zeros((k, k))
        self.y_marginal = np.zeros(k)
        self.p_marginal = np.zeros(k)

    def add(self, Y, P) -> "KappaAccumulator":
        Y, P = _check_pair(Y, P)
        if Y.shape[1] != self.k:
            raise ShapeError(f"Шард с k = {Y.shape[1]}, ожидалось {self.k}")
        self.observed += Y.T @ P
        self.y_marginal += Y.sum(axis=0)
        self.p_marginal += P.sum(axis=0)
        return self

    def merge(self, other: "KappaAccumulator") -> "KappaAccumulator":
        self.observed += other.observed
        self.y_marginal += other.y_marginal
        self.p_marginal += other.p_marginal
        return self

    def kappa(self, W) -> float:
        total = self.observed.sum()
        if total <= 0:
            raise DomainError("Нет накопленных примеров")
        Wm = _as_matrix(W)
        expected = np.outer(self.y_marginal, self.p_marginal) / total
        return kappa_from_terms(float(np.sum(Wm * self.observed)), float(np.sum(Wm * expected)))
