"""
Синтетический порядковый набор данных.

Латентная оценка t = c + N(0, latent_noise_sd²) отображается фиксированным
случайным линейным отображением в d признаков плюс шум по каждому признаку.
Размеры классов задаются долями (метод наибольшего остатка), затем часть
меток сдвигается на соседний класс с вероятностью label_noise_rate.
"""
from __future__ import annotations

import logging

import numpy as np

from ordinal_qwk.errors import ConfigError, GenerationError
from ordinal_qwk.models import Dataset, GeneratorSpec

log = logging.getLogger(__name__)


def validate_spec(spec: GeneratorSpec) -> None:
    if spec.n <= 0 or spec.d <= 0:
        raise ConfigError(f"n и d должны быть > 0 (n={spec.n}, d={spec.d})")
    if spec.k < 2:
        raise ConfigError(f"k должно быть >= 2, получено {spec.k}")
    p = np.asarray(spec.class_proportions, dtype=np.float64)
    if p.shape != (spec.k,):
        raise ConfigError(f"Долей классов {p.size}, а k = {spec.k}")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ConfigError(f"Доли классов должны быть неотрицательны и в сумме давать 1 (сумма {p.sum()})")
    if not spec.latent_noise_sd > 0:
        raise ConfigError(f"latent_noise_sd должно быть > 0, получено {spec.latent_noise_sd}")
    if not 0.0 <= spec.label_noise_rate < 1.0:
        raise ConfigError(f"label_noise_rate должно лежать в [0, 1), получено {spec.label_noise_rate}")
    if spec.feature_noise_scale < 0:
        raise ConfigError(f"feature_noise_scale не может быть отрицательным: {spec.feature_noise_scale}")


def largest_remainder_counts(n: int, proportions) -> np.ndarray:
    p = np.asarray(proportions, dtype=np.float64)
    exact = n * p
    counts = np.floor(exact).astype(np.int64)
    remainder = int(n - counts.sum())
    # при равных остатках выигрывает меньший класс
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:remainder]] += 1
    return counts


def _adjacent_shift(labels: np.ndarray, k: int, flip: np.ndarray, step: np.ndarray) -> np.ndarray:
    shifted = labels + step
    shifted = np.where(shifted < 0, 1, shifted)
    shifted = np.where(shifted > k - 1, k - 2, shifted)
    return np.where(flip, shifted, labels)


def generate(spec: GeneratorSpec) -> Dataset:
    validate_spec(spec)
    rng = np.random.default_rng(spec.seed)

    counts = largest_remainder_counts(spec.n, spec.class_proportions)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise GenerationError(
            f"Класс {empty[0]} получает 0 примеров при n={spec.n}; увеличьте n или долю класса"
        )

    labels = rng.permutation(np.repeat(np.arange(spec.k), counts))
    latent = labels + rng.normal(0.0, spec.latent_noise_sd, size=spec.n)

    direction = rng.normal(size=spec.d)
    direction /= np.linalg.norm(direction)
    offset = rng.normal(size=spec.d)
    feature_sd = spec.feature_noise_scale * spec.latent_noise_sd
    features = np.outer(latent, direction) + offset + rng.normal(0.0, 1.0, size=(spec.n, spec.d)) * feature_sd

    flip = rng.random(spec.n) < spec.label_noise_rate
    step = rng.choice(np.array([-1, 1]), size=spec.n)
    noisy = _adjacent_shift(labels, spec.k, flip, step)

    log.info(
        "Сгенерировано n=%d, d=%d, k=%d (seed=%d), классы %s, сдвинуто меток: %d",
        spec.n, spec.d, spec.k, spec.seed, counts.tolist(), int(np.count_nonzero(noisy != labels)),
    )
    return Dataset(features=features, labels=noisy, k=spec.k)
