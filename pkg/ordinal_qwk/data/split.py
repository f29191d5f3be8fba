from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from ordinal_qwk.errors import ConfigError, SplitError
from ordinal_qwk.models import Dataset

log = logging.getLogger(__name__)


def split(dataset: Dataset, val_fraction: float, seed: int) -> Tuple[Dataset, Dataset]:
    """Стратифицированное разбиение на train/val; порядок строк исходный."""
    if not 0.0 < val_fraction < 1.0:
        raise ConfigError(f"val_fraction должно лежать в (0, 1), получено {val_fraction}")

    rng = np.random.default_rng(seed)
    val_idx = []
    for c in range(dataset.k):
        members = np.flatnonzero(dataset.labels == c)
        if members.size == 0:
            continue
        if members.size < 2:
            raise SplitError(f"В классе {c} всего {members.size} пример(ов): нужно минимум 2 для разбиения")
        n_val = int(np.floor(val_fraction * members.size + 0.5))
        n_val = min(max(n_val, 1), members.size - 1)
        val_idx.append(rng.permutation(members)[:n_val])

    is_val = np.zeros(dataset.n, dtype=bool)
    is_val[np.concatenate(val_idx)] = True
    train, val = dataset.subset(np.flatnonzero(~is_val)), dataset.subset(np.flatnonzero(is_val))
    log.info("Разбиение: train=%d, val=%d (seed=%d)", train.n, val.n, seed)
    return train, val


def standardize(train: Dataset, val: Dataset) -> Tuple[Dataset, Dataset]:
    """Нулевое среднее и единичная дисперсия по статистикам train."""
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return (
        Dataset(features=(train.features - mean) / std, labels=train.labels, k=train.k),
        Dataset(features=(val.features - mean) / std, labels=val.labels, k=val.k),
    )
