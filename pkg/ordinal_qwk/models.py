from __future__ import annotations
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from ordinal_qwk.config import (
    DEFAULT_BATCH_SIZE,
    DEFAULT_HIDDEN,
    DEFAULT_MOMENTUM,
    DR_PROPORTIONS,
)
from ordinal_qwk.errors import ConfigError, InputError, LabelError, ShapeError

# Tensor: np.ndarray float64, row-major, без NaN/Inf
Tensor = np.ndarray


class LossKind(str, Enum):
    CROSS_ENTROPY = "cross-entropy"
    FIX_A = "fix-a"
    LEARN_A = "learn-a"
    LEARN_A_SIGM = "learn-a-sigm"
    CHENG = "cheng"
    QWK = "qwk"

    @classmethod
    def parse(cls, token: str) -> "LossKind":
        try:
            return cls(str(token).strip())
        except ValueError:
            allowed = ", ".join(k.value for k in cls)
            raise ConfigError(f"Неизвестная функция потерь '{token}'. Допустимо: {allowed}") from None

    def output_width(self, k: int) -> int:
        return k - 1 if self is LossKind.CHENG else k

    @property
    def output_activation(self) -> str:
        return "sigmoid" if self is LossKind.CHENG else "softmax"

    @property
    def learns_anchor(self) -> bool:
        return self in (LossKind.LEARN_A, LossKind.LEARN_A_SIGM)


class DecodeRule(str, Enum):
    ROUND_SOFT_ARGMAX = "round-soft-argmax"
    ARGMAX = "argmax"
    CHENG_FIRST_ZERO = "cheng-first-zero"
    CONDITIONAL_RISK = "conditional-risk"

    @classmethod
    def parse(cls, token: str) -> "DecodeRule":
        try:
            return cls(str(token).strip())
        except ValueError:
            allowed = ", ".join(r.value for r in cls)
            raise ConfigError(f"Неизвестное правило декодирования '{token}'. Допустимо: {allowed}") from None

    @property
    def column(self) -> str:
        return "val_qwk_" + self.value.replace("-", "_")


class WeightKind(str, Enum):
    QUADRATIC = "quadratic"
    DISCRETE = "discrete"
    LINEAR = "linear"
    CUSTOM = "custom"


@dataclass
class Layer:
    weight: Tensor      # fan_in x fan_out
    bias: Tensor        # fan_out
    activation: str     # relu | softmax | sigmoid | identity

    @property
    def fan_in(self) -> int:
        return int(self.weight.shape[0])

    @property
    def fan_out(self) -> int:
        return int(self.weight.shape[1])


@dataclass
class NetworkParams:
    layers: List[Layer]
    # learnable 'a' для learn-a / learn-a-sigm; None = a фиксирован [0..k-1]
    anchor: Optional[Tensor] = None
    head: str = ""

    def arrays(self) -> List[Tensor]:
        out: List[Tensor] = []
        for layer in self.layers:
            out.append(layer.weight)
            out.append(layer.bias)
        if self.anchor is not None:
            out.append(self.anchor)
        return out

    def with_arrays(self, arrays: List[Tensor]) -> "NetworkParams":
        expected = len(self.arrays())
        if len(arrays) != expected:
            raise ShapeError(f"Ожидалось {expected} массивов параметров, получено {len(arrays)}")
        layers = []
        for i, layer in enumerate(self.layers):
            w, b = arrays[2 * i], arrays[2 * i + 1]
            if w.shape != layer.weight.shape or b.shape != layer.bias.shape:
                raise ShapeError(f"Слой {i}: форма {w.shape}/{b.shape} вместо {layer.weight.shape}/{layer.bias.shape}")
            layers.append(Layer(weight=w, bias=b, activation=layer.activation))
        anchor = None
        if self.anchor is not None:
            anchor = arrays[-1]
            if anchor.shape != self.anchor.shape:
                raise ShapeError(f"Вектор a: форма {anchor.shape} вместо {self.anchor.shape}")
        return NetworkParams(layers=layers, anchor=anchor, head=self.head)

    def zeros_like(self) -> "NetworkParams":
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def copy(self) -> "NetworkParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def flatten(self) -> Tensor:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec: Tensor) -> "NetworkParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size:
            raise ShapeError(f"Длина вектора {vec.size} не совпадает с числом параметров {self.size}")
        out, pos = [], 0
        for a in self.arrays():
            out.append(vec[pos:pos + a.size].reshape(a.shape).copy())
            pos += a.size
        return self.with_arrays(out)

    @property
    def size(self) -> int:
        return int(sum(a.size for a in self.arrays()))

    @property
    def output_width(self) -> int:
        return self.layers[-1].fan_out


@dataclass
class OptimizerState:
    velocity: NetworkParams
    learning_rate: float        # alpha
    momentum: float = DEFAULT_MOMENTUM  # mu


@dataclass
class AnchorVector:
    a: Tensor
    learnable: bool = False

    @classmethod
    def fixed(cls, k: int) -> "AnchorVector":
        return cls(a=np.arange(k, dtype=np.float64), learnable=False)

    @classmethod
    def learnable_init(cls, k: int) -> "AnchorVector":
        return cls(a=np.arange(k, dtype=np.float64), learnable=True)


@dataclass(frozen=True)
class GaussianHeadParams:
    sigma_sq: float = 1.0

    def __post_init__(self):
        if not self.sigma_sq > 0:
            raise ConfigError(f"sigma_sq должна быть > 0, получено {self.sigma_sq}")


@dataclass
class WeightMatrix:
    W: Tensor
    kind: WeightKind

    @property
    def k(self) -> int:
        return int(self.W.shape[0])


@dataclass
class RatingMatrices:
    O: Tensor
    E: Tensor


@dataclass
class Dataset:
    features: Tensor    # n x d
    labels: np.ndarray  # n, int
    k: int

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.k < 2:
            raise ConfigError(f"Число классов k должно быть >= 2, получено {self.k}")
        if self.features.ndim != 2 or self.labels.ndim != 1 or self.features.shape[0] != self.labels.shape[0]:
            raise ShapeError(f"Несогласованные формы: признаки {self.features.shape}, метки {self.labels.shape}")
        if self.labels.size == 0:
            raise InputError("Пустой набор данных (n = 0)")
        if not np.all(np.isfinite(self.features)):
            raise InputError("Признаки содержат NaN/Inf")
        bad = np.flatnonzero((self.labels < 0) | (self.labels >= self.k))
        if bad.size:
            raise LabelError(f"Метка {self.labels[bad[0]]} (строка {bad[0]}) вне диапазона [0, {self.k - 1}]")

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def d(self) -> int:
        return int(self.features.shape[1])

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(features=self.features[idx], labels=self.labels[idx], k=self.k)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)


@dataclass
class GeneratorSpec:
    n: int = 3000
    d: int = 8
    k: int = 5
    seed: int = 0
    class_proportions: Tuple[float, ...] = DR_PROPORTIONS
    latent_noise_sd: float = 1.75
    label_noise_rate: float = 0.05
    # шум по каждому признаку = feature_noise_scale * latent_noise_sd
    feature_noise_scale: float = 0.5


@dataclass
class WarmStart:
    loss: LossKind
    epochs: int


@dataclass
class ExperimentConfig:
    loss: LossKind = LossKind.FIX_A
    data_path: Optional[Path] = None
    generator: GeneratorSpec = field(default_factory=GeneratorSpec)
    val_fraction: float = 0.2
    hidden: Tuple[int, ...] = DEFAULT_HIDDEN
    epochs: int = 60
    batch_size: int = DEFAULT_BATCH_SIZE
    # None = auto (масштабируется от опорного горизонта)
    lr_schedule: Optional[List[Tuple[int, float]]] = None
    momentum: float = DEFAULT_MOMENTUM
    seed: int = 1
    warm_start: Optional[WarmStart] = None
    # None = auto (собственный декодер функции потерь)
    decode_rule: Optional[DecodeRule] = None
    weights: WeightKind = WeightKind.QUADRATIC
    output_dir: Optional[Path] = None

    @property
    def k(self) -> int:
        return self.generator.k


@dataclass
class EpochMetrics:
    epoch: int
    split: str
    loss: str
    learning_rate: float
    train_loss: Optional[float]
    val_cross_entropy: Optional[float]
    val_qwk: float
    # каппа по каждому применимому правилу декодирования
    val_qwk_by_rule: Dict[DecodeRule, float]
    skipped_batches: int
    wall_seconds: float
