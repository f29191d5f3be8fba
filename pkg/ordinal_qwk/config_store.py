from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple

from ordinal_qwk.config import (
    DR_PROPORTIONS,
    REFERENCE_EPOCHS,
    REFERENCE_FINAL_DROP,
    REFERENCE_WARM_START,
)
from ordinal_qwk.decode import check_rule_for_head, default_rule
from ordinal_qwk.errors import ConfigError
from ordinal_qwk.models import (
    DecodeRule,
    ExperimentConfig,
    GeneratorSpec,
    LossKind,
    WarmStart,
    WeightKind,
)

CONFIG_KEYS = [
    "loss", "data_path", "n", "d", "k", "data_seed", "proportions",
    "latent_noise_sd", "label_noise_rate", "val_fraction", "hidden", "epochs",
    "batch_size", "lr_schedule", "momentum", "seed", "warm_start",
    "decode_rule", "weights", "output_dir",
]

DEFAULT_VALUES: Dict[str, str] = {
    "loss": "fix-a",
    "data_path": "",
    "n": "3000",
    "d": "8",
    "k": "5",
    "data_seed": "0",
    "proportions": "auto",
    "latent_noise_sd": "1.75",
    "label_noise_rate": "0.05",
    "val_fraction": "0.2",
    "hidden": "32",
    "epochs": "60",
    "batch_size": "128",
    "lr_schedule": "auto",
    "momentum": "0.9",
    "seed": "1",
    "warm_start": "auto",
    "decode_rule": "auto",
    "weights": "quadratic",
    "output_dir": "",
}


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    """Плоский формат `key = value`, строки с `#` пропускаются."""
    values: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}, строка {lineno}: ожидается 'ключ = значение', получено '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}, строка {lineno}: неизвестный ключ '{key}'")
        if key in values:
            raise ConfigError(f"{source}, строка {lineno}: ключ '{key}' задан повторно")
        values[key] = value
    return values


def _int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"'{key}': ожидается целое число, получено '{value}'") from None


def _float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"'{key}': ожидается число, получено '{value}'") from None


def _float_list(key: str, value: str) -> Tuple[float, ...]:
    return tuple(_float(key, part) for part in value.split(",") if part.strip())


def parse_schedule(value: str) -> Optional[List[Tuple[int, float]]]:
    if value.strip().lower() == "auto":
        return None
    schedule = []
    for part in value.split(","):
        if ":" not in part:
            raise ConfigError(f"'lr_schedule': элемент '{part.strip()}' должен иметь вид эпоха:alpha")
        epoch, alpha = part.split(":", 1)
        schedule.append((_int("lr_schedule", epoch.strip()), _float("lr_schedule", alpha.strip())))
    return schedule


def _scaled_warm_epochs(epochs: int) -> int:
    return _round_half_up(REFERENCE_WARM_START * epochs / REFERENCE_EPOCHS)


def auto_warm_start(loss: LossKind, epochs: int) -> Optional[WarmStart]:
    """learn-a-sigm сначала учится на кросс-энтропии, остальные без тёплого старта.

    При a = [0..k−1] прогноз (k−1)σ(aᵀf) в начале не меньше (k−1)/2, и без
    разогрева softmax-слой насыщается на классе 0.
    """
    if loss is not LossKind.LEARN_A_SIGM:
        return None
    warm_epochs = min(_scaled_warm_epochs(epochs), epochs - 1)
    if warm_epochs <= 0:
        return None
    return WarmStart(loss=LossKind.CROSS_ENTROPY, epochs=warm_epochs)


def _parse_warm_start(value: str, loss: LossKind, epochs: int) -> Optional[WarmStart]:
    token = value.strip().lower()
    if token in ("", "none"):
        return None
    if token == "auto":
        return auto_warm_start(loss, epochs)
    if ":" not in value:
        raise ConfigError(f"'warm_start': ожидается функция_потерь:эпохи, auto или none, получено '{value}'")
    warm_loss, count = (p.strip() for p in value.split(":", 1))
    if count.lower() == "auto":
        warm_epochs = _scaled_warm_epochs(epochs)
    else:
        warm_epochs = _int("warm_start", count)
    return WarmStart(loss=LossKind.parse(warm_loss), epochs=warm_epochs)


def build_config(values: Mapping[str, str]) -> ExperimentConfig:
    merged = dict(DEFAULT_VALUES)
    merged.update(values)
    unknown = sorted(set(merged) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"Неизвестные ключи конфигурации: {unknown}")

    k = _int("k", merged["k"])
    epochs = _int("epochs", merged["epochs"])
    loss = LossKind.parse(merged["loss"])
    if merged["proportions"].strip().lower() == "auto":
        proportions = tuple(DR_PROPORTIONS) if k == len(DR_PROPORTIONS) else tuple([1.0 / k] * k)
    else:
        proportions = _float_list("proportions", merged["proportions"])

    generator = GeneratorSpec(
        n=_int("n", merged["n"]),
        d=_int("d", merged["d"]),
        k=k,
        seed=_int("data_seed", merged["data_seed"]),
        class_proportions=proportions,
        latent_noise_sd=_float("latent_noise_sd", merged["latent_noise_sd"]),
        label_noise_rate=_float("label_noise_rate", merged["label_noise_rate"]),
    )
    hidden = tuple(_int("hidden", p.strip()) for p in merged["hidden"].split(",") if p.strip())
    decode = merged["decode_rule"].strip()
    weights = merged["weights"].strip()
    if weights not in (WeightKind.QUADRATIC.value, WeightKind.DISCRETE.value):
        raise ConfigError(f"'weights': допустимо quadratic или discrete, получено '{weights}'")

    cfg = ExperimentConfig(
        loss=loss,
        data_path=Path(merged["data_path"]).expanduser() if merged["data_path"].strip() else None,
        generator=generator,
        val_fraction=_float("val_fraction", merged["val_fraction"]),
        hidden=hidden,
        epochs=epochs,
        batch_size=_int("batch_size", merged["batch_size"]),
        lr_schedule=parse_schedule(merged["lr_schedule"]),
        momentum=_float("momentum", merged["momentum"]),
        seed=_int("seed", merged["seed"]),
        warm_start=_parse_warm_start(merged["warm_start"], loss, epochs),
        decode_rule=None if decode.lower() == "auto" else DecodeRule.parse(decode),
        weights=WeightKind(weights),
        output_dir=Path(merged["output_dir"]).expanduser() if merged["output_dir"].strip() else None,
    )
    validate_config(cfg)
    return cfg


def resolve_schedule(cfg: ExperimentConfig) -> List[Tuple[int, float]]:
    """Явное расписание или auto: 0.01, затем 0.001 с масштабированной 200-й эпохи.

    Расписания fix 'a' со стартом 0.1 заданы пресетами fix-a-run1/fix-a-run2.
    """
    if cfg.lr_schedule is not None:
        return list(cfg.lr_schedule)
    points: Dict[int, float] = {0: 0.01}
    # при малом числе эпох точка спада может совпасть с 0: побеждает более поздняя ступень
    points[_round_half_up(REFERENCE_FINAL_DROP * cfg.epochs / REFERENCE_EPOCHS)] = 0.001
    return sorted(points.items())


def resolve_decode_rule(cfg: ExperimentConfig) -> DecodeRule:
    return cfg.decode_rule if cfg.decode_rule is not None else default_rule(cfg.loss)


def learning_rate_at(schedule: List[Tuple[int, float]], epoch_index: int) -> float:
    alpha = schedule[0][1]
    for start, value in schedule:
        if start <= epoch_index:
            alpha = value
    return alpha


def validate_config(cfg: ExperimentConfig) -> None:
    if cfg.epochs < 0:
        raise ConfigError(f"'epochs' не может быть отрицательным: {cfg.epochs}")
    if cfg.batch_size < 1:
        raise ConfigError(f"'batch_size' должен быть >= 1, получено {cfg.batch_size}")
    if not 0.0 <= cfg.momentum < 1.0:
        raise ConfigError(f"'momentum' должен лежать в [0, 1), получено {cfg.momentum}")
    if any(h <= 0 for h in cfg.hidden):
        raise ConfigError(f"'hidden': ширины слоёв должны быть > 0, получено {cfg.hidden}")
    if cfg.k < 2:
        raise ConfigError(f"'k' должно быть >= 2, получено {cfg.k}")

    schedule = resolve_schedule(cfg)
    if not schedule or schedule[0][0] != 0:
        raise ConfigError("'lr_schedule' должно начинаться с эпохи 0")
    starts = [s for s, _ in schedule]
    if any(b <= a for a, b in zip(starts, starts[1:])):
        raise ConfigError(f"'lr_schedule': эпохи должны строго возрастать, получено {starts}")
    if any(not alpha > 0 for _, alpha in schedule):
        raise ConfigError("'lr_schedule': все значения alpha должны быть > 0")

    if cfg.warm_start is not None:
        ws = cfg.warm_start
        if not 0 <= ws.epochs < cfg.epochs:
            raise ConfigError(f"'warm_start': эпох тёплого старта ({ws.epochs}) должно быть меньше 'epochs' ({cfg.epochs})")
        same_width = ws.loss.output_width(cfg.k) == cfg.loss.output_width(cfg.k)
        if not same_width or ws.loss.output_activation != cfg.loss.output_activation:
            raise ConfigError(
                f"'warm_start': голова '{ws.loss.value}' несовместима с головой '{cfg.loss.value}' "
                f"(ширина/активация выхода различаются)"
            )

    check_rule_for_head(resolve_decode_rule(cfg), cfg.loss)


def config_to_values(cfg: ExperimentConfig) -> Dict[str, str]:
    """Полностью разрешённая конфигурация (auto раскрыто) в виде строк."""
    g = cfg.generator
    ws = cfg.warm_start
    return {
        "loss": cfg.loss.value,
        "data_path": str(cfg.data_path) if cfg.data_path else "",
        "n": str(g.n),
        "d": str(g.d),
        "k": str(g.k),
        "data_seed": str(g.seed),
        "proportions": ",".join(repr(float(p)) for p in g.class_proportions),
        "latent_noise_sd": repr(float(g.latent_noise_sd)),
        "label_noise_rate": repr(float(g.label_noise_rate)),
        "val_fraction": repr(float(cfg.val_fraction)),
        "hidden": ",".join(str(h) for h in cfg.hidden),
        "epochs": str(cfg.epochs),
        "batch_size": str(cfg.batch_size),
        "lr_schedule": ",".join(f"{s}:{a!r}" for s, a in resolve_schedule(cfg)),
        "momentum": repr(float(cfg.momentum)),
        "seed": str(cfg.seed),
        "warm_start": f"{ws.loss.value}:{ws.epochs}" if ws else "none",
        "decode_rule": resolve_decode_rule(cfg).value,
        "weights": cfg.weights.value,
        "output_dir": str(cfg.output_dir) if cfg.output_dir else "",
    }


def config_to_text(cfg: ExperimentConfig) -> str:
    return "".join(f"{key} = {value}\n" for key, value in config_to_values(cfg).items())


def load_config(
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, str]] = None,
    preset: Optional[Mapping[str, str]] = None,
) -> ExperimentConfig:
    """Порядок приоритета: умолчания < пресет < файл < флаги командной строки."""
    values: Dict[str, str] = dict(preset or {})
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Не найден файл конфигурации: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    for key, value in (overrides or {}).items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Неизвестный ключ конфигурации '{key}'")
        values[key] = value
    return build_config(values)


def with_overrides(cfg: ExperimentConfig, **changes) -> ExperimentConfig:
    """Копия конфигурации с заменой полей и повторной проверкой."""
    out = replace(cfg, **changes)
    validate_config(out)
    return out


class PresetStore:
    def __init__(self, json_path: Path):
        self.json_path = json_path
        self._presets: Dict[str, Dict[str, str]] = {}
        self._descriptions: Dict[str, str] = {}

    def load(self) -> List[str]:
        if not self.json_path.exists():
            raise FileNotFoundError(f"Не найден файл пресетов: {self.json_path}")

        try:
            data = json.loads(self.json_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ValueError(f"Некорректный JSON в {self.json_path}: {e}") from e

        if not isinstance(data, dict):
            raise ValueError(f"Файл {self.json_path} должен содержать JSON-объект верхнего уровня.")

        presets = data.get("presets", [])
        if not isinstance(presets, list):
            raise ValueError(f"Поле 'presets' в {self.json_path} должно быть списком.")

        self._presets.clear()
        self._descriptions.clear()

        for idx, row in enumerate(presets):
            if not isinstance(row, dict):
                raise ValueError(f"Элемент presets[{idx}] должен быть объектом (dict).")
            who = row.get("id", f"№{idx + 1}")
            if "id" not in row or not isinstance(row.get("values"), dict):
                raise ValueError(f"В пресете {who} отсутствуют ключи 'id'/'values'")

            unknown = [key for key in row["values"] if key not in CONFIG_KEYS]
            if unknown:
                raise ValueError(f"В пресете {who} неизвестные ключи: {unknown}")

            self._presets[str(row["id"])] = {str(k): str(v) for k, v in row["values"].items()}
            self._descriptions[str(row["id"])] = str(row.get("description", ""))

        return list(self._presets)

    def get(self, preset_id: str) -> Dict[str, str]:
        if preset_id not in self._presets:
            raise KeyError(f"Пресет '{preset_id}' не найден. Доступны: {', '.join(self._presets)}")
        return dict(self._presets[preset_id])

    def describe(self, preset_id: str) -> str:
        self.get(preset_id)
        return self._descriptions[preset_id]
