from __future__ import annotations
from pathlib import Path

APP_NAME = "Ordinal QWK"

PACKAGE_DIR = Path(__file__).resolve().parent
ASSETS_DIR = PACKAGE_DIR / "assets"

PRESETS_JSON = ASSETS_DIR / "presets.json"


# Папка для прогонов по умолчанию (создаётся при первом запуске)
def default_output_dir() -> Path:
    preferred = Path.home() / "ordinal_qwk_runs"
    try:
        preferred.mkdir(parents=True, exist_ok=True)
        return preferred
    except OSError:
        fallback = PACKAGE_DIR.parent / "runs"
        fallback.mkdir(parents=True, exist_ok=True)
        return fallback


# Размеры классов DR (0..4) в обучающей выборке из 35126 снимков
DR_CLASS_COUNTS = (25810, 2443, 5292, 873, 708)
DR_PROPORTIONS = tuple(c / sum(DR_CLASS_COUNTS) for c in DR_CLASS_COUNTS)

# Численные константы
CLAMP_EPS = 1e-12
STOCHASTIC_TOL = 1e-6
FD_EPS = 1e-5
HIST_BINS = 20

# Опорный горизонт расписания: точки переключения заданы на 250 эпох
REFERENCE_EPOCHS = 250
REFERENCE_FINAL_DROP = 200
REFERENCE_WARM_START = 150

DEFAULT_HIDDEN = (32,)
DEFAULT_BATCH_SIZE = 128
DEFAULT_MOMENTUM = 0.9
DEFAULT_RUNS = 2

LOSS_TOKENS = ["cross-entropy", "fix-a", "learn-a", "learn-a-sigm", "cheng", "qwk"]
DECODE_TOKENS = ["round-soft-argmax", "argmax", "cheng-first-zero", "conditional-risk"]
CLI_WEIGHT_KINDS = ["quadratic", "discrete"]
