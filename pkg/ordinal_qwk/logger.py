from __future__ import annotations
import logging
import threading
from pathlib import Path
from datetime import datetime

LOGGER_NAME = "ordinal_qwk"
_FMT = "[%(asctime)s] %(levelname)s: %(message)s"


class _ThreadFilter(logging.Filter):
    """Пропускает только записи потока, которому принадлежит прогон."""

    def __init__(self, thread_id: int):
        super().__init__()
        self.thread_id = thread_id

    def filter(self, record: logging.LogRecord) -> bool:
        return record.thread == self.thread_id


def get_logger() -> logging.Logger:
    logger = logging.getLogger(LOGGER_NAME)
    logger.setLevel(logging.INFO)
    return logger


def setup_console_logger(verbose: bool = False) -> logging.Logger:
    logger = get_logger()
    if verbose:
        logger.setLevel(logging.DEBUG)

    if any(getattr(h, "_ordinal_console", False) for h in logger.handlers):
        return logger

    sh = logging.StreamHandler()
    sh.setFormatter(logging.Formatter(_FMT))
    sh._ordinal_console = True  # type: ignore[attr-defined]
    logger.addHandler(sh)
    return logger


def attach_run_log(log_dir: Path, prefix: str = "train") -> logging.Handler:
    """Файл лога прогона в log_dir; вернуть handler, чтобы потом снять его через detach_run_log."""
    log_dir.mkdir(parents=True, exist_ok=True)
    logger = get_logger()

    log_file = log_dir / f"{prefix}_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
    fh = logging.FileHandler(log_file, encoding="utf-8")
    fh.setFormatter(logging.Formatter(_FMT))
    fh.addFilter(_ThreadFilter(threading.get_ident()))
    logger.addHandler(fh)

    return fh


def detach_run_log(handler: logging.Handler) -> None:
    get_logger().removeHandler(handler)
    handler.close()
