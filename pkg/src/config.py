import os
import logging
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

DEFAULT_DATA_DIR = "data"
DEFAULT_LOG_LEVEL = "INFO"


def get_threads() -> int:
    """Worker-thread cap for signal generation and feature extraction (PQ_OSELM_THREADS)."""
    raw = os.getenv("PQ_OSELM_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer PQ_OSELM_THREADS={raw!r}, using 1 thread")
        return 1
    if threads < 1:
        logger.warning(f"Ignoring non-positive PQ_OSELM_THREADS={raw!r}, using 1 thread")
        return 1
    return threads


def get_data_dir() -> Path:
    """Root directory for default artifact locations (PQ_OSELM_DATA_DIR)."""
    return Path(os.getenv("PQ_OSELM_DATA_DIR", DEFAULT_DATA_DIR))


def get_log_level() -> str:
    level = os.getenv("PQ_OSELM_LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    if not isinstance(logging.getLevelName(level), int):
        return DEFAULT_LOG_LEVEL
    return level
