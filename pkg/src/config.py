import os
from dataclasses import dataclass
from typing import Optional

import dotenv

# Load environment variables
dotenv.load_dotenv()

# Fixed so that runs are reproducible without passing --seed
DEFAULT_SEED = 20240521
DEFAULT_MC_SAMPLES = 1_000_000
MC_CHUNK_SIZE = 100_000

# (lo, hi, count) in units of sigma
DEFAULT_LEVEL_GRID = (-3.0, 5.0, 101)

# phi(x) < 1e-31 beyond 12 standard deviations
OUTER_TAIL_WIDTH = 12.0

JITTER_CAP = 1e-10

OUTPUT_DIR_ENV = "CREST_OUTPUT_DIR"
THREADS_ENV = "CREST_THREADS"
LOG_LEVEL_ENV = "CREST_LOG_LEVEL"


@dataclass(frozen=True)
class Settings:
    output_dir: Optional[str]
    threads: int
    log_level: str
    seed: int = DEFAULT_SEED
    mc_samples: int = DEFAULT_MC_SAMPLES
    chunk_size: int = MC_CHUNK_SIZE


def get_settings():
    """
    Reads the environment on every call (after .env has been loaded once),
    so overrides set at runtime are picked up.
    """
    threads_raw = os.getenv(THREADS_ENV)
    try:
        threads = int(threads_raw) if threads_raw else (os.cpu_count() or 1)
    except ValueError:
        threads = os.cpu_count() or 1

    return Settings(
        output_dir=os.getenv(OUTPUT_DIR_ENV) or None,
        threads=max(1, threads),
        log_level=(os.getenv(LOG_LEVEL_ENV) or "WARNING").upper(),
    )


def resolve_output_path(path):
    """Relative output paths land in CREST_OUTPUT_DIR when it is set."""
    if path is None:
        return None
    settings = get_settings()
    if settings.output_dir and not os.path.isabs(path):
        os.makedirs(settings.output_dir, exist_ok=True)
        return os.path.join(settings.output_dir, path)
    return path
