import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

ROOT = Path(__file__).resolve().parent.parent
TEMPLATES_DIR = ROOT / "templates"
CORPUS_DIR = ROOT / "corpus"


def _int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(raw.replace("_", ""))
    except ValueError:
        raise ValueError(f"{name} must be an integer, got {raw!r}") from None


FUEL = _int("OLAF_FUEL", 10_000_000)
LOG_LEVEL = os.getenv("OLAF_LOG_LEVEL", "WARNING").upper()
DATABASE_URL = os.getenv("OLAF_DATABASE_URL", "sqlite:///./olaf_runs.db")
RECURSION_LIMIT = _int("OLAF_RECURSION_LIMIT", 20_000)
BENCH_REPETITIONS = _int("OLAF_BENCH_REPETITIONS", 30)
