import os
import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

# keep test runs out of the developer's run history
os.environ.setdefault("OLAF_DATABASE_URL", "sqlite://")

from core.parser import parse_program  # noqa: E402
from surface.desugar import desugar_source  # noqa: E402


@pytest.fixture
def corpus_dir() -> Path:
    return ROOT / "corpus"


@pytest.fixture
def load_core(corpus_dir):
    def load(name):
        return parse_program((corpus_dir / name).read_text())
    return load


@pytest.fixture
def load_surface(corpus_dir):
    def load(name):
        return desugar_source((corpus_dir / name).read_text())
    return load


@pytest.fixture
def expected_tokens(corpus_dir):
    def load(name):
        return [line.strip() for line in (corpus_dir / name).read_text().splitlines() if line.strip()]
    return load
