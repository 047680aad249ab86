import subprocess
import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
TRAIN_FIXTURE = FIXTURES / "train_fixture.json"
PKG_ROOT = Path(__file__).resolve().parents[2]
TABLES = PKG_ROOT / "tests" / "fixtures" / "tables.json"


@pytest.fixture(scope="session")
def record_file(tmp_path_factory) -> str:
    """Fixture records produced through the labeling toolkit's CLI surface."""
    out = tmp_path_factory.mktemp("records") / "train_records.jsonl"
    result = subprocess.run(
        [sys.executable, "-m", "convsql.cli", "export-train",
         "--data", str(TRAIN_FIXTURE), "--tables", str(TABLES), "--out", str(out)],
        capture_output=True, text=True, timeout=300,
    )
    assert result.returncode == 0, result.stderr
    return str(out)


@pytest.fixture(scope="session")
def corpus_data(record_file):
    from convsql_trainer import read_records

    header, records = read_records(record_file)
    return header, records
