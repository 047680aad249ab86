import json
import os
from pathlib import Path

import pytest

from convsql import load_schemas

FIXTURES = Path(__file__).parent / "fixtures"

TABLES_PATH = FIXTURES / "tables.json"
CONVERSATIONS_PATH = FIXTURES / "conversations.json"


@pytest.fixture(scope="session")
def schemas():
    return load_schemas(str(TABLES_PATH))


@pytest.fixture(scope="session")
def retail(schemas):
    return schemas["retail"]


@pytest.fixture(scope="session")
def concerts(schemas):
    return schemas["concerts"]


@pytest.fixture(scope="session")
def sales_db(schemas):
    return schemas["sales_db"]


@pytest.fixture()
def tables_path():
    return str(TABLES_PATH)


@pytest.fixture()
def conversations_path():
    return str(CONVERSATIONS_PATH)


def sparc_dir() -> str | None:
    """Directory holding the real dataset (train.json / dev.json / tables.json),
    when the environment provides one."""
    path = os.environ.get("SPARC_DATA_DIR")
    if path and os.path.isdir(path):
        return path
    return None


needs_sparc = pytest.mark.skipif(
    sparc_dir() is None,
    reason="real dataset not available (set SPARC_DATA_DIR to run)",
)


# ---------------------------------------------------------------------------
# Evaluation fixture: 10 interactions of mixed correctness.  Each entry is
# (db_id, [(gold_sql, predicted_sql_or_None), ...]); None means the
# prediction line is deliberate garbage.

EVAL_FIXTURE = [
    ("retail", [
        ("SELECT Name FROM shop", "SELECT Name FROM shop"),
        ("SELECT Name FROM shop WHERE Sales > 100",
         "SELECT Name FROM shop WHERE Sales > 100"),
    ]),
    ("retail", [
        ("SELECT Name , Sales FROM shop", "SELECT Sales , Name FROM shop"),
        ("SELECT count(*) FROM shop", "SELECT count(*) FROM shop"),
    ]),
    ("retail", [
        ("SELECT Name FROM shop WHERE Sales > 100",
         "SELECT Name FROM shop WHERE Sales > 200"),
        ("SELECT Name FROM shop WHERE Sales > 100 ORDER BY Sales DESC",
         "SELECT Name FROM shop WHERE Sales > 100"),
    ]),
    ("concerts", [
        ("SELECT Name FROM singer", "SELECT Country FROM singer"),
        ("SELECT Name FROM singer ORDER BY Age DESC LIMIT 5",
         "SELECT Name FROM singer ORDER BY Age DESC LIMIT 3"),
        ("SELECT count(*) FROM concert", "SELECT count(*) FROM concert"),
    ]),
    ("retail", [
        ("SELECT DISTINCT Name FROM shop", "SELECT Name FROM shop"),
    ]),
    ("concerts", [
        ("SELECT Year , count(*) FROM concert GROUP BY Year",
         "SELECT Year , count(*) FROM concert GROUP BY Year"),
        ("SELECT Year , count(*) FROM concert GROUP BY Year HAVING count(*) > 1",
         "SELECT Year , count(*) FROM concert GROUP BY Year"),
    ]),
    ("retail", [
        ("SELECT Name FROM shop", "SELECT Name FROM shop"),
        ("SELECT T1.Name FROM shop AS T1 JOIN city AS T2 ON T1.City_Id = T2.Id",
         "SELECT Name FROM shop"),
    ]),
    ("concerts", [
        ("SELECT Name FROM singer WHERE Country = 'France' OR Age > 50",
         "SELECT Name FROM singer WHERE Age > 50 OR Country = 'France'"),
    ]),
    ("retail", [
        ("SELECT Name FROM shop WHERE Sales BETWEEN 10 AND 20", None),
        ("SELECT avg(Sales) FROM shop", "SELECT sum(Sales) FROM shop"),
    ]),
    ("retail", [
        ("SELECT T1.City_Id FROM shop AS T1 JOIN city AS T2 ON T1.City_Id = T2.Id",
         "SELECT T2.Id FROM shop AS T1 JOIN city AS T2 ON T1.City_Id = T2.Id"),
        ("SELECT count(*) FROM shop", "SELECT count(*) FROM shop"),
    ]),
]

GARBAGE_PREDICTION = "this is ; not % sql at all"


def write_eval_fixture(tmp_path: Path) -> tuple[str, str]:
    """Materialize the fixture as (gold dataset path, predictions path)."""
    gold_entries = []
    pred_lines: list[str] = []
    for db_id, turns in EVAL_FIXTURE:
        gold_entries.append({
            "database_id": db_id,
            "interaction": [
                {"utterance": f"turn {i + 1}", "query": gold}
                for i, (gold, _) in enumerate(turns)
            ],
            "final": {"utterance": "final", "query": turns[-1][0]},
        })
        for _, pred in turns:
            pred_lines.append(pred if pred is not None else GARBAGE_PREDICTION)
        pred_lines.append("")
    gold_path = tmp_path / "eval_gold.json"
    pred_path = tmp_path / "eval_pred.txt"
    gold_path.write_text(json.dumps(gold_entries, indent=1), encoding="utf-8")
    pred_path.write_text("\n".join(pred_lines), encoding="utf-8")
    return str(gold_path), str(pred_path)


@pytest.fixture()
def eval_fixture(tmp_path):
    return write_eval_fixture(tmp_path)
