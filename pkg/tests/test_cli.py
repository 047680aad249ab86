import json
import subprocess
import sys

import pytest

from convsql import import_records
from conftest import CONVERSATIONS_PATH, TABLES_PATH


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "convsql.cli", *args],
        capture_output=True, text=True, timeout=300,
    )


def test_stats_fixture(tmp_path):
    out = tmp_path / "stats.json"
    result = run_cli("stats", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--out", str(out))
    assert result.returncode == 0, result.stderr
    report = json.loads(out.read_text())
    assert report["interactions"] == 7
    assert report["questions"] == 20
    assert report["parse_failures"] == 0
    assert report["mean_turns"] == pytest.approx(20 / 7)


def test_stats_empty_dataset(tmp_path):
    data = tmp_path / "empty.json"
    data.write_text("[]", encoding="utf-8")
    result = run_cli("stats", "--data", str(data))
    assert result.returncode == 0
    assert "interactions: 0" in result.stdout


def test_stats_unreadable_file_is_io_error(tmp_path):
    result = run_cli("stats", "--data", str(tmp_path / "missing.json"))
    assert result.returncode == 2


def test_malformed_data_is_validation_error(tmp_path):
    data = tmp_path / "bad.json"
    data.write_text("{not json", encoding="utf-8")
    result = run_cli("stats", "--data", str(data))
    assert result.returncode == 1


def test_label_counts_one_record_per_prefix(tmp_path):
    entries = [
        {"database_id": "retail", "interaction": [
            {"utterance": "a", "query": "SELECT name FROM shop"},
            {"utterance": "b", "query": "SELECT sales FROM shop"},
        ]},
        {"database_id": "retail", "interaction": [
            {"utterance": "a", "query": "SELECT name FROM shop"},
            {"utterance": "b", "query": "SELECT name FROM shop WHERE sales > 1"},
            {"utterance": "c", "query": "SELECT count(*) FROM shop"},
        ]},
    ]
    data = tmp_path / "two.json"
    data.write_text(json.dumps(entries), encoding="utf-8")
    out = tmp_path / "records.jsonl"
    result = run_cli("label", "--data", str(data), "--tables", str(TABLES_PATH),
                     "--out", str(out))
    assert result.returncode == 0, result.stderr
    _, records = import_records(str(out))
    assert len(records) == 5
    assert "records: 5" in result.stdout


def test_export_train_writes_records(tmp_path):
    out = tmp_path / "records.jsonl"
    result = run_cli("export-train", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--out", str(out))
    assert result.returncode == 0, result.stderr
    header, records = import_records(str(out))
    assert len(records) == 20
    assert len(header["tsp_taxonomy"]) == 17
    assert len(header["csp_taxonomy"]) == 11


def test_label_deterministic_across_runs(tmp_path):
    out1 = tmp_path / "r1.jsonl"
    out2 = tmp_path / "r2.jsonl"
    for out in (out1, out2):
        result = run_cli("label", "--data", str(CONVERSATIONS_PATH),
                         "--tables", str(TABLES_PATH), "--out", str(out))
        assert result.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_label_workers_equivalence(tmp_path):
    out1 = tmp_path / "w1.jsonl"
    out8 = tmp_path / "w8.jsonl"
    r1 = run_cli("label", "--data", str(CONVERSATIONS_PATH), "--tables", str(TABLES_PATH),
                 "--out", str(out1), "--workers", "1")
    r8 = run_cli("label", "--data", str(CONVERSATIONS_PATH), "--tables", str(TABLES_PATH),
                 "--out", str(out8), "--workers", "8")
    assert r1.returncode == 0 and r8.returncode == 0
    _, records1 = import_records(str(out1))
    _, records8 = import_records(str(out8))
    key = lambda r: (r.conversation_id, r.prefix_length)
    assert sorted(records1, key=key) == sorted(records8, key=key)


def test_label_explain_prints_witnesses():
    result = run_cli("label", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--explain", "0:2")
    assert result.returncode == 0, result.stderr
    assert "where_add_condition" in result.stdout
    assert "added_to_where" in result.stdout
    assert "shop.Sales" in result.stdout


def test_label_skip_reporting(tmp_path):
    entries = [
        {"database_id": "retail", "interaction": [
            {"utterance": "a", "query": "SELECT name FROM shop"},
            {"utterance": "b", "query": "SELECT nonexistent FROM shop"},
        ]},
    ]
    data = tmp_path / "skips.json"
    data.write_text(json.dumps(entries), encoding="utf-8")
    out = tmp_path / "records.jsonl"
    result = run_cli("label", "--data", str(data), "--tables", str(TABLES_PATH),
                     "--out", str(out))
    assert result.returncode == 0
    assert "records: 1" in result.stdout
    assert "skipped: 1" in result.stdout


def test_evaluate_gold_vs_gold(tmp_path):
    pred = tmp_path / "pred.txt"
    blocks = []
    for entry in json.loads(CONVERSATIONS_PATH.read_text()):
        blocks.append("\n".join(t["query"] for t in entry["interaction"]))
    pred.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    out = tmp_path / "report.json"
    result = run_cli("evaluate", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--pred", str(pred), "--out", str(out))
    assert result.returncode == 0, result.stderr
    report = json.loads(out.read_text())
    assert report["qm"] == 1.0
    assert report["im"] == 1.0
    assert "QM: 100.0" in result.stdout


def test_evaluate_missing_interaction_alignment_error(tmp_path):
    pred = tmp_path / "pred.txt"
    blocks = []
    data = json.loads(CONVERSATIONS_PATH.read_text())
    for entry in data[:-1]:
        blocks.append("\n".join(t["query"] for t in entry["interaction"]))
    pred.write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
    result = run_cli("evaluate", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--pred", str(pred))
    assert result.returncode == 1
    assert "6" in result.stderr  # the missing final interaction is named


def test_validate_parse_fixture(tmp_path):
    out = tmp_path / "report.json"
    result = run_cli("validate-parse", "--data", str(CONVERSATIONS_PATH),
                     "--tables", str(TABLES_PATH), "--out", str(out))
    assert result.returncode == 0, result.stderr
    report = json.loads(out.read_text())
    assert report["compared"] == 6
    assert report["agree"] == 6
    assert report["disagreements"] == []
    assert report["anomalies"] == 1
    assert report["parse_failures"] == 0


def test_validate_parse_empty_input(tmp_path):
    data = tmp_path / "empty.json"
    data.write_text("[]", encoding="utf-8")
    result = run_cli("validate-parse", "--data", str(data), "--tables", str(TABLES_PATH))
    assert result.returncode == 0
    assert "queries:            0" in result.stdout


def test_evaluate_policy_flag(tmp_path):
    gold = [{"database_id": "retail", "interaction": [
        {"utterance": "a", "query": "SELECT Name FROM shop WHERE Sales > 100"},
    ]}]
    data = tmp_path / "gold.json"
    data.write_text(json.dumps(gold), encoding="utf-8")
    pred = tmp_path / "pred.txt"
    pred.write_text("SELECT Name FROM shop WHERE Sales > 200\n", encoding="utf-8")
    out = tmp_path / "report.json"
    for policy, expected in (("official", 1.0), ("value-sensitive", 0.0)):
        result = run_cli("evaluate", "--data", str(data), "--tables", str(TABLES_PATH),
                         "--pred", str(pred), "--policy", policy, "--out", str(out))
        assert result.returncode == 0, result.stderr
        assert json.loads(out.read_text())["qm"] == expected


def test_loss_check_passes():
    result = run_cli("loss-check", "--seed", "0")
    assert result.returncode == 0, result.stdout
    assert "PASS" in result.stdout


def test_taxonomy_override(tmp_path):
    # reordering the default taxonomy through the config surface
    from convsql import default_taxonomy

    ops = [{"name": op.name, "clause": op.clause, "kind": op.kind}
           for op in default_taxonomy().ops]
    ops.reverse()
    tax_path = tmp_path / "tax.json"
    tax_path.write_text(json.dumps({"turn_switch": ops}), encoding="utf-8")
    out = tmp_path / "records.jsonl"
    result = run_cli("label", "--data", str(CONVERSATIONS_PATH), "--tables", str(TABLES_PATH),
                     "--out", str(out), "--taxonomy", str(tax_path))
    assert result.returncode == 0, result.stderr
    header, records = import_records(str(out))
    assert header["tsp_taxonomy"][0] == "from_or_setop_change"
    # same labels, reversed bit order
    plain = run_cli("label", "--data", str(CONVERSATIONS_PATH), "--tables", str(TABLES_PATH),
                    "--out", str(tmp_path / "plain.jsonl"))
    assert plain.returncode == 0
    _, base = import_records(str(tmp_path / "plain.jsonl"))
    for rec, ref in zip(records, base):
        assert [tuple(reversed(l.bits)) for l in rec.tsp_labels] == [l.bits for l in ref.tsp_labels]
