"""Command-line surface: stats, label, export-train, evaluate,
validate-parse, loss-check.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import crosscheck, lossmath
from .dataset import RawInteraction, SkipReport, bind_conversation, load_interactions
from .errors import AlignmentError, ConvSqlError
from .evaluate import evaluate
from .parser import parse_sql
from .records import (
    RecordConfig,
    build_conversation_records,
    export_records,
)
from .schema import load_schemas
from .schemadiff import diff_schema_usage_explain
from .taxonomy import (
    COLUMN_CHANGE_SIZE,
    TURN_SWITCH_SIZE,
    build_taxonomy,
    default_column_taxonomy,
    default_taxonomy,
)
from .turndiff import diff_turn_explain

log = logging.getLogger("convsql")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2


def _record_config(args) -> RecordConfig:
    tsp_tax = default_taxonomy()
    csp_tax = default_column_taxonomy()
    if getattr(args, "taxonomy", None):
        with open(args.taxonomy, encoding="utf-8") as handle:
            spec = json.load(handle)
        if "turn_switch" in spec:
            tsp_tax = load_taxonomy_entries(spec["turn_switch"], TURN_SWITCH_SIZE)
        if "column_change" in spec:
            csp_tax = load_taxonomy_entries(spec["column_change"], COLUMN_CHANGE_SIZE)
    return RecordConfig(
        turn_separator=args.turn_separator,
        column_separator=args.column_separator,
        max_length=args.max_length,
        tsp_taxonomy=tsp_tax,
        csp_taxonomy=csp_tax,
    )


def load_taxonomy_entries(entries, expected_size):
    return build_taxonomy([(e["name"], e["clause"], e["kind"]) for e in entries], expected_size)


# ---------------------------------------------------------------------------
# stats


def cmd_stats(args) -> int:
    start = time.monotonic()
    raws = load_interactions(args.data)
    schemas = load_schemas(args.tables) if args.tables else None
    turn_counts = [len(r.turns) for r in raws]
    histogram = Counter(turn_counts)
    parse_failures = 0
    queries = 0
    if schemas is not None:
        for raw in raws:
            schema = schemas.get(raw.db_id)
            for turn in raw.turns:
                queries += 1
                if schema is None:
                    parse_failures += 1
                    continue
                try:
                    parse_sql(turn.query, schema)
                except ConvSqlError:
                    parse_failures += 1
    report = {
        "interactions": len(raws),
        "questions": sum(turn_counts),
        "mean_turns": (sum(turn_counts) / len(raws)) if raws else 0.0,
        "turn_histogram": {str(k): v for k, v in sorted(histogram.items())},
        "parse_failures": parse_failures if schemas is not None else None,
        "elapsed_seconds": round(time.monotonic() - start, 3),
    }
    print(f"interactions: {report['interactions']}")
    print(f"questions:    {report['questions']}")
    print(f"mean turns:   {report['mean_turns']:.4f}" if raws else "mean turns:   n/a")
    print("turn histogram: " + ", ".join(f"{k}: {v}" for k, v in sorted(histogram.items())))
    if schemas is not None:
        print(f"parse failures: {parse_failures} / {queries}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)
    return EXIT_OK


# ---------------------------------------------------------------------------
# label / export-train


_WORKER: dict = {}


def _worker_init(tables_path: str, config: RecordConfig) -> None:
    _WORKER[""] = (load_schemas(tables_path), config)


def _label_one(raw: RawInteraction):
    schemas, config = _WORKER[""]
    schema = schemas.get(raw.db_id)
    if schema is None:
        return [], [SkipReport(raw.id, t + 1, f"unknown database {raw.db_id!r}")
                    for t in range(len(raw.turns))]
    conv, skips = bind_conversation(raw, schema)
    if conv is None:
        return [], skips
    try:
        records = build_conversation_records(conv, schema, config)
    except ConvSqlError as exc:
        return [], skips + [SkipReport(raw.id, 0, str(exc))]
    return records, skips


def _label_all(args, config: RecordConfig):
    raws = load_interactions(args.data)
    if args.workers > 1:
        with ProcessPoolExecutor(
            max_workers=args.workers,
            initializer=_worker_init,
            initargs=(args.tables, config),
        ) as pool:
            results = list(pool.map(_label_one, raws, chunksize=8))
    else:
        _worker_init(args.tables, config)
        results = [_label_one(raw) for raw in raws]
    records, skips = [], []
    for recs, sks in results:
        records.extend(recs)
        skips.extend(sks)
    return records, skips


def _print_label_summary(records, skips, config: RecordConfig) -> None:
    print(f"records: {len(records)}")
    print(f"skipped: {len(skips)}")
    reasons = Counter(s.reason.split(":")[0] for s in skips)
    for reason, count in reasons.most_common():
        print(f"  {count:5d}  {reason}")
    tsp_freq = Counter()
    csp_freq = Counter()
    for record in records:
        final = record.tsp_labels[-1]
        for name, bit in zip(config.tsp_taxonomy.names(), final.bits):
            if bit:
                tsp_freq[name] += 1
        for row in record.csp_labels.rows:
            for name, bit in zip(config.csp_taxonomy.names(), row):
                if bit:
                    csp_freq[name] += 1
    print("turn-switch label frequency (final transition of each record):")
    for name in config.tsp_taxonomy.names():
        print(f"  {tsp_freq.get(name, 0):6d}  {name}")
    print("column-change label frequency (rows summed over records):")
    for name in config.csp_taxonomy.names():
        print(f"  {csp_freq.get(name, 0):6d}  {name}")


def _explain(args, config: RecordConfig) -> int:
    conv_id, _, turn_text = args.explain.partition(":")
    turn = int(turn_text)
    raws = load_interactions(args.data)
    schemas = load_schemas(args.tables)
    matches = [raw for raw in raws if raw.id == conv_id]
    if not matches:
        print(f"no interaction with id {conv_id!r}", file=sys.stderr)
        return EXIT_VALIDATION
    raw = matches[0]
    schema = schemas[raw.db_id]
    conv, _ = bind_conversation(raw, schema)
    if conv is None or len(conv.turns) < turn:
        print(f"turn {turn} of interaction {conv_id} is not parseable", file=sys.stderr)
        return EXIT_VALIDATION
    queries = conv.queries()
    prev = queries[turn - 2] if turn >= 2 else None
    label, witnesses = diff_turn_explain(prev, queries[turn - 1], config.tsp_taxonomy)
    print(f"interaction {conv_id} turn {turn}: {conv.turns[turn - 1].gold_sql_text}")
    print("turn-switch operations:")
    if not witnesses:
        print("  (none)")
    for name, fragments in witnesses.items():
        for fragment in fragments:
            print(f"  {name}: {fragment}")
    _, col_witnesses = diff_schema_usage_explain(prev, queries[turn - 1], schema,
                                                 config.csp_taxonomy)
    print("column changes:")
    if not col_witnesses:
        print("  (none)")
    for column, events in sorted(col_witnesses.items()):
        table = schema.table_of(column)
        col_name = schema.columns[column].original_name
        shown = f"{table}.{col_name}" if table else col_name
        for name, fragments in events.items():
            for fragment in fragments:
                print(f"  {shown}: {name}: {fragment}")
    return EXIT_OK


def cmd_label(args) -> int:
    config = _record_config(args)
    if args.explain:
        return _explain(args, config)
    records, skips = _label_all(args, config)
    if args.out:
        export_records(records, args.out, config)
        print(f"wrote {len(records)} records to {args.out}")
    _print_label_summary(records, skips, config)
    return EXIT_OK


def cmd_export_train(args) -> int:
    config = _record_config(args)
    records, skips = _label_all(args, config)
    count = export_records(records, args.out, config)
    print(f"wrote {count} records to {args.out}")
    _print_label_summary(records, skips, config)
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate


def read_predictions(path: str) -> list[list[str]]:
    """Prediction file: one SQL per line, blank lines between interactions."""
    blocks: list[list[str]] = [[]]
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                if blocks[-1]:
                    blocks.append([])
                continue
            blocks[-1].append(line)
    if blocks and not blocks[-1]:
        blocks.pop()
    return blocks


def cmd_evaluate(args) -> int:
    schemas = load_schemas(args.tables)
    raws = load_interactions(args.data)
    gold_interactions = []
    for raw in raws:
        schema = schemas.get(raw.db_id)
        if schema is None:
            raise AlignmentError(f"gold references unknown database {raw.db_id!r}",
                                 offending_ids=[raw.id])
        golds = []
        for i, turn in enumerate(raw.turns):
            try:
                golds.append(parse_sql(turn.query, schema))
            except ConvSqlError as exc:
                raise AlignmentError(
                    f"gold SQL of interaction {raw.id} turn {i + 1} is unparseable: {exc}",
                    offending_ids=[raw.id],
                ) from exc
        gold_interactions.append((raw.id, golds))

    blocks = read_predictions(args.pred)
    if len(blocks) != len(raws):
        missing = [raw.id for raw in raws[len(blocks):]]
        raise AlignmentError(
            f"{len(blocks)} predicted interactions vs {len(raws)} gold",
            offending_ids=missing,
        )
    pred_interactions = []
    for raw, block in zip(raws, blocks):
        schema = schemas[raw.db_id]
        preds: list = []
        for line in block:
            try:
                preds.append(parse_sql(line, schema))
            except ConvSqlError:
                preds.append(None)
        pred_interactions.append((raw.id, preds))

    report = evaluate(pred_interactions, gold_interactions, policy=args.policy,
                      schemas=schemas)
    print(report.render_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(report.to_dict(), handle, indent=2)
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate-parse


def cmd_validate_parse(args) -> int:
    schemas = load_schemas(args.tables)
    raws = load_interactions(args.data)
    total = 0
    parse_failures = 0
    no_structured = 0
    anomalies = 0
    agree = 0
    disagreements: list[str] = []
    for raw in raws:
        schema = schemas.get(raw.db_id)
        for i, turn in enumerate(raw.turns):
            total += 1
            if schema is None:
                parse_failures += 1
                continue
            try:
                query = parse_sql(turn.query, schema)
            except ConvSqlError:
                parse_failures += 1
                continue
            if turn.sql_struct is None:
                no_structured += 1
                continue
            try:
                if crosscheck.parses_agree(turn.sql_struct, query):
                    agree += 1
                else:
                    disagreements.append(f"{raw.id}:{i + 1}: {turn.query}")
            except crosscheck.AnomalousStructure:
                anomalies += 1
    compared = agree + len(disagreements)
    rate = (len(disagreements) / compared) if compared else 0.0
    print(f"queries:            {total}")
    print(f"parse failures:     {parse_failures}")
    print(f"without structured: {no_structured}")
    print(f"dataset anomalies:  {anomalies}")
    print(f"compared:           {compared}")
    print(f"agree:              {agree}")
    print(f"disagree:           {len(disagreements)}  ({rate * 100:.2f}%)")
    for line in disagreements[:20]:
        print(f"  {line}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump({
                "queries": total,
                "parse_failures": parse_failures,
                "without_structured": no_structured,
                "anomalies": anomalies,
                "compared": compared,
                "agree": agree,
                "disagreements": disagreements,
            }, handle, indent=2)
    return EXIT_OK


# ---------------------------------------------------------------------------
# loss-check


def cmd_loss_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for trial in range(50):
        d = int(rng.choice([2, 4, 8]))
        err = lossmath.aux_grad_check(rng, d, n_turns=int(rng.integers(1, 5)),
                                      n_columns=int(rng.integers(1, 8)))
        worst = max(worst, err)
    t, m, d = 3, 6, 4
    zero = lossmath.AuxHeadParams.zeros(d)
    tsp = lossmath.tsp_loss(
        lossmath.TurnVectors(rng.normal(0, 1, (t, d))), np.zeros((t, 17)), zero
    )
    csp = lossmath.csp_loss(
        lossmath.ColumnVectors(rng.normal(0, 1, (m, d))), np.zeros((m, 11)), zero
    )
    tsp_err = abs(tsp - t * 17 * np.log(2))
    csp_err = abs(csp - m * 11 * np.log(2))
    print(f"gradient checks: max relative error {worst:.3e} over 50 instances")
    print(f"zero-parameter turn loss:   T*17*ln2 error {tsp_err:.3e}")
    print(f"zero-parameter column loss: M*11*ln2 error {csp_err:.3e}")
    ok = worst <= 1e-5 and tsp_err <= 1e-12 and csp_err <= 1e-12
    print("loss-check: " + ("PASS" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_VALIDATION


# ---------------------------------------------------------------------------
# argument parsing


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convsql",
        description="Auxiliary supervision toolkit for conversational text-to-SQL",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tables_required=True):
        p.add_argument("--data", required=True, help="interactions JSON file")
        p.add_argument("--tables", required=tables_required, help="tables JSON file")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("stats", help="dataset statistics")
    common(p, tables_required=False)
    p.set_defaults(func=cmd_stats)

    def labeling(p):
        common(p)
        p.add_argument("--taxonomy", help="JSON file overriding taxonomies")
        p.add_argument("--turn-separator", default="⟨s⟩")
        p.add_argument("--column-separator", default="⟨/s⟩")
        p.add_argument("--max-length", type=int, default=None)
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--explain", help="interaction_id:turn to explain", default=None)

    p = sub.add_parser("label", help="derive labels, print summary, optionally export")
    labeling(p)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("export-train", help="export training records")
    labeling(p)
    p.set_defaults(func=cmd_export_train)

    p = sub.add_parser("evaluate", help="score predictions with QM/IM")
    common(p)
    p.add_argument("--pred", required=True, help="predictions file")
    p.add_argument("--policy", choices=["official", "value-sensitive"], default="official")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("validate-parse", help="cross-check parses against structured SQL")
    common(p)
    p.set_defaults(func=cmd_validate_parse)

    p = sub.add_parser("loss-check", help="gradient-check the loss kernels")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_loss_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_arg_parser()
    args = parser.parse_args(argv)
    try:
        code = args.func(args)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AlignmentError as exc:
        print(f"alignment error: {exc}; offending ids: {exc.offending_ids}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvSqlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return code


if __name__ == "__main__":
    sys.exit(main())
