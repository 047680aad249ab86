"""Trainer CLI: train one configuration or run the four-row ablation."""

from __future__ import annotations

import argparse
import json
import sys

from .model import ModelConfig
from .records_io import read_records
from .train import ablation_table, run_ablation, train


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--records", required=True, help="exported record file")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=10)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=8.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--holdout", type=int, default=0,
                   help="records reserved from training for the AUC slice")


def _config(args) -> ModelConfig:
    return ModelConfig(
        d=args.d, layers=args.layers, heads=args.heads, epochs=args.epochs,
        batch_size=args.batch_size, lr=args.lr, alpha=args.alpha, beta=args.beta,
        seed=args.seed, holdout=args.holdout,
        enable_tsp=not getattr(args, "no_tsp", False),
        enable_csp=not getattr(args, "no_csp", False),
    )


def cmd_train(args) -> int:
    header, records = read_records(args.records)
    _, _, report = train(header, records, _config(args), log=print)
    print(f"final train QM: {report.final_qm * 100:.1f}")
    print(f"TSP AUC: {report.tsp_auc}   CSP AUC: {report.csp_auc}")
    if args.pred_out:
        with open(args.pred_out, "w", encoding="utf-8") as handle:
            previous = None
            for record, text in zip(records[:len(report.predictions)], report.predictions):
                if previous is not None and record.conversation_id != previous:
                    handle.write("\n")
                handle.write(text + "\n")
                previous = record.conversation_id
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(report.to_json())
    return 0


def cmd_ablation(args) -> int:
    header, records = read_records(args.records)
    reports = run_ablation(header, records, _config(args), log=print)
    table = ablation_table(reports)
    print(table)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump({name: json.loads(r.to_json()) for name, r in reports.items()},
                      handle, indent=2)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="convsql-trainer")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    _add_model_args(p)
    p.add_argument("--no-tsp", action="store_true")
    p.add_argument("--no-csp", action="store_true")
    p.add_argument("--pred-out", help="write greedy predictions (one per line, "
                                      "blank line between interactions)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablation", help="train the four ablation rows")
    _add_model_args(p)
    p.set_defaults(func=cmd_ablation)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
