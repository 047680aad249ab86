"""Training loop, loss computation, prediction, and the ablation runner."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch.nn import functional as F

from .data import BOS, EOS, Batch, Corpus, make_batch
from .model import ModelConfig, TinyParser
from .records_io import Record, RecordHeader, sql_tokens


class TrainDivergenceError(Exception):
    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass
class LossParts:
    l_dec: float
    l_tsp: float
    l_csp: float
    l_total: float


@dataclass
class TrainReport:
    config: dict
    epoch_losses: list[LossParts]
    final_qm: float
    tsp_auc: float | None
    csp_auc: float | None
    predictions: list[str]
    truncated_decodes: int

    def to_json(self) -> str:
        data = {
            "config": self.config,
            "epoch_losses": [asdict(e) for e in self.epoch_losses],
            "final_qm": self.final_qm,
            "tsp_auc": self.tsp_auc,
            "csp_auc": self.csp_auc,
            "predictions": self.predictions,
            "truncated_decodes": self.truncated_decodes,
        }
        return json.dumps(data, indent=2)


def compute_losses(model: TinyParser, batch: Batch, config: ModelConfig) -> dict:
    """Per-batch objective: decoder cross-entropy plus weighted auxiliary
    BCE sums, each summed per example and averaged over the batch."""
    memory = model.encode(batch.src, batch.src_pad_mask)
    logits = model.decode_logits(memory, batch.src_pad_mask, batch.tgt_in, batch.tgt_pad_mask)
    ce = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]),
        batch.tgt_out.reshape(-1),
        reduction="none",
    ).reshape(batch.tgt_out.shape)
    ce = ce.masked_fill(batch.tgt_pad_mask, 0.0)
    l_dec = ce.sum(dim=1).mean()

    zero = torch.zeros((), dtype=torch.float64, device=l_dec.device)
    l_tsp = zero
    l_csp = zero
    if config.enable_tsp:
        per_example = []
        for i in range(len(batch.records)):
            turn_vecs = model.marker_vectors(memory[i], batch.turn_positions[i])
            head_logits = model.tsp_logits(turn_vecs)
            per_example.append(F.binary_cross_entropy_with_logits(
                head_logits, batch.tsp_labels[i], reduction="sum"
            ))
        l_tsp = torch.stack(per_example).mean()
    if config.enable_csp:
        per_example = []
        for i in range(len(batch.records)):
            col_vecs = model.marker_vectors(memory[i], batch.column_positions[i])
            head_logits = model.csp_logits(col_vecs)
            per_example.append(F.binary_cross_entropy_with_logits(
                head_logits, batch.csp_labels[i], reduction="sum"
            ))
        l_csp = torch.stack(per_example).mean()

    l_total = l_dec + config.alpha * l_tsp + config.beta * l_csp
    return {"l_dec": l_dec, "l_tsp": l_tsp, "l_csp": l_csp, "l_total": l_total}


def predict(model: TinyParser, record: Record, corpus: Corpus) -> tuple[str, bool]:
    """Greedy decode; returns (sql_text, truncated).  Never raises on an
    untrained model: the worst case is a truncated token stream."""
    model.eval()
    with torch.no_grad():
        batch = make_batch([record], corpus)
        memory = model.encode(batch.src, batch.src_pad_mask)
        bos = corpus.tgt_vocab.index[BOS]
        eos = corpus.tgt_vocab.index[EOS]
        generated = [bos]
        for _ in range(model.config.max_decode_len):
            tgt_in = torch.tensor([generated], dtype=torch.long)
            pad_mask = torch.zeros_like(tgt_in, dtype=torch.bool)
            logits = model.decode_logits(memory, batch.src_pad_mask, tgt_in, pad_mask)
            next_id = int(logits[0, -1].argmax())
            if next_id == eos:
                return " ".join(corpus.tgt_vocab.decode(generated[1:])), False
            generated.append(next_id)
        return " ".join(corpus.tgt_vocab.decode(generated[1:])), True


def _pooled_auc(scores: np.ndarray, labels: np.ndarray) -> float | None:
    """Rank-based AUC over all pooled (example, type) pairs."""
    positives = scores[labels > 0.5]
    negatives = scores[labels <= 0.5]
    if positives.size == 0 or negatives.size == 0:
        return None
    order = np.argsort(np.concatenate([positives, negatives]), kind="mergesort")
    ranks = np.empty(order.size, dtype=np.float64)
    ranks[order] = np.arange(1, order.size + 1)
    # midranks for ties
    pooled = np.concatenate([positives, negatives])
    sorted_vals = np.sort(pooled)
    for value in np.unique(sorted_vals):
        mask = pooled == value
        ranks[mask] = ranks[mask].mean()
    rank_sum = ranks[:positives.size].sum()
    u = rank_sum - positives.size * (positives.size + 1) / 2
    return float(u / (positives.size * negatives.size))


def _aux_scores(model: TinyParser, records: list[Record], corpus: Corpus):
    model.eval()
    tsp_scores, tsp_labels, csp_scores, csp_labels = [], [], [], []
    with torch.no_grad():
        for record in records:
            batch = make_batch([record], corpus)
            memory = model.encode(batch.src, batch.src_pad_mask)
            turn_vecs = model.marker_vectors(memory[0], batch.turn_positions[0])
            col_vecs = model.marker_vectors(memory[0], batch.column_positions[0])
            tsp_scores.append(model.tsp_logits(turn_vecs).numpy().ravel())
            tsp_labels.append(batch.tsp_labels[0].numpy().ravel())
            csp_scores.append(model.csp_logits(col_vecs).numpy().ravel())
            csp_labels.append(batch.csp_labels[0].numpy().ravel())
    return (np.concatenate(tsp_scores), np.concatenate(tsp_labels),
            np.concatenate(csp_scores), np.concatenate(csp_labels))


def train(header: RecordHeader, records: list[Record], config: ModelConfig,
          log=None) -> tuple[TinyParser, Corpus, TrainReport]:
    """Deterministic under a fixed seed; aborts on non-finite loss."""
    if not records:
        raise ValueError("need at least one record")
    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    corpus = Corpus.build(header, records)
    train_records = records[:len(records) - config.holdout] if config.holdout else records
    eval_records = records[len(records) - config.holdout:] if config.holdout else records

    model = TinyParser(config, len(corpus.src_vocab), len(corpus.tgt_vocab))
    optimizer = torch.optim.Adam(model.parameters(), lr=config.lr)
    shuffler = torch.Generator().manual_seed(config.seed)

    epoch_losses: list[LossParts] = []
    for epoch in range(config.epochs):
        model.train()
        order = torch.randperm(len(train_records), generator=shuffler).tolist()
        sums = {"l_dec": 0.0, "l_tsp": 0.0, "l_csp": 0.0, "l_total": 0.0}
        n_batches = 0
        for start in range(0, len(order), config.batch_size):
            chunk = [train_records[i] for i in order[start:start + config.batch_size]]
            batch = make_batch(chunk, corpus)
            losses = compute_losses(model, batch, config)
            if not torch.isfinite(losses["l_total"]):
                raise TrainDivergenceError(epoch)
            optimizer.zero_grad()
            losses["l_total"].backward()
            optimizer.step()
            for key in sums:
                sums[key] += float(losses[key].detach())
            n_batches += 1
        epoch_losses.append(LossParts(**{k: v / n_batches for k, v in sums.items()}))
        if log and (epoch % 25 == 0 or epoch == config.epochs - 1):
            log(f"epoch {epoch:4d}  total {epoch_losses[-1].l_total:10.4f}  "
                f"dec {epoch_losses[-1].l_dec:8.4f}  tsp {epoch_losses[-1].l_tsp:8.4f}  "
                f"csp {epoch_losses[-1].l_csp:8.4f}")

    predictions = []
    truncated = 0
    matched = 0
    for record in train_records:
        text, was_truncated = predict(model, record, corpus)
        predictions.append(text)
        truncated += int(was_truncated)
        if sql_tokens(text) == sql_tokens(record.gold_sql_text):
            matched += 1
    final_qm = matched / len(train_records)

    tsp_s, tsp_l, csp_s, csp_l = _aux_scores(model, eval_records, corpus)
    report = TrainReport(
        config=asdict(config),
        epoch_losses=epoch_losses,
        final_qm=final_qm,
        tsp_auc=_pooled_auc(tsp_s, tsp_l),
        csp_auc=_pooled_auc(csp_s, csp_l),
        predictions=predictions,
        truncated_decodes=truncated,
    )
    return model, corpus, report


ABLATION_ROWS = (
    ("full", True, True),
    ("w/o TSP", False, True),
    ("w/o CSP", True, False),
    ("w/o both", False, False),
)


def run_ablation(header: RecordHeader, records: list[Record], config: ModelConfig,
                 log=None) -> dict[str, TrainReport]:
    """Train the four configurations of the ablation table under one seed."""
    reports = {}
    for name, enable_tsp, enable_csp in ABLATION_ROWS:
        row_config = ModelConfig(**{**asdict(config),
                                    "enable_tsp": enable_tsp,
                                    "enable_csp": enable_csp})
        if log:
            log(f"--- training {name}")
        _, _, report = train(header, records, row_config, log=log)
        reports[name] = report
    return reports


def ablation_table(reports: dict[str, TrainReport]) -> str:
    lines = [f"{'configuration':<14} {'QM':>6} {'final dec':>10} {'final total':>12}"]
    for name, _, _ in ABLATION_ROWS:
        report = reports[name]
        last = report.epoch_losses[-1]
        lines.append(f"{name:<14} {report.final_qm * 100:6.1f} "
                     f"{last.l_dec:10.4f} {last.l_total:12.4f}")
    return "\n".join(lines)
