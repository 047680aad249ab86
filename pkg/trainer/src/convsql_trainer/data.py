"""Vocabulary construction and tensorization of record batches."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch

from .records_io import Record, RecordHeader, sql_tokens

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"


@dataclass
class Vocab:
    tokens: list[str]
    index: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.index = {tok: i for i, tok in enumerate(self.tokens)}

    def __len__(self):
        return len(self.tokens)

    def encode(self, toks) -> list[int]:
        unk = self.index[UNK]
        return [self.index.get(t, unk) for t in toks]

    def decode(self, ids) -> list[str]:
        return [self.tokens[i] for i in ids]

    @classmethod
    def build(cls, token_lists) -> "Vocab":
        seen: dict[str, None] = {}
        for toks in token_lists:
            for tok in toks:
                seen.setdefault(tok, None)
        return cls([PAD, BOS, EOS, UNK] + sorted(seen))


@dataclass
class Corpus:
    header: RecordHeader
    records: list[Record]
    src_vocab: Vocab
    tgt_vocab: Vocab

    @classmethod
    def build(cls, header: RecordHeader, records: list[Record]) -> "Corpus":
        src_vocab = Vocab.build([r.tokens for r in records])
        tgt_vocab = Vocab.build([sql_tokens(r.gold_sql_text) for r in records])
        return cls(header, records, src_vocab, tgt_vocab)


@dataclass
class Batch:
    src: torch.Tensor            # (B, S) long
    src_pad_mask: torch.Tensor   # (B, S) bool, True where padding
    turn_positions: list[torch.Tensor]    # per example, (T_i,) long
    column_positions: list[torch.Tensor]  # per example, (M_i,) long
    tsp_labels: list[torch.Tensor]        # per example, (T_i, 17) float
    csp_labels: list[torch.Tensor]        # per example, (M_i, 11) float
    tgt_in: torch.Tensor         # (B, L) long, starts with BOS
    tgt_out: torch.Tensor        # (B, L) long, ends with EOS
    tgt_pad_mask: torch.Tensor   # (B, L) bool
    records: list[Record]


def make_batch(records: list[Record], corpus: Corpus) -> Batch:
    src_ids = [corpus.src_vocab.encode(r.tokens) for r in records]
    s_max = max(len(ids) for ids in src_ids)
    pad = corpus.src_vocab.index[PAD]
    src = torch.full((len(records), s_max), pad, dtype=torch.long)
    src_pad = torch.ones((len(records), s_max), dtype=torch.bool)
    for i, ids in enumerate(src_ids):
        src[i, :len(ids)] = torch.tensor(ids, dtype=torch.long)
        src_pad[i, :len(ids)] = False

    tgt_seqs = [corpus.tgt_vocab.encode(sql_tokens(r.gold_sql_text)) for r in records]
    bos, eos = corpus.tgt_vocab.index[BOS], corpus.tgt_vocab.index[EOS]
    tpad = corpus.tgt_vocab.index[PAD]
    l_max = max(len(seq) for seq in tgt_seqs) + 1
    tgt_in = torch.full((len(records), l_max), tpad, dtype=torch.long)
    tgt_out = torch.full((len(records), l_max), tpad, dtype=torch.long)
    tgt_pad = torch.ones((len(records), l_max), dtype=torch.bool)
    for i, seq in enumerate(tgt_seqs):
        tgt_in[i, :len(seq) + 1] = torch.tensor([bos] + seq, dtype=torch.long)
        tgt_out[i, :len(seq) + 1] = torch.tensor(seq + [eos], dtype=torch.long)
        tgt_pad[i, :len(seq) + 1] = False

    return Batch(
        src=src,
        src_pad_mask=src_pad,
        turn_positions=[torch.tensor(r.turn_marker_positions, dtype=torch.long)
                        for r in records],
        column_positions=[torch.tensor(r.column_marker_positions, dtype=torch.long)
                          for r in records],
        tsp_labels=[torch.tensor(r.tsp_labels, dtype=torch.float64) for r in records],
        csp_labels=[torch.tensor(r.csp_labels, dtype=torch.float64) for r in records],
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_pad_mask=tgt_pad,
        records=records,
    )
