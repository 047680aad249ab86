"""Desk-scale multi-task trainer over exported conversational text-to-SQL
records: a miniature encoder with turn-switch and column-change heads, a
token-level SQL decoder, and the combined weighted objective."""

from .data import Corpus, Vocab, make_batch
from .model import ModelConfig, TinyParser
from .records_io import Record, RecordFormatError, RecordHeader, read_records, sql_tokens
from .train import (
    TrainDivergenceError,
    TrainReport,
    ablation_table,
    compute_losses,
    predict,
    run_ablation,
    train,
)

__version__ = "0.1.0"
