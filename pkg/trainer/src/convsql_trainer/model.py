"""Miniature encoder/decoder with the two auxiliary heads.

The encoder is a small standard self-attention stack (no relation-aware
biases); the auxiliary heads read marker vectors: turn heads see the
four-block mixture [prev; curr; curr - prev; prev * curr] of adjacent
turn-marker vectors (the t=0 vector is zero), column heads read each
column-marker vector directly.  The decoder is a token-level grammar-rule
sequence model over canonical SQL tokens with teacher forcing.

Everything runs in float64 so the auxiliary losses can be checked against
the reference loss kernel at tight tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

N_TURN_TYPES = 17
N_COLUMN_TYPES = 11


@dataclass
class ModelConfig:
    d: int = 64
    layers: int = 2
    heads: int = 2
    ffn: int = 256
    alpha: float = 0.5
    beta: float = 8.0
    lr: float = 2e-3
    epochs: int = 200
    batch_size: int = 10
    seed: int = 0
    enable_tsp: bool = True
    enable_csp: bool = True
    max_positions: int = 512
    max_decode_len: int = 96
    holdout: int = 0

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("embedding dimension must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be non-negative")


class TinyParser(nn.Module):
    def __init__(self, config: ModelConfig, src_vocab_size: int, tgt_vocab_size: int):
        super().__init__()
        self.config = config
        d = config.d
        self.src_embed = nn.Embedding(src_vocab_size, d)
        self.tgt_embed = nn.Embedding(tgt_vocab_size, d)
        self.src_pos = nn.Embedding(config.max_positions, d)
        self.tgt_pos = nn.Embedding(config.max_positions, d)
        encoder_layer = nn.TransformerEncoderLayer(
            d_model=d, nhead=config.heads, dim_feedforward=config.ffn,
            dropout=0.0, batch_first=True, norm_first=True,
        )
        self.encoder = nn.TransformerEncoder(encoder_layer, config.layers,
                                             enable_nested_tensor=False)
        decoder_layer = nn.TransformerDecoderLayer(
            d_model=d, nhead=config.heads, dim_feedforward=config.ffn,
            dropout=0.0, batch_first=True, norm_first=True,
        )
        self.decoder = nn.TransformerDecoder(decoder_layer, config.layers)
        self.out_proj = nn.Linear(d, tgt_vocab_size)
        self.tsp_head = nn.Linear(4 * d, N_TURN_TYPES)
        self.csp_head = nn.Linear(d, N_COLUMN_TYPES)
        self.double()

    def encode(self, src: torch.Tensor, src_pad_mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(src.shape[1], device=src.device)
        x = self.src_embed(src) + self.src_pos(positions)[None, :, :]
        return self.encoder(x, src_key_padding_mask=src_pad_mask)

    @staticmethod
    def marker_vectors(memory_row: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        return memory_row[positions]

    @staticmethod
    def turn_mixture(turn_vectors: torch.Tensor) -> torch.Tensor:
        """(T, d) -> (T, 4d) with the zero vector prepended as t_0."""
        zero = torch.zeros_like(turn_vectors[:1])
        padded = torch.cat([zero, turn_vectors], dim=0)
        prev, curr = padded[:-1], padded[1:]
        return torch.cat([prev, curr, curr - prev, prev * curr], dim=1)

    def tsp_logits(self, turn_vectors: torch.Tensor) -> torch.Tensor:
        return self.tsp_head(self.turn_mixture(turn_vectors))

    def csp_logits(self, column_vectors: torch.Tensor) -> torch.Tensor:
        return self.csp_head(column_vectors)

    def decode_logits(self, memory: torch.Tensor, src_pad_mask: torch.Tensor,
                      tgt_in: torch.Tensor, tgt_pad_mask: torch.Tensor) -> torch.Tensor:
        length = tgt_in.shape[1]
        positions = torch.arange(length, device=tgt_in.device)
        y = self.tgt_embed(tgt_in) + self.tgt_pos(positions)[None, :, :]
        causal = torch.triu(
            torch.ones(length, length, dtype=torch.bool, device=y.device), diagonal=1
        )
        hidden = self.decoder(
            y, memory,
            tgt_mask=causal,
            tgt_key_padding_mask=tgt_pad_mask,
            memory_key_padding_mask=src_pad_mask,
        )
        return self.out_proj(hidden)
