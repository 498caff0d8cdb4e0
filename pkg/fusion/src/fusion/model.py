"""Token embedding, attention fusion, and the downstream perceptron."""

from __future__ import annotations

import math

import torch
from torch import nn

from .io import TokenSchema

__all__ = ["sinusoidal_pe", "TokenEmbedder", "FusionHead", "GCFeaturizer", "ThreeLP"]

# one-hot below this cardinality, learned embedding above: beyond a few dozen
# clusters the one-hot block dominates the feature width for no gain
ONE_HOT_MAX_CARDINALITY = 32


def sinusoidal_pe(seq_len: int, dim: int) -> torch.Tensor:
    """Standard sinusoidal positional encoding, shape ``(seq_len, dim)``.

    ``PE[p, 2i] = sin(p / 10000^(2i/dim))``, ``PE[p, 2i+1] = cos(...)``; row 0
    is the alternating 0/1 pattern.
    """
    pos = torch.arange(seq_len, dtype=torch.float64).unsqueeze(1)
    i = torch.arange(0, dim, 2, dtype=torch.float64)
    angle = pos / torch.pow(10000.0, i / dim)
    pe = torch.zeros(seq_len, dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle[:, : dim // 2])
    return pe.to(torch.get_default_dtype())


class TokenEmbedder(nn.Module):
    """Per-sample label rows -> token sequence [CLS], m x [CFG], R x [REG].

    Each level gets its own embedding table (cardinalities differ across
    levels). Positional encoding is added over the whole sequence; a [CFG]
    token's position is its level index plus one ([CLS] sits at position 0).
    """

    def __init__(self, schema: TokenSchema):
        super().__init__()
        self.schema = schema
        self.tables = nn.ModuleList(
            nn.Embedding(c, schema.embed_dim) for c in schema.cardinalities
        )
        self.cls = nn.Parameter(torch.randn(schema.embed_dim) * 0.02)
        self.registers = nn.Parameter(
            torch.randn(schema.n_registers, schema.embed_dim) * 0.02
        )
        self.register_buffer("pe", sinusoidal_pe(schema.seq_len, schema.embed_dim))

    def forward(self, labels: torch.Tensor) -> torch.Tensor:
        """``labels``: (B, m) 1-based ints -> tokens (B, seq_len, embed_dim)."""
        if labels.ndim != 2 or labels.shape[1] != self.schema.m:
            raise ValueError(f"labels must be (batch, {self.schema.m})")
        for lvl, card in enumerate(self.schema.cardinalities):
            col = labels[:, lvl]
            if col.min() < 1 or col.max() > card:
                raise ValueError(
                    f"level {lvl}: label outside 1..{card} "
                    "(upstream alignment failure)"
                )
        b = labels.shape[0]
        cfg = torch.stack(
            [table(labels[:, lvl] - 1) for lvl, table in enumerate(self.tables)],
            dim=1,
        )
        cls = self.cls.expand(b, 1, -1)
        reg = self.registers.expand(b, -1, -1)
        tokens = torch.cat([cls, cfg, reg], dim=1)
        return tokens + self.pe


class FusionHead(nn.Module):
    """One multi-head self-attention layer with residual + LayerNorm.

    The [CLS] output is the fused vector; ``forward`` also returns the
    per-head attention rows from [CLS] over the full sequence so the mass on
    each [CFG] position can be exported.
    """

    def __init__(self, schema: TokenSchema, n_heads: int = 4):
        super().__init__()
        self.schema = schema
        self.embedder = TokenEmbedder(schema)
        self.attn = nn.MultiheadAttention(schema.embed_dim, n_heads, batch_first=True)
        self.norm = nn.LayerNorm(schema.embed_dim)

    def forward(self, labels: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns ``(fused (B, D), cls_attention (B, heads, seq_len))``."""
        tokens = self.embedder(labels)
        out, weights = self.attn(
            tokens, tokens, tokens, need_weights=True, average_attn_weights=False
        )
        out = self.norm(tokens + out)
        return out[:, 0], weights[:, :, 0, :]

    def cfg_attention(self, labels: torch.Tensor) -> torch.Tensor:
        """Head-averaged [CLS] attention mass on the [CFG] positions, (B, m)."""
        _, rows = self.forward(labels)
        return rows.mean(dim=1)[:, 1 : 1 + self.schema.m]


class GCFeaturizer(nn.Module):
    """Static configuration features for the concatenation (GC) mode.

    Levels with cardinality <= 32 are one-hot encoded; wider levels go
    through a small learned embedding.
    """

    def __init__(self, schema: TokenSchema):
        super().__init__()
        self.schema = schema
        self.wide = nn.ModuleDict()
        width = 0
        for lvl, card in enumerate(schema.cardinalities):
            if card <= ONE_HOT_MAX_CARDINALITY:
                width += card
            else:
                self.wide[str(lvl)] = nn.Embedding(card, schema.embed_dim)
                width += schema.embed_dim
        self.width = width

    def forward(self, labels: torch.Tensor) -> torch.Tensor:
        parts = []
        for lvl, card in enumerate(self.schema.cardinalities):
            col = labels[:, lvl] - 1
            key = str(lvl)
            if key in self.wide:
                parts.append(self.wide[key](col))
            else:
                parts.append(
                    nn.functional.one_hot(col, num_classes=card).to(
                        torch.get_default_dtype()
                    )
                )
        return torch.cat(parts, dim=1)


class ThreeLP(nn.Module):
    """3-layer perceptron, hidden widths (256, 128, 64), ReLU."""

    def __init__(self, in_dim: int, out_dim: int, hidden: tuple[int, ...] = (256, 128, 64)):
        super().__init__()
        layers: list[nn.Module] = []
        prev = in_dim
        for h in hidden:
            layers += [nn.Linear(prev, h), nn.ReLU()]
            prev = h
        layers.append(nn.Linear(prev, out_dim))
        self.net = nn.Sequential(*layers)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)
