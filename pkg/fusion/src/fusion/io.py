"""File formats shared with the clustering pipeline.

The token file is a configuration-set CSV: a ``# gammas:`` comment header
listing one resolution per level, then one row per sample with one integer
cluster label (1-based, contiguous per level) per level.  The schema JSON
carries ``{"m": .., "cardinalities": [..], "gammas": [..]}``.  Aligned
configuration CSVs use the same layout as the token CSV.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TokenSchema",
    "FormatError",
    "load_tokens",
    "load_schema",
    "write_metrics",
    "write_attention_csv",
]


class FormatError(ValueError):
    """A token / schema file does not follow the documented layout."""


@dataclass(frozen=True)
class TokenSchema:
    """Shape of one configuration-token file.

    ``m`` levels, per-level cluster counts ``cardinalities``, per-level
    resolutions ``gammas``; ``embed_dim`` and ``n_registers`` parameterize the
    fusion head built on top of the tokens.
    """

    m: int
    cardinalities: tuple[int, ...]
    gammas: tuple[float, ...]
    embed_dim: int = 32
    n_registers: int = 4

    def __post_init__(self):
        if self.m != len(self.cardinalities) or self.m != len(self.gammas):
            raise FormatError("m must match the number of cardinalities and gammas")
        if self.m < 1:
            raise FormatError("schema needs at least one level")
        if any(c < 1 for c in self.cardinalities):
            raise FormatError("cardinalities must be positive")
        if self.embed_dim < 8:
            raise FormatError("embed_dim must be at least 8")
        if self.n_registers < 0:
            raise FormatError("n_registers must be non-negative")

    @property
    def seq_len(self) -> int:
        """[CLS] + one [CFG] per level + the [REG] block."""
        return 1 + self.m + self.n_registers


def load_tokens(path) -> tuple[np.ndarray, tuple[float, ...]]:
    """Read a configuration-set / token CSV.

    Returns ``(labels, gammas)`` where ``labels`` is an ``(N, m)`` int array of
    1-based cluster labels and ``gammas`` the resolutions from the header.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError("empty token file")
    header = lines[0]
    if not header.startswith("# gammas:"):
        raise FormatError("missing '# gammas:' header")
    try:
        gammas = tuple(float(tok) for tok in header[len("# gammas:"):].strip().split(",") if tok)
    except ValueError as exc:
        raise FormatError(f"bad gamma header: {exc}") from None
    if not gammas:
        raise FormatError("no gammas in header")
    m = len(gammas)
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        cells = ln.split(",")
        if len(cells) != m:
            raise FormatError(f"line {lineno}: expected {m} labels, got {len(cells)}")
        try:
            rows.append([int(c) for c in cells])
        except ValueError:
            raise FormatError(f"line {lineno}: non-integer label") from None
    if not rows:
        raise FormatError("no label rows")
    labels = np.asarray(rows, dtype=np.int64)
    if labels.min() < 1:
        raise FormatError("labels must be 1-based positive integers")
    return labels, gammas


def load_schema(path, *, embed_dim: int = 32, n_registers: int = 4) -> TokenSchema:
    """Read the schema JSON emitted next to a token CSV."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad schema JSON: {exc}") from None
    for key in ("m", "cardinalities", "gammas"):
        if key not in raw:
            raise FormatError(f"schema missing key {key!r}")
    return TokenSchema(
        m=int(raw["m"]),
        cardinalities=tuple(int(c) for c in raw["cardinalities"]),
        gammas=tuple(float(g) for g in raw["gammas"]),
        embed_dim=embed_dim,
        n_registers=n_registers,
    )


def write_metrics(path, *, mode: str, seed: int, loss: float, metric: float,
                  epochs: int) -> None:
    """Emit the run-metrics JSON artifact."""
    payload = {
        "mode": str(mode),
        "seed": int(seed),
        "loss": float(loss),
        "metric": float(metric),
        "epochs": int(epochs),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def write_attention_csv(path, attention: np.ndarray, gammas) -> None:
    """Emit the attention-map CSV: one row per sample, one column per level.

    ``attention`` is ``(N, m)``: the [CLS] attention mass on each [CFG]
    token, averaged over heads.
    """
    attention = np.asarray(attention, dtype=float)
    if attention.ndim != 2 or attention.shape[1] != len(tuple(gammas)):
        raise ValueError("attention must be (n_samples, n_levels)")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(f"gamma={float(g):g}" for g in gammas) + "\n")
        for row in attention:
            fh.write(",".join(f"{v:.8f}" for v in row) + "\n")
