"""Training loop for the three run modes.

BASELINE: raw features -> 3LP.
GC: raw features concatenated with static one-hot/embedded configuration
    labels -> 3LP.
GMC: raw features concatenated with the attention-fused [CLS] vector -> 3LP.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .io import TokenSchema
from .model import FusionHead, GCFeaturizer, ThreeLP

__all__ = ["FusionMode", "TrainResult", "FusionModel", "train"]


class FusionMode(str, enum.Enum):
    BASELINE = "BASELINE"
    GC = "GC"
    GMC = "GMC"


class FusionModel(nn.Module):
    """One end-to-end model for a given mode."""

    def __init__(self, mode: FusionMode, n_features: int, out_dim: int,
                 schema: TokenSchema | None = None, n_heads: int = 4):
        super().__init__()
        self.mode = FusionMode(mode)
        if self.mode is not FusionMode.BASELINE and schema is None:
            raise ValueError(f"{self.mode.value} mode needs a token schema")
        self.fusion: FusionHead | None = None
        self.gc: GCFeaturizer | None = None
        width = n_features
        if self.mode is FusionMode.GC:
            self.gc = GCFeaturizer(schema)
            width += self.gc.width
        elif self.mode is FusionMode.GMC:
            self.fusion = FusionHead(schema, n_heads=n_heads)
            width += schema.embed_dim
        self.predictor = ThreeLP(width, out_dim)

    def forward(self, features: torch.Tensor,
                labels: torch.Tensor | None = None) -> torch.Tensor:
        x = features
        if self.mode is FusionMode.GC:
            x = torch.cat([x, self.gc(labels)], dim=1)
        elif self.mode is FusionMode.GMC:
            fused, _ = self.fusion(labels)
            x = torch.cat([x, fused], dim=1)
        return self.predictor(x)


@dataclass
class TrainResult:
    model: FusionModel
    mode: str
    seed: int
    loss: float           # final held-out loss
    metric: float         # held-out accuracy (classification) or R2 (regression)
    epochs: int           # epochs actually run
    attention: np.ndarray | None  # (n_test, m) head-averaged [CLS]->[CFG] mass, GMC only


def _r2(pred: torch.Tensor, target: torch.Tensor) -> float:
    ss_res = torch.sum((target - pred) ** 2)
    ss_tot = torch.sum((target - target.mean()) ** 2)
    if ss_tot == 0:
        return 0.0
    return float(1.0 - ss_res / ss_tot)


def train(features: np.ndarray, targets: np.ndarray, mode: FusionMode | str,
          config_labels: np.ndarray | None = None,
          schema: TokenSchema | None = None, *,
          task: str = "classification", seed: int = 0, lr: float = 1e-3,
          batch_size: int = 100, max_epochs: int = 100,
          test_fraction: float = 0.25, patience: int = 100) -> TrainResult:
    """Train one mode on a held-out split and report its test metric.

    ``features`` is (N, d); ``targets`` is (N,) class ids for classification
    or (N,) floats for regression; ``config_labels`` is the (N, m) 1-based
    label matrix from the token/aligned CSV (GC/GMC only).
    """
    mode = FusionMode(mode)
    if task not in ("classification", "regression"):
        raise ValueError("task must be 'classification' or 'regression'")
    if mode is not FusionMode.BASELINE:
        if config_labels is None or schema is None:
            raise ValueError(f"{mode.value} mode needs config_labels and a schema")
        if config_labels.shape[0] != features.shape[0]:
            raise ValueError("features and config_labels row counts differ")
        if config_labels.shape[1] != schema.m:
            raise ValueError("config_labels level count does not match the schema")

    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)

    n = features.shape[0]
    perm = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    x = torch.as_tensor(features, dtype=torch.get_default_dtype())
    if task == "classification":
        y = torch.as_tensor(targets, dtype=torch.long)
        out_dim = int(y.max().item()) + 1
        criterion = nn.CrossEntropyLoss()
    else:
        y = torch.as_tensor(targets, dtype=torch.get_default_dtype()).reshape(-1, 1)
        out_dim = 1
        criterion = nn.MSELoss()
    lab = None
    if mode is not FusionMode.BASELINE:
        lab = torch.as_tensor(config_labels, dtype=torch.long)

    model = FusionModel(mode, x.shape[1], out_dim, schema=schema)
    opt = torch.optim.Adam(model.parameters(), lr=lr)

    tr = torch.as_tensor(train_idx)
    te = torch.as_tensor(test_idx)
    epochs_run = 0
    best_loss = float("inf")
    stale = 0
    for epoch in range(max_epochs):
        model.train()
        order = torch.as_tensor(rng.permutation(len(tr)))
        for start in range(0, len(tr), batch_size):
            idx = tr[order[start:start + batch_size]]
            opt.zero_grad()
            out = model(x[idx], lab[idx] if lab is not None else None)
            loss = criterion(out, y[idx])
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"NaN/inf loss at epoch {epoch}, mode {mode.value}, "
                    f"seed {seed}: check feature scaling and learning rate"
                )
            loss.backward()
            opt.step()
        epochs_run = epoch + 1
        model.eval()
        with torch.no_grad():
            out = model(x[te], lab[te] if lab is not None else None)
            test_loss = float(criterion(out, y[te]))
        if test_loss < best_loss - 1e-6:
            best_loss = test_loss
            stale = 0
        else:
            stale += 1
            if stale >= patience:
                break

    model.eval()
    with torch.no_grad():
        out = model(x[te], lab[te] if lab is not None else None)
        test_loss = float(criterion(out, y[te]))
        if task == "classification":
            metric = float((out.argmax(dim=1) == y[te]).to(torch.float64).mean())
        else:
            metric = _r2(out, y[te])
        attention = None
        if mode is FusionMode.GMC:
            attention = model.fusion.cfg_attention(lab[te]).numpy()

    return TrainResult(model=model, mode=mode.value, seed=seed, loss=test_loss,
                       metric=metric, epochs=epochs_run, attention=attention)
