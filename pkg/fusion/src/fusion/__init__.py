"""Attention-based fusion of multi-resolution clustering labels.

Consumes the token CSV + schema JSON produced by the clustering CLI and an
optional aligned configuration CSV, embeds per-sample cluster labels as
tokens, fuses them with multi-head self-attention, and trains a downstream
perceptron on the concatenation of raw features and the fused vector.
"""

from .io import TokenSchema, load_schema, load_tokens, write_attention_csv, write_metrics
from .model import FusionHead, GCFeaturizer, ThreeLP, TokenEmbedder, sinusoidal_pe
from .train import FusionMode, TrainResult, train

__all__ = [
    "TokenSchema",
    "load_schema",
    "load_tokens",
    "write_attention_csv",
    "write_metrics",
    "sinusoidal_pe",
    "TokenEmbedder",
    "FusionHead",
    "GCFeaturizer",
    "ThreeLP",
    "FusionMode",
    "TrainResult",
    "train",
]
