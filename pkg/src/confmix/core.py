"""Shared domain types, partition metrics, and configuration-set persistence."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np


class AlignmentInputError(ValueError):
    """Raised when two partitions cannot be compared (e.g. length mismatch)."""


class FormatError(ValueError):
    """Raised on malformed persisted files."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """N x d real-valued sample matrix."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("feature matrix must be 2-dimensional")
        if v.shape[0] < 2 or v.shape[1] < 1:
            raise ValueError("need n_samples >= 2 and n_features >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("feature matrix contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Configuration:
    """A clustering of N samples: labels in 1..K, every label used at least once."""

    labels: np.ndarray

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.ndim != 1 or lab.size == 0:
            raise ValueError("labels must be a non-empty 1-d sequence")
        k = int(lab.max(initial=0))
        if lab.min(initial=1) < 1:
            raise ValueError("labels must be positive integers")
        present = np.zeros(k, dtype=bool)
        present[lab - 1] = True
        if not present.all():
            raise ValueError("labels must be contiguous 1..K")
        object.__setattr__(self, "labels", _frozen(lab))

    @property
    def n_samples(self) -> int:
        return self.labels.size

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max())

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_clusters + 1)[1:]

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and np.array_equal(self.labels, other.labels)

    def __hash__(self) -> int:
        return hash(self.labels.tobytes())


@dataclass(frozen=True)
class ConfigurationSet:
    """Ordered configurations across resolutions, coarse to fine, with their gamma values."""

    configurations: tuple[Configuration, ...]
    gammas: tuple[float, ...]

    def __post_init__(self):
        cfgs = tuple(self.configurations)
        gammas = tuple(float(g) for g in self.gammas)
        if len(cfgs) != len(gammas):
            raise ValueError("configurations and gammas length mismatch")
        if len(cfgs) == 0:
            raise ValueError("configuration set must be non-empty")
        n = cfgs[0].n_samples
        if any(c.n_samples != n for c in cfgs):
            raise ValueError("all configurations must share n_samples")
        if any(g < 0 for g in gammas):
            raise ValueError("gammas must be non-negative")
        if any(b <= a for a, b in zip(gammas, gammas[1:])):
            raise ValueError("gammas must be strictly ascending")
        ks = [c.n_clusters for c in cfgs]
        if any(b < a for a, b in zip(ks, ks[1:])):
            raise ValueError("cluster counts must be non-decreasing along ascending gamma")
        object.__setattr__(self, "configurations", cfgs)
        object.__setattr__(self, "gammas", gammas)

    @property
    def n_samples(self) -> int:
        return self.configurations[0].n_samples

    @property
    def n_configurations(self) -> int:
        return len(self.configurations)

    def as_matrix(self) -> np.ndarray:
        """N x m label matrix, one column per configuration."""
        return np.stack([c.labels for c in self.configurations], axis=1)


@dataclass(frozen=True)
class ContingencyTable:
    """Cluster co-occurrence counts between two configurations."""

    counts: np.ndarray
    row_sums: np.ndarray = field(init=False)
    col_sums: np.ndarray = field(init=False)
    total: int = field(init=False)

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.size == 0:
            raise ValueError("counts must be a non-empty 2-d matrix")
        if (c < 0).any():
            raise ValueError("counts must be non-negative")
        object.__setattr__(self, "counts", _frozen(c))
        object.__setattr__(self, "row_sums", _frozen(c.sum(axis=1)))
        object.__setattr__(self, "col_sums", _frozen(c.sum(axis=0)))
        object.__setattr__(self, "total", int(c.sum()))

    @property
    def rows(self) -> int:
        return self.counts.shape[0]

    @property
    def cols(self) -> int:
        return self.counts.shape[1]


def relabel_contiguous(labels) -> Configuration:
    """Normalize arbitrary cluster ids to 1..K in order of first appearance."""
    lab = np.asarray(labels, dtype=np.int64)
    if lab.ndim != 1 or lab.size == 0:
        raise ValueError("labels must be a non-empty 1-d sequence")
    _, first, inv = np.unique(lab, return_index=True, return_inverse=True)
    # rank unique values by first appearance
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(1, order.size + 1)
    return Configuration(rank[inv])


def contingency(a: Configuration, b: Configuration) -> ContingencyTable:
    """counts[p][q] = number of samples with label p+1 in a and q+1 in b."""
    if a.n_samples != b.n_samples:
        raise AlignmentInputError("configurations have different lengths")
    ka, kb = a.n_clusters, b.n_clusters
    flat = (a.labels - 1) * kb + (b.labels - 1)
    counts = np.bincount(flat, minlength=ka * kb).reshape(ka, kb)
    return ContingencyTable(counts)


def ari(a: Configuration, b: Configuration) -> float:
    """Adjusted Rand index between two partitions (pair-counting form).

    With a zero denominator the result is 1.0 when the partitions are
    identical up to relabeling, else 0.0.
    """
    table = contingency(a, b)
    c = table.counts.astype(np.float64)
    sum_comb = (c * (c - 1) / 2.0).sum()
    sum_a = (table.row_sums * (table.row_sums - 1) / 2.0).sum()
    sum_b = (table.col_sums * (table.col_sums - 1) / 2.0).sum()
    n = table.total
    total_pairs = n * (n - 1) / 2.0
    expected = sum_a * sum_b / total_pairs if total_pairs > 0 else 0.0
    max_index = (sum_a + sum_b) / 2.0
    denom = max_index - expected
    if denom == 0.0:
        same = relabel_contiguous(a.labels) == relabel_contiguous(b.labels)
        return 1.0 if same else 0.0
    return float((sum_comb - expected) / denom)


def save_configuration_set(cfgs: ConfigurationSet, path) -> None:
    """Write the configuration-set CSV (gamma header + one label row per sample)."""
    mat = cfgs.as_matrix()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# gammas: " + ",".join(repr(g) for g in cfgs.gammas) + "\n")
        for row in mat:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_configuration_set(path) -> ConfigurationSet:
    """Read a configuration-set CSV written by save_configuration_set."""
    if isinstance(path, io.TextIOBase):
        lines = path.read().splitlines()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise FormatError("empty configuration-set file")
    header = lines[0]
    if not header.startswith("# gammas:"):
        raise FormatError("missing '# gammas:' header")
    try:
        gammas = [float(tok) for tok in header[len("# gammas:"):].strip().split(",") if tok != ""]
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
    mat = np.asarray(rows, dtype=np.int64)
    cfgs = [Configuration(mat[:, j]) for j in range(m)]
    return ConfigurationSet(tuple(cfgs), tuple(gammas))
