"""Synthetic data generators, tabular ingestion, and the k-mer vectorizer."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from confmix.core import Configuration, FeatureMatrix, FormatError

log = logging.getLogger("confmix.datasets")


@dataclass(frozen=True)
class LabeledDataset:
    features: FeatureMatrix
    labels: Configuration | None
    name: str

    def __post_init__(self):
        if self.labels is not None and self.labels.n_samples != self.features.n_samples:
            raise ValueError("label length does not match n_samples")


def _split_counts(n: int, parts: int) -> list[int]:
    base, rem = divmod(n, parts)
    return [base + (1 if i < rem else 0) for i in range(parts)]


def make_moons(n: int, noise: float = 0.05, seed: int = 0) -> LabeledDataset:
    """Two interleaving half-circles with isotropic Gaussian noise."""
    if n < 4:
        raise ValueError("need n >= 4")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    n_out, n_in = _split_counts(n, 2)
    t_out = np.linspace(0, np.pi, n_out)
    t_in = np.linspace(0, np.pi, n_in)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = np.column_stack([1.0 - np.cos(t_in), 0.5 - np.sin(t_in)])
    pts = np.vstack([outer, inner])
    if noise > 0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    labels = np.concatenate([np.ones(n_out, dtype=np.int64),
                             np.full(n_in, 2, dtype=np.int64)])
    return LabeledDataset(FeatureMatrix(pts), Configuration(labels), "moons")


# Preset for the fusion-necessity fixture: in 16 dimensions, a tiny tight
# middle cluster flanked by two large clusters along the first axis. The
# middle cluster is smaller than the reweighting quota, which forces each of
# its vertices to bond across the voids to both flanks; the flank distances
# and spreads are tuned so the coarse front entries are {left+mid | right}
# and {left | mid+right}, whose product recovers all three clusters while
# no single front entry does. Run with n=937 and k=60 to hit that regime.
_D = 16


def _axis_point(x: float) -> tuple[float, ...]:
    return (x,) + (0.0,) * (_D - 1)


BLOBS_PRESET_CENTERS = (_axis_point(-5.8), _axis_point(0.0), _axis_point(5.4))
BLOBS_PRESET_STDS = (0.82, 0.05, 0.55)
BLOBS_PRESET_WEIGHTS = (800, 7, 130)
BLOBS_PRESET_N = 937
BLOBS_PRESET_K = 60


def make_blobs(n: int, centers=None, stds=None, seed: int = 0,
               weights=None) -> LabeledDataset:
    """Isotropic Gaussian blobs; defaults to the tuned three-blob preset."""
    if centers is None:
        centers = BLOBS_PRESET_CENTERS
        if stds is None:
            stds = BLOBS_PRESET_STDS
        if weights is None:
            weights = BLOBS_PRESET_WEIGHTS
    centers = np.asarray(centers, dtype=np.float64)
    if stds is None:
        stds = [1.0] * len(centers)
    stds = np.asarray(stds, dtype=np.float64)
    if len(centers) != len(stds):
        raise ValueError("centers and stds length mismatch")
    if weights is None:
        counts = _split_counts(n, len(centers))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != len(centers):
            raise ValueError("weights and centers length mismatch")
        counts = [int(round(n * wi / w.sum())) for wi in w]
        counts[-1] += n - sum(counts)
    rng = np.random.default_rng(seed)
    pts, labels = [], []
    ci = 0
    for center, std, cnt in zip(centers, stds, counts):
        if cnt == 0:  # rounding can starve a blob at small n; keep labels contiguous
            continue
        ci += 1
        pts.append(center + rng.normal(scale=std, size=(cnt, centers.shape[1])) * 1.0
                   if std > 0 else np.tile(center, (cnt, 1)))
        labels.append(np.full(cnt, ci, dtype=np.int64))
    return LabeledDataset(
        FeatureMatrix(np.vstack(pts)),
        Configuration(np.concatenate(labels)),
        "blobs",
    )


def make_circles(n: int, noise: float = 0.0, factor: float = 0.5,
                 seed: int = 0) -> LabeledDataset:
    """Two concentric circles with radii 1 and factor."""
    if not 0 < factor < 1:
        raise ValueError("factor must be in (0, 1)")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    rng = np.random.default_rng(seed)
    n_out, n_in = _split_counts(n, 2)
    t_out = np.linspace(0, 2 * np.pi, n_out, endpoint=False)
    t_in = np.linspace(0, 2 * np.pi, n_in, endpoint=False)
    outer = np.column_stack([np.cos(t_out), np.sin(t_out)])
    inner = factor * np.column_stack([np.cos(t_in), np.sin(t_in)])
    pts = np.vstack([outer, inner])
    if noise > 0:
        pts = pts + rng.normal(scale=noise, size=pts.shape)
    labels = np.concatenate([np.ones(n_out, dtype=np.int64),
                             np.full(n_in, 2, dtype=np.int64)])
    return LabeledDataset(FeatureMatrix(pts), Configuration(labels), "circles")


_BASE = {"A": 0, "C": 1, "G": 2, "T": 3}


def kmer_counts(sequence: str, k: int = 7) -> np.ndarray:
    """Sliding-window k-mer counts over {A,C,G,T}, vector of length 4^k.

    The index encodes the window base-4, A=0 C=1 G=2 T=3, most-significant
    first. Windows containing other characters are skipped with a warning.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    seq = sequence.upper()
    if len(seq) < k:
        raise ValueError("sequence shorter than k")
    codes = np.array([_BASE.get(ch, -1) for ch in seq], dtype=np.int64)
    if (codes < 0).any():
        warnings.warn("sequence contains non-ACGT characters; affected windows skipped")
    counts = np.zeros(4 ** k, dtype=np.int64)
    powers = 4 ** np.arange(k - 1, -1, -1)
    for start in range(len(seq) - k + 1):
        window = codes[start:start + k]
        if (window < 0).any():
            continue
        counts[int((window * powers).sum())] += 1
    return counts


def read_fasta(path) -> list[tuple[str, str]]:
    """(header, sequence) records; sequence lines are concatenated."""
    records = []
    header, chunks = None, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith(">"):
                if header is not None:
                    records.append((header, "".join(chunks)))
                header, chunks = line[1:], []
            else:
                if header is None:
                    raise FormatError("sequence data before first '>' header")
                chunks.append(line)
    if header is not None:
        records.append((header, "".join(chunks)))
    return records


def load_csv(path, has_header: bool = False, label_column: int | None = None,
             name: str = "csv") -> LabeledDataset:
    """Numeric CSV ingestion with an optional integer ground-truth column."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if has_header:
        lines = lines[1:]
    if not lines:
        raise FormatError("no data rows")
    rows = []
    width = None
    for r, ln in enumerate(lines):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise FormatError(f"row {r + 1}: expected {width} cells, got {len(cells)}")
        parsed = []
        for cidx, cell in enumerate(cells):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise FormatError(f"row {r + 1}, column {cidx + 1}: non-numeric cell {cell!r}") from None
        rows.append(parsed)
    mat = np.asarray(rows, dtype=np.float64)
    labels = None
    if label_column is not None:
        raw = mat[:, label_column]
        if not np.allclose(raw, np.round(raw)):
            raise FormatError("label column contains non-integer values")
        labels = Configuration(np.asarray(np.round(raw), dtype=np.int64))
        mat = np.delete(mat, label_column, axis=1)
    return LabeledDataset(FeatureMatrix(mat), labels, name)


def save_csv(dataset: LabeledDataset, path) -> None:
    """CSV with the label column (if any) appended last."""
    mat = dataset.features.values
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i in range(mat.shape[0]):
            cells = [repr(float(v)) for v in mat[i]]
            if dataset.labels is not None:
                cells.append(str(int(dataset.labels.labels[i])))
            fh.write(",".join(cells) + "\n")


@dataclass
class Preprocessor:
    """Robust scaling, variance thresholding, and top-k variance selection.

    Fitted on the training split only, then applied to both splits.
    """

    scale: bool = True
    variance_threshold: float = 0.0
    top_k: int | None = None
    center_: np.ndarray | None = None
    spread_: np.ndarray | None = None
    keep_: np.ndarray | None = None

    def fit(self, x: FeatureMatrix) -> "Preprocessor":
        v = x.values
        self.center_ = np.median(v, axis=0)
        q75, q25 = np.percentile(v, [75, 25], axis=0)
        spread = q75 - q25
        spread[spread == 0] = 1.0
        self.spread_ = spread
        scaled = (v - self.center_) / self.spread_ if self.scale else v
        var = scaled.var(axis=0)
        keep = var > self.variance_threshold
        if self.top_k is not None and keep.sum() > self.top_k:
            order = np.argsort(-var, kind="stable")
            chosen = [i for i in order if keep[i]][: self.top_k]
            keep = np.zeros_like(keep)
            keep[chosen] = True
        self.keep_ = keep
        return self

    def transform(self, x: FeatureMatrix) -> FeatureMatrix:
        if self.keep_ is None:
            raise ValueError("preprocessor is not fitted")
        v = x.values
        if self.scale:
            v = (v - self.center_) / self.spread_
        return FeatureMatrix(v[:, self.keep_])

    def params(self) -> dict:
        return {
            "scale": self.scale,
            "variance_threshold": self.variance_threshold,
            "top_k": self.top_k,
            "center": None if self.center_ is None else self.center_.tolist(),
            "spread": None if self.spread_ is None else self.spread_.tolist(),
            "keep": None if self.keep_ is None else self.keep_.astype(int).tolist(),
        }
