"""Reverse Merge & Split alignment between configuration sets.

The pairwise alignment reorders the contingency matrix of two partitions via
the Fiedler vector of a two-walk Laplacian built from the bipartite block
matrix [[C C^T, C], [C^T, C^T C]], matches sorted positions, and reassigns
redundant labels whose strongest overlap beats their diagonal entry.
"""

from __future__ import annotations

import numpy as np
import scipy.optimize
from dataclasses import dataclass, field

from confmix.core import (
    AlignmentInputError,
    Configuration,
    ConfigurationSet,
    ContingencyTable,
    ari,
    contingency,
)


@dataclass(frozen=True)
class ScoreParams:
    theta: float = 0.1

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")


@dataclass(frozen=True)
class TwoWalkLaplacian:
    matrix: np.ndarray
    degree: np.ndarray = field(init=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "degree", np.diag(m).copy())

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class AlignmentMapping:
    """Label remapping from a source (test) partition onto a target (train) one."""

    mapping: dict[int, int]  # source label -> target label (total over 1..n_source)
    merges: tuple[tuple[int, ...], ...]  # groups of source labels sent to one target
    splits: tuple[tuple[int, tuple[int, ...]], ...]  # target label -> source labels covering it
    fresh: tuple[int, ...]  # source labels given labels beyond the target range
    score: float = float("nan")
    disconnected: bool = False

    def apply(self, labels: np.ndarray) -> np.ndarray:
        lut = np.zeros(max(self.mapping) + 1, dtype=np.int64)
        for src, dst in self.mapping.items():
            lut[src] = dst
        return lut[np.asarray(labels, dtype=np.int64)]


@dataclass(frozen=True)
class AnchorSet:
    indices: np.ndarray
    fraction: float = 0.001

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValueError("anchor set must be non-empty")
        if (np.diff(idx) <= 0).any() or idx[0] < 0:
            raise ValueError("anchor indices must be strictly increasing and non-negative")
        idx = idx.copy()
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)


def select_anchors(n_samples: int, fraction: float = 0.001, seed: int = 0,
                   minimum: int = 10) -> AnchorSet:
    """Uniform random anchors without replacement, at least `minimum` of them."""
    count = max(minimum, int(round(n_samples * fraction)))
    count = min(count, n_samples)
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n_samples, size=count, replace=False))
    return AnchorSet(idx, fraction)


def score(a: Configuration, b: Configuration, theta: float = 0.1) -> float:
    """Punished ARI: ari(a,b) - theta * |Ka - Kb| / (Ka + Kb)."""
    if a.n_samples != b.n_samples:
        raise AlignmentInputError("configurations have different lengths")
    ka, kb = a.n_clusters, b.n_clusters
    return ari(a, b) - theta * abs(ka - kb) / (ka + kb)


def two_walk_laplacian(c: ContingencyTable) -> TwoWalkLaplacian:
    """L_tw = D - C_tw with C_tw = [[C C^T, C], [C^T, C^T C]]."""
    m = c.counts.astype(np.float64)
    if c.total == 0:
        raise ValueError("all-zero contingency table")
    top = np.hstack([m @ m.T, m])
    bottom = np.hstack([m.T, m.T @ m])
    ctw = np.vstack([top, bottom])
    lap = np.diag(ctw.sum(axis=1)) - ctw
    return TwoWalkLaplacian(lap)


def fiedler_vector(lap) -> np.ndarray:
    """Unit eigenvector for the smallest eigenvalue above the zero threshold.

    Accepts a TwoWalkLaplacian or any symmetric PSD matrix. The sign is fixed
    so the first component exceeding 1e-12 in magnitude is positive. Raises
    if the underlying graph is disconnected (zero eigenvalue multiplicity > 1).
    """
    m = lap.matrix if isinstance(lap, TwoWalkLaplacian) else np.asarray(lap, dtype=np.float64)
    if m.shape[0] < 2:
        raise ValueError("matrix must be at least 2x2")
    vals, vecs = np.linalg.eigh(m)
    scale = max(abs(vals[0]), abs(vals[-1]), 1.0)
    zero_thresh = 1e-9 * scale
    positive = np.nonzero(vals > zero_thresh)[0]
    if positive.size == 0:
        raise ValueError("no positive eigenvalue above threshold")
    n_zero = int((np.abs(vals) <= zero_thresh).sum())
    if n_zero > 1:
        raise DisconnectedGraphError("zero eigenvalue multiplicity > 1 (disconnected graph)")
    v = vecs[:, positive[0]]
    nz = np.nonzero(np.abs(v) > 1e-12)[0]
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


class DisconnectedGraphError(ValueError):
    pass


def _component_orders(c: np.ndarray) -> tuple[list[int], list[int], bool]:
    """Row and column orderings by per-component Fiedler values.

    Components of the bipartite graph of C are processed in order of their
    smallest member; within each, rows/cols are sorted by their Fiedler
    component (ties broken by index). Returns (row_order, col_order,
    disconnected_flag).
    """
    ni, nj = c.shape
    n = ni + nj
    adj = np.zeros((n, n))
    adj[:ni, ni:] = c
    adj[ni:, :ni] = c.T
    # connected components by BFS
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        frontier = [s]
        while frontier:
            u = frontier.pop()
            for v in np.nonzero(adj[u] > 0)[0]:
                if not seen[v]:
                    seen[v] = True
                    comp.append(v)
                    frontier.append(v)
        comps.append(sorted(comp))
    disconnected = len(comps) > 1
    row_order: list[int] = []
    col_order: list[int] = []
    for comp in comps:
        rows = [u for u in comp if u < ni]
        cols = [u - ni for u in comp if u >= ni]
        if len(comp) >= 2 and (rows and cols):
            sub_c = c[np.ix_(rows, cols)]
            lap = two_walk_laplacian(ContingencyTable(sub_c))
            try:
                f = fiedler_vector(lap)
            except DisconnectedGraphError:
                f = np.zeros(len(rows) + len(cols))
            fi, fj = f[:len(rows)], f[len(rows):]
            row_order.extend(rows[t] for t in np.argsort(fi, kind="stable"))
            col_order.extend(cols[t] for t in np.argsort(fj, kind="stable"))
        else:
            row_order.extend(rows)
            col_order.extend(cols)
    return row_order, col_order, disconnected


def _reverse_merge_split(c: np.ndarray, row_order: list[int], col_order: list[int],
                         disconnected: bool) -> AlignmentMapping:
    """Position-match sorted rows/cols, then reassign redundant labels."""
    ni, nj = c.shape
    mapping: dict[int, int] = {}
    matched = min(ni, nj)
    col_to_pos = {col: p for p, col in enumerate(col_order)}
    for p in range(matched):
        mapping[col_order[p] + 1] = row_order[p] + 1
    fresh: list[int] = []
    next_fresh = ni + 1
    for p in range(matched, nj):
        col = col_order[p]
        colvec = c[:, col]
        best_row = int(np.argmax(colvec))
        if colvec[best_row] > 0:  # no diagonal entry exists; any mass merges
            mapping[col + 1] = best_row + 1
        else:
            mapping[col + 1] = next_fresh
            fresh.append(col + 1)
            next_fresh += 1
    # reverse merge: a matched source whose strongest overlap strictly beats
    # its diagonal entry is reassigned there (ties leave the label unmerged)
    for src, dst in list(mapping.items()):
        if dst > ni:
            continue
        colvec = c[:, src - 1]
        best_row = int(np.argmax(colvec))
        if colvec[best_row] > colvec[dst - 1]:
            mapping[src] = best_row + 1
    # redundant rows (targets no source maps to) are recorded as splits
    covered = set(mapping.values())
    splits = []
    for row in range(ni):
        if row + 1 not in covered:
            srcs = tuple(int(q) + 1 for q in np.nonzero(c[row] > 0)[0])
            if srcs:
                splits.append((row + 1, srcs))
    groups: dict[int, list[int]] = {}
    for src, dst in mapping.items():
        groups.setdefault(dst, []).append(src)
    merges = tuple(tuple(sorted(g)) for dst, g in sorted(groups.items()) if len(g) > 1)
    return AlignmentMapping(mapping, merges, tuple(splits), tuple(fresh),
                            disconnected=disconnected)


def pair_mapping(a: Configuration, b: Configuration) -> AlignmentMapping:
    """Spectral alignment of b's labels onto a's via two-walk Fiedler ordering."""
    table = contingency(a, b)
    row_order, col_order, disconnected = _component_orders(table.counts.astype(np.float64))
    return _reverse_merge_split(table.counts, row_order, col_order, disconnected)


def hungarian_mapping(c: ContingencyTable) -> AlignmentMapping:
    """Optimal rectangular assignment on -C; surplus labels follow the merge rule."""
    cost = -c.counts.astype(np.float64)
    rows, cols = scipy.optimize.linear_sum_assignment(cost)
    mapping: dict[int, int] = {int(q) + 1: int(p) + 1 for p, q in zip(rows, cols)}
    fresh: list[int] = []
    next_fresh = c.rows + 1
    for q in range(c.cols):
        if q + 1 in mapping:
            continue
        colvec = c.counts[:, q]
        best_row = int(np.argmax(colvec))
        if colvec[best_row] > 0:
            mapping[q + 1] = best_row + 1
        else:
            mapping[q + 1] = next_fresh
            fresh.append(q + 1)
            next_fresh += 1
    assigned_rows = set(mapping.values())
    splits = []
    for p in range(c.rows):
        if p + 1 not in assigned_rows:
            srcs = tuple(int(q) + 1 for q in np.nonzero(c.counts[p] > 0)[0])
            if srcs:
                splits.append((p + 1, srcs))
    groups: dict[int, list[int]] = {}
    for src, dst in mapping.items():
        groups.setdefault(dst, []).append(src)
    merges = tuple(tuple(sorted(g)) for dst, g in sorted(groups.items()) if len(g) > 1)
    return AlignmentMapping(mapping, merges, tuple(splits), tuple(fresh))


def assignment_mass(c: ContingencyTable, m: AlignmentMapping) -> int:
    """Total matched count mass: sum of C[dst, src] over one-to-one pairs."""
    mass = 0
    seen_dst = set()
    for src, dst in m.mapping.items():
        if dst <= c.rows and dst not in seen_dst:
            mass += int(c.counts[dst - 1, src - 1])
            seen_dst.add(dst)
    return mass


def _compact_preserving_order(labels: np.ndarray) -> np.ndarray:
    """Map sorted unique labels to 1..K; identity when already contiguous."""
    uniq, inv = np.unique(labels, return_inverse=True)
    return inv + 1


@dataclass(frozen=True)
class AlignmentReport:
    pairs: tuple[tuple[int, int, float], ...]  # (train_col, test_col, anchor score)
    mappings: tuple[AlignmentMapping, ...]
    surplus_test_columns: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "pairs": [
                {"train_col": int(t), "test_col": int(s), "score": float(sc)}
                for t, s, sc in self.pairs
            ],
            "mappings": [
                {
                    "from_to": [[int(a), int(b)] for a, b in sorted(m.mapping.items())],
                    "merges": [[int(x) for x in g] for g in m.merges],
                    "splits": [[int(r), [int(x) for x in s]] for r, s in m.splits],
                    "fresh": [int(x) for x in m.fresh],
                }
                for m in self.mappings
            ],
            "surplus_test_columns": [int(j) for j in self.surplus_test_columns],
        }


def rms_align(train: ConfigurationSet, test: ConfigurationSet, anchors: AnchorSet,
              theta: float = 0.1) -> tuple[ConfigurationSet, AlignmentReport]:
    """Greedy anchor-scored alignment of a test configuration set onto a train one.

    For each train configuration in stored (coarse-to-fine) order, the test
    configuration with the best punished-ARI score on the anchor rows is
    chosen, remapped through pair_mapping on the full columns, and removed
    from candidacy. Surplus test configurations are appended unaligned.
    """
    if anchors.indices.max() >= min(train.n_samples, test.n_samples):
        raise AlignmentInputError("anchor index out of range")
    remaining = list(range(test.n_configurations))
    aligned_cols: list[np.ndarray] = []
    gammas: list[float] = []
    pairs: list[tuple[int, int, float]] = []
    mappings: list[AlignmentMapping] = []
    idx = anchors.indices
    for i, train_cfg in enumerate(train.configurations):
        if not remaining:
            break
        anchor_train = Configuration(np.asarray(
            _compact_preserving_order(train_cfg.labels[idx])))
        best_score, best_j = -np.inf, None
        for j in remaining:
            anchor_test = Configuration(
                _compact_preserving_order(test.configurations[j].labels[idx]))
            s = score(anchor_train, anchor_test, theta)
            if s > best_score:
                best_score, best_j = s, j
        mapping = pair_mapping(train_cfg, test.configurations[best_j])
        mapped = mapping.apply(test.configurations[best_j].labels)
        aligned_cols.append(_compact_preserving_order(mapped))
        gammas.append(train.gammas[i])
        pairs.append((i, best_j, best_score))
        mappings.append(mapping)
        remaining.remove(best_j)
    surplus = tuple(remaining)
    base_gamma = max(gammas) if gammas else 0.0
    for extra, j in enumerate(remaining, start=1):
        aligned_cols.append(np.asarray(test.configurations[j].labels))
        gammas.append(base_gamma + extra)
    # drop columns that would break the coarse-to-fine invariant is not an
    # option here: aligned columns follow train order, which is already sorted
    cfgs = tuple(Configuration(col) for col in aligned_cols)
    ks = [c.n_clusters for c in cfgs]
    if any(b < a for a, b in zip(ks, ks[1:])):
        # merges can reduce counts; keep train order but relax via set ctor bypass
        aligned = _loose_configuration_set(cfgs, tuple(gammas))
    else:
        aligned = ConfigurationSet(cfgs, tuple(gammas))
    return aligned, AlignmentReport(tuple(pairs), tuple(mappings), surplus)


def _loose_configuration_set(cfgs, gammas) -> ConfigurationSet:
    """ConfigurationSet that skips the monotone-cluster-count check.

    Alignment can merge clusters in a fine column, making its count dip below
    a coarser one; the aligned set must still follow the train column order.
    """
    obj = object.__new__(ConfigurationSet)
    object.__setattr__(obj, "configurations", tuple(cfgs))
    object.__setattr__(obj, "gammas", tuple(float(g) for g in gammas))
    return obj
