"""kNN affinity graph: construction, stochastic normalization, Gaussian reweighting."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp

from confmix.core import FeatureMatrix

log = logging.getLogger("confmix.graph")


@dataclass(frozen=True)
class ReweightParams:
    """Parameters for the per-vertex Gaussian kernel bandwidth solve."""

    lam: float = 15.0
    bisection_tolerance: float = 1e-6
    max_iterations: int = 100
    sigma_bounds: tuple[float, float] = (1e-6, 1e6)

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lam must be >= 1")
        lo, hi = self.sigma_bounds
        if not (0 < lo < hi):
            raise ValueError("sigma_bounds must be ordered and positive")


@dataclass(frozen=True)
class AffinityGraph:
    """Sparse weighted graph over N vertices.

    `adjacency[i, j]` is the weight of edge i -> j (raw distance after
    knn_build, affinity after reweighting).
    """

    adjacency: sp.csr_matrix
    directed: bool = True
    stochastic: bool = False
    reweighted: bool = False
    symmetrized: bool = False
    k: int | None = None

    def __post_init__(self):
        a = sp.csr_matrix(self.adjacency, dtype=np.float64)
        a.eliminate_zeros()
        if a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if a.diagonal().any():
            raise ValueError("self-loops are not allowed")
        if a.nnz and (not np.all(np.isfinite(a.data)) or (a.data <= 0).any()):
            raise ValueError("weights must be positive and finite")
        object.__setattr__(self, "adjacency", a)

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return self.adjacency.nnz

    def out_distances(self, i: int) -> np.ndarray:
        a = self.adjacency
        return a.data[a.indptr[i]:a.indptr[i + 1]]


def auto_k(n_samples: int) -> int:
    """k = ceil(log10 N), floored at 3."""
    return max(3, math.ceil(math.log10(n_samples)))


def knn_build(x: FeatureMatrix, k: int | None = None, block: int = 1024) -> AffinityGraph:
    """Directed k-nearest-neighbor graph by Euclidean distance, raw-distance weights.

    Ties are broken toward the lower vertex index; the self vertex is excluded.
    """
    n = x.n_samples
    if k is None:
        k = auto_k(n)
    if k >= n:
        raise ValueError(f"k={k} must be < n_samples={n}")
    if k < 1:
        raise ValueError("k must be >= 1")
    v = x.values
    indices = np.empty((n, k), dtype=np.int64)
    dists = np.empty((n, k), dtype=np.float64)
    sq = (v * v).sum(axis=1)
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = sq[start:stop, None] - 2.0 * (v[start:stop] @ v.T) + sq[None, :]
        np.maximum(d2, 0.0, out=d2)
        for r, i in enumerate(range(start, stop)):
            d2[r, i] = np.inf
        # stable sort gives lower-index tie breaking
        order = np.argsort(d2, axis=1, kind="stable")[:, :k]
        indices[start:stop] = order
        dists[start:stop] = np.sqrt(np.take_along_axis(d2, order, axis=1))
    indptr = np.arange(0, n * k + 1, k)
    adj = sp.csr_matrix((dists.ravel(), indices.ravel(), indptr), shape=(n, n))
    # zero distances (duplicate points) would be dropped by the sparse format;
    # nudge them to a tiny positive weight so degree stays exactly k
    adj.data[adj.data == 0.0] = np.finfo(np.float64).tiny
    return AffinityGraph(adj, directed=True, k=k)


def column_stochastic(a: AffinityGraph) -> AffinityGraph:
    """Divide each column by its sum; empty columns are left empty."""
    adj = a.adjacency.tocsc(copy=True)
    sums = np.asarray(adj.sum(axis=0)).ravel()
    nonempty = np.diff(adj.indptr) > 0
    if (sums[nonempty] <= 0).any():
        raise ValueError("column with edges has non-positive sum")
    scale = np.ones_like(sums)
    scale[nonempty] = 1.0 / sums[nonempty]
    adj = (adj @ sp.diags(scale)).tocsr()
    return AffinityGraph(adj, directed=a.directed, stochastic=True,
                         reweighted=a.reweighted, symmetrized=a.symmetrized, k=a.k)


def solve_sigma(distances, params: ReweightParams = ReweightParams()) -> tuple[float, bool]:
    """Bandwidth sigma with sum_j exp(-d_j^2 / 2 sigma^2) = lam, by bisection.

    Returns (sigma, saturated). The kernel sum increases from 0 to len(distances)
    as sigma grows, so the target is unreachable when lam >= len(distances); in
    that case the upper sigma bound is returned with the saturation flag set.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.ndim != 1 or d.size == 0:
        raise ValueError("distances must be a non-empty 1-d sequence")
    if (d <= 0).any():
        raise ValueError("distances must be positive")
    lo, hi = params.sigma_bounds
    d2 = d * d

    def kernel_sum(sigma: float) -> float:
        return float(np.exp(-d2 / (2.0 * sigma * sigma)).sum())

    if params.lam >= d.size or kernel_sum(hi) < params.lam:
        return hi, True
    if kernel_sum(lo) > params.lam:
        return lo, True
    for _ in range(params.max_iterations):
        mid = 0.5 * (lo + hi)
        s = kernel_sum(mid)
        if abs(s - params.lam) <= params.bisection_tolerance:
            return mid, False
        if s < params.lam:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), False


def sgtsne_reweight(a: AffinityGraph, params: ReweightParams = ReweightParams()) -> AffinityGraph:
    """Replace raw-distance weights with w = (1/lam) exp(-d^2 / 2 sigma_i^2).

    sigma_i is solved per vertex over its out-edges so the kernel sum hits lam;
    the effective lam is clamped to k-1 when the vertex degree k makes the
    stated lam unreachable. Saturated vertices get uniform 1/k weights.
    """
    if a.reweighted:
        raise ValueError("graph is already reweighted")
    adj = a.adjacency.copy()
    n = a.n_vertices
    clamped = False
    for i in range(n):
        lo_ptr, hi_ptr = adj.indptr[i], adj.indptr[i + 1]
        d = adj.data[lo_ptr:hi_ptr]
        if d.size == 0:
            continue
        lam_eff = params.lam
        if lam_eff >= d.size:
            lam_eff = d.size - 1
            clamped = True
        if lam_eff < 1:
            adj.data[lo_ptr:hi_ptr] = 1.0 / d.size
            continue
        p = ReweightParams(lam=lam_eff, bisection_tolerance=params.bisection_tolerance,
                           max_iterations=params.max_iterations, sigma_bounds=params.sigma_bounds)
        sigma, saturated = solve_sigma(d, p)
        if saturated:
            adj.data[lo_ptr:hi_ptr] = 1.0 / d.size
        else:
            adj.data[lo_ptr:hi_ptr] = np.exp(-(d * d) / (2.0 * sigma * sigma)) / lam_eff
    if clamped:
        log.warning("lambda=%g unreachable at out-degree; clamped to degree-1", params.lam)
    return AffinityGraph(adj, directed=a.directed, stochastic=a.stochastic,
                         reweighted=True, symmetrized=a.symmetrized, k=a.k)


def symmetrize(a: AffinityGraph) -> AffinityGraph:
    """Undirected weights w'(i,j) = (w(i,j) + w(j,i)) / 2, absent edges as 0."""
    adj = ((a.adjacency + a.adjacency.T) * 0.5).tocsr()
    return AffinityGraph(adj, directed=False, stochastic=False,
                         reweighted=a.reweighted, symmetrized=True, k=a.k)


def save_graph(a: AffinityGraph, mm_path, header_path, lam: float | None = None) -> None:
    """Matrix Market coordinate file plus a sidecar JSON header."""
    scipy.io.mmwrite(str(mm_path), a.adjacency.tocoo(), field="real", symmetry="general")
    header = {
        "n_vertices": a.n_vertices,
        "k": a.k,
        "lambda": lam,
        "stochastic": a.stochastic,
        "reweighted": a.reweighted,
        "symmetrized": a.symmetrized,
    }
    with open(header_path, "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph(mm_path, header_path) -> AffinityGraph:
    adj = sp.csr_matrix(scipy.io.mmread(str(mm_path)))
    with open(header_path, "r", encoding="utf-8") as fh:
        header = json.load(fh)
    return AffinityGraph(
        adj,
        directed=not header.get("symmetrized", False),
        stochastic=header.get("stochastic", False),
        reweighted=header.get("reweighted", False),
        symmetrized=header.get("symmetrized", False),
        k=header.get("k"),
    )
