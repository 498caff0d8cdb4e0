"""Resolution-parameter community detection and BlueRed-front discovery.

The clustering objective over a partition omega at resolution gamma is

    f(omega, gamma) = -attraction(omega) + gamma * repulsion(omega)

which is linear in gamma for fixed omega. The front is the lower envelope
of these lines over all partitions reachable by the Leiden-style optimizer,
discovered recursively by clustering at crossing points of adjacent lines.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numba import njit

from confmix.core import Configuration, ConfigurationSet, relabel_contiguous
from confmix.graph import AffinityGraph, ReweightParams, auto_k, knn_build, sgtsne_reweight, symmetrize
from confmix.core import FeatureMatrix

log = logging.getLogger("confmix.cluster")

MODES = ("cpm", "rb")


@dataclass(frozen=True)
class QualitySpec:
    mode: str = "cpm"
    gamma: float = 1.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")


@dataclass(frozen=True)
class FrontEntry:
    configuration: Configuration
    gamma_star: float
    attraction: float
    repulsion: float
    interval: tuple[float, float]  # [lo, hi) of dominance, hi == gamma_max for the last

    def objective(self, gamma: float) -> float:
        return -self.attraction + gamma * self.repulsion


@dataclass(frozen=True)
class BlueRedFront:
    entries: tuple[FrontEntry, ...]
    endpoint_coarse: Configuration  # all-in-one
    endpoint_fine: Configuration  # all-lonely
    gamma_max: float
    mode: str

    def nontrivial(self) -> list[FrontEntry]:
        return [e for e in self.entries
                if e.configuration != self.endpoint_coarse
                and e.configuration != self.endpoint_fine]


def _check_sizes(omega: Configuration, g: AffinityGraph) -> None:
    if omega.n_samples != g.n_vertices:
        raise ValueError("configuration and graph size mismatch")


def attraction(omega: Configuration, g: AffinityGraph) -> float:
    """Total edge weight with both endpoints in the same cluster (each edge once)."""
    _check_sizes(omega, g)
    coo = g.adjacency.tocoo()
    same = omega.labels[coo.row] == omega.labels[coo.col]
    return float(coo.data[same].sum()) / 2.0


def repulsion(omega: Configuration, g: AffinityGraph, mode: str = "cpm") -> float:
    """Partition penalty: within-cluster pairs (cpm) or sum vol_k^2 / 2W (rb)."""
    _check_sizes(omega, g)
    if mode == "cpm":
        sizes = omega.cluster_sizes().astype(np.float64)
        return float((sizes * (sizes - 1) / 2.0).sum())
    if mode == "rb":
        deg = np.asarray(g.adjacency.sum(axis=1)).ravel()
        total = float(g.adjacency.sum()) / 2.0
        if total <= 0:
            raise ValueError("rb repulsion undefined on a graph with zero total weight")
        vol = np.bincount(omega.labels, weights=deg, minlength=omega.n_clusters + 1)[1:]
        return float((vol * vol).sum() / (2.0 * total))
    raise ValueError(f"unknown mode {mode!r}")


def objective(omega: Configuration, g: AffinityGraph, gamma: float, mode: str = "cpm") -> float:
    return -attraction(omega, g) + gamma * repulsion(omega, g, mode)


def front_gamma_max(g: AffinityGraph, mode: str = "cpm") -> float:
    """A gamma beyond which the all-singleton partition is optimal."""
    if g.n_edges == 0:
        return 1.0
    w = g.adjacency.data
    if mode == "cpm":
        return float(w.max())
    deg = np.asarray(g.adjacency.sum(axis=1)).ravel()
    total = float(g.adjacency.sum()) / 2.0
    coo = g.adjacency.tocoo()
    return float((coo.data * total / (deg[coo.row] * deg[coo.col])).max())


# ---------------------------------------------------------------------------
# Leiden-style optimizer


class _Level:
    """One aggregation level: symmetric CSR graph with node sizes and strengths."""

    def __init__(self, adj: sp.csr_matrix, sizes: np.ndarray):
        self.adj = adj
        self.indptr = adj.indptr
        self.indices = adj.indices
        self.weights = adj.data
        self.n = adj.shape[0]
        self.sizes = sizes
        self.strength = np.asarray(adj.sum(axis=1)).ravel()
        self.total_w = float(adj.sum()) / 2.0


@njit(cache=True)
def _local_move_kernel(indptr, indices, weights, sizes, strength, comm,
                       gamma, cpm, inv_w, order, parent, use_parent):
    n = comm.shape[0]
    comm_size = np.zeros(n, np.float64)
    comm_vol = np.zeros(n, np.float64)
    comm_count = np.zeros(n, np.int64)
    for v in range(n):
        c = comm[v]
        comm_size[c] += sizes[v]
        comm_vol[c] += strength[v]
        comm_count[c] += 1

    # FIFO of currently-empty community ids (ring buffer; at most n live entries)
    cap = n + 1
    free_buf = np.empty(cap, np.int64)
    fh = 0
    ft = 0
    for c in range(n):
        if comm_count[c] == 0:
            free_buf[ft % cap] = c
            ft += 1

    queue = np.empty(cap, np.int64)
    qh = 0
    qt = 0
    in_queue = np.zeros(n, np.bool_)
    for i in range(n):
        queue[qt % cap] = order[i]
        qt += 1
        in_queue[order[i]] = True

    wtab = np.zeros(n, np.float64)  # weight from v to each touched community
    touched = np.empty(n, np.int64)
    moved_any = False
    while qh != qt:
        v = queue[qh % cap]
        qh += 1
        in_queue[v] = False
        cv = comm[v]
        ntouch = 0
        for ptr in range(indptr[v], indptr[v + 1]):
            j = indices[ptr]
            if j == v:
                continue
            if use_parent and parent[j] != parent[v]:
                continue
            cj = comm[j]
            if wtab[cj] == 0.0:
                touched[ntouch] = cj
                ntouch += 1
            wtab[cj] += weights[ptr]
        w_cur = wtab[cv]
        sv = sizes[v]
        kv = strength[v]
        if cpm:
            base = gamma * sv * (comm_size[cv] - sv)
        else:
            base = gamma * kv * (comm_vol[cv] - kv) * inv_w
        best_gain = -1e-12
        best_c = -1
        cand = np.sort(touched[:ntouch])  # tie-break: lowest community id
        for idx in range(ntouch):
            c = cand[idx]
            if c == cv:
                continue
            wc = wtab[c]
            if cpm:
                gain = -(wc - w_cur) + gamma * sv * comm_size[c] - base
            else:
                gain = -(wc - w_cur) + gamma * kv * comm_vol[c] * inv_w - base
            if gain < best_gain:
                best_gain = gain
                best_c = c
        # a fresh empty community models splitting v out
        if comm_count[cv] > 1 and fh != ft:
            c = free_buf[fh % cap]
            if c != cv:
                gain = w_cur - base
                if gain < best_gain:
                    best_gain = gain
                    best_c = c
        for idx in range(ntouch):
            wtab[touched[idx]] = 0.0
        if best_c < 0:
            continue
        moved_any = True
        comm_size[cv] -= sv
        comm_vol[cv] -= kv
        comm_count[cv] -= 1
        if comm_count[cv] == 0:
            free_buf[ft % cap] = cv
            ft += 1
        if comm_count[best_c] == 0 and fh != ft and free_buf[fh % cap] == best_c:
            fh += 1
        comm[v] = best_c
        comm_size[best_c] += sv
        comm_vol[best_c] += kv
        comm_count[best_c] += 1
        for ptr in range(indptr[v], indptr[v + 1]):
            j = indices[ptr]
            if j != v and not in_queue[j] and comm[j] != best_c:
                queue[qt % cap] = j
                qt += 1
                in_queue[j] = True
    return moved_any


def _local_move(level: _Level, comm: np.ndarray, gamma: float, mode: str,
                rng: np.random.Generator, parent: np.ndarray | None = None) -> bool:
    """Greedy single-node moves until no move lowers the objective.

    When `parent` is given, nodes may only join communities inside their
    parent community (the Leiden refinement constraint).
    """
    n = level.n
    inv_w = 1.0 / level.total_w if level.total_w > 0 else 0.0
    order = rng.permutation(n)
    use_parent = parent is not None
    parent_arr = (np.ascontiguousarray(parent, dtype=np.int64) if use_parent
                  else np.empty(0, dtype=np.int64))
    return bool(_local_move_kernel(
        level.indptr, level.indices,
        np.ascontiguousarray(level.weights, dtype=np.float64),
        np.ascontiguousarray(level.sizes, dtype=np.float64),
        np.ascontiguousarray(level.strength, dtype=np.float64),
        comm, float(gamma), mode == "cpm", inv_w, order, parent_arr, use_parent,
    ))


def _aggregate(level: _Level, groups: np.ndarray) -> tuple[_Level, np.ndarray]:
    """Collapse each group to a super-node; returns (new level, compact group ids)."""
    uniq, compact = np.unique(groups, return_inverse=True)
    m = uniq.size
    proj = sp.csr_matrix(
        (np.ones(level.n), (np.arange(level.n), compact)), shape=(level.n, m)
    )
    adj = (proj.T @ level.adj @ proj).tocsr()
    sizes = np.bincount(compact, weights=level.sizes, minlength=m)
    return _Level(adj, sizes), compact


def leiden_at_gamma(g: AffinityGraph, gamma: float, mode: str = "cpm", seed: int = 0,
                    init: np.ndarray | None = None) -> Configuration:
    """Local minimum of the partition objective at one gamma, Leiden scheme.

    Deterministic given the seed. Labels in the result are contiguous 1..K.
    """
    if g.directed:
        raise ValueError("clustering requires a symmetrized graph")
    if g.n_vertices == 0:
        raise ValueError("empty graph")
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    rng = np.random.default_rng(seed)
    n = g.n_vertices
    level = _Level(g.adjacency.tocsr(), np.ones(n))
    if init is not None:
        comm = np.asarray(relabel_contiguous(init).labels) - 1
    else:
        comm = np.arange(n)
    node_map = np.arange(n)  # original vertex -> current level node

    while True:
        _local_move(level, comm, gamma, mode, rng)
        n_comms = np.unique(comm).size
        if n_comms == level.n:
            break
        # refinement: merge from singletons, restricted within communities
        refined = np.arange(level.n)
        _local_move(level, refined, gamma, mode, rng, parent=comm)
        if np.unique(refined).size == level.n:
            break
        parent_of_refined = comm.copy()
        level, compact = _aggregate(level, refined)
        node_map = compact[node_map]
        # initial communities of super-nodes inherit the pre-refinement partition
        comm = np.zeros(level.n, dtype=np.int64)
        for node, grp in enumerate(compact):
            comm[grp] = parent_of_refined[node]
        comm = np.unique(comm, return_inverse=True)[1]

    labels = comm[node_map]
    # final sweeps on the base graph guarantee single-move optimality: a move
    # can re-open moves for members of the receiving community (it grew), and
    # those are not re-queued within one pass, so sweep until a full pass is
    # silent
    base = _Level(g.adjacency.tocsr(), np.ones(n))
    labels = np.unique(labels, return_inverse=True)[1].copy()
    while _local_move(base, labels, gamma, mode, rng):
        pass
    return relabel_contiguous(labels + 1)


# ---------------------------------------------------------------------------
# Descending triangulation


def _lower_envelope(lines: list[tuple[float, float, Configuration]], gamma_max: float):
    """Lower envelope of f = -A + gamma*R over (0, gamma_max].

    `lines` are (A, R, configuration). Returns (kept lines, crossing points).
    """
    # sort by slope R descending; among equal slopes keep only the largest A
    lines = sorted(lines, key=lambda t: (-t[1], -t[0]))
    dedup = []
    for ln in lines:
        if dedup and abs(dedup[-1][1] - ln[1]) <= 1e-15 * max(1.0, abs(ln[1])):
            continue
        dedup.append(ln)

    def crossing(p, q):  # gamma where line p hands over to q (R_p > R_q)
        return (p[0] - q[0]) / (p[1] - q[1])

    env: list[tuple[float, float, Configuration]] = []
    xs: list[float] = []  # xs[i] = crossing between env[i] and env[i+1]
    for ln in dedup:
        while env:
            x = crossing(env[-1], ln)
            if xs and x <= xs[-1]:
                env.pop()
                xs.pop()
            elif not xs and x <= 0:
                env.pop()
            else:
                xs.append(x)
                break
        env.append(ln)
    # clip to (0, gamma_max]
    while xs and xs[-1] >= gamma_max:
        env.pop()
        xs.pop()
    return env, xs


def descending_triangulation(g: AffinityGraph, mode: str = "cpm", seed: int = 0,
                             warm_start: bool = True, max_evals: int = 200,
                             min_width: float = 1e-6) -> BlueRedFront:
    """Recursive lower-envelope discovery of all dominant configurations.

    Starts from the all-in-one and all-lonely endpoints; clusters at the
    crossing gamma of each adjacent pair of objective lines and recurses
    whenever a strictly lower line is found. Pairs are processed widest
    relative gamma-gap first so the eval budget is spread across scales;
    `max_evals` caps the number of crossing-point clusterings and
    `min_width` (relative to gamma_max) prunes negligible gaps.
    """
    if g.directed:
        raise ValueError("front construction requires a symmetrized graph")
    n = g.n_vertices
    gamma_max = front_gamma_max(g, mode)
    omega0 = Configuration(np.ones(n, dtype=np.int64))
    omega_inf = Configuration(np.arange(1, n + 1, dtype=np.int64))

    def line(cfg: Configuration):
        return (attraction(cfg, g), repulsion(cfg, g, mode), cfg)

    found: dict[bytes, tuple[float, float, Configuration]] = {}

    def add(cfg: Configuration):
        key = cfg.labels.tobytes()
        if key not in found:
            found[key] = line(cfg)
        return key

    k0 = add(omega0)
    kinf = add(omega_inf)

    import heapq

    counter = 0
    heap: list = []

    def push(ka, kb, glo, ghi):
        nonlocal counter
        a_A, a_R, _ = found[ka]
        b_A, b_R, _ = found[kb]
        if a_R == b_R:
            return  # parallel lines: the higher-attraction one dominates
        gx = (a_A - b_A) / (a_R - b_R)
        if not np.isfinite(gx) or gx <= 0 or gx > gamma_max:
            return
        if ghi - glo < min_width * gamma_max:
            return
        # priority: relative width, scale-free in gamma so neither the
        # coarse end (tiny absolute gaps) nor the fine end starves the other
        rel = (ghi - glo) / ghi
        heapq.heappush(heap, (-rel, counter, ka, kb, gx, glo, ghi))
        counter += 1

    evals = 0
    seen_pairs = set()
    push(k0, kinf, 0.0, gamma_max)
    while heap and evals < max_evals:
        _, _, ka, kb, gx, glo, ghi = heapq.heappop(heap)
        if (ka, kb) in seen_pairs:
            continue
        seen_pairs.add((ka, kb))
        a_A, a_R, a_cfg = found[ka]
        b_cfg = found[kb][2]
        cfg = None
        best_f = np.inf
        # cold restarts: the local optimizer's reachable set depends on its
        # visit order, and crossing gammas sit exactly where two basins tie.
        # Small graphs get many restarts (runs are cheap and traps common);
        # large graphs keep few (smoother landscape, costly runs).
        n_restarts = 12 if n <= 64 else 2
        for r in range(n_restarts):
            cand = leiden_at_gamma(g, gx, mode, seed=seed + 101 * evals + r)
            f = objective(cand, g, gx, mode)
            if f < best_f:
                cfg, best_f = cand, f
        if warm_start:
            # warm starts from both neighbors: the coarse one seeds merges,
            # the fine one seeds splits the cold start's local optimum misses
            for init_cfg in (a_cfg, b_cfg):
                if init_cfg.n_clusters in (1, n):
                    continue
                warm = leiden_at_gamma(g, gx, mode, seed=seed + evals,
                                       init=init_cfg.labels)
                f = objective(warm, g, gx, mode)
                if f < best_f:
                    cfg, best_f = warm, f
        evals += 1
        kc = add(cfg)
        c_A, c_R, _ = found[kc]
        f_ab = -a_A + gx * a_R
        f_c = -c_A + gx * c_R
        if kc not in (ka, kb) and f_c < f_ab - 1e-12:
            push(ka, kc, glo, gx)
            push(kc, kb, gx, ghi)
    if evals >= max_evals:
        log.debug("descending triangulation stopped at max_evals=%d", max_evals)

    env, xs = _lower_envelope(list(found.values()), gamma_max)
    bounds = [0.0] + xs + [gamma_max]
    entries = []
    for (a, r, cfg), lo, hi in zip(env, bounds[:-1], bounds[1:]):
        if hi <= lo:
            continue
        entries.append(FrontEntry(
            configuration=cfg,
            gamma_star=0.5 * (lo + hi),
            attraction=a,
            repulsion=r,
            interval=(lo, hi),
        ))
    return BlueRedFront(tuple(entries), omega0, omega_inf, gamma_max, mode)


def _connectivity_k(x: FeatureMatrix, k0: int) -> int:
    """Smallest k >= k0 past which more neighbors stop reducing components.

    The log10-based convention can leave the graph shattered at desk-scale N;
    disconnected components can never merge under the partition objective, so
    k is escalated while it still improves connectivity. Plateaus in the
    component count are tolerated for a few steps (outlier islands often need
    two or three extra neighbors before they attach), so escalation only stops
    after `patience` consecutive increments bring no improvement.
    """
    import scipy.sparse.csgraph as csgraph

    n = x.n_samples
    patience = 3
    k = k0
    best_k, best_c = k0, n + 1
    stale = 0
    while k + 1 < n and k <= 3 * k0 + 10:
        g = knn_build(x, k)
        union = g.adjacency.maximum(g.adjacency.T)
        c = csgraph.connected_components(union, directed=False)[0]
        if c < best_c:
            best_k, best_c = k, c
            stale = 0
        else:
            stale += 1
        if c == 1 or stale >= patience:
            break
        k += 1
    return best_k


def front_configuration_set(front: BlueRedFront) -> ConfigurationSet:
    """Nontrivial front entries as a ConfigurationSet, coarse to fine.

    Cluster counts can genuinely dip along a true lower envelope (a skewed
    K=3 partition can carry more repulsion than a balanced K=2 one), but the
    configuration-set contract wants them non-decreasing; on an inversion the
    entry with the narrower dominance interval is dropped as the less
    representative scale.
    """
    entries = front.nontrivial()
    if not entries:
        raise ValueError("front contains no nontrivial configurations")

    def width(e: FrontEntry) -> float:
        return e.interval[1] - e.interval[0]

    kept: list[FrontEntry] = []
    for e in entries:
        while kept and e.configuration.n_clusters < kept[-1].configuration.n_clusters:
            if width(kept[-1]) <= width(e):
                kept.pop()
            else:
                e = None
                break
        if e is not None:
            kept.append(e)
    return ConfigurationSet(
        tuple(e.configuration for e in kept),
        tuple(e.gamma_star for e in kept),
    )


def extract_configurations(x: FeatureMatrix, k: int | None = None,
                           reweight: ReweightParams | None = ReweightParams(),
                           mode: str = "cpm", seed: int = 0) -> ConfigurationSet:
    """Full pipeline: kNN graph, reweighting, symmetrization, front extraction.

    Returns the front's nontrivial configurations (endpoints excluded),
    coarse to fine, with their dominant gamma values. With k=None the
    log10-based default is escalated until extra neighbors stop improving
    connectivity (disconnected components never merge under the objective).
    """
    if k is None:
        k = _connectivity_k(x, auto_k(x.n_samples))
        log.info("auto k resolved to %d", k)
    graph = knn_build(x, k)
    if reweight is not None:
        graph = sgtsne_reweight(graph, reweight)
    graph = symmetrize(graph)
    front = descending_triangulation(graph, mode=mode, seed=seed)
    return front_configuration_set(front)


def front_to_json(front: BlueRedFront) -> list[dict]:
    return [
        {
            "gamma_star": e.gamma_star,
            "interval": list(e.interval),
            "n_clusters": e.configuration.n_clusters,
            "attraction": e.attraction,
            "repulsion": e.repulsion,
        }
        for e in front.entries
    ]


def lineage_dot(cfgs: ConfigurationSet) -> str:
    """DOT digraph of cluster containment between consecutive configurations."""
    out = ["digraph lineage {", "  rankdir=TB;"]
    for lvl, cfg in enumerate(cfgs.configurations):
        for c in range(1, cfg.n_clusters + 1):
            size = int((cfg.labels == c).sum())
            out.append(f'  L{lvl}_{c} [label="L{lvl}.{c} (n={size})"];')
    for lvl in range(len(cfgs.configurations) - 1):
        coarse = cfgs.configurations[lvl].labels
        fine = cfgs.configurations[lvl + 1].labels
        for p in range(1, coarse.max() + 1):
            mask = coarse == p
            for q in np.unique(fine[mask]):
                cnt = int((fine[mask] == q).sum())
                out.append(f'  L{lvl}_{p} -> L{lvl + 1}_{q} [label="{cnt}"];')
    out.append("}")
    return "\n".join(out) + "\n"
