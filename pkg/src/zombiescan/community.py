"""Community detection by greedy modularity optimization (Louvain method).

Modularity compares the weight of intra-community edges against the
expectation under a degree-preserving random rewiring:

    Q = (1/2m) * sum_ij [A_ij - k_i * k_j / (2m)] * delta(c_i, c_j)

Two variants are exposed. "standard" sums over all ordered same-community
pairs including i = j; this is the quantity the greedy gain formula
optimizes and the one that is invariant under community aggregation.
"distinct-pairs" excludes the i = j terms. On a singleton partition the
distinct-pairs variant is exactly zero.

The optimizer alternates two phases: sweep nodes in a seeded random order,
moving each to the neighboring community with the largest positive gain,
until a full sweep changes nothing; then collapse communities into single
nodes (inter-community weights summed, intra-community weight becoming a
self-loop) and repeat on the smaller graph.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from random import Random

import numpy as np

from .errors import ValidationError
from .graph import DirectedGraph, SubgraphView, UndirectedGraph, induced_subgraph

__all__ = [
    "Partition",
    "LouvainConfig",
    "LouvainLevel",
    "Dendrogram",
    "modularity",
    "move_gain",
    "louvain",
    "community_views",
    "write_partition_csv",
    "read_partition_csv",
]


class Partition:
    """Assignment of every node to exactly one community.

    Community ids are dense in [0, C) and ordered by first appearance in
    node order, so equal groupings always compare equal.
    """

    __slots__ = ("assignment", "community_count", "_members")

    def __init__(self, assignment: np.ndarray):
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.ndim != 1:
            raise ValidationError("assignment must be one community id per node")
        uniq, dense = np.unique(assignment, return_inverse=True)
        # relabel by first appearance so ids are deterministic
        first_pos = np.full(uniq.shape[0], assignment.shape[0], dtype=np.int64)
        np.minimum.at(first_pos, dense, np.arange(assignment.shape[0]))
        rank = np.empty(uniq.shape[0], dtype=np.int64)
        rank[np.argsort(first_pos, kind="stable")] = np.arange(uniq.shape[0])
        self.assignment = rank[dense]
        self.community_count = int(uniq.shape[0])
        self._members: list[np.ndarray] | None = None

    @classmethod
    def singletons(cls, node_count: int) -> "Partition":
        return cls(np.arange(node_count))

    @property
    def node_count(self) -> int:
        return int(self.assignment.shape[0])

    def members(self, community: int) -> np.ndarray:
        """Sorted node ids of one community."""
        if self._members is None:
            order = np.argsort(self.assignment, kind="stable")
            bounds = np.searchsorted(self.assignment[order],
                                     np.arange(self.community_count + 1))
            self._members = [order[bounds[c]:bounds[c + 1]]
                             for c in range(self.community_count)]
        return self._members[community]

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.community_count)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return np.array_equal(self.assignment, other.assignment)

    def __hash__(self):
        return id(self)

    def __repr__(self) -> str:
        return f"Partition(nodes={self.node_count}, communities={self.community_count})"


def modularity(g: UndirectedGraph, p: Partition, variant: str = "standard") -> float:
    """Modularity of a partition; variant is "standard" or "distinct-pairs"."""
    if p.node_count != g.node_count:
        raise ValidationError(
            f"partition covers {p.node_count} nodes, graph has {g.node_count}")
    if variant not in ("standard", "distinct-pairs"):
        raise ValidationError(f"unknown modularity variant {variant!r}")
    m = g.total_weight
    if m <= 0:
        raise ValidationError("modularity is undefined for a graph without edges")
    two_m = 2.0 * m
    comm = p.assignment
    k = g.degree_weights
    # intra[c]: sum over ordered same-community row entries (diagonal once)
    rows = np.repeat(np.arange(g.node_count), np.diff(g.indptr))
    cols = g.indices
    same = comm[rows] == comm[cols]
    intra = np.bincount(comm[rows[same]], weights=g.weights[same],
                        minlength=p.community_count)
    tot = np.bincount(comm, weights=k, minlength=p.community_count)
    if variant == "standard":
        return float(np.sum(intra / two_m - (tot / two_m) ** 2))
    # exclude the i = j terms per community so singletons score exactly zero
    loops = same & (rows == cols)
    diag = np.bincount(comm[rows[loops]], weights=g.weights[loops],
                       minlength=p.community_count)
    sq = np.bincount(comm, weights=k * k, minlength=p.community_count)
    return float(np.sum((intra - diag) / two_m - (tot * tot - sq) / (two_m * two_m)))


def move_gain(g: UndirectedGraph, assignment: np.ndarray, node: int, target: int,
              resolution: float = 1.0) -> float:
    """Standard-modularity change from moving `node` into community `target`.

    Computed incrementally from community degree totals; matches a full
    recomputation of the standard variant to floating-point accuracy.
    """
    assignment = np.asarray(assignment, dtype=np.int64)
    m = g.total_weight
    if m <= 0:
        raise ValidationError("modularity gain undefined without edges")
    current = int(assignment[node])
    if current == target:
        return 0.0
    k = g.degree_weights
    ncomm = max(int(assignment.max()) + 1, target + 1)
    tot = np.bincount(assignment, weights=k, minlength=ncomm)
    ids, w = g.neighbors(node)
    k_in = np.zeros(ncomm)
    nonself = ids != node
    np.add.at(k_in, assignment[ids[nonself]], w[nonself])
    tot_cur = tot[current] - k[node]
    gain_stay = k_in[current] / m - resolution * tot_cur * k[node] / (2.0 * m * m)
    gain_move = k_in[target] / m - resolution * tot[target] * k[node] / (2.0 * m * m)
    return float(gain_move - gain_stay)


@dataclass(frozen=True)
class LouvainConfig:
    """Tuning knobs for the optimizer; defaults make desk-scale runs deterministic."""

    max_levels: int = 100
    min_gain: float = 1e-7
    seed: int = 0
    resolution: float = 1.0

    def __post_init__(self):
        if self.max_levels < 1:
            raise ValidationError("max_levels must be at least 1")
        if self.min_gain < 0:
            raise ValidationError("min_gain must be non-negative")
        if self.resolution <= 0:
            raise ValidationError("resolution must be positive")


@dataclass
class LouvainLevel:
    """One coarsening step: the partition found on that level's graph."""

    node_count: int
    assignment: np.ndarray
    modularity: float


@dataclass
class Dendrogram:
    """All levels of a run plus the flattened partition on the original nodes."""

    levels: list[LouvainLevel]
    partition: Partition

    def flattened(self) -> Partition:
        """Recompose the per-level assignments; equals `partition`."""
        n = self.partition.node_count
        labels = np.arange(n)
        for level in self.levels:
            labels = level.assignment[labels]
        return Partition(labels)


def _one_level(g: UndirectedGraph, rng: Random, resolution: float) -> tuple[np.ndarray, bool]:
    """Phase 1: greedy local moves until a full sweep changes nothing.

    Returns the (non-dense) assignment and whether any move was accepted.
    Ties keep the current community, then prefer the smallest community id.
    """
    n = g.node_count
    m = g.total_weight
    inv_m = 1.0 / m
    inv_2mm = resolution / (2.0 * m * m)
    k = g.degree_weights
    node_comm = np.arange(n)
    comm_tot = k.copy()

    order = list(range(n))
    rng.shuffle(order)
    improved = False

    indptr, indices, weights = g.indptr, g.indices, g.weights
    while True:
        moved = False
        for u in order:
            cu = int(node_comm[u])
            lo, hi = indptr[u], indptr[u + 1]
            nbrs = indices[lo:hi]
            wts = weights[lo:hi]
            links: dict[int, float] = {cu: 0.0}
            for v, w in zip(nbrs, wts):
                if v != u:
                    c = int(node_comm[v])
                    links[c] = links.get(c, 0.0) + float(w)

            ku = k[u]
            comm_tot[cu] -= ku
            best_c = cu
            best_gain = links[cu] * inv_m - comm_tot[cu] * ku * inv_2mm
            stay_gain = best_gain
            for c, kin in links.items():
                if c == cu:
                    continue
                gain = kin * inv_m - comm_tot[c] * ku * inv_2mm
                if gain > best_gain or (gain == best_gain and best_c != cu and c < best_c):
                    best_gain = gain
                    best_c = c
            if best_c != cu and best_gain > stay_gain:
                node_comm[u] = best_c
                moved = True
                improved = True
            comm_tot[node_comm[u]] += ku
        if not moved:
            break
    return node_comm, improved


def _aggregate(g: UndirectedGraph, p: Partition) -> UndirectedGraph:
    """Phase 2: one node per community; intra-community weight becomes a self-loop."""
    comm = p.assignment
    rows = np.repeat(np.arange(g.node_count), np.diff(g.indptr))
    cols = g.indices
    cu, cv, w = comm[rows], comm[cols], g.weights
    # each off-diagonal edge appears in both rows; keep one representative
    keep = (rows < cols) | (rows == cols)
    cu, cv, w = cu[keep], cv[keep], w[keep]
    intra = (cu == cv) & (rows[keep] != cols[keep])
    w = np.where(intra, 2.0 * w, w)  # both ordered pairs land on the diagonal
    return UndirectedGraph.from_edges(p.community_count, cu, cv, w)


def louvain(g: UndirectedGraph, cfg: LouvainConfig | None = None) -> Dendrogram:
    """Run the two-phase optimizer until gains fall below cfg.min_gain.

    The flattened partition's standard modularity is non-decreasing across
    levels. A graph with no edges yields the singleton partition.
    """
    cfg = cfg or LouvainConfig()
    if g.node_count == 0:
        raise ValidationError("graph has no nodes")
    if g.total_weight <= 0:
        return Dendrogram([], Partition.singletons(g.node_count))

    rng = Random(cfg.seed)
    levels: list[LouvainLevel] = []
    current = g
    prev_q: float | None = None
    for _ in range(cfg.max_levels):
        raw, improved = _one_level(current, rng, cfg.resolution)
        if not improved:
            break
        p = Partition(raw)
        q = modularity(current, p, "standard")
        levels.append(LouvainLevel(current.node_count, p.assignment, q))
        if prev_q is not None and q - prev_q < cfg.min_gain:
            break
        prev_q = q
        if p.community_count == current.node_count:
            break
        current = _aggregate(current, p)

    labels = np.arange(g.node_count)
    for level in levels:
        labels = level.assignment[labels]
    return Dendrogram(levels, Partition(labels))


def community_views(g: DirectedGraph, p: Partition) -> list[SubgraphView]:
    """One directed SubgraphView per community, indexed by community id."""
    if p.node_count != g.node_count:
        raise ValidationError(
            f"partition covers {p.node_count} nodes, graph has {g.node_count}")
    return [induced_subgraph(g, p.members(c)) for c in range(p.community_count)]


def write_partition_csv(p: Partition, destination, uids: list[str] | None = None) -> None:
    """Emit `node_id,community_id` rows; uids substitute for node ids when given."""
    from .ingest import _text_stream

    with _text_stream(destination, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "community_id"])
        for node in range(p.node_count):
            node_id = uids[node] if uids is not None else node
            writer.writerow([node_id, int(p.assignment[node])])


def read_partition_csv(source, node_count: int) -> Partition:
    """Read a partition written by write_partition_csv (dense node ids only)."""
    from .ingest import _text_stream

    assignment = np.full(node_count, -1, dtype=np.int64)
    with _text_stream(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node_id", "community_id"]:
            raise ValidationError("partition file must start with 'node_id,community_id'")
        for row in reader:
            if not row:
                continue
            try:
                node, comm = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise ValidationError(f"bad partition row: {row!r}") from None
            if not 0 <= node < node_count:
                raise ValidationError(f"node id {node} outside [0, {node_count})")
            if assignment[node] != -1:
                raise ValidationError(f"node {node} assigned twice")
            assignment[node] = comm
    if (assignment == -1).any():
        missing = int(np.argmax(assignment == -1))
        raise ValidationError(f"partition does not cover node {missing}")
    return Partition(assignment)
