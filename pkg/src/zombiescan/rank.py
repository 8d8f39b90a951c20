"""Per-community importance ranking by damped power iteration.

Accounts inside one community are ranked by a random-walk stationary
weight. In "even" mode a node splits its weight equally over its
followees. In "uneven" mode the split is proportional to each followee's
IO credibility score

    io = fans / (followees + fans)

so that well-followed accounts absorb more weight and accounts that only
follow others absorb almost none. Nodes without outgoing arcs redistribute
their weight uniformly over the community, which keeps every iterate a
probability vector.
"""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .community import Partition, community_views
from .errors import ValidationError
from .graph import DirectedGraph, SubgraphView

log = logging.getLogger(__name__)

__all__ = [
    "IOScores",
    "RankConfig",
    "ImportanceVector",
    "io_score",
    "io_scores_for",
    "transition_weights",
    "pagerank",
    "rank_all_communities",
    "write_ranks_csv",
    "read_ranks_csv",
]


@dataclass
class IOScores:
    """Per-node credibility values in [0, 1], aligned with subgraph local ids."""

    values: np.ndarray
    fallback_count: int = 0  # nodes scored from local degrees for lack of profile data


def _io_values(io) -> np.ndarray:
    return np.asarray(io.values if isinstance(io, IOScores) else io, dtype=np.float64)


@dataclass(frozen=True)
class RankConfig:
    damping: float = 0.85
    tolerance: float = 1e-10
    max_iterations: int = 1000
    mode: str = "uneven"

    def __post_init__(self):
        if not 0.0 < self.damping <= 1.0:
            raise ValidationError("damping must be in (0, 1]")
        if self.tolerance <= 0:
            raise ValidationError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValidationError("max_iterations must be at least 1")
        if self.mode not in ("even", "uneven"):
            raise ValidationError("mode must be 'even' or 'uneven'")


@dataclass
class ImportanceVector:
    """Result of one community's power iteration.

    values are aligned with `members` (parent node ids, sorted) and sum to 1.
    """

    values: np.ndarray
    members: np.ndarray
    iterations: int
    residual: float
    converged: bool


def io_score(fan_num: int, follow_num: int) -> float:
    """Credibility ratio fans / (followees + fans); 0 when there is no evidence."""
    if fan_num < 0 or follow_num < 0:
        raise ValidationError("degree counts must be non-negative")
    total = fan_num + follow_num
    if total == 0:
        return 0.0
    return fan_num / total


def io_scores_for(subgraph: SubgraphView, source: str = "local",
                  profiles=None) -> IOScores:
    """IO scores for all members of a community.

    source "local" uses in/out degrees within the subgraph; "profile" uses
    global follower/followee counts, falling back to local degrees node by
    node when counts are missing (tallied on the result).
    """
    if source not in ("local", "profile"):
        raise ValidationError("io source must be 'local' or 'profile'")
    n = subgraph.node_count
    fans = subgraph.in_degrees.astype(np.float64)
    follows = subgraph.out_degrees.astype(np.float64)
    fallback = 0
    if source == "profile":
        if profiles is None:
            raise ValidationError("profile io source requires profiles")
        for local in range(n):
            parent = subgraph.to_parent(local)
            prof = profiles[parent] if parent < len(profiles) else None
            if prof is not None and prof.followers is not None and prof.followees is not None:
                fans[local] = prof.followers
                follows[local] = prof.followees
            else:
                fallback += 1
        if fallback:
            log.warning("%d of %d members lack profile counts; used local degrees",
                        fallback, n)
    total = fans + follows
    values = np.divide(fans, total, out=np.zeros(n), where=total > 0)
    return IOScores(values, fallback)


def transition_weights(subgraph: SubgraphView, io) -> np.ndarray:
    """Arc weights K aligned with the subgraph's out-adjacency.

    For each follower u, weight on arc u->v is io[v] / sum of io over u's
    followees; an all-zero denominator falls back to an even split so no
    walk weight is lost. Rows of non-dangling nodes sum to 1.
    """
    io = _io_values(io)
    n = subgraph.node_count
    if io.shape[0] != n:
        raise ValidationError("io scores must cover every subgraph member")
    weights = io[subgraph.out_indices]
    indptr = subgraph.out_indptr
    out_deg = np.diff(indptr)
    row_of = np.repeat(np.arange(n), out_deg)
    row_sum = np.bincount(row_of, weights=weights, minlength=n)
    even_rows = row_sum == 0
    row_sum_safe = np.where(even_rows, 1.0, row_sum)
    weights = weights / row_sum_safe[row_of]
    if even_rows.any():
        deg_per_arc = out_deg[row_of]
        weights = np.where(even_rows[row_of], 1.0 / deg_per_arc, weights)
    return weights


def _power_iterate(subgraph: SubgraphView, arc_weights: np.ndarray, damping: float):
    """Yield (vector, l1_residual) after each sweep, starting uniform."""
    n = subgraph.node_count
    targets = subgraph.out_indices
    row_of = np.repeat(np.arange(n), np.diff(subgraph.out_indptr))
    dangling = np.flatnonzero(subgraph.out_degrees == 0)
    x = np.full(n, 1.0 / n)
    base = (1.0 - damping) / n
    while True:
        inflow = np.bincount(targets, weights=arc_weights * x[row_of], minlength=n)
        dangling_mass = float(x[dangling].sum()) if dangling.size else 0.0
        new_x = base + damping * (inflow + dangling_mass / n)
        residual = float(np.abs(new_x - x).sum())
        x = new_x
        yield x, residual


def pagerank(subgraph: SubgraphView, cfg: RankConfig | None = None,
             io=None) -> ImportanceVector:
    """Importance of every member of one community; values sum to 1.

    Uneven mode requires io scores. Hitting the iteration cap returns the
    last iterate with converged=False; the caller decides what to do.
    """
    cfg = cfg or RankConfig()
    if subgraph.node_count == 0:
        raise ValidationError("cannot rank an empty subgraph")
    if cfg.mode == "uneven":
        if io is None:
            raise ValidationError("uneven mode requires io scores")
        arc_weights = transition_weights(subgraph, io)
    else:
        out_deg = np.diff(subgraph.out_indptr)
        arc_weights = 1.0 / out_deg[np.repeat(np.arange(subgraph.node_count), out_deg)] \
            if subgraph.arc_count else np.zeros(0)

    iterations = 0
    residual = float("inf")
    x = np.full(subgraph.node_count, 1.0 / subgraph.node_count)
    for x, residual in _power_iterate(subgraph, arc_weights, cfg.damping):
        iterations += 1
        if residual < cfg.tolerance or iterations >= cfg.max_iterations:
            break
    converged = residual < cfg.tolerance
    if not converged:
        log.warning("power iteration stopped at %d sweeps with residual %.3g",
                    iterations, residual)
    return ImportanceVector(x, subgraph.members.copy(), iterations, residual, converged)


def rank_all_communities(g: DirectedGraph, p: Partition, cfg: RankConfig | None = None,
                         profiles=None, io_source: str = "local",
                         workers: int = 1) -> dict[int, ImportanceVector]:
    """Rank every community independently; returns {community id: vector}.

    Communities do not interact, so they may be ranked on parallel workers;
    results are identical for any worker count.
    """
    cfg = cfg or RankConfig()
    views = community_views(g, p)

    def one(view: SubgraphView) -> ImportanceVector:
        io = io_scores_for(view, io_source, profiles) if cfg.mode == "uneven" else None
        return pagerank(view, cfg, io)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vectors = list(pool.map(one, views))
    else:
        vectors = [one(view) for view in views]
    return dict(enumerate(vectors))


def default_worker_count() -> int:
    """Worker count from the ZOMBIESCAN_THREADS environment variable (default 1)."""
    raw = os.environ.get("ZOMBIESCAN_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def write_ranks_csv(destination, g: DirectedGraph, p: Partition,
                    vectors: dict[int, ImportanceVector], profiles=None,
                    io_source: str = "local") -> None:
    """Emit `node_id,community_id,io,pagerank,converged` rows in node order."""
    from .graph import induced_subgraph
    from .ingest import _text_stream

    n = g.node_count
    io_col = np.zeros(n)
    pr_col = np.zeros(n)
    conv_col = np.ones(n, dtype=bool)
    for vec in vectors.values():
        pr_col[vec.members] = vec.values
        conv_col[vec.members] = vec.converged
    for cid in range(p.community_count):
        view = induced_subgraph(g, p.members(cid))
        io = io_scores_for(view, io_source, profiles)
        io_col[view.members] = io.values
    with _text_stream(destination, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "community_id", "io", "pagerank", "converged"])
        for node in range(n):
            writer.writerow([node, int(p.assignment[node]), repr(float(io_col[node])),
                             repr(float(pr_col[node])),
                             "true" if conv_col[node] else "false"])


def read_ranks_csv(source) -> dict[int, ImportanceVector]:
    """Rebuild per-community vectors from a ranks CSV."""
    from .ingest import _text_stream

    groups: dict[int, list[tuple[int, float, bool]]] = {}
    with _text_stream(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node_id", "community_id", "io", "pagerank", "converged"]:
            raise ValidationError("ranks file must start with "
                                  "'node_id,community_id,io,pagerank,converged'")
        for row in reader:
            if not row:
                continue
            try:
                node, cid = int(row[0]), int(row[1])
                value = float(row[3])
                converged = row[4] == "true"
            except (ValueError, IndexError):
                raise ValidationError(f"bad ranks row: {row!r}") from None
            groups.setdefault(cid, []).append((node, value, converged))

    vectors: dict[int, ImportanceVector] = {}
    for cid, entries in groups.items():
        entries.sort()
        members = np.asarray([e[0] for e in entries], dtype=np.int64)
        values = np.asarray([e[1] for e in entries])
        converged = all(e[2] for e in entries)
        vectors[cid] = ImportanceVector(values, members, 0, 0.0, converged)
    return vectors
