"""Synthetic follower graphs with planted communities and injected zombies.

Normal accounts follow each other by block-wise Bernoulli trials (dense
inside a block, sparse across blocks), optionally reciprocating. Zombie
accounts mimic fake followers: they follow many accounts inside their
block but almost nobody follows them back, so their credibility and
importance both collapse.

Generation is driven by numpy's PCG64 stream, so a config plus seed
reproduces a corpus exactly within one numpy generation; committed golden
corpora are the durable reference.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .graph import DirectedGraph, build_graph, _dedup_pairs
from .ingest import UserProfile, write_profiles, write_uidlist, write_weibo_network

log = logging.getLogger(__name__)

__all__ = ["SynthConfig", "GroundTruth", "generate", "emit_weibo_format",
           "write_truth_csv", "read_truth_csv"]

_DEFAULT_REGIONS = {"Beijing": 5.0, "Shanghai": 4.0, "Guangzhou": 3.0,
                    "Chengdu": 2.0, "Harbin": 1.0}


@dataclass(frozen=True)
class SynthConfig:
    block_sizes: tuple[int, ...] = (100, 100)
    p_in: float = 0.1
    p_out: float = 0.01
    reciprocity: float = 0.2
    zombie_fraction: float = 0.0
    zombie_out_degree: tuple[int, int] = (10, 20)
    zombie_max_in_degree: int = 1
    regions: dict[str, float] = field(default_factory=lambda: dict(_DEFAULT_REGIONS))
    seed: int = 0

    def __post_init__(self):
        if not self.block_sizes or min(self.block_sizes) < 1:
            raise ValidationError("block_sizes must be positive integers")
        for name, p in (("p_in", self.p_in), ("p_out", self.p_out),
                        ("reciprocity", self.reciprocity)):
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if not 0.0 <= self.zombie_fraction < 1.0:
            raise ValidationError("zombie_fraction must be in [0, 1)")
        lo, hi = self.zombie_out_degree
        if lo < 0 or hi < lo:
            raise ValidationError("zombie_out_degree must be a (lo, hi) range with lo <= hi")
        if self.zombie_max_in_degree < 0:
            raise ValidationError("zombie_max_in_degree must be non-negative")
        if not self.regions or min(self.regions.values()) < 0 \
                or sum(self.regions.values()) <= 0:
            raise ValidationError("regions need non-negative weights summing above 0")

    @property
    def node_count(self) -> int:
        return sum(self.block_sizes)

    @classmethod
    def from_json(cls, source) -> "SynthConfig":
        data = json.loads(Path(source).read_text()) if isinstance(source, (str, Path)) \
            else json.load(source)
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown synth config keys: {sorted(unknown)}")
        if "block_sizes" in data:
            data["block_sizes"] = tuple(data["block_sizes"])
        if "zombie_out_degree" in data:
            data["zombie_out_degree"] = tuple(data["zombie_out_degree"])
        return cls(**data)

    def to_json_dict(self) -> dict:
        return {
            "block_sizes": list(self.block_sizes),
            "p_in": self.p_in,
            "p_out": self.p_out,
            "reciprocity": self.reciprocity,
            "zombie_fraction": self.zombie_fraction,
            "zombie_out_degree": list(self.zombie_out_degree),
            "zombie_max_in_degree": self.zombie_max_in_degree,
            "regions": dict(self.regions),
            "seed": self.seed,
        }


@dataclass
class GroundTruth:
    """What the generator planted, for scoring detections later."""

    block_ids: np.ndarray
    is_zombie: np.ndarray
    regions: list[str]

    @property
    def node_count(self) -> int:
        return int(self.block_ids.shape[0])

    def zombie_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.is_zombie)

    def labels(self) -> dict[int, bool]:
        return {i: bool(z) for i, z in enumerate(self.is_zombie)}


def _zombie_allocation(cfg: SynthConfig) -> list[int]:
    """Zombies per block: round(fraction * N) split by largest remainder."""
    n = cfg.node_count
    total = int(math.floor(cfg.zombie_fraction * n + 0.5))
    quotas = [total * size / n for size in cfg.block_sizes]
    counts = [math.floor(q) for q in quotas]
    remainder = total - sum(counts)
    by_frac = sorted(range(len(quotas)), key=lambda b: (-(quotas[b] - counts[b]), b))
    for b in by_frac[:remainder]:
        counts[b] += 1
    return counts


def generate(cfg: SynthConfig) -> tuple[DirectedGraph, GroundTruth, list[UserProfile]]:
    """Build (graph, truth, profiles) deterministically from the config seed."""
    if cfg.p_in <= cfg.p_out:
        log.warning("p_in (%g) <= p_out (%g): planted blocks will not be detectable",
                    cfg.p_in, cfg.p_out)
    n = cfg.node_count
    starts = np.concatenate([[0], np.cumsum(cfg.block_sizes)])
    block_ids = np.repeat(np.arange(len(cfg.block_sizes)), cfg.block_sizes)

    zombie_counts = _zombie_allocation(cfg)
    is_zombie = np.zeros(n, dtype=bool)
    for b, z in enumerate(zombie_counts):
        if z:
            is_zombie[starts[b + 1] - z:starts[b + 1]] = True  # last z ids of the block

    lo, hi = cfg.zombie_out_degree
    for b, z in enumerate(zombie_counts):
        normals_in_block = cfg.block_sizes[b] - z
        if z and hi > normals_in_block:
            raise ValidationError(
                f"block {b} has {normals_in_block} normal accounts but zombies "
                f"need up to {hi} targets")
        if z and cfg.zombie_max_in_degree > normals_in_block:
            raise ValidationError(
                f"block {b} has {normals_in_block} normal accounts but zombies "
                f"allow up to {cfg.zombie_max_in_degree} fans")

    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    src_parts: list[np.ndarray] = []
    dst_parts: list[np.ndarray] = []

    normal_by_block = [np.flatnonzero(~is_zombie & (block_ids == b))
                       for b in range(len(cfg.block_sizes))]

    # 1) block-wise Bernoulli arcs among normal accounts
    for a in range(len(cfg.block_sizes)):
        for b in range(len(cfg.block_sizes)):
            p = cfg.p_in if a == b else cfg.p_out
            rows, cols = normal_by_block[a], normal_by_block[b]
            if p == 0.0 or rows.size == 0 or cols.size == 0:
                continue
            hits = rng.random((rows.size, cols.size)) < p
            if a == b:
                np.fill_diagonal(hits, False)
            i, j = np.nonzero(hits)
            src_parts.append(rows[i])
            dst_parts.append(cols[j])

    # 2) reciprocation of the Bernoulli arcs
    if src_parts:
        src = np.concatenate(src_parts)
        dst = np.concatenate(dst_parts)
    else:
        src = np.zeros(0, dtype=np.int64)
        dst = np.zeros(0, dtype=np.int64)
    if cfg.reciprocity > 0 and src.size:
        back = rng.random(src.size) < cfg.reciprocity
        src, dst = np.concatenate([src, dst[back]]), np.concatenate([dst, src[back]])
    srcs = [src]
    dsts = [dst]

    # 3) zombie out-arcs and the few fans they are allowed
    for b, z in enumerate(zombie_counts):
        if not z:
            continue
        normals = normal_by_block[b]
        for zombie in range(starts[b + 1] - z, starts[b + 1]):
            out_deg = int(rng.integers(lo, hi + 1))
            if out_deg:
                targets = rng.choice(normals, size=out_deg, replace=False)
                srcs.append(np.full(out_deg, zombie, dtype=np.int64))
                dsts.append(targets)
            fans = int(rng.integers(0, cfg.zombie_max_in_degree + 1))
            if fans:
                followers = rng.choice(normals, size=fans, replace=False)
                srcs.append(followers)
                dsts.append(np.full(fans, zombie, dtype=np.int64))

    # reciprocation can resample an arc that already exists; drop repeats here
    # so the built graph carries no warning tallies
    all_src, all_dst = _dedup_pairs(np.concatenate(srcs).astype(np.int64),
                                    np.concatenate(dsts).astype(np.int64))

    # 4) regions
    labels = sorted(cfg.regions)
    weights = np.asarray([cfg.regions[r] for r in labels], dtype=np.float64)
    regions = [labels[i] for i in rng.choice(len(labels), size=n, p=weights / weights.sum())]

    arcs = np.column_stack([all_src, all_dst, np.zeros(all_src.shape[0], dtype=np.int64)])
    graph = build_graph(arcs, n)
    truth = GroundTruth(block_ids, is_zombie, regions)
    profiles = [
        UserProfile(node_id=i, uid=str(1_000_000 + i), name=f"user_{i}",
                    gender="f" if i % 2 else "m",
                    verification="no", region=regions[i],
                    followers=graph.in_degree(i), followees=graph.out_degree(i),
                    tweets=0)
        for i in range(n)
    ]
    return graph, truth, profiles


def write_truth_csv(truth: GroundTruth, destination) -> None:
    """Emit `node_id,block_id,is_zombie,region` rows."""
    from .ingest import _text_stream

    with _text_stream(destination, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "block_id", "is_zombie", "region"])
        for i in range(truth.node_count):
            writer.writerow([i, int(truth.block_ids[i]),
                             1 if truth.is_zombie[i] else 0, truth.regions[i]])


def read_truth_csv(source) -> GroundTruth:
    from .ingest import _text_stream

    blocks: list[int] = []
    zombies: list[bool] = []
    regions: list[str] = []
    with _text_stream(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node_id", "block_id", "is_zombie", "region"]:
            raise ValidationError("truth file must start with "
                                  "'node_id,block_id,is_zombie,region'")
        for row in reader:
            if not row:
                continue
            try:
                node = int(row[0])
                if node != len(blocks):
                    raise ValueError
                blocks.append(int(row[1]))
                zombies.append(row[2] in ("1", "true", "True"))
                regions.append(row[3])
            except (ValueError, IndexError):
                raise ValidationError(f"bad truth row: {row!r}") from None
    if not blocks:
        raise ValidationError("truth file is empty")
    return GroundTruth(np.asarray(blocks, dtype=np.int64),
                       np.asarray(zombies, dtype=bool), regions)


def emit_weibo_format(g: DirectedGraph, truth: GroundTruth,
                      profiles: list[UserProfile], out_dir) -> dict[str, Path]:
    """Write the network/uidlist/profile/truth files for a generated corpus."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "network": out / "weibo_network.txt",
        "uidlist": out / "uidlist.txt",
        "profiles": out / "user_profile.txt",
        "truth": out / "truth.csv",
    }
    write_weibo_network(g, paths["network"])
    write_uidlist([p.uid or str(i) for i, p in enumerate(profiles)], paths["uidlist"])
    write_profiles(profiles, paths["profiles"])
    write_truth_csv(truth, paths["truth"])
    return paths
