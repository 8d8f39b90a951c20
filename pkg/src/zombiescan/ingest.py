"""Parsers for the follower-network text formats and a binary graph cache.

The network file layout: a header line "N M", then N adjacency lines. Each
adjacency line is "v1 k" followed by 2k integers alternating target id and
relationship flag, where flag 1 marks a reciprocal follow. Any run of ASCII
whitespace separates tokens. Adjacency lines may appear in any node order.

The binary cache stores a parsed graph so the text parse runs once; the
layout is documented next to the reader below.
"""

from __future__ import annotations

import io
import logging
import struct
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import CacheError, ParseError, ValidationError
from .graph import DirectedGraph, build_graph, _index_dtype

log = logging.getLogger(__name__)

__all__ = [
    "RawNetwork",
    "UserProfile",
    "ProfileSchema",
    "parse_weibo_network",
    "write_weibo_network",
    "parse_uidlist",
    "write_uidlist",
    "parse_profiles",
    "write_profiles",
    "cache_save",
    "cache_load",
]


@dataclass
class RawNetwork:
    """Arc list as read from a network file, before graph construction."""

    node_count: int
    declared_edge_count: int
    sources: np.ndarray
    targets: np.ndarray
    flags: np.ndarray

    @property
    def arc_count(self) -> int:
        return int(self.sources.shape[0])

    def arc_triples(self) -> np.ndarray:
        return np.column_stack([self.sources, self.targets, self.flags])

    def to_graph(self) -> DirectedGraph:
        return build_graph(self.arc_triples(), self.node_count)


@contextmanager
def _text_stream(source, mode: str = "r"):
    """Yield a text stream for a path, text stream, or binary stream."""
    if isinstance(source, (str, Path)):
        with open(source, mode, encoding="ascii") as fh:
            yield fh
    elif isinstance(source, io.TextIOBase):
        yield source
    else:
        wrapper = io.TextIOWrapper(source, encoding="ascii", write_through=True)
        try:
            yield wrapper
        finally:
            wrapper.detach()


def _ints(line: str, lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in line.split()]
    except ValueError:
        raise ParseError("non-integer token", lineno) from None


def parse_weibo_network(source) -> RawNetwork:
    """Parse a network file into a RawNetwork.

    A mismatch between the declared edge count and the number of parsed
    arcs is logged as a warning, not raised; published counts for the same
    crawl are known to disagree with each other.
    """
    with _text_stream(source) as fh:
        header = fh.readline()
        if not header or not header.strip():
            raise ParseError("empty file", 1)
        head = _ints(header, 1)
        if len(head) != 2:
            raise ParseError("header must be two integers: node count and edge count", 1)
        n, declared_m = head
        if n < 0 or declared_m < 0:
            raise ParseError("negative count in header", 1)

        sources: list[np.ndarray] = []
        targets: list[np.ndarray] = []
        flags: list[np.ndarray] = []
        records = 0
        lineno = 1
        while records < n:
            line = fh.readline()
            lineno += 1
            if not line:
                raise ParseError(f"expected {n} adjacency records, found {records}", lineno)
            if not line.strip():
                continue
            nums = _ints(line, lineno)
            if len(nums) < 2:
                raise ParseError("adjacency record needs at least 'node_id k'", lineno)
            v1, k = nums[0], nums[1]
            if not 0 <= v1 < n:
                raise ParseError(f"node id {v1} outside [0, {n})", lineno)
            if k < 0:
                raise ParseError(f"negative neighbor count {k}", lineno)
            if len(nums) != 2 + 2 * k:
                raise ParseError(
                    f"record for node {v1} declares {k} neighbors but carries "
                    f"{len(nums) - 2} trailing numbers (expected {2 * k})", lineno)
            if k:
                tail = np.asarray(nums[2:], dtype=np.int64).reshape(k, 2)
                v2, fl = tail[:, 0], tail[:, 1]
                if ((v2 < 0) | (v2 >= n)).any():
                    raise ParseError(f"target id outside [0, {n})", lineno)
                if (~((fl == 0) | (fl == 1))).any():
                    raise ParseError("relationship flag must be 0 or 1", lineno)
                sources.append(np.full(k, v1, dtype=np.int64))
                targets.append(v2)
                flags.append(fl)
            records += 1
        rest = fh.read()
        if rest and rest.strip():
            raise ParseError("trailing content after the declared adjacency records",
                             lineno + 1)

    src = np.concatenate(sources) if sources else np.zeros(0, dtype=np.int64)
    dst = np.concatenate(targets) if targets else np.zeros(0, dtype=np.int64)
    fl = np.concatenate(flags) if flags else np.zeros(0, dtype=np.int64)
    if src.shape[0] != declared_m:
        log.warning("network declares %d relationships but %d arcs were parsed",
                    declared_m, src.shape[0])
    return RawNetwork(n, declared_m, src, dst, fl)


def write_weibo_network(raw_or_graph, destination) -> None:
    """Serialize a RawNetwork or DirectedGraph in the network text layout.

    Rows are emitted for every node in id order; a graph's flags are derived
    from arc reciprocity.
    """
    if isinstance(raw_or_graph, RawNetwork):
        n = raw_or_graph.node_count
        order = np.lexsort((raw_or_graph.targets, raw_or_graph.sources))
        src = raw_or_graph.sources[order]
        dst = raw_or_graph.targets[order]
        fl = raw_or_graph.flags[order]
        starts = np.searchsorted(src, np.arange(n + 1))

        def row(u: int):
            return zip(dst[starts[u]:starts[u + 1]], fl[starts[u]:starts[u + 1]])

        total = src.shape[0]
    else:
        g: DirectedGraph = raw_or_graph
        n = g.node_count
        total = g.edge_count

        def row(u: int):
            for v in g.out_neighbors(u):
                yield v, 1 if g.has_arc(int(v), u) else 0

    with _text_stream(destination, "w") as fh:
        fh.write(f"{n} {total}\n")
        for u in range(n):
            parts = []
            for v, flag in row(u):
                parts.append(str(int(v)))
                parts.append(str(int(flag)))
            fh.write(f"{u} {len(parts) // 2}")
            if parts:
                fh.write(" ")
                fh.write(" ".join(parts))
            fh.write("\n")


def parse_uidlist(source) -> list[tuple[int, str]]:
    """Read one external uid per line; line i maps to node id i."""
    with _text_stream(source) as fh:
        out: list[tuple[int, str]] = []
        lineno = 0
        while True:
            line = fh.readline()
            if not line:
                break
            lineno += 1
            uid = line.strip()
            if not uid:
                if fh.read(1):
                    raise ParseError("blank line inside uid list", lineno)
                break
            out.append((len(out), uid))
        if not out:
            raise ParseError("uid list is empty", 1)
        return out


def write_uidlist(uids: list[str], destination) -> None:
    with _text_stream(destination, "w") as fh:
        for uid in uids:
            fh.write(uid)
            fh.write("\n")


@dataclass
class UserProfile:
    """Per-account profile record; absent fields stay None."""

    node_id: int
    uid: str | None = None
    name: str | None = None
    gender: str | None = None
    verification: str | None = None
    region: str | None = None
    followers: int | None = None
    followees: int | None = None
    tweets: int | None = None


_PROFILE_TEXT_FIELDS = ("uid", "name", "gender", "verification", "region")
_PROFILE_INT_FIELDS = ("followers", "followees", "tweets")


@dataclass
class ProfileSchema:
    """Column order and delimiter of a profile file.

    The on-disk encoding is not standardized, so callers supply the layout.
    Use "_" for columns to ignore.
    """

    fields: tuple[str, ...] = ("uid", "name", "gender", "verification", "region",
                               "followers", "followees", "tweets")
    delimiter: str = "\t"

    def __post_init__(self):
        known = set(_PROFILE_TEXT_FIELDS) | set(_PROFILE_INT_FIELDS) | {"_"}
        for f in self.fields:
            if f not in known:
                raise ValidationError(f"unknown profile field {f!r}")


def parse_profiles(source, schema: ProfileSchema | None = None,
                   uidlist: list[tuple[int, str]] | None = None) -> list[UserProfile]:
    """Parse delimiter-separated profile records, one per node in file order.

    Unparseable numeric fields become None and are tallied in a warning.
    When a uidlist is supplied the record count must match it.
    """
    schema = schema or ProfileSchema()
    bad_numbers = 0
    uid_mismatches = 0
    profiles: list[UserProfile] = []
    with _text_stream(source) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cols = line.split(schema.delimiter)
            prof = UserProfile(node_id=len(profiles))
            for name, value in zip(schema.fields, cols):
                if name == "_":
                    continue
                value = value.strip()
                if name in _PROFILE_INT_FIELDS:
                    if value:
                        try:
                            setattr(prof, name, int(value))
                        except ValueError:
                            bad_numbers += 1
                    else:
                        bad_numbers += 1
                elif value:
                    setattr(prof, name, value)
            profiles.append(prof)

    if uidlist is not None:
        if len(profiles) != len(uidlist):
            raise ValidationError(
                f"profile file has {len(profiles)} records but uid list has {len(uidlist)}")
        for (_, uid), prof in zip(uidlist, profiles):
            if prof.uid is not None and prof.uid != uid:
                uid_mismatches += 1
    if bad_numbers:
        log.warning("%d numeric profile fields were blank or unparseable", bad_numbers)
    if uid_mismatches:
        log.warning("%d profile uids disagree with the uid list", uid_mismatches)
    return profiles


def write_profiles(profiles: list[UserProfile], destination,
                   schema: ProfileSchema | None = None) -> None:
    schema = schema or ProfileSchema()
    with _text_stream(destination, "w") as fh:
        for prof in profiles:
            cols = []
            for name in schema.fields:
                if name == "_":
                    cols.append("")
                    continue
                value = getattr(prof, name)
                cols.append("" if value is None else str(value))
            fh.write(schema.delimiter.join(cols))
            fh.write("\n")


# Binary cache layout (little-endian):
#   magic "ZGC1" | u32 version | u64 node_count | u64 edge_count
#   u64 out_indptr[node_count + 1]
#   u32 (or u64 when node_count > 2^32) deltas[edge_count]:
#     per out-adjacency row, first entry absolute, the rest successive
#     differences of the sorted target ids.
_CACHE_MAGIC = b"ZGC1"
_CACHE_VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


def _cache_index_dtype(node_count: int) -> np.dtype:
    return np.dtype("<u4") if node_count <= 0xFFFFFFFF else np.dtype("<u8")


def cache_save(g: DirectedGraph, path) -> None:
    """Write a graph to a versioned binary cache file."""
    deltas = g.out_indices.astype(np.int64, copy=True)
    if deltas.shape[0]:
        deltas[1:] -= g.out_indices[:-1]
        degrees = np.diff(g.out_indptr)
        starts = g.out_indptr[:-1][degrees > 0]
        deltas[starts] = g.out_indices[starts]
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_CACHE_MAGIC, _CACHE_VERSION, g.node_count, g.edge_count))
        fh.write(g.out_indptr.astype("<u8", copy=False).tobytes())
        fh.write(deltas.astype(_cache_index_dtype(g.node_count)).tobytes())


def cache_load(path) -> DirectedGraph:
    """Load a graph written by cache_save; raises CacheError on any mismatch."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise CacheError(f"cannot read cache: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise CacheError("cache file truncated: missing header")
    magic, version, n, m = _HEADER.unpack_from(blob)
    if magic != _CACHE_MAGIC:
        raise CacheError("not a graph cache file")
    if version != _CACHE_VERSION:
        raise CacheError(f"unsupported cache version {version}")
    n, m = int(n), int(m)
    idx_dtype = _cache_index_dtype(n)
    expected = _HEADER.size + 8 * (n + 1) + idx_dtype.itemsize * m
    if len(blob) != expected:
        raise CacheError(f"cache file truncated: {len(blob)} bytes, expected {expected}")
    offset = _HEADER.size
    indptr = np.frombuffer(blob, dtype="<u8", count=n + 1, offset=offset).astype(np.int64)
    offset += 8 * (n + 1)
    deltas = np.frombuffer(blob, dtype=idx_dtype, count=m, offset=offset).astype(np.int64)
    if indptr[0] != 0 or indptr[-1] != m or (np.diff(indptr) < 0).any():
        raise CacheError("corrupt adjacency offsets")
    if m:
        running = np.cumsum(deltas)
        row_start = np.repeat(indptr[:-1], np.diff(indptr))
        indices = running - running[row_start] + deltas[row_start]
        if (indices < 0).any() or (indices >= n).any():
            raise CacheError("corrupt adjacency indices")
    else:
        indices = deltas
    return DirectedGraph._from_out_csr(n, indptr, indices.astype(_index_dtype(n)))
