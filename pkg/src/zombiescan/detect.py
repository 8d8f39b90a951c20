"""Flag zombie accounts as low outliers of each community's importance vector.

The fence is the classic boxplot lower whisker: threshold = Q1 - 1.5 * IQR
computed per community. A node is flagged when its value is strictly below
the threshold, so a community of identical values flags nobody. Communities
smaller than a configurable floor are skipped: quartiles of four numbers
say nothing.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .rank import ImportanceVector

__all__ = [
    "QUARTILE_METHODS",
    "quartiles",
    "iqr_threshold",
    "ZombieReport",
    "detect_zombies",
    "write_report_csv",
    "read_report_csv",
    "write_summary_json",
]

QUARTILE_METHODS = ("linear", "nearest")


def quartiles(values, method: str = "linear") -> tuple[float, float]:
    """(Q1, Q3) of a nonempty sample.

    "linear" places percentile p at fractional rank (n - 1) * p / 100 and
    interpolates; "nearest" rounds the rank to the closest order statistic.
    """
    data = np.sort(np.asarray(values, dtype=np.float64))
    if data.shape[0] == 0:
        raise ValidationError("quartiles of an empty sample")
    if method not in QUARTILE_METHODS:
        raise ValidationError(f"unknown quartile method {method!r}")

    def at(p: float) -> float:
        h = (data.shape[0] - 1) * p / 100.0
        if method == "nearest":
            return float(data[int(round(h))])
        lo = math.floor(h)
        hi = math.ceil(h)
        if lo == hi:
            return float(data[lo])
        return float(data[lo] + (h - lo) * (data[hi] - data[lo]))

    return at(25.0), at(75.0)


def iqr_threshold(values, method: str = "linear") -> float:
    """Lower fence Q1 - 1.5 * (Q3 - Q1); may be negative, flagging nothing."""
    q1, q3 = quartiles(values, method)
    return q1 - 1.5 * (q3 - q1)


@dataclass
class ZombieReport:
    """Per-node labels plus the aggregate zombie proportion.

    Arrays are aligned and sorted by node id. thresholds holds the fence of
    each node's community (NaN for communities below the size floor).
    """

    node_ids: np.ndarray
    community_ids: np.ndarray
    values: np.ndarray
    thresholds: np.ndarray
    is_zombie: np.ndarray
    method: str
    min_community_size: int
    communities: int
    skipped_small_communities: int = 0
    per_community_threshold: dict[int, float] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return int(self.node_ids.shape[0])

    @property
    def zombie_count(self) -> int:
        return int(self.is_zombie.sum())

    @property
    def proportion(self) -> float:
        return self.zombie_count / self.total if self.total else 0.0

    def zombie_nodes(self) -> np.ndarray:
        return self.node_ids[self.is_zombie]

    def labels(self) -> dict[int, bool]:
        return {int(n): bool(z) for n, z in zip(self.node_ids, self.is_zombie)}


def detect_zombies(ranks: dict[int, ImportanceVector], min_community_size: int = 5,
                   method: str = "linear") -> ZombieReport:
    """Label every ranked node; zombie means strictly below its community fence."""
    if not ranks:
        raise ValidationError("no communities to scan")
    if min_community_size < 1:
        raise ValidationError("min_community_size must be at least 1")

    nodes: list[np.ndarray] = []
    comms: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    thrs: list[np.ndarray] = []
    flags: list[np.ndarray] = []
    skipped = 0
    per_comm: dict[int, float] = {}
    for cid in sorted(ranks):
        vec = ranks[cid]
        size = vec.values.shape[0]
        nodes.append(vec.members)
        comms.append(np.full(size, cid, dtype=np.int64))
        vals.append(vec.values)
        if size >= min_community_size:
            threshold = iqr_threshold(vec.values, method)
            per_comm[cid] = threshold
            thrs.append(np.full(size, threshold))
            flags.append(vec.values < threshold)
        else:
            skipped += 1
            thrs.append(np.full(size, np.nan))
            flags.append(np.zeros(size, dtype=bool))

    node_ids = np.concatenate(nodes)
    order = np.argsort(node_ids, kind="stable")
    return ZombieReport(
        node_ids=node_ids[order],
        community_ids=np.concatenate(comms)[order],
        values=np.concatenate(vals)[order],
        thresholds=np.concatenate(thrs)[order],
        is_zombie=np.concatenate(flags)[order],
        method=method,
        min_community_size=min_community_size,
        communities=len(ranks),
        skipped_small_communities=skipped,
        per_community_threshold=per_comm,
    )


def write_report_csv(report: ZombieReport, destination) -> None:
    """Emit `node_id,community_id,pagerank,threshold,label` rows."""
    from .ingest import _text_stream

    with _text_stream(destination, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node_id", "community_id", "pagerank", "threshold", "label"])
        for i in range(report.total):
            thr = report.thresholds[i]
            writer.writerow([
                int(report.node_ids[i]),
                int(report.community_ids[i]),
                repr(float(report.values[i])),
                "" if math.isnan(thr) else repr(float(thr)),
                "zombie" if report.is_zombie[i] else "normal",
            ])


def read_report_csv(source) -> dict[int, bool]:
    """Predicted labels {node_id: is_zombie} from a report CSV."""
    from .ingest import _text_stream

    labels: dict[int, bool] = {}
    with _text_stream(source) as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["node_id", "community_id", "pagerank", "threshold", "label"]:
            raise ValidationError("report file must start with "
                                  "'node_id,community_id,pagerank,threshold,label'")
        for row in reader:
            if not row:
                continue
            try:
                labels[int(row[0])] = row[4] == "zombie"
            except (ValueError, IndexError):
                raise ValidationError(f"bad report row: {row!r}") from None
    return labels


def write_summary_json(report: ZombieReport, destination,
                       manifest_name: str | None = None) -> None:
    summary = {
        "communities": report.communities,
        "flagged": report.zombie_count,
        "total": report.total,
        "proportion": report.proportion,
        "method": report.method,
        "min_size": report.min_community_size,
        "skipped_small_communities": report.skipped_small_communities,
    }
    if manifest_name is not None:
        summary["manifest"] = manifest_name
    from .ingest import _text_stream

    with _text_stream(destination, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
