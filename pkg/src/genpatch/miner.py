"""Group hunks by shape key and classify how each group spreads."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ClusterMember:
    hunk_id: str
    patch_id: str
    project_id: str = ""
    file_path: str = ""
    function_name: str | None = None

    def to_dict(self) -> dict:
        return {
            "hunk_id": self.hunk_id,
            "patch_id": self.patch_id,
            "project_id": self.project_id,
            "file_path": self.file_path,
            "function_name": self.function_name,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterMember":
        return cls(d["hunk_id"], d["patch_id"], d.get("project_id", ""), d.get("file_path", ""), d.get("function_name"))


@dataclass(frozen=True)
class KeyedHunk:
    member: ClusterMember
    key: str  # canonical shape-key text


@dataclass(frozen=True)
class PatchCluster:
    cluster_id: str
    shape_key: str
    members: tuple[ClusterMember, ...]
    is_vertical: bool
    is_horizontal: bool

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("a cluster needs at least two members")
        if not (self.is_vertical or self.is_horizontal):
            raise ValueError("a cluster is vertical, horizontal or both")

    @property
    def size(self) -> int:
        return len(self.members)

    def to_dict(self) -> dict:
        return {
            "id": self.cluster_id,
            "key": self.shape_key,
            "size": self.size,
            "vertical": self.is_vertical,
            "horizontal": self.is_horizontal,
            "members": [m.to_dict() for m in self.members],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PatchCluster":
        return cls(
            d["id"], d["key"], tuple(ClusterMember.from_dict(m) for m in d["members"]), d["vertical"], d["horizontal"]
        )


@dataclass(frozen=True)
class ClusterStats:
    total_hunks: int
    unique_hunks: int
    clusterable_hunks: int
    cluster_count: int
    size_histogram: dict[int, int] = field(default_factory=dict)
    vertical_count: int = 0
    horizontal_count: int = 0
    both_count: int = 0

    def to_dict(self) -> dict:
        return {
            "total_hunks": self.total_hunks,
            "unique_hunks": self.unique_hunks,
            "clusterable_hunks": self.clusterable_hunks,
            "cluster_count": self.cluster_count,
            "size_histogram": {str(k): v for k, v in sorted(self.size_histogram.items())},
            "vertical": self.vertical_count,
            "horizontal": self.horizontal_count,
            "both": self.both_count,
        }


def classify_spread(members) -> tuple[bool, bool]:
    """(vertical, horizontal) for a group of at least two members."""
    members = list(members.members if isinstance(members, PatchCluster) else members)
    if len(members) < 2:
        raise ValueError("spread is defined for clusters of size >= 2")
    per_patch = Counter(m.patch_id for m in members)
    return max(per_patch.values()) >= 2, len(per_patch) >= 2


def cluster_id_for(key: str) -> str:
    from .editscript import ShapeKey

    return ShapeKey(key).digest


def cluster(hunks) -> tuple[list[PatchCluster], ClusterStats]:
    groups: dict[str, list[ClusterMember]] = defaultdict(list)
    total = 0
    for kh in hunks:
        groups[kh.key].append(kh.member)
        total += 1
    clusters = []
    unique = 0
    for key, members in groups.items():
        if len(members) == 1:
            unique += 1
            continue
        members = sorted(members, key=lambda m: (m.patch_id, m.hunk_id))
        vertical, horizontal = classify_spread(members)
        clusters.append(PatchCluster(cluster_id_for(key), key, tuple(members), vertical, horizontal))
    clusters.sort(key=lambda c: (-c.size, c.cluster_id))
    hist = Counter(c.size for c in clusters)
    stats = ClusterStats(
        total_hunks=total,
        unique_hunks=unique,
        clusterable_hunks=total - unique,
        cluster_count=len(clusters),
        size_histogram=dict(sorted(hist.items())),
        vertical_count=sum(c.is_vertical for c in clusters),
        horizontal_count=sum(c.is_horizontal for c in clusters),
        both_count=sum(c.is_vertical and c.is_horizontal for c in clusters),
    )
    return clusters, stats


def dump_clusters(clusters) -> str:
    return "".join(json.dumps(c.to_dict(), sort_keys=True) + "\n" for c in clusters)


def load_clusters(text: str) -> list[PatchCluster]:
    return [PatchCluster.from_dict(json.loads(line)) for line in text.splitlines() if line.strip()]
