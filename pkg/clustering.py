"""
Curvature-aware clustering: discretize curvature into {-t, 0, t}, append it as an
extra coordinate and take single-linkage components at a strict distance threshold.
"""
import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from curvature import PointRecord, PointStatus
from error_handler import DataError
from pointcloud import PointCloud

logger = logging.getLogger(__name__)

DEFAULT_T = 4.0
DEFAULT_D = 0.5

_QUERY_PAD = 1e-9


class MissingCurvature(DataError):
    """Point without a curvature value where one is required"""


@dataclass(frozen=True)
class ClusterParams:
    """Scaling t, curvature threshold d and linkage threshold d' (t/2 unless given)"""
    t: float = DEFAULT_T
    d: float = DEFAULT_D
    d_prime: Optional[float] = None

    def __post_init__(self):
        for name in ("t", "d"):
            if not getattr(self, name) > 0:
                raise DataError(f"cluster parameter {name} must be > 0")
        if self.d_prime is None:
            object.__setattr__(self, "d_prime", self.t / 2.0)
        elif not self.d_prime > 0:
            raise DataError("cluster parameter d_prime must be > 0")
        if self.d_prime >= self.t:
            logger.warning(f"d'={self.d_prime} is not below t={self.t}; "
                           "the curvature coordinate cannot separate neighboring points")


@dataclass(frozen=True)
class ClusterLabeling:
    """Canonical partition: label 0 is the largest cluster, ties by smallest member"""
    labels: np.ndarray
    cluster_count: int
    merge_heights: Tuple[float, ...] = ()
    a_values: Optional[np.ndarray] = None
    flagged: Optional[np.ndarray] = None

    @property
    def sizes(self) -> List[int]:
        return np.bincount(self.labels, minlength=self.cluster_count).tolist()

    def members(self, label: int) -> np.ndarray:
        return np.flatnonzero(self.labels == label)


class UnionFind:
    """Disjoint sets over 0..size-1 with path compression and union by rank"""

    def __init__(self, size: int):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.components = size

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> bool:
        """Merge the sets of x and y; False if already joined"""
        x_root = self.find(x)
        y_root = self.find(y)
        if x_root == y_root:
            return False
        if self.rank[x_root] < self.rank[y_root]:
            x_root, y_root = y_root, x_root
        self.parent[y_root] = x_root
        if self.rank[x_root] == self.rank[y_root]:
            self.rank[x_root] += 1
        self.components -= 1
        return True


def discretize_curvature(c: Optional[float], t: float, d: float) -> float:
    """
    Three-level curvature code

    Args:
        c: Curvature value (None when the estimate failed)
        t: Scaling parameter
        d: Threshold; |c| <= d maps to 0

    Returns:
        -t, 0 or t
    """
    if c is None:
        raise MissingCurvature("point has no curvature value")
    if c < -d:
        return -t
    if c > d:
        return t
    return 0.0


def embed_with_curvature(cloud: PointCloud, a: Sequence[float]) -> PointCloud:
    """Map p_i to (p_i, a_i) in R^{n+1}"""
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (cloud.size,):
        raise DataError(f"need one value per point ({cloud.size}), got shape {a.shape}")
    return PointCloud(np.column_stack([cloud.points, a]), cloud.labels)


def _strict_edges(cloud: PointCloud, d_prime: float) -> Tuple[np.ndarray, np.ndarray]:
    tree = cKDTree(cloud.points)
    radius = d_prime * (1.0 + _QUERY_PAD) + np.finfo(float).tiny
    pairs = tree.query_pairs(radius, output_type="ndarray").astype(np.int64).reshape(-1, 2)
    if pairs.size == 0:
        return pairs, np.empty(0)
    distances = np.linalg.norm(cloud.points[pairs[:, 0]] - cloud.points[pairs[:, 1]], axis=1)
    keep = distances < d_prime
    return pairs[keep], distances[keep]


def canonical_labels(roots: Sequence[int]) -> Tuple[np.ndarray, int]:
    """Relabel components by decreasing size, ties broken by smallest member index"""
    groups: Dict[int, List[int]] = {}
    for i, root in enumerate(roots):
        groups.setdefault(root, []).append(i)
    ordered = sorted(groups.values(), key=lambda members: (-len(members), members[0]))
    labels = np.empty(len(roots), dtype=np.int64)
    for label, members in enumerate(ordered):
        labels[members] = label
    return labels, len(ordered)


def single_linkage_components(cloud: PointCloud, d_prime: float) -> ClusterLabeling:
    """
    Connected components of the graph joining points strictly closer than d'

    Args:
        cloud: Points to cluster (usually the curvature embedding)
        d_prime: Linkage threshold (> 0)

    Returns:
        ClusterLabeling with merge heights in increasing order
    """
    if not d_prime > 0:
        raise DataError(f"d_prime must be > 0, got {d_prime}")

    pairs, distances = _strict_edges(cloud, d_prime)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], distances)) if distances.size else np.empty(0, dtype=np.int64)

    forest = UnionFind(cloud.size)
    heights = []
    for k in order:
        if forest.union(int(pairs[k, 0]), int(pairs[k, 1])):
            heights.append(float(distances[k]))
            if forest.components == 1:
                break

    labels, count = canonical_labels([forest.find(i) for i in range(cloud.size)])
    labels.setflags(write=False)
    logger.debug(f"Single linkage at d'={d_prime}: {count} clusters from {distances.size} edges")
    return ClusterLabeling(labels=labels, cluster_count=count, merge_heights=tuple(heights))


def _level(record: PointRecord, params: ClusterParams) -> float:
    if record.ok:
        return discretize_curvature(record.curvature, params.t, params.d)
    if record.status is PointStatus.NO_NORMAL_DIRECTION:
        return params.t
    return 0.0


def curvature_clustering(cloud: PointCloud, records: Sequence[PointRecord], params: ClusterParams) -> ClusterLabeling:
    """
    Discretize, embed and single-link; failed points are flagged

    A point whose ball spans every ambient direction is bent beyond the scale of
    its ball and gets a(p)=t. Any other failed point gets a(p)=0.

    Args:
        cloud: Point cloud
        records: Per-point records aligned with the cloud
        params: Clustering parameters

    Returns:
        ClusterLabeling carrying a(p) and the failure flags
    """
    if len(records) != cloud.size:
        raise DataError(f"{len(records)} records for {cloud.size} points")

    flagged = np.array([not record.ok for record in records], dtype=bool)
    a = np.array([_level(record, params) for record in records])
    if flagged.any():
        full_rank = sum(1 for record in records if record.status is PointStatus.NO_NORMAL_DIRECTION)
        logger.info(f"{int(flagged.sum())} points without curvature: {full_rank} clustered with a(p)=t, "
                    f"the rest with a(p)=0")

    labeling = single_linkage_components(embed_with_curvature(cloud, a), params.d_prime)
    a.setflags(write=False)
    flagged.setflags(write=False)
    return replace(labeling, a_values=a, flagged=flagged)
