"""
Point-set storage, exact radius queries, diameter and the density-adaptive radius rule.
"""
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Optional, Sequence, TextIO, Union

import numpy as np
from plyfile import PlyData
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from error_handler import DataError

logger = logging.getLogger(__name__)

FORMATS = ("xyz", "csv", "ply-ascii")

# r = diameter / DENSITY_RADIUS_DIVISOR
DENSITY_RADIUS_DIVISOR = 10.0

# rows per cdist block when computing the exact diameter
_DIAMETER_BLOCK = 1024

# kd-tree candidates are gathered on a slightly larger ball, then filtered exactly
_QUERY_PAD = 1e-9


class ParseError(DataError):
    """Point file that does not parse under its declared format"""


class DimensionMismatch(DataError):
    """Query point whose dimension differs from the cloud's"""


class DegenerateCloud(DataError):
    """Cloud too small or too concentrated for a positive density radius"""


@dataclass(frozen=True)
class PointCloud:
    """Ordered, immutable set of N points in R^n"""
    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DataError(f"a point cloud needs shape (N>=1, n>=1), got {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise DataError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

        if self.labels is not None:
            labels = np.array(self.labels, dtype=np.int64)
            if labels.shape != (pts.shape[0],):
                raise DataError("labels must hold one integer per point")
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.size

    def take(self, indices: Sequence[int]) -> "PointCloud":
        """Sub-cloud (or permutation) in the given index order"""
        idx = np.asarray(indices, dtype=np.int64)
        labels = self.labels[idx] if self.labels is not None else None
        return PointCloud(self.points[idx], labels)


class SpatialIndex:
    """Exact radius-query structure over a PointCloud (kd-tree backed)"""

    def __init__(self, cloud: PointCloud):
        self._cloud = cloud
        self._tree = cKDTree(cloud.points)

    @property
    def cloud(self) -> PointCloud:
        return self._cloud

    def candidates(self, p: np.ndarray, eps: float) -> np.ndarray:
        """Superset of the open ball; callers filter with exact distances"""
        radius = eps * (1.0 + _QUERY_PAD) + np.finfo(float).tiny
        return np.asarray(self._tree.query_ball_point(p, radius), dtype=np.int64)


@dataclass(frozen=True)
class RadiusAssignment:
    """Per-point neighborhood radii eps(p) = 2*eta/N(p)"""
    r: float
    eta: float
    counts: np.ndarray
    epsilons: np.ndarray


def _read_source(source: Union[bytes, BinaryIO]) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    return source.read()


def _parse_delimited(data: bytes, fmt: str) -> np.ndarray:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError(f"{fmt} input is not valid UTF-8: {e}")

    rows = []
    arity = None
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split() if fmt == "xyz" else [tok.strip() for tok in stripped.split(",")]
        try:
            row = [float(tok) for tok in tokens]
        except ValueError:
            raise ParseError(f"line {line_no}: non-numeric token in {stripped!r}")
        if not np.all(np.isfinite(row)):
            raise ParseError(f"line {line_no}: non-finite coordinate")
        if arity is None:
            arity = len(row)
        elif len(row) != arity:
            raise ParseError(f"line {line_no}: expected {arity} values, found {len(row)}")
        rows.append(row)

    if not rows:
        raise ParseError(f"{fmt} input contains no points")
    return np.array(rows, dtype=np.float64)


def _parse_ply(data: bytes) -> np.ndarray:
    try:
        ply = PlyData.read(io.BytesIO(data))
    except Exception as e:
        raise ParseError(f"malformed PLY input: {e}")

    if "vertex" not in [element.name for element in ply.elements]:
        raise ParseError("PLY input has no vertex element")
    vertex = ply["vertex"]
    names = vertex.data.dtype.names or ()
    missing = [axis for axis in ("x", "y", "z") if axis not in names]
    if missing:
        raise ParseError(f"PLY vertex element lacks properties: {', '.join(missing)}")
    if vertex.count == 0:
        raise ParseError("PLY input contains no points")

    points = np.column_stack([np.asarray(vertex[axis], dtype=np.float64) for axis in ("x", "y", "z")])
    if not np.all(np.isfinite(points)):
        raise ParseError("PLY input contains non-finite coordinates")
    return points


def load_cloud(source: Union[bytes, BinaryIO], fmt: str = "xyz") -> PointCloud:
    """
    Parse a point cloud from a byte stream

    Args:
        source: Raw bytes or a binary file object
        fmt: One of xyz (whitespace separated), csv, ply-ascii

    Returns:
        PointCloud with points in file order
    """
    if fmt not in FORMATS:
        raise ParseError(f"unknown point format '{fmt}'")
    data = _read_source(source)
    points = _parse_ply(data) if fmt == "ply-ascii" else _parse_delimited(data, fmt)
    logger.debug(f"Loaded {points.shape[0]} points in R^{points.shape[1]} from {fmt}")
    return PointCloud(points)


def read_cloud(path: Union[str, Path], fmt: Optional[str] = None) -> PointCloud:
    """Load a cloud from disk, guessing the format from the suffix when not given"""
    path = Path(path)
    if fmt is None:
        fmt = {".csv": "csv", ".ply": "ply-ascii"}.get(path.suffix.lower(), "xyz")
    with open(path, "rb") as f:
        return load_cloud(f, fmt)


def format_float(value: float) -> str:
    """Shortest decimal that parses back to the identical double"""
    return repr(float(value))


def write_cloud(cloud: PointCloud, stream: TextIO, fmt: str = "xyz", with_labels: bool = False):
    """Write a cloud as xyz or csv, optionally with an integer part-label column"""
    if fmt not in ("xyz", "csv"):
        raise DataError(f"cannot write point format '{fmt}'")
    if with_labels and cloud.labels is None:
        raise DataError("cloud carries no part labels")
    sep = " " if fmt == "xyz" else ","
    for i, point in enumerate(cloud.points):
        fields = [format_float(v) for v in point]
        if with_labels:
            fields.append(str(int(cloud.labels[i])))
        stream.write(sep.join(fields) + "\n")


def ball_query(index: SpatialIndex, p: np.ndarray, eps: float) -> np.ndarray:
    """
    Indices of points strictly inside the open ball B(p; eps)

    Args:
        index: Spatial index of the cloud
        p: Query point in R^n
        eps: Ball radius (> 0)

    Returns:
        Sorted array of point indices i with ||p - p_i|| < eps
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (index.cloud.dim,):
        raise DimensionMismatch(f"query point has shape {p.shape}, cloud is in R^{index.cloud.dim}")
    if not eps > 0:
        raise DataError(f"ball radius must be > 0, got {eps}")

    candidates = index.candidates(p, eps)
    if candidates.size == 0:
        return candidates
    distances = np.linalg.norm(index.cloud.points[candidates] - p, axis=1)
    return np.sort(candidates[distances < eps])


def diameter(cloud: PointCloud) -> float:
    """Exact maximum pairwise Euclidean distance (0 for a single point)"""
    points = cloud.points
    best = 0.0
    for start in range(0, cloud.size, _DIAMETER_BLOCK):
        block = points[start:start + _DIAMETER_BLOCK]
        # pairs (i, j) with j >= start cover every unordered pair once
        best = max(best, float(cdist(block, points[start:]).max()))
    return best


def adaptive_radii(cloud: PointCloud, eta: float, index: Optional[SpatialIndex] = None) -> RadiusAssignment:
    """
    Density-adaptive radii: r = diameter/10, N(p) = #(X ∩ B(p; r)), eps(p) = 2*eta/N(p)

    Args:
        cloud: Point cloud with at least two distinct points
        eta: Positive scale parameter
        index: Prebuilt spatial index of the cloud (built when omitted)

    Returns:
        RadiusAssignment with per-point counts and radii
    """
    if not eta > 0:
        raise DataError(f"eta must be > 0, got {eta}")
    if cloud.size < 2:
        raise DegenerateCloud("adaptive radii need at least two points")
    diam = diameter(cloud)
    if diam == 0.0:
        raise DegenerateCloud("all points coincide; diameter is zero")

    index = index or SpatialIndex(cloud)
    r = diam / DENSITY_RADIUS_DIVISOR
    counts = np.array([ball_query(index, p, r).size for p in cloud.points], dtype=np.int64)
    epsilons = 2.0 * eta / counts
    counts.setflags(write=False)
    epsilons.setflags(write=False)
    logger.debug(f"Adaptive radii: r={r}, N(p) in [{counts.min()}, {counts.max()}]")
    return RadiusAssignment(r=r, eta=eta, counts=counts, epsilons=epsilons)


def subsample(cloud: PointCloud, n: int, seed: int) -> PointCloud:
    """Seeded uniform subset of n points without replacement, in original order"""
    if n >= cloud.size:
        return cloud
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    chosen = np.sort(rng.choice(cloud.size, size=n, replace=False))
    return cloud.take(chosen)
