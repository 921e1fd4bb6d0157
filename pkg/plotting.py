"""
SVG figures for the CLI: point clouds colored by curvature or cluster label and
curvature histograms.
"""
import logging
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from clustering import ClusterLabeling  # noqa: E402
from config import settings  # noqa: E402
from curvature import PointRecord  # noqa: E402
from pointcloud import PointCloud  # noqa: E402

logger = logging.getLogger(__name__)

# fixed ids and no date keep repeated renders identical
plt.rcParams["svg.hashsalt"] = "curvature"
_SVG_METADATA = {"Date": None}


def _save(fig, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, format="svg", dpi=settings.svg_dpi, metadata=_SVG_METADATA)
    plt.close(fig)
    logger.debug(f"Figure written to {path}")


def _scatter(fig, cloud: PointCloud, colors: np.ndarray, mask: np.ndarray, cmap: str, title: str):
    points = cloud.points
    if cloud.dim >= 3:
        ax = fig.add_subplot(projection="3d")
        if (~mask).any():
            ax.scatter(*points[~mask, :3].T, c="lightgrey", s=2)
        sc = ax.scatter(*points[mask, :3].T, c=colors[mask], cmap=cmap, s=2)
    else:
        ax = fig.add_subplot()
        ys = points[:, 1] if cloud.dim == 2 else np.zeros(cloud.size)
        if (~mask).any():
            ax.scatter(points[~mask, 0], ys[~mask], c="lightgrey", s=2)
        sc = ax.scatter(points[mask, 0], ys[mask], c=colors[mask], cmap=cmap, s=2)
        ax.set_aspect("equal")
    ax.set_title(title)
    return sc


def plot_curvature_cloud(cloud: PointCloud, records: Sequence[PointRecord], path: Union[str, Path]):
    """Scatter of the first three coordinates colored by curvature; failed points in grey"""
    ok = np.array([r.ok for r in records], dtype=bool)
    values = np.array([r.curvature if r.ok else 0.0 for r in records], dtype=np.float64)
    fig = plt.figure(figsize=(6, 5))
    sc = _scatter(fig, cloud, values, ok, "coolwarm", f"Curvature ({int(ok.sum())}/{cloud.size} ok)")
    if ok.any():
        fig.colorbar(sc, label="det(a_ij)")
    _save(fig, path)


def plot_dimension_cloud(cloud: PointCloud, records: Sequence[PointRecord], path: Union[str, Path]):
    """Scatter colored by estimated dimension; points without one in grey"""
    known = np.array([r.dimension is not None for r in records], dtype=bool)
    dims = np.array([r.dimension if r.dimension is not None else 0 for r in records], dtype=float)
    fig = plt.figure(figsize=(6, 5))
    sc = _scatter(fig, cloud, dims, known, "viridis", "Estimated dimension")
    if known.any():
        fig.colorbar(sc, label="K")
    _save(fig, path)


def plot_clusters(cloud: PointCloud, labeling: ClusterLabeling, path: Union[str, Path]):
    """Scatter colored by canonical cluster label"""
    fig = plt.figure(figsize=(6, 5))
    mask = np.ones(cloud.size, dtype=bool)
    _scatter(fig, cloud, labeling.labels.astype(float), mask, "tab20", f"{labeling.cluster_count} clusters")
    _save(fig, path)


def plot_histogram(values: np.ndarray, bins: int, path: Union[str, Path], title: Optional[str] = None):
    """Histogram of curvature values over their observed range"""
    values = np.asarray(values, dtype=np.float64)
    values = values[np.isfinite(values)]
    fig = plt.figure(figsize=(6, 4))
    ax = fig.add_subplot()
    if values.size:
        ax.hist(values, bins=bins)
    ax.set_xlabel("curvature")
    ax.set_ylabel("points")
    ax.set_title(title or f"Curvature histogram ({values.size} values)")
    _save(fig, path)
