"""
CSV and JSON outputs of the CLI commands. All float fields use shortest
round-trip formatting so outputs are byte-identical for identical inputs.
"""
import csv
import json
from typing import Any, Dict, List, Optional, Sequence, TextIO

import numpy as np

from clustering import ClusterLabeling, ClusterParams
from curvature import PointRecord, status_counts
from pointcloud import PointCloud, format_float
from synthetic import GrfModel, LlnResult


def _optional_float(value: Optional[float]) -> str:
    if value is None or not np.isfinite(value):
        return ""
    return format_float(value)


def _coordinate_header(dim: int) -> List[str]:
    return [f"x{i + 1}" for i in range(dim)]


def curvature_histogram(records: Sequence[PointRecord], bins: int) -> Dict[str, Any]:
    """Uniform bins over the observed range of ok curvature values"""
    values = np.array([r.curvature for r in records if r.ok], dtype=np.float64)
    if values.size == 0:
        return {"bins": bins, "edges": [], "counts": []}
    counts, edges = np.histogram(values, bins=bins)
    return {"bins": bins, "edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


def dimension_histogram(records: Sequence[PointRecord]) -> Dict[str, int]:
    """Number of points per estimated dimension (points without one are skipped)"""
    counts: Dict[int, int] = {}
    for record in records:
        if record.dimension is not None:
            counts[record.dimension] = counts.get(record.dimension, 0) + 1
    return {str(k): counts[k] for k in sorted(counts)}


def summarize_records(records: Sequence[PointRecord], bins: int = 50) -> Dict[str, Any]:
    """Status counts, dimension histogram and curvature histogram"""
    ok_values = [r.curvature for r in records if r.ok]
    return {
        "n_points": len(records),
        "status_counts": status_counts(records),
        "dimension_histogram": dimension_histogram(records),
        "curvature_median": float(np.median(ok_values)) if ok_values else None,
        "curvature_histogram": curvature_histogram(records, bins),
    }


def write_json(payload: Dict[str, Any], stream: TextIO):
    json.dump(payload, stream, indent=2, allow_nan=False)
    stream.write("\n")


def write_estimate_csv(cloud: PointCloud, records: Sequence[PointRecord], stream: TextIO):
    """idx,x1..xn,dim,curvature,epsilon,nbrs,status"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["idx", *_coordinate_header(cloud.dim), "dim", "curvature", "epsilon", "nbrs", "status"])
    for record in records:
        point = cloud.points[record.index]
        writer.writerow([
            record.index,
            *(format_float(v) for v in point),
            "" if record.dimension is None else record.dimension,
            _optional_float(record.curvature) if record.ok else "",
            format_float(record.epsilon),
            record.neighbor_count,
            record.status.value,
        ])


def write_cluster_csv(cloud: PointCloud, records: Sequence[PointRecord],
                      labeling: ClusterLabeling, stream: TextIO):
    """idx,x1..xn,curvature,a,label,flag (flag=1 for points clustered without curvature)"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["idx", *_coordinate_header(cloud.dim), "curvature", "a", "label", "flag"])
    for i, record in enumerate(records):
        writer.writerow([
            i,
            *(format_float(v) for v in cloud.points[i]),
            _optional_float(record.curvature) if record.ok else "",
            format_float(labeling.a_values[i]),
            int(labeling.labels[i]),
            int(labeling.flagged[i]),
        ])


def cluster_summary(labeling: ClusterLabeling, params: ClusterParams,
                    include_merge_heights: bool = False) -> Dict[str, Any]:
    summary = {
        "n_points": int(labeling.labels.size),
        "params": {"t": params.t, "d": params.d, "d_prime": params.d_prime},
        "cluster_count": labeling.cluster_count,
        "cluster_sizes": labeling.sizes,
        "flagged_count": int(labeling.flagged.sum()) if labeling.flagged is not None else 0,
    }
    if include_merge_heights:
        summary["merge_heights"] = list(labeling.merge_heights)
    return summary


def write_lln_csv(model: GrfModel, result: LlnResult, stream: TextIO):
    """idx,ax,ay,mean_curv,ok_runs"""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["idx", "ax", "ay", "mean_curv", "ok_runs"])
    for i, (ax, ay) in enumerate(model.base_points):
        writer.writerow([i, format_float(ax), format_float(ay),
                         _optional_float(result.mean_curvature[i]), int(result.ok_runs[i])])


def lln_summary(result: LlnResult) -> Dict[str, Any]:
    """Mean, median and std of the per-point means (points with no ok run excluded)"""
    means = result.mean_curvature[~np.isnan(result.mean_curvature)]
    stats = {
        "mean": float(np.mean(means)),
        "median": float(np.median(means)),
        "std": float(np.std(means)),
    } if means.size else {"mean": None, "median": None, "std": None}
    return {
        "runs": result.runs,
        "n_points": int(result.mean_curvature.size),
        "points_with_ok_runs": int(means.size),
        **stats,
    }
