"""
Quadratic hypersurface fitting in a local frame and the Gaussian-curvature-like
value det(a_ij), plus the per-point pipeline over a whole cloud with adaptive radii.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from error_handler import DataError, NumericalError
from local_pca import (
    ConvergenceFailure,
    EmptyNeighborhood,
    LocalFrame,
    NoNormalDirection,
    ZeroDimension,
    frame_from_neighbors,
)
from logging_config import log_point_failure
from pointcloud import PointCloud, SpatialIndex, adaptive_radii, ball_query, diameter

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e12
DEFAULT_ETA_MULTIPLIERS = (1, 2, 3, 4)


class UnderdeterminedFit(DataError):
    """Fewer neighborhood rows than free quadratic coefficients"""


class SingularSystem(NumericalError):
    """Normal equations too ill-conditioned to trust"""


class PointStatus(Enum):
    """Outcome of the estimation at one point (stable CLI strings)"""
    OK = "ok"
    EMPTY_NEIGHBORHOOD = "empty_neighborhood"
    ZERO_DIMENSION = "zero_dimension"
    NO_NORMAL_DIRECTION = "no_normal_direction"
    UNDERDETERMINED_FIT = "underdetermined_fit"
    SINGULAR_SYSTEM = "singular_system"
    CONVERGENCE_FAILURE = "convergence_failure"


@dataclass(frozen=True)
class QuadraticForm:
    """Symmetric coefficients of x_{K+1} = g . x + 1/2 sum a_ij x_i x_j"""
    dimension: int
    coeffs: np.ndarray
    gradient: Optional[np.ndarray] = None
    residual: float = 0.0
    row_count: int = 0

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64)
        if coeffs.shape != (self.dimension, self.dimension):
            raise DataError(f"coefficients must be {self.dimension}x{self.dimension}")
        # upper triangle is authoritative
        upper = np.triu(coeffs)
        coeffs = upper + np.triu(coeffs, 1).T
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

        gradient = np.zeros(self.dimension) if self.gradient is None else np.array(self.gradient, dtype=np.float64)
        if gradient.shape != (self.dimension,):
            raise DataError(f"gradient must have {self.dimension} entries")
        gradient.setflags(write=False)
        object.__setattr__(self, "gradient", gradient)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Model height g . x + 1/2 x^T A x for rows of tangential coordinates"""
        x = np.atleast_2d(x)
        return x @ self.gradient + 0.5 * np.einsum("ri,ij,rj->r", x, self.coeffs, x)


@dataclass
class PointRecord:
    """Per-point output of the estimation pipeline"""
    index: int
    dimension: Optional[int]
    curvature: Optional[float]
    epsilon: float
    neighbor_count: int
    status: PointStatus

    @property
    def ok(self) -> bool:
        return self.status is PointStatus.OK


def coefficient_count(dimension: int) -> int:
    """m = K(K+1)/2 free symmetric coefficients"""
    return dimension * (dimension + 1) // 2


def unknown_count(dimension: int) -> int:
    """Quadratic coefficients plus the K slopes of the tangent-plane correction"""
    return coefficient_count(dimension) + dimension


def _design_matrix(tangential: np.ndarray) -> np.ndarray:
    k = tangential.shape[1]
    columns = [0.5 * tangential[:, i] ** 2 for i in range(k)]
    columns += [tangential[:, i] * tangential[:, j] for i in range(k) for j in range(i + 1, k)]
    columns += [tangential[:, i] for i in range(k)]
    return np.column_stack(columns)


def _coeffs_from_solution(solution: np.ndarray, k: int) -> np.ndarray:
    coeffs = np.diag(solution[:k])
    pos = k
    for i in range(k):
        for j in range(i + 1, k):
            coeffs[i, j] = coeffs[j, i] = solution[pos]
            pos += 1
    return coeffs


def local_coordinates(cloud: PointCloud, neighbors: np.ndarray, p: np.ndarray, frame: LocalFrame) -> np.ndarray:
    """
    Coordinates x_i(q) = (q - p) . u_i for every q in the neighborhood

    Args:
        cloud: Point cloud
        neighbors: Index set B
        p: Base point
        frame: Local frame with K+1 vectors

    Returns:
        Array of shape (|B|, K+1), rows in the order of B
    """
    neighbors = np.asarray(neighbors, dtype=np.int64)
    p = np.asarray(p, dtype=np.float64)
    return (cloud.points[neighbors] - p) @ frame.vectors.T


def fit_quadratic(rows: np.ndarray, dimension: int) -> QuadraticForm:
    """
    Least-squares quadratic through the origin, with K slope terms that absorb
    the tilt of an estimated tangent plane

    Args:
        rows: Local coordinates, shape (rows, K+1); last column is the height
        dimension: K

    Returns:
        QuadraticForm minimizing sum_q (g . x + 1/2 sum a_ij x_i x_j - x_{K+1})^2
    """
    rows = np.asarray(rows, dtype=np.float64)
    if dimension < 1 or rows.ndim != 2 or rows.shape[1] != dimension + 1:
        raise DataError(f"rows must have shape (*, {dimension + 1})")
    unknowns = unknown_count(dimension)
    # rows at the base point itself constrain nothing
    informative = int(np.count_nonzero(np.any(rows[:, :dimension] != 0.0, axis=1)))
    if informative < unknowns:
        raise UnderdeterminedFit(f"{informative} informative rows for {unknowns} unknowns")
    if informative < 2 * unknowns:
        logger.debug(f"Marginal fit: {informative} informative rows for {unknowns} unknowns",
                     extra={"row_count": informative})

    design = _design_matrix(rows[:, :dimension])
    target = rows[:, dimension]
    # quadratic and slope columns differ in scale by the ball radius
    scale = np.linalg.norm(design, axis=0)
    if np.any(scale == 0.0):
        raise SingularSystem("a fit direction has no support in the neighborhood")
    scaled = design / scale
    normal = scaled.T @ scaled
    normal = 0.5 * (normal + normal.T)
    rhs = scaled.T @ target

    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(normal)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise SingularSystem(f"normal equations condition number {condition:.3g} exceeds {MAX_CONDITION:g}")

    try:
        solution = scipy.linalg.solve(normal, rhs, assume_a="sym") / scale
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise SingularSystem(f"normal equations could not be solved: {e}")

    m = coefficient_count(dimension)
    form = QuadraticForm(dimension=dimension, coeffs=_coeffs_from_solution(solution, dimension),
                         gradient=solution[m:], row_count=int(rows.shape[0]))
    residual = float(np.sum((form.evaluate(rows[:, :dimension]) - target) ** 2))
    return replace(form, residual=residual)


def hessian_determinant(form: QuadraticForm) -> float:
    """det(a_ij) of the fitted quadratic"""
    return float(np.linalg.det(form.coeffs))


def fit_local_quadratic(cloud: PointCloud, neighbors: np.ndarray, p: np.ndarray, frame: LocalFrame) -> QuadraticForm:
    """local_coordinates followed by fit_quadratic"""
    rows = local_coordinates(cloud, neighbors, p, frame)
    return fit_quadratic(rows, frame.dimension)


def compute_curvature(cloud: PointCloud, neighbors: np.ndarray, p: np.ndarray, frame: LocalFrame) -> float:
    """Gaussian-curvature-like value at p for a given frame"""
    return hessian_determinant(fit_local_quadratic(cloud, neighbors, p, frame))


def dimension_and_curvature(cloud: PointCloud, index: SpatialIndex, p: np.ndarray,
                            eps: float, delta: float) -> Tuple[int, float]:
    """
    Estimated dimension and curvature at p on one shared neighborhood

    Args:
        cloud: Point cloud
        index: Spatial index of the cloud
        p: Point of the cloud
        eps: Ball radius
        delta: Eigenvalue threshold

    Returns:
        (K, curvature)
    """
    if not delta > 0:
        raise DataError(f"delta must be > 0, got {delta}")
    neighbors = ball_query(index, p, eps)
    frame = frame_from_neighbors(cloud, neighbors, p, delta)
    return frame.dimension, compute_curvature(cloud, neighbors, p, frame)


def evaluate_point(cloud: PointCloud, index: SpatialIndex, i: int, eps: float, delta: float) -> PointRecord:
    """Run the pipeline at point i, folding failures into the record status"""
    p = cloud.points[i]
    neighbors = ball_query(index, p, eps)
    record = PointRecord(index=i, dimension=None, curvature=None, epsilon=float(eps),
                         neighbor_count=int(neighbors.size), status=PointStatus.OK)
    try:
        frame = frame_from_neighbors(cloud, neighbors, p, delta)
    except EmptyNeighborhood:
        record.status = PointStatus.EMPTY_NEIGHBORHOOD
    except ZeroDimension as e:
        record.dimension = e.dimension
        record.status = PointStatus.ZERO_DIMENSION
    except NoNormalDirection as e:
        record.dimension = e.dimension
        record.status = PointStatus.NO_NORMAL_DIRECTION
    except ConvergenceFailure:
        record.status = PointStatus.CONVERGENCE_FAILURE
    else:
        record.dimension = frame.dimension
        try:
            record.curvature = compute_curvature(cloud, neighbors, p, frame)
        except UnderdeterminedFit:
            record.status = PointStatus.UNDERDETERMINED_FIT
        except SingularSystem:
            record.status = PointStatus.SINGULAR_SYSTEM

    if record.status is not PointStatus.OK:
        log_point_failure(logger, i, record.status.value)
    return record


def curvature_field(cloud: PointCloud, eta: float, delta: float,
                    workers: int = 1, index: Optional[SpatialIndex] = None) -> List[PointRecord]:
    """
    Dimension and curvature at every point with eps(p) = 2*eta/N(p)

    Args:
        cloud: Point cloud with at least two distinct points
        eta: Scale of the adaptive radius
        delta: Eigenvalue threshold
        workers: Thread count; results do not depend on it
        index: Prebuilt spatial index (built when omitted)

    Returns:
        One PointRecord per point, in index order
    """
    if not delta > 0:
        raise DataError(f"delta must be > 0, got {delta}")
    index = index or SpatialIndex(cloud)
    radii = adaptive_radii(cloud, eta, index)

    def run(i: int) -> PointRecord:
        return evaluate_point(cloud, index, i, float(radii.epsilons[i]), delta)

    if workers <= 1:
        records = [run(i) for i in range(cloud.size)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(run, range(cloud.size)))

    ok = sum(1 for r in records if r.ok)
    logger.info(f"Curvature field: {ok}/{cloud.size} points ok",
                extra={"n_points": cloud.size, "stage": "curvature_field"})
    return records


def eta_sweep(cloud: PointCloud, delta: float,
              multipliers: Sequence[float] = DEFAULT_ETA_MULTIPLIERS,
              workers: int = 1) -> Dict[float, List[PointRecord]]:
    """Curvature fields for eta = k * diameter, one per multiplier k"""
    index = SpatialIndex(cloud)
    diam = diameter(cloud)
    return {k: curvature_field(cloud, k * diam, delta, workers=workers, index=index) for k in multipliers}


def status_counts(records: Sequence[PointRecord]) -> Dict[str, int]:
    """Number of records per status, every status listed"""
    counts = {status.value: 0 for status in PointStatus}
    for record in records:
        counts[record.status.value] += 1
    return counts
