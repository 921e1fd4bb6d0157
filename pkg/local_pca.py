"""
Local principal component analysis around a point: covariance taken from the
point itself, a cyclic Jacobi eigensolver, the sign convention for eigenvectors
and the eigenvalue-threshold estimate of intrinsic dimension.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from error_handler import DataError, NumericalError
from pointcloud import PointCloud, SpatialIndex, ball_query

logger = logging.getLogger(__name__)

MAX_SWEEPS = 100
OFF_DIAGONAL_TOL = 1e-12
ORIENT_ZERO_TOL = 1e-9


class EmptyNeighborhood(DataError):
    """No cloud point lies inside the query ball"""


class ZeroDimension(DataError):
    """Every covariance eigenvalue is below the threshold"""

    def __init__(self, message: str, eigenvalues: np.ndarray):
        super().__init__(message)
        self.dimension = 0
        self.eigenvalues = eigenvalues


class NoNormalDirection(DataError):
    """Every covariance eigenvalue reaches the threshold, leaving no normal vector"""

    def __init__(self, message: str, eigenvalues: np.ndarray):
        super().__init__(message)
        self.dimension = eigenvalues.size
        self.eigenvalues = eigenvalues


class ConvergenceFailure(NumericalError):
    """Jacobi sweeps did not annihilate the off-diagonal part"""


@dataclass(frozen=True)
class CovarianceFromPoint:
    """Second-moment matrix of displacements p - p_i over a neighborhood"""
    matrix: np.ndarray
    base_point: np.ndarray
    sample_count: int

    def quadratic_value(self, v: np.ndarray) -> float:
        """V(p, v) = v^T M v"""
        v = np.asarray(v, dtype=np.float64)
        return float(v @ self.matrix @ v)


@dataclass(frozen=True)
class LocalFrame:
    """Estimated dimension K, oriented u_1..u_{K+1} (rows) and the full spectrum"""
    dimension: int
    vectors: np.ndarray
    eigenvalues: np.ndarray
    delta: float

    @property
    def tangent(self) -> np.ndarray:
        return self.vectors[:self.dimension]

    @property
    def normal(self) -> np.ndarray:
        return self.vectors[self.dimension]


def covariance_from_point(cloud: PointCloud, neighbors: np.ndarray, p: np.ndarray) -> CovarianceFromPoint:
    """
    Covariance of a neighborhood taken from p, not from the centroid

    Args:
        cloud: Point cloud
        neighbors: Index set B
        p: Base point

    Returns:
        CovarianceFromPoint with matrix (1/|B|) sum (p - p_i)(p - p_i)^T
    """
    neighbors = np.asarray(neighbors, dtype=np.int64)
    if neighbors.size == 0:
        raise EmptyNeighborhood("covariance needs a nonempty neighborhood")
    p = np.asarray(p, dtype=np.float64)
    deviations = p - cloud.points[neighbors]
    matrix = deviations.T @ deviations / neighbors.size
    matrix = 0.5 * (matrix + matrix.T)
    return CovarianceFromPoint(matrix=matrix, base_point=p, sample_count=int(neighbors.size))


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def _jacobi_eigh(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    tol = OFF_DIAGONAL_TOL * float(np.linalg.norm(a))

    for _ in range(MAX_SWEEPS):
        if _off_diagonal_norm(a) <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    else:
        if _off_diagonal_norm(a) > tol:
            raise ConvergenceFailure(f"Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps")

    return np.diag(a).copy(), v


def eigendecompose(cov: CovarianceFromPoint) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigenvalues in non-increasing order and matching unit eigenvectors

    Args:
        cov: Covariance from a point (symmetric)

    Returns:
        (eigenvalues, eigenvectors) with eigenvectors[i] the i-th eigenvector
    """
    matrix = cov.matrix if isinstance(cov, CovarianceFromPoint) else np.asarray(cov, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DataError(f"eigendecomposition needs a square matrix, got {matrix.shape}")
    scale = max(float(np.abs(matrix).max(initial=0.0)), 1.0)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * scale):
        raise DataError("eigendecomposition needs a symmetric matrix")
    matrix = 0.5 * (matrix + matrix.T)

    values, vectors = _jacobi_eigh(matrix)
    # stable: equal eigenvalues keep solver order
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order].T.copy()


def orient(u: np.ndarray, zero_tol: float = ORIENT_ZERO_TOL) -> np.ndarray:
    """
    Sign convention: the last coordinate with |s| > zero_tol must be positive

    Args:
        u: Unit vector
        zero_tol: Coordinates at or below this magnitude count as zero

    Returns:
        u or -u
    """
    u = np.array(u, dtype=np.float64)
    for s in u[::-1]:
        if abs(s) > zero_tol:
            return -u if s < 0 else u
    return u


def frame_from_neighbors(cloud: PointCloud, neighbors: np.ndarray, p: np.ndarray, delta: float) -> LocalFrame:
    """Dimension estimate and oriented frame from an already computed neighborhood"""
    cov = covariance_from_point(cloud, neighbors, p)
    values, vectors = eigendecompose(cov)
    values = np.maximum(values, 0.0)
    n = values.size

    dimension = int(np.count_nonzero(values >= delta))
    if dimension == 0:
        raise ZeroDimension(f"all eigenvalues below delta={delta}", values)
    if dimension == n:
        raise NoNormalDirection(f"all {n} eigenvalues reach delta={delta}", values)

    oriented = np.array([orient(u) for u in vectors[:dimension + 1]])
    return LocalFrame(dimension=dimension, vectors=oriented, eigenvalues=values, delta=delta)


def compute_dimension(cloud: PointCloud, index: SpatialIndex, p: np.ndarray, eps: float, delta: float) -> LocalFrame:
    """
    Estimated dimension at p and the frame u_1..u_{K+1}

    Args:
        cloud: Point cloud
        index: Spatial index of the cloud
        p: Point of the cloud
        eps: Ball radius
        delta: Eigenvalue threshold

    Returns:
        LocalFrame with K = #{lambda_i >= delta}
    """
    if not delta > 0:
        raise DataError(f"delta must be > 0, got {delta}")
    neighbors = ball_query(index, p, eps)
    return frame_from_neighbors(cloud, neighbors, p, delta)
