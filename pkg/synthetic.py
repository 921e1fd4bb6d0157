"""
Seeded generators for the synthetic test surfaces, the Gaussian-random-field
noise model and the averaging (law of large numbers) experiment.

Every generator is a pure function of its parameters and seed. Randomness comes
from numpy's counter-based Philox generator keyed by SeedSequence((seed, *stream)),
so a sub-stream such as the noise of run r is SeedSequence((seed, NOISE_STREAM, r)).
Base points and noise carry distinct nonzero tags: SeedSequence pads its entropy
with zeros, so (seed,) and (seed, 0) would collide.
"""
import logging
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import List, Optional

import numpy as np
import scipy.linalg
from scipy.spatial.distance import cdist

from curvature import PointRecord, curvature_field
from error_handler import DataError, NumericalError
from pointcloud import PointCloud, diameter

logger = logging.getLogger(__name__)

JITTER_LADDER = (1e-12, 1e-10, 1e-8)
HEMISPHERE_BASE_RADIUS = 0.99
DEFAULT_CAP_HEIGHT = 0.9
BASE_STREAM = 1
NOISE_STREAM = 2


class NonPositiveRadius(DataError):
    """Sphere radius must be positive"""


class CholeskyFailure(NumericalError):
    """Covariance not factorizable even after the jitter ladder"""


class CapKind(Enum):
    DISC = "disc"
    HEMI_ELLIPSOID = "hemi"


class Part(IntEnum):
    """Part labels carried by the capped-cylinder generator"""
    SIDE = 0
    CAP_BOTTOM = 1
    CAP_TOP = 2


class Surface(Enum):
    PLANE = "plane"
    UPPER_HEMISPHERE = "upper"
    LOWER_HEMISPHERE = "lower"


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Generator for (seed, stream...); equal keys give bit-identical draws"""
    if not 0 <= seed < 2**64:
        raise DataError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, *stream))))


def _uniform_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, 3))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _uniform_disc(rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
    rho = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi)])


def gen_paraboloid(sign: int, n: int, seed: int) -> PointCloud:
    """
    Points on z = -x^2 - y^2 (sign < 0) or z = x^2 - y^2 (sign > 0)

    Args:
        sign: Selects the surface
        n: Number of points
        seed: RNG seed

    Returns:
        PointCloud in R^3 with (x, y) uniform on [-1, 1]^2
    """
    if n < 1:
        raise DataError("n must be >= 1")
    if sign == 0:
        raise DataError("sign must be +1 or -1")
    rng = make_rng(seed)
    xy = rng.uniform(-1.0, 1.0, (n, 2))
    x, y = xy[:, 0], xy[:, 1]
    z = -x * x - y * y if sign < 0 else x * x - y * y
    return PointCloud(np.column_stack([x, y, z]))


def gen_sphere(radius: float, n: int, seed: int) -> PointCloud:
    """Uniform sample of the sphere of the given radius (normalized Gaussians)"""
    if not radius > 0:
        raise NonPositiveRadius(f"sphere radius must be > 0, got {radius}")
    if n < 1:
        raise DataError("n must be >= 1")
    return PointCloud(radius * _uniform_sphere(make_rng(seed), n))


def _hemi_ellipsoid(rng: np.random.Generator, n: int, height: float) -> np.ndarray:
    # uniform area on the upper half of x^2 + y^2 + (z/height)^2 = 1 by rejection:
    # the map (x, y, z) -> (x, y, height*z) scales sphere area by g(u) below
    g_max = max(height, 1.0)
    accepted: List[np.ndarray] = []
    total = 0
    while total < n:
        u = _uniform_sphere(rng, 2 * (n - total) + 16)
        u[:, 2] = np.abs(u[:, 2])
        g = np.sqrt(height ** 2 * (u[:, 0] ** 2 + u[:, 1] ** 2) + u[:, 2] ** 2)
        keep = rng.uniform(0.0, g_max, u.shape[0]) < g
        chosen = u[keep]
        accepted.append(chosen)
        total += chosen.shape[0]
    u = np.concatenate(accepted)[:n]
    return np.column_stack([u[:, 0], u[:, 1], height * u[:, 2]])


def gen_cylinder_with_caps(cap: CapKind, n_side: int, n_cap: int, seed: int,
                           cap_height: float = DEFAULT_CAP_HEIGHT) -> PointCloud:
    """
    Unit-radius cylinder of height 1 closed by two discs or two hemi-ellipsoids

    Args:
        cap: CapKind.DISC or CapKind.HEMI_ELLIPSOID
        n_side: Points on the side
        n_cap: Points on each cap
        seed: RNG seed
        cap_height: Semi-axis of the hemi-ellipsoids along z

    Returns:
        PointCloud in R^3 whose labels are Part values
    """
    cap = CapKind(cap)
    if n_side < 0 or n_cap < 0 or n_side + n_cap == 0:
        raise DataError("point counts must be non-negative and not all zero")
    if not cap_height > 0:
        raise DataError("cap_height must be > 0")
    rng = make_rng(seed)

    phi = rng.uniform(0.0, 2.0 * np.pi, n_side)
    z = rng.uniform(0.0, 1.0, n_side)
    side = np.column_stack([np.cos(phi), np.sin(phi), z])

    if cap is CapKind.DISC:
        bottom = np.column_stack([_uniform_disc(rng, n_cap), np.zeros(n_cap)])
        top = np.column_stack([_uniform_disc(rng, n_cap), np.ones(n_cap)])
    else:
        lower = _hemi_ellipsoid(rng, n_cap, cap_height)
        upper = _hemi_ellipsoid(rng, n_cap, cap_height)
        bottom = lower * np.array([1.0, 1.0, -1.0])
        top = upper + np.array([0.0, 0.0, 1.0])

    points = np.concatenate([side, bottom, top])
    labels = np.concatenate([
        np.full(n_side, Part.SIDE),
        np.full(n_cap, Part.CAP_BOTTOM),
        np.full(n_cap, Part.CAP_TOP),
    ])
    return PointCloud(points, labels)


@dataclass(frozen=True)
class GrfModel:
    """Normal-direction noise sigma*X_i, X ~ N(0, C), C_ij = exp(-||a_i - a_j||^2)"""
    base_points: np.ndarray
    sigma: float
    surface: Surface = Surface.PLANE

    def __post_init__(self):
        base = np.array(self.base_points, dtype=np.float64)
        if base.ndim != 2 or base.shape[1] != 2 or base.shape[0] < 1:
            raise DataError("base points must have shape (N, 2)")
        if self.sigma < 0:
            raise DataError("sigma must be >= 0")
        surface = Surface(self.surface)
        if surface is not Surface.PLANE and np.any(np.sum(base ** 2, axis=1) >= 1.0):
            raise DataError("hemisphere base points must lie inside the unit disc")
        base.setflags(write=False)
        object.__setattr__(self, "base_points", base)
        object.__setattr__(self, "surface", surface)

    @property
    def size(self) -> int:
        return self.base_points.shape[0]

    @cached_property
    def covariance(self) -> np.ndarray:
        return np.exp(-cdist(self.base_points, self.base_points, "sqeuclidean"))

    @classmethod
    def sample_base(cls, surface: Surface, n: int, sigma: float, seed: int) -> "GrfModel":
        """Base points uniform on [-1,1]^2 (plane) or on the radius-0.99 disc (hemispheres)"""
        surface = Surface(surface)
        rng = make_rng(seed, BASE_STREAM)
        if surface is Surface.PLANE:
            base = rng.uniform(-1.0, 1.0, (n, 2))
        else:
            base = _uniform_disc(rng, n, HEMISPHERE_BASE_RADIUS)
        return cls(base_points=base, sigma=sigma, surface=surface)

    def surface_points(self) -> np.ndarray:
        """f(a_i) for every base point"""
        a = self.base_points
        if self.surface is Surface.PLANE:
            height = np.zeros(self.size)
        else:
            height = np.sqrt(1.0 - np.sum(a ** 2, axis=1))
            if self.surface is Surface.LOWER_HEMISPHERE:
                height = -height
        return np.column_stack([a, height])

    def normals(self) -> np.ndarray:
        """Unit normals n_i at f(a_i): e_3 for the plane, radial for the hemispheres"""
        if self.surface is Surface.PLANE:
            return np.tile([0.0, 0.0, 1.0], (self.size, 1))
        f = self.surface_points()
        return f / np.linalg.norm(f, axis=1, keepdims=True)


def grf_sample(model: GrfModel, seed: int, draws: Optional[int] = None, stream: tuple = ()) -> np.ndarray:
    """
    Draw X ~ N(0, C) as L z with L the Cholesky factor of C + jitter*I

    Args:
        model: GRF model providing C
        seed: RNG seed
        draws: Number of independent draws (None for a single vector)
        stream: Extra RNG stream keys (e.g. the run index)

    Returns:
        Array of shape (N,) or (draws, N)
    """
    cov = model.covariance
    scale = float(np.mean(np.diag(cov)))
    factor = None
    for jitter in JITTER_LADDER:
        try:
            factor = scipy.linalg.cholesky(cov + jitter * scale * np.eye(model.size), lower=True)
            break
        except scipy.linalg.LinAlgError:
            logger.debug(f"Cholesky failed with jitter {jitter:g}, escalating")
    if factor is None:
        raise CholeskyFailure(f"covariance not positive definite after jitter {JITTER_LADDER[-1]:g}")

    rng = make_rng(seed, NOISE_STREAM, *stream)
    if draws is None:
        return factor @ rng.standard_normal(model.size)
    return (factor @ rng.standard_normal((model.size, draws))).T


def gen_noisy_manifold(model: GrfModel, seed: int, stream: tuple = ()) -> PointCloud:
    """p_i = f(a_i) + (sigma X_i) n_i"""
    noise = model.sigma * grf_sample(model, seed, stream=stream)
    return PointCloud(model.surface_points() + noise[:, None] * model.normals())


@dataclass(frozen=True)
class LlnResult:
    """Per-base-point mean curvature over runs with ok status"""
    mean_curvature: np.ndarray
    ok_runs: np.ndarray
    per_run: np.ndarray

    @property
    def runs(self) -> int:
        return self.per_run.shape[0]


def run_cloud(model: GrfModel, seed: int, run: int) -> PointCloud:
    """Noisy cloud of one experiment run (noise stream (seed, NOISE_STREAM, run))"""
    return gen_noisy_manifold(model, seed, stream=(run,))


def lln_experiment(model: GrfModel, runs: int, eta: Optional[float], delta: float, seed: int,
                   eta_mult: Optional[float] = None, workers: int = 1) -> LlnResult:
    """
    Average per-point curvature over independent noise draws on fixed base points

    Args:
        model: GRF model; its base points are shared by all runs
        runs: Number of noise draws
        eta: Absolute eta (None when eta_mult is given)
        delta: Eigenvalue threshold
        seed: Experiment seed; run r draws its noise from (seed, NOISE_STREAM, r)
        eta_mult: eta as a multiple of each run's cloud diameter
        workers: Thread count for each curvature field

    Returns:
        LlnResult with NaN where no run was ok
    """
    if runs < 1:
        raise DataError("runs must be >= 1")
    if (eta is None) == (eta_mult is None):
        raise DataError("give exactly one of eta and eta_mult")

    per_run = np.full((runs, model.size), np.nan)
    for run in range(runs):
        cloud = run_cloud(model, seed, run)
        run_eta = eta if eta is not None else eta_mult * diameter(cloud)
        records: List[PointRecord] = curvature_field(cloud, run_eta, delta, workers=workers)
        for record in records:
            if record.ok:
                per_run[run, record.index] = record.curvature
        logger.info(f"LLN run {run + 1}/{runs} finished", extra={"run": run, "stage": "lln"})

    ok_runs = np.sum(~np.isnan(per_run), axis=0)
    sums = np.where(np.isnan(per_run), 0.0, per_run).sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(ok_runs > 0, sums / np.maximum(ok_runs, 1), np.nan)
    return LlnResult(mean_curvature=mean, ok_runs=ok_runs, per_run=per_run)
