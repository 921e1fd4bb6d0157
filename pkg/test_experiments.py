"""
Desk-scale reproductions of the synthetic experiments: curvature signs and
magnitudes on paraboloids and spheres, cylinder clustering and the averaging
experiment over random-field noise.
"""
import numpy as np
import pytest

from clustering import ClusterParams, curvature_clustering
from curvature import curvature_field
from pointcloud import diameter
from synthetic import CapKind, GrfModel, Part, Surface, gen_cylinder_with_caps, gen_paraboloid, gen_sphere, lln_experiment

pytestmark = pytest.mark.slow

DELTA = 0.001


def _field(cloud, multiplier=3.0, delta=DELTA):
    return curvature_field(cloud, multiplier * diameter(cloud), delta)


@pytest.fixture(scope="module")
def elliptic_paraboloid():
    cloud = gen_paraboloid(-1, 3000, seed=7)
    return cloud, _field(cloud)


@pytest.fixture(scope="module")
def hyperbolic_paraboloid():
    cloud = gen_paraboloid(1, 3000, seed=7)
    return cloud, _field(cloud)


def _inner_ok(cloud, records, radius=0.8):
    inner = np.hypot(cloud.points[:, 0], cloud.points[:, 1]) <= radius
    return [r for r in records if r.ok and inner[r.index]]


class TestParaboloids:
    """Curvature signs and magnitude on z = -x^2 - y^2 and z = x^2 - y^2"""

    def test_elliptic_curvature_is_positive(self, elliptic_paraboloid):
        inner = _inner_ok(*elliptic_paraboloid)
        assert len(inner) > 1000
        assert np.mean([r.curvature > 0 for r in inner]) >= 0.9

    def test_hyperbolic_curvature_is_negative(self, hyperbolic_paraboloid):
        inner = _inner_ok(*hyperbolic_paraboloid)
        assert len(inner) > 1000
        assert np.mean([r.curvature < 0 for r in inner]) >= 0.9

    def test_magnitude_near_origin(self, elliptic_paraboloid):
        cloud, records = elliptic_paraboloid
        ok = [r for r in records if r.ok]
        xy = cloud.points[[r.index for r in ok], :2]
        nearest = np.argsort(np.hypot(xy[:, 0], xy[:, 1]), kind="stable")[:20]
        estimated = np.mean([ok[k].curvature for k in nearest])
        analytic = np.mean([4.0 / (1.0 + 4.0 * (x * x + y * y)) ** 2 for x, y in xy[nearest]])
        assert estimated == pytest.approx(analytic, rel=0.25)


class TestSphere:
    """Curvature 1/r^2 = 4 on the radius-0.5 sphere"""

    def test_median_curvature(self):
        records = _field(gen_sphere(0.5, 3000, seed=11))
        ok = [r.curvature for r in records if r.ok]
        assert len(ok) > 1500
        assert 2.8 <= np.median(ok) <= 5.2


class TestCylinderClustering:
    """Caps of the cylinder closed by hemi-ellipsoids cluster apart from its side"""

    def test_caps_separate_from_side(self):
        cloud = gen_cylinder_with_caps(CapKind.HEMI_ELLIPSOID, 1500, 750, seed=5)
        records = _field(cloud)
        labeling = curvature_clustering(cloud, records, ClusterParams(t=4.0, d=0.5, d_prime=2.0))

        assert sum(labeling.sizes[:3]) >= 0.9 * cloud.size

        def majority(part):
            labels = labeling.labels[cloud.labels == part]
            values, counts = np.unique(labels, return_counts=True)
            return values[np.argmax(counts)], counts.max() / labels.size

        side_label, _ = majority(Part.SIDE)
        for cap in (Part.CAP_BOTTOM, Part.CAP_TOP):
            cap_label, share = majority(cap)
            assert share >= 0.8
            assert cap_label != side_label


class TestAveraging:
    """Mean curvature over independent random-field noise draws"""

    @pytest.mark.parametrize("surface,check", [
        (Surface.PLANE, "flat"),
        (Surface.UPPER_HEMISPHERE, "unit"),
    ])
    def test_mean_curvature(self, surface, check):
        model = GrfModel.sample_base(surface, 1000, sigma=0.1, seed=31)
        result = lln_experiment(model, runs=50, eta=None, delta=0.005, seed=32, eta_mult=3.0)
        means = result.mean_curvature[~np.isnan(result.mean_curvature)]
        assert means.size > 500
        if check == "flat":
            median_abs = np.median(np.abs(means))
            single = result.per_run[0]
            assert median_abs <= 0.3
            assert median_abs < np.median(np.abs(single[~np.isnan(single)]))
        else:
            assert 0.5 <= np.median(means) <= 1.5
