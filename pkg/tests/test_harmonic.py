import math

import numpy as np
import pytest

from app.kleinian.cores import random_ball_points
from app.kleinian.errors import QuadratureRangeError
from app.kleinian.harmonic import (
    cap_measure,
    measure_kernel,
    measure_kernel_labels,
    measure_rays,
)
from app.kleinian.moebius import BallPoint, MoebiusMap, apply_ball, ball_translation, rotation
from app.kleinian.sphere import Cap


def _cap_cells(raster, cap):
    return cap.contains(raster.centers)


def _strip(raster, cap):
    """Cells whose center lies within one diagonal of the cap boundary."""
    return np.abs(cap.margin(raster.centers)) <= raster.diagonal


def _sphere_average(y, h, radius, count=400):
    """Mean of h over the hyperbolic sphere of the given radius about y."""
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z * z)
    directions = np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)
    points = ball_translation(np.asarray(y, dtype=float)).forward_interior(math.tanh(radius / 2.0) * directions)
    return float(np.mean([h(p) for p in points]))


def test_whole_sphere_has_measure_one(raster32):
    everything = np.ones(raster32.size, dtype=bool)
    assert measure_kernel(np.zeros(3), everything, raster32).value == pytest.approx(1.0, abs=1e-6)
    est = measure_kernel(np.array([0.3, -0.2, 0.5]), everything, raster32)
    assert abs(est.value - 1.0) <= est.error


def test_hemisphere_seen_from_origin(raster32):
    est = measure_kernel(np.zeros(3), raster32.centers[:, 2] > 0, raster32)
    assert est.value == pytest.approx(0.5, abs=2e-3)


def test_polar_cap_seen_from_origin(raster32):
    cap = Cap.around((0, 0, 1), math.pi / 3)
    est = measure_kernel(np.zeros(3), _cap_cells(raster32, cap), raster32)
    assert est.value == pytest.approx(0.25, abs=2e-3)


def test_index_and_mask_regions_agree(raster32):
    mask = raster32.centers[:, 0] > 0.2
    y = np.array([0.1, 0.2, 0.3])
    assert measure_kernel(y, mask, raster32).value == pytest.approx(
        measure_kernel(y, np.flatnonzero(mask), raster32).value, abs=1e-15
    )


def test_complement_adds_to_one(raster32, rng):
    mask = raster32.centers[:, 1] + raster32.centers[:, 2] > 0.4
    for y in random_ball_points(rng, 5, 0.8):
        inside = measure_kernel(y, mask, raster32)
        outside = measure_kernel(y, ~mask, raster32)
        assert abs(inside.value + outside.value - 1.0) <= inside.error + outside.error


def test_measure_is_monotone(raster32, rng):
    small = Cap.around((0, 1, 0), 0.5)
    big = Cap.around((0, 1, 0), 1.0)
    for y in random_ball_points(rng, 5, 0.8):
        assert measure_kernel(y, _cap_cells(raster32, small), raster32).value <= measure_kernel(
            y, _cap_cells(raster32, big), raster32
        ).value


def test_quadrature_range(raster32):
    with pytest.raises(QuadratureRangeError):
        measure_kernel(np.array([0.0, 0.0, 1 - 1e-7]), np.ones(raster32.size, dtype=bool), raster32)


def test_labels_match_single_region(equator_chart):
    y = np.array([0.2, 0.1, 0.4])
    h, err = measure_kernel_labels(y, equator_chart)
    for label in range(equator_chart.count):
        single = measure_kernel(y, equator_chart.labels == label, equator_chart.raster)
        assert h[label] == pytest.approx(single.value, abs=1e-12)
        assert err[label] == pytest.approx(single.error, abs=1e-12)


def test_rays_on_whole_sphere_are_exact():
    est = measure_rays(np.array([0.4, 0.0, 0.1]), lambda pts: np.ones(len(pts), dtype=bool), 1000, seed=1)
    assert est.value == 1.0


def test_rays_hemisphere_from_origin():
    est = measure_rays(np.zeros(3), lambda pts: pts[:, 2] > 0, 100_000, seed=7)
    assert abs(est.value - 0.5) <= 0.0047
    assert est.error == pytest.approx(3 * math.sqrt(0.25 / 100_000), rel=1e-2)


def test_rays_depend_on_seed_and_count_only():
    member = lambda pts: pts[:, 0] > 0.3
    y = np.array([0.2, -0.1, 0.3])
    first = measure_rays(y, member, 10_000, seed=3, chunk=1000)
    second = measure_rays(y, member, 10_000, seed=3, chunk=4096)
    again = measure_rays(y, member, 10_000, seed=3)
    assert first.value == second.value == again.value
    assert measure_rays(y, member, 10_000, seed=4).value != first.value


def test_cap_measure_examples():
    origin = BallPoint.origin()
    assert cap_measure(origin, Cap.around((0, 0, 1), math.pi / 2)).value == pytest.approx(0.5, abs=1e-12)
    assert cap_measure(origin, Cap.around((0, 0, 1), math.pi / 3)).value == pytest.approx(0.25, abs=1e-12)
    assert cap_measure(np.array([0, 0, 0.5]), Cap.around((0, 0, 1), math.pi / 2)).value > 0.5


def test_cap_measure_agrees_with_rays():
    y = np.array([0.0, 0.0, 0.5])
    cap = Cap.around((0, 0, 1), math.pi / 2)
    exact = cap_measure(y, cap).value
    rays = measure_rays(y, lambda pts: cap.contains(pts), 100_000, seed=11)
    assert abs(exact - rays.value) <= rays.error


def test_cap_measure_agrees_with_kernel(raster32, rng):
    for _ in range(10):
        axis = rng.standard_normal(3)
        cap = Cap.around(axis, rng.uniform(0.4, 2.6))
        y = random_ball_points(rng, 1, 0.6)[0]
        kernel = measure_kernel(y, _cap_cells(raster32, cap), raster32)
        allowance = kernel.error + measure_kernel(y, _strip(raster32, cap), raster32).value
        assert abs(kernel.value - cap_measure(y, cap).value) <= allowance


def test_cap_measure_is_isometry_invariant(rng):
    for _ in range(20):
        f = rotation(rng.standard_normal(3), rng.uniform(0, math.pi)) @ MoebiusMap.dilation(rng.uniform(1.1, 3.0))
        cap = Cap.around(rng.standard_normal(3), rng.uniform(0.3, 2.8))
        y = BallPoint.from_vector(random_ball_points(rng, 1, 0.5)[0])
        moved = apply_ball(f, y)
        if moved.norm > 0.99:
            continue
        assert cap_measure(moved, cap.image(f)).value == pytest.approx(cap_measure(y, cap).value, abs=1e-8)


def test_kernel_measure_is_isometry_invariant(raster32, rng):
    agree = 0
    for _ in range(50):
        f = rotation(rng.standard_normal(3), rng.uniform(0, math.pi)) @ MoebiusMap.dilation(rng.uniform(1.2, 2.0))
        cap = Cap.around(rng.standard_normal(3), rng.uniform(0.5, 2.5))
        y = BallPoint.from_vector(random_ball_points(rng, 1, 0.4)[0])
        moved_cap = cap.image(f)
        moved = apply_ball(f, y)
        before = measure_kernel(y, _cap_cells(raster32, cap), raster32)
        after = measure_kernel(moved, _cap_cells(raster32, moved_cap), raster32)
        allowance = (
            before.error
            + after.error
            + measure_kernel(y, _strip(raster32, cap), raster32).value
            + measure_kernel(moved, _strip(raster32, moved_cap), raster32).value
        )
        agree += abs(before.value - after.value) <= allowance
    assert agree >= 45


def test_cap_measure_is_harmonic(rng):
    cap = Cap.around((0.3, -0.5, 0.8), 1.1)
    for y in random_ball_points(rng, 5, 0.5):
        average = _sphere_average(y, lambda p: cap_measure(p, cap).value, radius=0.3)
        assert average == pytest.approx(cap_measure(y, cap).value, abs=1e-3)


def test_kernel_and_rays_agree_on_octagon_components(octagon_chart, rng):
    agree = 0
    points = random_ball_points(rng, 20, 0.5)
    for y in points:
        label = int(rng.integers(octagon_chart.count))
        kernel = measure_kernel(y, octagon_chart.labels == label, octagon_chart.raster)
        rays = measure_rays(y, lambda pts: octagon_chart.label_of(pts) == label, 100_000, seed=int(rng.integers(1 << 30)))
        agree += abs(kernel.value - rays.value) <= kernel.error + rays.error
    assert agree >= 19
