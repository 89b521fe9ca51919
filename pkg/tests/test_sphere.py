import math

import numpy as np
import pytest

from app.fixtures.fixtures import DEPTHS, equator_samples
from app.kleinian.errors import PreconditionError
from app.kleinian.group import sample_limit_set
from app.kleinian.moebius import MoebiusMap, rotation
from app.kleinian.sphere import (
    Cap,
    build_raster,
    chart_from_labels,
    chart_from_samples,
    closure_contains,
    component_image,
    jordan_flag,
    label_components,
    locate,
    mark_limit_cells,
)


def test_raster_sizes():
    assert build_raster(2).size == 24
    assert build_raster(32).size == 6144


def test_raster_rejects_tiny_resolution():
    with pytest.raises(PreconditionError):
        build_raster(1)


def test_cell_areas(raster32):
    assert raster32.areas.sum() == pytest.approx(4 * math.pi, rel=1e-9)
    assert raster32.areas.max() / raster32.areas.min() <= 2.2
    np.testing.assert_allclose(raster32.sub4_areas.sum(axis=1), raster32.areas, rtol=1e-9)


def test_neighbors_are_symmetric(raster8):
    for i, row in enumerate(raster8.neighbors):
        assert len(set(row)) == 4
        assert i not in row
        for j in row:
            assert i in raster8.neighbors[j]


def test_locate_finds_own_centers(raster8):
    np.testing.assert_array_equal(locate(raster8, raster8.centers), np.arange(raster8.size))


def test_equator_splits_sphere_in_two(equator_chart):
    assert equator_chart.count == 2
    areas = [c.area for c in equator_chart.components]
    assert abs(areas[0] - areas[1]) / max(areas) < 0.02
    assert all(c.jordan.is_jordan for c in equator_chart.components)


def test_single_sample_without_dilation_marks_its_cell(raster8):
    point = np.array([[0.3, -0.2, 0.9]])
    point /= np.linalg.norm(point)
    marked = mark_limit_cells(raster8, point, dilation=0.0)
    assert np.flatnonzero(marked).tolist() == locate(raster8, point).tolist()


def test_empty_sample_rejected(raster8):
    with pytest.raises(PreconditionError):
        mark_limit_cells(raster8, np.empty((0, 3)))


def test_fully_marked_sphere_has_no_components(raster8):
    chart = label_components(raster8, np.ones(raster8.size, dtype=bool))
    assert chart.count == 0


def test_unmarked_sphere_is_one_component(raster8):
    chart = label_components(raster8, np.zeros(raster8.size, dtype=bool))
    assert chart.count == 1
    assert chart.components[0].area == pytest.approx(4 * math.pi)
    assert chart.components[0].jordan.is_jordan is False


def test_areas_add_up(octagon_chart):
    total = sum(c.area for c in octagon_chart.components) + octagon_chart.marked_area
    assert total == pytest.approx(4 * math.pi, rel=1e-9)


def test_annulus_is_not_jordan(polar_chart):
    assert polar_chart.count == 3
    band = polar_chart.label_of(np.array([[1.0, 0.0, 0.0]]))[0]
    north = polar_chart.label_of(np.array([[0.0, 0.0, 1.0]]))[0]
    assert polar_chart.component(band).jordan.is_jordan is False
    assert polar_chart.component(band).jordan.euler == 0
    assert polar_chart.component(north).jordan.is_jordan is True


def test_schottky_domain_is_connected(schottky_chart):
    assert schottky_chart.count == 1


def test_octagon_domain_has_two_disks(octagon_chart):
    assert octagon_chart.count == 2
    assert all(c.jordan.is_jordan for c in octagon_chart.components)


def test_component_count_stable_under_refinement(schottky_samples, octagon_samples):
    fine = build_raster(64)
    assert chart_from_samples(fine, schottky_samples).count == 1
    assert chart_from_samples(fine, octagon_samples).count == 2


@pytest.mark.slow
def test_free_combination_keeps_its_image_disks(combination_group):
    # the outer disk, the big component and the two images of the outer disk under the cyclic generator
    samples = sample_limit_set(combination_group, DEPTHS["free_combination"])
    coarse = chart_from_samples(build_raster(32), samples)
    assert coarse.count >= 3
    assert chart_from_samples(build_raster(64), samples).count == coarse.count


def test_unknown_label_rejected(equator_chart):
    with pytest.raises(PreconditionError):
        equator_chart.component(5)


def test_identity_maps_every_component_to_itself(octagon_chart):
    image = component_image(octagon_chart, MoebiusMap.identity())
    assert image.mapping == {0: 0, 1: 1}
    assert image.is_bijection


def test_rotation_about_the_axis_fixes_hemispheres(equator_chart):
    image = component_image(equator_chart, rotation((0, 0, 1), 0.7))
    assert image.mapping == {0: 0, 1: 1}


def test_flip_swaps_hemispheres(equator_chart):
    image = component_image(equator_chart, rotation((1, 0, 0), math.pi))
    assert image.mapping == {0: 1, 1: 0}


def test_octagon_generators_preserve_components(octagon_group, octagon_chart):
    for gen in octagon_group.generators:
        image = component_image(octagon_chart, gen.map)
        assert image.mapping == {0: 0, 1: 1}


def test_images_deep_in_marked_cells_leave_the_label_undefined(raster32):
    # north hemisphere, a 20 degree cap about the south pole, the rest of the south marked
    z = raster32.centers[:, 2]
    labels = np.where(z > 0, 0, np.where(z < -math.cos(math.radians(20)), 1, -1))
    chart = chart_from_labels(raster32, labels)
    image = component_image(chart, rotation((1, 0, 0), math.pi))
    assert 0 in image.undefined
    assert 0 not in image.mapping
    assert image.mapping == {1: 0}
    assert not image.is_bijection


def test_closure_contains_examples(equator_chart):
    north = int(equator_chart.label_of(np.array([[0.0, 0.0, 1.0]]))[0])
    south = 1 - north
    assert closure_contains(equator_chart, north, equator_samples(256)).is_inside
    assert closure_contains(equator_chart, south, np.array([[0.0, 0.0, 1.0]])).is_outside

    below = -0.2
    mixed = np.array([[0.0, 0.0, 1.0], [math.cos(below), 0.0, math.sin(below)]])
    assert closure_contains(equator_chart, north, mixed).is_uncertain


def test_empty_point_set_is_contained(equator_chart):
    assert closure_contains(equator_chart, 0, np.empty((0, 3))).is_inside


def test_cap_image_under_moebius_map():
    cap = Cap.around((0.0, 0.0, -1.0), math.radians(40)).complement()
    image = cap.image(MoebiusMap.dilation(30.0))
    moved = image.contains(np.array([[0.0, 0.0, 1.0]]))
    assert moved.all()
    # z ↦ 30z sends the boundary circle |z| = tan 20° to |z| = 30 tan 20°
    expected = 2 * math.atan(1 / (30 * math.tan(math.radians(20))))
    assert image.half_angle == pytest.approx(expected, abs=1e-9)
    np.testing.assert_allclose(image.array, [0, 0, 1], atol=1e-9)


def test_cap_separation():
    south = Cap.inside_circle(1.0)
    north = Cap.outside_circle(2.0)
    assert south.separation(north) > 0
    assert south.separation(south.complement()) == pytest.approx(0.0, abs=1e-12)


def test_jordan_flag_by_label(polar_chart):
    south = int(polar_chart.label_of(np.array([[0.0, 0.0, -1.0]]))[0])
    flag = jordan_flag(polar_chart, south)
    assert flag.is_jordan is True
    assert flag.euler == 1
    with pytest.raises(PreconditionError):
        jordan_flag(polar_chart, polar_chart.count)
