import math

import numpy as np
import pytest

from app.fixtures.fixtures import equator_samples
from app.kleinian.cores import (
    HullQuery,
    SliceState,
    chart_region,
    check_v_subset_c,
    combine_verdicts,
    convex_member,
    convex_region,
    emptiness_probe,
    half_level,
    random_ball_points,
    round_disk_components,
    separation_witness,
    slice_classify,
    to_klein,
    visual_member,
)
from app.kleinian.combination import limit_points
from app.kleinian.errors import DegenerateSampleError, NonBracketingError, PreconditionError
from app.kleinian.harmonic import measure_kernel_labels
from app.kleinian.moebius import ball_translation
from app.kleinian.sphere import build_raster, chart_from_labels, chart_from_samples
from app.kleinian.verdict import Verdict

NORTH = np.array([0.0, 0.0, 1.0])
SOUTH = np.array([0.0, 0.0, -1.0])


def test_hemispheres_seen_from_origin_are_balanced(hemisphere_chart):
    q = HullQuery(hemisphere_chart)
    assert visual_member(np.zeros(3), q).is_uncertain
    assert visual_member(np.array([0.0, 0.0, 0.3]), q).is_outside


def test_empty_filter_accepts_everything(octagon_chart):
    q = HullQuery(octagon_chart, ())
    assert visual_member(np.array([0.0, 0.0, 0.9]), q).is_inside


def test_unknown_filter_rejected(octagon_chart):
    with pytest.raises(PreconditionError):
        HullQuery(octagon_chart, "most")
    with pytest.raises(PreconditionError):
        HullQuery(octagon_chart, (7,))


def test_filter_is_monotone(octagon_chart, rng):
    every = HullQuery(octagon_chart, "all")
    one = HullQuery(octagon_chart, (0,))
    for y in random_ball_points(rng, 30, 0.6):
        if visual_member(y, every).is_inside:
            assert visual_member(y, one).is_inside


def test_octagon_plane_is_never_outside(octagon_chart, octagon_samples, rng):
    q = HullQuery(octagon_chart)
    region = convex_region(octagon_samples)
    for _ in range(100):
        r, phi = 0.6 * math.sqrt(rng.random()), 2 * math.pi * rng.random()
        y = np.array([r * math.cos(phi), r * math.sin(phi), 0.0])
        assert not visual_member(y, q).is_outside
        assert not region.member(y).is_outside


def test_points_off_the_octagon_plane_are_outside(octagon_chart, octagon_samples, rng):
    q = HullQuery(octagon_chart)
    region = convex_region(octagon_samples)
    lift = math.tanh(0.3 / 2)
    for _ in range(100):
        r, phi = 0.3 * math.sqrt(rng.random()), 2 * math.pi * rng.random()
        foot = np.array([r * math.cos(phi), r * math.sin(phi), 0.0])
        side = 1.0 if rng.random() < 0.5 else -1.0
        # distance 0.3 from the plane along the perpendicular at the foot
        y = ball_translation(foot).forward_interior(np.array([0.0, 0.0, side * lift]))
        assert visual_member(y, q).is_outside
        assert region.member(y).is_outside
        assert chart_region(octagon_chart).member(y).is_outside


def test_convex_member_examples():
    equator = equator_samples(256)
    assert convex_member(np.zeros(3), equator).is_inside
    assert convex_member(np.array([0.0, 0.0, 0.5]), equator).is_outside

    corners = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / math.sqrt(3)
    assert convex_member(np.zeros(3), corners).is_inside
    assert convex_member(np.array([0.0, 0.0, -0.9]), corners).is_outside


def test_klein_coordinates_keep_the_boundary():
    assert np.linalg.norm(to_klein(np.array([0.6, 0.0, 0.0]))) == pytest.approx(1.2 / 1.36)


def test_degenerate_samples_rejected():
    with pytest.raises(DegenerateSampleError):
        convex_region(np.array([[1.0, 0, 0], [0, 1.0, 0]]))
    with pytest.raises(DegenerateSampleError):
        convex_region(np.array([[1.0, 0, 0], [-1.0, 0, 0], [1.0, 0, 0], [-1.0, 0, 0]]))


def test_three_samples_need_the_planar_flag():
    triangle = np.array([[1.0, 0, 0], [0, 1.0, 0], [-1.0, 0, 0]])
    with pytest.raises(DegenerateSampleError):
        convex_region(triangle)
    region = convex_region(triangle, planar=True)
    assert region.planar
    assert region.member(np.array([0.0, 0.3, 0.0])).is_inside
    assert region.member(np.array([0.0, -0.3, 0.0])).is_outside


def test_flat_samples_refused_when_a_solid_hull_is_required():
    with pytest.raises(DegenerateSampleError):
        convex_region(equator_samples(64), planar=False)
    assert convex_region(equator_samples(64)).planar


def test_separation_witness_sees_more_than_half():
    region = convex_region(equator_samples(256))
    cap, est = separation_witness(np.array([0.0, 0.0, 0.5]), region)
    assert est.value > 0.5
    assert cap.contains(NORTH[None, :]).all()
    assert separation_witness(np.zeros(3), region) is None


def test_half_level_between_hemispheres(hemisphere_chart):
    north = int(hemisphere_chart.label_of(NORTH[None, :])[0])
    x = half_level(NORTH, SOUTH, north, hemisphere_chart)
    assert np.linalg.norm(x.array) < 5e-3


def test_half_level_on_octagon_lies_near_the_plane(octagon_chart):
    north = int(octagon_chart.label_of(NORTH[None, :])[0])
    x = half_level(NORTH, SOUTH, north, octagon_chart)
    assert abs(x.w) <= 2e-2


def test_half_level_needs_two_components(equator_chart):
    north = int(equator_chart.label_of(NORTH[None, :])[0])
    with pytest.raises(NonBracketingError):
        half_level(NORTH, np.array([0.0, 0.6, 0.8]), north, equator_chart)
    with pytest.raises(PreconditionError):
        half_level(SOUTH, NORTH, north, equator_chart)


def test_combine_verdicts_table():
    inside, outside, unsure = Verdict.inside(0.1), Verdict.outside(0.1), Verdict.uncertain(0.1)
    assert combine_verdicts(inside, inside) is SliceState.V
    assert combine_verdicts(outside, inside) is SliceState.C_ONLY
    assert combine_verdicts(outside, outside) is SliceState.OUTSIDE
    assert combine_verdicts(unsure, outside) is SliceState.OUTSIDE
    assert combine_verdicts(inside, outside) is SliceState.UNCERTAIN
    assert combine_verdicts(unsure, inside) is SliceState.UNCERTAIN


def test_octagon_slice_has_no_outside_pixels_in_plane(octagon_chart, octagon_samples):
    q = HullQuery(octagon_chart)
    result = slice_classify(np.zeros(3), [1, 0, 0], [0, 1, 0], 0.6, 8, q, octagon_samples)
    assert result.count(SliceState.OUTSIDE) == 0
    assert result.count(SliceState.C_ONLY) == 0
    assert len(result.records()) == 64


def test_schottky_slice_has_no_visual_hull(schottky_chart, schottky_samples):
    q = HullQuery(schottky_chart)
    result = slice_classify(np.zeros(3), [1, 0, 0], [0, 1, 0], 0.7, 8, q, schottky_samples)
    assert result.count(SliceState.V) == 0


def test_slice_pixels_outside_the_ball(octagon_chart, octagon_samples):
    result = slice_classify(np.zeros(3), [1, 0, 0], [0, 0, 1], 1.0, 2, HullQuery(octagon_chart), octagon_samples)
    assert result.states.shape == (2, 2)
    wide = slice_classify(np.zeros(3), [1, 0, 0], [0, 0, 1], 1.6, 2, HullQuery(octagon_chart), octagon_samples)
    assert wide.count(SliceState.OUTSIDE) == 4
    assert np.isnan(wide.visual_margin).all()


def test_visual_hull_inside_convex_hull_for_octagon(octagon_chart):
    report = check_v_subset_c(HullQuery(octagon_chart), None, 200, seed=5)
    assert report.accepted > 0
    assert report.passed


def test_marked_cell_hull_holds_the_thickened_visual_hull(octagon_chart, octagon_samples):
    # the raster widens the limit set into a band, so visual-hull points sit just off the plane
    y = np.array([0.0, 0.0, 0.015])
    q = HullQuery(octagon_chart)
    assert visual_member(y, q).is_inside
    assert convex_region(octagon_samples).member(y, q.tau).is_outside
    assert chart_region(octagon_chart).member(y, q.tau).is_inside


def test_schottky_inclusion_is_vacuous(schottky_chart, schottky_samples):
    report = check_v_subset_c(HullQuery(schottky_chart), schottky_samples, 10, seed=5)
    assert report.vacuous
    assert report.passed
    assert report.attempts == 10 * 60


def test_emptiness_probe_outcomes(hemisphere_chart, schottky_chart, raster8):
    witness = emptiness_probe(hemisphere_chart, 10, seed=1)
    assert witness.kind == "witness"
    assert abs(witness.witness.w) < 5e-3

    empty = emptiness_probe(schottky_chart, 100, seed=1)
    assert empty.kind == "empty"
    assert empty.min_h >= 0.9

    full = chart_from_labels(raster8, np.full(raster8.size, -1))
    assert emptiness_probe(full, 10, seed=1).kind == "full"


@pytest.mark.slow
def test_emptiness_outcomes_hold_at_double_resolution(schottky_samples, octagon_samples):
    fine = build_raster(64)
    empty = emptiness_probe(chart_from_samples(fine, schottky_samples), 100, seed=1)
    assert empty.kind == "empty"
    assert empty.min_h >= 0.9
    assert emptiness_probe(chart_from_samples(fine, octagon_samples), 10, seed=1).kind == "witness"


def test_octagon_witness_is_on_the_half_level(octagon_chart):
    result = emptiness_probe(octagon_chart, 10, seed=1)
    assert result.kind == "witness"
    h, _ = measure_kernel_labels(result.witness.array, octagon_chart)
    assert np.any(np.abs(h - 0.5) <= 1e-3)


def test_round_disk_components(octagon_chart, schottky_chart):
    round_, reports = round_disk_components(octagon_chart)
    assert round_
    assert len(reports) == 2
    assert not round_disk_components(schottky_chart)[0]


@pytest.mark.slow
def test_visual_hull_inside_convex_hull_for_free_combination(combination_group):
    chart = chart_from_samples(build_raster(32), limit_points(combination_group, 4))
    report = check_v_subset_c(HullQuery(chart), None, 200, seed=9)
    assert report.passed
