import itertools

import numpy as np
import pytest
from scipy.spatial import cKDTree

from app.fixtures.fixtures import cyclic, free_combination, octagon, schottky
from app.kleinian.errors import ElementaryGroupError, EnumerationBudgetError, UnsupportedConstructionError
from app.kleinian.group import (
    GroupSpec,
    coset_representatives,
    enumerate_elements,
    reduce_word,
    sample_limit_set,
    subgroup,
    word_to_string,
)
from app.kleinian.moebius import apply_sphere_array


def _nearest_angles(points, reference):
    dist, _ = cKDTree(reference).query(points)
    return 2 * np.arcsin(np.clip(dist / 2, 0, 1))


def test_reduce_word_cancels_adjacent_inverses():
    word = (("a", 1), ("b", 1), ("b", -1), ("a", -1), ("a", 1))
    assert reduce_word(word) == (("a", 1),)
    assert word_to_string(()) == "e"
    assert word_to_string((("a", 1), ("b", -1))) == "a b^-1"


def test_free_group_counts(schottky_group):
    assert len(list(enumerate_elements(schottky_group, 0))) == 1
    assert len(list(enumerate_elements(schottky_group, 1))) == 5
    assert len(list(enumerate_elements(schottky_group, 2))) == 17


def test_enumeration_is_shortlex_and_matches_words(schottky_group):
    elements = list(enumerate_elements(schottky_group, 3))
    lengths = [e.length for e in elements]
    assert lengths == sorted(lengths)
    for e in elements:
        assert e.word == reduce_word(e.word)
        assert e.matrix.distance(schottky_group.evaluate(e.word)) < 1e-9


def test_octagon_relator_is_detected(octagon_group):
    elements = list(enumerate_elements(octagon_group, 2))
    words = {e.word for e in elements}
    assert len(words) == len(elements)
    assert elements[0].word == ()


def test_negative_length_rejected(schottky_group):
    with pytest.raises(ValueError):
        list(enumerate_elements(schottky_group, -1))


def test_enumeration_cap(octagon_group):
    with pytest.raises(EnumerationBudgetError):
        list(enumerate_elements(octagon_group, 4, cap=100))


def test_duplicate_labels_rejected():
    G = schottky()
    with pytest.raises(ValueError):
        GroupSpec("twice", G.generators + G.generators[:1])


def test_octagon_limit_set_on_unit_circle(octagon_samples):
    assert len(octagon_samples) > 100
    np.testing.assert_allclose(np.linalg.norm(octagon_samples, axis=1), 1.0, atol=1e-12)
    # |z| = 1 is the equator
    assert np.max(np.abs(octagon_samples[:, 2])) <= 1e-6


def test_schottky_limit_set_inside_isometric_disks(schottky_samples):
    centers = np.array([1, -1, 1j, -1j]) * 10 / np.sqrt(99)
    radius = 1 / np.sqrt(99)
    z = (schottky_samples[:, 0] + 1j * schottky_samples[:, 1]) / (1 - schottky_samples[:, 2])
    gaps = np.min(np.abs(z[:, None] - centers[None, :]), axis=1)
    assert np.all(gaps <= radius + 1e-9)


def test_limit_sample_is_generator_invariant(schottky_group):
    points = sample_limit_set(schottky_group, 5)
    for gen in schottky_group.generators:
        for f in (gen.map, gen.map.inverse()):
            moved = apply_sphere_array(f, points)
            assert np.max(_nearest_angles(moved, points)) <= 1e-6


def test_limit_sample_grows_with_depth(schottky_group):
    shallow = sample_limit_set(schottky_group, 3)
    deep = sample_limit_set(schottky_group, 4)
    assert len(deep) > len(shallow)
    assert np.max(_nearest_angles(shallow, deep)) <= 1e-6


def test_depth_zero_sample_is_empty(schottky_group):
    assert sample_limit_set(schottky_group, 0).shape == (0, 3)


def test_elementary_group_rejected():
    with pytest.raises(ElementaryGroupError):
        sample_limit_set(cyclic(), 3)


def test_subgroups_of_free_product(combination_group):
    assert subgroup(combination_group, "left").name == "octagon"
    assert subgroup(combination_group, "right").name == "cyclic"
    assert subgroup(combination_group, "all") is combination_group


def test_coset_representatives_at_length_one(combination_group):
    reps = coset_representatives(combination_group, "left", 1)
    assert sorted(word_to_string(r.word) for r in reps) == ["h", "h^-1"]
    assert all(r.word for r in reps)


def test_whole_group_has_no_representatives(combination_group):
    assert coset_representatives(combination_group, "all", 3) == []


def test_representative_count_matches_normal_forms(combination_group):
    letters = combination_group.letters()
    expected = 0
    for length in range(1, 4):
        for word in itertools.product(letters, repeat=length):
            if reduce_word(word) == word and word[-1][0] == "h":
                expected += 1
    assert len(coset_representatives(combination_group, "left", 3)) == expected


def test_raw_group_has_no_provenance(schottky_group):
    with pytest.raises(UnsupportedConstructionError):
        coset_representatives(schottky_group, "left", 1)


def test_free_combination_carries_its_summands():
    G = free_combination()
    assert G.labels == octagon().labels + cyclic().labels
