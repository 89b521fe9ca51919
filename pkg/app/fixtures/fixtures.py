# app/fixtures/fixtures.py
"""Shipped groups and synthetic limit samples."""
import cmath
import math
from typing import Callable, Dict

import numpy as np

from app.kleinian.group import Generator, GroupSpec, free_product
from app.kleinian.moebius import MoebiusMap, rotation
from app.kleinian.sphere import Cap

# regular octagon side pairings, invariant circle |z| = 1
OCTAGON_ALPHA = 1 + math.sqrt(2)
OCTAGON_BETA = math.sqrt(2 + 2 * math.sqrt(2))

# isometric disks centered at ±1.005, ±1.005i with radius 1/√99
SCHOTTKY_A = (10, math.sqrt(99), math.sqrt(99), 10)
SCHOTTKY_B = (10, 1j * math.sqrt(99), -1j * math.sqrt(99), 10)

# in w = 1/z the cyclic generator is w ↦ c + r²/(w + c): it maps the outside of
# |w + c| = r onto the inside of |w − c| = r, both disks within |w| < 1/OUTER_RADIUS
CYCLIC_C = 0.32
CYCLIC_R = 0.295

# octagon elements move ∞ by at least 2·acosh(1 + √2), which fits |z| > INNER_RADIUS twice
INNER_RADIUS = 1.5625
OUTER_RADIUS = 1.6125


def octagon() -> GroupSpec:
    omega = cmath.exp(1j * math.pi / 4)
    gens = tuple(
        Generator(
            label,
            MoebiusMap.from_entries(
                OCTAGON_ALPHA, OCTAGON_BETA * omega ** k, OCTAGON_BETA * omega ** (-k), OCTAGON_ALPHA
            ),
        )
        for k, label in enumerate("abcd")
    )
    return GroupSpec("octagon", gens)


def schottky() -> GroupSpec:
    return GroupSpec(
        "schottky",
        (
            Generator("a", MoebiusMap.from_entries(*SCHOTTKY_A)),
            Generator("b", MoebiusMap.from_entries(*SCHOTTKY_B)),
        ),
    )


def cyclic() -> GroupSpec:
    c, r = CYCLIC_C, CYCLIC_R
    h = MoebiusMap.from_entries(c, 1.0, c * c + r * r, c)
    return GroupSpec("cyclic", (Generator("h", h),))


def combination_caps():
    return Cap.inside_circle(INNER_RADIUS), Cap.outside_circle(OUTER_RADIUS)


def free_combination() -> GroupSpec:
    return free_product("free_combination", octagon(), cyclic(), combination_caps())


def corrupted() -> GroupSpec:
    """free_combination with the loxodromic summand swapped for a quarter-turn about the real axis."""
    turn = GroupSpec("quarter_turn", (Generator("r", rotation((1.0, 0.0, 0.0), math.pi / 2)),))
    return free_product("corrupted", octagon(), turn)


BUILTINS: Dict[str, Callable[[], GroupSpec]] = {
    "octagon": octagon,
    "schottky": schottky,
    "cyclic": cyclic,
    "free_combination": free_combination,
    "corrupted": corrupted,
}

# shipped fixtures that `verify all` runs when no group file is given
SHIPPED = ("octagon", "schottky", "free_combination")


def circle_samples(center, angle: float, count: int = 2048) -> np.ndarray:
    """Points on the circle at angular radius `angle` about `center`."""
    return Cap.around(center, angle).boundary(count)


def equator_samples(count: int = 2048) -> np.ndarray:
    return circle_samples((0.0, 0.0, 1.0), math.pi / 2, count)


def polar_circle_samples(angle: float = math.radians(40), count: int = 2048) -> np.ndarray:
    """Two circles at the same angular radius about the north and south poles."""
    return np.vstack(
        [circle_samples((0.0, 0.0, 1.0), angle, count), circle_samples((0.0, 0.0, -1.0), angle, count)]
    )


# maps the complement of the southern 40° cap deep into the northern one
TYPE_II_GAMMA = MoebiusMap.dilation(30.0)

# limit-sample word lengths that keep each shipped group under the enumeration cap
DEPTHS: Dict[str, int] = {
    "octagon": 5,
    "schottky": 8,
    "cyclic": 6,
    "free_combination": 4,
    "corrupted": 4,
}
