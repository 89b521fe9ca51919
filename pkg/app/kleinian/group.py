# app/kleinian/group.py
"""Finitely generated Kleinian groups: generators, words and limit-set samples."""
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from app.kleinian.errors import ElementaryGroupError, EnumerationBudgetError, UnsupportedConstructionError
from app.kleinian.moebius import (
    MapKind,
    MoebiusMap,
    apply_matrices_to_point,
    attracting_fixed_points,
    classify,
    fixed_points,
    loxodromic_mask,
    normalize_matrices,
)
from app.kleinian.sphere import Cap
from config import settings

logger = logging.getLogger(__name__)

Letter = Tuple[str, int]
Word = Tuple[Letter, ...]


def word_to_string(word: Word) -> str:
    if not word:
        return "e"
    return " ".join(label if power == 1 else f"{label}^-1" for label, power in word)


def reduce_word(word: Sequence[Letter]) -> Word:
    out: List[Letter] = []
    for label, power in word:
        if out and out[-1] == (label, -power):
            out.pop()
        else:
            out.append((label, power))
    return tuple(out)


@dataclass(frozen=True)
class Generator:
    label: str
    map: MoebiusMap


@dataclass(frozen=True)
class Raw:
    kind = "raw"


@dataclass(frozen=True)
class FreeProduct:
    left: "GroupSpec"
    right: "GroupSpec"
    caps: Optional[Tuple[Cap, Cap]] = None
    kind = "free_product"


@dataclass(frozen=True)
class HNN:
    base: "GroupSpec"
    stable: Generator
    kind = "hnn"


Construction = Union[Raw, FreeProduct, HNN]


@dataclass(frozen=True)
class GroupSpec:
    name: str
    generators: Tuple[Generator, ...]
    construction: Construction = Raw()

    def __post_init__(self):
        labels = [g.label for g in self.generators]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate generator labels in group '{self.name}': {labels}")

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(g.label for g in self.generators)

    def generator(self, label: str) -> MoebiusMap:
        for g in self.generators:
            if g.label == label:
                return g.map
        raise KeyError(label)

    def letters(self) -> List[Letter]:
        """Letters in shortlex order: g1, g1^-1, g2, g2^-1, ..."""
        return [(g.label, p) for g in self.generators for p in (1, -1)]

    def letter_map(self, letter: Letter) -> MoebiusMap:
        f = self.generator(letter[0])
        return f if letter[1] == 1 else f.inverse()

    def evaluate(self, word: Sequence[Letter]) -> MoebiusMap:
        result = MoebiusMap.identity()
        for letter in word:
            result = result @ self.letter_map(letter)
        return result


def free_product(name: str, left: GroupSpec, right: GroupSpec, caps: Optional[Tuple[Cap, Cap]] = None) -> GroupSpec:
    return GroupSpec(name, left.generators + right.generators, FreeProduct(left, right, caps))


def hnn_extension(name: str, base: GroupSpec, stable_label: str, stable: MoebiusMap) -> GroupSpec:
    gen = Generator(stable_label, stable)
    return GroupSpec(name, base.generators + (gen,), HNN(base, gen))


@dataclass(frozen=True)
class GroupElement:
    word: Word
    matrix: MoebiusMap

    @property
    def length(self) -> int:
        return len(self.word)

    def __str__(self) -> str:
        return word_to_string(self.word)


def _vectors(mats: np.ndarray) -> np.ndarray:
    flat = mats.reshape(len(mats), 4)
    return np.concatenate([flat.real, flat.imag], axis=1)


def _duplicates(vecs: np.ndarray, previous: Optional[cKDTree], tol: float) -> np.ndarray:
    """Flags rows equal (up to sign) to an earlier row or to an already kept element."""
    dup = np.zeros(len(vecs), dtype=bool)
    if previous is not None:
        for signed in (vecs, -vecs):
            dist, _ = previous.query(signed, distance_upper_bound=tol)
            dup |= np.isfinite(dist)
    n = len(vecs)
    pairs = cKDTree(np.vstack([vecs, -vecs])).query_pairs(tol, output_type="ndarray")
    if len(pairs):
        i, j = pairs[:, 0] % n, pairs[:, 1] % n
        distinct = i != j
        dup[np.maximum(i, j)[distinct]] = True
    return dup


def _levels(G: GroupSpec, L: int, cap: int, tol: float) -> Iterator[Tuple[List[Word], np.ndarray]]:
    """Words and matrices level by level; each level is shortlex ordered and deduplicated."""
    letters = G.letters()
    gen_mats = np.array([G.letter_map(letter).matrix for letter in letters])
    inverse_of = np.array([i ^ 1 for i in range(len(letters))])

    words: List[Word] = [()]
    mats = np.eye(2, dtype=complex)[None, :, :]
    last = np.array([-1])
    kept_vecs = _vectors(mats)
    total = 1
    yield words, mats

    for length in range(1, L + 1):
        prefix_idx, letter_idx = [], []
        for j in range(len(letters)):
            ok = np.flatnonzero(last != inverse_of[j])
            prefix_idx.append(ok)
            letter_idx.append(np.full(len(ok), j))
        prefix_idx = np.concatenate(prefix_idx)
        letter_idx = np.concatenate(letter_idx)
        order = np.lexsort((letter_idx, prefix_idx))
        prefix_idx, letter_idx = prefix_idx[order], letter_idx[order]

        cand = normalize_matrices(mats[prefix_idx] @ gen_mats[letter_idx])
        vecs = _vectors(cand)
        dup = _duplicates(vecs, cKDTree(kept_vecs), tol)
        keep = np.flatnonzero(~dup)
        total += len(keep)
        if total > cap:
            raise EnumerationBudgetError(
                f"word enumeration of '{G.name}' to length {L} exceeds the cap of {cap} elements"
            )

        words = [words[prefix_idx[k]] + (letters[letter_idx[k]],) for k in keep]
        mats = cand[keep]
        last = letter_idx[keep]
        kept_vecs = np.vstack([kept_vecs, vecs[keep]])
        logger.debug(f"{G.name}: {len(keep)} new elements at length {length} ({int(dup.sum())} coincidences)")
        yield words, mats
        if not len(keep):
            break


def enumerate_elements(
    G: GroupSpec, L: int, cap: Optional[int] = None, tol: Optional[float] = None
) -> Iterator[GroupElement]:
    """All distinct elements of word length ≤ L, each under its shortlex-least word."""
    if L < 0:
        raise ValueError("word length must be nonnegative")
    cap = cap or settings.ENUMERATION_CAP
    tol = settings.MATRIX_DEDUP_TOL if tol is None else tol
    for words, mats in _levels(G, L, cap, tol):
        for word, m in zip(words, mats):
            yield GroupElement(word, MoebiusMap(m[0, 0], m[0, 1], m[1, 0], m[1, 1]))


def element_matrices(G: GroupSpec, L: int, cap: Optional[int] = None) -> Tuple[List[Word], np.ndarray]:
    """Flat (words, matrices) of all elements of length ≤ L, in shortlex order."""
    cap = cap or settings.ENUMERATION_CAP
    all_words: List[Word] = []
    all_mats = []
    for words, mats in _levels(G, L, cap, settings.MATRIX_DEDUP_TOL):
        all_words.extend(words)
        all_mats.append(mats)
    return all_words, np.concatenate(all_mats)


def check_nonelementary(G: GroupSpec) -> MoebiusMap:
    """Returns the first loxodromic generator, or rejects the group as elementary."""
    loxodromic = [g.map for g in G.generators if classify(g.map) is MapKind.LOXODROMIC]
    pairs = [np.array([p.array for p in fixed_points(f)]) for f in loxodromic]
    for i in range(len(pairs)):
        for j in range(i + 1, len(pairs)):
            same = np.allclose(pairs[i], pairs[j], atol=1e-9) or np.allclose(pairs[i], pairs[j][::-1], atol=1e-9)
            if not same:
                return loxodromic[0]
    raise ElementaryGroupError(
        f"group '{G.name}' is elementary: it needs two loxodromic generators with distinct fixed points"
    )


def dedupe_points(points: np.ndarray, tol: float) -> np.ndarray:
    """Keep the first of every cluster of unit vectors closer than tol."""
    if len(points) == 0:
        return points
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    drop = np.zeros(len(points), dtype=bool)
    if len(pairs):
        drop[pairs.max(axis=1)] = True
    return points[~drop]


def sample_limit_set(G: GroupSpec, L: int, cap: Optional[int] = None) -> np.ndarray:
    """Unit vectors sampling Λ(G).

    Attracting fixed points of loxodromic elements of length ≤ L, together with
    the orbit of one limit point (the attracting fixed point of the first
    loxodromic generator) under all elements of length ≤ L.

    The orbit runs over every word of length at most L, not only length exactly L.
    That is a superset of the length-L orbit and still lies in Λ(G), because the
    base point is itself a limit point; the shorter words fill the gaps the
    length-L images leave near the base point.
    """
    anchor = check_nonelementary(G)
    cap = cap or settings.LIMIT_POINT_CAP
    if L == 0:
        logger.warning(f"Depth 0 yields no limit points for '{G.name}'")
        return np.empty((0, 3))
    _, mats = element_matrices(G, L)
    base = fixed_points(anchor)[0].array

    lox = loxodromic_mask(mats)
    points = np.vstack([attracting_fixed_points(mats[lox]), apply_matrices_to_point(mats, base)])
    points = dedupe_points(points, settings.ANGULAR_DEDUP_TOL)
    if len(points) > cap:
        raise EnumerationBudgetError(
            f"limit-set sample of '{G.name}' at length {L} has {len(points)} points, over the cap of {cap}"
        )
    logger.info(f"Sampled {len(points)} limit points of '{G.name}' from {len(mats)} elements (L={L})")
    return points


def subgroup_labels(G: GroupSpec, summand: str) -> Tuple[str, ...]:
    construction = G.construction
    if isinstance(construction, FreeProduct):
        if summand == "left":
            return construction.left.labels
        if summand == "right":
            return construction.right.labels
    elif isinstance(construction, HNN):
        if summand == "base":
            return construction.base.labels
    else:
        raise UnsupportedConstructionError(
            f"group '{G.name}' has no construction provenance; subgroup membership is undecidable numerically"
        )
    if summand == "all":
        return G.labels
    raise ValueError(f"unknown summand selector '{summand}' for a {construction.kind} construction")


def subgroup(G: GroupSpec, summand: str) -> GroupSpec:
    construction = G.construction
    if isinstance(construction, FreeProduct) and summand in ("left", "right"):
        return getattr(construction, summand)
    if isinstance(construction, HNN) and summand == "base":
        return construction.base
    if summand == "all":
        return G
    subgroup_labels(G, summand)
    raise ValueError(f"unknown summand selector '{summand}'")


def coset_representatives(G: GroupSpec, summand: str, L: int) -> List[GroupElement]:
    """One element per left coset γΓ′ with γ ∉ Γ′, up to word length L.

    Representatives are the reduced words whose last letter lies outside Γ′.
    For HNN extensions this is syntactic: it treats every word ending in the
    stable letter as outside the base.
    """
    inside = set(subgroup_labels(G, summand))
    reps = [e for e in enumerate_elements(G, L) if e.word and e.word[-1][0] not in inside]
    logger.info(f"{len(reps)} coset representatives of '{summand}' in '{G.name}' up to length {L}")
    return reps
