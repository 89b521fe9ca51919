# app/kleinian/sphere.py
"""Cube-sphere raster of the sphere at infinity and component charts of Ω(Γ)."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from app.kleinian.errors import PreconditionError
from app.kleinian.moebius import MoebiusMap, apply_sphere_array, stereo
from app.kleinian.verdict import Verdict
from config import settings

logger = logging.getLogger(__name__)

# (normal, u, v) per cube face
FACES = np.array(
    [
        [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        [[-1, 0, 0], [0, -1, 0], [0, 0, 1]],
        [[0, 1, 0], [-1, 0, 0], [0, 0, 1]],
        [[0, -1, 0], [1, 0, 0], [0, 0, 1]],
        [[0, 0, 1], [1, 0, 0], [0, 1, 0]],
        [[0, 0, -1], [1, 0, 0], [0, -1, 0]],
    ],
    dtype=float,
)

_CORNER_SNAP = 1e-9
_SMALL_LABEL = 8
_REPRESENTATIVES = 16


def angle_between(u, v) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    # atan2 form stays accurate for nearly parallel vectors
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    return np.arctan2(cross, np.sum(u * v, axis=-1))


def chord(angle: float) -> float:
    return 2.0 * math.sin(min(angle, math.pi) / 2.0)


# ------------------------------------------------------------------------- caps

@dataclass(frozen=True)
class Cap:
    """Closed round cap {v : angle(v, center) ≤ half_angle}."""

    center: Tuple[float, float, float]
    half_angle: float

    @classmethod
    def around(cls, center, half_angle: float) -> "Cap":
        c = np.asarray(center, dtype=float)
        c = c / np.linalg.norm(c)
        return cls(tuple(float(t) for t in c), float(half_angle))

    @classmethod
    def inside_circle(cls, radius: float) -> "Cap":
        """The disk |z| ≤ radius, a cap about the south pole."""
        w = (radius ** 2 - 1) / (radius ** 2 + 1)
        return cls.around((0, 0, -1), math.acos(-w))

    @classmethod
    def outside_circle(cls, radius: float) -> "Cap":
        """The disk |z| ≥ radius together with ∞, a cap about the north pole."""
        w = (radius ** 2 - 1) / (radius ** 2 + 1)
        return cls.around((0, 0, 1), math.acos(w))

    @classmethod
    def from_disk(cls, center: complex, radius: float) -> "Cap":
        """Image of the closed Euclidean disk |z − center| ≤ radius."""
        angles = np.array([0.0, 2 * math.pi / 3, 4 * math.pi / 3])
        pts = np.array([stereo(center + radius * complex(math.cos(a), math.sin(a))) for a in angles])
        normal = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        normal /= np.linalg.norm(normal)
        offset = float(normal @ pts[0])
        if normal @ stereo(center) < offset:
            normal, offset = -normal, -offset
        return cls.around(normal, math.acos(float(np.clip(offset, -1.0, 1.0))))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.center)

    def complement(self) -> "Cap":
        return Cap(tuple(-t for t in self.center), math.pi - self.half_angle)

    def margin(self, vecs) -> np.ndarray:
        """Signed angular distance inside the cap (negative outside)."""
        return self.half_angle - angle_between(np.asarray(vecs, dtype=float), self.array)

    def contains(self, vecs, slack: float = 0.0) -> np.ndarray:
        return self.margin(vecs) >= -slack

    def boundary(self, count: int) -> np.ndarray:
        c = self.array
        helper = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        e1 = np.cross(c, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(c, e1)
        phi = np.linspace(0.0, 2 * math.pi, count, endpoint=False)
        ring = np.cos(phi)[:, None] * e1 + np.sin(phi)[:, None] * e2
        return math.cos(self.half_angle) * c + math.sin(self.half_angle) * ring

    def separation(self, other: "Cap") -> float:
        """Angular gap between two caps (negative when they overlap)."""
        return float(angle_between(self.array, other.array)) - self.half_angle - other.half_angle

    def image(self, f: MoebiusMap) -> "Cap":
        """The cap f(self); Möbius maps send circles to circles."""
        ring = apply_sphere_array(f, self.boundary(3))
        normal = np.cross(ring[1] - ring[0], ring[2] - ring[0])
        normal /= np.linalg.norm(normal)
        offset = float(normal @ ring[0])
        inner = apply_sphere_array(f, self.array[None, :])[0]
        if normal @ inner < offset:
            normal, offset = -normal, -offset
        return Cap.around(normal, math.acos(float(np.clip(offset, -1.0, 1.0))))


# ----------------------------------------------------------------------- raster

def _face_points(face: int, alpha, beta) -> np.ndarray:
    n_vec, u_vec, v_vec = FACES[face]
    pts = n_vec + np.tan(alpha)[..., None] * u_vec + np.tan(beta)[..., None] * v_vec
    return pts / np.linalg.norm(pts, axis=-1, keepdims=True)


def _patch_area(x0, x1, y0, y1):
    def F(x, y):
        return np.arctan(x * y / np.sqrt(1 + x * x + y * y))

    return F(x1, y1) - F(x0, y1) - F(x1, y0) + F(x0, y0)


def _subdivide(alpha0, beta0, step: float, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """k×k sub-cell centers (as angles) and exact sub-areas for cells with lower corners (alpha0, beta0)."""
    sub = step / k
    offs = (np.arange(k) + 0.5) * sub
    da, db = np.meshgrid(offs, offs, indexing="ij")
    a = alpha0[:, None] + da.ravel()[None, :]
    b = beta0[:, None] + db.ravel()[None, :]
    area = _patch_area(
        np.tan(a - sub / 2), np.tan(a + sub / 2), np.tan(b - sub / 2), np.tan(b + sub / 2)
    )
    return a, b, area


@dataclass(eq=False)
class SphereRaster:
    n: int
    centers: np.ndarray
    areas: np.ndarray
    neighbors: np.ndarray
    corner_ids: np.ndarray
    sub2_points: np.ndarray
    sub2_areas: np.ndarray
    sub4_points: np.ndarray
    sub4_areas: np.ndarray
    tree: cKDTree = field(repr=False)
    adjacency: csr_matrix = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.centers)

    @property
    def step(self) -> float:
        return math.pi / (2 * self.n)

    @property
    def cell_size(self) -> float:
        return self.step

    @property
    def diagonal(self) -> float:
        return math.sqrt(2.0) * self.step

    def default_dilation(self) -> float:
        return settings.DILATION_CELLS * self.diagonal


def build_raster(n: int) -> SphereRaster:
    if n < settings.MIN_RESOLUTION:
        raise PreconditionError(f"raster resolution must be at least {settings.MIN_RESOLUTION}, got {n}")
    step = math.pi / (2 * n)
    idx = np.arange(n)
    ii, jj = np.meshgrid(idx, idx, indexing="ij")
    alpha0 = (-math.pi / 4 + ii * step).ravel()
    beta0 = (-math.pi / 4 + jj * step).ravel()

    centers, areas, corners = [], [], []
    sub2_p, sub2_a, sub4_p, sub4_a = [], [], [], []
    for f in range(6):
        centers.append(_face_points(f, alpha0 + step / 2, beta0 + step / 2))
        areas.append(
            _patch_area(np.tan(alpha0), np.tan(alpha0 + step), np.tan(beta0), np.tan(beta0 + step))
        )
        corners.append(
            np.stack(
                [
                    _face_points(f, alpha0, beta0),
                    _face_points(f, alpha0 + step, beta0),
                    _face_points(f, alpha0 + step, beta0 + step),
                    _face_points(f, alpha0, beta0 + step),
                ],
                axis=1,
            )
        )
        for k, pts_out, areas_out in ((2, sub2_p, sub2_a), (4, sub4_p, sub4_a)):
            a, b, area = _subdivide(alpha0, beta0, step, k)
            pts_out.append(_face_points(f, a, b))
            areas_out.append(area)

    centers = np.concatenate(centers)
    corners = np.concatenate(corners)
    raster_tree = cKDTree(centers)

    # corner identification across cube seams
    flat = corners.reshape(-1, 3)
    pairs = cKDTree(flat).query_pairs(_CORNER_SNAP, output_type="ndarray")
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(flat), len(flat)))
    _, corner_labels = connected_components(graph, directed=False)
    corner_ids = corner_labels.reshape(-1, 4)

    partial = SphereRaster(
        n=n,
        centers=centers,
        areas=np.concatenate(areas),
        neighbors=np.zeros((0, 4), dtype=int),
        corner_ids=corner_ids,
        sub2_points=np.concatenate(sub2_p),
        sub2_areas=np.concatenate(sub2_a),
        sub4_points=np.concatenate(sub4_p),
        sub4_areas=np.concatenate(sub4_a),
        tree=raster_tree,
        adjacency=csr_matrix((6 * n * n, 6 * n * n)),
    )

    # one quarter step past each edge midpoint lands in the adjacent cell, across seams too
    push = step / 2 + step / 4
    neighbors = []
    ac, bc = alpha0 + step / 2, beta0 + step / 2
    for da, db in ((push, 0.0), (-push, 0.0), (0.0, push), (0.0, -push)):
        probes = np.concatenate([_face_points(f, ac + da, bc + db) for f in range(6)])
        neighbors.append(locate(partial, probes))
    neighbors = np.stack(neighbors, axis=1)

    rows = np.repeat(np.arange(len(centers)), 4)
    adjacency = csr_matrix(
        (np.ones(len(rows)), (rows, neighbors.ravel())), shape=(len(centers), len(centers))
    )
    partial.neighbors = neighbors
    partial.adjacency = adjacency
    logger.debug(f"Built cube-sphere raster n={n} with {len(centers)} cells")
    return partial


def locate(raster: SphereRaster, points) -> np.ndarray:
    """Cell index containing each point (unit vectors, any shape (..., 3))."""
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1]
    pts = pts.reshape(-1, 3)
    dots = pts @ FACES[:, 0, :].T
    face = np.argmax(dots, axis=1)
    frames = FACES[face]
    nd = dots[np.arange(len(pts)), face]
    alpha = np.arctan(np.sum(pts * frames[:, 1, :], axis=1) / nd)
    beta = np.arctan(np.sum(pts * frames[:, 2, :], axis=1) / nd)
    n = raster.n
    i = np.clip(np.floor((alpha + math.pi / 4) / raster.step).astype(int), 0, n - 1)
    j = np.clip(np.floor((beta + math.pi / 4) / raster.step).astype(int), 0, n - 1)
    return (face * n * n + i * n + j).reshape(shape)


def cell_distance(raster: SphereRaster, seeds) -> np.ndarray:
    """Graph distance in cell steps from the nearest seed cell (inf when unreachable)."""
    seeds = np.asarray(seeds, dtype=int).ravel()
    if seeds.size == 0:
        return np.full(raster.size, np.inf)
    return dijkstra(raster.adjacency, directed=False, indices=seeds, unweighted=True, min_only=True)


def mark_limit_cells(raster: SphereRaster, samples, dilation: Optional[float] = None) -> np.ndarray:
    samples = np.asarray(samples, dtype=float).reshape(-1, 3)
    if len(samples) == 0:
        raise PreconditionError("cannot mark cells from an empty limit-set sample")
    if dilation is None:
        dilation = raster.default_dilation()
    marked = np.zeros(raster.size, dtype=bool)
    marked[locate(raster, samples)] = True
    if dilation > 0:
        dist, _ = cKDTree(samples).query(raster.centers, distance_upper_bound=chord(dilation))
        marked |= np.isfinite(dist)
    return marked


# ------------------------------------------------------------------ component charts

@dataclass(frozen=True)
class JordanFlag:
    is_jordan: Optional[bool]
    confidence: float
    euler: int

    def to_dict(self) -> dict:
        return {"is_jordan": self.is_jordan, "confidence": self.confidence, "euler": self.euler}


@dataclass(eq=False)
class Component:
    label: int
    cells: np.ndarray
    area: float
    boundary_cells: np.ndarray
    jordan: JordanFlag
    representatives: np.ndarray

    @property
    def cell_count(self) -> int:
        return len(self.cells)


@dataclass(eq=False)
class ComponentChart:
    raster: SphereRaster
    marked: np.ndarray
    labels: np.ndarray
    depth: np.ndarray
    dilation: float
    components: List[Component]

    @property
    def count(self) -> int:
        return len(self.components)

    @property
    def marked_area(self) -> float:
        return float(self.raster.areas[self.marked].sum())

    def component(self, label: int) -> Component:
        if not 0 <= label < self.count:
            raise PreconditionError(f"label {label} does not exist (chart has {self.count} components)")
        return self.components[label]

    def label_of(self, points) -> np.ndarray:
        return self.labels[locate(self.raster, points)]

    def table(self) -> List[dict]:
        return [
            {
                "label": c.label,
                "cells": c.cell_count,
                "area": c.area,
                "boundary_cells": len(c.boundary_cells),
                "jordan": c.jordan.is_jordan,
                "jordan_confidence": c.jordan.confidence,
                "euler": c.jordan.euler,
            }
            for c in self.components
        ]


def _boundary_cycle(edges: np.ndarray) -> Tuple[bool, bool]:
    """(all boundary vertices have degree 2, boundary graph connected)."""
    verts, inverse = np.unique(edges.ravel(), return_inverse=True)
    degree = np.bincount(inverse, minlength=len(verts))
    pairs = inverse.reshape(-1, 2)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(verts), len(verts)))
    count, _ = connected_components(graph, directed=False)
    return bool(np.all(degree == 2)), count == 1


def jordan_flag_for_cells(raster: SphereRaster, cells: np.ndarray, boundary_cells: int = 0) -> JordanFlag:
    cells = np.asarray(cells, dtype=int)
    quads = raster.corner_ids[cells]
    edges = np.stack([quads, np.roll(quads, -1, axis=1)], axis=2).reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    unique_edges, counts = np.unique(edges, axis=0, return_counts=True)
    euler = int(len(np.unique(quads)) - len(unique_edges) + len(cells))
    confidence = 1.0 - boundary_cells / max(len(cells), 1)

    if len(cells) < _SMALL_LABEL:
        return JordanFlag(None, 0.0, euler)
    border = unique_edges[counts == 1]
    if len(border) == 0:
        # the whole sphere
        return JordanFlag(False, 1.0, euler)
    if euler != 1:
        return JordanFlag(False, confidence, euler)
    regular, connected = _boundary_cycle(border)
    if regular and connected:
        return JordanFlag(True, confidence, euler)
    # pinched boundary: a disk at the topological level but not resolved as a simple cycle
    return JordanFlag(None, confidence * 0.5, euler)


def jordan_flag(chart: ComponentChart, label: int) -> JordanFlag:
    return chart.component(label).jordan


def chart_from_labels(
    raster: SphereRaster, labels, marked=None, dilation: float = 0.0
) -> ComponentChart:
    """Chart from an explicit labeling 0..k-1 (-1 for marked cells).

    Labels need not be graph components; synthetic charts split the sphere
    along cell boundaries this way.
    """
    labels = np.asarray(labels, dtype=int)
    marked = labels < 0 if marked is None else np.asarray(marked, dtype=bool)
    depth = cell_distance(raster, np.flatnonzero(marked))
    # representatives sit far from marked cells and from other labels
    around = labels[raster.neighbors]
    seam = (labels >= 0) & np.any((around >= 0) & (around != labels[:, None]), axis=1)
    rank_depth = cell_distance(raster, np.flatnonzero(marked | seam))
    components: List[Component] = []

    for label in range(int(labels.max()) + 1 if labels.size else 0):
        cells = np.flatnonzero(labels == label)
        if cells.size == 0:
            raise PreconditionError(f"label {label} has no cells")
        touching = marked[raster.neighbors[cells]].any(axis=1)
        boundary = cells[touching]
        cell_depth = rank_depth[cells]
        if np.all(np.isinf(cell_depth)):
            reps = cells[np.linspace(0, len(cells) - 1, min(_REPRESENTATIVES, len(cells))).astype(int)]
        else:
            ranked = np.lexsort((cells, -cell_depth))
            reps = cells[ranked[:_REPRESENTATIVES]]
        components.append(
            Component(
                label=label,
                cells=cells,
                area=float(raster.areas[cells].sum()),
                boundary_cells=boundary,
                jordan=jordan_flag_for_cells(raster, cells, len(boundary)),
                representatives=raster.centers[reps],
            )
        )

    return ComponentChart(
        raster=raster, marked=marked, labels=labels, depth=depth, dilation=float(dilation), components=components
    )


def label_components(raster: SphereRaster, marked, dilation: Optional[float] = None) -> ComponentChart:
    marked = np.asarray(marked, dtype=bool)
    if dilation is None:
        dilation = raster.default_dilation()
    labels = np.full(raster.size, -1, dtype=int)
    free = np.flatnonzero(~marked)

    if free.size:
        sub = raster.adjacency[free][:, free]
        _, raw = connected_components(sub, directed=False)
        # relabel in order of first cell index
        _, first = np.unique(raw, return_index=True)
        order = np.argsort(first)
        remap = np.empty_like(order)
        remap[order] = np.arange(len(order))
        labels[free] = remap[raw]

    chart = chart_from_labels(raster, labels, marked, dilation)
    logger.info(
        f"Labeled {chart.count} components on n={raster.n} raster "
        f"({int(marked.sum())} of {raster.size} cells marked)"
    )
    return chart


def chart_from_samples(raster: SphereRaster, samples, dilation: Optional[float] = None) -> ComponentChart:
    if dilation is None:
        dilation = raster.default_dilation()
    return label_components(raster, mark_limit_cells(raster, samples, dilation), dilation)


# -------------------------------------------------------------- group action

@dataclass
class ImageResult:
    mapping: Dict[int, int] = field(default_factory=dict)
    undefined: List[int] = field(default_factory=list)
    ambiguous: List[int] = field(default_factory=list)

    @property
    def is_bijection(self) -> bool:
        return (
            not self.undefined
            and not self.ambiguous
            and len(set(self.mapping.values())) == len(self.mapping)
        )


def component_image(chart: ComponentChart, f: MoebiusMap) -> ImageResult:
    """Where each label goes under f, by majority of its cell centers.

    An image landing in a marked cell counts for the nearest labeled cell within
    the dilation radius plus the containment slack; one farther out is a stray.
    A label with more than IMAGE_STRAY_FRACTION strays is undefined. Otherwise it
    maps to the label holding IMAGE_WINNER_FRACTION of all its images, or is ambiguous.
    """
    result = ImageResult()
    raster = chart.raster
    free = np.flatnonzero(chart.labels >= 0)
    if free.size == 0:
        return result
    free_tree = cKDTree(raster.centers[free])
    reach = chord(chart.dilation + settings.CONTAINMENT_SLACK * raster.cell_size)

    for comp in chart.components:
        images = apply_sphere_array(f, raster.centers[comp.cells])
        targets = chart.labels[locate(raster, images)]
        marked = np.flatnonzero(targets < 0)
        if marked.size:
            dist, idx = free_tree.query(images[marked], distance_upper_bound=reach)
            near = np.isfinite(dist)
            targets[marked[near]] = chart.labels[free[idx[near]]]
        strays = int(np.count_nonzero(targets < 0))
        if strays > settings.IMAGE_STRAY_FRACTION * targets.size:
            logger.debug(f"Label {comp.label}: {strays} of {targets.size} images land deep in marked cells")
            result.undefined.append(comp.label)
            continue
        votes = np.bincount(targets[targets >= 0], minlength=chart.count)
        winner = int(np.argmax(votes))
        if votes[winner] >= settings.IMAGE_WINNER_FRACTION * targets.size:
            result.mapping[comp.label] = winner
        else:
            result.ambiguous.append(comp.label)
    return result


def closure_contains(chart: ComponentChart, label: int, points, slack: Optional[int] = None) -> Verdict:
    """Whether points lie in the closure of component `label`.

    A point counts as in the closure when it sits within the dilation radius plus
    `slack` cells of some cell of the label. It counts against when it lies in
    another label at least 2·slack cells from any marked cell.
    """
    if slack is None:
        slack = settings.CONTAINMENT_SLACK
    comp = chart.component(label)
    raster = chart.raster
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) == 0:
        return Verdict.inside(chart.dilation + slack * raster.cell_size)

    tolerance = chart.dilation + slack * raster.cell_size
    dist, _ = cKDTree(raster.centers[comp.cells]).query(pts)
    angles = 2 * np.arcsin(np.clip(dist / 2, 0.0, 1.0))
    worst = float(angles.max())
    if worst < tolerance:
        return Verdict.inside(tolerance - worst)

    cells = locate(raster, pts)
    foreign = (chart.labels[cells] >= 0) & (chart.labels[cells] != label)
    if foreign.any():
        deepest = float(chart.depth[cells][foreign].max())
        if deepest >= 2 * slack:
            return Verdict.outside((deepest - 2 * slack + 1) * raster.cell_size)
    return Verdict.uncertain(worst - tolerance)
