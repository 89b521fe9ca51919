# app/kleinian/cores.py
"""Visual hull and convex hull membership, the h = 1/2 level set, and the hull checks.

A point y of the ball lies in the visual hull when every (filtered) component Δ
of Ω(Γ) is seen from y under visual measure at most 1/2. The convex hull is
tested in Klein coordinates, where hyperbolic convexity is Euclidean convexity.
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from app.kleinian.errors import BallRangeError, DegenerateSampleError, NonBracketingError, PreconditionError
from app.kleinian.harmonic import HarmonicEstimate, cap_measure, measure_kernel_labels
from app.kleinian.moebius import BallPoint, geodesic_point
from app.kleinian.sphere import Cap, ComponentChart
from app.kleinian.verdict import Verdict
from config import settings

logger = logging.getLogger(__name__)

ComponentFilter = Union[str, Tuple[int, ...]]

_PLANAR_RATIO = 1e-7
_ON_PLANE = 1e-9
_MAX_BISECTIONS = 200


def _as_array(y) -> np.ndarray:
    return y.array if isinstance(y, BallPoint) else np.asarray(y, dtype=float)


def to_klein(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return 2.0 * y / (1.0 + np.sum(y * y, axis=-1, keepdims=True))


def random_ball_points(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    """Uniform points in the Euclidean ball of the given radius."""
    g = rng.standard_normal((count, 3))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(count) ** (1.0 / 3.0))[:, None]


# --------------------------------------------------------------- visual hull

@dataclass(frozen=True)
class HullQuery:
    chart: ComponentChart
    components: ComponentFilter = "all"
    tau: float = field(default_factory=lambda: settings.TAU)

    def __post_init__(self):
        if isinstance(self.components, str):
            if self.components not in ("all", "jordan_only"):
                raise PreconditionError(f"unknown component filter '{self.components}'")
        else:
            missing = [c for c in self.components if not 0 <= c < self.chart.count]
            if missing:
                raise PreconditionError(f"filter labels {missing} do not exist in the chart")

    def labels(self) -> np.ndarray:
        if self.components == "all":
            return np.arange(self.chart.count)
        if self.components == "jordan_only":
            return np.array([c.label for c in self.chart.components if c.jordan.is_jordan], dtype=int)
        return np.asarray(self.components, dtype=int)


def visual_member(y: Union[BallPoint, np.ndarray], q: HullQuery) -> Verdict:
    labels = q.labels()
    lower_bar, upper_bar = 0.5 - q.tau, 0.5 + q.tau
    if labels.size == 0:
        return Verdict.inside(lower_bar)
    h, err = measure_kernel_labels(_as_array(y), q.chart)
    h, err = h[labels], err[labels]

    high = float(np.max(h + err))
    if high < lower_bar:
        return Verdict.inside(lower_bar - high)
    low = float(np.max(h - err))
    if low > upper_bar:
        return Verdict.outside(low - upper_bar)
    return Verdict.uncertain(high - lower_bar)


# --------------------------------------------------------------- convex hull

@dataclass(eq=False)
class ConvexRegion:
    """Precomputed Euclidean hull of limit samples in Klein coordinates."""

    points: np.ndarray
    planar: bool
    equations: np.ndarray
    origin: np.ndarray
    normal: Optional[np.ndarray] = None
    basis: Optional[np.ndarray] = None

    def member(self, y, tau: Optional[float] = None) -> Verdict:
        verdict, _ = self.classify(y, tau)
        return verdict

    def classify(self, y, tau: Optional[float] = None) -> Tuple[Verdict, Optional[Tuple[np.ndarray, float]]]:
        """Verdict plus, for Outside, the separating half-space (unit normal, offset) in Klein coordinates."""
        tau = settings.TAU if tau is None else tau
        yk = to_klein(_as_array(y))

        if self.planar:
            off = float(self.normal @ (yk - self.origin))
            if abs(off) > tau:
                n = self.normal if off > 0 else -self.normal
                return Verdict.outside(abs(off) - tau), (n, float(n @ self.origin))
            flat = self.basis @ (yk - self.origin)
            signed = self.equations[:, :2] @ flat + self.equations[:, 2]
            worst = int(np.argmax(signed))
            if signed[worst] > tau:
                n = self.basis.T @ self.equations[worst, :2]
                return Verdict.outside(signed[worst] - tau), (n, float(n @ self.origin - self.equations[worst, 2]))
            if abs(off) <= _ON_PLANE and -signed[worst] > tau:
                return Verdict.inside(-signed[worst] - tau), None
            return Verdict.uncertain(max(abs(off), tau - abs(signed[worst]))), None

        signed = self.equations[:, :3] @ yk + self.equations[:, 3]
        worst = int(np.argmax(signed))
        if signed[worst] > tau:
            return Verdict.outside(signed[worst] - tau), (self.equations[worst, :3], float(-self.equations[worst, 3]))
        if -signed[worst] > tau:
            return Verdict.inside(-signed[worst] - tau), None
        return Verdict.uncertain(tau - abs(signed[worst])), None


def convex_region(samples, planar: Optional[bool] = None) -> ConvexRegion:
    """Klein-model hull of limit samples.

    A solid hull needs at least 4 samples spanning space. Flat sample sets are
    detected from their singular values; planar=True admits 3 non-collinear
    samples and planar=False refuses a flat set instead of detecting it.
    """
    pts = np.asarray(samples, dtype=float).reshape(-1, 3)
    need = 3 if planar else 4
    if len(pts) < need:
        raise DegenerateSampleError(f"convex hull needs at least {need} limit samples, got {len(pts)}")
    origin = pts.mean(axis=0)
    _, sv, vt = np.linalg.svd(pts - origin, full_matrices=False)
    rank = int(np.sum(sv > _PLANAR_RATIO * sv[0])) if sv[0] > 0 else 0
    if rank < 2 or (rank == 2 and planar is False):
        raise DegenerateSampleError(f"limit samples span a set of rank {rank}; no hull to test against")
    try:
        if rank == 2 or planar:
            basis = vt[:2]
            hull = ConvexHull((pts - origin) @ basis.T)
            return ConvexRegion(pts, True, hull.equations, origin, normal=vt[2], basis=basis)
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateSampleError(f"qhull rejected the limit samples: {exc}")
    return ConvexRegion(pts, False, hull.equations, origin)


def chart_region(chart: ComponentChart) -> ConvexRegion:
    """Hull of the marked cells: the limit set as the chart resolves it.

    Components are labeled on the unmarked cells, so visual measure sees the
    marked set as the limit set; hull comparisons against it carry no raster bias.
    """
    if not chart.marked.any():
        raise DegenerateSampleError("chart has no marked cells")
    return convex_region(chart.raster.sub4_points[chart.marked].reshape(-1, 3))


def convex_member(y, samples: Union[ConvexRegion, np.ndarray], tau: Optional[float] = None) -> Verdict:
    region = samples if isinstance(samples, ConvexRegion) else convex_region(samples)
    return region.member(y, tau)


def separation_witness(y, region: ConvexRegion, tau: Optional[float] = None) -> Optional[Tuple[Cap, HarmonicEstimate]]:
    """For an Outside point, the cap at infinity of the separating half-space and its measure at y.

    The half-space contains y but no limit point, so its cap lies in Ω(Γ) and
    is seen from y with measure above 1/2.
    """
    verdict, plane = region.classify(y, tau)
    if not verdict.is_outside:
        return None
    normal, offset = plane
    scale = float(np.linalg.norm(normal))
    normal, offset = normal / scale, offset / scale
    cap = Cap.around(normal, math.acos(float(np.clip(offset, -1.0, 1.0))))
    return cap, cap_measure(_as_array(y), cap)


# ---------------------------------------------------------------- level set

def _h_label(y: np.ndarray, chart: ComponentChart, label: int) -> float:
    h, _ = measure_kernel_labels(y, chart)
    return float(h[label])


def half_level(
    xi1, xi2, label: int, chart: ComponentChart, tol: Optional[float] = None
) -> BallPoint:
    """Point x on the geodesic from xi1 to xi2 with h_label(x) = 1/2 within tol."""
    tol = settings.HALF_LEVEL_TOL if tol is None else tol
    xi1 = np.asarray(xi1, dtype=float)
    xi2 = np.asarray(xi2, dtype=float)
    first, second = (int(v) for v in chart.label_of(np.vstack([xi1, xi2])))
    if first != label:
        raise PreconditionError(f"geodesic start lies in label {first}, not {label}")
    if second < 0 or second == label:
        raise NonBracketingError("geodesic endpoints must lie in two different components")

    def excess(s: float) -> float:
        return _h_label(geodesic_point(xi1, xi2, s), chart, label) - 0.5

    def expand(s: float, sign: float) -> Tuple[float, float]:
        while True:
            try:
                value = excess(s)
            except BallRangeError:
                raise NonBracketingError(
                    f"h_{label} - 1/2 does not change sign along the geodesic within quadrature range"
                )
            if sign * value > 0:
                return s, value
            s *= 2.0

    lo, g_lo = expand(-1.0, 1.0)
    hi, g_hi = expand(1.0, -1.0)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        g_mid = excess(mid)
        if abs(g_mid) <= tol:
            return BallPoint.from_vector(geodesic_point(xi1, xi2, mid))
        if g_mid > 0:
            lo = mid
        else:
            hi = mid
    raise NonBracketingError(f"bisection did not reach |h - 1/2| <= {tol}")


# ------------------------------------------------------------------- slices

class SliceState(str, Enum):
    V = "V"
    C_ONLY = "C_only"
    OUTSIDE = "outside"
    UNCERTAIN = "uncertain"


@dataclass(eq=False)
class SliceResult:
    states: np.ndarray  # (res, res) of SliceState values
    points: np.ndarray  # (res, res, 3)
    visual_margin: np.ndarray
    convex_margin: np.ndarray

    def count(self, state: SliceState) -> int:
        return int(np.sum(self.states == state.value))

    def records(self) -> List[dict]:
        rows = []
        res = self.states.shape[0]
        for i in range(res):
            for j in range(res):
                x, y, z = self.points[i, j]
                rows.append(
                    {
                        "row": i,
                        "col": j,
                        "x": x,
                        "y": y,
                        "z": z,
                        "state": self.states[i, j],
                        "visual_margin": self.visual_margin[i, j],
                        "convex_margin": self.convex_margin[i, j],
                    }
                )
        return rows


def combine_verdicts(visual: Verdict, convex: Verdict) -> SliceState:
    if visual.is_inside and convex.is_inside:
        return SliceState.V
    if visual.is_outside and convex.is_inside:
        return SliceState.C_ONLY
    if convex.is_outside and not visual.is_inside:
        return SliceState.OUTSIDE
    return SliceState.UNCERTAIN


def signed_margin(v: Verdict) -> float:
    if v.is_inside:
        return v.margin
    if v.is_outside:
        return -v.margin
    return 0.0


def slice_classify(
    basepoint,
    e1,
    e2,
    window: float,
    resolution: int,
    q: HullQuery,
    samples: Union[ConvexRegion, np.ndarray],
) -> SliceResult:
    """Per-pixel hull states on the plane basepoint + u·e1 + v·e2, |u|, |v| ≤ window."""
    region = samples if isinstance(samples, ConvexRegion) else convex_region(samples)
    b = np.asarray(basepoint, dtype=float)
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    ticks = -window + (np.arange(resolution) + 0.5) * (2.0 * window / resolution)

    states = np.empty((resolution, resolution), dtype=object)
    points = np.empty((resolution, resolution, 3))
    vis = np.full((resolution, resolution), np.nan)
    cvx = np.full((resolution, resolution), np.nan)
    limit = 1.0 - settings.QUADRATURE_CUTOFF
    for i, v in enumerate(ticks[::-1]):
        for j, u in enumerate(ticks):
            p = b + u * e1 + v * e2
            points[i, j] = p
            if np.linalg.norm(p) >= limit:
                states[i, j] = SliceState.OUTSIDE.value
                continue
            visual = visual_member(p, q)
            convex = region.member(p, q.tau)
            states[i, j] = combine_verdicts(visual, convex).value
            vis[i, j] = signed_margin(visual)
            cvx[i, j] = signed_margin(convex)
    logger.info(
        f"Slice {resolution}x{resolution}: "
        + ", ".join(f"{s.value}={int(np.sum(states == s.value))}" for s in SliceState)
    )
    return SliceResult(states=states, points=points, visual_margin=vis, convex_margin=cvx)


# -------------------------------------------------------------- hull checks

@dataclass
class InclusionReport:
    requested: int
    accepted: int
    attempts: int
    tau: float
    violations: List[dict] = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return self.accepted == 0

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "requested": self.requested,
            "accepted": self.accepted,
            "attempts": self.attempts,
            "tau": self.tau,
            "vacuous": self.vacuous,
            "passed": self.passed,
            "violations": self.violations,
        }


def check_v_subset_c(
    q: HullQuery,
    samples: Union[ConvexRegion, np.ndarray, None],
    count: int,
    seed: int,
    radius: Optional[float] = None,
) -> InclusionReport:
    """Rejection-sample visual-hull points and test each against the convex hull.

    Without explicit samples the hull is that of the chart's marked cells.
    """
    if samples is None:
        region = chart_region(q.chart)
    else:
        region = samples if isinstance(samples, ConvexRegion) else convex_region(samples)
    radius = settings.SAMPLE_RADIUS if radius is None else radius
    rng = np.random.default_rng(seed)
    report = InclusionReport(requested=count, accepted=0, attempts=0, tau=q.tau)
    budget = count * settings.MAX_ATTEMPTS_FACTOR

    while report.accepted < count and report.attempts < budget:
        batch = random_ball_points(rng, min(256, budget - report.attempts), radius)
        for y in batch:
            report.attempts += 1
            visual = visual_member(y, q)
            if not visual.is_inside:
                continue
            report.accepted += 1
            convex = region.member(y, q.tau)
            if convex.is_outside:
                report.violations.append(
                    {"point": y.tolist(), "visual_margin": visual.margin, "convex_margin": convex.margin}
                )
                logger.warning(f"Visual-hull point {y} is outside the convex hull (margin {convex.margin:.3g})")
            if report.accepted >= count:
                break

    if report.vacuous:
        logger.info(f"No visual-hull points found in {report.attempts} attempts: inclusion holds vacuously")
    return report


@dataclass
class EmptinessResult:
    kind: str  # witness | empty | full | inconclusive
    witness: Optional[BallPoint] = None
    min_h: Optional[float] = None
    samples: int = 0

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "witness": None if self.witness is None else self.witness.array.tolist(),
            "min_h": self.min_h,
            "samples": self.samples,
        }


def emptiness_probe(chart: ComponentChart, count: int, seed: int, tol: Optional[float] = None) -> EmptinessResult:
    if chart.count == 0:
        return EmptinessResult(kind="full")
    if chart.count >= 2:
        by_area = sorted(chart.components, key=lambda c: (-c.area, c.label))
        first, second = by_area[0], by_area[1]
        x = half_level(first.representatives[0], second.representatives[0], first.label, chart, tol)
        logger.info(f"Visual hull is nonempty: h_{first.label} = 1/2 at {x.array}")
        return EmptinessResult(kind="witness", witness=x)

    rng = np.random.default_rng(seed)
    pts = random_ball_points(rng, count, settings.PROBE_RADIUS)
    lows = []
    for y in pts:
        h, err = measure_kernel_labels(y, chart)
        lows.append(float(h[0] - err[0]))
    min_h = min(lows)
    kind = "empty" if min_h >= 1.0 - settings.EMPTY_TOLERANCE else "inconclusive"
    logger.info(f"Single component: min sampled h = {min_h:.4f} over {count} points ({kind})")
    return EmptinessResult(kind=kind, min_h=min_h, samples=count)


@dataclass(frozen=True)
class RoundnessReport:
    label: int
    plane_residual: float
    is_round: bool

    def to_dict(self) -> dict:
        return {"label": self.label, "plane_residual": self.plane_residual, "is_round": self.is_round}


def round_disk_components(chart: ComponentChart) -> Tuple[bool, List[RoundnessReport]]:
    """Whether every component is a round disk: Jordan with a planar boundary ring."""
    reports = []
    allowance = 1.5 * chart.raster.diagonal
    for comp in chart.components:
        ring = chart.raster.centers[comp.boundary_cells]
        if len(ring) < 3 or comp.jordan.is_jordan is not True:
            reports.append(RoundnessReport(comp.label, math.inf, False))
            continue
        center = ring.mean(axis=0)
        _, _, vt = np.linalg.svd(ring - center, full_matrices=False)
        residual = float(np.max(np.abs((ring - center) @ vt[2])))
        reports.append(RoundnessReport(comp.label, residual, residual <= allowance))
    return all(r.is_round for r in reports) and bool(reports), reports
