# app/kleinian/combination.py
"""Klein combinations, combination-theorem hypotheses and QF-embedding checks.

Every quantifier over γ ∈ Γ − Γ′ is truncated at a word length L; reports carry
that depth and never claim exhaustiveness.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from app.kleinian.cores import (
    HullQuery,
    check_v_subset_c,
    emptiness_probe,
    half_level,
    random_ball_points,
    visual_member,
)
from app.kleinian.errors import (
    BallRangeError,
    CertificateDeniedError,
    ElementaryGroupError,
    NonBracketingError,
    PreconditionError,
)
from app.kleinian.group import (
    FreeProduct,
    GroupSpec,
    HNN,
    coset_representatives,
    enumerate_elements,
    free_product,
    sample_limit_set,
    subgroup,
    word_to_string,
)
from app.kleinian.harmonic import measure_kernel_labels
from app.kleinian.moebius import MapKind, MoebiusMap, apply_ball_array, apply_sphere_array, classify, fixed_points
from app.kleinian.sphere import (
    Cap,
    ComponentChart,
    JordanFlag,
    build_raster,
    chart_from_samples,
    closure_contains,
    component_image,
)
from app.kleinian.verdict import Verdict
from config import settings

logger = logging.getLogger(__name__)

LimitInput = Union[GroupSpec, np.ndarray]

PASS = "pass"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"


def limit_points(G: GroupSpec, L: Optional[int] = None) -> np.ndarray:
    """Limit-set sample; elementary groups fall back to generator fixed points."""
    L = settings.LIMIT_DEPTH if L is None else L
    try:
        return sample_limit_set(G, L)
    except ElementaryGroupError:
        pts = [
            p.array
            for g in G.generators
            if classify(g.map) in (MapKind.LOXODROMIC, MapKind.PARABOLIC)
            for p in fixed_points(g.map)
        ]
        return np.array(pts).reshape(-1, 3)


def _limit(source: LimitInput, L: Optional[int] = None) -> np.ndarray:
    if isinstance(source, GroupSpec):
        return limit_points(source, L)
    return np.asarray(source, dtype=float).reshape(-1, 3)


def thin(points: np.ndarray, cap: Optional[int] = None) -> np.ndarray:
    """Deterministic evenly strided subsample."""
    cap = cap or settings.EMBEDDING_IMAGE_SAMPLES
    if len(points) <= cap:
        return points
    return points[np.linspace(0, len(points) - 1, cap).astype(int)]


# ----------------------------------------------------------- Klein combination

@dataclass
class PingPongCertificate:
    caps: Tuple[Cap, Cap]
    separation: float
    depth: int
    boundary_samples: int
    records: List[dict] = field(default_factory=list)

    @property
    def worst_margin(self) -> float:
        return min((r["worst_margin"] for r in self.records), default=float("inf"))

    def to_dict(self) -> dict:
        return {
            "caps": [{"center": list(c.center), "half_angle": c.half_angle} for c in self.caps],
            "separation": self.separation,
            "depth": self.depth,
            "boundary_samples": self.boundary_samples,
            "worst_margin": self.worst_margin,
            "records": self.records,
        }


def ping_pong_certificate(
    G1: GroupSpec,
    G2: GroupSpec,
    B1: Cap,
    B2: Cap,
    depth: Optional[int] = None,
    limit_depth: Optional[int] = None,
    limit_samples: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> PingPongCertificate:
    depth = settings.CERTIFICATE_DEPTH if depth is None else depth
    count = settings.CERTIFICATE_BOUNDARY_SAMPLES
    separation = B1.separation(B2)
    if separation <= 0:
        raise PreconditionError(f"caps overlap (angular gap {separation:.4g}); ping-pong needs disjoint caps")

    cert = PingPongCertificate(caps=(B1, B2), separation=separation, depth=depth, boundary_samples=count)
    for k, (name, G, cap) in enumerate((("first", G1, B1), ("second", G2, B2))):
        lam = _limit(G, limit_depth) if limit_samples is None else _limit(limit_samples[k])
        limit_margin = float(cap.margin(lam).min()) if len(lam) else float("inf")
        if limit_margin < -1e-9:
            raise CertificateDeniedError(
                f"limit set of '{G.name}' leaves its cap (worst margin {limit_margin:.3g})"
            )
        outside = cap.complement()
        probes = np.vstack([outside.boundary(count), outside.array[None, :]])
        worst, worst_word, checked = float("inf"), None, 0
        for elem in enumerate_elements(G, depth):
            if not elem.word:
                continue
            margin = float(cap.margin(apply_sphere_array(elem.matrix, probes)).min())
            checked += 1
            if margin < worst:
                worst, worst_word = margin, word_to_string(elem.word)
        if worst < -1e-9:
            raise CertificateDeniedError(
                f"'{worst_word}' of '{G.name}' does not map the complement of its cap inside (margin {worst:.3g})"
            )
        cert.records.append(
            {
                "summand": name,
                "group": G.name,
                "elements": checked,
                "worst_margin": worst,
                "worst_word": worst_word,
                "limit_margin": limit_margin,
            }
        )
    logger.info(f"Ping-pong certificate granted (cap gap {separation:.4f}, worst margin {cert.worst_margin:.4f})")
    return cert


def klein_combine_free(
    G1: GroupSpec,
    G2: GroupSpec,
    B1: Cap,
    B2: Cap,
    depth: Optional[int] = None,
    name: Optional[str] = None,
    limit_depth: Optional[int] = None,
) -> Tuple[GroupSpec, PingPongCertificate]:
    cert = ping_pong_certificate(G1, G2, B1, B2, depth, limit_depth)
    combined = free_product(name or f"{G1.name}*{G2.name}", G1, G2, (B1, B2))
    return combined, cert


# ------------------------------------------------------- hypothesis checks

@dataclass
class HypothesisReport:
    theorem: str
    checks: List[dict] = field(default_factory=list)

    def add(self, name: str, status: str, **detail) -> None:
        self.checks.append({"check": name, "status": status, **detail})

    @property
    def status(self) -> str:
        states = [c["status"] for c in self.checks]
        if FAIL in states:
            return FAIL
        if INCONCLUSIVE in states or not states:
            return INCONCLUSIVE
        return PASS

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {"theorem": self.theorem, "status": self.status, "checks": self.checks}


def locate_component(
    chart: ComponentChart, points, slack: Optional[int] = None
) -> Tuple[Optional[int], Verdict, Dict[int, Verdict]]:
    """The component whose closure holds the points best, with the combined verdict.

    Inside when some label contains them; Outside when every label rejects
    them; Uncertain otherwise.
    """
    verdicts = {label: closure_contains(chart, label, points, slack) for label in range(chart.count)}
    inside = [(v.margin, label) for label, v in verdicts.items() if v.is_inside]
    if inside:
        margin, label = max(inside)
        return label, verdicts[label], verdicts
    if verdicts and all(v.is_outside for v in verdicts.values()):
        return None, Verdict.outside(min(v.margin for v in verdicts.values())), verdicts
    worst = max((v.margin for v in verdicts.values()), default=0.0)
    return None, Verdict.uncertain(worst), verdicts


def check_combination_I(
    G1: LimitInput, G2: LimitInput, chart_phi: ComponentChart, slack: Optional[int] = None
) -> HypothesisReport:
    """Λ(G1) and Λ(G2) lie in closures of different Jordan components of Ω(Φ)."""
    report = HypothesisReport("combination_I")
    jordan = [c.label for c in chart_phi.components if c.jordan.is_jordan]
    two_jordan = chart_phi.count == 2 and len(jordan) == 2
    report.add(
        "two_jordan_components",
        PASS if two_jordan else FAIL,
        components=chart_phi.count,
        jordan=len(jordan),
    )

    found = []
    for name, source in (("first", G1), ("second", G2)):
        label, verdict, _ = locate_component(chart_phi, _limit(source), slack)
        found.append(label)
        if verdict.is_inside:
            status = PASS
        elif verdict.is_outside or chart_phi.count == 0:
            status = FAIL
        else:
            status = INCONCLUSIVE
        report.add(f"{name}_limit_in_closure", status, label=label, verdict=verdict.to_dict())
    if None not in found:
        report.add("different_components", PASS if found[0] != found[1] else FAIL, labels=found)
    return report


def check_combination_II(
    G1: LimitInput,
    delta: int,
    delta_prime: int,
    gamma: MoebiusMap,
    chart1: ComponentChart,
    L: Optional[int] = None,
    slack: Optional[int] = None,
) -> HypothesisReport:
    """Hypotheses for the HNN combination along stabilizers of Δ and Δ′."""
    L = settings.DEPTH if L is None else L
    if delta == delta_prime:
        raise PreconditionError("the two components must be distinct")
    for label in (delta, delta_prime):
        if chart1.component(label).jordan.is_jordan is not True:
            raise PreconditionError(f"component {label} is not flagged Jordan")

    report = HypothesisReport("combination_II")
    if isinstance(G1, GroupSpec):
        conjugating, stabilizers = [], []
        for elem in enumerate_elements(G1, L):
            if not elem.word:
                continue
            image = component_image(chart1, elem.matrix)
            if image.mapping.get(delta) == delta_prime:
                conjugating.append(word_to_string(elem.word))
            if image.mapping.get(delta_prime) == delta_prime:
                stabilizers.append(elem)
        report.add("not_conjugate", FAIL if conjugating else PASS, depth=L, offenders=conjugating[:10])

        bad = []
        for elem in stabilizers:
            conj = gamma @ elem.matrix @ gamma.inverse()
            if component_image(chart1, conj).mapping.get(delta) != delta:
                bad.append(word_to_string(elem.word))
        if not stabilizers:
            report.add("stabilizer_conjugation", INCONCLUSIVE, reason="no stabilizer elements at this depth")
        else:
            report.add("stabilizer_conjugation", FAIL if bad else PASS, checked=len(stabilizers), offenders=bad[:10])
    else:
        report.add("not_conjugate", INCONCLUSIVE, reason="no group words available")
        report.add("stabilizer_conjugation", INCONCLUSIVE, reason="no group words available")

    moved = apply_sphere_array(gamma, _limit(G1))
    side = closure_contains(chart1, delta, moved, slack)
    status = PASS if side.is_inside else (FAIL if side.is_outside else INCONCLUSIVE)
    report.add("side_condition", status, verdict=side.to_dict())
    return report


# ------------------------------------------------------- QF-embedding checks

@dataclass
class RepresentativeRecord:
    word: str
    label: Optional[int]
    containment: Verdict
    jordan: Optional[JordanFlag]
    boundary_miss: Optional[Verdict] = None
    witness_cell: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "label": self.label,
            "containment": self.containment.to_dict(),
            "jordan": None if self.jordan is None else self.jordan.to_dict(),
            "boundary_miss": None if self.boundary_miss is None else self.boundary_miss.to_dict(),
            "witness_cell": self.witness_cell,
        }


@dataclass
class EmbeddingReport:
    depth: Optional[int]
    kind: str  # nicely | precisely | not_embedded | inconclusive
    records: List[RepresentativeRecord] = field(default_factory=list)

    @property
    def vacuous(self) -> bool:
        return not self.records

    @property
    def precisely(self) -> bool:
        return self.kind in ("precisely", "nicely")

    @property
    def nicely(self) -> bool:
        return self.kind == "nicely"

    def violations(self) -> List[RepresentativeRecord]:
        return [
            r
            for r in self.records
            if r.containment.is_outside or (r.jordan is not None and r.jordan.is_jordan is False)
        ]

    def to_dict(self) -> dict:
        return {
            "depth": self.depth,
            "kind": self.kind,
            "vacuous": self.vacuous,
            "representatives": len(self.records),
            "records": [r.to_dict() for r in self.records],
        }


def _boundary_miss(chart: ComponentChart, label: int, images: np.ndarray) -> Tuple[Verdict, Optional[int]]:
    """A boundary cell of the label at least two dilation radii from every image point."""
    comp = chart.component(label)
    need = 2.0 * chart.dilation
    if len(comp.boundary_cells) == 0:
        return Verdict.outside(need), None
    dist, _ = cKDTree(images).query(chart.raster.centers[comp.boundary_cells])
    angles = 2 * np.arcsin(np.clip(dist / 2, 0.0, 1.0))
    best = int(np.argmax(angles))
    if angles[best] >= need:
        return Verdict.inside(angles[best] - need + 1e-12), int(comp.boundary_cells[best])
    return Verdict.outside(need - angles[best]), None


def classify_qf_embedding(
    chart: ComponentChart,
    images: Dict[str, np.ndarray],
    slack: Optional[int] = None,
    depth: Optional[int] = None,
) -> EmbeddingReport:
    """Precisely/nicely classification from per-γ image samples γ(Λ(Γ′))."""
    records = []
    for word, pts in images.items():
        pts = np.asarray(pts, dtype=float).reshape(-1, 3)
        label, verdict, _ = locate_component(chart, pts, slack)
        if label is None:
            records.append(RepresentativeRecord(word, None, verdict, None))
            continue
        miss, cell = _boundary_miss(chart, label, pts)
        records.append(RepresentativeRecord(word, label, verdict, chart.component(label).jordan, miss, cell))

    if not records:
        return EmbeddingReport(depth, "nicely", records)
    precise = all(r.containment.is_inside and r.jordan is not None and r.jordan.is_jordan for r in records)
    if precise:
        kind = "nicely" if all(r.boundary_miss.is_inside for r in records) else "precisely"
    elif any(r.containment.is_outside or (r.jordan is not None and r.jordan.is_jordan is False) for r in records):
        kind = "not_embedded"
    else:
        kind = INCONCLUSIVE
    report = EmbeddingReport(depth, kind, records)
    for r in report.violations():
        logger.warning(f"Representative {r.word}: image of the limit set is not inside a Jordan component closure")
    return report


def _qf_report(
    G: GroupSpec, summand: str, L: int, chart_sub: ComponentChart, limit_sub: np.ndarray, slack: Optional[int]
) -> EmbeddingReport:
    reps = coset_representatives(G, summand, L)
    lam = thin(np.asarray(limit_sub, dtype=float))
    images = {word_to_string(r.word): apply_sphere_array(r.matrix, lam) for r in reps}
    report = classify_qf_embedding(chart_sub, images, slack, depth=L)
    logger.info(f"QF-embedding of '{summand}' in '{G.name}' at depth {L}: {report.kind}")
    return report


def precisely_qf_embedded(
    G: GroupSpec,
    summand: str,
    L: int,
    chart_sub: ComponentChart,
    limit_sub: np.ndarray,
    slack: Optional[int] = None,
) -> EmbeddingReport:
    report = _qf_report(G, summand, L, chart_sub, limit_sub, slack)
    if report.kind == "nicely":
        report.kind = "precisely"
    return report


def nicely_qf_embedded(
    G: GroupSpec,
    summand: str,
    L: int,
    chart_sub: ComponentChart,
    limit_sub: np.ndarray,
    slack: Optional[int] = None,
) -> EmbeddingReport:
    return _qf_report(G, summand, L, chart_sub, limit_sub, slack)


# ----------------------------------------------------- sampled embedding checks

@dataclass
class SampledEmbeddingReport:
    check: str
    depth: int
    requested: int
    found: int = 0
    attempts: int = 0
    pairs: int = 0
    skipped: int = 0
    bracket_failures: int = 0
    violations: List[dict] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return self.found < self.requested

    @property
    def status(self) -> str:
        if self.violations:
            return FAIL
        if self.found == 0 and self.requested > 0 and self.check == "core":
            return INCONCLUSIVE
        return PASS

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "depth": self.depth,
            "requested": self.requested,
            "found": self.found,
            "attempts": self.attempts,
            "pairs": self.pairs,
            "skipped": self.skipped,
            "bracket_failures": self.bracket_failures,
            "partial": self.partial,
            "status": self.status,
            "violations": self.violations,
        }


def _images(gamma: MoebiusMap, x: np.ndarray) -> Optional[np.ndarray]:
    try:
        return apply_ball_array(gamma, x[None, :])[0]
    except BallRangeError:
        return None


def verify_interior_embedding(
    G: GroupSpec,
    summand: str,
    L: int,
    chart_sub: ComponentChart,
    count: int,
    seed: int,
    components="all",
    margin: Optional[float] = None,
) -> SampledEmbeddingReport:
    """No γ ∈ Γ − Γ′ maps an interior hull point of Γ′ back into that interior."""
    margin = settings.TAU if margin is None else margin
    q = HullQuery(chart_sub, components if isinstance(components, str) else tuple(components), margin)
    reps = coset_representatives(G, summand, L)
    report = SampledEmbeddingReport("interior", L, count)
    if not reps:
        return report

    rng = np.random.default_rng(seed)
    budget = count * settings.MAX_ATTEMPTS_FACTOR
    while report.found < count and report.attempts < budget:
        for x in random_ball_points(rng, min(256, budget - report.attempts), settings.SAMPLE_RADIUS):
            report.attempts += 1
            if not visual_member(x, q).is_inside:
                continue
            report.found += 1
            for rep in reps:
                y = _images(rep.matrix, x)
                if y is None or np.linalg.norm(y) > 1.0 - settings.QUADRATURE_CUTOFF:
                    report.skipped += 1
                    continue
                report.pairs += 1
                v = visual_member(y, q)
                if v.is_inside:
                    report.violations.append(
                        {"point": x.tolist(), "word": word_to_string(rep.word), "margin": v.margin}
                    )
            if report.found >= count:
                break
    if report.partial:
        logger.warning(f"Only {report.found} of {count} interior hull points found in {report.attempts} attempts")
    return report


def verify_core_embedding(
    G: GroupSpec,
    summand: str,
    L: int,
    chart_sub: ComponentChart,
    count: int,
    seed: int,
    nicely: EmbeddingReport,
    tol: Optional[float] = None,
) -> SampledEmbeddingReport:
    """Images of h = 1/2 level points are neither interior nor on the same level set."""
    if not nicely.nicely:
        raise PreconditionError(
            f"core embedding needs a nicely QF-embedded subgroup; the report says '{nicely.kind}'"
        )
    tol = settings.HALF_LEVEL_TOL if tol is None else tol
    q = HullQuery(chart_sub, "all")
    reps = coset_representatives(G, summand, L)
    report = SampledEmbeddingReport("core", L, count)
    candidates = [c for c in chart_sub.components if len(c.representatives)]
    if len(candidates) < 2:
        logger.warning("Fewer than two components: no geodesic brackets the h = 1/2 level")
        return report

    rng = np.random.default_rng(seed)
    budget = count * settings.MAX_ATTEMPTS_FACTOR
    while report.found < count and report.attempts < budget:
        report.attempts += 1
        i, j = rng.choice(len(candidates), size=2, replace=False)
        first, second = candidates[i], candidates[j]
        xi1 = first.representatives[rng.integers(len(first.representatives))]
        xi2 = second.representatives[rng.integers(len(second.representatives))]
        try:
            x = half_level(xi1, xi2, first.label, chart_sub, tol).array
        except (NonBracketingError, PreconditionError):
            report.bracket_failures += 1
            continue
        report.found += 1
        for rep in reps:
            y = _images(rep.matrix, x)
            if y is None or np.linalg.norm(y) > 1.0 - settings.QUADRATURE_CUTOFF:
                report.skipped += 1
                continue
            report.pairs += 1
            h, _ = measure_kernel_labels(y, chart_sub)
            inside = visual_member(y, q).is_inside
            on_level = abs(float(h[first.label]) - 0.5) <= tol
            if inside or on_level:
                report.violations.append(
                    {
                        "point": x.tolist(),
                        "word": word_to_string(rep.word),
                        "inside": inside,
                        "h": float(h[first.label]),
                    }
                )
    if report.bracket_failures:
        logger.info(f"{report.bracket_failures} geodesics failed to bracket the half level")
    return report


# ------------------------------------------------------------ verification suites

SKIPPED = "skipped"

ChartSource = Callable[[GroupSpec], Tuple[np.ndarray, ComponentChart]]


@dataclass
class SuiteOutcome:
    suite: str
    group: str
    status: str  # pass | fail | inconclusive | skipped
    report: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"suite": self.suite, "group": self.group, "status": self.status, "report": self.report}


def worst_status(statuses: List[str]) -> str:
    if FAIL in statuses:
        return FAIL
    if INCONCLUSIVE in statuses:
        return INCONCLUSIVE
    return PASS


def suite_cores(G: GroupSpec, chart_for: ChartSource, count: int, seed: int, tau: Optional[float] = None) -> SuiteOutcome:
    _, chart = chart_for(G)
    q = HullQuery(chart, "all", settings.TAU if tau is None else tau)
    report = check_v_subset_c(q, None, count, seed)
    return SuiteOutcome("cores", G.name, PASS if report.passed else FAIL, report.to_dict())


def suite_emptiness(G: GroupSpec, chart_for: ChartSource, count: int, seed: int) -> SuiteOutcome:
    _, chart = chart_for(G)
    result = emptiness_probe(chart, count, seed)
    status = INCONCLUSIVE if result.kind == INCONCLUSIVE else PASS
    return SuiteOutcome("emptiness", G.name, status, result.to_dict())


def suite_embedding(
    G: GroupSpec,
    chart_for: ChartSource,
    L: int,
    count: int,
    seed: int,
    tau: Optional[float] = None,
) -> SuiteOutcome:
    """QF-embedding of the first factor (or HNN base), then the sampled interior and core checks."""
    construction = G.construction
    if isinstance(construction, FreeProduct):
        summand = "left"
    elif isinstance(construction, HNN):
        summand = "base"
    else:
        return SuiteOutcome("embedding", G.name, SKIPPED, {"reason": "no construction provenance"})

    samples, chart = chart_for(subgroup(G, summand))
    qf = nicely_qf_embedded(G, summand, L, chart, samples)
    qf_status = {"not_embedded": FAIL, INCONCLUSIVE: INCONCLUSIVE}.get(qf.kind, PASS)
    interior = verify_interior_embedding(G, summand, L, chart, count, seed, margin=tau)
    statuses = [qf_status, interior.status]
    report = {"summand": summand, "qf": qf.to_dict(), "interior": interior.to_dict(), "core": None}
    if qf.nicely:
        core = verify_core_embedding(G, summand, L, chart, count, seed, qf)
        statuses.append(core.status)
        report["core"] = core.to_dict()
    return SuiteOutcome("embedding", G.name, worst_status(statuses), report)


def separating_chart(B1: Cap, B2: Cap, resolution: int, count: int = 2048) -> ComponentChart:
    """Chart of a circle midway between two disjoint caps."""
    middle = Cap.around(B1.center, B1.half_angle + B1.separation(B2) / 2.0)
    return chart_from_samples(build_raster(resolution), middle.boundary(count))


def suite_combination(G: GroupSpec, chart_for: ChartSource, resolution: int) -> SuiteOutcome:
    """Ping-pong certificate for a capped free product, and the separation hypothesis on its caps."""
    construction = G.construction
    if not isinstance(construction, FreeProduct) or construction.caps is None:
        return SuiteOutcome("combination", G.name, SKIPPED, {"reason": "not a free product with ping-pong caps"})

    B1, B2 = construction.caps
    lam1, _ = chart_for(construction.left)
    lam2, _ = chart_for(construction.right)
    try:
        cert = ping_pong_certificate(construction.left, construction.right, B1, B2, limit_samples=(lam1, lam2))
    except CertificateDeniedError as exc:
        return SuiteOutcome("combination", G.name, FAIL, {"certificate": None, "denied": exc.detail})
    hypothesis = check_combination_I(lam1, lam2, separating_chart(B1, B2, resolution))
    return SuiteOutcome(
        "combination",
        G.name,
        worst_status([PASS, hypothesis.status]),
        {"certificate": cert.to_dict(), "hypothesis": hypothesis.to_dict()},
    )
