# app/kleinian/harmonic.py
"""Visual (harmonic) measure of sphere regions seen from points of the ball.

h_X(y) is the proportion of geodesic rays from y ending in X. Three estimators
are provided: kernel quadrature on the raster, ray Monte Carlo through the ball
translation, and an exact value for round caps.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np

from app.kleinian.errors import QuadratureRangeError
from app.kleinian.moebius import BallPoint, ball_translation
from app.kleinian.sphere import Cap, ComponentChart, SphereRaster, angle_between
from config import settings

logger = logging.getLogger(__name__)

FOUR_PI = 4.0 * math.pi
_ERROR_FLOOR = 1e-12


@dataclass(frozen=True)
class HarmonicEstimate:
    value: float
    method: str
    error: float
    count: int
    seed: Optional[int] = None

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method,
            "error": self.error,
            "count": self.count,
            "seed": self.seed,
        }


def _as_array(y) -> np.ndarray:
    return y.array if isinstance(y, BallPoint) else np.asarray(y, dtype=float)


def _region_cells(region, raster: SphereRaster) -> np.ndarray:
    region = np.asarray(region)
    if region.dtype == bool:
        return np.flatnonzero(region)
    return region.astype(int).ravel()


def _kernel(y: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    num = 1.0 - float(y @ y)
    dist2 = np.sum((zeta - y) ** 2, axis=-1)
    return (num / dist2) ** 2


def _cell_integrals(y: np.ndarray, raster: SphereRaster, cells: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-cell kernel integral and variation bound (both unnormalized)."""
    r = float(np.linalg.norm(y))
    if r > 1.0 - settings.QUADRATURE_CUTOFF:
        raise QuadratureRangeError(
            f"|y| = {r:.9f} exceeds the quadrature range 1 - {settings.QUADRATURE_CUTOFF:g}; "
            "use the ray estimator or the closed form for caps"
        )
    k2 = _kernel(y, raster.sub2_points[cells])
    values = np.sum(k2 * raster.sub2_areas[cells], axis=1)
    errors = (k2.max(axis=1) - k2.min(axis=1)) * raster.areas[cells]

    if r > 0:
        reach = 2.0 * (1.0 - r) + raster.diagonal
        near = angle_between(raster.centers[cells], y / r) <= reach
        if near.any():
            fine = cells[near]
            k4 = _kernel(y, raster.sub4_points[fine])
            values[near] = np.sum(k4 * raster.sub4_areas[fine], axis=1)
            errors[near] = (k4.max(axis=1) - k4.min(axis=1)) * raster.areas[fine]
    return values, errors


def measure_kernel(y: Union[BallPoint, np.ndarray], region, raster: SphereRaster) -> HarmonicEstimate:
    """Kernel quadrature of h_X(y) over a cell set (boolean mask or index array)."""
    yv = _as_array(y)
    cells = _region_cells(region, raster)
    values, errors = _cell_integrals(yv, raster, cells)
    return HarmonicEstimate(
        value=float(values.sum() / FOUR_PI),
        method="kernel",
        error=float(errors.sum() / FOUR_PI + _ERROR_FLOOR),
        count=int(cells.size),
    )


def measure_kernel_labels(y: Union[BallPoint, np.ndarray], chart: ComponentChart) -> Tuple[np.ndarray, np.ndarray]:
    """h_Δ(y) and its error bound for every label of the chart in one pass."""
    yv = _as_array(y)
    cells = np.flatnonzero(chart.labels >= 0)
    if cells.size == 0:
        return np.zeros(0), np.zeros(0)
    values, errors = _cell_integrals(yv, chart.raster, cells)
    labels = chart.labels[cells]
    h = np.bincount(labels, weights=values, minlength=chart.count) / FOUR_PI
    err = np.bincount(labels, weights=errors, minlength=chart.count) / FOUR_PI + _ERROR_FLOOR
    return h, err


def uniform_directions(u: np.ndarray) -> np.ndarray:
    """Map pairs of uniforms to uniformly distributed unit vectors."""
    z = 2.0 * u[:, 0] - 1.0
    phi = 2.0 * math.pi * u[:, 1]
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def measure_rays(
    y: Union[BallPoint, np.ndarray],
    member: Callable[[np.ndarray], np.ndarray],
    samples: Optional[int] = None,
    seed: int = 0,
    chunk: Optional[int] = None,
) -> HarmonicEstimate:
    """Monte Carlo estimate of the fraction of rays from y ending where `member` holds.

    Each chunk gets its own Philox generator advanced to the chunk's first
    sample, so the estimate depends on (seed, samples) only.
    """
    samples = samples or settings.RAY_SAMPLES
    chunk = chunk or settings.RAY_CHUNK
    if chunk % 2:
        chunk += 1
    translation = ball_translation(_as_array(y))

    hits = 0
    for start in range(0, samples, chunk):
        size = min(chunk, samples - start)
        bit_generator = np.random.Philox(key=seed)
        # one Philox block yields four doubles, i.e. two samples
        bit_generator.advance(start // 2)
        u = np.random.Generator(bit_generator).random((size, 2))
        endpoints = translation.forward_boundary(uniform_directions(u))
        hits += int(np.count_nonzero(member(endpoints)))

    p = hits / samples
    error = max(3.0 * math.sqrt(p * (1.0 - p) / samples), 1.0 / samples)
    logger.debug(f"Ray estimate {p:.6f} ± {error:.2g} from {samples} samples (seed {seed})")
    return HarmonicEstimate(value=p, method="rays", error=error, count=samples, seed=seed)


def cap_measure(y: Union[BallPoint, np.ndarray], cap: Cap) -> HarmonicEstimate:
    """Exact visual measure of a round cap, by pulling it back to the origin."""
    translation = ball_translation(_as_array(y))
    ring = translation.inverse_boundary(cap.boundary(3))
    normal = np.cross(ring[1] - ring[0], ring[2] - ring[0])
    normal /= np.linalg.norm(normal)
    offset = float(normal @ ring[0])
    inner = translation.inverse_boundary(cap.array[None, :])[0]
    if normal @ inner > offset:
        value = (1.0 - offset) / 2.0
    else:
        value = (1.0 + offset) / 2.0
    return HarmonicEstimate(value=float(np.clip(value, 0.0, 1.0)), method="closed_form", error=0.0, count=0)

