# app/kleinian/moebius.py
"""Möbius transformations on the Riemann sphere and their isometric extension to H³.

Conventions used throughout the package:

* stereographic projection sends 0 to the south pole (0, 0, -1) and ∞ to the
  north pole (0, 0, 1);
* the interior action is evaluated in the upper half-space chart (z, t) and
  carried to the ball by one fixed Cayley map whose boundary values agree with
  the stereographic projection;
* sphere points are handled internally through homogeneous coordinates, so ∞
  never needs special casing in array code.
"""
import cmath
import math
from dataclasses import dataclass
from enum import Enum
from typing import Tuple, Union

import numpy as np

from app.kleinian.errors import BallRangeError, IdentityMapError

INF = complex(math.inf, 0.0)

TRACE_TOL = 1e-9
_ZERO = 1e-14
_FIXED_TOL = 1e-12


def is_infinite(z: complex) -> bool:
    return cmath.isinf(z)


class MapKind(str, Enum):
    IDENTITY = "identity"
    PARABOLIC = "parabolic"
    ELLIPTIC = "elliptic"
    LOXODROMIC = "loxodromic"


def _sign_rule(entries) -> int:
    # first nonzero entry gets nonnegative real part, ties by imaginary part
    for x in entries:
        if abs(x) > _ZERO:
            if abs(x.real) > _ZERO:
                return -1 if x.real < 0 else 1
            return -1 if x.imag < 0 else 1
    return 1


@dataclass(frozen=True)
class MoebiusMap:
    a: complex
    b: complex
    c: complex
    d: complex

    @classmethod
    def from_entries(cls, a, b, c, d) -> "MoebiusMap":
        a, b, c, d = complex(a), complex(b), complex(c), complex(d)
        det = a * d - b * c
        if abs(det) == 0.0:
            raise ValueError("singular matrix cannot define a Möbius map")
        root = cmath.sqrt(det)
        a, b, c, d = a / root, b / root, c / root, d / root
        sign = _sign_rule((a, b, c, d))
        return cls(sign * a, sign * b, sign * c, sign * d)

    @classmethod
    def from_matrix(cls, matrix) -> "MoebiusMap":
        m = np.asarray(matrix, dtype=complex)
        return cls.from_entries(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1 + 0j, 0j, 0j, 1 + 0j)

    @classmethod
    def dilation(cls, k: complex) -> "MoebiusMap":
        """z ↦ k z."""
        return cls.from_entries(k, 0, 0, 1)

    @classmethod
    def translation(cls, w: complex) -> "MoebiusMap":
        """z ↦ z + w."""
        return cls.from_entries(1, w, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def trace(self) -> complex:
        return self.a + self.d

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def as_vector(self) -> np.ndarray:
        """Eight real coordinates, used for distance queries."""
        m = np.array([self.a, self.b, self.c, self.d])
        return np.concatenate([m.real, m.imag])

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap.from_entries(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusMap") -> "MoebiusMap":
        return compose(self, other)

    def __call__(self, z: complex) -> complex:
        z = complex(z)
        if is_infinite(z):
            return INF if self.c == 0 else self.a / self.c
        den = self.c * z + self.d
        if den == 0:
            return INF
        return (self.a * z + self.b) / den

    def distance(self, other: "MoebiusMap") -> float:
        """Matrix distance in PSL(2,C): the nearer of ±other."""
        diff = self.matrix - other.matrix
        summ = self.matrix + other.matrix
        return float(min(np.linalg.norm(diff), np.linalg.norm(summ)))

    def __repr__(self) -> str:
        return f"MoebiusMap({self.a:.6g}, {self.b:.6g}, {self.c:.6g}, {self.d:.6g})"


def compose(f: MoebiusMap, g: MoebiusMap) -> MoebiusMap:
    """f ∘ g."""
    return MoebiusMap.from_entries(
        f.a * g.a + f.b * g.c,
        f.a * g.b + f.b * g.d,
        f.c * g.a + f.d * g.c,
        f.c * g.b + f.d * g.d,
    )


def inverse(f: MoebiusMap) -> MoebiusMap:
    return f.inverse()


def rotation(axis, angle: float) -> MoebiusMap:
    """The Möbius map acting on the sphere as the rotation by `angle` about `axis`."""
    m = np.asarray(axis, dtype=float)
    m = m / np.linalg.norm(m)
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    mx, my, mz = m
    return MoebiusMap.from_entries(
        c + 1j * s * mz,
        1j * s * complex(mx, my),
        1j * s * complex(mx, -my),
        c - 1j * s * mz,
    )


# ---------------------------------------------------------------- sphere points

def stereo(z: complex) -> np.ndarray:
    """Extended complex number to unit vector."""
    z = complex(z)
    if is_infinite(z):
        return np.array([0.0, 0.0, 1.0])
    r2 = abs(z) ** 2
    return np.array([2 * z.real, 2 * z.imag, r2 - 1.0]) / (r2 + 1.0)


def stereo_inv(v) -> complex:
    """Unit vector to extended complex number."""
    x, y, w = (float(t) for t in v)
    if w <= 0:
        return complex(x, y) / (1.0 - w)
    den = complex(x, -y)
    if den == 0:
        return INF
    return (1.0 + w) / den


def homogeneous(vecs) -> Tuple[np.ndarray, np.ndarray]:
    """Homogeneous coordinates (P, Q) with P/Q the stereographic coordinate.

    The branch is chosen by hemisphere so neither coordinate is small relative
    to the other's scale, which keeps both poles well conditioned.
    """
    v = np.asarray(vecs, dtype=float)
    x, y, w = v[..., 0], v[..., 1], v[..., 2]
    south = w <= 0
    p = np.where(south, x + 1j * y, 1 + w + 0j)
    q = np.where(south, 1 - w + 0j, x - 1j * y)
    return p, q


def from_homogeneous(p, q) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex)
    pq = p * np.conj(q)
    norm = np.abs(p) ** 2 + np.abs(q) ** 2
    out = np.stack([2 * pq.real, 2 * pq.imag, np.abs(p) ** 2 - np.abs(q) ** 2], axis=-1)
    return out / norm[..., None]


def apply_sphere_array(f: MoebiusMap, vecs) -> np.ndarray:
    p, q = homogeneous(vecs)
    return from_homogeneous(f.a * p + f.b * q, f.c * p + f.d * q)


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere, held as a unit vector."""

    x: float
    y: float
    w: float

    @classmethod
    def from_complex(cls, z: complex) -> "SpherePoint":
        return cls(*(float(t) for t in stereo(z)))

    @classmethod
    def from_vector(cls, v) -> "SpherePoint":
        v = np.asarray(v, dtype=float)
        v = v / np.linalg.norm(v)
        return cls(float(v[0]), float(v[1]), float(v[2]))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w])

    @property
    def z(self) -> complex:
        return stereo_inv(self.array)

    def angle_to(self, other: "SpherePoint") -> float:
        cos = float(np.clip(np.dot(self.array, other.array), -1.0, 1.0))
        return math.acos(cos)


def apply_sphere(f: MoebiusMap, p: SpherePoint) -> SpherePoint:
    return SpherePoint.from_vector(apply_sphere_array(f, p.array[None, :])[0])


# ------------------------------------------------------------------ classification

def classify(f: MoebiusMap) -> MapKind:
    if abs(f.b) <= TRACE_TOL and abs(f.c) <= TRACE_TOL and abs(f.a - f.d) <= TRACE_TOL:
        return MapKind.IDENTITY
    t2 = f.trace ** 2
    if abs(t2.imag) <= TRACE_TOL and -TRACE_TOL <= t2.real <= 4 + TRACE_TOL:
        if abs(t2.real - 4) <= TRACE_TOL:
            return MapKind.PARABOLIC
        return MapKind.ELLIPTIC
    return MapKind.LOXODROMIC


def fixed_points(f: MoebiusMap) -> Tuple[SpherePoint, ...]:
    """Fixed points on the sphere; for loxodromic maps the attracting one comes first."""
    kind = classify(f)
    if kind is MapKind.IDENTITY:
        raise IdentityMapError("the identity fixes every point")
    a, b, c, d = f.a, f.b, f.c, f.d

    if abs(c) <= _FIXED_TOL:
        if kind is MapKind.PARABOLIC or abs(d - a) <= _FIXED_TOL:
            return (SpherePoint.from_complex(INF),)
        z0 = b / (d - a)
        # multiplier at ∞ is d/a, at z0 it is a/d
        pairs = [(INF, abs(d / a)), (z0, abs(a / d))]
    else:
        if kind is MapKind.PARABOLIC:
            return (SpherePoint.from_complex((a - d) / (2 * c)),)
        B = d - a
        disc = cmath.sqrt(B * B + 4 * b * c)
        if kind is MapKind.LOXODROMIC:
            s = disc if abs(B + disc) >= abs(B - disc) else -disc
            q = -(B + s) / 2
            roots = [q / c, -b / q]
        else:
            roots = [(-B + disc) / (2 * c), (-B - disc) / (2 * c)]
        pairs = [(z, abs(1 / (c * z + d) ** 2)) for z in roots]

    if kind is MapKind.LOXODROMIC:
        pairs.sort(key=lambda item: item[1])
    return tuple(SpherePoint.from_complex(z) for z, _ in pairs)


# ------------------------------------------------------------- interior action

def ball_to_half_space(ys) -> Tuple[np.ndarray, np.ndarray]:
    y = np.asarray(ys, dtype=float)
    b1, b2, b3 = y[..., 0], y[..., 1], y[..., 2]
    S = b1 ** 2 + b2 ** 2 + (1 - b3) ** 2
    if np.any(S < 1e-300):
        raise BallRangeError("point too close to the north pole for the half-space chart")
    z = 2 * (b1 + 1j * b2) / S
    t = (1 - (b1 ** 2 + b2 ** 2 + b3 ** 2)) / S
    return z, t


def half_space_to_ball(z, t) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    s = np.abs(z) ** 2 + (t + 1) ** 2
    return np.stack([2 * z.real / s, 2 * z.imag / s, 1 - 2 * (t + 1) / s], axis=-1)


def apply_half_space(f: MoebiusMap, z, t) -> Tuple[np.ndarray, np.ndarray]:
    """Poincaré extension in the upper half-space (quaternionic formula)."""
    z = np.asarray(z, dtype=complex)
    t = np.asarray(t, dtype=float)
    den_c = f.c * z + f.d
    den = np.abs(den_c) ** 2 + abs(f.c) ** 2 * t ** 2
    z_new = ((f.a * z + f.b) * np.conj(den_c) + f.a * np.conj(f.c) * t ** 2) / den
    return z_new, t / den


def apply_ball_array(f: MoebiusMap, ys) -> np.ndarray:
    z, t = ball_to_half_space(ys)
    with np.errstate(over="raise", invalid="raise", divide="raise"):
        try:
            z2, t2 = apply_half_space(f, z, t)
            out = half_space_to_ball(z2, t2)
        except FloatingPointError as exc:
            raise BallRangeError(f"isometry overflowed near the sphere at infinity: {exc}")
    if not np.all(np.isfinite(out)) or np.any(np.sum(out * out, axis=-1) >= 1.0):
        raise BallRangeError("image left the open ball within floating precision")
    return out


@dataclass(frozen=True)
class BallPoint:
    """A point of the open unit ball."""

    x: float
    y: float
    w: float

    def __post_init__(self):
        if self.x ** 2 + self.y ** 2 + self.w ** 2 >= 1.0:
            raise BallRangeError(f"({self.x}, {self.y}, {self.w}) is not inside the unit ball")

    @classmethod
    def from_vector(cls, v) -> "BallPoint":
        return cls(*(float(t) for t in v))

    @classmethod
    def origin(cls) -> "BallPoint":
        return cls(0.0, 0.0, 0.0)

    @classmethod
    def from_half_space(cls, z: complex, t: float) -> "BallPoint":
        return cls.from_vector(half_space_to_ball(complex(z), float(t)))

    @property
    def array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.array))

    def to_half_space(self) -> Tuple[complex, float]:
        z, t = ball_to_half_space(self.array)
        return complex(z), float(t)


def apply_ball(f: MoebiusMap, y: BallPoint) -> BallPoint:
    return BallPoint.from_vector(apply_ball_array(f, y.array))


def hyperbolic_distance(p: Union[BallPoint, np.ndarray], q: Union[BallPoint, np.ndarray]):
    p = p.array if isinstance(p, BallPoint) else np.asarray(p, dtype=float)
    q = q.array if isinstance(q, BallPoint) else np.asarray(q, dtype=float)
    num = 2 * np.sum((p - q) ** 2, axis=-1)
    den = (1 - np.sum(p * p, axis=-1)) * (1 - np.sum(q * q, axis=-1))
    return np.arccosh(1 + num / den)


def half_space_distance(z1: complex, t1: float, z2: complex, t2: float) -> float:
    return math.acosh(1 + (abs(z1 - z2) ** 2 + (t1 - t2) ** 2) / (2 * t1 * t2))


# ---------------------------------------------------------- translations and rays

def mobius_add(x, v) -> np.ndarray:
    """Gyro-addition x ⊕ v in the Poincaré ball (v may lie on the unit sphere)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    x, v = np.broadcast_arrays(x, v)
    xv = np.sum(x * v, axis=-1)
    x2 = np.sum(x * x, axis=-1)
    v2 = np.sum(v * v, axis=-1)
    num = (1 + 2 * xv + v2)[..., None] * x + (1 - x2)[..., None] * v
    den = 1 + 2 * xv + x2 * v2
    return num / den[..., None]


@dataclass(frozen=True)
class BallTranslation:
    """The hyperbolic translation T_y with T_y(0) = y, acting by v ↦ y ⊕ v."""

    y: Tuple[float, float, float]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.y)

    def forward_interior(self, points) -> np.ndarray:
        return mobius_add(self.array, points)

    def forward_boundary(self, vecs) -> np.ndarray:
        out = mobius_add(self.array, vecs)
        return out / np.linalg.norm(out, axis=-1, keepdims=True)

    def inverse_boundary(self, vecs) -> np.ndarray:
        out = mobius_add(-self.array, vecs)
        return out / np.linalg.norm(out, axis=-1, keepdims=True)


def ball_translation(y: Union[BallPoint, np.ndarray]) -> BallTranslation:
    arr = y.array if isinstance(y, BallPoint) else np.asarray(y, dtype=float)
    if float(np.dot(arr, arr)) >= 1.0:
        raise BallRangeError("translation target must lie inside the ball")
    return BallTranslation(tuple(float(t) for t in arr))


def ray_endpoint(y, direction) -> np.ndarray:
    """Endpoint at infinity of the geodesic ray from y with initial direction `direction`."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u, axis=-1, keepdims=True)
    return ball_translation(y).forward_boundary(u)


# ------------------------------------------------------------------- geodesics

def geodesic_map(xi1, xi2) -> MoebiusMap:
    """Möbius map sending 0 to xi1 and ∞ to xi2 (sphere points as unit vectors)."""
    pa, qa = homogeneous(np.asarray(xi1, dtype=float))
    pb, qb = homogeneous(np.asarray(xi2, dtype=float))
    pa, qa, pb, qb = complex(pa), complex(qa), complex(pb), complex(qb)
    if abs(pb * qa - pa * qb) < 1e-14:
        raise ValueError("geodesic endpoints must be distinct")
    return MoebiusMap.from_entries(pb, pa, qb, qa)


def geodesic_points(xi1, xi2, s) -> np.ndarray:
    """Points at signed arclength s on the geodesic from xi1 (s → -∞) to xi2 (s → +∞)."""
    g = geodesic_map(xi1, xi2)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    z, t = apply_half_space(g, np.zeros_like(s, dtype=complex), np.exp(s))
    return half_space_to_ball(z, t)


def geodesic_point(xi1, xi2, s: float) -> np.ndarray:
    return geodesic_points(xi1, xi2, [s])[0]


# ------------------------------------------------------------- batched matrices

def normalize_matrices(mats) -> np.ndarray:
    """Rescale a stack of 2×2 matrices to determinant 1 and apply the sign rule."""
    m = np.array(mats, dtype=complex)
    det = m[:, 0, 0] * m[:, 1, 1] - m[:, 0, 1] * m[:, 1, 0]
    m /= np.sqrt(det)[:, None, None]
    flat = m.reshape(len(m), 4)
    big = np.abs(flat) > _ZERO
    first = np.argmax(big, axis=1)
    lead = flat[np.arange(len(m)), first]
    negative = np.where(np.abs(lead.real) > _ZERO, lead.real < 0, lead.imag < 0)
    m[negative] *= -1
    return m


def loxodromic_mask(mats) -> np.ndarray:
    m = np.asarray(mats, dtype=complex)
    t2 = (m[:, 0, 0] + m[:, 1, 1]) ** 2
    band = (np.abs(t2.imag) <= TRACE_TOL) & (t2.real >= -TRACE_TOL) & (t2.real <= 4 + TRACE_TOL)
    return ~band


def attracting_fixed_points(mats) -> np.ndarray:
    """Attracting fixed points (unit vectors) of a stack of loxodromic matrices."""
    m = np.asarray(mats, dtype=complex)
    a, b, c, d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]
    tr = a + d
    B = d - a
    disc = np.sqrt(B * B + 4 * b * c)
    # the attracting root makes |c z + d| = |tr ± disc| / 2 the larger one
    s = np.where(np.abs(tr + disc) >= np.abs(tr - disc), 1.0, -1.0)
    p1, q1 = -B + s * disc, 2 * c
    p2, q2 = 2 * b, B + s * disc
    first = np.abs(p1) ** 2 + np.abs(q1) ** 2 >= np.abs(p2) ** 2 + np.abs(q2) ** 2
    return from_homogeneous(np.where(first, p1, p2), np.where(first, q1, q2))


def apply_matrices_to_point(mats, vec) -> np.ndarray:
    """Images of one sphere point under each matrix of a stack."""
    m = np.asarray(mats, dtype=complex)
    p, q = homogeneous(np.asarray(vec, dtype=float))
    return from_homogeneous(m[:, 0, 0] * p + m[:, 0, 1] * q, m[:, 1, 0] * p + m[:, 1, 1] * q)
