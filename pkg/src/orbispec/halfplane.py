"""Isometries of the hyperbolic plane, upper half-plane model.

Elements of PSL(2,R) are stored as unit-determinant 2x2 real matrices
(an SL(2,R) representative; the sign is kept because some consumers
manipulate signed traces).  Trace-based geometric quantities use |tr|.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import NotHyperbolic

# |tr| within this band of 2 counts as parabolic (identity if the
# off-diagonals also vanish).  Far above accumulated double-precision
# error for words of length <= 30.
PARABOLIC_TRACE_TOL = 1e-9
IDENTITY_OFFDIAG_TOL = 1e-9
DET_TOL = 1e-12


@dataclass(frozen=True)
class UHPoint:
    """Point x + iy of the upper half-plane; y > 0."""

    x: float
    y: float

    def __post_init__(self):
        if not self.y > 0:
            raise ValueError(f"UHPoint needs y > 0, got y={self.y}")

    @classmethod
    def from_complex(cls, z: complex) -> "UHPoint":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class MoebiusElement:
    """Real matrix [[a,b],[c,d]] with ad - bc = 1, renormalized on construction."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det <= 0:
            raise ValueError(f"determinant must be positive, got {det}")
        if abs(det - 1.0) > DET_TOL:
            s = math.sqrt(det)
            object.__setattr__(self, "a", self.a / s)
            object.__setattr__(self, "b", self.b / s)
            object.__setattr__(self, "c", self.c / s)
            object.__setattr__(self, "d", self.d / s)

    @classmethod
    def identity(cls) -> "MoebiusElement":
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_matrix(cls, m) -> "MoebiusElement":
        return cls(float(m[0][0]), float(m[0][1]), float(m[1][0]), float(m[1][1]))

    def to_matrix(self):
        return [[self.a, self.b], [self.c, self.d]]

    @property
    def trace(self) -> float:
        return self.a + self.d

    def inverse(self) -> "MoebiusElement":
        return MoebiusElement(self.d, -self.b, -self.c, self.a)

    def __matmul__(self, other: "MoebiusElement") -> "MoebiusElement":
        return MoebiusElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __neg__(self) -> "MoebiusElement":
        g = MoebiusElement.identity()
        object.__setattr__(g, "a", -self.a)
        object.__setattr__(g, "b", -self.b)
        object.__setattr__(g, "c", -self.c)
        object.__setattr__(g, "d", -self.d)
        return g

    def power(self, n: int) -> "MoebiusElement":
        if n < 0:
            return self.inverse().power(-n)
        out = MoebiusElement.identity()
        base = self
        while n:
            if n & 1:
                out = out @ base
            base = base @ base
            n >>= 1
        return out

    def conjugated_by(self, s: "MoebiusElement") -> "MoebiusElement":
        """s g s^{-1}."""
        return s @ self @ s.inverse()


@dataclass(frozen=True)
class IsometryClass:
    """Classification of an isometry: identity, elliptic, parabolic or hyperbolic.

    Elliptic carries theta in (0, pi) with tr = 2 cos(theta), read off the
    supplied matrix representative.  Hyperbolic carries the translation
    length and the norm e^length.
    """

    kind: str  # "identity" | "elliptic" | "parabolic" | "hyperbolic"
    theta: float | None = None
    length: float | None = None
    norm: float | None = None

    @property
    def is_hyperbolic(self) -> bool:
        return self.kind == "hyperbolic"

    @property
    def is_elliptic(self) -> bool:
        return self.kind == "elliptic"


def classify(g: MoebiusElement) -> IsometryClass:
    """Classify by trace: |tr| < 2 elliptic, = 2 parabolic/identity, > 2 hyperbolic."""
    tr = g.trace
    if abs(abs(tr) - 2.0) <= PARABOLIC_TRACE_TOL:
        if abs(g.b) <= IDENTITY_OFFDIAG_TOL and abs(g.c) <= IDENTITY_OFFDIAG_TOL:
            return IsometryClass("identity")
        return IsometryClass("parabolic")
    if abs(tr) < 2.0:
        theta = math.acos(max(-1.0, min(1.0, tr / 2.0)))
        return IsometryClass("elliptic", theta=theta)
    length = 2.0 * math.acosh(abs(tr) / 2.0)
    return IsometryClass("hyperbolic", length=length, norm=math.exp(length))


def translation_length(g: MoebiusElement) -> float:
    """ln N(g) = 2 arccosh(|tr g| / 2) for hyperbolic g."""
    cls = classify(g)
    if not cls.is_hyperbolic:
        raise NotHyperbolic(f"element is {cls.kind}, not hyperbolic")
    return cls.length


def apply(g: MoebiusElement, z: UHPoint) -> UHPoint:
    """Moebius action z -> (az + b)/(cz + d)."""
    w = (g.a * z.z + g.b) / (g.c * z.z + g.d)
    return UHPoint.from_complex(w)


def apply_complex(g: MoebiusElement, z: complex) -> complex:
    return (g.a * z + g.b) / (g.c * z + g.d)


def distance(z: UHPoint, w: UHPoint) -> float:
    """Hyperbolic distance: cosh d = 1 + |z-w|^2 / (2 Im z Im w)."""
    dz = z.z - w.z
    arg = 1.0 + (dz.real * dz.real + dz.imag * dz.imag) / (2.0 * z.y * w.y)
    return math.acosh(max(1.0, arg))


def rotation_about(p: UHPoint, angle: float) -> MoebiusElement:
    """Elliptic element rotating by `angle` (counterclockwise) about p."""
    sy = math.sqrt(p.y)
    # move p to i, rotate about i, move back
    to_i = MoebiusElement(1.0 / sy, -p.x / sy, 0.0, sy)
    half = angle / 2.0
    k = MoebiusElement(math.cos(half), math.sin(half), -math.sin(half), math.cos(half))
    return to_i.inverse() @ k @ to_i


def translation_along(p: float, q: float, length: float) -> MoebiusElement:
    """Hyperbolic element translating by `length` along the geodesic from
    real endpoint p (repelling) to q (attracting)."""
    if p == q:
        raise ValueError("axis endpoints must differ")
    # conjugate diag(e^{l/2}, e^{-l/2}) (axis 0 -> infinity) by the map
    # sending (0, infinity) -> (p, q)
    m = MoebiusElement(math.exp(length / 2.0), 0.0, 0.0, math.exp(-length / 2.0))
    det = q - p
    if det > 0:
        s = MoebiusElement(q / math.sqrt(det), p / math.sqrt(det),
                           1.0 / math.sqrt(det), 1.0 / math.sqrt(det))
    else:
        s = MoebiusElement(-q / math.sqrt(-det), -p / math.sqrt(-det),
                           -1.0 / math.sqrt(-det), -1.0 / math.sqrt(-det))
    return s @ m @ s.inverse()


def elliptic_fixed_point(g: MoebiusElement) -> UHPoint:
    """Fixed point in the upper half-plane of an elliptic element."""
    cls = classify(g)
    if not cls.is_elliptic:
        raise ValueError(f"element is {cls.kind}, not elliptic")
    # roots of c z^2 + (d - a) z - b; elliptic implies c != 0
    disc = 4.0 - g.trace * g.trace
    z = complex((g.a - g.d) / (2.0 * g.c), math.sqrt(max(disc, 0.0)) / (2.0 * abs(g.c)))
    return UHPoint.from_complex(z)


def axis_endpoints(g: MoebiusElement):
    """(repelling, attracting) boundary fixed points of a hyperbolic element.

    Endpoints are reals, or the string "inf" for the point at infinity.
    """
    cls = classify(g)
    if not cls.is_hyperbolic:
        raise NotHyperbolic(f"element is {cls.kind}, not hyperbolic")
    tr = g.trace
    s = math.sqrt(tr * tr - 4.0)
    mu1 = (tr + s) / 2.0
    mu2 = (tr - s) / 2.0
    if abs(mu1) < abs(mu2):
        mu1, mu2 = mu2, mu1
    # |mu1| > 1: attracting; fixed point x solves c x + d = mu
    if abs(g.c) < 1e-300:
        att = "inf" if abs(g.a) > abs(g.d) else g.b / (g.d - g.a)
        rep = g.b / (g.d - g.a) if att == "inf" else "inf"
        return rep, att
    att = (mu1 - g.d) / g.c
    rep = (mu2 - g.d) / g.c
    return rep, att


def hyperbolic_kth_root(g: MoebiusElement, k: int) -> MoebiusElement:
    """The hyperbolic element h with the same axis and h^k = +-g."""
    cls = classify(g)
    if not cls.is_hyperbolic:
        raise NotHyperbolic("kth root defined for hyperbolic elements only")
    if g.trace < 0:
        g = -g
    tr = g.trace
    s = math.sqrt(tr * tr - 4.0)
    mu = (tr + s) / 2.0  # > 1
    root = mu ** (1.0 / k)

    def eigenvector(lam):
        # (b, lam - a) and (lam - d, c) both solve (g - lam) v = 0; the
        # larger one is numerically safe
        u = (g.b, lam - g.a)
        v = (lam - g.d, g.c)
        return u if u[0] * u[0] + u[1] * u[1] >= v[0] * v[0] + v[1] * v[1] else v

    v1 = eigenvector(mu)
    v2 = eigenvector(1.0 / mu)
    det = v1[0] * v2[1] - v2[0] * v1[1]
    # h = V diag(root, 1/root) V^{-1}
    inv = ((v2[1] / det, -v2[0] / det), (-v1[1] / det, v1[0] / det))
    lam = (root, 1.0 / root)
    a = v1[0] * lam[0] * inv[0][0] + v2[0] * lam[1] * inv[1][0]
    b = v1[0] * lam[0] * inv[0][1] + v2[0] * lam[1] * inv[1][1]
    c = v1[1] * lam[0] * inv[0][0] + v2[1] * lam[1] * inv[1][0]
    d = v1[1] * lam[0] * inv[0][1] + v2[1] * lam[1] * inv[1][1]
    return MoebiusElement(a, b, c, d)


def geodesic_through(z: complex, w: complex):
    """Geodesic through two points: ("line", x0) for a vertical line or
    ("circle", x0, r) for a semicircle centered at (x0, 0)."""
    if abs(z.real - w.real) < 1e-13 * max(1.0, abs(z.real)):
        return ("line", (z.real + w.real) / 2.0)
    x0 = (abs(z) ** 2 - abs(w) ** 2) / (2.0 * (z.real - w.real))
    return ("circle", x0, abs(z - x0))


def matrix_to_json(g: MoebiusElement):
    return [[g.a, g.b], [g.c, g.d]]


def cross_ratio_distance_check(z: UHPoint, w: UHPoint, n: int = 20000) -> float:
    """Independent distance oracle: arclength integral of |dz|/y along the
    geodesic arc from z to w, by composite Simpson sampling."""
    g = geodesic_through(z.z, w.z)
    if g[0] == "line":
        # vertical segment: integral of dy/y
        return abs(math.log(w.y / z.y))
    _, x0, r = g
    t1 = math.atan2(z.y, z.x - x0)
    t2 = math.atan2(w.y, w.x - x0)
    lo, hi = min(t1, t2), max(t1, t2)
    total = 0.0
    h = (hi - lo) / n
    for i in range(n):
        a = lo + i * h
        m = a + h / 2
        b = a + h
        fa = 1.0 / math.sin(a)
        fm = 1.0 / math.sin(m)
        fb = 1.0 / math.sin(b)
        total += (h / 6.0) * (fa + 4 * fm + fb)
    return total


def random_element(rng, scale: float = 1.0) -> MoebiusElement:
    """Random unit-determinant matrix, for property tests (seeded rng)."""
    while True:
        a, b, c = rng.uniform(-scale, scale, size=3)
        # choose d so that ad - bc = 1 when possible
        if abs(a) > 1e-3:
            d = (1.0 + b * c) / a
            return MoebiusElement(a, b, c, d)
