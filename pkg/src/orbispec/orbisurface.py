"""Orbisurface signatures: Euler characteristic, area, Weyl count and
isospectrality obstructions.

The Euler characteristic is kept as an exact rational so area-equality
tests are exact; nothing here touches floating point until an area or a
Weyl count is requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import NotHyperbolic

OBSTRUCTION_RULES = (
    "WeylAreaMismatch",
    "ConeVsManifold",
    "OneConePoint",
    "GenusConeCount",
)


@dataclass(frozen=True)
class Signature:
    """Genus plus the multiset of cone-point orders (sorted ascending)."""

    genus: int
    cone_orders: tuple = field(default=())

    def __post_init__(self):
        if self.genus < 0 or self.genus != int(self.genus):
            raise ValueError(f"genus must be a non-negative integer, got {self.genus}")
        orders = tuple(sorted(int(m) for m in self.cone_orders))
        if any(m < 2 for m in orders):
            raise ValueError("every cone order must be >= 2")
        object.__setattr__(self, "cone_orders", orders)

    def to_json(self) -> dict:
        return {"genus": self.genus, "cones": list(self.cone_orders)}

    @classmethod
    def from_json(cls, obj: dict) -> "Signature":
        return cls(obj["genus"], tuple(obj.get("cones", ())))


@dataclass(frozen=True)
class ObstructionVerdict:
    """Either Obstructed with exactly one rule tag, or NoObstructionFound."""

    obstructed: bool
    rule: str | None = None

    def __post_init__(self):
        if self.obstructed and self.rule not in OBSTRUCTION_RULES:
            raise ValueError(f"unknown rule {self.rule!r}")
        if not self.obstructed and self.rule is not None:
            raise ValueError("NoObstructionFound carries no rule")

    def to_json(self) -> dict:
        return {"obstructed": self.obstructed, "rule": self.rule}


def euler_characteristic(sig: Signature) -> Fraction:
    """chi = (2 - 2 genus) - sum_j (1 - 1/m_j), exact."""
    chi = Fraction(2 - 2 * sig.genus)
    for m in sig.cone_orders:
        chi -= 1 - Fraction(1, m)
    return chi


def hyperbolic_area(sig: Signature) -> float:
    """Gauss-Bonnet at curvature -1: area = -2 pi chi; needs chi < 0."""
    chi = euler_characteristic(sig)
    if chi >= 0:
        raise NotHyperbolic(
            f"signature genus={sig.genus} cones={list(sig.cone_orders)} has chi={chi} >= 0"
        )
    return float(-2 * math.pi * chi)


def weyl_count_asymptote(sig: Signature, lam: float) -> float:
    """Leading term of the eigenvalue counting function: area * lambda / (4 pi)."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    return hyperbolic_area(sig) * lam / (4.0 * math.pi)


def _one_cone_point_fires(x: Signature, y: Signature) -> bool:
    # genus g >= 1 on both sides, x has exactly one cone point of order m,
    # y's cone multiset is not [m]
    if x.genus != y.genus or x.genus < 1:
        return False
    if len(x.cone_orders) != 1:
        return False
    return y.cone_orders != x.cone_orders


def _genus_cone_count_fires(x: Signature, y: Signature) -> bool:
    # label so genus(y) >= genus(x); k cones on x, l on y, h = 2(g_x - g_y);
    # fires when l >= 2(k + h).  k >= 1 is required: the contradiction
    # bounds a strictly positive sum of unit fractions by h + k - l/2 <= 0.
    if y.genus < x.genus:
        return False
    k = len(x.cone_orders)
    l = len(y.cone_orders)
    if k < 1:
        return False
    h = 2 * (x.genus - y.genus)
    return l >= 2 * (k + h)


def obstruction_check(a: Signature, b: Signature) -> ObstructionVerdict:
    """Test the pair against the four isospectrality obstructions.

    Rule order (first hit wins): ConeVsManifold, OneConePoint,
    GenusConeCount, WeylAreaMismatch.  The three structural rules embed
    their own exact chi contradiction, so they are checked before the raw
    area comparison; this keeps the classical one-cone-point scenario
    reported under its own name.  A verdict of NoObstructionFound means
    only that these rules do not rule the pair out.
    """
    for sig in (a, b):
        if euler_characteristic(sig) >= 0:
            raise NotHyperbolic(
                f"signature genus={sig.genus} cones={list(sig.cone_orders)} is not hyperbolic"
            )
    if (len(a.cone_orders) == 0) != (len(b.cone_orders) == 0):
        return ObstructionVerdict(True, "ConeVsManifold")
    if _one_cone_point_fires(a, b) or _one_cone_point_fires(b, a):
        return ObstructionVerdict(True, "OneConePoint")
    if _genus_cone_count_fires(a, b) or _genus_cone_count_fires(b, a):
        return ObstructionVerdict(True, "GenusConeCount")
    if euler_characteristic(a) != euler_characteristic(b):
        return ObstructionVerdict(True, "WeylAreaMismatch")
    return ObstructionVerdict(False)
