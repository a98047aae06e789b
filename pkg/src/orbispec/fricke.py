"""Trace signatures of generator lists and reconstruction of the
diagonal-conjugation-or-reflection equivalence between two groups whose
single, double and triple traces agree.

Everything here works with signed SL(2,R) matrix entries; the reconstruction
manipulates the raw entries, so generator lists must be matched (no change
of generating set is attempted).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InconsistentRatios, NoHyperbolicGenerator, OffDiagonalVanishes
from .fuchsian import GroupPresentation
from .halfplane import MoebiusElement, axis_endpoints, classify

TRACE_TOL = 1e-9
RATIO_TOL = 1e-8
OFFDIAG_TOL = 1e-12
WITNESS_TOL = 1e-9

def _reflect(g: MoebiusElement) -> MoebiusElement:
    """Conjugation by diag(1, -1): flips the signs of the off-diagonals."""
    return MoebiusElement(g.a, -g.b, -g.c, g.d)


@dataclass(frozen=True)
class TraceSignature:
    singles: tuple
    doubles: tuple  # tr(h_i h_j), i < j, lexicographic
    triples: tuple  # tr(h_i h_j h_k), i < j < k, lexicographic

    def close_to(self, other: "TraceSignature", tol: float = TRACE_TOL) -> bool:
        if (len(self.singles), len(self.doubles), len(self.triples)) != \
                (len(other.singles), len(other.doubles), len(other.triples)):
            return False
        for mine, theirs in ((self.singles, other.singles),
                             (self.doubles, other.doubles),
                             (self.triples, other.triples)):
            if any(abs(x - y) > tol for x, y in zip(mine, theirs)):
                return False
        return True


@dataclass(frozen=True)
class EquivalenceWitness:
    """Conjugation / ConjugationWithReflection carry the diagonal witness s
    (entries t, 1/t); NotEquivalent carries a reason."""

    kind: str  # "conjugation" | "conjugation_reflection" | "not_equivalent"
    s: MoebiusElement | None = None
    t_squared: float | None = None
    residual: float | None = None
    reason: str | None = None

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "t_squared": self.t_squared,
            "residual": self.residual,
            "reason": self.reason,
        }


def trace_signature(G: GroupPresentation) -> TraceSignature:
    """Single, double and triple traces of the generator list, in index order."""
    gens = G.generators
    n = len(gens)
    singles = tuple(g.trace for g in gens)
    doubles = []
    for i in range(n):
        for j in range(i + 1, n):
            doubles.append((gens[i] @ gens[j]).trace)
    triples = []
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                triples.append((gens[i] @ gens[j] @ gens[k]).trace)
    return TraceSignature(singles, tuple(doubles), tuple(triples))


def _is_diagonal_form(g: MoebiusElement) -> bool:
    return abs(g.b) <= OFFDIAG_TOL and abs(g.c) <= OFFDIAG_TOL and g.a > 1.0


def normalize(G: GroupPresentation) -> GroupPresentation:
    """Reorder and conjugate so the first generator is diag(m, 1/m), m > 1.

    The hyperbolic generator with the largest |trace| is chosen (ties by
    index) and the whole list is conjugated by the element sending its axis
    endpoints to (0, infinity), repelling endpoint first.
    """
    best = None
    for i, g in enumerate(G.generators):
        cls = classify(g)
        if cls.is_hyperbolic:
            key = abs(g.trace)
            if best is None or key > best[0] + 1e-15:
                best = (key, i)
    if best is None:
        raise NoHyperbolicGenerator(
            "every generator is elliptic or parabolic; replace generators by "
            "products containing a hyperbolic element first"
        )
    i0 = best[1]
    order = [i0] + [i for i in range(len(G.generators)) if i != i0]
    gens = [G.generators[i] for i in order]
    names = [G.names[i] for i in order]
    h1 = gens[0]

    if _is_diagonal_form(h1):
        return GroupPresentation(tuple(gens), tuple(names))

    rep, att = axis_endpoints(h1)
    swap = MoebiusElement(0.0, -1.0, 1.0, 0.0)  # z -> -1/z, exchanges 0 and inf
    if rep == "inf" or att == "inf":
        # translate the finite endpoint to 0, then flip if needed
        finite = att if rep == "inf" else rep
        s = MoebiusElement(1.0, -float(finite), 0.0, 1.0)
        if rep == "inf":
            s = swap @ s
    else:
        p, q = float(rep), float(att)
        det = p - q
        if det > 0:
            s = MoebiusElement(1.0 / math.sqrt(det), -p / math.sqrt(det),
                               1.0 / math.sqrt(det), -q / math.sqrt(det))
        else:
            s = MoebiusElement(-1.0 / math.sqrt(-det), p / math.sqrt(-det),
                               -1.0 / math.sqrt(-det), q / math.sqrt(-det))
    out = [g.conjugated_by(s) for g in gens]
    if abs(out[0].a) < abs(out[0].d):
        out = [g.conjugated_by(swap) for g in out]
    # matrix sign may leave a = -m; the projective representative with m > 1
    # is the canonical one
    if out[0].a < 0:
        out[0] = -out[0]
    first = MoebiusElement(out[0].a, 0.0, 0.0, out[0].d)  # clean tiny residue
    out[0] = first
    return GroupPresentation(tuple(out), tuple(names))


def _check_normalized(G: GroupPresentation, label: str) -> None:
    h1 = G.generators[0]
    if not (_is_diagonal_form(h1) and classify(h1).is_hyperbolic):
        raise ValueError(f"{label} is not normalized: first generator must be "
                         "diag(m, 1/m) with m > 1 (run normalize first)")


def _witness_residual(G, H, s, reflected: bool) -> float:
    worst = 0.0
    for g, h in zip(G.generators, H.generators):
        hh = _reflect(h) if reflected else h
        img = hh.conjugated_by(s)
        worst = max(worst, abs(img.a - g.a), abs(img.b - g.b),
                    abs(img.c - g.c), abs(img.d - g.d))
    return worst


def reconstruct_equivalence(G: GroupPresentation, H: GroupPresentation
                            ) -> EquivalenceWitness:
    """Decide whether two normalized generator lists differ by a diagonal
    conjugation, optionally composed with the reflection diag(1,-1), and
    produce the witness.

    The off-diagonal ratios b_i/b_i' and c_i'/c_i must agree across all
    generators; their common value is t^2, negative exactly when the
    reflection is needed.
    """
    if len(G.generators) != len(H.generators):
        raise ValueError("generator counts differ")
    _check_normalized(G, "first group")
    _check_normalized(H, "second group")

    if not trace_signature(G).close_to(trace_signature(H)):
        return EquivalenceWitness("not_equivalent", reason="traces differ")

    n = len(G.generators)
    # no generator besides the first may be diagonal: a second diagonal
    # element shares the axis of h1, which a properly discontinuous action
    # only allows for powers of h1
    for label, group in (("first", G), ("second", H)):
        for i in range(1, n):
            g = group.generators[i]
            b_zero = abs(g.b) <= OFFDIAG_TOL
            c_zero = abs(g.c) <= OFFDIAG_TOL
            if b_zero and c_zero:
                raise OffDiagonalVanishes(
                    f"{label} group, generator {i + 1} is diagonal: not a valid "
                    "Fuchsian generator list (only the first may be diagonal)"
                )
            if b_zero or c_zero:
                raise OffDiagonalVanishes(
                    f"{label} group, generator {i + 1} has a vanishing "
                    "off-diagonal entry, contradicting proper discontinuity"
                )

    for i in range(1, n):
        g, h = G.generators[i], H.generators[i]
        if abs(g.a - h.a) > RATIO_TOL or abs(g.d - h.d) > RATIO_TOL:
            raise InconsistentRatios(
                f"diagonal entries of generator {i + 1} differ although the "
                "traces match; the groups are not related as assumed"
            )

    if n == 1:
        s = MoebiusElement.identity()
        return EquivalenceWitness("conjugation", s, 1.0,
                                  _witness_residual(G, H, s, False))

    ratios = []
    for i in range(1, n):
        g, h = G.generators[i], H.generators[i]
        ratios.append(g.b / h.b)
        ratios.append(h.c / g.c)
    t2 = ratios[0]
    if any(abs(r - t2) > RATIO_TOL * max(1.0, abs(t2)) for r in ratios):
        raise InconsistentRatios(
            "off-diagonal ratios disagree across generators: trace data "
            "matches but no diagonal conjugation (or reflection) links the lists"
        )

    reflected = t2 < 0
    t = math.sqrt(abs(t2))
    s = MoebiusElement(t, 0.0, 0.0, 1.0 / t)
    residual = _witness_residual(G, H, s, reflected)
    if residual > WITNESS_TOL:
        raise InconsistentRatios(
            f"witness verification failed: residual {residual:.3e} above "
            f"{WITNESS_TOL}"
        )
    kind = "conjugation_reflection" if reflected else "conjugation"
    return EquivalenceWitness(kind, s, t2, residual)
