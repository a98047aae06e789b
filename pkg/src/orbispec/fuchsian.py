"""Fuchsian group presentations, conjugacy-class enumeration and length spectra.

Enumeration strategy: words in the generators and inverses are walked
breadth-first and collapsed to projective matrices (sign-canonical,
quantized), because distinct cyclic words frequently represent the same
group element once relations hold (r1 r2 r3 = 1 and the torsion powers in a
triangle group).  Conjugacy classes are then merged inside equal-|trace|
buckets using a bounded set of conjugators, and a class and its inverse are
merged into one unoriented record; `length_spectrum` counts both
orientations back in.  Completeness is never assumed: the certification
helper compares runs at word lengths L and L+2 and flags instability.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotHyperbolicTriangle, ParabolicClassError
from .halfplane import (
    MoebiusElement,
    UHPoint,
    apply,
    classify,
    distance,
    elliptic_fixed_point,
    geodesic_through,
    hyperbolic_kth_root,
    rotation_about,
)
from .orbisurface import Signature

LENGTH_MERGE_TOL = 1e-9
_QUANT = 1e-6  # matrix dedup bucket size; accumulated product error is ~1e-11


@dataclass(frozen=True)
class GroupPresentation:
    generators: tuple
    names: tuple

    def __post_init__(self):
        gens = tuple(self.generators)
        if not gens:
            raise ValueError("presentation needs at least one generator")
        names = tuple(self.names) if self.names else tuple(
            f"g{i+1}" for i in range(len(gens))
        )
        if len(names) != len(gens):
            raise ValueError("one name per generator")
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "names", names)

    def conjugated_by(self, s: MoebiusElement) -> "GroupPresentation":
        return GroupPresentation(
            tuple(g.conjugated_by(s) for g in self.generators), self.names
        )

    def to_json(self) -> dict:
        return {
            "generators": [[[g.a, g.b], [g.c, g.d]] for g in self.generators],
            "names": list(self.names),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "GroupPresentation":
        gens = tuple(MoebiusElement.from_matrix(m) for m in obj["generators"])
        return cls(gens, tuple(obj.get("names") or ()))


@dataclass(frozen=True)
class ConjugacyClassRecord:
    """One unoriented conjugacy class: canonical cyclic word plus geometry.

    `trace` is the absolute trace of the class (sign is a matrix-lift
    artifact).  Hyperbolic records satisfy
    length = power_index * primitive_length.
    """

    word: tuple
    kind: str  # "elliptic" | "hyperbolic"
    trace: float
    length: float | None = None
    primitive_length: float | None = None
    power_index: int = 1


@dataclass(frozen=True)
class EllipticClassData:
    order: int
    rotation_index: int
    theta: float
    centralizer_order: int


@dataclass(frozen=True)
class LengthSpectrum:
    """Ascending (length, primitive_length, multiplicity) entries."""

    entries: tuple
    max_length: float
    certified: bool = False
    certified_cutoff: float | None = None
    possibly_incomplete: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["length", "primitive_length", "multiplicity"])
        for length, prim, mult in self.entries:
            w.writerow([f"{length:.17g}", f"{prim:.17g}", str(mult)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, max_length: float | None = None) -> "LengthSpectrum":
        rows = list(csv.reader(io.StringIO(text)))
        entries = []
        for row in rows[1:]:
            if not row:
                continue
            entries.append((float(row[0]), float(row[1]), int(row[2])))
        entries.sort()
        if max_length is None:
            max_length = entries[-1][0] if entries else 0.0
        return cls(tuple(entries), max_length)


class ClassEnumeration(list):
    """List of ConjugacyClassRecord carrying the word-length cutoff used."""

    def __init__(self, records, max_word_len: int):
        super().__init__(records)
        self.max_word_len = max_word_len


# ---------------------------------------------------------------------------
# element table: BFS over words with projective matrix dedup


def _canonical_sign(flat: np.ndarray) -> np.ndarray:
    """Fix the matrix sign by the first entry with |x| >= 0.3 max|x|.

    The threshold rule is stable under small perturbations; a plain argmax
    could flip between near-tied entries of opposite sign.
    """
    absf = np.abs(flat)
    maxabs = absf.max(axis=1)
    mask = absf >= 0.3 * maxabs[:, None]
    idx = mask.argmax(axis=1)
    sign = np.sign(flat[np.arange(len(flat)), idx])
    sign[sign == 0] = 1.0
    return flat * sign[:, None]


def _candidate_keys(flat_row) -> list:
    """Quantized key plus neighbor keys for coordinates near a bucket edge."""
    scaled = flat_row / _QUANT
    base = np.round(scaled)
    frac = scaled - base
    options = []
    for j in range(4):
        if frac[j] > 0.25:
            options.append((int(base[j]), int(base[j]) + 1))
        elif frac[j] < -0.25:
            options.append((int(base[j]), int(base[j]) - 1))
        else:
            options.append((int(base[j]),))
    keys = [()]
    for opts in options:
        keys = [k + (o,) for k in keys for o in opts]
    return keys


class ElementTable:
    """BFS-enumerated ball of a matrix group in the word metric."""

    def __init__(self, group: GroupPresentation):
        self.group = group
        n = len(group.generators)
        mats = [np.array(g.to_matrix(), dtype=float) for g in group.generators]
        mats += [np.array(g.inverse().to_matrix(), dtype=float) for g in group.generators]
        self.letters = np.stack(mats)  # generators then inverses
        self.letter_ids = [i + 1 for i in range(n)] + [-(i + 1) for i in range(n)]
        self.mats = [np.eye(2)]
        self.words = [()]
        self.word_len = [0]
        self.index = {}
        self._insert_key(np.array([1.0, 0.0, 0.0, 1.0]), 0)
        self.depth = 0
        self._frontier = [0]

    def _lookup(self, flat_row):
        for k in _candidate_keys(flat_row):
            idx = self.index.get(k)
            if idx is not None:
                return idx
        return None

    def _insert_key(self, flat_row, idx):
        base = tuple(int(v) for v in np.round(flat_row / _QUANT))
        self.index[base] = idx

    def grow_to(self, max_word_len: int) -> None:
        while self.depth < max_word_len and self._frontier:
            frontier = self._frontier
            fmats = np.stack([self.mats[i] for i in frontier])
            prods = np.einsum("fij,ljk->flik", fmats, self.letters)
            flat = prods.reshape(-1, 4)
            flat = _canonical_sign(flat)
            nletters = len(self.letter_ids)
            new_frontier = []
            for row in range(flat.shape[0]):
                fi = frontier[row // nletters]
                letter = self.letter_ids[row % nletters]
                word = self.words[fi]
                if word and word[-1] == -letter:
                    continue  # immediate backtrack, already enumerated
                fr = flat[row]
                if self._lookup(fr) is not None:
                    continue
                idx = len(self.mats)
                self.mats.append(fr.reshape(2, 2))
                self.words.append(word + (letter,))
                self.word_len.append(self.depth + 1)
                self._insert_key(fr, idx)
                new_frontier.append(idx)
            self._frontier = new_frontier
            self.depth += 1

    def find(self, mat: np.ndarray):
        flat = _canonical_sign(mat.reshape(1, 4))[0]
        return self._lookup(flat)

    def element(self, idx: int) -> MoebiusElement:
        m = self.mats[idx]
        return MoebiusElement(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    def __len__(self):
        return len(self.mats)


# ---------------------------------------------------------------------------
# words


def cyclically_reduce(word: tuple) -> tuple:
    w = list(word)
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return tuple(w)


def canonical_cyclic_word(word: tuple) -> tuple:
    """Minimal rotation over the cyclically reduced word and its inverse."""
    w = cyclically_reduce(word)
    if not w:
        return w
    best = None
    for seq in (w, tuple(-x for x in reversed(w))):
        for i in range(len(seq)):
            rot = seq[i:] + seq[:i]
            if best is None or rot < best:
                best = rot
    return best


def word_to_string(word: tuple, names) -> str:
    parts = []
    for letter in word:
        name = names[abs(letter) - 1]
        parts.append(name if letter > 0 else name + "^-1")
    return "*".join(parts) if parts else "1"


# ---------------------------------------------------------------------------
# conjugacy classes


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        rx, ry = self.find(x), self.find(y)
        if rx != ry:
            self.parent[max(rx, ry)] = min(rx, ry)


def enumerate_classes(G: GroupPresentation, max_word_len: int,
                      conj_depth: int | None = None) -> ClassEnumeration:
    """Unoriented conjugacy classes (a class and its inverse merged) of all
    non-identity elements in the word ball of the given radius.

    A parabolic class aborts the run: cocompact groups have none, so a hit
    means the input is bad or the enumeration is corrupt.
    """
    if max_word_len < 0:
        raise ValueError("max_word_len must be >= 0")
    table = ElementTable(G)
    table.grow_to(max_word_len)
    if conj_depth is None:
        conj_depth = min(max_word_len, 6)

    # classify every element once; drop projective identities
    keep = []
    abstr = []
    for i in range(1, len(table)):
        m = table.mats[i]
        tr = m[0, 0] + m[1, 1]
        cls = classify(table.element(i))
        if cls.kind == "identity":
            continue
        if cls.kind == "parabolic":
            raise ParabolicClassError(
                f"parabolic element at word {word_to_string(table.words[i], G.names)}"
            )
        keep.append(i)
        abstr.append(abs(tr))
    if not keep:
        return ClassEnumeration([], max_word_len)

    order = np.argsort(np.array(abstr), kind="stable")
    keep = [keep[j] for j in order]
    abstr = [abstr[j] for j in order]

    conj_idx = [i for i in range(len(table)) if table.word_len[i] <= conj_depth]
    H = np.stack([table.mats[i] for i in conj_idx])
    Hinv = np.empty_like(H)
    Hinv[:, 0, 0] = H[:, 1, 1]
    Hinv[:, 0, 1] = -H[:, 0, 1]
    Hinv[:, 1, 0] = -H[:, 1, 0]
    Hinv[:, 1, 1] = H[:, 0, 0]

    pos_of = {idx: k for k, idx in enumerate(keep)}
    uf = _UnionFind(len(keep))

    # bucket by |trace| (same-class elements share it exactly up to fp noise)
    start = 0
    while start < len(keep):
        stop = start + 1
        while stop < len(keep) and abstr[stop] - abstr[stop - 1] <= 1e-7:
            stop += 1
        bucket = keep[start:stop]
        if len(bucket) > 1:
            bucket_set = set(bucket)
            for idx in bucket:
                g = table.mats[idx]
                inv = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
                j = table.find(inv)
                if j in bucket_set:
                    uf.union(pos_of[idx], pos_of[j])
                images = np.einsum("cij,jk,ckl->cil", H, g, Hinv)
                flat = _canonical_sign(images.reshape(-1, 4))
                for row in flat:
                    j = table._lookup(row)
                    if j is not None and j in bucket_set:
                        uf.union(pos_of[idx], pos_of[j])
        start = stop

    groups: dict = {}
    for k, idx in enumerate(keep):
        groups.setdefault(uf.find(k), []).append(idx)

    # representatives: shortest word, lexicographically first
    reps = []
    for members in groups.values():
        rep = min(members, key=lambda i: (table.word_len[i], table.words[i]))
        reps.append((rep, members))

    # primitive decomposition by matrix roots
    hyp_lengths = []
    rep_class = {}
    for rep, members in reps:
        cls = classify(table.element(rep))
        rep_class[rep] = cls
        if cls.is_hyperbolic:
            hyp_lengths.append(cls.length)
    min_len = min(hyp_lengths) if hyp_lengths else None

    records = []
    for rep, members in reps:
        cls = rep_class[rep]
        word = canonical_cyclic_word(table.words[rep])
        tr = abs(table.mats[rep][0, 0] + table.mats[rep][1, 1])
        if cls.is_elliptic:
            records.append(ConjugacyClassRecord(word, "elliptic", tr))
            continue
        length = cls.length
        power = 1
        kmax = int(length / min_len + 0.5) if min_len else 1
        for k in range(2, kmax + 1):
            cand = length / k
            if min_len and cand < min_len - LENGTH_MERGE_TOL:
                break
            root = hyperbolic_kth_root(table.element(rep), k)
            j = table.find(np.array(root.to_matrix()))
            if j is not None:
                power = k
        records.append(
            ConjugacyClassRecord(
                word, "hyperbolic", tr,
                length=length,
                primitive_length=length / power,
                power_index=power,
            )
        )

    records.sort(key=lambda r: (r.kind, r.length if r.length is not None else r.trace, r.word))
    return ClassEnumeration(records, max_word_len)


def length_spectrum(classes, max_length: float) -> LengthSpectrum:
    """Ascending oriented length spectrum from class records.

    Each unoriented record counts twice: a class and its inverse class are
    distinct oriented geodesics.
    """
    picked = []
    for rec in classes:
        if rec.kind != "hyperbolic":
            continue
        if rec.length <= max_length + LENGTH_MERGE_TOL:
            picked.append((rec.length, rec.primitive_length))
    picked.sort()
    entries = []
    for length, prim in picked:
        if entries and abs(entries[-1][0] - length) <= LENGTH_MERGE_TOL \
                and abs(entries[-1][1] - prim) <= LENGTH_MERGE_TOL:
            entries[-1][2] += 2
        else:
            entries.append([length, prim, 2])
    return LengthSpectrum(tuple(tuple(e) for e in entries), max_length)


def _spectra_agree_below(a: LengthSpectrum, b: LengthSpectrum):
    """Largest length below which the two spectra are identical."""
    for ea, eb in zip(a.entries, b.entries):
        if abs(ea[0] - eb[0]) > LENGTH_MERGE_TOL or \
           abs(ea[1] - eb[1]) > LENGTH_MERGE_TOL or ea[2] != eb[2]:
            return min(ea[0], eb[0]) - LENGTH_MERGE_TOL
    if len(a.entries) != len(b.entries):
        longer = a.entries if len(a.entries) > len(b.entries) else b.entries
        return longer[len(min((a.entries, b.entries), key=len))][0] - LENGTH_MERGE_TOL
    return None  # identical


def certified_length_spectrum(G: GroupPresentation, max_word_len: int,
                              max_length: float,
                              conj_depth: int | None = None) -> LengthSpectrum:
    """Spectrum with a stability certificate: runs at word lengths L and L+2
    must agree below the reported cutoff, else the result is flagged
    PossiblyIncomplete and truncated to the stable region."""
    spec_a = length_spectrum(enumerate_classes(G, max_word_len, conj_depth), max_length)
    spec_b = length_spectrum(enumerate_classes(G, max_word_len + 2, conj_depth), max_length)
    cutoff = _spectra_agree_below(spec_a, spec_b)
    if cutoff is None:
        return LengthSpectrum(spec_b.entries, max_length, certified=True,
                              certified_cutoff=max_length)
    stable = tuple(e for e in spec_b.entries if e[0] < cutoff)
    return LengthSpectrum(stable, max_length, certified=False,
                          certified_cutoff=cutoff, possibly_incomplete=True)


def elliptic_class_data(sig: Signature) -> list:
    """Nontrivial rotation classes at each cone point: for order m the powers
    k = 1..m-1, half-angle pi k / m, centralizer of order m."""
    out = []
    for m in sig.cone_orders:
        for k in range(1, m):
            out.append(EllipticClassData(m, k, math.pi * k / m, m))
    return out


# ---------------------------------------------------------------------------
# triangle groups


def _reflection_in(geo):
    """det -1 matrix of the reflection in a geodesic, acting as z -> M(conj z)."""
    if geo[0] == "line":
        x0 = geo[1]
        return np.array([[-1.0, 2.0 * x0], [0.0, 1.0]])
    _, x0, r = geo
    return np.array([[x0 / r, (r * r - x0 * x0) / r], [1.0 / r, -x0 / r]])


def triangle_group(p: int, q: int, r: int) -> GroupPresentation:
    """Rotation (von Dyck) triangle group: three elliptic generators
    rotating by 2pi/p, 2pi/q, 2pi/r about the vertices of the hyperbolic
    triangle with angles pi/p, pi/q, pi/r; satisfies r1 r2 r3 = +-I.

    The triangle is placed with one vertex at i and one side on the
    imaginary axis, the third vertex at positive real part.  Generators are
    products of reflections in the sides, and all relations are verified to
    1e-9 before returning.
    """
    for n in (p, q, r):
        if n < 2:
            raise ValueError("orders must be >= 2")
    if 1.0 / p + 1.0 / q + 1.0 / r >= 1.0 - 1e-15:
        raise NotHyperbolicTriangle(f"1/{p} + 1/{q} + 1/{r} >= 1")
    A, B, C = math.pi / p, math.pi / q, math.pi / r
    # hyperbolic law of cosines: side between the angle-A and angle-B vertices
    cosh_c = (math.cos(A) * math.cos(B) + math.cos(C)) / (math.sin(A) * math.sin(B))
    cosh_b = (math.cos(A) * math.cos(C) + math.cos(B)) / (math.sin(A) * math.sin(C))
    v1 = UHPoint(0.0, 1.0)
    v2 = UHPoint(0.0, math.exp(math.acosh(cosh_c)))
    up = UHPoint(0.0, math.exp(math.acosh(cosh_b)))
    v3 = apply(rotation_about(v1, -A), up)

    s1 = _reflection_in(geodesic_through(v2.z, v3.z))  # side opposite v1
    s2 = _reflection_in(geodesic_through(v1.z, v3.z))
    s3 = _reflection_in(geodesic_through(v1.z, v2.z))
    m1 = s2 @ s3
    m2 = s3 @ s1
    m3 = s1 @ s2
    gens = tuple(MoebiusElement.from_matrix(m) for m in (m1, m2, m3))
    group = GroupPresentation(gens, ("r1", "r2", "r3"))

    _verify_triangle_relations(group, (p, q, r), (v1, v2, v3))
    return group


def _verify_triangle_relations(group, orders, vertices, tol=1e-9):
    def is_pm_identity(g: MoebiusElement) -> bool:
        for sgn in (1.0, -1.0):
            if (abs(g.a - sgn) <= tol and abs(g.d - sgn) <= tol
                    and abs(g.b) <= tol and abs(g.c) <= tol):
                return True
        return False

    g1, g2, g3 = group.generators
    if not is_pm_identity(g1 @ g2 @ g3):
        raise RuntimeError("triangle construction failed: r1 r2 r3 != +-I")
    for g, n, v in zip(group.generators, orders, vertices):
        if not is_pm_identity(g.power(n)):
            raise RuntimeError(f"triangle construction failed: order-{n} relation")
        expected = 2.0 * abs(math.cos(math.pi / n))
        if abs(abs(g.trace) - expected) > tol:
            raise RuntimeError("triangle construction failed: generator trace")
        fp = elliptic_fixed_point(g)
        if distance(fp, v) > 1e-7:
            raise RuntimeError("triangle construction failed: rotation center")


def quotient_signature(p: int, q: int, r: int) -> Signature:
    """Signature of the quotient orbisurface of the (p,q,r) rotation group."""
    return Signature(0, (p, q, r))
