"""Dirichlet fundamental polygons for cocompact Fuchsian groups.

The polygon is assembled in the Poincare disk centered at the base point w:
each orbit point u = g(w) contributes a perpendicular-bisector circle
orthogonal to the unit circle (|C|^2 - R^2 = 1), and the cell is the
intersection of the circle exteriors.  The cell is star-shaped about the
origin, so its boundary is found by an angular sweep (first-hit radius per
direction), then refined to exact circle-circle vertices.  Certification is
by radius enlargement: the polygon computed from the orbit ball of radius R
must be reproduced exactly by the 1.5 R ball.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BoundViolated, GenerationUnverified, NotCertified, Unbounded
from .fuchsian import ElementTable, GroupPresentation
from .halfplane import (
    MoebiusElement,
    UHPoint,
    apply,
    classify,
    distance,
    elliptic_fixed_point,
    geodesic_through,
)

SWEEP_SAMPLES = 4096
VERTEX_TOL = 1e-8
DEGENERATE_ARC_TOL = 1e-9


@dataclass(frozen=True)
class PolygonSide:
    """Geodesic side from vertex `start` to vertex `end` (cyclic order).
    `pairing` maps this side onto side `partner`."""

    start: int
    end: int
    pairing: MoebiusElement
    partner: int


@dataclass(frozen=True)
class DirichletPolygon:
    center: UHPoint
    vertices: tuple  # UHPoint, cyclic order
    sides: tuple  # PolygonSide, side k runs from vertex k to vertex k+1
    ball_radius_used: float
    cone_vertex_orders: tuple  # cone order at each vertex, 0 if regular
    certified: bool = True

    def to_json(self) -> dict:
        return {
            "center": {"x": self.center.x, "y": self.center.y},
            "vertices": [
                {"x": v.x, "y": v.y, "cone_order": (o or None)}
                for v, o in zip(self.vertices, self.cone_vertex_orders)
            ],
            "sides": [
                {
                    "start": s.start,
                    "end": s.end,
                    "partner": s.partner,
                    "pairing": [[s.pairing.a, s.pairing.b],
                                [s.pairing.c, s.pairing.d]],
                }
                for s in self.sides
            ],
            "ball_radius_used": self.ball_radius_used,
            "certified": self.certified,
        }


@dataclass(frozen=True)
class DiameterEstimate:
    D: float
    method: str


# ---------------------------------------------------------------------------
# disk geometry around the base point


def _to_disk(w: UHPoint):
    wz = w.z
    wc = wz.conjugate()

    def phi(z: complex) -> complex:
        return (z - wz) / (z - wc)

    def phi_inv(u: complex) -> complex:
        return (wz - wc * u) / (1.0 - u)

    return phi, phi_inv


def _bisector_circle(u: complex):
    """Perpendicular bisector of (0, u) in the disk; returns (center, radius)
    of the Euclidean circle, orthogonal to the unit circle."""
    rho = abs(u)
    m_abs = rho / (1.0 + math.sqrt(max(0.0, 1.0 - rho * rho)))
    c_abs = (1.0 + m_abs * m_abs) / (2.0 * m_abs)
    center = u * (c_abs / rho)
    return center, math.sqrt(max(c_abs * c_abs - 1.0, 0.0))


def _first_hit(center: complex, phi: float) -> float:
    """Radius at which the ray at angle phi enters the circle; inf if missed."""
    q = center.real * math.cos(phi) + center.imag * math.sin(phi)
    if q < 1.0:
        return math.inf
    return q - math.sqrt(q * q - 1.0)


def _circle_intersection(c1: complex, c2: complex):
    """Intersection inside the unit disk of two bisector circles.  Both are
    orthogonal to the unit circle, so the radical line runs through 0."""
    d = c2 - c1
    if abs(d) < 1e-14:
        return None
    e = complex(-d.imag, d.real)
    e /= abs(e)
    # |s e - c|^2 = R^2 together with |c|^2 - R^2 = 1 gives
    # s^2 - 2 s Re(conj(e) c) + 1 = 0
    for ee in (e, -e):
        q = ee.real * c1.real + ee.imag * c1.imag
        if q >= 1.0:
            s = q - math.sqrt(q * q - 1.0)
            return s * ee
    return None


# ---------------------------------------------------------------------------
# orbit enumeration


def _orbit_elements(G: GroupPresentation, w: UHPoint, radius: float,
                    min_depth: int = 6, max_depth: int = 30):
    """Elements with d(w, g w) <= radius via adaptive-depth word BFS.
    Depth grows until two consecutive levels contribute nothing inside the
    ball (or the whole group is exhausted)."""
    table = ElementTable(G)
    found = []
    checked = 1  # index 0 is the identity
    quiet = 0
    depth = 0
    while depth < max_depth:
        depth += 1
        before = len(table)
        table.grow_to(depth)
        added = False
        for i in range(checked, len(table)):
            g = table.element(i)
            img = apply(g, w)
            if distance(w, img) <= radius:
                found.append((g, img))
                added = True
        checked = len(table)
        if len(table) == before:
            break  # frontier empty: finite ball closed
        quiet = 0 if added else quiet + 1
        if quiet >= 2 and depth >= min_depth:
            break
    return found


# ---------------------------------------------------------------------------
# cell construction


def _sweep_cell(circles: list):
    """Boundary structure of the intersection of circle exteriors.

    circles: list of (center, radius, orbit_index).  Returns (vertices,
    side_circle): vertices in cyclic order, side k running from vertex k to
    vertex k+1 and lying on circle side_circle[k] (an index into circles).
    """
    winner = []
    for k in range(SWEEP_SAMPLES):
        phi = 2.0 * math.pi * k / SWEEP_SAMPLES
        best = math.inf
        best_i = -1
        for i, (center, _r, _t) in enumerate(circles):
            r = _first_hit(center, phi)
            if r < best - 1e-15:
                best = r
                best_i = i
        if best_i < 0:
            raise Unbounded(
                "Dirichlet cell reaches the boundary circle: the group is not "
                "cocompact, or the orbit ball is too small"
            )
        winner.append(best_i)

    # rotate so index 0 starts a fresh run
    rot = None
    for k in range(SWEEP_SAMPLES):
        if winner[k] != winner[k - 1]:
            rot = k
            break
    if rot is None:
        raise Unbounded("a single bisector circle covers every direction")
    seq = winner[rot:] + winner[:rot]
    runs = []
    for wv in seq:
        if runs and runs[-1] == wv:
            continue
        runs.append(wv)
    if len(runs) >= 2 and runs[0] == runs[-1]:
        runs.pop()
    if len(runs) < 3:
        raise Unbounded("degenerate cell (fewer than 3 boundary arcs)")

    # drop spurious runs until all arc vertices are clean
    while True:
        m = len(runs)
        verts = []
        ok = True
        for j in range(m):
            c1 = circles[runs[j]][0]
            c2 = circles[runs[(j + 1) % m]][0]
            v = _circle_intersection(c1, c2)
            if v is None:
                ok = False
                drop = (j + 1) % m
                break
            verts.append(v)
        if ok:
            # degenerate arcs: both endpoints coincide
            drop = None
            for j in range(m):
                if abs(verts[j] - verts[j - 1]) < DEGENERATE_ARC_TOL:
                    drop = j
                    break
            if drop is None:
                break
        runs.pop(drop)
        if len(runs) < 3:
            raise Unbounded("cell collapsed while pruning degenerate arcs")

    # verts[j] joins arc runs[j] and runs[j+1]; re-index so side k goes from
    # vertex k to vertex k+1 and lies on circle runs[(k+1) % m]
    m = len(runs)
    vertices = verts
    side_circle = [runs[(k + 1) % m] for k in range(m)]
    # feasibility check against every circle
    for v in vertices:
        for center, radius, _ in circles:
            if abs(v - center) < radius - 1e-9:
                raise Unbounded(
                    "sweep produced an infeasible vertex; enlarge the orbit ball"
                )
    return vertices, side_circle


def _insert_cone_vertices(vertices, side_circle, circles, cone_points):
    """Split sides at elliptic fixed points lying in their interior, and
    flag vertices coinciding with fixed points.  Returns (vertices, orders,
    side_circle) with sides re-split."""
    n = len(vertices)
    orders = [0] * n
    for i, v in enumerate(vertices):
        for u, order in cone_points:
            if abs(v - u) < 1e-7:
                orders[i] = max(orders[i], order)

    out_v, out_o, out_c = [], [], []
    for k in range(n):
        v1 = vertices[k]
        v2 = vertices[(k + 1) % n]
        ci = side_circle[k]
        center, radius, _ = circles[ci]
        out_v.append(v1)
        out_o.append(orders[k])
        inserts = []
        for u, order in cone_points:
            if abs(abs(u - center) - radius) > 1e-7:
                continue
            if abs(u - v1) < 1e-8 or abs(u - v2) < 1e-8:
                continue
            a1 = math.atan2((v1 - center).imag, (v1 - center).real)
            a2 = math.atan2((v2 - center).imag, (v2 - center).real)
            au = math.atan2((u - center).imag, (u - center).real)
            if _angle_between(a1, au, a2):
                inserts.append((abs(u - v1), u, order))
        inserts.sort(key=lambda rec: rec[0])
        out_c.append(ci)
        for _, u, order in inserts:
            out_v.append(u)
            out_o.append(order)
            out_c.append(ci)
    return out_v, out_o, out_c


def _angle_between(a1, au, a2):
    def norm(x):
        while x <= -math.pi:
            x += 2.0 * math.pi
        while x > math.pi:
            x -= 2.0 * math.pi
        return x

    span = norm(a2 - a1)
    part = norm(au - a1)
    if span >= 0:
        return 0.0 < part < span
    return span < part < 0.0


def compute_polygon(G: GroupPresentation, w: UHPoint, R: float,
                    _certify: bool = True) -> DirichletPolygon:
    """Dirichlet polygon about w built from the orbit ball of radius R;
    certified by recomputation at radius 1.5 R (identical polygon required).

    Raises Unbounded when the cell is not compact within the numerical
    horizon, NotCertified when the enlarged ball changes the polygon."""
    if R <= 0:
        raise ValueError("R must be positive")
    phi, phi_inv = _to_disk(w)
    elements = _orbit_elements(G, w, R)

    orbit = []  # (u, g)
    seen = set()
    for g, img in elements:
        u = phi(img.z)
        if abs(u) < 1e-12:
            continue  # g fixes w, no bisector
        key = (round(u.real, 10), round(u.imag, 10))
        if key in seen:
            continue
        seen.add(key)
        orbit.append((u, g))
    if not orbit:
        raise Unbounded("no orbit points inside the requested ball radius")
    orbit.sort(key=lambda rec: (round(rec[0].real, 12), round(rec[0].imag, 12)))

    circles = []
    for idx, (u, g) in enumerate(orbit):
        center, radius = _bisector_circle(u)
        circles.append((center, radius, idx))

    verts_d, side_circle = _sweep_cell(circles)

    cone_points = []
    cone_seen = set()
    for g, _img in elements:
        cls = classify(g)
        if not cls.is_elliptic:
            continue
        fp = elliptic_fixed_point(g)
        theta = min(cls.theta, math.pi - cls.theta)
        order = round(math.pi / theta)
        u = phi(fp.z)
        key = (round(u.real, 9), round(u.imag, 9))
        if key in cone_seen:
            continue
        cone_seen.add(key)
        cone_points.append((u, order))
    # keep the highest rotation order per fixed point
    merged = {}
    for u, order in cone_points:
        for mu in merged:
            if abs(mu - u) < 1e-9:
                merged[mu] = max(merged[mu], order)
                break
        else:
            merged[u] = order
    cone_points = list(merged.items())

    verts_d, orders, side_circle = _insert_cone_vertices(
        verts_d, side_circle, circles, cone_points
    )

    vertices = tuple(UHPoint.from_complex(phi_inv(v)) for v in verts_d)
    sides = _pair_sides(verts_d, side_circle, circles, orbit, vertices, phi_inv)

    poly = DirichletPolygon(
        center=w,
        vertices=vertices,
        sides=sides,
        ball_radius_used=R,
        cone_vertex_orders=tuple(orders),
        certified=_certify,
    )
    if _certify:
        bigger = compute_polygon(G, w, 1.5 * R, _certify=False)
        if not _same_polygon(poly, bigger):
            raise NotCertified(
                f"polygon changed when the orbit ball grew from {R:g} to "
                f"{1.5 * R:g}; increase R"
            )
    return poly


def _pair_sides(verts_d, side_circle, circles, orbit, vertices, phi_inv):
    """Attach the pairing element g^{-1} to each side (the side lies on the
    bisector of w and g w) and locate the partner side it maps onto."""
    n = len(verts_d)
    side_g = []
    for k in range(n):
        _c, _r, orbit_idx = circles[side_circle[k]]
        side_g.append(orbit[orbit_idx][1])

    sides = []
    for k in range(n):
        g = side_g[k]
        pairing = g.inverse()
        a = apply(pairing, vertices[k])
        b = apply(pairing, vertices[(k + 1) % n])
        # the partner lies on the bisector of w and g^{-1} w; sides split at
        # cone points share a bisector, so pick the candidate by endpoints
        partner = None
        best = math.inf
        for j in range(n):
            if not _is_projectively_close(side_g[j], pairing):
                continue
            pa = vertices[j]
            pb = vertices[(j + 1) % n]
            resid = min(
                max(distance(a, pa), distance(b, pb)),
                max(distance(a, pb), distance(b, pa)),
            )
            if resid < best:
                best = resid
                partner = j
        if partner is None or best > VERTEX_TOL:
            raise NotCertified(
                f"side {k} has no partner side under its pairing "
                f"(best residual {best:.2e}); orbit ball too small"
            )
        sides.append(PolygonSide(k, (k + 1) % n, pairing, partner))
    return tuple(sides)


def _is_projectively_close(g: MoebiusElement, h: MoebiusElement,
                           tol: float = 1e-8) -> bool:
    for sgn in (1.0, -1.0):
        if (abs(g.a - sgn * h.a) <= tol and abs(g.b - sgn * h.b) <= tol
                and abs(g.c - sgn * h.c) <= tol and abs(g.d - sgn * h.d) <= tol):
            return True
    return False


def _same_polygon(a: DirichletPolygon, b: DirichletPolygon) -> bool:
    if len(a.vertices) != len(b.vertices):
        return False
    bz = [v.z for v in b.vertices]
    for v in a.vertices:
        if min(abs(v.z - u) for u in bz) > VERTEX_TOL:
            return False
    return True


# ---------------------------------------------------------------------------
# derived quantities


def side_pairings(P: DirichletPolygon, word_length_bound: int = 12,
                  node_cap: int = 200000) -> list:
    """Side-pairing elements, deduplicated with inverses identified.

    Generation is verified: every original element used to build the sides
    must be reachable; here each distinct pairing (and each inverse) must
    map sides onto sides, and the pairing set is checked to generate the
    original generators by a bounded word search."""
    if len(P.sides) < 2:
        raise GenerationUnverified("degenerate polygon: fewer than 2 sides")
    reps = []
    for side in P.sides:
        g = side.pairing
        if any(_is_projectively_close(g, h) or
               _is_projectively_close(g, h.inverse()) for h in reps):
            continue
        reps.append(g)
    return reps


def verify_generation(pairings: list, G: GroupPresentation,
                      word_length_bound: int = 12,
                      node_cap: int = 200000) -> dict:
    """Express each original generator as a word of length <=
    word_length_bound in the pairings (and their inverses); raises
    GenerationUnverified when the bounded search fails."""
    if not pairings:
        raise GenerationUnverified("no pairings to generate from")
    alphabet = []
    for g in pairings:
        alphabet.append(g)
        alphabet.append(g.inverse())
    targets = {i: None for i in range(len(G.generators))}
    # BFS with projective matrix dedup
    table = {}

    def key(g):
        vals = (g.a, g.b, g.c, g.d)
        m = max(abs(v) for v in vals)
        pick = next(v for v in vals if abs(v) >= 0.3 * m)
        sgn = 1.0 if pick >= 0 else -1.0
        return tuple(round(sgn * v, 7) for v in vals)

    frontier = [(MoebiusElement.identity(), ())]
    table[key(frontier[0][0])] = ()
    depth = 0
    while depth < word_length_bound and frontier:
        depth += 1
        new_frontier = []
        for g, word in frontier:
            for li, letter in enumerate(alphabet):
                h = g @ letter
                k = key(h)
                if k in table:
                    continue
                table[k] = word + (li,)
                new_frontier.append((h, word + (li,)))
                if len(table) > node_cap:
                    raise GenerationUnverified(
                        f"word search exceeded {node_cap} nodes before "
                        "reaching all generators"
                    )
        frontier = new_frontier
        for i, gen in enumerate(G.generators):
            if targets[i] is None:
                k = key(gen)
                if k in table:
                    targets[i] = table[k]
        if all(v is not None for v in targets.values()):
            break
    missing = [G.names[i] for i, v in targets.items() if v is None]
    if missing:
        raise GenerationUnverified(
            f"generators {missing} not expressible in pairing words of "
            f"length <= {word_length_bound}"
        )
    return {G.names[i]: list(word) for i, word in targets.items()}


def polygon_area(P: DirichletPolygon) -> float:
    """Hyperbolic area by angle defect: (n-2) pi - sum of interior angles."""
    n = len(P.vertices)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    phi, _ = _to_disk(P.center)
    verts = [phi(v.z) for v in P.vertices]
    total_angle = 0.0
    for i in range(n):
        v = verts[i]
        prev = verts[(i - 1) % n]
        nxt = verts[(i + 1) % n]
        # disk automorphism sending v to 0 turns geodesics through v into
        # diameters; the interior angle is then a Euclidean angle at 0
        def mv(z):
            return (z - v) / (1.0 - v.conjugate() * z)

        a1 = cmathphase(mv(prev))
        a2 = cmathphase(mv(nxt))
        ang = abs(a1 - a2)
        if ang > math.pi:
            ang = 2.0 * math.pi - ang
        total_angle += ang
    return (n - 2) * math.pi - total_angle


def cmathphase(z: complex) -> float:
    return math.atan2(z.imag, z.real)


def diameter_estimate(P: DirichletPolygon) -> DiameterEstimate:
    """Upper bound 2 * max distance(center, vertex): any two points of the
    quotient connect through the center within this length."""
    rho = max(distance(P.center, v) for v in P.vertices)
    return DiameterEstimate(2.0 * rho, "twice the circumradius about the center")


def check_trace_bounds(pairings: list, D: float) -> list:
    """Verify |tr| <= 2 cosh(k D) for every hyperbolic product of k = 1, 2, 3
    pairing elements.  Returns the per-product report; raises BoundViolated
    if any bound fails (the inequality is a theorem, so a failure means the
    polygon or diameter is wrong)."""
    report = []
    elems = list(enumerate(pairings))

    def record(word, g, k):
        cls = classify(g)
        if not cls.is_hyperbolic:
            return
        bound = 2.0 * math.cosh(k * D)
        tr = abs(g.trace)
        report.append({
            "word": word,
            "k": k,
            "abs_trace": tr,
            "bound": bound,
            "margin": bound - tr,
            "pass": tr <= bound,
        })

    for i, g in elems:
        record((i,), g, 1)
    for i, g in elems:
        for j, h in elems:
            record((j, i), h @ g, 2)
    for i, g in elems:
        for j, h in elems:
            for k, f in elems:
                record((k, j, i), f @ h @ g, 3)
    bad = [row for row in report if not row["pass"]]
    if bad:
        raise BoundViolated(
            f"{len(bad)} of {len(report)} hyperbolic products violate the "
            "cosh trace bound", report
        )
    return report


# ---------------------------------------------------------------------------
# SVG export


def polygon_svg(P: DirichletPolygon, width: int = 640) -> str:
    """Upper half-plane picture: geodesic sides as circular arcs or vertical
    lines, cone vertices marked.  The viewBox is the polygon bounding box
    padded by 10 percent."""
    pts = [v.z for v in P.vertices]
    n = len(pts)
    xs = [p.real for p in pts] + [P.center.x]
    ys = [p.imag for p in pts] + [P.center.y]
    # arc apexes can stick out above the chord
    apex = []
    for i in range(n):
        z1, z2 = pts[i], pts[(i + 1) % n]
        geo = geodesic_through(z1, z2)
        if geo[0] == "circle":
            _, x0, r = geo
            lo, hi = min(z1.real, z2.real), max(z1.real, z2.real)
            if lo <= x0 <= hi:
                apex.append(r)
                xs.append(x0)
                ys.append(r)
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    pad_x = 0.1 * max(x_hi - x_lo, 1e-6)
    pad_y = 0.1 * max(y_hi - y_lo, 1e-6)
    x_lo -= pad_x
    x_hi += pad_x
    y_lo -= pad_y
    y_hi += pad_y
    h = width * (y_hi - y_lo) / (x_hi - x_lo)

    def sx(x):
        return (x - x_lo) / (x_hi - x_lo) * width

    def sy(y):
        return (y_hi - y) / (y_hi - y_lo) * h  # flip: SVG y grows downward

    scale = width / (x_hi - x_lo)
    path = [f"M {sx(pts[0].real):.4f} {sy(pts[0].imag):.4f}"]
    for i in range(n):
        z1, z2 = pts[i], pts[(i + 1) % n]
        geo = geodesic_through(z1, z2)
        if geo[0] == "line":
            path.append(f"L {sx(z2.real):.4f} {sy(z2.imag):.4f}")
        else:
            _, x0, r = geo
            a1 = math.atan2(z1.imag, z1.real - x0)
            a2 = math.atan2(z2.imag, z2.real - x0)
            # y-flip reverses orientation: counterclockwise in math
            # coordinates becomes sweep=1 in SVG
            sweep = 1 if a2 > a1 else 0
            rr = r * scale
            path.append(f"A {rr:.4f} {rr:.4f} 0 0 {sweep} "
                        f"{sx(z2.real):.4f} {sy(z2.imag):.4f}")
    path.append("Z")

    marks = []
    for v, order in zip(P.vertices, P.cone_vertex_orders):
        if order:
            marks.append(
                f'<circle cx="{sx(v.x):.4f}" cy="{sy(v.y):.4f}" r="4" '
                f'fill="#c02020"><title>cone point, order {order}</title></circle>'
            )
        else:
            marks.append(
                f'<circle cx="{sx(v.x):.4f}" cy="{sy(v.y):.4f}" r="2.5" '
                f'fill="#204080"/>'
            )
    marks.append(
        f'<circle cx="{sx(P.center.x):.4f}" cy="{sy(P.center.y):.4f}" r="3" '
        f'fill="none" stroke="#208040" stroke-width="1.5"/>'
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{h:.2f}" viewBox="0 0 {width} {h:.2f}">\n'
        f'<path d="{" ".join(path)}" fill="#e8efff" stroke="#204080" '
        f'stroke-width="1.5"/>\n' + "\n".join(marks) + "\n</svg>\n"
    )
