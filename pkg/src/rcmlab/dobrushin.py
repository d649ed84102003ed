"""Dobrushin domains on the medial lattice.

A domain is given by two oriented medial paths ``ab`` (counterclockwise)
and ``ba`` (clockwise) running from ``a`` to ``b``.  All coordinates are
doubled, so a medial vertex is an integer pair with an odd coordinate sum,
primal vertices are even/even pairs and dual vertices odd/odd pairs.

The state of a medial vertex is the state of the primal edge through it.
Vertices with four incident medial edges in ``E u {e_a, e_b}`` carry a
random state; the remaining vertices are forced: closed on ``ab`` (dual
wired arc) and open on ``ba`` (wired arc).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidArcs
from .lattice import FiniteGraph

RANDOM, FORCED_OPEN, FORCED_CLOSED = 0, 1, 2

_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))  # counterclockwise order


def is_medial(c) -> bool:
    return (c[0] + c[1]) % 2 == 1


def face_centers(m, n) -> tuple[tuple, tuple]:
    """Primal (even/even) and dual (odd/odd) points bordering the medial step ``m n``."""
    c1, c2 = (n[0], m[1]), (m[0], n[1])
    return (c1, c2) if c1[0] % 2 == 0 else (c2, c1)


def oriented(m, n) -> bool:
    """True if ``m -> n`` is a medial edge oriented counterclockwise around its primal vertex."""
    dx, dy = n[0] - m[0], n[1] - m[1]
    if abs(dx) != 1 or abs(dy) != 1:
        return False
    p, _ = face_centers(m, n)
    a = (m[0] - p[0], m[1] - p[1])
    b = (n[0] - p[0], n[1] - p[1])
    return (-a[1], a[0]) == b


def lattice_out(m) -> list[tuple]:
    return [(m[0] + dx, m[1] + dy) for dx in (-1, 1) for dy in (-1, 1) if oriented(m, (m[0] + dx, m[1] + dy))]


def lattice_in(m) -> list[tuple]:
    return [(m[0] + dx, m[1] + dy) for dx in (-1, 1) for dy in (-1, 1) if oriented((m[0] + dx, m[1] + dy), m)]


def pair_out(m, src, is_open: bool) -> tuple:
    """Outgoing neighbour paired with the incoming neighbour ``src`` at ``m``.

    An open primal edge pairs medial edges lying on the same side of it,
    a closed one pairs medial edges on the same side of its dual edge.
    """
    dx, dy = src[0] - m[0], src[1] - m[1]
    horizontal = m[0] % 2 == 1
    flip_x = is_open == horizontal
    if flip_x:
        return (m[0] - dx, m[1] + dy)
    return (m[0] + dx, m[1] - dy)


def turn(src, m, dst) -> int:
    """Quarter-turn (+1 left, -1 right) made at ``m`` when going ``src -> m -> dst``."""
    ax, ay = m[0] - src[0], m[1] - src[1]
    bx, by = dst[0] - m[0], dst[1] - m[1]
    cr = ax * by - ay * bx
    return 1 if cr > 0 else -1


def primal_endpoints(m) -> tuple[tuple, tuple]:
    """Undoubled endpoints of the primal edge through medial vertex ``m``."""
    x, y = m
    if x % 2:
        return ((x - 1) // 2, y // 2), ((x + 1) // 2, y // 2)
    return (x // 2, (y - 1) // 2), (x // 2, (y + 1) // 2)


def dual_endpoints_of(m) -> tuple[tuple, tuple]:
    """Undoubled endpoints of the dual edge through medial vertex ``m``."""
    x, y = m
    if x % 2:
        return (x / 2, (y - 1) / 2), (x / 2, (y + 1) / 2)
    return ((x - 1) / 2, y / 2), ((x + 1) / 2, y / 2)


def _signed_area(poly) -> float:
    s = 0.0
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        s += x0 * y1 - x1 * y0
    return s / 2


def _inside(pt, poly) -> bool:
    """Even-odd rule for a point not lying on the polygon."""
    x, y = pt
    inside = False
    for (x0, y0), (x1, y1) in zip(poly, poly[1:] + poly[:1]):
        if (y0 > y) != (y1 > y):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
            if xc > x:
                inside = not inside
    return inside


@dataclass(frozen=True, eq=False)
class DobrushinDomain:
    """Primal, dual and medial description of a Dobrushin domain.

    Directed medial edges are numbered ``0..K-1``; ``e_a`` and ``e_b`` are
    the last two.  ``tail[e_a]`` and ``head[e_b]`` are -1 (exterior).
    """

    mcoords: tuple
    ab: tuple
    ba: tuple
    tail: np.ndarray
    head: np.ndarray
    e_a: int
    e_b: int
    ext_a: tuple
    ext_b: tuple
    vstate: np.ndarray
    next_open: np.ndarray
    next_closed: np.ndarray
    turn_open: np.ndarray
    turn_closed: np.ndarray
    primal: FiniteGraph
    dual: FiniteGraph
    medial_to_primal: np.ndarray
    medial_to_dual: np.ndarray
    forced_open: np.ndarray
    free_vertices: np.ndarray
    a: tuple
    b: tuple
    a_star: tuple
    b_star: tuple
    start: int = -1
    mindex: dict = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mindex", {c: i for i, c in enumerate(self.mcoords)})
        if self.start < 0:
            object.__setattr__(self, "start", self.e_a)

    @property
    def n_medial_vertices(self) -> int:
        return len(self.mcoords)

    @property
    def n_medial_edges(self) -> int:
        return len(self.tail)

    @property
    def n_free(self) -> int:
        return len(self.free_vertices)

    @property
    def a_medial(self) -> int:
        return int(self.head[self.e_a])

    @property
    def b_medial(self) -> int:
        return int(self.tail[self.e_b])

    def edge_points(self, k: int) -> tuple[tuple, tuple]:
        """Doubled coordinates of the tail and head of directed edge ``k``."""
        t = self.ext_a if self.tail[k] < 0 else self.mcoords[self.tail[k]]
        h = self.ext_b if self.head[k] < 0 else self.mcoords[self.head[k]]
        return t, h

    def edge_midpoint(self, k: int) -> complex:
        """Midpoint of medial edge ``k`` in true (undoubled) coordinates."""
        t, h = self.edge_points(k)
        return complex((t[0] + h[0]) / 4, (t[1] + h[1]) / 4)

    def find_edge(self, t, h) -> int:
        """Index of the directed medial edge from ``t`` to ``h`` (doubled coordinates)."""
        for k in range(self.n_medial_edges):
            if self.edge_points(k) == (tuple(t), tuple(h)):
                return k
        raise KeyError((t, h))

    def vertex_edges(self, v: int) -> list[int]:
        return [k for k in range(self.n_medial_edges) if self.tail[k] == v or self.head[k] == v]

    def interior_vertices(self) -> list[int]:
        """Medial vertices with four incident edges in ``E u {e_a, e_b}``."""
        return [int(v) for v in np.flatnonzero(self.vstate == RANDOM)]

    def with_start(self, k: int, fixed: dict) -> "DobrushinDomain":
        """Copy where tracing starts at edge ``k`` and some vertices are forced.

        ``fixed`` maps medial vertex index to 1 (open) or 0 (closed).
        """
        vstate = self.vstate.copy()
        for v, s in fixed.items():
            vstate[v] = FORCED_OPEN if s else FORCED_CLOSED
        free = np.array([v for v in self.free_vertices if vstate[v] == RANDOM], dtype=np.int64)
        fo = np.array(sorted({int(self.medial_to_primal[v]) for v in range(len(vstate))
                              if vstate[v] == FORCED_OPEN and self.medial_to_primal[v] >= 0}), dtype=np.int64)
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__ if f != "mindex"}
        kw.update(vstate=vstate, free_vertices=free, start=k, forced_open=fo)
        return DobrushinDomain(**kw)

    def medial_graph(self) -> FiniteGraph:
        inner = [k for k in range(self.n_medial_edges) if k not in (self.e_a, self.e_b)]
        e = np.array([(self.tail[k], self.head[k]) for k in inner], dtype=np.int64).reshape(-1, 2)
        arc = sorted({self.mindex[c] for c in self.ab + self.ba})
        return FiniteGraph("medial", self.mcoords, e, boundary=arc, directed=True)

    def vertex_open_mask(self, omega_bits: np.ndarray) -> np.ndarray:
        """Open/closed state per medial vertex from a primal configuration."""
        out = np.zeros(self.n_medial_vertices, dtype=np.uint8)
        for v in range(self.n_medial_vertices):
            s = self.vstate[v]
            if s == FORCED_OPEN:
                out[v] = 1
            elif s == RANDOM:
                out[v] = omega_bits[self.medial_to_primal[v]]
        return out


def _check_path(path, name):
    for i in range(len(path) - 1):
        if not oriented(path[i], path[i + 1]):
            raise InvalidArcs(f"orientation: step {path[i]} -> {path[i + 1]} of {name} "
                              "does not follow the medial orientation")


def build_dobrushin(ab: Sequence, ba: Sequence) -> DobrushinDomain:
    """Build and validate a Dobrushin domain from two medial paths.

    Parameters
    ----------
    ab, ba : sequences of doubled medial coordinates
        ``ab`` runs counterclockwise and ``ba`` clockwise from ``a`` to ``b``.
        An empty ``ba`` selects the cut-edge form: the lattice medial edge
        ``b -> a`` is removed and provides both ``e_b`` (leaving ``b``) and
        ``e_a`` (entering ``a``).

    Raises
    ------
    InvalidArcs
        With the first violated property in the message.
    """
    ab = [tuple(int(x) for x in c) for c in ab]
    ba = [tuple(int(x) for x in c) for c in ba]
    cut = len(ba) == 0
    if len(ab) < 2:
        raise InvalidArcs("endpoints: the ab path needs at least one step")
    for c in ab + ba:
        if not is_medial(c):
            raise InvalidArcs(f"endpoints: {c} is not a medial vertex")
    a_m, b_m = ab[0], ab[-1]
    # property 1: common endpoints
    if not cut and (ba[0] != a_m or ba[-1] != b_m):
        raise InvalidArcs("endpoints: both paths must start at a and end at b")
    if a_m == b_m:
        raise InvalidArcs("endpoints: a and b must be distinct medial vertices")
    if cut and not oriented(b_m, a_m):
        raise InvalidArcs("endpoints: cut form needs a medial edge from b to a")
    # property 2: orientation
    _check_path(ab, "ab")
    _check_path(ba, "ba")
    # property 4: edge avoiding
    steps = list(zip(ab, ab[1:])) + list(zip(ba, ba[1:]))
    if cut:
        steps.append((b_m, a_m))
    if len(set(steps)) != len(steps):
        raise InvalidArcs("edge-avoiding: a medial edge is used twice")
    # property 5: the paths meet only at a and b
    common = (set(ab) & set(ba)) - {a_m, b_m}
    if common:
        raise InvalidArcs(f"intersection: paths meet at {sorted(common)[0]} besides a and b")
    for path, name in ((ab, "ab"), (ba, "ba")):
        if a_m in path[1:] or b_m in path[:-1]:
            raise InvalidArcs(f"intersection: {name} revisits a or b")
    # property 3: ab counterclockwise around the enclosed set
    poly = ab + (ba[::-1][1:-1] if not cut else [])
    if _signed_area(poly) <= 0:
        raise InvalidArcs("orientation: ab must run counterclockwise and ba clockwise")

    on_poly = set(poly)
    poly_steps = set(steps)
    xs = [c[0] for c in poly]
    ys = [c[1] for c in poly]
    verts = []
    for x in range(min(xs), max(xs) + 1):
        for y in range(min(ys), max(ys) + 1):
            c = (x, y)
            if is_medial(c) and (c in on_poly or _inside(c, poly)):
                verts.append(c)
    verts.sort()
    vset = set(verts)
    cut_edge = (b_m, a_m) if cut else None
    medges = []
    for m in verts:
        for n in lattice_out(m):
            if n not in vset or (m, n) == cut_edge:
                continue
            mid = ((m[0] + n[0]) / 2, (m[1] + n[1]) / 2)
            if (m, n) in poly_steps or ((n, m) not in poly_steps and _inside(mid, poly)):
                medges.append((m, n))
    eset = set(medges)

    # marked edges
    if cut:
        ext_a, ext_b = b_m, a_m
    else:
        ins_a = [s for s in lattice_in(a_m) if (s, a_m) not in eset]
        outs_a = [s for s in lattice_out(a_m) if (a_m, s) not in eset]
        ins_b = [s for s in lattice_in(b_m) if (s, b_m) not in eset]
        outs_b = [s for s in lattice_out(b_m) if (b_m, s) not in eset]
        if len(ins_a) + len(outs_a) != 1 or len(ins_a) != 1:
            raise InvalidArcs("marked edges: a must have three incident medial edges, the fourth entering it")
        if len(ins_b) + len(outs_b) != 1 or len(outs_b) != 1:
            raise InvalidArcs("marked edges: b must have three incident medial edges, the fourth leaving it")
        ext_a, ext_b = ins_a[0], outs_b[0]

    idx = {c: i for i, c in enumerate(verts)}
    tail = [idx[m] for m, _ in medges] + [-1, idx[b_m]]
    head = [idx[n] for _, n in medges] + [idx[a_m], -1]
    e_a, e_b = len(medges), len(medges) + 1
    K = len(tail)

    deg = np.zeros(len(verts), dtype=np.int64)
    for k in range(K):
        if tail[k] >= 0:
            deg[tail[k]] += 1
        if head[k] >= 0:
            deg[head[k]] += 1
    ab_set, ba_set = set(ab), set(ba)
    vstate = np.zeros(len(verts), dtype=np.int64)
    for i, c in enumerate(verts):
        if deg[i] == 4:
            continue
        if c in ab_set and c not in ba_set:
            vstate[i] = FORCED_CLOSED
        elif c in ba_set and c not in ab_set:
            vstate[i] = FORCED_OPEN
        else:
            raise InvalidArcs(f"boundary: medial vertex {c} has {deg[i]} edges but no arc")

    # pairing tables
    out_of = {}
    for k in range(K):
        if tail[k] >= 0:
            dst = ext_b if head[k] < 0 else verts[head[k]]
            out_of[(tail[k], dst)] = k
    nxt = np.full((2, K), -1, dtype=np.int64)
    trn = np.zeros((2, K), dtype=np.int64)
    for k in range(K):
        h = head[k]
        if h < 0:
            continue
        src = ext_a if tail[k] < 0 else verts[tail[k]]
        m = verts[h]
        for s in (0, 1):
            if (vstate[h] == FORCED_OPEN and s == 0) or (vstate[h] == FORCED_CLOSED and s == 1):
                continue
            dst = pair_out(m, src, bool(s))
            kk = out_of.get((h, dst))
            if kk is None:
                raise InvalidArcs(f"pairing: the loop through {m} leaves the domain")
            nxt[s, k] = kk
            trn[s, k] = turn(src, m, dst)

    # primal and dual graphs
    p_edges, p_of, d_edges, d_of = [], np.full(len(verts), -1, dtype=np.int64), [], np.full(len(verts), -1, dtype=np.int64)
    for i, c in enumerate(verts):
        if vstate[i] != FORCED_CLOSED:
            p_of[i] = len(p_edges)
            p_edges.append(primal_endpoints(c))
        if vstate[i] != FORCED_OPEN:
            d_of[i] = len(d_edges)
            d_edges.append(dual_endpoints_of(c))
    primal = _graph_from_pairs(p_edges)
    dual = _graph_from_pairs(d_edges, kind="dual")
    forced = np.array([p_of[i] for i in range(len(verts)) if vstate[i] == FORCED_OPEN], dtype=np.int64)
    free = np.array([i for i in range(len(verts)) if vstate[i] == RANDOM], dtype=np.int64)

    pa, da = face_centers(ext_a, a_m)
    pb, db = face_centers(b_m, ext_b)
    half = lambda c: tuple(x // 2 for x in c)  # noqa: E731
    halff = lambda c: tuple(x / 2 for x in c)  # noqa: E731
    return DobrushinDomain(
        mcoords=tuple(verts), ab=tuple(ab), ba=tuple(ba),
        tail=np.array(tail, dtype=np.int64), head=np.array(head, dtype=np.int64),
        e_a=e_a, e_b=e_b, ext_a=ext_a, ext_b=ext_b, vstate=vstate,
        next_open=nxt[1], next_closed=nxt[0], turn_open=trn[1], turn_closed=trn[0],
        primal=primal, dual=dual, medial_to_primal=p_of, medial_to_dual=d_of,
        forced_open=forced, free_vertices=free,
        a=half(pa), b=half(pb), a_star=halff(da), b_star=halff(db))


def _graph_from_pairs(pairs, kind="custom") -> FiniteGraph:
    verts = sorted({c for pr in pairs for c in pr})
    idx = {c: i for i, c in enumerate(verts)}
    e = np.array([(idx[a], idx[b]) for a, b in pairs], dtype=np.int64).reshape(-1, 2)
    return FiniteGraph(kind, verts, e)


def _outer_loop(ab_start, first, in_region, b_m, limit=100000):
    path = [ab_start, first]
    while path[-1] != b_m:
        if len(path) > limit:
            raise InvalidArcs("pairing: outer boundary walk did not reach b")
        m = path[-1]
        path.append(pair_out(m, path[-2], in_region(m)))
    return path


def region_domain(vertices: Sequence, wired: Sequence) -> DobrushinDomain:
    """Dobrushin domain on a set of primal vertices with a wired boundary path.

    Parameters
    ----------
    vertices : iterable of (x, y)
        Primal vertex set; its induced edges form the domain.
    wired : sequence of (x, y)
        Boundary vertices ``v0, ..., vk`` joined by lattice edges, listed in
        clockwise order along the boundary.  A single vertex is allowed.
    """
    P = {tuple(v) for v in vertices}
    W = [tuple(v) for v in wired]
    if not W or any(v not in P for v in W):
        raise InvalidArcs("endpoints: wired path must lie in the vertex set")
    for u, v in zip(W, W[1:]):
        if abs(u[0] - v[0]) + abs(u[1] - v[1]) != 1:
            raise InvalidArcs("endpoints: consecutive wired vertices must be adjacent")

    def mid(v, d):
        return (2 * v[0] + d[0], 2 * v[1] + d[1])

    def in_p(v, d):
        return (v[0] + d[0], v[1] + d[1]) in P

    v0 = W[0]
    ds = [d for d in _DIRS]
    start = None
    for i, d in enumerate(ds):
        if in_p(v0, d) and not in_p(v0, ds[i - 1]):
            start = i
            break
    if start is None:
        raise InvalidArcs("endpoints: the first wired vertex has no exterior edge")
    ba = [mid(v0, ds[start])]
    cur, i = v0, start
    for nxt_v in W[1:]:
        target = (nxt_v[0] - cur[0], nxt_v[1] - cur[1])
        while ds[i % 4] != target:
            i += 1
            if not in_p(cur, ds[i % 4]):
                raise InvalidArcs("endpoints: wired path is not clockwise along the boundary")
            ba.append(mid(cur, ds[i % 4]))
        back = (-target[0], -target[1])
        i = ds.index(back)
        cur = nxt_v
    for _ in range(4):
        if not in_p(cur, ds[(i + 1) % 4]):
            break
        i += 1
        ba.append(mid(cur, ds[i % 4]))
    else:
        raise InvalidArcs("endpoints: last wired vertex has no exterior edge")
    b_m = ba[-1]
    a_m = ba[0]
    if len(ba) < 2:
        raise InvalidArcs("endpoints: a and b coincide")
    outs = [n for n in lattice_out(a_m) if n != ba[1]]

    def region(m):
        u, v = primal_endpoints(m)
        return u in P and v in P

    ab = _outer_loop(a_m, outs[0], region, b_m)
    return build_dobrushin(ab, ba)


def rectangle_domain(x0: int, x1: int, y0: int, y1: int, wired: Sequence) -> DobrushinDomain:
    """Dobrushin domain on ``[x0, x1] x [y0, y1]`` with a clockwise wired path."""
    P = [(x, y) for x in range(x0, x1 + 1) for y in range(y0, y1 + 1)]
    return region_domain(P, wired)


def r_domain(n: int) -> DobrushinDomain:
    """The domain ``R_n = [0, n] x [-n, n]`` wired at the single vertex ``(0, 0)``."""
    return rectangle_domain(0, n, -n, n, [(0, 0)])


def square_domain() -> DobrushinDomain:
    """Unit square with ``a = (0, 0)`` and ``b = (1, 1)`` at opposite corners."""
    return rectangle_domain(0, 1, 0, 1, [(0, 0), (0, 1), (1, 1)])
