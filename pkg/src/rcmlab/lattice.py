"""Finite graphs of the square lattice and their boundary bookkeeping.

Vertices carry coordinates and a dense index assigned in construction
order.  Edges are stored as an ``(E, 2)`` integer array whose rows are
sorted by dense index (for medial graphs the rows are ``(tail, head)`` of
the oriented medial edge instead).

Coordinates are integer tuples for primal graphs, half-integer float
tuples for duals and doubled integer tuples for medial graphs, so that a
medial vertex sitting at the midpoint ``(x + 1/2, y)`` is stored as
``(2x + 1, 2y)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GeometryOutOfRange, NoDual, PartitionMismatch

KINDS = ("box", "dual", "slit_box", "cover_box", "medial", "custom")


@dataclass(frozen=True, eq=False)
class FiniteGraph:
    """Immutable finite graph with coordinates and an identified boundary.

    Parameters
    ----------
    kind : str
        One of ``box, dual, slit_box, cover_box, medial, custom``.
    coords : tuple of tuple
        Vertex coordinates, position ``i`` is the vertex with dense index ``i``.
    edges : ndarray of shape (E, 2)
        Endpoint indices.  Undirected graphs keep ``u < v``.
    boundary : tuple of int, optional
        Boundary vertices.  Defaults to the vertices of degree below four.
    directed : bool
        True for oriented medial graphs.
    """

    kind: str
    coords: tuple
    edges: np.ndarray
    boundary: tuple = None
    directed: bool = False
    index: dict = field(init=False, repr=False)
    edge_index: dict = field(init=False, repr=False)
    incidence: tuple = field(init=False, repr=False)
    degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown graph kind {self.kind!r}")
        coords = tuple(tuple(c) for c in self.coords)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if not self.directed and len(edges):
            edges = np.sort(edges, axis=1)
        edges.setflags(write=False)
        index = {c: i for i, c in enumerate(coords)}
        if len(index) != len(coords):
            raise ValueError("duplicate vertex coordinates")
        inc = [[] for _ in coords]
        edge_index = {}
        for k, (u, v) in enumerate(edges):
            u, v = int(u), int(v)
            if u == v:
                raise ValueError("self-loops are not allowed")
            key = (min(u, v), max(u, v))
            if key in edge_index:
                raise ValueError(f"duplicate edge {key}")
            edge_index[key] = k
            inc[u].append(k)
            inc[v].append(k)
        degree = np.array([len(x) for x in inc], dtype=np.int64)
        degree.setflags(write=False)
        boundary = self.boundary
        if boundary is None:
            boundary = tuple(int(i) for i in np.flatnonzero(degree < 4))
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "boundary", tuple(sorted(int(b) for b in boundary)))
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "edge_index", edge_index)
        object.__setattr__(self, "incidence", tuple(tuple(x) for x in inc))
        object.__setattr__(self, "degree", degree)

    @property
    def n_vertices(self) -> int:
        return len(self.coords)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def vertex(self, coord) -> int:
        """Dense index of the vertex with the given coordinates."""
        try:
            return self.index[tuple(coord)]
        except KeyError:
            raise GeometryOutOfRange(f"vertex {tuple(coord)} not in graph") from None

    def has_vertex(self, coord) -> bool:
        return tuple(coord) in self.index

    def edge(self, x, y) -> int:
        """Dense index of the edge between two vertices given by coordinates."""
        u, v = self.vertex(x), self.vertex(y)
        try:
            return self.edge_index[(min(u, v), max(u, v))]
        except KeyError:
            raise GeometryOutOfRange(f"no edge between {x} and {y}") from None

    def find_edge(self, u: int, v: int) -> int:
        """Edge index between dense vertex indices, or -1."""
        return self.edge_index.get((min(u, v), max(u, v)), -1)

    def neighbors(self, v: int) -> list[int]:
        out = []
        for k in self.incidence[v]:
            a, b = self.edges[k]
            out.append(int(b) if a == v else int(a))
        return out

    def other(self, k: int, v: int) -> int:
        a, b = self.edges[k]
        return int(b) if a == v else int(a)

    def boundary_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[list(self.boundary)] = True
        return m

    def csr(self):
        """Adjacency in CSR form: ``(ptr, nbr, eid)``."""
        ptr = np.zeros(self.n_vertices + 1, dtype=np.int64)
        ptr[1:] = np.cumsum(self.degree)
        nbr = np.empty(2 * self.n_edges, dtype=np.int64)
        eid = np.empty(2 * self.n_edges, dtype=np.int64)
        for v in range(self.n_vertices):
            for j, k in enumerate(self.incidence[v]):
                nbr[ptr[v] + j] = self.other(k, v)
                eid[ptr[v] + j] = k
        return ptr, nbr, eid

    def __repr__(self):
        return (f"FiniteGraph(kind={self.kind!r}, |V|={self.n_vertices}, "
                f"|E|={self.n_edges}, |boundary|={len(self.boundary)})")


@dataclass(frozen=True, eq=False)
class BoundaryPartition:
    """Partition ``xi`` of the boundary vertices of a graph.

    ``blocks`` is a tuple of sorted tuples of dense vertex indices covering
    the boundary.  Boundary vertices left out of the given blocks are added
    as singletons.
    """

    graph: FiniteGraph
    blocks: tuple
    label: str = "custom"

    def __post_init__(self):
        bset = set(self.graph.boundary)
        seen = set()
        blocks = []
        for blk in self.blocks:
            blk = tuple(sorted(int(v) for v in blk))
            if not blk:
                continue
            for v in blk:
                if v not in bset:
                    raise PartitionMismatch(f"vertex {self.graph.coords[v]} is not a boundary vertex")
                if v in seen:
                    raise PartitionMismatch(f"vertex {self.graph.coords[v]} appears in two blocks")
                seen.add(v)
            blocks.append(blk)
        blocks.extend((v,) for v in sorted(bset - seen))
        blocks.sort()
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def free(cls, g: FiniteGraph) -> "BoundaryPartition":
        return cls(g, (), "free")

    @classmethod
    def wired(cls, g: FiniteGraph) -> "BoundaryPartition":
        return cls(g, (tuple(g.boundary),), "wired")

    @classmethod
    def from_coords(cls, g: FiniteGraph, blocks: Iterable[Iterable], label: str = "custom"):
        return cls(g, tuple(tuple(g.vertex(c) for c in blk) for blk in blocks), label)

    @classmethod
    def mixed(cls, g: FiniteGraph) -> "BoundaryPartition":
        """Top and bottom sides of a rectangle wired (two blocks), the rest free."""
        ys = [c[1] for c in g.coords]
        lo, hi = min(ys), max(ys)
        bottom = [v for v in g.boundary if g.coords[v][1] == lo]
        top = [v for v in g.boundary if g.coords[v][1] == hi]
        return cls(g, (tuple(bottom), tuple(top)), "mixed")

    @classmethod
    def dobrushin(cls, g: FiniteGraph, arc: Sequence) -> "BoundaryPartition":
        """One wired block given by vertex coordinates, the rest free."""
        return cls(g, (tuple(g.vertex(c) for c in arc),), "dobrushin")

    @property
    def is_free(self) -> bool:
        return all(len(b) == 1 for b in self.blocks)

    @property
    def is_wired(self) -> bool:
        return len(self.blocks) == 1

    def nontrivial_blocks(self) -> list[tuple]:
        return [b for b in self.blocks if len(b) > 1]

    def block_of(self) -> np.ndarray:
        """Ghost label per vertex: block id for non-singleton blocks, else -1."""
        lab = np.full(self.graph.n_vertices, -1, dtype=np.int64)
        for i, b in enumerate(self.nontrivial_blocks()):
            lab[list(b)] = i
        return lab

    @property
    def n_ghosts(self) -> int:
        return len(self.nontrivial_blocks())

    def is_coarser_than(self, other: "BoundaryPartition") -> bool:
        """True if every block of ``other`` lies inside a block of ``self``."""
        owner = {}
        for i, b in enumerate(self.blocks):
            for v in b:
                owner[v] = i
        return all(len({owner[v] for v in b}) == 1 for b in other.blocks)


# ---------------------------------------------------------------------------
# builders


def build_rectangle(x0: int, x1: int, y0: int, y1: int, kind: str = "box") -> FiniteGraph:
    """Nearest-neighbour graph on ``[x0, x1] x [y0, y1]``.

    Vertices are numbered row by row (``y`` outer, ``x`` inner).
    """
    if x1 < x0 or y1 < y0:
        raise ValueError("empty rectangle")
    coords = [(x, y) for y in range(y0, y1 + 1) for x in range(x0, x1 + 1)]
    idx = {c: i for i, c in enumerate(coords)}
    edges = []
    for (x, y) in coords:
        if x < x1:
            edges.append((idx[(x, y)], idx[(x + 1, y)]))
        if y < y1:
            edges.append((idx[(x, y)], idx[(x, y + 1)]))
    return FiniteGraph(kind, coords, np.array(edges, dtype=np.int64).reshape(-1, 2))


def build_box(n: int) -> FiniteGraph:
    """The box ``Lambda_n = [-n, n]^2``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return build_rectangle(-n, n, -n, n)


def build_graph(coords: Sequence, edges: Sequence, kind: str = "custom") -> FiniteGraph:
    """Graph from explicit coordinates and coordinate pairs for edges."""
    coords = [tuple(c) for c in coords]
    idx = {c: i for i, c in enumerate(coords)}
    e = [(idx[tuple(a)], idx[tuple(b)]) for a, b in edges]
    return FiniteGraph(kind, coords, np.array(e, dtype=np.int64).reshape(-1, 2))


def build_k2() -> FiniteGraph:
    """Single edge between ``(0, 0)`` and ``(1, 0)``."""
    return build_graph([(0, 0), (1, 0)], [((0, 0), (1, 0))])


def subgraph(g: FiniteGraph, edge_ids: Iterable[int], kind: str = "custom") -> tuple[FiniteGraph, np.ndarray]:
    """Graph spanned by a set of edges; returns it with the edge map into ``g``."""
    edge_ids = sorted(int(k) for k in edge_ids)
    verts = sorted({int(v) for k in edge_ids for v in g.edges[k]})
    loc = {v: i for i, v in enumerate(verts)}
    e = [(loc[int(g.edges[k][0])], loc[int(g.edges[k][1])]) for k in edge_ids]
    sub = FiniteGraph(kind, [g.coords[v] for v in verts], np.array(e, dtype=np.int64).reshape(-1, 2))
    return sub, np.array(edge_ids, dtype=np.int64)


def build_slit_box(n: int) -> tuple[FiniteGraph, BoundaryPartition]:
    """The slit box ``C_n`` with its wired arc ``{(0, k): 0 <= k <= n}``."""
    if n < 1:
        raise ValueError("n must be positive")
    box = build_box(n)
    removed = {box.edge((0, k), (0, k + 1)) for k in range(n)}
    keep = [k for k in range(box.n_edges) if k not in removed]
    g = FiniteGraph("slit_box", box.coords, box.edges[keep])
    xi = BoundaryPartition.dobrushin(g, [(0, k) for k in range(n + 1)])
    return g, xi


def build_cover_box(n: int, h: int) -> FiniteGraph:
    """Truncated universal cover ``U_{n,h}`` of the plane minus the face at ``(1/2, -1/2)``.

    Vertices are ``(x1, x2, x3)`` with ``|x1|, |x2| <= n`` and ``|x3| <= h``.
    Horizontal edges between columns 0 and 1 move up one sheet when ``x2 < 0``.
    """
    if n < 1 or h < 1:
        raise ValueError("n and h must be positive")
    coords = [(x1, x2, x3) for x3 in range(-h, h + 1) for x2 in range(-n, n + 1) for x1 in range(-n, n + 1)]
    idx = {c: i for i, c in enumerate(coords)}
    edges = []
    for (x1, x2, x3) in coords:
        u = idx[(x1, x2, x3)]
        if x2 < n:
            edges.append((u, idx[(x1, x2 + 1, x3)]))
        if x1 < n:
            if x1 != 0 or x2 >= 0:
                edges.append((u, idx[(x1 + 1, x2, x3)]))
            elif x3 < h:
                edges.append((u, idx[(1, x2, x3 + 1)]))
    return FiniteGraph("cover_box", coords, np.array(edges, dtype=np.int64))


# ---------------------------------------------------------------------------
# duality


def _is_planar_kind(g: FiniteGraph) -> bool:
    return g.kind != "medial" and all(len(c) == 2 for c in g.coords)


def dual_endpoints(a, b) -> tuple[tuple, tuple]:
    """The two faces on either side of the unit segment ``a b`` in the plane."""
    (ax, ay), (bx, by) = a, b
    mx, my = (ax + bx) / 2, (ay + by) / 2
    if ay == by:
        return (float(mx), float(my - 0.5)), (float(mx), float(my + 0.5))
    return (float(mx - 0.5), float(my)), (float(mx + 0.5), float(my))


def _cover_faces(g: FiniteGraph, k: int) -> tuple[tuple, tuple]:
    a, b = (g.coords[int(v)] for v in g.edges[k])
    if (a[0], a[1]) > (b[0], b[1]):
        a, b = b, a
    x1, x2, s = a
    branch = (0.5, -0.5, 0)

    def key(c1, c2, c3):
        if (c1, c2) == (0, -1):
            return branch
        return (c1 + 0.5, c2 + 0.5, c3)

    if b[1] == x2:  # horizontal
        return key(x1, x2 - 1, s), key(x1, x2, s)
    # vertical edge: face on the left has lower-left corner at the left neighbour
    left_sheet = s - 1 if (x1 - 1 == 0 and x2 < 0) else s
    return key(x1 - 1, x2, left_sheet), key(x1, x2, s)


def build_dual(g: FiniteGraph) -> tuple[FiniteGraph, np.ndarray]:
    """Planar dual graph with the bijection ``primal edge -> dual edge``.

    Dual vertices are the faces touched by at least one dual edge.  On the
    cover box the faces adjacent to the branch point merge into one dual
    vertex placed at ``(1/2, -1/2, 0)``.
    """
    if g.kind == "medial":
        raise NoDual("medial graphs have no dual here")
    if g.kind == "cover_box":
        pairs = [_cover_faces(g, k) for k in range(g.n_edges)]
    elif _is_planar_kind(g):
        pairs = [dual_endpoints(*(g.coords[int(v)] for v in g.edges[k])) for k in range(g.n_edges)]
    else:
        raise NoDual(f"graph of kind {g.kind!r} has no planar embedding")
    verts = sorted({c for pr in pairs for c in pr})
    idx = {c: i for i, c in enumerate(verts)}
    e = np.array([(idx[a], idx[b]) for a, b in pairs], dtype=np.int64).reshape(-1, 2)
    d = FiniteGraph("dual", verts, e)
    return d, np.arange(g.n_edges, dtype=np.int64)


# ---------------------------------------------------------------------------
# medial graph


def _direction(g: FiniteGraph, v: int, k: int) -> tuple[int, int]:
    a = g.coords[v]
    b = g.coords[g.other(k, v)]
    return (int(round(b[0] - a[0])), int(round(b[1] - a[1])))


def medial_coord(g: FiniteGraph, k: int) -> tuple:
    """Doubled coordinates of the midpoint of edge ``k``."""
    a, b = (g.coords[int(v)] for v in g.edges[k])
    c = (int(round(a[0] + b[0])), int(round(a[1] + b[1])))
    if len(a) == 3:
        c = c + (min(a[2], b[2]),)
    return c


def build_medial(g) -> FiniteGraph:
    """Oriented medial graph.

    Medial vertex ``i`` is the midpoint of primal edge ``i``.  Two medial
    vertices are joined when their primal edges share an endpoint ``v`` and
    are perpendicular there; the medial edge turns counterclockwise around
    ``v``.  A :class:`~rcmlab.dobrushin.DobrushinDomain` returns its own
    medial graph.
    """
    if hasattr(g, "medial_graph"):
        return g.medial_graph()
    coords = [medial_coord(g, k) for k in range(g.n_edges)]
    medges = []
    for v in range(g.n_vertices):
        inc = g.incidence[v]
        dirs = {_direction(g, v, k): k for k in inc}
        for d, k in dirs.items():
            rot = (-d[1], d[0])
            if rot in dirs:
                medges.append((k, dirs[rot]))
    m = FiniteGraph("medial", coords, np.array(medges, dtype=np.int64).reshape(-1, 2), directed=True)
    return m


def medial_in_out(m: FiniteGraph) -> tuple[list, list]:
    """Lists of incoming and outgoing medial edge ids per medial vertex."""
    ins = [[] for _ in range(m.n_vertices)]
    outs = [[] for _ in range(m.n_vertices)]
    for k, (t, h) in enumerate(m.edges):
        outs[int(t)].append(k)
        ins[int(h)].append(k)
    return ins, outs


# ---------------------------------------------------------------------------
# validation


def validate_graph(g: FiniteGraph) -> None:
    """Check the structural invariants of ``g``; raises ``AssertionError``."""
    assert set(g.index.values()) == set(range(g.n_vertices))
    assert len(g.edge_index) == g.n_edges
    for k, (u, v) in enumerate(g.edges):
        assert k in g.incidence[int(u)] and k in g.incidence[int(v)]
        if g.kind in ("box", "slit_box", "custom", "dual"):
            a, b = g.coords[int(u)], g.coords[int(v)]
            assert abs(sum(abs(x - y) for x, y in zip(a, b)) - 1) < 1e-9, (a, b)
    for v in range(g.n_vertices):
        for k in g.incidence[v]:
            assert v in (int(g.edges[k][0]), int(g.edges[k][1]))
    if g.kind != "medial":
        assert set(g.boundary) == {v for v in range(g.n_vertices) if g.degree[v] < 4}


# ---------------------------------------------------------------------------
# serialization


def _fmt(x) -> str:
    if isinstance(x, float) and not x.is_integer():
        return repr(x)
    if isinstance(x, float):
        return str(int(x)) + ".0"
    return str(int(x))


def _parse_num(s: str):
    return float(s) if ("." in s or "e" in s) else int(s)


def write_graph(g: FiniteGraph, xi: BoundaryPartition | None = None) -> str:
    """Serialize to the line-oriented text format."""
    lines = [f"graph {g.kind} {g.n_vertices} {g.n_edges}"]
    for i, c in enumerate(g.coords):
        lines.append("v " + str(i) + " " + " ".join(_fmt(x) for x in c))
    for k, (u, v) in enumerate(g.edges):
        lines.append(f"e {k} {int(u)} {int(v)}")
    lines.append("boundary " + " ".join(str(b) for b in g.boundary))
    if xi is not None:
        lines.append("partition " + ";".join(",".join(str(v) for v in b) for b in xi.blocks))
    return "\n".join(lines) + "\n"


def read_graph(text: str) -> tuple[FiniteGraph, BoundaryPartition | None]:
    """Parse the text format written by :func:`write_graph`."""
    kind, coords, edges, boundary, blocks = None, {}, {}, None, None
    for raw in text.splitlines():
        parts = raw.split()
        if not parts:
            continue
        tag = parts[0]
        if tag == "graph":
            kind = parts[1]
        elif tag == "v":
            coords[int(parts[1])] = tuple(_parse_num(s) for s in parts[2:])
        elif tag == "e":
            edges[int(parts[1])] = (int(parts[2]), int(parts[3]))
        elif tag == "boundary":
            boundary = tuple(int(s) for s in parts[1:])
        elif tag == "partition":
            body = raw.split(None, 1)[1] if len(parts) > 1 else ""
            blocks = [tuple(int(s) for s in b.split(",") if s) for b in body.split(";")]
        else:
            raise ValueError(f"unknown line {raw!r}")
    if kind is None:
        raise ValueError("missing graph header")
    g = FiniteGraph(kind, [coords[i] for i in range(len(coords))],
                    np.array([edges[k] for k in range(len(edges))], dtype=np.int64).reshape(-1, 2),
                    boundary=boundary, directed=(kind == "medial"))
    xi = BoundaryPartition(g, tuple(blocks)) if blocks is not None else None
    return g, xi


def parse_graph_spec(spec: str) -> FiniteGraph:
    """Graph from a short string: ``box:n``, ``rect:x0,x1,y0,y1``, ``slit:n``, ``cover:n,h``, ``k2``."""
    name, _, args = spec.partition(":")
    nums = [int(s) for s in args.split(",") if s]
    if name == "box":
        return build_box(*nums)
    if name == "rect":
        return build_rectangle(*nums)
    if name == "slit":
        return build_slit_box(*nums)[0]
    if name == "cover":
        return build_cover_box(*nums)
    if name == "k2":
        return build_k2()
    raise ValueError(f"unknown graph spec {spec!r}")
