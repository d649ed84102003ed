"""Bond events and observables with stable string identifiers.

Every event compiles to a connectivity question on an auxiliary graph
(see :mod:`rcmlab._kernels`), which lets the exact enumerator and the
Monte Carlo samplers share one evaluation kernel.

Identifiers
-----------
``edge_open:5`` or ``edge_open:0,0:1,0``
    the edge (by index or endpoints) is open.
``conn:x1,x2:y1,y2``
    ``x`` and ``y`` lie in the same cluster of omega^xi (wiring counts).
``onearm:n``
    the origin is joined to the boundary of ``Lambda_n`` in omega^xi.
``Ch:x0,y0:x1,y1`` / ``Cv:...``
    open path inside the rectangle between its left/right (bottom/top) sides.
``Ch*:s0,t0:s1,t1`` / ``Cv*:...``
    the same for dual-open paths in a dual rectangle (half-integer corners).
``annulus:z1,z2:n``
    open circuit in ``z + (Lambda_2n minus Lambda_n)`` surrounding ``z``.
``clustersize:x1,x2[:n]``
    number of vertices of ``Lambda_n`` (all vertices if omitted) joined to ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._kernels import eval_observables
from .errors import GeometryOutOfRange
from .lattice import BoundaryPartition, FiniteGraph, build_dual
from .model import BondConfiguration

INCREASING, DECREASING, UNKNOWN = "increasing", "decreasing", "unknown"


def _pt(s: str) -> tuple:
    vals = []
    for x in s.split(","):
        v = float(x)
        vals.append(int(v) if v.is_integer() and "." not in x else v)
    return tuple(vals)


def _fmt_pt(c) -> str:
    return ",".join(str(x) for x in c)


@dataclass(frozen=True)
class EventSpec:
    """Parsed event or observable; ``kind`` names the family."""

    kind: str
    args: tuple

    @property
    def id(self) -> str:
        if self.kind == "edge_open":
            if len(self.args) == 1:
                return f"edge_open:{self.args[0]}"
            return "edge_open:" + ":".join(_fmt_pt(c) for c in self.args)
        if self.kind in ("onearm",):
            return f"onearm:{self.args[0]}"
        if self.kind == "annulus":
            return f"annulus:{_fmt_pt(self.args[0])}:{self.args[1]}"
        if self.kind == "clustersize":
            s = f"clustersize:{_fmt_pt(self.args[0])}"
            return s + (f":{self.args[1]}" if self.args[1] is not None else "")
        return f"{self.kind}:" + ":".join(_fmt_pt(c) for c in self.args)

    @property
    def monotonicity(self) -> str:
        if self.kind in ("Ch*", "Cv*"):
            return DECREASING
        return INCREASING

    @property
    def is_boolean(self) -> bool:
        return self.kind != "clustersize"

    def __call__(self, omega: BondConfiguration, xi: BoundaryPartition | None = None) -> bool:
        return detect_event(omega, self, xi)

    def __str__(self):
        return self.id


def parse_event(s: str | EventSpec) -> EventSpec:
    """Parse an event identifier."""
    if isinstance(s, EventSpec):
        return s
    kind, _, rest = s.partition(":")
    parts = rest.split(":") if rest else []
    try:
        if kind == "edge_open":
            if len(parts) == 1:
                return EventSpec(kind, (int(parts[0]),))
            return EventSpec(kind, (_pt(parts[0]), _pt(parts[1])))
        if kind in ("conn", "Ch", "Cv", "Ch*", "Cv*"):
            return EventSpec(kind, (_pt(parts[0]), _pt(parts[1])))
        if kind == "onearm":
            return EventSpec(kind, (int(parts[0]),))
        if kind == "annulus":
            return EventSpec(kind, (_pt(parts[0]), int(parts[1])))
        if kind == "clustersize":
            return EventSpec(kind, (_pt(parts[0]), int(parts[1]) if len(parts) > 1 else None))
    except (IndexError, ValueError):
        pass
    raise ValueError(f"cannot parse event id {s!r}")


# ---------------------------------------------------------------------------
# compilation


@dataclass
class _Aux:
    n_nodes: int
    key: object
    edges: list  # (a, b, eidx, mode)
    src: list
    tgt: list
    kind: int = 0
    negate: int = 0


def _wired_aux(g: FiniteGraph, xi: BoundaryPartition | None) -> tuple[int, list]:
    block = xi.block_of() if xi is not None else np.full(g.n_vertices, -1)
    ng = xi.n_ghosts if xi is not None else 0
    edges = [(int(u), int(v), k, 0) for k, (u, v) in enumerate(g.edges)]
    nv = g.n_vertices
    edges += [(v, nv + int(b), 0, 2) for v, b in enumerate(block) if b >= 0]
    return nv + ng, edges


def _rect_vertices(g, lo, hi):
    (x0, y0), (x1, y1) = lo, hi
    if x1 < x0 or y1 < y0:
        raise GeometryOutOfRange("rectangle corners out of order")
    for c in ((x0, y0), (x1, y1), (x0, y1), (x1, y0)):
        if not g.has_vertex(c):
            raise GeometryOutOfRange(f"rectangle corner {c} outside the graph")
    return [v for v, c in enumerate(g.coords) if x0 <= c[0] <= x1 and y0 <= c[1] <= y1]


def _crossing_aux(g, spec, dual_cache):
    kind = spec.kind
    lo, hi = spec.args
    if kind in ("Ch", "Cv"):
        h = g
        mode = 0
        inside = set(_rect_vertices(g, lo, hi))
    else:
        if "dual" not in dual_cache:
            dual_cache["dual"] = build_dual(g)
        h, _ = dual_cache["dual"]
        mode = 1
        (x0, y0), (x1, y1) = lo, hi
        inside = {v for v, c in enumerate(h.coords) if x0 <= c[0] <= x1 and y0 <= c[1] <= y1}
    (x0, y0), (x1, y1) = lo, hi
    edges = [(int(u), int(v), k, mode) for k, (u, v) in enumerate(h.edges) if u in inside and v in inside]
    axis = 0 if kind in ("Ch", "Ch*") else 1
    a, b = (x0, x1) if axis == 0 else (y0, y1)
    src = [v for v in inside if h.coords[v][axis] == a]
    tgt = [v for v in inside if h.coords[v][axis] == b]
    if not src or not tgt:
        raise GeometryOutOfRange(f"{spec.id}: empty side")
    return _Aux(h.n_vertices, ("rect", spec.id), edges, src, tgt)


def _annulus_aux(g, spec):
    z, n = spec.args
    if n < 1:
        raise GeometryOutOfRange("annulus needs n >= 1")
    zx, zy = z
    for c in ((zx - 2 * n, zy - 2 * n), (zx + 2 * n, zy + 2 * n)):
        if not g.has_vertex(c):
            raise GeometryOutOfRange(f"annulus corner {c} outside the graph")
    R = 2 * n
    faces = [(i, j) for i in range(-R - 1, R + 1) for j in range(-R - 1, R + 1)]  # lower-left offsets
    fidx = {f: t for t, f in enumerate(faces)}

    def in_ann(x, y):
        d = max(abs(x - zx), abs(y - zy))
        return n < d <= R

    edges = []
    for (i, j) in faces:
        # right neighbour shares the vertical primal edge at x = zx + i + 1
        for (di, dj), (p, q) in (((1, 0), ((zx + i + 1, zy + j), (zx + i + 1, zy + j + 1))),
                                 ((0, 1), ((zx + i, zy + j + 1), (zx + i + 1, zy + j + 1)))):
            nb = (i + di, j + dj)
            if nb not in fidx:
                continue
            if in_ann(*p) and in_ann(*q) and g.has_vertex(p) and g.has_vertex(q):
                k = g.find_edge(g.vertex(p), g.vertex(q))
                if k >= 0:
                    edges.append((fidx[(i, j)], fidx[nb], k, 1))
                    continue
            edges.append((fidx[(i, j)], fidx[nb], 0, 2))
    src = [fidx[(0, 0)]]
    tgt = [fidx[f] for f in faces if f[0] in (-R - 1, R) or f[1] in (-R - 1, R)]
    return _Aux(len(faces), ("ann", spec.id), edges, src, tgt, kind=0, negate=1)


def _compile_one(g, xi, spec, cache) -> _Aux:
    k = spec.kind
    if k == "edge_open":
        if len(spec.args) == 1:
            e = spec.args[0]
            if not 0 <= e < g.n_edges:
                raise GeometryOutOfRange(f"edge {e} outside the graph")
        else:
            e = g.edge(*spec.args)
        return _Aux(2, ("edge", e), [(0, 1, e, 0)], [0], [1])
    if k in ("Ch", "Cv", "Ch*", "Cv*"):
        return _crossing_aux(g, spec, cache)
    if k == "annulus":
        return _annulus_aux(g, spec)
    if "wired" not in cache:
        cache["wired"] = _wired_aux(g, xi)
    nn, edges = cache["wired"]
    if k == "conn":
        x, y = spec.args
        return _Aux(nn, "wired", edges, [g.vertex(x)], [g.vertex(y)])
    if k == "onearm":
        n = spec.args[0]
        d = len(g.coords[0])
        origin = g.vertex((0,) * d)
        tgt = [v for v, c in enumerate(g.coords) if max(abs(c[0]), abs(c[1])) == n]
        if not tgt or not g.has_vertex((n, n) + (0,) * (d - 2)):
            raise GeometryOutOfRange(f"boundary of Lambda_{n} outside the graph")
        return _Aux(nn, "wired", edges, [origin], tgt)
    if k == "clustersize":
        x, n = spec.args
        if n is None:
            tgt = list(range(g.n_vertices))
        else:
            tgt = [v for v, c in enumerate(g.coords) if max(abs(c[0]), abs(c[1])) <= n]
        return _Aux(nn, "wired", edges, [g.vertex(x)], tgt, kind=1)
    raise ValueError(f"unsupported event kind {k}")


@dataclass
class CompiledObservables:
    """Flat arrays describing a list of observables for the kernels."""

    ids: list
    n_nodes: np.ndarray
    graph_id: np.ndarray
    edge_off: np.ndarray
    aa: np.ndarray
    ab: np.ndarray
    eidx: np.ndarray
    emode: np.ndarray
    src_off: np.ndarray
    src: np.ndarray
    tgt_off: np.ndarray
    tgt: np.ndarray
    kind: np.ndarray
    negate: np.ndarray
    max_nodes: int

    def args(self) -> tuple:
        return (self.n_nodes, self.graph_id, self.edge_off, self.aa, self.ab, self.eidx, self.emode,
                self.src_off, self.src, self.tgt_off, self.tgt, self.kind, self.negate)

    def __len__(self):
        return len(self.ids)

    def evaluate(self, bits: np.ndarray) -> np.ndarray:
        parent = np.empty(max(self.max_nodes, 1), dtype=np.int64)
        mark = np.zeros(self.max_nodes + 1, dtype=np.int64)
        out = np.empty(len(self.ids), dtype=np.float64)
        eval_observables(np.asarray(bits, dtype=np.uint8), *self.args(), parent, mark, out)
        return out


def compile_observables(g: FiniteGraph, xi: BoundaryPartition | None,
                        specs: Sequence) -> CompiledObservables:
    """Compile observables on ``g`` under the boundary condition ``xi``."""
    specs = [parse_event(s) for s in specs]
    cache: dict = {}
    auxs = [_compile_one(g, xi, s, cache) for s in specs]
    keys = {}
    gid, n_nodes, eoff, src_off, tgt_off = [], [], [0], [0], [0]
    aa, ab, ei, em, src, tgt, kind, neg = [], [], [], [], [], [], [], []
    for a in auxs:
        gid.append(keys.setdefault(a.key, len(keys)))
        n_nodes.append(a.n_nodes)
        for (u, v, k, m) in a.edges:
            aa.append(u)
            ab.append(v)
            ei.append(k)
            em.append(m)
        eoff.append(len(aa))
        src += a.src
        tgt += a.tgt
        src_off.append(len(src))
        tgt_off.append(len(tgt))
        kind.append(a.kind)
        neg.append(a.negate)
    i64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
    return CompiledObservables([s.id for s in specs], i64(n_nodes), i64(gid), i64(eoff), i64(aa), i64(ab),
                               i64(ei), i64(em), i64(src_off), i64(src), i64(tgt_off), i64(tgt),
                               i64(kind), i64(neg), int(max(n_nodes, default=1)))


def detect_event(omega: BondConfiguration, spec, xi: BoundaryPartition | None = None) -> bool:
    """Evaluate one boolean event on a configuration.

    Dual events are evaluated on ``omega*``; connection events respect the
    wiring of ``xi`` (free when omitted).
    """
    spec = parse_event(spec)
    comp = compile_observables(omega.graph, xi, [spec])
    val = comp.evaluate(omega.bits)[0]
    return bool(val > 0.5) if spec.is_boolean else val


# ---------------------------------------------------------------------------
# catalogue

CATALOG_VERSION = "1"

#: Increasing events on ``build_box(1)``: single edges, crossings, connections.
BOX1_CATALOG = (
    "edge_open:0,0:1,0",
    "edge_open:-1,-1:0,-1",
    "edge_open:1,0:1,1",
    "conn:0,0:1,1",
    "conn:-1,-1:1,1",
    "conn:-1,0:1,0",
    "conn:0,0:0,1",
    "onearm:1",
    "Ch:-1,-1:1,1",
    "Cv:-1,-1:1,1",
    "Ch:-1,0:1,1",
    "Cv:0,-1:1,1",
)
