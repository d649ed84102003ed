"""Monotone couplings of boundary conditions and the mixing gap.

Two heat-bath chains on ``Lambda_n`` share their uniforms: ``x`` carries
the boundary condition ``xi`` and ``y`` the wired one.  Since the heat-bath
open probability is increasing in the configuration and in the boundary
condition, ``x <= y`` is preserved by every update.

A coupled sample is produced in three stages:

1. ``thin`` ordinary sweeps of the pair;
2. an adaptive revealing pass over ``E_n \\ E_k``.  For ``P`` the next edge
   is the lowest-index unrevealed edge with an endpoint joined to the
   boundary of ``Lambda_n`` by revealed open edges of ``y``; for ``Q`` it is
   the lowest-index unrevealed edge whose dual touches the dual cluster of
   the outer face made of revealed closed edges of ``x``.  Each revealed
   edge gets one heat-bath update with a fresh shared uniform and is never
   touched again in the pass, so the rule depends only on already updated
   edges and the stationary law of each chain is preserved;
3. when the two revealed patterns induce the same boundary partition on
   the unrevealed region, both chains share the same conditional law
   there.  The region is then updated by ``settle`` shared sweeps, and if
   the chains still differ there ``x`` copies ``y`` on the region (counted
   in ``CoupledSampler.fallbacks``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from ._kernels import connected_without, uf_find, uf_union
from .errors import InvalidRange, ZeroDenominator
from .lattice import BoundaryPartition, FiniteGraph, build_box
from .mc import ChainState, _augmented_csr, batch_means
from .model import ModelParams, p_critical

P_COUPLING, Q_COUPLING = "P", "Q"


@dataclass(frozen=True, eq=False)
class CoupledPair:
    """One draw of the coupling.

    ``omega_xi`` and ``omega_1`` are edge bit arrays on ``Lambda_n``.
    ``order`` lists revealed edges in the order they were revealed and
    ``uniforms`` the shared uniforms used for them.
    """

    construction: str
    n: int
    k: int
    omega_xi: np.ndarray
    omega_1: np.ndarray
    order: np.ndarray
    uniforms: np.ndarray
    circuit_found: bool
    monotone_ok: bool
    agree_ok: bool
    seed: int

    def audit_line(self) -> str:
        return f"{self.seed},{int(self.circuit_found)},{int(self.monotone_ok)},{int(self.agree_ok)}"


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _hb(bits, e, u, eu, ev, ptr, nbr, eid, p, q, mA, mB, qa, qb, stamp):
    stamp[0] += 1
    c = connected_without(bits, e, eu[e], ev[e], ptr, nbr, eid, mA, mB, qa, qb, stamp[0])
    prob = p if c else p / (p + q * (1.0 - p))
    bits[e] = 1 if u < prob else 0


@njit(cache=True)
def _pair_sweeps(x, y, edges, U, eu, ev, px, nx, ix, py, ny, iy, p, q, mA, mB, qa, qb, stamp):
    for s in range(U.shape[0]):
        for j in range(edges.shape[0]):
            e = edges[j]
            _hb(x, e, U[s, j], eu, ev, px, nx, ix, p, q, mA, mB, qa, qb, stamp)
            _hb(y, e, U[s, j], eu, ev, py, ny, iy, p, q, mA, mB, qa, qb, stamp)


@njit(cache=True)
def _reveal(mode, x, y, U, eu, ev, inner, on_bd, f1, f2, n_faces, outer,
            px, nx, ix, py, ny, iy, p, q, mA, mB, qa, qb, stamp, rev, order):
    """Adaptive revealing pass; returns the number of revealed edges."""
    E = eu.shape[0]
    nv = on_bd.shape[0]
    inc = np.zeros(nv, dtype=np.uint8)
    dinc = np.zeros(n_faces, dtype=np.uint8)
    for v in range(nv):
        inc[v] = on_bd[v]
    dinc[outer] = 1
    t = 0
    while True:
        nxt = -1
        for e in range(E):
            if rev[e] or inner[e]:
                continue
            if mode == 0:
                ok = inc[eu[e]] or inc[ev[e]]
            else:
                ok = dinc[f1[e]] or dinc[f2[e]]
            if ok:
                nxt = e
                break
        if nxt < 0:
            return t
        e = nxt
        _hb(x, e, U[t], eu, ev, px, nx, ix, p, q, mA, mB, qa, qb, stamp)
        _hb(y, e, U[t], eu, ev, py, ny, iy, p, q, mA, mB, qa, qb, stamp)
        rev[e] = 1
        order[t] = e
        t += 1
        if mode == 0 and y[e]:
            inc[eu[e]] = 1
            inc[ev[e]] = 1
        if mode == 1 and not x[e]:
            dinc[f1[e]] = 1
            dinc[f2[e]] = 1


@njit(cache=True)
def _induced(bits, rev, eu, ev, block_of, n_nodes, region, parent, lab):
    """Canonical labels on ``region`` of the partition from revealed open edges."""
    nv = block_of.shape[0]
    for i in range(n_nodes):
        parent[i] = i
    for v in range(nv):
        if block_of[v] >= 0:
            uf_union(parent, v, nv + block_of[v])
    for e in range(eu.shape[0]):
        if rev[e] and bits[e]:
            uf_union(parent, eu[e], ev[e])
    seen = np.full(n_nodes, -1, dtype=np.int64)
    c = 0
    for i in range(region.shape[0]):
        r = uf_find(parent, region[i])
        if seen[r] < 0:
            seen[r] = c
            c += 1
        lab[i] = seen[r]


# ---------------------------------------------------------------------------
# sampler


def _box_faces(g: FiniteGraph, n: int):
    """Dual face ids ``(f1, f2)`` per edge of ``Lambda_n``; the outer face is last."""
    side = 2 * n
    outer = side * side

    def fid(x, y):
        if -n <= x < n and -n <= y < n:
            return (y + n) * side + (x + n)
        return outer

    f1 = np.empty(g.n_edges, dtype=np.int64)
    f2 = np.empty(g.n_edges, dtype=np.int64)
    for k, (u, v) in enumerate(g.edges):
        (x0, y0), (x1, y1) = g.coords[u], g.coords[v]
        if y0 == y1:
            x = min(x0, x1)
            f1[k], f2[k] = fid(x, y0), fid(x, y0 - 1)
        else:
            y = min(y0, y1)
            f1[k], f2[k] = fid(x0, y), fid(x0 - 1, y)
    return f1, f2, outer + 1, outer


class CoupledSampler:
    """Persistent coupled pair on ``Lambda_n`` producing :class:`CoupledPair` draws.

    Parameters
    ----------
    n, k : int
        Box sizes, ``1 <= k < n``.
    xi : BoundaryPartition or {"free", "wired"}
        Boundary condition of the lower chain.
    q, p : float
        Model parameters; ``p`` defaults to ``p_c(q)``.
    construction : {"P", "Q"}
    seed : int
    burn_in, thin, settle : int
        Initial coupled sweeps, sweeps between draws and region sweeps.
    """

    def __init__(self, n: int, k: int, xi="free", q: float = 2.0, p: float | None = None,
                 construction: str = P_COUPLING, seed: int = 0, burn_in: int = 200, thin: int = 2,
                 settle: int = 20):
        if not 1 <= k < n:
            raise InvalidRange(f"need 1 <= k < n, got k={k}, n={n}")
        if construction not in (P_COUPLING, Q_COUPLING):
            raise ValueError("construction must be 'P' or 'Q'")
        g = build_box(n)
        self.graph, self.n, self.k = g, n, k
        if isinstance(xi, str):
            xi = BoundaryPartition.wired(g) if xi == "wired" else BoundaryPartition.free(g)
        self.xi = xi
        self.wired = BoundaryPartition.wired(g)
        self.params = ModelParams(p_critical(q) if p is None else p, q)
        self.construction = construction
        self.seed = int(seed)
        self.thin, self.settle = thin, settle
        self.rng = np.random.Generator(np.random.Philox(key=np.array([self.seed, 7], dtype=np.uint64)))
        E = g.n_edges
        self.eu, self.ev = g.edges[:, 0].copy(), g.edges[:, 1].copy()
        self.bx, self.by = xi.block_of(), self.wired.block_of()
        self.nx_nodes = g.n_vertices + xi.n_ghosts
        self.ny_nodes = g.n_vertices + self.wired.n_ghosts
        self.cx = _augmented_csr(g, self.bx, xi.n_ghosts)
        self.cy = _augmented_csr(g, self.by, self.wired.n_ghosts)
        in_k = np.array([max(abs(c[0]), abs(c[1])) <= k for c in g.coords])
        self.in_k = in_k
        self.inner = (in_k[self.eu] & in_k[self.ev]).astype(np.uint8)
        self.on_bd = g.boundary_mask().astype(np.uint8)
        self.f1, self.f2, self.n_faces, self.outer = _box_faces(g, n)
        self.k_faces = np.zeros(self.n_faces, dtype=bool)
        for e in np.flatnonzero(self.inner):
            self.k_faces[self.f1[e]] = self.k_faces[self.f2[e]] = True
        self.face_edges = [[] for _ in range(self.n_faces)]
        for e in range(E):
            self.face_edges[self.f1[e]].append(e)
            self.face_edges[self.f2[e]].append(e)
        nn = max(self.nx_nodes, self.ny_nodes)
        self._mA = np.zeros(nn, dtype=np.int64)
        self._mB = np.zeros(nn, dtype=np.int64)
        self._qa = np.empty(nn, dtype=np.int64)
        self._qb = np.empty(nn, dtype=np.int64)
        self._stamp = np.zeros(1, dtype=np.int64)
        self._parent = np.empty(nn, dtype=np.int64)
        self.x = np.zeros(E, dtype=np.uint8)
        self.y = np.ones(E, dtype=np.uint8)
        self.fallbacks = 0
        self.draws = 0
        self._sweeps(np.arange(E, dtype=np.int64), burn_in)

    def _sweeps(self, edges: np.ndarray, count: int) -> None:
        if count <= 0 or len(edges) == 0:
            return
        U = self.rng.random((count, len(edges)))
        _pair_sweeps(self.x, self.y, edges, U, self.eu, self.ev, *self.cx, *self.cy,
                     self.params.p, self.params.q, self._mA, self._mB, self._qa, self._qb, self._stamp)

    def _labels(self, bits, rev, block_of, n_nodes, region):
        lab = np.empty(len(region), dtype=np.int64)
        _induced(bits, rev, self.eu, self.ev, block_of, n_nodes, region, self._parent, lab)
        return lab

    def sample(self) -> CoupledPair:
        E = self.graph.n_edges
        self._sweeps(np.arange(E, dtype=np.int64), self.thin)
        rev = np.zeros(E, dtype=np.uint8)
        order = np.empty(E, dtype=np.int64)
        U = self.rng.random(E)
        mode = 0 if self.construction == P_COUPLING else 1
        t = _reveal(mode, self.x, self.y, U, self.eu, self.ev, self.inner, self.on_bd, self.f1, self.f2,
                    self.n_faces, self.outer, *self.cx, *self.cy, self.params.p, self.params.q,
                    self._mA, self._mB, self._qa, self._qb, self._stamp, rev, order)
        circuit = self._circuit(rev)
        # inside a separating circuit only the enclosed unrevealed edges matter
        rest = np.flatnonzero(self._enclosed(rev) if circuit else rev == 0).astype(np.int64)
        region = np.unique(np.concatenate([self.eu[rest], self.ev[rest]])).astype(np.int64)
        lx = self._labels(self.x, rev, self.bx, self.nx_nodes, region)
        ly = self._labels(self.y, rev, self.by, self.ny_nodes, region)
        if np.array_equal(lx, ly):
            self._sweeps(rest, self.settle)
            if not np.array_equal(self.x[rest], self.y[rest]):
                self.x[rest] = self.y[rest]
                self.fallbacks += 1
        agree = (not circuit) or bool(np.array_equal(self.x[rest], self.y[rest])
                                      and self.inner[rest].sum() == self.inner.sum())
        self.draws += 1
        return CoupledPair(self.construction, self.n, self.k, self.x.copy(), self.y.copy(), order[:t].copy(),
                           U[:t].copy(), circuit, bool(np.all(self.x <= self.y)), agree, self.seed)

    def _enclosed(self, rev: np.ndarray) -> np.ndarray:
        """Unrevealed edges reachable from the faces of ``Lambda_k`` without crossing a revealed edge."""
        seen = self.k_faces.copy()
        seen[self.outer] = False
        stack = list(np.flatnonzero(seen))
        mask = np.zeros(len(rev), dtype=bool)
        while stack:
            f = stack.pop()
            for e in self.face_edges[f]:
                if rev[e] or mask[e]:
                    continue
                mask[e] = True
                for h in (self.f1[e], self.f2[e]):
                    if not seen[h]:
                        seen[h] = True
                        stack.append(h)
        return mask

    def _circuit(self, rev: np.ndarray) -> bool:
        """Whether the separating circuit of the construction surrounds ``Lambda_k``."""
        if self.construction == P_COUPLING:
            # boundary cluster of omega_1 through revealed open edges avoids Lambda_k
            inc = self.on_bd.astype(bool).copy()
            for e in np.flatnonzero(rev & self.y):
                inc[self.eu[e]] = inc[self.ev[e]] = True
            return not bool(np.any(inc & self.in_k))
        dinc = np.zeros(self.n_faces, dtype=bool)
        dinc[self.outer] = True
        for e in np.flatnonzero(rev & (1 - self.x)):
            dinc[self.f1[e]] = dinc[self.f2[e]] = True
        return not bool(np.any(dinc & self.k_faces))

    def samples(self, count: int) -> list[CoupledPair]:
        return [self.sample() for _ in range(count)]


def coupled_sample_p(n: int, k: int, xi="free", seed: int = 0, q: float = 2.0, p: float | None = None,
                     **kw) -> CoupledPair:
    """One draw of the coupling ``P`` (revealing from the boundary cluster of ``omega_1``)."""
    return CoupledSampler(n, k, xi, q, p, P_COUPLING, seed, **kw).sample()


def coupled_sample_q(n: int, k: int, xi="free", seed: int = 0, q: float = 2.0, p: float | None = None,
                     **kw) -> CoupledPair:
    """One draw of the coupling ``Q`` (revealing from the outer dual cluster of ``omega_xi``)."""
    return CoupledSampler(n, k, xi, q, p, Q_COUPLING, seed, **kw).sample()


def write_audit_log(path, pairs: Sequence[CoupledPair]) -> None:
    """One line ``seed,circuit_found,monotone_ok,agree_ok`` per sample."""
    with open(path, "w") as fh:
        fh.write("seed,circuit_found,monotone_ok,agree_ok\n")
        for c in pairs:
            fh.write(c.audit_line() + "\n")


# ---------------------------------------------------------------------------
# mixing gap


@dataclass(frozen=True)
class Gap:
    """Relative gap ``|phi^xi[A] - phi^psi[A]| / phi^xi[A]`` with its error."""

    value: float
    std_error: float
    phi_xi: float
    phi_psi: float

    def __float__(self) -> float:
        return self.value


def _partition(g, bc):
    if isinstance(bc, BoundaryPartition):
        return bc
    return {"free": BoundaryPartition.free, "wired": BoundaryPartition.wired,
            "mixed": BoundaryPartition.mixed}[bc](g)


def _relative(a: float, b: float) -> float:
    if a == 0:
        raise ZeroDenominator("phi^xi[A] vanishes")
    return abs(a - b) / a


def mixing_gap(n: int, k: int, A, xi="free", psi="wired", mode: str = "exact", q: float = 2.0,
               p: float | None = None, graph: FiniteGraph | None = None, sweeps: int = 20000,
               burn_in: int | None = None, batches: int = 32, seed: int = 0, method: str = "sw",
               conditional: bool = True) -> Gap:
    """Relative gap between two boundary conditions for an event on ``Lambda_k``.

    Parameters
    ----------
    A : event id, EventSpec or list of edge ids
        A list of edges stands for "edge open", averaged over the list
        (useful for symmetric copies of one edge).
    mode : {"exact", "mc"}
        Exact uses enumeration up to the enumeration budget and the
        frontier sweep beyond it.
    conditional : bool
        In Monte Carlo mode with edge events, record the heat-bath
        conditional probability of the edge instead of its indicator.
    """
    if 2 * k > n:
        raise InvalidRange(f"need 2k <= n, got k={k}, n={n}")
    g = graph if graph is not None else build_box(n)
    params = ModelParams(p_critical(q) if p is None else p, q)
    bx, bp = _partition(g, xi), _partition(g, psi)
    if bx.blocks == bp.blocks:
        a = _phi(g, params, bx, A, mode, sweeps, burn_in, batches, seed, method, conditional)
        return Gap(0.0, 0.0, a[0], a[0])
    a = _phi(g, params, bx, A, mode, sweeps, burn_in, batches, seed, method, conditional)
    b = _phi(g, params, bp, A, mode, sweeps, burn_in, batches, seed + 1, method, conditional)
    val = _relative(a[0], b[0])
    se = 0.0
    if mode == "mc":
        # delta method for |a - b| / a with independent a, b
        da = b[0] / a[0] ** 2
        db = 1.0 / a[0]
        se = math.sqrt((da * a[1]) ** 2 + (db * b[1]) ** 2)
    return Gap(val, se, a[0], b[0])


def _phi(g, params, xi, A, mode, sweeps, burn_in, batches, seed, method, conditional):
    from . import exact, transfer
    from .events import parse_event

    edges = list(A) if isinstance(A, (list, tuple)) and all(isinstance(e, (int, np.integer)) for e in A) else None
    if mode == "exact":
        specs = [f"edge_open:{e}" for e in edges] if edges is not None else [A]
        vals = []
        for s in specs:
            if g.n_edges <= exact.MAX_EDGES:
                vals.append(exact.event_probability(g, params, xi, s))
            else:
                vals.append(transfer.transfer_probability(g, params, xi, [parse_event(s).id]))
        return float(np.mean(vals)), 0.0
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    from .events import compile_observables

    st = ChainState(g, xi, params, seed=seed, method=method)
    if edges is not None and conditional:
        comp = compile_observables(g, xi, [])
        if burn_in is None:
            burn_in = max(200, sweeps // 10)
        st.run(burn_in, method, comp)
        rec = st.run(sweeps, method, comp, conditional_edges=edges)
    else:
        specs = [f"edge_open:{e}" for e in edges] if edges is not None else [A]
        comp = compile_observables(g, xi, [parse_event(s) for s in specs])
        if burn_in is None:
            burn_in = max(200, sweeps // 10)
        st.run(burn_in, method, comp)
        rec = st.run(sweeps, method, comp)
    series = rec.mean(axis=1)
    return batch_means(series, batches)


def origin_edges(g: FiniteGraph) -> list[int]:
    """The four edges at the origin."""
    o = g.vertex((0, 0))
    return sorted(int(e) for e in g.incidence[o])


__all__ = ["CoupledPair", "CoupledSampler", "coupled_sample_p", "coupled_sample_q", "write_audit_log",
           "Gap", "mixing_gap", "origin_edges"]
