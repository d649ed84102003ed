"""Exact enumeration of the random-cluster and Potts measures on small graphs.

The enumeration kernel walks all ``2^F`` configurations of the free edges
and records an integer histogram ``H[mask, o, k]`` (event mask, number of
open free edges, number of clusters of omega^xi).  Any ``(p, q)`` is then
evaluated from the histogram in log space with compensated summation, so
one pass serves a whole parameter grid.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._kernels import cluster_counts_all, enumerate_histogram, uf_find, uf_union, wired_clusters
from .errors import NoDual, PartitionMismatch, TooLarge
from .events import EventSpec, compile_observables, parse_event
from .lattice import BoundaryPartition, FiniteGraph, build_dual, subgraph
from .model import BondConfiguration, ModelParams

MAX_EDGES = 26
MAX_PYTHON_EDGES = 16
MAX_POTTS_VERTICES = 12


def _check_partition(g: FiniteGraph, xi: BoundaryPartition | None) -> BoundaryPartition:
    if xi is None:
        return BoundaryPartition.free(g)
    if xi.graph is not g:
        bset = set(g.boundary)
        for blk in xi.blocks:
            for v in blk:
                if v not in bset:
                    raise PartitionMismatch("partition belongs to another graph")
        return BoundaryPartition(g, xi.blocks, xi.label)
    return xi


def cluster_count(omega: BondConfiguration, xi: BoundaryPartition | None = None) -> int:
    """Number of clusters of ``omega`` once each block of ``xi`` is wired."""
    g = omega.graph
    xi = _check_partition(g, xi)
    nn = g.n_vertices + xi.n_ghosts
    parent = np.empty(nn, dtype=np.int64)
    return int(wired_clusters(omega.bits, g.edges[:, 0], g.edges[:, 1], xi.block_of(), nn, parent))


def _log_terms(o, k, F, params: ModelParams):
    """``log(p^o (1-p)^(F-o) q^k)`` with the convention ``0 log 0 = 0``."""
    o = np.asarray(o, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        lp = np.where(o > 0, o * np.log(params.p) if params.p > 0 else -np.inf, 0.0)
        lq = np.where(F - o > 0, (F - o) * np.log1p(-params.p) if params.p < 1 else -np.inf, 0.0)
    return lp + lq + k * math.log(params.q)


def _fsum_exp(logs: np.ndarray, shift: float) -> float:
    vals = np.exp(logs - shift)
    return math.fsum(vals.tolist())


@dataclass
class Histogram:
    """Integer histogram of an enumeration together with its bookkeeping."""

    H: np.ndarray
    ids: list
    n_free: int

    def weights(self, params: ModelParams) -> np.ndarray:
        """Weight of every event mask, shared scale, as ``(log_scale, array)``."""
        nm, no, nk = self.H.shape
        o, k = np.meshgrid(np.arange(no), np.arange(nk), indexing="ij")
        lt = _log_terms(o, k, self.n_free, params)
        out = np.empty(nm)
        mask = self.H > 0
        with np.errstate(divide="ignore"):
            logs = np.where(mask, np.log(np.where(mask, self.H, 1)) + lt[None], -np.inf)
        finite = logs[np.isfinite(logs)]
        shift = float(finite.max()) if finite.size else 0.0
        for m in range(nm):
            lm = logs[m][np.isfinite(logs[m])]
            out[m] = _fsum_exp(lm, shift) if lm.size else 0.0
        return shift, out

    def log_partition(self, params: ModelParams) -> float:
        shift, w = self.weights(params)
        return shift + math.log(math.fsum(w.tolist()))

    def probabilities(self, params: ModelParams) -> np.ndarray:
        """Probability of every event mask."""
        _, w = self.weights(params)
        return w / math.fsum(w.tolist())

    def prob(self, params: ModelParams, pred: Callable[[tuple], bool] | None = None) -> float:
        """Probability that ``pred(results)`` holds; default: all events hold."""
        P = self.probabilities(params)
        m = len(self.ids)
        total = []
        for mask in range(P.shape[0]):
            res = tuple(bool((mask >> j) & 1) for j in range(m))
            if (pred(res) if pred is not None else all(res)):
                total.append(P[mask])
        return math.fsum(total)


def histogram(g: FiniteGraph, xi: BoundaryPartition | None = None, events: Sequence = (),
              fixed: dict | None = None, workers: int = 1) -> Histogram:
    """Enumerate all configurations of ``g`` and histogram ``(events, o, k)``.

    Parameters
    ----------
    fixed : dict, optional
        Edge index to forced bit.  Forced edges are not enumerated and do
        not enter ``o``.
    workers : int
        Threads splitting the configuration range; the result does not
        depend on it.
    """
    xi = _check_partition(g, xi)
    fixed = fixed or {}
    free = np.array([e for e in range(g.n_edges) if e not in fixed], dtype=np.int64)
    F = len(free)
    if F > MAX_EDGES:
        raise TooLarge(f"{F} free edges exceed the enumeration budget of {MAX_EDGES}")
    specs = [parse_event(s) for s in events]
    if len(specs) > 12:
        raise TooLarge("at most 12 events per enumeration")
    comp = compile_observables(g, xi, specs)
    fb = np.zeros(g.n_edges, dtype=np.uint8)
    for e, b in fixed.items():
        fb[e] = b
    nn = g.n_vertices + xi.n_ghosts
    eu, ev = g.edges[:, 0].copy(), g.edges[:, 1].copy()
    total = 1 << F
    bounds = np.linspace(0, total, max(1, workers) + 1).astype(np.int64)

    def run(i):
        return enumerate_histogram(F, free, fb, eu, ev, xi.block_of(), nn, *comp.args(),
                                   comp.max_nodes, int(bounds[i]), int(bounds[i + 1]))

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(run, range(workers)))
    else:
        parts = [run(0)]
    return Histogram(sum(parts[1:], parts[0]), comp.ids, F)


def partition_function(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None = None) -> float:
    """``Z = sum_omega p^o (1-p)^c q^k(omega^xi)``."""
    return math.exp(histogram(g, xi).log_partition(params))


def configuration_probabilities(g: FiniteGraph, params: ModelParams,
                                xi: BoundaryPartition | None = None) -> np.ndarray:
    """Probability of every configuration, indexed by its bit pattern."""
    xi = _check_partition(g, xi)
    if g.n_edges > 22:
        raise TooLarge("per-configuration table limited to 22 edges")
    free = np.arange(g.n_edges, dtype=np.int64)
    k = cluster_counts_all(g.n_edges, free, np.zeros(g.n_edges, np.uint8), g.edges[:, 0].copy(),
                           g.edges[:, 1].copy(), xi.block_of(), g.n_vertices + xi.n_ghosts)
    c = np.arange(1 << g.n_edges)
    o = np.zeros_like(c)
    for i in range(g.n_edges):
        o += (c >> i) & 1
    lt = _log_terms(o, k, g.n_edges, params)
    shift = lt.max()
    w = np.exp(lt - shift)
    return w / math.fsum(w.tolist())


def event_probability(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None,
                      A) -> float:
    """``phi^xi[A]`` by enumeration.

    ``A`` is an event id, an :class:`EventSpec`, a list of them (their
    intersection) or a Python predicate on :class:`BondConfiguration`.
    """
    if callable(A) and not isinstance(A, EventSpec):
        if g.n_edges > MAX_PYTHON_EDGES:
            raise TooLarge("predicate events are limited to 16 edges")
        P = configuration_probabilities(g, params, xi)
        hits = [P[c] for c in range(1 << g.n_edges) if A(BondConfiguration.from_int(g, c))]
        return math.fsum(hits)
    events = list(A) if isinstance(A, (list, tuple)) else [A]
    return histogram(g, xi, events).prob(params)


def two_point(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None, x, y) -> float:
    """Probability that ``x`` and ``y`` lie in the same cluster of omega^xi."""
    if tuple(x) == tuple(y):
        g.vertex(x)
        return 1.0
    return event_probability(g, params, xi, EventSpec("conn", (tuple(x), tuple(y))))


def dual_transform(omega: BondConfiguration, params: ModelParams, dual=None):
    """Dual configuration on ``g*`` and the dual parameters.

    Returns ``(omega_star, params_star)`` with ``omega*(e*) = 1 - omega(e)``.
    """
    g = omega.graph
    if dual is None:
        try:
            dual = build_dual(g)
        except NoDual:
            raise
    gd, bij = dual
    bits = np.empty(g.n_edges, dtype=np.uint8)
    bits[bij] = 1 - omega.bits
    return BondConfiguration(gd, bits), params.dual()


def induced_partition(g: FiniteGraph, inner_edges: Sequence[int], bits: np.ndarray,
                      xi: BoundaryPartition | None = None) -> tuple[FiniteGraph, BoundaryPartition, np.ndarray]:
    """Inner graph and the boundary condition induced by the outside pattern.

    Boundary vertices of the inner graph are grouped when joined through
    open outside edges or through the wiring of ``xi``.
    """
    xi = _check_partition(g, xi)
    inner = set(int(e) for e in inner_edges)
    sub, emap = subgraph(g, inner)
    nn = g.n_vertices + xi.n_ghosts
    parent = np.arange(nn)
    block = xi.block_of()
    for v, b in enumerate(block):
        if b >= 0:
            uf_union(parent, v, g.n_vertices + b)
    for e in range(g.n_edges):
        if e not in inner and bits[e]:
            uf_union(parent, int(g.edges[e][0]), int(g.edges[e][1]))
    groups: dict = {}
    for sv in sub.boundary:
        gv = g.vertex(sub.coords[sv])
        groups.setdefault(int(uf_find(parent, gv)), []).append(sv)
    return sub, BoundaryPartition(sub, tuple(tuple(b) for b in groups.values())), emap


def insertion_constant(params: ModelParams) -> float:
    """Lower bound on every single-edge conditional probability."""
    p, q = params.p, params.q
    a = params.open_prob(False)
    if q >= 1:
        return min(a, 1 - p)
    return min(p, 1 - a)


# ---------------------------------------------------------------------------
# Potts model


@dataclass
class PottsSummary:
    """Exact Potts law on the non-fixed vertices."""

    marginals: np.ndarray  # (V, q)
    agreements: np.ndarray  # (V, V)
    joint: np.ndarray  # over colourings of free vertices, lexicographic
    free_vertices: list


def _colourings(nfree: int, q: int) -> np.ndarray:
    return np.array(list(itertools.product(range(q), repeat=nfree)), dtype=np.int64).reshape(q ** nfree, nfree)


def potts_enumerate(g: FiniteGraph, q: int, beta: float, fixed: dict | None = None) -> PottsSummary:
    """Exact Potts measure ``exp(beta * #agreeing edges)`` with some spins fixed.

    Colours are ``0..q-1``; ``fixed`` maps vertex index to colour, which is
    how a boundary condition on the outer layer of vertices is encoded.
    """
    if int(q) != q or q < 2:
        raise ValueError("Potts needs an integer q >= 2")
    q = int(q)
    fixed = dict(fixed or {})
    free = [v for v in range(g.n_vertices) if v not in fixed]
    if len(free) > MAX_POTTS_VERTICES:
        raise TooLarge(f"{len(free)} free spins exceed the budget of {MAX_POTTS_VERTICES}")
    C = _colourings(len(free), q)
    S = np.zeros((C.shape[0], g.n_vertices), dtype=np.int64)
    S[:, free] = C
    for v, c in fixed.items():
        S[:, v] = c
    agree = (S[:, g.edges[:, 0]] == S[:, g.edges[:, 1]]).sum(axis=1) if g.n_edges else np.zeros(len(S))
    if math.isinf(beta):
        lw = np.where(agree == agree.max(), 0.0, -np.inf)
    else:
        lw = beta * agree.astype(np.float64)
        lw -= lw.max()
    w = np.exp(lw)
    P = w / math.fsum(w.tolist())
    marg = np.zeros((g.n_vertices, q))
    for c in range(q):
        marg[:, c] = P @ (S == c)
    ag = np.zeros((g.n_vertices, g.n_vertices))
    for x in range(g.n_vertices):
        ag[x] = P @ (S == S[:, [x]])
    return PottsSummary(marg, ag, P, free)


def _fk_spin_law(g: FiniteGraph, q: int, p: float, xi: BoundaryPartition, fixed: dict) -> np.ndarray:
    """Joint spin law obtained by colouring FK clusters, on the free vertices."""
    E = g.n_edges
    params = ModelParams(p, q)
    P = configuration_probabilities(g, params, xi)
    free_e = np.arange(E, dtype=np.int64)
    k = cluster_counts_all(E, free_e, np.zeros(E, np.uint8), g.edges[:, 0].copy(), g.edges[:, 1].copy(),
                           xi.block_of(), g.n_vertices + xi.n_ghosts)
    forced_clusters = 1 if fixed else 0
    # weight of omega in the colouring law: P(omega) q^-(number of freely coloured clusters)
    f = P * np.power(float(q), -(k - forced_clusters).astype(np.float64))
    # subset sums: f[A] = sum over omega contained in A
    for i in range(E):
        bit = 1 << i
        idx = np.arange(1 << E)
        sel = (idx & bit) != 0
        f[sel] += f[idx[sel] ^ bit]
    free = [v for v in range(g.n_vertices) if v not in fixed]
    C = _colourings(len(free), q)
    S = np.zeros((C.shape[0], g.n_vertices), dtype=np.int64)
    S[:, free] = C
    for v, c in fixed.items():
        S[:, v] = c
    eq = (S[:, g.edges[:, 0]] == S[:, g.edges[:, 1]]).astype(np.int64)
    A = (eq << np.arange(E)).sum(axis=1)
    return f[A]


def coupling_check(g: FiniteGraph, q: int, p: float, xi: BoundaryPartition | None = None) -> dict:
    """Compare the coloured FK measure with the Potts measure at ``beta = -log(1-p)``.

    Free ``xi`` is compared with free Potts spins; wired ``xi`` with the
    boundary spins fixed to colour 0.  Returns the largest absolute
    discrepancies of the joint law, the marginals and the pair agreements.
    """
    xi = _check_partition(g, xi)
    if not (xi.is_free or xi.is_wired):
        raise ValueError("coupling_check supports free or wired boundary conditions")
    fixed = {v: 0 for v in g.boundary} if (xi.is_wired and not xi.is_free) else {}
    if g.n_edges > 22:
        raise TooLarge("coupling check limited to 22 edges")
    beta = ModelParams(p, q).beta
    pot = potts_enumerate(g, q, beta, fixed)
    fk = _fk_spin_law(g, q, p, xi, fixed)
    free = pot.free_vertices
    C = _colourings(len(free), q)
    S = np.zeros((C.shape[0], g.n_vertices), dtype=np.int64)
    S[:, free] = C
    for v, c in fixed.items():
        S[:, v] = c
    marg = np.stack([fk @ (S == c) for c in range(q)], axis=1)
    ag = np.stack([fk @ (S == S[:, [x]]) for x in range(g.n_vertices)])
    d_joint = float(np.abs(fk - pot.joint).max())
    d_marg = float(np.abs(marg - pot.marginals).max())
    d_ag = float(np.abs(ag - pot.agreements).max())
    return {"joint": d_joint, "marginals": d_marg, "agreements": d_ag,
            "max": max(d_joint, d_marg, d_ag), "fk_total": float(fk.sum())}
