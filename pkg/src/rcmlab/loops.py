"""Loop representation, exploration path and the parafermionic observable.

On a Dobrushin domain every medial vertex carries the state of the primal
edge through it, and the loops turn by a quarter at every medial vertex so
as not to cross the open primal edge or the open dual edge there.  The
exploration path ``gamma`` is the unique non-closed curve; it enters
through ``e_a`` and leaves through ``e_b``.

Windings are kept as integer numbers of quarter-turns (left = +1).  Exact
fields are built from a table ``acc[e, W]`` holding the total weight of
configurations in which ``e`` lies on ``gamma`` with winding ``W`` to
``e_b``, so the phase exponent can be chosen afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

from ._kernels import uf_union
from .dobrushin import FORCED_CLOSED, FORCED_OPEN, RANDOM, DobrushinDomain, turn
from .errors import InvalidConfiguration, InvalidContour, InvalidVertexSet, TooLarge
from .lattice import BoundaryPartition
from .model import ModelParams, p_critical

MAX_FREE = 24


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _trace_path(om, head, nxt_open, nxt_closed, trn_open, trn_closed, e_a, seq, turns):
    """Follow ``gamma`` from ``e_a``; fill ``seq``/``turns`` and return its length."""
    e = e_a
    m = 0
    while True:
        seq[m] = e
        h = head[e]
        if h < 0:
            turns[m] = 0
            return m + 1
        if om[h]:
            nx = nxt_open[e]
            turns[m] = trn_open[e]
        else:
            nx = nxt_closed[e]
            turns[m] = trn_closed[e]
        m += 1
        e = nx


@njit(cache=True)
def _count_loops(om, head, nxt_open, nxt_closed, seq, m, seen, stamp):
    for i in range(m):
        seen[seq[i]] = stamp
    loops = 0
    K = head.shape[0]
    for e0 in range(K):
        if seen[e0] == stamp:
            continue
        loops += 1
        e = e0
        while seen[e] != stamp:
            seen[e] = stamp
            h = head[e]
            e = nxt_open[e] if om[h] else nxt_closed[e]
    return loops


@njit(cache=True)
def _fill_state(om, mask, free_v, base):
    for v in range(base.shape[0]):
        om[v] = base[v]
    for i in range(free_v.shape[0]):
        om[free_v[i]] = (mask >> i) & 1


@njit(cache=True)
def _exact_kernel(free_v, base, head, nxt_open, nxt_closed, trn_open, trn_closed, e_a, start,
                  m2p, pu, pv, n_pv, p, q, off, acc, stats):
    """Accumulate ``acc[e, W + off]`` over all configurations of the free vertices.

    ``stats`` receives ``[Z, min(o + 2k - loops), max(o + 2k - loops)]``.
    """
    K = head.shape[0]
    nv = base.shape[0]
    om = np.zeros(nv, dtype=np.uint8)
    seq = np.empty(K + 1, dtype=np.int64)
    turns = np.empty(K + 1, dtype=np.int64)
    seen = np.zeros(K, dtype=np.int64)
    parent = np.empty(n_pv, dtype=np.int64)
    nf = free_v.shape[0]
    Z = 0.0
    lo = 1 << 30
    hi = -(1 << 30)
    for mask in range(1 << nf):
        _fill_state(om, mask, free_v, base)
        o_free = 0
        for i in range(nf):
            o_free += om[free_v[i]]
        for i in range(n_pv):
            parent[i] = i
        k = n_pv
        o_all = 0
        for v in range(nv):
            if m2p[v] >= 0 and om[v]:
                o_all += 1
                if uf_union(parent, pu[m2p[v]], pv[m2p[v]]):
                    k -= 1
        w = p ** o_free * (1.0 - p) ** (nf - o_free) * q ** k
        Z += w
        m = _trace_path(om, head, nxt_open, nxt_closed, trn_open, trn_closed, e_a, seq, turns)
        loops = _count_loops(om, head, nxt_open, nxt_closed, seq, m, seen, mask + 1)
        d = o_all + 2 * k - loops
        if d < lo:
            lo = d
        if d > hi:
            hi = d
        # suffix sums of turns give the winding to e_b
        pos = 0
        while seq[pos] != start:
            pos += 1
            if pos == m:
                break
        W = 0
        for i in range(m - 1, pos - 1, -1):
            if i < m - 1:
                W += turns[i]
            acc[seq[i], W + off] += w
    stats[0] = Z
    stats[1] = lo
    stats[2] = hi


@njit(cache=True)
def _mc_kernel(configs, base, rand_v, m2p, head, nxt_open, nxt_closed, trn_open, trn_closed, e_a, start,
               off, acc, batch_of):
    K = head.shape[0]
    nv = base.shape[0]
    om = np.zeros(nv, dtype=np.uint8)
    seq = np.empty(K + 1, dtype=np.int64)
    turns = np.empty(K + 1, dtype=np.int64)
    for s in range(configs.shape[0]):
        for v in range(nv):
            om[v] = base[v]
        for i in range(rand_v.shape[0]):
            v = rand_v[i]
            om[v] = configs[s, m2p[v]]
        m = _trace_path(om, head, nxt_open, nxt_closed, trn_open, trn_closed, e_a, seq, turns)
        pos = 0
        while seq[pos] != start:
            pos += 1
            if pos == m:
                break
        W = 0
        b = batch_of[s]
        for i in range(m - 1, pos - 1, -1):
            if i < m - 1:
                W += turns[i]
            acc[b, seq[i], W + off] += 1.0


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class LoopDecomposition:
    """Loops and exploration path of one configuration.

    ``membership[e]`` is -1 for edges of ``exploration`` and the loop index
    otherwise.  ``windings[e]`` is ``W(e, e_b)`` in quarter-turns (0 off
    the path).
    """

    exploration: tuple
    loops: tuple
    membership: np.ndarray
    windings: np.ndarray
    turns: tuple

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    def winding(self, e: int) -> float:
        """``W(e, e_b)`` in radians."""
        return self.windings[e] * math.pi / 2


def _base_state(d: DobrushinDomain) -> np.ndarray:
    return (d.vstate == FORCED_OPEN).astype(np.uint8)


def _tables(d: DobrushinDomain):
    return (d.head, d.next_open, d.next_closed, d.turn_open, d.turn_closed)


def vertex_states(d: DobrushinDomain, omega) -> np.ndarray:
    """Open/closed state per medial vertex, checking the forced arcs."""
    bits = np.asarray(getattr(omega, "bits", omega), dtype=np.uint8)
    if bits.shape != (d.primal.n_edges,):
        raise InvalidConfiguration("configuration does not match the primal domain")
    for v in range(d.n_medial_vertices):
        e = d.medial_to_primal[v]
        if e < 0:
            continue
        s = d.vstate[v]
        if s == FORCED_OPEN and not bits[e]:
            raise InvalidConfiguration(f"edge {e} of the wired arc is closed")
        if s == FORCED_CLOSED and bits[e]:
            raise InvalidConfiguration(f"edge {e} is held closed but open")
    return d.vertex_open_mask(bits)


def trace_loops(d: DobrushinDomain, omega) -> LoopDecomposition:
    """Full loop decomposition of ``omega`` (a primal configuration on ``d.primal``)."""
    om = vertex_states(d, omega)
    K = d.n_medial_edges
    seq = np.empty(K + 1, dtype=np.int64)
    trn = np.empty(K + 1, dtype=np.int64)
    m = _trace_path(om, *_tables(d), d.e_a, seq, trn)
    path = [int(x) for x in seq[:m]]
    turns = [int(x) for x in trn[:m - 1]]
    if d.start != d.e_a:
        i = path.index(d.start) if d.start in path else m
        path, turns = path[i:], turns[i:]
    membership = np.full(K, -2, dtype=np.int64)
    windings = np.zeros(K, dtype=np.int64)
    w = 0
    for i in range(len(path) - 1, -1, -1):
        if i < len(path) - 1:
            w += turns[i]
        membership[path[i]] = -1
        windings[path[i]] = w
    for e in seq[:m]:
        if membership[e] == -2:
            membership[e] = -3  # explored prefix of a slit domain
    loops = []
    for e0 in range(K):
        if membership[e0] != -2:
            continue
        cyc = []
        e = e0
        while membership[e] == -2:
            membership[e] = len(loops)
            cyc.append(e)
            h = d.head[e]
            e = d.next_open[e] if om[h] else d.next_closed[e]
        loops.append(tuple(cyc))
    membership[membership == -3] = -1
    return LoopDecomposition(tuple(path), tuple(loops), membership, windings, tuple(turns))


def winding(gamma: Sequence[int], turns: Sequence[int], e: int, e_b: int) -> float:
    """Signed rotation of ``gamma`` from the midpoint of ``e`` to that of ``e_b``.

    ``turns[i]`` is the quarter-turn made between ``gamma[i]`` and
    ``gamma[i + 1]``.  Returns 0 if either edge is off the path.
    """
    gamma = list(gamma)
    if e not in gamma or e_b not in gamma:
        return 0.0
    i, j = gamma.index(e), gamma.index(e_b)
    sgn = 1 if i <= j else -1
    lo, hi = min(i, j), max(i, j)
    return sgn * sum(turns[lo:hi]) * math.pi / 2


def cover_check(d: DobrushinDomain, dec: LoopDecomposition) -> bool:
    """Every medial edge is used exactly once and every vertex is passed once per incoming edge.

    Interior medial vertices are therefore passed twice (two strands) and
    arc vertices once.
    """
    K = d.n_medial_edges
    seqs = [(list(dec.exploration), False)] + [(list(c), True) for c in dec.loops]
    used = np.zeros(K, dtype=np.int64)
    passes = np.zeros(d.n_medial_vertices, dtype=np.int64)
    for seq, closed in seqs:
        np.add.at(used, np.asarray(seq, dtype=np.int64), 1)
        pairs = list(zip(seq, seq[1:] + seq[:1])) if closed else list(zip(seq, seq[1:]))
        for e1, e2 in pairs:
            if d.head[e1] < 0 or d.head[e1] != d.tail[e2]:
                return False
            passes[d.head[e1]] += 1
    if not np.all(used == 1):
        return False
    indeg = np.zeros(d.n_medial_vertices, dtype=np.int64)
    for k in range(K):
        if d.head[k] >= 0:
            indeg[d.head[k]] += 1
    return bool(np.all(passes == indeg))


# ---------------------------------------------------------------------------
# spin


@dataclass(frozen=True)
class SpinParams:
    """Spin ``sigma`` with ``sin(sigma pi / 2) = sqrt(q) / 2`` and its companions."""

    q: float
    sigma: complex
    sigma_hat: complex
    sigma_tilde: float | None


def spin_params(q: float) -> SpinParams:
    if q <= 0:
        raise ValueError("q must be positive")
    h = math.sqrt(q) / 2
    if q <= 4:
        s = 2 / math.pi * math.asin(min(h, 1.0))
        return SpinParams(q, complex(s), complex(1 - s), None)
    t = 2 / math.pi * math.acosh(h)
    return SpinParams(q, complex(1, t), complex(0, -t), t)


# ---------------------------------------------------------------------------
# fields


@dataclass(frozen=True, eq=False)
class ObservableField:
    """One complex value per medial edge of a Dobrushin domain.

    ``std_err`` holds the real and imaginary standard errors per edge for
    Monte Carlo fields and is ``None`` for exact ones.
    """

    domain: DobrushinDomain
    values: np.ndarray
    variant: str
    q: float
    p: float
    exact: bool
    std_err: np.ndarray | None = None
    critical: bool = True
    batch_values: np.ndarray | None = field(default=None, repr=False)

    def __getitem__(self, e):
        return self.values[e]

    def to_csv(self, path) -> None:
        """Columns ``medial_edge_id,re,im,std_err_re,std_err_im``."""
        se = self.std_err if self.std_err is not None else np.zeros((len(self.values), 2))
        with open(path, "w") as fh:
            fh.write("medial_edge_id,re,im,std_err_re,std_err_im\n")
            for k, z in enumerate(self.values):
                fh.write(f"{k},{z.real:.17g},{z.imag:.17g},{se[k, 0]:.17g},{se[k, 1]:.17g}\n")


def read_field_csv(path) -> np.ndarray:
    """Complex values and standard errors from a field CSV."""
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 1] + 1j * rows[:, 2], rows[:, 3:5]


def _phases(q: float, n_w: int, off: int, hat: bool) -> np.ndarray:
    """Weight per winding slot for F (``hat=False``) or F-hat."""
    w = (np.arange(n_w) - off) * math.pi / 2
    if q == 4:
        return w * np.exp(1j * w) if not hat else w.astype(complex)
    sp = spin_params(q)
    s = sp.sigma_hat if hat else sp.sigma
    return np.exp(1j * s * w)


def exact_winding_table(d: DobrushinDomain, q: float, p: float | None = None):
    """Exact ``acc[e, W + off] / Z`` table and the offset ``off``.

    Also returns the pair ``(lo, hi)`` of extreme values of
    ``o + 2k - #loops`` over all configurations (constant when the loop
    weights reproduce the random-cluster weights).
    """
    if d.n_free > MAX_FREE:
        raise TooLarge(f"{d.n_free} free edges exceed the exact budget of {MAX_FREE}")
    p = p_critical(q) if p is None else p
    K = d.n_medial_edges
    off = K + 4
    acc = np.zeros((K, 2 * off + 1), dtype=np.float64)
    stats = np.zeros(3)
    g = d.primal
    _exact_kernel(d.free_vertices.astype(np.int64), _base_state(d), *_tables(d), d.e_a, d.start,
                  d.medial_to_primal, g.edges[:, 0].copy(), g.edges[:, 1].copy(), g.n_vertices,
                  float(p), float(q), off, acc, stats)
    return acc / stats[0], off, (int(stats[1]), int(stats[2]))


def _mc_table(d: DobrushinDomain, q: float, p: float, sweeps: int, burn_in: int, batches: int, seed: int,
              method: str, chunk: int = 20000):
    from .mc import ChainState

    rand_v = np.array([v for v in range(d.n_medial_vertices)
                       if d.vstate[v] == RANDOM], dtype=np.int64)
    if any(d.vstate[v] == FORCED_CLOSED and d.medial_to_primal[v] >= 0 for v in range(d.n_medial_vertices)):
        raise ValueError("Monte Carlo fields need a domain without edges held closed")
    g = d.primal
    st = ChainState(g, BoundaryPartition.free(g), ModelParams(p, q), seed=seed, forced_open=d.forced_open,
                    method=method)
    if burn_in:
        st.run(burn_in)
    K = d.n_medial_edges
    off = K + 4
    acc = np.zeros((batches, K, 2 * off + 1), dtype=np.float64)
    per = sweeps // batches
    done = 0
    while done < per * batches:
        nb = min(chunk, per * batches - done)
        cfg = st.run(nb, record_bits=True)
        batch_of = (np.arange(done, done + nb) // per).astype(np.int64)
        _mc_kernel(cfg, _base_state(d), rand_v, d.medial_to_primal, *_tables(d), d.e_a, d.start, off, acc,
                   batch_of)
        done += nb
    return acc / per, off


def observable_field(d: DobrushinDomain, q: float, mode: str = "exact", *, p: float | None = None,
                     with_F: bool = False, sweeps: int = 100000, burn_in: int = 1000, batches: int = 32,
                     seed: int = 0, method: str = "cm"):
    """The field F-hat (and F when ``with_F``) on ``d``.

    Parameters
    ----------
    mode : {"exact", "mc"}
    p : float, optional
        Defaults to ``p_c(q)``; other values give fields flagged
        ``critical=False``.
    """
    pc = p_critical(q)
    p = pc if p is None else p
    crit = abs(p - pc) < 1e-15
    if mode == "exact":
        table, off, _ = exact_winding_table(d, q, p)
        out = []
        for hat in (True, False) if with_F else (True,):
            vals = table @ _phases(q, table.shape[1], off, hat)
            out.append(ObservableField(d, vals, "Fhat" if hat else "F", q, p, True, critical=crit))
    elif mode == "mc":
        table, off = _mc_table(d, q, p, sweeps, burn_in, batches, seed, method)
        out = []
        for hat in (True, False) if with_F else (True,):
            bv = table @ _phases(q, table.shape[2], off, hat)
            se = np.stack([bv.real.std(axis=0, ddof=1), bv.imag.std(axis=0, ddof=1)], axis=1) / math.sqrt(batches)
            out.append(ObservableField(d, bv.mean(axis=0), "Fhat" if hat else "F", q, p, False, se,
                                       critical=crit, batch_values=bv))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return (out[0], out[1]) if with_F else out[0]


def path_probabilities(d: DobrushinDomain, q: float, p: float | None = None) -> np.ndarray:
    """Exact probability that each medial edge lies on ``gamma``."""
    table, _, _ = exact_winding_table(d, q, p)
    return table.sum(axis=1)


# ---------------------------------------------------------------------------
# contour integrals and vertex sums


def _edge_lookup(d: DobrushinDomain) -> dict:
    out = {}
    cut = d.ext_a == d.mcoords[d.b_medial] and d.ext_b == d.mcoords[d.a_medial]
    for k in range(d.n_medial_edges):
        if cut and k in (d.e_a, d.e_b):
            continue
        t, h = d.edge_points(k)
        out[frozenset((t, h))] = k
    return out


def _doubled(z) -> tuple:
    if isinstance(z, complex):
        z = (z.real, z.imag)
    x, y = 2 * z[0], 2 * z[1]
    if abs(x - round(x)) > 1e-9 or abs(y - round(y)) > 1e-9:
        raise InvalidContour(f"{z} is not a vertex of the primal or dual lattice")
    x, y = int(round(x)), int(round(y))
    if (x + y) % 2:
        raise InvalidContour(f"{z} is not a vertex of the primal or dual lattice")
    return x, y


def contour_edges(d: DobrushinDomain, contour: Sequence) -> list[tuple[complex, int]]:
    """Steps ``(z_{i+1} - z_i, crossed medial edge)`` of a closed contour."""
    pts = [_doubled(z) for z in contour]
    if len(pts) == 0:
        return []
    if pts[0] != pts[-1]:
        raise InvalidContour("contour is not closed")
    look = _edge_lookup(d)
    used = set()
    out = []
    for z0, z1 in zip(pts, pts[1:]):
        dx, dy = z1[0] - z0[0], z1[1] - z0[1]
        if abs(dx) != 1 or abs(dy) != 1:
            raise InvalidContour(f"{z0} and {z1} are not adjacent")
        step = frozenset((z0, z1))
        if step in used:
            raise InvalidContour("contour is not edge-avoiding")
        used.add(step)
        m1, m2 = (z0[0] + dx, z0[1]), (z0[0], z0[1] + dy)
        k = look.get(frozenset((m1, m2)))
        if k is None:
            raise InvalidContour(f"step {z0} -> {z1} crosses no medial edge of the domain")
        out.append((complex(dx, dy) / 2, k))
    return out


def contour_integral(fld: ObservableField, contour: Sequence) -> complex:
    """Discrete contour integral ``sum (z_{i+1} - z_i) F({z_i, z_{i+1}}*)``.

    ``contour`` lists points of the primal and dual lattices in true
    coordinates (complex numbers or pairs), first point repeated at the end.
    """
    return complex(sum(dz * fld.values[k] for dz, k in contour_edges(fld.domain, contour)))


def elementary_contour(d: DobrushinDomain, v: int) -> list[complex]:
    """Counterclockwise contour through the four faces around medial vertex ``v``."""
    x, y = d.mcoords[v]
    pts = [(x + 1, y), (x, y + 1), (x - 1, y), (x, y - 1), (x + 1, y)]
    return [complex(a / 2, b / 2) for a, b in pts]


def medial_degrees(d: DobrushinDomain) -> np.ndarray:
    deg = np.zeros(d.n_medial_vertices, dtype=np.int64)
    for k in range(d.n_medial_edges):
        for v in (d.tail[k], d.head[k]):
            if v >= 0:
                deg[v] += 1
    return deg


def vertex_sum(fld: ObservableField, V: Sequence[int], values: np.ndarray | None = None) -> complex:
    """``sum eta(e) F-hat(e)`` over edges with exactly one endpoint in ``V``.

    ``eta`` is +1 for edges pointing into ``V`` and -1 for edges leaving it.
    """
    d = fld.domain
    Vs = {int(v) for v in V}
    if not Vs:
        return 0j
    deg = medial_degrees(d)
    for v in Vs:
        if not 0 <= v < d.n_medial_vertices or deg[v] != 4:
            raise InvalidVertexSet(f"medial vertex {v} lacks four incident edges")
    vals = fld.values if values is None else values
    tot = 0j
    for k in range(d.n_medial_edges):
        hin = d.head[k] in Vs
        tin = d.tail[k] in Vs
        if hin and not tin:
            tot += vals[k]
        elif tin and not hin:
            tot -= vals[k]
    return complex(tot)


def vertex_sum_check(fld: ObservableField, V: Sequence[int]):
    """Residual of the vertex sum; Monte Carlo fields also return its standard error."""
    r = vertex_sum(fld, V)
    if fld.exact or fld.batch_values is None:
        return r
    bv = np.array([vertex_sum(fld, V, b) for b in fld.batch_values])
    B = len(bv)
    se = complex(bv.real.std(ddof=1) / math.sqrt(B), bv.imag.std(ddof=1) / math.sqrt(B))
    return r, se


def cr_residual(fld: ObservableField, v: int) -> complex:
    """``F(A) - F(C) - i (F(D) - F(B))`` around medial vertex ``v``.

    ``A, B, C, D`` are the north-east, north-west, south-west and south-east
    edges, a counterclockwise labelling.  This is the labelling for which the
    local relation is the elementary contour integral divided by ``1 + i``
    (up to a factor), so it vanishes together with the contour integrals.
    """
    d = fld.domain
    x, y = d.mcoords[v]
    look = _edge_lookup(d)
    around = [(x + 1, y + 1), (x - 1, y + 1), (x - 1, y - 1), (x + 1, y - 1)]
    ks = []
    for n in around:
        k = look.get(frozenset(((x, y), n)))
        if k is None:
            raise InvalidVertexSet(f"medial vertex {v} lacks four incident edges")
        ks.append(k)
    A, B, C, D = (fld.values[k] for k in ks)
    return complex(A - C - 1j * (D - B))


# ---------------------------------------------------------------------------
# boundary windings


def boundary_winding_table(d: DobrushinDomain) -> dict[int, int]:
    """Deterministic winding (quarter-turns) to ``e_b`` of every arc edge.

    Computed by walking the arc containing the edge to ``b`` and turning
    into ``e_b``; ``e_a`` adds the turn at ``a`` onto the first step of
    the ``ab`` arc.
    """
    out = {d.e_b: 0}
    first = None
    for path in (d.ab, d.ba):
        if len(path) < 2:
            continue
        pts = list(path) + [d.ext_b]
        for i in range(len(path) - 1):
            k = d.find_edge(pts[i], pts[i + 1])
            out[k] = sum(turn(pts[j - 1], pts[j], pts[j + 1]) for j in range(i + 1, len(pts) - 1))
            if path is d.ab and i == 0:
                first = k
    out[d.e_a] = turn(d.ext_a, d.ab[0], d.ab[1]) + out[first]
    return out


def observed_windings(table: np.ndarray, off: int, e: int) -> set[int]:
    """Winding values carrying positive weight at edge ``e`` in an exact table."""
    return {int(i - off) for i in np.flatnonzero(table[e] > 0)}


def loop_weight_check(d: DobrushinDomain, q: float) -> bool:
    """At ``p_c`` the weight is proportional to ``sqrt(q)^#loops``.

    Checked by verifying that ``o + 2k - #loops`` is constant over all
    configurations.
    """
    _, _, (lo, hi) = exact_winding_table(d, q)
    return lo == hi


__all__ = [
    "LoopDecomposition", "SpinParams", "ObservableField", "trace_loops", "winding", "spin_params",
    "observable_field", "contour_integral", "contour_edges", "elementary_contour", "vertex_sum",
    "vertex_sum_check", "cr_residual", "boundary_winding_table", "exact_winding_table", "loop_weight_check",
    "path_probabilities", "cover_check", "vertex_states", "medial_degrees", "observed_windings",
]
