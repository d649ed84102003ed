"""Markov chain samplers for the random-cluster measure.

Three updates are provided: single-bond heat-bath, Chayes-Machta (real
``q >= 1``) and Swendsen-Wang (integer ``q``).  Randomness comes from a
Philox counter-based generator keyed by ``(seed, chain)``.  One sweep
consumes a fixed block of ``W`` uniforms: ``W = |E|`` for heat-bath and
``W = |V| + G + |E|`` for cluster updates (one uniform per union-find node,
then one per edge).  The uniform used at slot ``j`` of sweep ``s`` is
therefore draw number ``s * W + j`` of the stream, so a stream is indexed
by ``(seed, chain, sweep, edge)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from ._kernels import connected_without, eval_observables, uf_find, uf_union, wired_clusters
from .errors import InvalidQ
from .events import compile_observables, parse_event
from .lattice import BoundaryPartition, FiniteGraph
from .model import BondConfiguration, ModelParams

HEATBATH, CHAYES_MACHTA, SWENDSEN_WANG = "heatbath", "cm", "sw"
_CODES = {HEATBATH: 0, CHAYES_MACHTA: 1, SWENDSEN_WANG: 2}


# ---------------------------------------------------------------------------
# kernels


@njit(cache=True)
def _heatbath_edge(bits, e, u_e, eu, ev, ptr, nbr, eid, p, q, mA, mB, qa, qb, stamp):
    conn = connected_without(bits, e, eu[e], ev[e], ptr, nbr, eid, mA, mB, qa, qb, stamp)
    prob = p if conn else p / (p + q * (1.0 - p))
    bits[e] = 1 if u_e < prob else 0
    return conn


@njit(cache=True)
def _heatbath_sweep(bits, forced, U, eu, ev, ptr, nbr, eid, p, q, mA, mB, qa, qb, stamp):
    for e in range(eu.shape[0]):
        if forced[e]:
            continue
        stamp[0] += 1
        _heatbath_edge(bits, e, U[e], eu, ev, ptr, nbr, eid, p, q, mA, mB, qa, qb, stamp[0])


@njit(cache=True)
def _cm_sweep(bits, forced, U, eu, ev, block_of, n_nodes, p, q, parent, active):
    wired_clusters(bits, eu, ev, block_of, n_nodes, parent)
    inv = 1.0 / q
    for i in range(n_nodes):
        r = uf_find(parent, i)
        if r == i:
            active[i] = 1 if U[i] < inv else 0
    for i in range(n_nodes):
        active[i] = active[uf_find(parent, i)]
    for e in range(eu.shape[0]):
        if forced[e]:
            bits[e] = 1
            continue
        a = active[eu[e]]
        b = active[ev[e]]
        if a and b:
            bits[e] = 1 if U[n_nodes + e] < p else 0
        elif a != b:
            bits[e] = 0


@njit(cache=True)
def _sw_sweep(bits, forced, U, eu, ev, block_of, n_nodes, n_ghosts, p, q, parent, colour):
    wired_clusters(bits, eu, ev, block_of, n_nodes, parent)
    nv = block_of.shape[0]
    for i in range(n_nodes):
        if uf_find(parent, i) == i:
            c = int(U[i] * q)
            colour[i] = c if c < q else q - 1
    if n_ghosts == 1:
        colour[uf_find(parent, nv)] = 0
    for i in range(n_nodes):
        colour[i] = colour[uf_find(parent, i)]
    for e in range(eu.shape[0]):
        if forced[e]:
            bits[e] = 1
            continue
        if colour[eu[e]] == colour[ev[e]]:
            bits[e] = 1 if U[n_nodes + e] < p else 0
        else:
            bits[e] = 0


@njit(cache=True)
def _run_block(method, bits, forced, U, eu, ev, block_of, n_nodes, n_ghosts, ptr, nbr, eid, p, q,
               mA, mB, qa, qb, stamp, parent, scratch,
               n_obs, graph_id, edge_off, aa, ab, eidx, emode, src_off, src, tgt_off, tgt, kind, negate,
               p2, mark, cond_edges, out, spins, bits_out):
    nsw = U.shape[0]
    m = n_obs.shape[0]
    res = np.empty(max(m, 1), dtype=np.float64)
    nv = block_of.shape[0]
    for s in range(nsw):
        if method == 0:
            _heatbath_sweep(bits, forced, U[s], eu, ev, ptr, nbr, eid, p, q, mA, mB, qa, qb, stamp)
        elif method == 1:
            _cm_sweep(bits, forced, U[s], eu, ev, block_of, n_nodes, p, q, parent, scratch)
        else:
            _sw_sweep(bits, forced, U[s], eu, ev, block_of, n_nodes, n_ghosts, p, q, parent, scratch)
            if spins.shape[0] > 0:
                for v in range(nv):
                    spins[s, v] = scratch[v]
        if bits_out.shape[0] > 0:
            for e in range(bits.shape[0]):
                bits_out[s, e] = bits[e]
        if m > 0:
            eval_observables(bits, n_obs, graph_id, edge_off, aa, ab, eidx, emode,
                             src_off, src, tgt_off, tgt, kind, negate, p2, mark, res)
            for j in range(m):
                out[s, j] = res[j]
        for j in range(cond_edges.shape[0]):
            e = cond_edges[j]
            stamp[0] += 1
            conn = connected_without(bits, e, eu[e], ev[e], ptr, nbr, eid, mA, mB, qa, qb, stamp[0])
            out[s, m + j] = p if conn else p / (p + q * (1.0 - p))


# ---------------------------------------------------------------------------
# chain state


class ChainState:
    """State of one Markov chain on ``graph`` with boundary condition ``xi``.

    Parameters
    ----------
    graph : FiniteGraph
    xi : BoundaryPartition, optional
        Free when omitted.
    params : ModelParams
    seed, chain : int
        Key of the Philox stream.
    forced_open : sequence of int
        Edges held open in every state (e.g. a Dobrushin wired arc).
    bits : array, optional
        Initial configuration; all closed by default.
    method : str
        Default update: ``heatbath``, ``cm`` or ``sw``.
    """

    def __init__(self, graph: FiniteGraph, xi: BoundaryPartition | None, params: ModelParams,
                 seed: int = 0, chain: int = 0, forced_open: Sequence[int] = (), bits=None,
                 method: str = CHAYES_MACHTA):
        self.graph = graph
        self.xi = xi if xi is not None else BoundaryPartition.free(graph)
        if self.xi.graph is not graph:
            self.xi = BoundaryPartition(graph, self.xi.blocks, self.xi.label)
        self.params = params
        self.seed = int(seed)
        self.chain = int(chain)
        self.method = method
        self.sweep = 0
        self.rng = np.random.Generator(np.random.Philox(key=np.array([self.seed, self.chain], dtype=np.uint64)))
        E = graph.n_edges
        self.forced = np.zeros(E, dtype=np.uint8)
        self.forced[list(forced_open)] = 1
        self.bits = np.zeros(E, dtype=np.uint8) if bits is None else np.array(bits, dtype=np.uint8)
        self.bits[self.forced == 1] = 1
        self.eu = graph.edges[:, 0].copy()
        self.ev = graph.edges[:, 1].copy()
        self.block_of = self.xi.block_of()
        self.n_ghosts = self.xi.n_ghosts
        self.n_nodes = graph.n_vertices + self.n_ghosts
        self.ptr, self.nbr, self.eid = _augmented_csr(graph, self.block_of, self.n_ghosts)
        nn = self.n_nodes
        self._mA = np.zeros(nn, dtype=np.int64)
        self._mB = np.zeros(nn, dtype=np.int64)
        self._qa = np.empty(nn, dtype=np.int64)
        self._qb = np.empty(nn, dtype=np.int64)
        self._stamp = np.zeros(1, dtype=np.int64)
        self._parent = np.empty(nn, dtype=np.int64)
        self._scratch = np.zeros(nn, dtype=np.int64)
        self._empty = None

    @property
    def configuration(self) -> BondConfiguration:
        return BondConfiguration(self.graph, self.bits)

    def width(self, method: str | None = None) -> int:
        """Uniforms consumed by one sweep of ``method``."""
        method = method or self.method
        return self.graph.n_edges if method == HEATBATH else self.n_nodes + self.graph.n_edges

    def check_method(self, method: str) -> None:
        q = self.params.q
        if method == CHAYES_MACHTA and q < 1:
            raise InvalidQ("Chayes-Machta needs q >= 1")
        if method == SWENDSEN_WANG and (q != int(q) or q < 1):
            raise InvalidQ("Swendsen-Wang needs an integer q")
        if method not in _CODES:
            raise ValueError(f"unknown method {method!r}")

    def connected_without(self, e: int) -> bool:
        """Are the endpoints of ``e`` joined in (omega minus e)^xi?"""
        self._stamp[0] += 1
        return bool(connected_without(self.bits, e, self.eu[e], self.ev[e], self.ptr, self.nbr, self.eid,
                                      self._mA, self._mB, self._qa, self._qb, self._stamp[0]))

    def open_probability(self, e: int) -> float:
        """Heat-bath probability of opening ``e`` given the other edges."""
        return self.params.open_prob(self.connected_without(e))

    def run(self, sweeps: int, method: str | None = None, observables=None, conditional_edges=(),
            record_spins: bool = False, record_bits: bool = False, block: int | None = None):
        """Advance ``sweeps`` sweeps, recording observables after each one.

        Returns an array of shape ``(sweeps, m + len(conditional_edges))``
        (and the spin array when ``record_spins`` with Swendsen-Wang).  The
        extra columns hold the heat-bath conditional open probability of
        each edge in ``conditional_edges``.  With ``record_bits`` the
        configuration after every sweep is returned instead, as a
        ``(sweeps, E)`` array.
        """
        method = method or self.method
        self.check_method(method)
        if observables is None:
            if self._empty is None:
                self._empty = compile_observables(self.graph, self.xi, [])
            observables = self._empty
        comp = observables
        cond = np.asarray(conditional_edges, dtype=np.int64)
        m = len(comp)
        W = self.width(method)
        out = np.empty((sweeps, m + len(cond)), dtype=np.float64)
        spins = np.zeros((sweeps if record_spins else 0, self.graph.n_vertices), dtype=np.int64)
        bits_out = np.zeros((sweeps if record_bits else 0, self.graph.n_edges), dtype=np.uint8)
        if block is None:
            block = max(1, min(sweeps, (1 << 21) // max(W, 1)))
        p2 = np.empty(max(comp.max_nodes, 1), dtype=np.int64)
        mark = np.zeros(comp.max_nodes + 1, dtype=np.int64)
        done = 0
        while done < sweeps:
            nb = min(block, sweeps - done)
            U = self.rng.random((nb, W))
            _run_block(_CODES[method], self.bits, self.forced, U, self.eu, self.ev, self.block_of, self.n_nodes,
                       self.n_ghosts, self.ptr, self.nbr, self.eid, float(self.params.p), float(self.params.q),
                       self._mA, self._mB, self._qa, self._qb, self._stamp, self._parent, self._scratch,
                       *comp.args(), p2, mark, cond, out[done:done + nb],
                       spins[done:done + nb] if record_spins else spins,
                       bits_out[done:done + nb] if record_bits else bits_out)
            done += nb
        self.sweep += sweeps
        if record_bits:
            return bits_out
        return (out, spins) if record_spins else out

    def sample_configs(self, n: int, thin: int = 1, method: str | None = None) -> np.ndarray:
        """``n`` configurations, one every ``thin`` sweeps, as a ``(n, E)`` array."""
        if thin == 1:
            return self.run(n, method, record_bits=True)
        out = np.empty((n, self.graph.n_edges), dtype=np.uint8)
        for i in range(n):
            self.run(thin, method)
            out[i] = self.bits
        return out


def _augmented_csr(g: FiniteGraph, block_of: np.ndarray, n_ghosts: int):
    nv = g.n_vertices
    nbrs = [[] for _ in range(nv + n_ghosts)]
    for k, (u, v) in enumerate(g.edges):
        nbrs[int(u)].append((int(v), k))
        nbrs[int(v)].append((int(u), k))
    for v, b in enumerate(block_of):
        if b >= 0:
            nbrs[v].append((nv + int(b), -1))
            nbrs[nv + int(b)].append((v, -1))
    ptr = np.zeros(nv + n_ghosts + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in nbrs])
    flat = [t for x in nbrs for t in x]
    nbr = np.array([t[0] for t in flat], dtype=np.int64)
    eid = np.array([t[1] for t in flat], dtype=np.int64)
    return ptr, nbr, eid


# ---------------------------------------------------------------------------
# single steps


def heatbath_step(state: ChainState, e: int) -> ChainState:
    """Resample edge ``e`` from its exact conditional law."""
    if state.forced[e]:
        raise ValueError(f"edge {e} is held open by the boundary condition")
    prob = state.open_probability(e)
    state.bits[e] = 1 if state.rng.random() < prob else 0
    return state


def chayes_machta_step(state: ChainState) -> ChainState:
    """One Chayes-Machta update (single active colour)."""
    state.run(1, CHAYES_MACHTA)
    return state


def swendsen_wang_step(state: ChainState) -> ChainState:
    """One Swendsen-Wang update."""
    state.run(1, SWENDSEN_WANG)
    return state


def heatbath_transition_matrix(graph: FiniteGraph, xi: BoundaryPartition | None, params: ModelParams) -> np.ndarray:
    """Random-scan heat-bath kernel on all ``2^|E|`` configurations.

    Entry ``[a, b]`` is the probability of moving from configuration ``a`` to
    ``b`` (bit ``i`` of the index is edge ``i``) when a uniformly chosen edge
    is resampled from its conditional law.
    """
    E = graph.n_edges
    if E > 14:
        raise ValueError("transition matrices are limited to 14 edges")
    st = ChainState(graph, xi, params)
    N = 1 << E
    P = np.zeros((N, N))
    for a in range(N):
        st.bits[:] = (a >> np.arange(E)) & 1
        for e in range(E):
            pr = st.open_probability(e)
            up, down = a | (1 << e), a & ~(1 << e)
            P[a, up] += pr / E
            P[a, down] += (1 - pr) / E
    return P


# ---------------------------------------------------------------------------
# estimation


@dataclass(frozen=True)
class Estimate:
    """Batch-means estimate of an expectation."""

    event_id: str
    mean: float
    std_error: float
    n_samples: int
    n_batches: int
    seed: int


def batch_means(x: np.ndarray, batches: int) -> tuple[float, float]:
    """Mean and batch-means standard error of a series."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x) // batches * batches
    if n == 0:
        raise ValueError("not enough samples for the requested batches")
    xb = x[len(x) - n:].reshape(batches, -1).mean(axis=1)
    return float(x.mean()), float(xb.std(ddof=1) / math.sqrt(batches))


def integrated_autocorr_time(x: np.ndarray, c: float = 5.0) -> float:
    """Integrated autocorrelation time with automatic windowing."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n < 4 or x.std() == 0:
        return 0.5
    y = x - x.mean()
    f = np.fft.rfft(y, n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf /= acf[0]
    tau = 0.5
    for w in range(1, n):
        tau += acf[w]
        if w >= c * tau:
            break
    return max(float(tau), 0.5)


def burn_in_sweeps(state: ChainState, observables, method: str | None = None, pilot: int = 1000) -> int:
    """Run a pilot, then burn in for ten times the slowest autocorrelation time."""
    rec = state.run(pilot, method, observables)
    tau = max((integrated_autocorr_time(rec[:, j]) for j in range(rec.shape[1])), default=0.5)
    extra = max(0, int(math.ceil(10 * tau)) - pilot)
    if extra:
        state.run(extra, method, observables)
    return pilot + extra


def estimate(state: ChainState, spec, sweeps: int, burn_in: int | None = None, batches: int = 32,
             method: str | None = None):
    """Batch-means estimates of one or several observables.

    ``spec`` is an event id / :class:`EventSpec` (returns one
    :class:`Estimate`) or a list of them (returns a list).
    """
    single = not isinstance(spec, (list, tuple))
    specs = [parse_event(s) for s in ([spec] if single else spec)]
    if batches < 8 or sweeps < batches:
        raise ValueError("need sweeps >= batches >= 8")
    comp = compile_observables(state.graph, state.xi, specs)
    if burn_in is None:
        burn_in_sweeps(state, comp, method)
    elif burn_in > 0:
        state.run(burn_in, method, comp)
    rec = state.run(sweeps, method, comp)
    out = []
    for j, s in enumerate(specs):
        mu, se = batch_means(rec[:, j], batches)
        out.append(Estimate(s.id, mu, se, sweeps, batches, state.seed))
    return out[0] if single else out


def merge_estimates(ests: Sequence[Estimate]) -> Estimate:
    """Combine independent chains by inverse-variance-free sample weighting."""
    n = sum(e.n_samples for e in ests)
    mean = sum(e.mean * e.n_samples for e in ests) / n
    var = sum((e.n_samples / n) ** 2 * e.std_error ** 2 for e in ests)
    return Estimate(ests[0].event_id, mean, math.sqrt(var), n, sum(e.n_batches for e in ests), ests[0].seed)


def write_sample_log(path, rec: np.ndarray, ids: Sequence[str], start_sweep: int = 0) -> None:
    """CSV with columns ``sweep,event_id,value``."""
    with open(path, "w") as fh:
        fh.write("sweep,event_id,value\n")
        for s in range(rec.shape[0]):
            for j, eid in enumerate(ids):
                fh.write(f"{start_sweep + s},{eid},{rec[s, j]:.17g}\n")


def write_estimates(path, ests: Sequence[Estimate]) -> None:
    """CSV with columns ``event_id,mean,std_err,n,seed``."""
    with open(path, "w") as fh:
        fh.write("event_id,mean,std_err,n,seed\n")
        for e in ests:
            fh.write(f"{e.event_id},{e.mean:.17g},{e.std_error:.17g},{e.n_samples},{e.seed}\n")


# ---------------------------------------------------------------------------
# independent percolation


@njit(cache=True)
def _explore_onearm(n, p, U, pos0, max_samples, stamp, queue):
    """Run independent explorations of the origin cluster in ``Lambda_n``.

    Each exploration reveals edges lazily from the origin and stops as soon
    as a vertex of ``\\partial Lambda_n`` is reached.  Returns
    ``(samples, hits, pos)``; an exploration is started only if the buffer
    holds enough uniforms to finish it.
    """
    side = 2 * n + 1
    n_edges = 2 * side * (side - 1)
    pos = pos0
    done = 0
    hits = 0
    dx = (1, 0, -1, 0)
    dy = (0, 1, 0, -1)
    while done < max_samples and U.shape[0] - pos >= n_edges:
        done += 1
        stamp[0] += 1
        st = stamp[0]
        o = n * side + n
        mark = stamp[1:]
        mark[o] = st
        queue[0] = o
        h, t = 0, 1
        hit = False
        while h < t and not hit:
            v = queue[h]
            h += 1
            x, y = v % side, v // side
            for d in range(4):
                xx, yy = x + dx[d], y + dy[d]
                if xx < 0 or yy < 0 or xx >= side or yy >= side:
                    continue
                w = yy * side + xx
                if mark[w] == st:
                    continue
                u = U[pos]
                pos += 1
                if u < p:
                    if xx == 0 or yy == 0 or xx == side - 1 or yy == side - 1:
                        hit = True
                        break
                    mark[w] = st
                    queue[t] = w
                    t += 1
        if hit:
            hits += 1
    return done, hits, pos


def bernoulli_onearm(n: int, p: float, samples: int, seed: int = 0, chain: int = 0,
                     block: int = 1 << 22) -> tuple[int, int]:
    """Exact Monte Carlo of ``P_p[0 <-> boundary of Lambda_n]`` for independent percolation.

    Returns ``(hits, samples)``.  Uniforms come from the Philox stream keyed
    by ``(seed, chain)`` and are consumed one per revealed edge.
    """
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, chain], dtype=np.uint64)))
    side = 2 * n + 1
    block = max(block, 4 * side * side)
    stamp = np.zeros(side * side + 1, dtype=np.int64)
    queue = np.empty(side * side, dtype=np.int64)
    done = hits = 0
    U = rng.random(block)
    pos = 0
    while done < samples:
        d, h, pos = _explore_onearm(n, float(p), U, pos, samples - done, stamp, queue)
        done += d
        hits += h
        if done < samples:
            U = np.concatenate([U[pos:], rng.random(block)])
            pos = 0
    return hits, done
