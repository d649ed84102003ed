"""Frontier dynamic programming for random-cluster measures on grid graphs.

Edges are processed one at a time while a dictionary maps frontier states
to accumulated weights.  A state records, for the wired cluster structure
and for every tracked event, the partition of the current frontier (plus
one slot per wired block) into classes, per-class source/target flags and
whether the event has already occurred.  Used where brute force over
``2^|E|`` configurations is out of reach (``|E|`` around 40).
"""

from __future__ import annotations

import math
from collections import defaultdict
from typing import Sequence

from .errors import GeometryOutOfRange
from .events import parse_event
from .lattice import BoundaryPartition, FiniteGraph
from .model import ModelParams


def _relabel(labels):
    m, out = {}, []
    for x in labels:
        out.append(m.setdefault(x, len(m)))
    return tuple(out)


class _Tracker:
    """Connectivity question tracked during the sweep."""

    def __init__(self, wired: bool, edges, src, tgt, edge_event=-1):
        self.wired = wired
        self.edges = edges  # set of edge ids or None for all
        self.src = set(src)
        self.tgt = set(tgt)
        self.edge_event = edge_event


def _trackers(g, xi, specs):
    out = []
    for s in specs:
        s = parse_event(s)
        if s.kind == "edge_open":
            e = s.args[0] if len(s.args) == 1 else g.edge(*s.args)
            out.append(_Tracker(False, set(), [], [], edge_event=e))
        elif s.kind == "conn":
            out.append(_Tracker(True, None, [g.vertex(s.args[0])], [g.vertex(s.args[1])]))
        elif s.kind == "onearm":
            n = s.args[0]
            tgt = [v for v, c in enumerate(g.coords) if max(abs(c[0]), abs(c[1])) == n]
            out.append(_Tracker(True, None, [g.vertex((0, 0))], tgt))
        elif s.kind in ("Ch", "Cv"):
            (x0, y0), (x1, y1) = s.args
            inside = {v for v, c in enumerate(g.coords) if x0 <= c[0] <= x1 and y0 <= c[1] <= y1}
            if not inside:
                raise GeometryOutOfRange(s.id)
            axis = 0 if s.kind == "Ch" else 1
            a, b = (x0, x1) if axis == 0 else (y0, y1)
            edges = {k for k, (u, v) in enumerate(g.edges) if u in inside and v in inside}
            out.append(_Tracker(False, edges,
                                [v for v in inside if g.coords[v][axis] == a],
                                [v for v in inside if g.coords[v][axis] == b]))
        else:
            raise ValueError(f"event {s.id} is not supported by the transfer routine")
    return out


def transfer_distribution(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None,
                          events: Sequence = ()) -> dict:
    """Exact joint law of boolean events.

    Returns a dict mapping a tuple of event outcomes to its probability.
    Supported events: ``edge_open``, ``conn``, ``onearm``, ``Ch``, ``Cv``.
    """
    out, _ = _sweep(g, params, xi, events)
    Z = math.fsum(out.values())
    return {key: val / Z for key, val in out.items()}


def transfer_log_partition(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None = None) -> float:
    """``log Z`` computed by the frontier sweep."""
    out, log_scale = _sweep(g, params, xi, ())
    return log_scale + math.log(math.fsum(out.values()))


def _sweep(g, params, xi, events):
    xi = xi if xi is not None else BoundaryPartition.free(g)
    p, q = params.p, params.q
    trackers = [_Tracker(True, None, [], [])] + _trackers(g, xi, events)
    T = len(trackers)
    block = xi.block_of()
    G = xi.n_ghosts
    last_use = {}
    for k, (u, v) in enumerate(g.edges):
        last_use[int(u)] = k
        last_use[int(v)] = k
    # isolated vertices contribute a cluster unless wired
    log_const = sum(math.log(q) for v in range(g.n_vertices) if g.degree[v] == 0 and block[v] < 0)

    frontier: list[int] = []
    ghost_labels = tuple(range(G))
    init_part = (ghost_labels, (0,) * G, 0)
    states = {tuple(init_part for _ in range(T)): 1.0}

    def add_vertex(states, v):
        pos = len(frontier)
        new = defaultdict(float)
        for st, w in states.items():
            parts = []
            for t, (lab, fl, done) in zip(trackers, st):
                lab = lab + (max(lab, default=-1) + 1,)
                f = (1 if v in t.src else 0) | (2 if v in t.tgt else 0)
                fl = fl + (f,)
                if t.wired and block[v] >= 0:
                    lab, fl, done = _merge(lab, fl, done, block[v], G + pos)
                if f == 3:
                    done = 1
                parts.append((_relabel(lab), fl, done))
            new[tuple(parts)] += w
        frontier.append(v)
        return new

    def remove_vertex(states, v):
        pos = G + frontier.index(v)
        new = defaultdict(float)
        for st, w in states.items():
            parts = []
            for ti, (lab, fl, done) in enumerate(st):
                if ti == 0:
                    alone = sum(1 for x in lab if x == lab[pos]) == 1
                    if alone:
                        w = w * q
                lab = lab[:pos] + lab[pos + 1:]
                fl = fl[:pos] + fl[pos + 1:]
                parts.append((_relabel(lab), fl, done))
            new[tuple(parts)] += w
        frontier.remove(v)
        return new

    scale = 0.0
    for k, (u, v) in enumerate(g.edges):
        u, v = int(u), int(v)
        for x in (u, v):
            if x not in frontier:
                states = add_vertex(states, x)
        pu, pv = G + frontier.index(u), G + frontier.index(v)
        new = defaultdict(float)
        for st, w in states.items():
            new[st] += w * (1 - p)
            parts = []
            for t, (lab, fl, done) in zip(trackers, st):
                if t.edge_event == k:
                    done = 1
                elif t.edge_event < 0 and (t.edges is None or k in t.edges):
                    lab, fl, done = _merge(lab, fl, done, pu, pv)
                    lab = _relabel(lab)
                parts.append((lab, fl, done))
            new[tuple(parts)] += w * p
        states = new
        for x in (u, v):
            if last_use[x] == k:
                states = remove_vertex(states, x)
        # keep numbers in range
        mx = max(states.values())
        if mx > 0:
            scale += math.log(mx)
            states = {s: w / mx for s, w in states.items()}

    # remaining ghost classes are clusters
    out = defaultdict(float)
    for st, w in states.items():
        lab0 = st[0][0]
        w = w * q ** len(set(lab0))
        key = tuple(bool(part[2]) for part in st[1:])
        out[key] += w
    return out, scale + log_const


def _merge(lab, fl, done, i, j):
    a, b = lab[i], lab[j]
    if a == b:
        return lab, fl, done
    fa = 0
    for x, f in zip(lab, fl):
        if x == a or x == b:
            fa |= f
    lab = tuple(a if x == b else x for x in lab)
    fl = tuple(fa if x == a else f for x, f in zip(lab, fl))
    if fa == 3:
        done = 1
    return lab, fl, done


def transfer_probability(g: FiniteGraph, params: ModelParams, xi: BoundaryPartition | None,
                         events: Sequence) -> float:
    """Probability that all listed events occur."""
    dist = transfer_distribution(g, params, xi, events)
    return math.fsum(v for k, v in dist.items() if all(k))

