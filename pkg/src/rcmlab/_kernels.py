"""Numba kernels shared by the exact, mc and couplings modules.

Wiring of boundary blocks uses ghost nodes: a graph with ``V`` vertices
and ``G`` non-trivial blocks has ``V + G`` union-find nodes, and every
vertex of block ``j`` is linked to node ``V + j``.  Ghost links are not
edges, so they never enter ``o(omega)``.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def uf_find(parent, x):
    r = x
    while parent[r] != r:
        r = parent[r]
    while parent[x] != r:
        nx = parent[x]
        parent[x] = r
        x = nx
    return r


@njit(cache=True)
def uf_union(parent, a, b):
    ra = uf_find(parent, a)
    rb = uf_find(parent, b)
    if ra == rb:
        return False
    if ra < rb:
        parent[rb] = ra
    else:
        parent[ra] = rb
    return True


@njit(cache=True)
def wired_clusters(bits, eu, ev, block_of, n_nodes, parent):
    """Fill ``parent`` with the clusters of omega^xi and return their number."""
    nv = block_of.shape[0]
    for i in range(n_nodes):
        parent[i] = i
    k = n_nodes
    for v in range(nv):
        b = block_of[v]
        if b >= 0:
            if uf_union(parent, v, nv + b):
                k -= 1
    for e in range(eu.shape[0]):
        if bits[e]:
            if uf_union(parent, eu[e], ev[e]):
                k -= 1
    return k


# ---------------------------------------------------------------------------
# compiled observables
#
# Observable j lives on an auxiliary graph with n_nodes[j] nodes and aux
# edges t in [edge_off[j], edge_off[j+1]).  Aux edge t joins aa[t], ab[t]
# and is passable when mode 0: bits[eidx[t]] == 1, mode 1: bits[eidx[t]] == 0,
# mode 2: always.  kind 0 returns "some source meets some target",
# kind 1 returns the number of targets meeting a source.  negate flips
# kind 0 results.  Observables sharing graph_id reuse the same union-find.
# ``mark`` has one spare trailing slot holding the running stamp, so marks
# never need clearing between calls.


@njit(cache=True)
def eval_observables(bits, n_nodes, graph_id, edge_off, aa, ab, eidx, emode,
                     src_off, src, tgt_off, tgt, kind, negate, parent, mark, out):
    m = n_nodes.shape[0]
    last = -1
    stamp = mark[mark.shape[0] - 1]
    for j in range(m):
        if graph_id[j] != last or j == 0:
            for i in range(n_nodes[j]):
                parent[i] = i
            for t in range(edge_off[j], edge_off[j + 1]):
                md = emode[t]
                if md == 2 or (md == 0 and bits[eidx[t]] == 1) or (md == 1 and bits[eidx[t]] == 0):
                    uf_union(parent, aa[t], ab[t])
            last = graph_id[j]
        stamp += 1
        for s in range(src_off[j], src_off[j + 1]):
            mark[uf_find(parent, src[s])] = stamp
        cnt = 0
        for s in range(tgt_off[j], tgt_off[j + 1]):
            if mark[uf_find(parent, tgt[s])] == stamp:
                cnt += 1
                if kind[j] == 0:
                    break
        if kind[j] == 0:
            r = 1.0 if cnt > 0 else 0.0
            if negate[j]:
                r = 1.0 - r
            out[j] = r
        else:
            out[j] = cnt
    mark[mark.shape[0] - 1] = stamp
    return out


@njit(cache=True)
def enumerate_histogram(n_free, free_edges, fixed_bits, eu, ev, block_of, n_nodes,
                        n_nodes_obs, graph_id, edge_off, aa, ab, eidx, emode,
                        src_off, src, tgt_off, tgt, kind, negate, max_nodes, start, stop):
    """Histogram ``H[mask, o, k]`` over configurations ``start <= c < stop``.

    Configuration ``c`` sets free edge ``i`` open iff bit ``i`` of ``c`` is
    set; other edges take ``fixed_bits``.  ``o`` counts open free edges and
    ``mask`` packs the boolean observables.
    """
    m = n_nodes_obs.shape[0]
    H = np.zeros((1 << m, n_free + 1, n_nodes + 1), dtype=np.int64)
    bits = fixed_bits.copy()
    parent = np.empty(n_nodes, dtype=np.int64)
    p2 = np.empty(max(max_nodes, 1), dtype=np.int64)
    mark = np.zeros(max_nodes + 1, dtype=np.int64)
    res = np.empty(max(m, 1), dtype=np.float64)
    for c in range(start, stop):
        o = 0
        for i in range(n_free):
            b = (c >> i) & 1
            bits[free_edges[i]] = b
            o += b
        k = wired_clusters(bits, eu, ev, block_of, n_nodes, parent)
        mask = 0
        if m > 0:
            eval_observables(bits, n_nodes_obs, graph_id, edge_off, aa, ab, eidx, emode,
                             src_off, src, tgt_off, tgt, kind, negate, p2, mark, res)
            for j in range(m):
                if res[j] > 0.5:
                    mask |= 1 << j
        H[mask, o, k] += 1
    return H


@njit(cache=True)
def cluster_counts_all(n_free, free_edges, fixed_bits, eu, ev, block_of, n_nodes):
    """Cluster count ``k(omega^xi)`` for every configuration of the free edges."""
    N = 1 << n_free
    out = np.empty(N, dtype=np.int64)
    bits = fixed_bits.copy()
    parent = np.empty(n_nodes, dtype=np.int64)
    for c in range(N):
        for i in range(n_free):
            bits[free_edges[i]] = (c >> i) & 1
        out[c] = wired_clusters(bits, eu, ev, block_of, n_nodes, parent)
    return out


# ---------------------------------------------------------------------------
# connectivity for heat-bath updates


@njit(cache=True)
def connected_without(bits, e, u, v, ptr, nbr, eid, markA, markB, qa, qb, stamp):
    """Are ``u`` and ``v`` joined in (omega minus e)^xi?

    Alternating breadth-first search from both ends over open edges and
    ghost links (``eid == -1``), stopping as soon as the searches meet or
    one side is exhausted.  ``stamp`` must be fresh for every call.
    """
    if u == v:
        return True
    ha, ta, hb, tb = 0, 1, 0, 1
    qa[0] = u
    qb[0] = v
    markA[u] = stamp
    markB[v] = stamp
    while ha < ta and hb < tb:
        if ta - ha <= tb - hb:
            x = qa[ha]
            ha += 1
            for j in range(ptr[x], ptr[x + 1]):
                k = eid[j]
                if k == e:
                    continue
                if k >= 0 and bits[k] == 0:
                    continue
                y = nbr[j]
                if markB[y] == stamp:
                    return True
                if markA[y] != stamp:
                    markA[y] = stamp
                    qa[ta] = y
                    ta += 1
        else:
            x = qb[hb]
            hb += 1
            for j in range(ptr[x], ptr[x + 1]):
                k = eid[j]
                if k == e:
                    continue
                if k >= 0 and bits[k] == 0:
                    continue
                y = nbr[j]
                if markA[y] == stamp:
                    return True
                if markB[y] != stamp:
                    markB[y] = stamp
                    qb[tb] = y
                    tb += 1
    return False
