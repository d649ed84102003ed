import itertools

import numpy as np
import pytest

from rcmlab.errors import NoDual, PartitionMismatch
from rcmlab.lattice import (BoundaryPartition, build_box, build_cover_box, build_dual, build_graph, build_k2,
                            build_medial, build_rectangle, build_slit_box, medial_in_out, parse_graph_spec,
                            read_graph, validate_graph, write_graph)


def _edge_coords(g):
    return {frozenset((g.coords[int(u)], g.coords[int(v)])) for u, v in g.edges}


@pytest.mark.parametrize("n,nv,ne,nb", [(0, 1, 0, 1), (1, 9, 12, 8), (2, 25, 40, 16), (3, 49, 84, 24)])
def test_box_counts(n, nv, ne, nb):
    g = build_box(n)
    assert (g.n_vertices, g.n_edges, len(g.boundary)) == (nv, ne, nb)
    validate_graph(g)


def test_box0_boundary_is_origin():
    g = build_box(0)
    assert [g.coords[v] for v in g.boundary] == [(0, 0)]


def test_box1_boundary_excludes_centre():
    g = build_box(1)
    assert g.vertex((0, 0)) not in g.boundary


def test_dense_indices_are_bijective():
    g = build_rectangle(-2, 3, 0, 2)
    assert sorted(g.index.values()) == list(range(g.n_vertices))
    assert all(g.vertex(c) == i for i, c in enumerate(g.coords))
    for k, (u, v) in enumerate(g.edges):
        assert g.find_edge(int(u), int(v)) == k and u < v


@pytest.mark.parametrize("builder", [lambda: build_box(3), lambda: build_rectangle(0, 4, -1, 2),
                                     lambda: build_slit_box(3)[0], lambda: build_cover_box(2, 2)])
def test_boundary_is_degree_below_four(builder):
    g = builder()
    assert set(g.boundary) == {v for v in range(g.n_vertices) if g.degree[v] < 4}
    for v, inc in enumerate(g.incidence):
        for k in inc:
            assert v in g.edges[k]


def test_dual_of_box1():
    g = build_box(1)
    d, bij = build_dual(g)
    assert d.n_edges == 12 and d.n_vertices == 12
    expect = {(sx * 0.5, sy * 0.5) for sx in (1, -1) for sy in (1, -1)}
    expect |= {(sx * 1.5, sy * 0.5) for sx in (1, -1) for sy in (1, -1)}
    expect |= {(sx * 0.5, sy * 1.5) for sx in (1, -1) for sy in (1, -1)}
    assert set(d.coords) == expect
    e = g.edge((0, 0), (1, 0))
    u, v = d.edges[bij[e]]
    assert {d.coords[int(u)], d.coords[int(v)]} == {(0.5, -0.5), (0.5, 0.5)}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_dual_involution(n):
    g = build_box(n)
    d, b1 = build_dual(g)
    dd, b2 = build_dual(d)
    assert dd.n_edges == g.n_edges
    # the double dual of a box edge crosses it back: same midpoint, same orientation
    for k in range(g.n_edges):
        a, b = (np.array(g.coords[int(x)], float) for x in g.edges[k])
        c, e = (np.array(dd.coords[int(x)], float) for x in dd.edges[b2[b1[k]]])
        assert np.allclose((a + b) / 2, (c + e) / 2)
        assert abs(np.dot(b - a, e - c)) == pytest.approx(1.0)


def test_medial_rejects_dual():
    m = build_medial(build_box(1))
    with pytest.raises(NoDual):
        build_dual(m)


def test_medial_single_edge():
    m = build_medial(build_k2())
    assert m.n_vertices == 1 and m.n_edges == 0


def test_medial_box1_vertex_count():
    assert build_medial(build_box(1)).n_vertices == 12


def test_medial_regularity_box3():
    g = build_box(3)
    m = build_medial(g)
    ins, outs = medial_in_out(m)
    for k in range(g.n_edges):
        u, v = (int(x) for x in g.edges[k])
        if g.degree[u] == 4 and g.degree[v] == 4:
            assert len(ins[k]) == 2 and len(outs[k]) == 2
    # around every interior primal vertex the medial edges form a directed 4-cycle
    succ = {int(t): [] for t in range(m.n_vertices)}
    for t, h in m.edges:
        succ[int(t)].append(int(h))
    for v in range(g.n_vertices):
        if g.degree[v] != 4:
            continue
        ring = set(g.incidence[v])
        k0 = next(iter(ring))
        walk = [k0]
        for _ in range(4):
            nxt = [h for h in succ[walk[-1]] if h in ring]
            walk.append(nxt[0])
        assert walk[-1] == k0 and set(walk) == ring


def test_slit_box():
    g, xi = build_slit_box(1)
    assert g.n_edges == 11
    assert all(g.has_vertex(c) for c in [(0, 0), (0, 1)])
    g2, xi2 = build_slit_box(2)
    (blk,) = xi2.nontrivial_blocks()
    assert {g2.coords[v] for v in blk} == {(0, 0), (0, 1), (0, 2)}


def test_cover_box_rules():
    g = build_cover_box(1, 1)
    assert g.n_vertices == 27
    g = build_cover_box(2, 2)
    assert g.index[(0, -1, 0)] is not None
    assert (min(g.vertex((0, -1, 0)), g.vertex((1, -1, 1))), max(g.vertex((0, -1, 0)), g.vertex((1, -1, 1)))) \
        in g.edge_index
    u, v = g.vertex((0, -1, 0)), g.vertex((1, -1, 0))
    assert (min(u, v), max(u, v)) not in g.edge_index


def test_cover_box_degree_four_inside():
    n, h = 2, 2
    g = build_cover_box(n, h)

    def rule_neighbours(x1, x2, x3):
        out = [(x1, x2 + 1, x3), (x1, x2 - 1, x3)]
        for dx in (1, -1):
            y1 = x1 + dx
            shift = 0
            if x2 < 0 and {x1, y1} == {0, 1}:
                shift = 1 if dx == 1 else -1
            out.append((y1, x2, x3 + shift))
        return out

    for i, c in enumerate(g.coords):
        nb = rule_neighbours(*c)
        if all(g.has_vertex(t) for t in nb):
            assert g.degree[i] == 4
            assert {g.coords[j] for j in g.neighbors(i)} == set(nb)


def test_cover_local_planarity():
    # radius-2 balls that stay clear of the branch face look like balls of Z^2,
    # including balls that straddle the sheet-changing cut
    g = build_cover_box(6, 3)
    z = build_box(6)

    def ball(graph, v, r):
        seen, frontier = {v}, {v}
        for _ in range(r):
            frontier = {w for u in frontier for w in graph.neighbors(u)} - seen
            seen |= frontier
        sub = {(min(a, b), max(a, b)) for a in seen for b in graph.neighbors(a) if b in seen}
        return len(seen), len(sub), sorted(graph.degree[list(seen)].tolist())

    centre = ball(z, z.vertex((0, 0)), 2)
    for c in [(1, -3, 0), (0, -3, 1), (2, -2, -1), (-2, 2, 2), (0, 2, 0)]:
        assert ball(g, g.vertex(c), 2) == centre, c
    # next to the branch face the cover is not locally planar
    assert ball(g, g.vertex((0, -1, 0)), 2) != centre


def test_partition_blocks():
    g = build_box(1)
    assert BoundaryPartition.free(g).is_free
    assert BoundaryPartition.wired(g).is_wired
    mixed = BoundaryPartition.mixed(g)
    assert len(mixed.nontrivial_blocks()) == 2
    cover = sorted(v for b in mixed.blocks for v in b)
    assert cover == sorted(g.boundary)
    assert BoundaryPartition.wired(g).is_coarser_than(mixed)
    assert mixed.is_coarser_than(BoundaryPartition.free(g))
    assert not BoundaryPartition.free(g).is_coarser_than(mixed)


def test_partition_rejects_interior_vertex():
    g = build_box(1)
    with pytest.raises(PartitionMismatch):
        BoundaryPartition(g, ((g.vertex((0, 0)), g.vertex((1, 1))),))
    with pytest.raises(PartitionMismatch):
        BoundaryPartition(g, ((0, 1), (1, 2)))


def test_serialization_round_trip():
    g = build_slit_box(2)[0]
    xi = BoundaryPartition.mixed(g)
    text = write_graph(g, xi)
    assert text.startswith(f"graph slit_box {g.n_vertices} {g.n_edges}")
    g2, xi2 = read_graph(text)
    assert g2.coords == g.coords and np.array_equal(g2.edges, g.edges) and g2.boundary == g.boundary
    assert xi2.blocks == xi.blocks
    d, _ = build_dual(build_box(1))
    d2, _ = read_graph(write_graph(d))
    assert d2.coords == d.coords


def test_parse_graph_spec():
    assert parse_graph_spec("box:2").n_edges == 40
    assert parse_graph_spec("k2").n_edges == 1
    assert parse_graph_spec("rect:0,2,0,1").n_vertices == 6
    assert parse_graph_spec("slit:1").n_edges == 11
    assert parse_graph_spec("cover:1,1").n_vertices == 27


def test_graph_rejects_bad_input():
    with pytest.raises(ValueError):
        build_graph([(0, 0), (1, 0)], [((0, 0), (0, 0))])
    with pytest.raises(ValueError):
        build_graph([(0, 0), (1, 0)], [((0, 0), (1, 0)), ((1, 0), (0, 0))])
    with pytest.raises(ValueError):
        build_graph([(0, 0), (0, 0)], [])


def test_edge_lookup_symmetric():
    g = build_box(2)
    for a, b in itertools.islice(_edge_coords(g), 10):
        assert g.edge(a, b) == g.edge(b, a)
