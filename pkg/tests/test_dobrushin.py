import numpy as np
import pytest

from rcmlab.dobrushin import (FORCED_CLOSED, FORCED_OPEN, RANDOM, build_dobrushin, face_centers, oriented,
                              r_domain, rectangle_domain, square_domain, turn)
from rcmlab.errors import InvalidArcs
from rcmlab.loops import medial_degrees


def test_orientation_is_counterclockwise():
    # around the primal vertex (0, 0) (doubled (0, 0)) the medial cycle is E -> N -> W -> S
    ring = [(1, 0), (0, 1), (-1, 0), (0, -1)]
    for m, n in zip(ring, ring[1:] + ring[:1]):
        assert oriented(m, n) and not oriented(n, m)
        assert face_centers(m, n)[0] == (0, 0)


def test_turn_signs():
    assert turn((0, -1), (1, 0), (0, 1)) == 1
    assert turn((0, 1), (1, 0), (0, -1)) == -1


def test_square_domain():
    d = square_domain()
    assert d.a == (0, 0) and d.b == (1, 1)
    assert len(d.ab) > 1 and len(d.ba) > 1
    assert d.ab[0] == d.ba[0] and d.ab[-1] == d.ba[-1]
    assert {d.e_a, d.e_b} == {d.n_medial_edges - 2, d.n_medial_edges - 1}
    assert d.tail[d.e_a] == -1 and d.head[d.e_b] == -1
    assert d.head[d.e_a] == d.a_medial and d.tail[d.e_b] == d.b_medial
    assert d.n_free == 2


def test_r_domain_wired_at_origin():
    d = r_domain(1)
    assert d.a == d.b == (0, 0)
    assert d.primal.n_edges == 7 and d.n_free == 7 and len(d.forced_open) == 0
    # e_a and e_b both turn around (0, 0) through the midpoint of the missing edge to (-1, 0)
    ta, ha = d.edge_points(d.e_a)
    tb, hb = d.edge_points(d.e_b)
    assert ta == hb == (-1, 0)
    assert face_centers(ta, ha)[0] == (0, 0) and face_centers(tb, hb)[0] == (0, 0)


def test_arcs_follow_orientation_and_meet_only_at_ends():
    for d in (square_domain(), r_domain(1), r_domain(2), rectangle_domain(0, 2, 0, 2, [(0, 0), (0, 1)])):
        for path in (d.ab, d.ba):
            steps = list(zip(path, path[1:]))
            assert len(set(steps)) == len(steps)
        for path in (d.ab, d.ba):
            assert all(oriented(m, n) for m, n in zip(path, path[1:]))
        assert set(d.ab[1:-1]).isdisjoint(d.ba[1:-1])


def test_interior_medial_vertices_have_degree_four():
    for d in (square_domain(), r_domain(2), rectangle_domain(0, 2, 0, 2, [(0, 0), (0, 1), (0, 2), (1, 2)])):
        deg = medial_degrees(d)
        for v in d.interior_vertices():
            assert deg[v] == 4
        assert all(deg[v] >= 2 for v in range(d.n_medial_vertices))


def test_vertex_states_partition():
    d = rectangle_domain(0, 2, 0, 2, [(0, 0), (0, 1), (0, 2), (1, 2)])
    assert set(np.unique(d.vstate)) <= {RANDOM, FORCED_OPEN, FORCED_CLOSED}
    assert d.n_free == 9
    opened = {int(d.medial_to_primal[v]) for v in range(d.n_medial_vertices) if d.vstate[v] == FORCED_OPEN}
    assert opened == set(d.forced_open.tolist())


@pytest.mark.parametrize("swap", ["reverse", "repeat", "short"])
def test_invalid_arcs(swap):
    d = square_domain()
    args = {"reverse": (d.ba, d.ab), "repeat": (d.ab, d.ab), "short": (d.ab[:-1], d.ba)}[swap]
    with pytest.raises(InvalidArcs):
        build_dobrushin(*args)


def test_crossing_arcs_rejected():
    d = r_domain(1)
    # a ba path that leaves the left side of (0, 0) and meets ab in its interior
    bad_ba = (d.ab[0], (1, 0), (2, -1), (1, -2), d.ab[-1])
    with pytest.raises(InvalidArcs):
        build_dobrushin(d.ab, bad_ba)


def test_rebuild_from_arcs_is_identical():
    d = rectangle_domain(0, 2, 0, 1, [(0, 0), (0, 1)])
    d2 = build_dobrushin(d.ab, d.ba)
    assert d2.mcoords == d.mcoords
    assert np.array_equal(d2.tail, d.tail) and np.array_equal(d2.head, d.head)


def test_medial_graph_excludes_marked_edges():
    d = square_domain()
    m = d.medial_graph()
    assert m.n_edges == d.n_medial_edges - 2
    assert m.directed
