import cmath
import itertools
import math

import numpy as np
import pytest

from rcmlab.dobrushin import RANDOM, face_centers, r_domain, rectangle_domain, square_domain
from rcmlab.errors import InvalidConfiguration, InvalidContour, InvalidVertexSet, TooLarge
from rcmlab.loops import (boundary_winding_table, contour_integral, cover_check, cr_residual,
                          elementary_contour, exact_winding_table, loop_weight_check, medial_degrees,
                          observable_field, observed_windings, path_probabilities, read_field_csv,
                          spin_params, trace_loops, vertex_sum_check, winding)
from rcmlab.model import p_critical

THREE = rectangle_domain(0, 2, 0, 2, [(0, 0), (0, 1), (0, 2), (1, 2)])
DOMAINS = {"square": square_domain(), "r1": r_domain(1), "three": THREE}


def _configs(d):
    """Every primal configuration compatible with the forced arcs."""
    free = [int(d.medial_to_primal[v]) for v in d.free_vertices]
    for bits in itertools.product((0, 1), repeat=len(free)):
        om = np.zeros(d.primal.n_edges, dtype=np.uint8)
        om[d.forced_open] = 1
        om[free] = bits
        yield om


def _arc_edges(d, path):
    return [d.find_edge(m, n) for m, n in zip(path, path[1:])]


# spin parameters


def test_spin_q1():
    sp = spin_params(1)
    assert sp.sigma.real == pytest.approx(1 / 3, abs=1e-15)
    assert sp.sigma_hat.real == pytest.approx(2 / 3, abs=1e-15)


def test_spin_q4():
    sp = spin_params(4)
    assert sp.sigma == 1 and sp.sigma_hat == 0


def test_spin_q9():
    sp = spin_params(9)
    assert sp.sigma_tilde == pytest.approx(2 / math.pi * math.acosh(1.5), abs=1e-15)
    assert sp.sigma_tilde == pytest.approx(0.61269, abs=1e-5)
    assert sp.sigma_tilde > 0


@pytest.mark.parametrize("q", [0.5, 1, 2, 3, 3.9])
def test_spin_solves_defining_equation(q):
    sp = spin_params(q)
    assert math.sin(sp.sigma.real * math.pi / 2) == pytest.approx(math.sqrt(q) / 2, abs=1e-14)
    assert math.cos(sp.sigma_hat.real * math.pi / 2) == pytest.approx(math.sqrt(q) / 2, abs=1e-14)
    assert 0 <= sp.sigma.real <= 1


def test_spin_q_above_4_identity():
    sp = spin_params(6)
    assert cmath.sin(sp.sigma * math.pi / 2) == pytest.approx(math.sqrt(6) / 2, abs=1e-13)
    assert (1j * sp.sigma_hat).imag == pytest.approx(0, abs=1e-15)


# winding


def test_winding_conventions():
    gamma, turns = [0, 1, 2, 3, 4], [1, 1, 1, 1]
    assert winding(gamma, turns, 0, 4) == pytest.approx(2 * math.pi)
    assert winding(gamma, turns, 4, 4) == 0
    assert winding(gamma, turns, 9, 4) == 0
    assert winding(gamma, [1, -1, 1, -1], 0, 4) == 0


# loop decomposition


@pytest.mark.parametrize("name", list(DOMAINS))
def test_cover_property_all_configurations(name):
    d = DOMAINS[name]
    for om in _configs(d):
        dec = trace_loops(d, om)
        assert dec.exploration[0] == d.e_a and dec.exploration[-1] == d.e_b
        assert cover_check(d, dec)
        assert sum(len(c) for c in dec.loops) + len(dec.exploration) == d.n_medial_edges


@pytest.mark.parametrize("name", list(DOMAINS))
def test_paths_never_cross_bonds(name):
    # at an open vertex the path runs along the primal bond (changing primal vertex),
    # at a closed one along the dual bond (keeping it)
    d = DOMAINS[name]
    for om in _configs(d):
        dec = trace_loops(d, om)
        state = d.vertex_open_mask(om)
        seqs = [list(dec.exploration)] + [list(c) + [c[0]] for c in dec.loops]
        for seq in seqs:
            for e1, e2 in zip(seq, seq[1:]):
                t, m = d.edge_points(e1)
                m2, h = d.edge_points(e2)
                assert m == m2
                p1, _ = face_centers(t, m)
                p2, _ = face_centers(m, h)
                assert (p1 != p2) == bool(state[d.mindex[m]])


def test_extreme_configurations_follow_arcs():
    d = square_domain()
    full = np.ones(d.primal.n_edges, dtype=np.uint8)
    dec = trace_loops(d, full)
    assert list(dec.exploration) == [d.e_a] + _arc_edges(d, d.ab) + [d.e_b]
    empty = np.zeros(d.primal.n_edges, dtype=np.uint8)
    empty[d.forced_open] = 1
    dec = trace_loops(d, empty)
    assert list(dec.exploration) == [d.e_a] + _arc_edges(d, d.ba) + [d.e_b]


def test_forced_arc_violation():
    d = square_domain()
    with pytest.raises(InvalidConfiguration):
        trace_loops(d, np.zeros(d.primal.n_edges, dtype=np.uint8))
    with pytest.raises(InvalidConfiguration):
        trace_loops(d, np.ones(3, dtype=np.uint8))


@pytest.mark.parametrize("name", ["square", "r1"])
def test_path_connectivity_link(name):
    # an ab-arc edge is on gamma iff the primal vertex it turns around is joined to the wired arc
    d = DOMAINS[name]
    g = d.primal
    wired = {g.vertex(d.a), g.vertex(d.b)} | {int(v) for e in d.forced_open for v in g.edges[e]}
    arc = _arc_edges(d, d.ab)
    for om in _configs(d):
        parent = list(range(g.n_vertices))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for e in np.flatnonzero(om):
            parent[find(int(g.edges[e][0]))] = find(int(g.edges[e][1]))
        roots = {find(v) for v in wired}
        dec = trace_loops(d, om)
        on = set(dec.exploration)
        for k in arc:
            t, h = d.edge_points(k)
            x = g.vertex(tuple(c // 2 for c in face_centers(t, h)[0]))
            assert (k in on) == (find(x) in roots)


@pytest.mark.parametrize("name", list(DOMAINS))
def test_boundary_windings_are_deterministic(name):
    d = DOMAINS[name]
    table, off, _ = exact_winding_table(d, 2.0)
    det = boundary_winding_table(d)
    for k, w in det.items():
        seen = observed_windings(table, off, k)
        assert seen <= {w}
    for om in _configs(d):
        dec = trace_loops(d, om)
        for k in dec.exploration:
            if k in det:
                assert dec.windings[k] == det[k]


def test_slit_domain_retrace_is_suffix():
    d = THREE
    for om in itertools.islice(_configs(d), 0, 512, 7):
        dec = trace_loops(d, om)
        state = d.vertex_open_mask(om)
        path = dec.exploration
        for n in range(1, len(path) - 1):
            visited = {int(d.head[k]) for k in path[:n]}
            fixed = {v: int(state[v]) for v in visited if d.vstate[v] == RANDOM}
            sd = d.with_start(path[n], fixed)
            dec2 = trace_loops(sd, om)
            assert dec2.exploration == path[n:]


@pytest.mark.parametrize("name", list(DOMAINS))
@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_loop_weights_reproduce_fk(name, q):
    assert loop_weight_check(DOMAINS[name], q)


# observable


@pytest.mark.parametrize("q", [1, 2, 3])
def test_fhat_at_e_b_is_one(q):
    d = r_domain(1)
    fh = observable_field(d, q)
    assert fh[d.e_b] == pytest.approx(1.0, abs=1e-14)
    assert np.all(np.abs(fh.values) <= 1 + 1e-12)


def test_fhat_at_e_b_is_zero_for_q4():
    d = r_domain(1)
    assert abs(observable_field(d, 4)[d.e_b]) < 1e-14


def test_boundary_fhat_from_path_probability():
    d = square_domain()
    q = 2.0
    fh = observable_field(d, q)
    prob = path_probabilities(d, q)
    sh = spin_params(q).sigma_hat
    for k, w in boundary_winding_table(d).items():
        assert fh[k] == pytest.approx(cmath.exp(1j * sh * w * math.pi / 2) * prob[k], abs=1e-14)


def test_path_probability_matches_enumeration():
    # independent oracle: weight each configuration by its loop count at p_c
    d = r_domain(1)
    q = 2.0
    x = math.sqrt(q)
    num = np.zeros(d.n_medial_edges)
    Z = 0.0
    for om in _configs(d):
        dec = trace_loops(d, om)
        w = x ** dec.n_loops
        Z += w
        num[list(dec.exploration)] += w
    assert np.allclose(path_probabilities(d, q), num / Z, atol=1e-13)


def test_fhat_matches_direct_enumeration():
    d = THREE
    q = 3.0
    x = math.sqrt(q)
    sh = spin_params(q).sigma_hat
    s = spin_params(q).sigma
    Fh = np.zeros(d.n_medial_edges, complex)
    F = np.zeros(d.n_medial_edges, complex)
    Z = 0.0
    for om in _configs(d):
        dec = trace_loops(d, om)
        w = x ** dec.n_loops
        Z += w
        for k in dec.exploration:
            Fh[k] += w * cmath.exp(1j * sh * dec.winding(k))
            F[k] += w * cmath.exp(1j * s * dec.winding(k))
    fh, f = observable_field(d, q, with_F=True)
    assert np.allclose(fh.values, Fh / Z, atol=1e-13)
    assert np.allclose(f.values, F / Z, atol=1e-13)


def test_off_critical_flag():
    d = r_domain(1)
    assert observable_field(d, 2).critical
    assert not observable_field(d, 2, p=0.3).critical


@pytest.mark.parametrize("name", list(DOMAINS))
@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_exact_vanishing(name, q):
    d = DOMAINS[name]
    fh, f = observable_field(d, q, with_F=True)
    inner = d.interior_vertices()
    for v in inner:
        assert abs(contour_integral(f, elementary_contour(d, v))) < 1e-12
        assert abs(cr_residual(f, v)) < 1e-12
        assert abs(vertex_sum_check(fh, [v])) < 1e-12
    assert abs(vertex_sum_check(fh, inner)) < 1e-12


def test_large_contour_vanishes():
    d = THREE
    f = observable_field(d, 2, with_F=True)[1]
    # counterclockwise around the dual square spanning the two central faces
    c = [complex(0.5, 0.5), complex(1.5, 0.5), complex(1.5, 1.5), complex(0.5, 1.5), complex(0.5, 0.5)]
    doubled = [complex(0.5, 0.5), complex(1, 0), complex(1.5, 0.5), complex(2, 1), complex(1.5, 1.5),
               complex(1, 2), complex(0.5, 1.5), complex(0, 1), complex(0.5, 0.5)]
    with pytest.raises(InvalidContour):
        contour_integral(f, c)
    assert abs(contour_integral(f, doubled)) < 1e-12


def test_off_critical_does_not_vanish():
    d = r_domain(1)
    f = observable_field(d, 2, p=0.3, with_F=True)[1]
    res = max(abs(contour_integral(f, elementary_contour(d, v))) for v in d.interior_vertices())
    assert res > 1e-6


def test_contour_errors():
    d = r_domain(1)
    f = observable_field(d, 2)
    assert contour_integral(f, []) == 0
    with pytest.raises(InvalidContour):
        contour_integral(f, [0.5 + 0.5j, 1.5 + 0.5j])
    with pytest.raises(InvalidContour):
        contour_integral(f, [0.25 + 0.5j, 0.25 + 0.5j])
    with pytest.raises(InvalidContour):
        contour_integral(f, [10.5 + 0.5j, 11 + 1j, 10.5 + 0.5j])


def test_vertex_set_errors():
    d = r_domain(1)
    fh = observable_field(d, 2)
    bad = [v for v in range(d.n_medial_vertices) if medial_degrees(d)[v] != 4]
    assert bad
    with pytest.raises(InvalidVertexSet):
        vertex_sum_check(fh, bad[:1])
    with pytest.raises(InvalidVertexSet):
        cr_residual(fh, bad[0])
    assert vertex_sum_check(fh, []) == 0


def test_exact_budget():
    with pytest.raises(TooLarge):
        observable_field(rectangle_domain(0, 4, 0, 4, [(0, 0)]), 2)


def test_mc_vertex_sum_is_zero_within_error():
    d = r_domain(1)
    fh = observable_field(d, 2, mode="mc", sweeps=64000, seed=3)
    ex = observable_field(d, 2)
    r, se = vertex_sum_check(fh, d.interior_vertices())
    assert abs(r.real) < 5 * se.real + 1e-12 and abs(r.imag) < 5 * se.imag + 1e-12
    z = (fh.values - ex.values)
    err = np.hypot(fh.std_err[:, 0], fh.std_err[:, 1]) + 1e-12
    assert np.all(np.abs(z) < 5 * err)


def test_mc_is_deterministic():
    d = r_domain(1)
    a = observable_field(d, 2, mode="mc", sweeps=3200, seed=5)
    b = observable_field(d, 2, mode="mc", sweeps=3200, seed=5)
    assert np.array_equal(a.values, b.values)


def test_field_csv_round_trip(tmp_path):
    d = r_domain(1)
    fh = observable_field(d, 2)
    path = tmp_path / "f.csv"
    fh.to_csv(path)
    vals, se = read_field_csv(path)
    assert np.array_equal(vals, fh.values)
    assert np.all(se == 0)
    assert path.read_text().splitlines()[0] == "medial_edge_id,re,im,std_err_re,std_err_im"


def test_p_default_is_critical():
    fh = observable_field(r_domain(1), 2)
    assert fh.p == p_critical(2)
