import itertools
import math

import numpy as np
import pytest
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from rcmlab import exact
from rcmlab.errors import PartitionMismatch, TooLarge
from rcmlab.events import BOX1_CATALOG, detect_event
from rcmlab.lattice import BoundaryPartition, build_box, build_dual, build_graph, build_k2, build_rectangle
from rcmlab.model import BondConfiguration, ModelParams, dual_p, p_critical

GRID = [(p, q) for p in np.round(np.arange(0.1, 1.0, 0.1), 10) for q in (1, 1.5, 2, 3, 4)]


def _components(g, bits, xi):
    """Independent cluster count: scipy connected components with one extra node per block."""
    blocks = xi.nontrivial_blocks()
    n = g.n_vertices + len(blocks)
    rows = [int(u) for u, b in zip(g.edges[:, 0], bits) if b]
    cols = [int(v) for v, b in zip(g.edges[:, 1], bits) if b]
    for i, blk in enumerate(blocks):
        rows += list(blk)
        cols += [g.n_vertices + i] * len(blk)
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    # each ghost node lies inside the cluster of its block, so no correction is needed
    return connected_components(A, directed=False)[0]


def _brute_probs(g, params, xi):
    p, q = params.p, params.q
    w = []
    for c in range(1 << g.n_edges):
        bits = [(c >> i) & 1 for i in range(g.n_edges)]
        o = sum(bits)
        k = _components(g, bits, xi)
        w.append(p ** o * (1 - p) ** (g.n_edges - o) * q ** k)
    w = np.array(w)
    return w / w.sum()


# model basics


def test_p_critical_values():
    assert p_critical(1) == 0.5
    assert p_critical(4) == pytest.approx(2 / 3, abs=1e-15)


@pytest.mark.parametrize("q", [1, 2, 3.5, 9])
def test_critical_point_is_self_dual(q):
    pc = p_critical(q)
    assert dual_p(pc, q) == pytest.approx(pc, abs=1e-15)
    p = 0.3
    ps = dual_p(p, q)
    assert p * ps / ((1 - p) * (1 - ps)) == pytest.approx(q, rel=1e-13)


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(1.2, 2)
    with pytest.raises(ValueError):
        ModelParams(0.5, 0)
    assert ModelParams(0.5, 2).beta == pytest.approx(math.log(2))


def test_bond_counts():
    g = build_box(1)
    om = BondConfiguration.from_int(g, 0b101100111001)
    assert om.o + om.c == g.n_edges
    assert BondConfiguration.all_closed(g) <= om <= BondConfiguration.all_open(g)


# cluster counts


def test_cluster_count_examples():
    g = build_box(1)
    assert exact.cluster_count(BondConfiguration.all_open(g)) == 1
    assert exact.cluster_count(BondConfiguration.all_closed(g)) == 9
    assert exact.cluster_count(BondConfiguration.all_closed(g), BoundaryPartition.wired(g)) == 2


def test_cluster_count_against_scipy():
    g = build_rectangle(0, 3, 0, 2)
    rng = np.random.default_rng(4)
    for xi in (BoundaryPartition.free(g), BoundaryPartition.wired(g), BoundaryPartition.mixed(g)):
        for _ in range(50):
            bits = rng.integers(0, 2, g.n_edges).astype(np.uint8)
            assert exact.cluster_count(BondConfiguration(g, bits), xi) == _components(g, bits, xi)


def test_partition_mismatch():
    g, h = build_box(1), build_box(2)
    with pytest.raises(PartitionMismatch):
        exact.cluster_count(BondConfiguration.all_open(g), BoundaryPartition.wired(h))


# partition function and probabilities


@pytest.mark.parametrize("p,q", GRID)
def test_k2_closed_forms(p, q):
    g = build_k2()
    prm = ModelParams(p, q)
    assert exact.partition_function(g, prm) == pytest.approx(p * q + (1 - p) * q * q, abs=1e-12)
    assert exact.partition_function(g, prm, BoundaryPartition.wired(g)) == pytest.approx(q, abs=1e-12)
    assert abs(exact.event_probability(g, prm, None, "edge_open:0") - p / (p + q * (1 - p))) < 1e-12
    assert abs(exact.event_probability(g, prm, BoundaryPartition.wired(g), "edge_open:0") - p) < 1e-12
    assert abs(exact.two_point(g, prm, None, (0, 0), (1, 0)) - p / (p + q * (1 - p))) < 1e-12


@pytest.mark.parametrize("bc", ["free", "wired", "mixed"])
@pytest.mark.parametrize("q", [0.5, 1, 2.5])
def test_probabilities_match_brute_force(bc, q):
    g = build_rectangle(0, 2, 0, 1)
    xi = getattr(BoundaryPartition, bc)(g)
    prm = ModelParams(0.37, q)
    ref = _brute_probs(g, prm, xi)
    got = exact.configuration_probabilities(g, prm, xi)
    assert np.allclose(got, ref, atol=1e-14, rtol=0)


def test_normalisation_and_q1():
    g = build_box(1)
    for q in (1, 2, 4):
        P = exact.configuration_probabilities(g, ModelParams(0.6, q), BoundaryPartition.wired(g))
        assert abs(math.fsum(P.tolist()) - 1) < 1e-12
        assert P.min() > 0
    assert exact.partition_function(g, ModelParams(0.3, 1)) == pytest.approx(1.0, abs=1e-12)


def test_q1_is_bernoulli():
    g = build_box(1)
    p = 0.3
    got = exact.event_probability(g, ModelParams(p, 1), None, "Ch:-1,-1:1,1")
    ref = 0.0
    for c in range(1 << g.n_edges):
        om = BondConfiguration.from_int(g, c)
        if detect_event(om, "Ch:-1,-1:1,1"):
            ref += p ** om.o * (1 - p) ** om.c
    assert got == pytest.approx(ref, abs=1e-13)


def test_two_point():
    g = build_box(1)
    prm = ModelParams.critical(2)
    assert exact.two_point(g, prm, None, (0, 0), (0, 0)) == 1.0
    free = exact.two_point(g, prm, BoundaryPartition.free(g), (0, 0), (1, 1))
    wired = exact.two_point(g, prm, BoundaryPartition.wired(g), (0, 0), (1, 1))
    assert wired > free


def test_predicate_events():
    g = build_box(1)
    prm = ModelParams.critical(2)
    a = exact.event_probability(g, prm, None, lambda om: bool(om.bits[0]))
    b = exact.event_probability(g, prm, None, "edge_open:0")
    assert a == pytest.approx(b, abs=1e-14)


def test_workers_do_not_change_result():
    g = build_box(1)
    prm = ModelParams.critical(3)
    one = exact.histogram(g, BoundaryPartition.wired(g), ["onearm:1"], workers=1).prob(prm)
    four = exact.histogram(g, BoundaryPartition.wired(g), ["onearm:1"], workers=4).prob(prm)
    assert one == four


def test_budget():
    with pytest.raises(TooLarge):
        exact.partition_function(build_box(2), ModelParams(0.5, 2))
    with pytest.raises(TooLarge):
        exact.configuration_probabilities(build_rectangle(0, 3, 0, 3), ModelParams(0.5, 2))


# structural properties


def test_duality_box1():
    g = build_box(1)
    d, bij = build_dual(g)
    for q in (1, 2, 3.3):
        prm = ModelParams(0.41, q)
        P = exact.configuration_probabilities(g, prm, BoundaryPartition.free(g))
        Pd = exact.configuration_probabilities(d, prm.dual(), BoundaryPartition.wired(d))
        full = (1 << g.n_edges) - 1
        assert np.max(np.abs(P - Pd[full - np.arange(1 << g.n_edges)])) < 1e-12


def test_dual_transform():
    g = build_box(1)
    prm = ModelParams.critical(2)
    om = BondConfiguration.all_open(g)
    om_star, prm_star = exact.dual_transform(om, prm)
    assert om_star.o == 0 and prm_star.p == pytest.approx(prm.p, abs=1e-15)
    om = BondConfiguration.from_int(g, 0b110010100111)
    om_star, _ = exact.dual_transform(om, ModelParams(0.2, 2))
    assert om.o + om_star.o == g.n_edges


@pytest.mark.parametrize("q", [1, 1.5, 2, 4])
def test_fkg_on_catalog(q):
    g = build_box(1)
    prm = ModelParams.critical(q)
    for xi in (BoundaryPartition.free(g), BoundaryPartition.wired(g)):
        P = exact.histogram(g, xi, list(BOX1_CATALOG)).probabilities(prm)
        hit = (np.arange(len(P))[:, None] >> np.arange(len(BOX1_CATALOG))) & 1
        for i, j in itertools.combinations(range(len(BOX1_CATALOG)), 2):
            pa, pb = P @ hit[:, i], P @ hit[:, j]
            assert P @ (hit[:, i] & hit[:, j]) >= pa * pb - 1e-12


@pytest.mark.parametrize("q", [1.5, 2, 4])
def test_comparison_between_boundary_conditions(q):
    g = build_box(1)
    prm = ModelParams.critical(q)
    bcs = {"free": BoundaryPartition.free(g), "wired": BoundaryPartition.wired(g),
           "mixed": BoundaryPartition.mixed(g),
           "dobrushin": BoundaryPartition.dobrushin(g, [(-1, -1), (0, -1), (1, -1)])}
    vals = {k: [exact.event_probability(g, prm, xi, a) for a in BOX1_CATALOG] for k, xi in bcs.items()}
    for a, b in itertools.permutations(bcs, 2):
        if bcs[a].is_coarser_than(bcs[b]):
            assert all(x >= y - 1e-12 for x, y in zip(vals[a], vals[b]))


def test_catalog_events_are_increasing():
    g = build_box(1)
    rng = np.random.default_rng(1)
    for _ in range(200):
        bits = rng.integers(0, 2, g.n_edges).astype(np.uint8)
        more = bits | rng.integers(0, 2, g.n_edges).astype(np.uint8)
        lo, hi = BondConfiguration(g, bits), BondConfiguration(g, more)
        for a in BOX1_CATALOG:
            assert detect_event(lo, a) <= detect_event(hi, a)


@pytest.mark.parametrize("bc", ["free", "wired"])
def test_domain_markov(bc):
    g = build_box(1)
    xi = getattr(BoundaryPartition, bc)(g)
    prm = ModelParams.critical(2)
    P = exact.configuration_probabilities(g, prm, xi)
    inner = sorted(g.incidence[g.vertex((0, 0))])
    outer = [e for e in range(g.n_edges) if e not in inner]
    idx = np.arange(1 << g.n_edges)
    for pat in range(1 << len(outer)):
        bits = np.zeros(g.n_edges, dtype=np.uint8)
        for j, e in enumerate(outer):
            bits[e] = (pat >> j) & 1
        mask = np.ones_like(idx, dtype=bool)
        for e in outer:
            mask &= ((idx >> e) & 1) == bits[e]
        cond = P[mask] / P[mask].sum()
        sub, sub_xi, emap = exact.induced_partition(g, inner, bits, xi)
        Q = exact.configuration_probabilities(sub, prm, sub_xi)
        # re-index the conditional law by the sub-graph edge order
        ref = np.zeros(1 << sub.n_edges)
        for c, pr in zip(idx[mask], cond):
            s = sum(((int(c) >> int(emap[k])) & 1) << k for k in range(sub.n_edges))
            ref[s] += pr
        assert np.allclose(Q, ref, atol=1e-13)


def test_insertion_tolerance():
    g = build_box(1)
    for q in (0.5, 1, 2, 4):
        prm = ModelParams(0.4, q)
        c = exact.insertion_constant(prm)
        P = exact.configuration_probabilities(g, prm, BoundaryPartition.free(g))
        assert P.min() > 0
        assert P.min() >= c ** g.n_edges


def test_crossing_complement_exhaustive():
    g = build_rectangle(0, 2, 0, 1)
    for c in range(1 << g.n_edges):
        om = BondConfiguration.from_int(g, c)
        assert detect_event(om, "Ch:0,0:2,1") != detect_event(om, "Cv*:0.5,-0.5:1.5,1.5")


@pytest.mark.parametrize("q", [1, 2, 4])
def test_mixed_bound_box1(q):
    g = build_box(1)
    val = exact.event_probability(g, ModelParams.critical(q), BoundaryPartition.mixed(g), "Ch:-1,-1:1,1")
    assert val > 1 / (1 + q * q)


# Potts


def test_potts_beta_zero_uniform():
    g = build_box(1)
    s = exact.potts_enumerate(g, 3, 0.0)
    assert np.allclose(s.marginals, 1 / 3, atol=1e-15)


def test_potts_single_edge():
    g = build_k2()
    beta = 0.7
    s = exact.potts_enumerate(g, 2, beta, {0: 1})
    assert s.marginals[1, 1] == pytest.approx(math.exp(beta) / (math.exp(beta) + 1), abs=1e-15)


def test_potts_boundary_identity():
    # colouring the FK clusters gives mu[sigma_0 = i] = 1/q + (1 - 1/q) phi^1[0 <-> boundary]
    g = build_box(1)
    q, p = 3, 0.55
    s = exact.potts_enumerate(g, q, ModelParams(p, q).beta, {v: 0 for v in g.boundary})
    phi = exact.event_probability(g, ModelParams(p, q), BoundaryPartition.wired(g), "onearm:1")
    m0 = s.marginals[g.vertex((0, 0)), 0]
    assert m0 == pytest.approx(1 / q + (1 - 1 / q) * phi, abs=1e-13)
    assert abs(m0 - (1 / q + phi)) > 1e-3


@pytest.mark.parametrize("q", [2, 3])
@pytest.mark.parametrize("bc", ["free", "wired"])
def test_coupling_check(q, bc):
    for g in (build_k2(), build_box(1)):
        xi = getattr(BoundaryPartition, bc)(g)
        res = exact.coupling_check(g, q, p_critical(q), xi)
        assert res["max"] < 1e-12
        assert res["fk_total"] == pytest.approx(1.0, abs=1e-12)


def test_coupling_check_beta_zero():
    g = build_box(1)
    assert exact.coupling_check(g, 3, 0.0)["max"] < 1e-15


def test_small_custom_graph():
    g = build_graph([(0, 0), (1, 0), (1, 1)], [((0, 0), (1, 0)), ((1, 0), (1, 1))])
    prm = ModelParams(0.5, 2)
    # path of two edges: every configuration has k = 3 - o
    w = [0.5 ** 2 * 2 ** (3 - bin(c).count("1")) for c in range(4)]
    assert exact.partition_function(g, prm) == pytest.approx(sum(w), abs=1e-14)
