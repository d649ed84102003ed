"""Frozen oracle values used by the test suite.

``BOX4_Q2`` holds exact per-edge open probabilities on ``build_box(4)`` at
``q = 2``, ``p = p_c(2)`` under free and wired boundary conditions.  They were
computed with :func:`rcmlab.transfer.transfer_probability` (exact frontier
sweep, 144 edges), one edge per class of the dihedral symmetry group of the
box; every edge listed in a class shares its value.  Keys are the folded
midpoint of the class representative.
"""

BOX4_Q2 = {
    (-4.0, -3.5): ([0, 1, 14, 16, 120, 135, 136, 143], 0.4392850820593095, 0.5857864376269051),
    (-4.0, -2.5): ([2, 12, 18, 33, 103, 118, 137, 142], 0.44545209760849824, 0.5857864376269051),
    (-4.0, -1.5): ([4, 10, 35, 50, 86, 101, 138, 141], 0.44742347643845926, 0.5857864376269051),
    (-4.0, -0.5): ([6, 8, 52, 67, 69, 84, 139, 140], 0.44807377377418883, 0.5857864376269051),
    (-3.5, -3.0): ([3, 15, 17, 31, 119, 122, 133, 134], 0.4585010148934105, 0.5607452274577723),
    (-3.5, -2.0): ([5, 13, 34, 48, 102, 116, 124, 132], 0.4629456615159331, 0.5546419481923022),
    (-3.5, -1.0): ([7, 11, 51, 65, 85, 99, 126, 130], 0.4642720250506016, 0.5527799498700828),
    (-3.5, 0.0): ([9, 68, 82, 128], 0.464589728125021, 0.5523320230770822),
    (-3.0, -2.5): ([19, 20, 29, 32, 105, 117, 121, 131], 0.4676133936906566, 0.541571366919402),
    (-3.0, -1.5): ([21, 27, 37, 49, 88, 100, 123, 129], 0.4704876531599969, 0.537203300285246),
    (-3.0, -0.5): ([23, 25, 54, 66, 71, 83, 125, 127], 0.4714612787979405, 0.5360213021149474),
    (-2.5, -2.0): ([22, 30, 36, 46, 104, 107, 114, 115], 0.4738542598359545, 0.5325777674112723),
    (-2.5, -1.0): ([24, 28, 53, 63, 87, 97, 109, 113], 0.47600072066337845, 0.5298876656759066),
    (-2.5, 0.0): ([26, 70, 80, 111], 0.4765486943324707, 0.5292297684123622),
    (-2.0, -1.5): ([38, 39, 44, 47, 90, 98, 106, 112], 0.47739291811037465, 0.5264889722794234),
    (-2.0, -0.5): ([40, 42, 56, 64, 73, 81, 108, 110], 0.47859870376993635, 0.5246102838156859),
    (-1.5, -1.0): ([41, 45, 55, 61, 89, 92, 95, 96], 0.479925019123237, 0.5232084226665357),
    (-1.5, 0.0): ([43, 72, 78, 94], 0.48059564346126055, 0.522404501935186),
    (-1.0, -0.5): ([57, 58, 59, 62, 75, 79, 91, 93], 0.48127665425120747, 0.5210331702275216),
    (-0.5, 0.0): ([60, 74, 76, 77], 0.4819965690095053, 0.5201510266029727),
}


def box4_marginals():
    """Per-edge ``(free, wired)`` exact marginals as two lists indexed by edge id."""
    free = [0.0] * 144
    wired = [0.0] * 144
    for edges, f, w in BOX4_Q2.values():
        for e in edges:
            free[e], wired[e] = f, w
    return free, wired
