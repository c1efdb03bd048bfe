import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finlgt.errors import BudgetError
from finlgt.lattice import Box, CubeRegion, OrientedCell, cube, rectangle_loop
from finlgt.vortex import (
    closure,
    compatible,
    count_ngamma,
    enclosing_cube,
    enumerate_vortices,
    find_separating_cube,
    hierarchy,
    in_boundary_s2,
    in_s2,
    incompatible_minimal_vortices,
    is_vortex,
    j_predicate,
    knot_decompose,
    minimal_vortex_edge,
    plaquette_neighbors,
    vortex_count_bound,
    vortex_decompose,
    well_separated,
)

R6 = CubeRegion((0, 0, 0, 0), 6)
R8 = CubeRegion((0, 0, 0, 0), 7)
seeds = st.integers(0, 2**32)


def P(region, x, dirs):
    return region.index(OrientedCell(x, dirs))


def E(region, x, i):
    return region.edge_index(x, i)


def pair_vortex(region, x):
    """Two plaquettes of the 3-cell (x, {1,2,3}): a size-2 vortex."""
    return frozenset({P(region, x, (1, 2)), P(region, x, (1, 3))})


def test_decompose_examples():
    e = E(R6, (3, 3, 3, 3), 2)
    parts = vortex_decompose(R6, R6.minimal_vortex(e)).parts
    assert len(parts) == 1 and len(parts[0]) == 6
    f = E(R6, (0, 0, 1, 1), 1)
    assert len(vortex_decompose(R6, R6.minimal_vortex(e) | R6.minimal_vortex(f))) == 2
    v = pair_vortex(R6, (2, 2, 2, 2))
    assert vortex_decompose(R6, v).parts == (v,)


@given(seeds)
def test_decompose_is_unique_partition(seed):
    rng = np.random.default_rng(seed)
    Pset = frozenset(rng.choice(R6.n_cells(2), 30, replace=False).tolist())
    parts = vortex_decompose(R6, Pset).parts
    assert frozenset().union(*parts) == Pset and sum(map(len, parts)) == len(Pset)
    assert all(is_vortex(R6, v) for v in parts)
    assert all(compatible(R6, a, b) for a, b in itertools.combinations(parts, 2))
    shuffled = frozenset(rng.permutation(sorted(Pset)).tolist())
    assert vortex_decompose(R6, shuffled).parts == parts


def test_compatibility():
    a = R6.minimal_vortex(E(R6, (1, 1, 1, 1), 1))
    b = R6.minimal_vortex(E(R6, (4, 4, 4, 4), 1))
    assert compatible(R6, a, b)
    # edges (x, 1) and (x, 2) share the 3-cell (x, {1,2,3})
    c = R6.minimal_vortex(E(R6, (1, 1, 1, 1), 2))
    assert not compatible(R6, a, c)


def _brute_incompatible(region, e):
    V = region.minimal_vortex(e)
    return sorted(f for f in range(region.n_cells(1)) if f != e and not compatible(region, V, region.minimal_vortex(f)))


def test_incompatible_minimal_vortices():
    e = E(R6, (3, 3, 3, 3), 1)
    got = incompatible_minimal_vortices(R6, e)
    assert got == _brute_incompatible(R6, e)
    assert len(got) <= 144


def _brute_vortices(region, m, anchor):
    ball = {anchor}
    for _ in range(m - 1):
        ball |= set().union(*(plaquette_neighbors(region, p) for p in ball))
    ball.discard(anchor)
    return sum(1 for c in itertools.combinations(sorted(ball), m - 1) if is_vortex(region, {anchor, *c}))


def test_enumerate_vortices():
    anchor = P(R6, (3, 3, 3, 3), (1, 2))
    assert enumerate_vortices(R6, 1, anchor) == 1
    assert enumerate_vortices(R6, 2, anchor) == 20 == len(plaquette_neighbors(R6, anchor))
    c3, sets = enumerate_vortices(R6, 3, anchor, return_list=True)
    assert c3 == len(set(sets)) == _brute_vortices(R6, 3, anchor)
    assert c3 <= vortex_count_bound(3)
    with pytest.raises(BudgetError):
        enumerate_vortices(R6, 9, anchor)


@given(seeds)
def test_neighbourhood_count_bound(seed):
    rng = np.random.default_rng(seed)
    e = int(rng.choice([f for f in range(R6.n_cells(1)) if R6.is_interior_edge(f)]))
    V = R6.minimal_vortex(e)
    near = closure(R6, V)
    assert len(near) <= 21 * len(V)
    for m in (1, 2):
        found = set()
        for p in near:
            found.update(enumerate_vortices(R6, m, p, return_list=True)[1])
        assert len(found) <= 21 * len(V) * (20 * math.e) ** m


def _scan_cube(region, Pset):
    """Exhaustive scan: smallest side, then lexicographic corner."""
    lo = np.asarray(region.corner)
    for s in range(1, region.side + 1):
        for corner in itertools.product(*[range(int(lo[i]), int(lo[i] + region.side - s) + 1) for i in range(4)]):
            box = cube(corner, s)
            if np.all(in_s2(region, Pset, box)) and not np.any(in_boundary_s2(region, Pset, box)):
                return box
    return region.as_box()


@pytest.mark.parametrize("x,dirs", [((3, 3, 3, 3), (1, 2)), ((0, 2, 1, 4), (2, 4)), ((5, 5, 0, 0), (3, 4))])
def test_enclosing_cube_single_plaquette(x, dirs):
    p = P(R6, x, dirs)
    box = enclosing_cube(R6, {p})
    assert box == _scan_cube(R6, {p})
    assert box.sides[0] <= 2


def test_enclosing_cube_sizes():
    v = pair_vortex(R6, (2, 2, 2, 2))
    assert enclosing_cube(R6, v).sides[0] <= len(v) + 2
    e = E(R6, (3, 3, 3, 3), 4)
    assert enclosing_cube(R6, R6.minimal_vortex(e)).sides[0] <= 6 + 2
    knot = pair_vortex(R6, (1, 1, 1, 1)) | pair_vortex(R6, (2, 3, 1, 1))
    assert enclosing_cube(R6, knot).sides[0] <= 3 * len(knot)


def test_separation():
    a = R8.minimal_vortex(E(R8, (1, 1, 1, 1), 1))
    b = R8.minimal_vortex(E(R8, (6, 6, 6, 6), 1))
    box = find_separating_cube(R8, a, b)
    assert box is not None and well_separated(R8, a, b, box)
    region = CubeRegion((0, 0, 0, 0), 3)
    a = region.minimal_vortex(E(region, (1, 1, 1, 1), 1))
    rest = frozenset(range(region.n_cells(2))) - a
    assert find_separating_cube(region, a, rest) is None


def test_well_separated_is_asymmetric():
    a = R6.minimal_vortex(E(R6, (2, 2, 2, 2), 1))
    b = pair_vortex(R6, (5, 5, 5, 5))
    box = cube((1, 1, 1, 1), 3)
    assert well_separated(R6, a, b, box)
    assert not well_separated(R6, b, a, box)


def test_knot_decomposition():
    e = E(R6, (3, 3, 3, 3), 1)
    kd = knot_decompose(R6, R6.minimal_vortex(e))
    assert kd.minimal == ((e, R6.minimal_vortex(e)),) and kd.knots == ()
    v1, v2 = pair_vortex(R6, (1, 1, 1, 1)), pair_vortex(R6, (2, 1, 2, 1))
    assert compatible(R6, v1, v2) and j_predicate(R6, v1, v2) == 1
    assert knot_decompose(R6, v1 | v2).knots == (v1 | v2,)
    w1, w2 = pair_vortex(R6, (1, 1, 1, 1)), pair_vortex(R6, (4, 4, 4, 4))
    assert j_predicate(R6, w1, w2) == 0
    kd = knot_decompose(R6, w1 | w2)
    assert set(kd.knots) == {w1, w2}
    assert find_separating_cube(R6, w1, w2) is not None


@given(seeds)
def test_hierarchy_refines(seed):
    rng = np.random.default_rng(seed)
    Pset = frozenset(rng.choice(R6.n_cells(2), 12, replace=False).tolist())
    levels = hierarchy(R6, Pset)
    for lo, hi in zip(levels, levels[1:]):
        assert all(any(a <= b for b in hi.nodes) for a in lo.nodes)
        assert frozenset().union(*hi.nodes) == Pset
    last = levels[-1].nodes
    assert all(j_predicate(R6, a, b) == 0 for a, b in itertools.combinations(last, 2))
    kd = knot_decompose(R6, Pset)
    for e, v in kd.minimal:
        assert R6.minimal_vortex(e) == v
    for k in kd.knots:
        assert minimal_vortex_edge(R6, k) is None or len(vortex_decompose(R6, k)) > 1


def test_count_ngamma():
    loop = rectangle_loop((2, 2, 2, 2), 2, 1, (1, 2))
    assert count_ngamma(R6, frozenset(), loop) == 0
    e = E(R6, (2, 2, 2, 2), 1)
    assert count_ngamma(R6, R6.minimal_vortex(e), loop) == 1
    far = pair_vortex(R6, (5, 5, 5, 5))
    assert count_ngamma(R6, R6.minimal_vortex(e) | far, loop) == 1


def test_minimal_vortex_edge():
    e = E(R6, (3, 2, 1, 4), 3)
    assert minimal_vortex_edge(R6, R6.minimal_vortex(e)) == e
    assert minimal_vortex_edge(R6, pair_vortex(R6, (1, 1, 1, 1))) is None
