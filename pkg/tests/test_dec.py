import numpy as np
import pytest
from hypothesis import given, strategies as st

from finlgt.dec import (
    IntTwoForm,
    KForm,
    coderivative,
    exterior_derivative,
    int_coderivative,
    ordered_loop_sum,
    pairing,
    pairing2,
    poincare_primitive,
    single_edge_form,
    surface_fill,
)
from finlgt.errors import DegreeError, NotClosedError
from finlgt.groups import build_cyclic, build_symmetric
from finlgt.lattice import CubeRegion, Loop, OrientedCell, random_loop, rectangle_loop

R3 = CubeRegion((0, 0, 0, 0), 2)
R8 = CubeRegion((0, 0, 0, 0), 7)
groups = st.sampled_from([2, 3, 5, 6]).map(build_cyclic)
seeds = st.integers(0, 2**32)


def test_zero_forms(cube2):
    z5 = build_cyclic(5)
    for k in range(4):
        assert exterior_derivative(KForm.zeros(cube2, z5, k)).is_zero()
    for k in range(1, 5):
        assert coderivative(KForm.zeros(cube2, z5, k)).is_zero()
    f = KForm.random(np.random.default_rng(0), cube2, z5, 1)
    assert pairing(f, np.zeros(cube2.n_cells(1), dtype=int)) == 0


def test_degree_errors(cube2):
    z2 = build_cyclic(2)
    with pytest.raises(DegreeError):
        exterior_derivative(KForm.zeros(cube2, z2, 4))
    with pytest.raises(DegreeError):
        coderivative(KForm.zeros(cube2, z2, 0))
    with pytest.raises(ValueError):
        exterior_derivative(KForm.zeros(cube2, build_symmetric(3), 1))


@given(groups, st.integers(0, 2), seeds)
def test_dd_zero(group, k, seed):
    f = KForm.random(np.random.default_rng(seed), R3, group, k)
    assert exterior_derivative(exterior_derivative(f)).is_zero()


@given(groups, st.integers(2, 4), seeds)
def test_codd_zero(group, k, seed):
    f = KForm.random(np.random.default_rng(seed), R3, group, k)
    assert coderivative(coderivative(f)).is_zero()


@given(groups, st.integers(0, 3), seeds)
def test_stokes_pairing(group, k, seed):
    rng = np.random.default_rng(seed)
    f = KForm.random(rng, R3, group, k)
    h = rng.integers(-3, 4, R3.n_cells(k + 1))
    assert pairing(f, int_coderivative(R3, k + 1, h)) == pairing(exterior_derivative(f), h)


def test_single_edge_derivative():
    z5 = build_cyclic(5)
    region = CubeRegion((0, 0, 0, 0), 4)
    e = region.edge_index((2, 2, 2, 2), 2)
    df = exterior_derivative(single_edge_form(region, z5, e, 3))
    assert set(np.nonzero(df.values)[0]) == region.minimal_vortex(e)
    assert set(df.values[df.values != 0].tolist()) == {3, 2}


def test_coderivative_of_loops():
    loop = rectangle_loop((1, 1, 1, 1), 2, 3, (2, 4))
    assert not int_coderivative(R8, 1, loop.one_form(R8)).any()
    path = Loop((0, 0, 0, 0), ["+1", "+1", "+3"])
    d = int_coderivative(R8, 1, path.one_form(R8))
    head, tail = R8.vertex_index((2, 0, 1, 0)), R8.vertex_index((0, 0, 0, 0))
    assert d[head] == 1 and d[tail] == -1 and np.abs(d).sum() == 2


def test_surface_fill_small_loops():
    sq = rectangle_loop((2, 2, 2, 2), 1, 1, (1, 2))
    s = surface_fill(sq, R8)
    p = R8.index(OrientedCell((2, 2, 2, 2), (1, 2)))
    assert s.support().tolist() == [p] and abs(s.values[p]) == 1
    rect = rectangle_loop((1, 0, 3, 0), 2, 3, (1, 3))
    s = surface_fill(rect, R8)
    enclosed = {R8.index(OrientedCell((1 + a, 0, 3 + b, 0), (1, 3))) for a in range(2) for b in range(3)}
    assert set(s.support().tolist()) == enclosed
    assert len(set(s.values[list(enclosed)].tolist())) == 1
    assert np.array_equal(int_coderivative(R8, 2, s.values), rect.one_form(R8))


@given(seeds)
def test_surface_fill_random(seed):
    loop = random_loop(np.random.default_rng(seed), R8)
    s = surface_fill(loop, R8)
    assert np.array_equal(int_coderivative(R8, 2, s.values), loop.one_form(R8))


@given(st.sampled_from([2, 3, 6]).map(build_cyclic), seeds)
def test_wilson_surface_equivalence(group, seed):
    rng = np.random.default_rng(seed)
    region = CubeRegion((0, 0, 0, 0), 4)
    loop = random_loop(rng, region)
    sigma = KForm.random(rng, region, group, 1)
    s = surface_fill(loop, region)
    around = pairing(sigma, loop.one_form(region))
    assert around == ordered_loop_sum(sigma.values, group, loop, region)
    assert around == pairing2(exterior_derivative(sigma), s)


def test_poincare_primitive():
    z3 = build_cyclic(3)
    assert poincare_primitive(KForm.zeros(R3, z3, 2)).is_zero()
    rng = np.random.default_rng(4)
    for _ in range(10):
        q = exterior_derivative(KForm.random(rng, R3, z3, 1))
        assert exterior_derivative(poincare_primitive(q)) == q
    region = CubeRegion((0, 0, 0, 0), 4)
    e = region.edge_index((2, 2, 2, 2), 1)
    q = exterior_derivative(single_edge_form(region, z3, e, 1))
    h = poincare_primitive(q)
    dh = exterior_derivative(h)
    assert dh == q and set(np.nonzero(dh.values)[0]) == region.minimal_vortex(e)


def test_poincare_needs_closed():
    z3 = build_cyclic(3)
    q = KForm.zeros(R3, z3, 2)
    q.values[5] = 1
    with pytest.raises(NotClosedError):
        poincare_primitive(q)


def test_int_two_form_json(cube2):
    v = np.zeros(cube2.n_cells(2), dtype=int)
    v[[3, 7]] = [1, -2]
    assert IntTwoForm(cube2, v).to_json() == {"plaquettes": [3, 7], "values": [1, -2]}
