import cmath
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from finlgt.errors import DegenerateSpectrumError, GroupAxiomError, InvalidOrderError, OrderTooSmallError
from finlgt.groups import (
    GroupTable,
    a_beta,
    a_beta_op_norm,
    build_cyclic,
    build_dihedral,
    build_quaternion,
    build_symmetric,
    builtin_rep_ids,
    c_beta_abelian,
    c_beta_main,
    cyclic_character_rep,
    is_faithful,
    load_custom,
    log_r_beta,
    phi_beta,
    phi_table,
    r_beta,
    regular_faithful_subrep,
    rep_by_id,
    spectrum,
    standard_rep_symmetric,
)


def test_cyclic_tables():
    z1 = build_cyclic(1)
    assert z1.order == 1 and z1.mul[0, 0] == 0
    z2 = build_cyclic(2)
    assert z2.mul[1, 1] == 0 and z2.inv[1] == 1
    z6 = build_cyclic(6)
    for a, b in itertools.product(range(6), repeat=2):
        assert z6.mul[a, b] == (a + b) % 6
    assert z6.mul[4, 5] == 3 and z6.inv[5] == 1


def test_cyclic_rejects_bad_order():
    with pytest.raises(InvalidOrderError):
        build_cyclic(0)


def test_symmetric_is_nonabelian_and_matches_composition():
    s3 = build_symmetric(3)
    assert s3.order == 6 and not s3.is_abelian
    perms = s3.permutations
    for a, b in itertools.product(range(6), repeat=2):
        composed = tuple(perms[a][perms[b][i]] for i in range(3))
        assert perms[s3.mul[a, b]] == composed


def test_quaternion_has_one_involution():
    q8 = build_quaternion()
    assert q8.order == 8
    assert sum(1 for g in range(8) if q8.element_order(g) == 2) == 1


def _isomorphic(g, h):
    if g.order != h.order:
        return False
    n = g.order
    for perm in itertools.permutations(range(1, n)):
        f = (0,) + perm
        if all(f[g.mul[a, b]] == h.mul[f[a], f[b]] for a in range(n) for b in range(n)):
            return True
    return False


def test_dihedral3_isomorphic_to_s3():
    d3, s3 = build_dihedral(3), build_symmetric(3)
    assert sorted(d3.element_orders()) == sorted(s3.element_orders())
    assert _isomorphic(d3, s3)


def test_custom_group_axiom_failure():
    bad = np.array([[0, 1], [1, 1]])
    with pytest.raises(GroupAxiomError):
        GroupTable(bad)


def test_load_custom_roundtrip():
    doc = {"order": 3, "mul_table": [[(a + b) % 3 for b in range(3)] for a in range(3)],
           "reps": [{"dim": 1, "matrices": [{"re": [[math.cos(2 * math.pi * k / 3)]],
                                              "im": [[math.sin(2 * math.pi * k / 3)]]} for k in range(3)]}]}
    group, reps = load_custom(doc)
    assert group.order == 3 and reps[0].dim == 1
    assert is_faithful(reps[0])


@pytest.mark.parametrize("rid", builtin_rep_ids())
def test_catalog_residuals(rid):
    rep = rep_by_id(rid)
    res = rep.residuals()
    assert max(res.values()) <= 1e-12


def test_cyclic_characters():
    assert rep_by_id("z2-sign").matrices[1, 0, 0] == -1
    z3 = rep_by_id("z3-k1")
    assert abs(z3.matrices[1, 0, 0] - cmath.exp(2j * math.pi / 3)) < 1e-15
    assert is_faithful(z3)
    z4 = cyclic_character_rep(build_cyclic(4), 2)
    assert z4.matrices[1, 0, 0] == -1 and not is_faithful(z4)
    assert is_faithful(rep_by_id("s3-std2"))


def test_regular_subrep():
    with pytest.raises(OrderTooSmallError):
        regular_faithful_subrep(build_cyclic(2))
    z3 = regular_faithful_subrep(build_cyclic(3))
    assert z3.dim == 2 and abs(spectrum(z3).a_limit_op_norm - 0.5) < 1e-10
    s3 = regular_faithful_subrep(build_symmetric(3))
    assert s3.dim == 5
    a = sum(s3.matrices[g] for g in range(1, 6)) / 5
    assert abs(np.linalg.svd(a, compute_uv=False).max() - 0.2) < 1e-10


def test_spectrum_examples():
    z2 = spectrum(rep_by_id("z2-sign"))
    assert z2.delta_g == 2 and z2.a_limit_op_norm == 1 and z2.a_limit[0, 0] == -1
    z3 = spectrum(rep_by_id("z3-k1"))
    assert abs(z3.delta_g - 1.5) < 1e-14 and z3.g0 == {1, 2}
    assert abs(z3.a_limit[0, 0] + 0.5) < 1e-14
    s3rep = rep_by_id("s3-std2")
    s3 = spectrum(s3rep)
    assert abs(s3.delta_g - 2) < 1e-12
    transpositions = {g for g, p in enumerate(s3rep.group.permutations)
                      if sum(p[i] != i for i in range(3)) == 2}
    assert s3.g0 == transpositions
    assert np.abs(s3.a_limit).max() < 1e-12


def test_phi_and_r_beta_values():
    z2, z3 = rep_by_id("z2-sign"), rep_by_id("z3-k1")
    assert phi_beta(z2, 0.0, 1) == 1.0
    assert abs(phi_beta(z2, 1.0, 1) - math.exp(-2)) < 1e-16
    assert abs(phi_beta(z3, 2.0, 1) - math.exp(-3)) < 1e-15
    for beta in (0.3, 1.0, 4.0):
        assert abs(r_beta(z2, beta) - math.exp(-12 * beta)) <= 1e-14 * math.exp(-12 * beta)
        assert abs(r_beta(z3, beta) - 2 * math.exp(-9 * beta)) <= 1e-13 * math.exp(-9 * beta)
    for rid in ("z2-sign", "z6-k1", "s3-std2", "q8-2d"):
        rep = rep_by_id(rid)
        assert r_beta(rep, 0.0) == rep.group.order - 1
    assert abs(log_r_beta(z3, 400.0) - (math.log(2) - 3600)) < 1e-9


def test_a_beta_examples():
    assert a_beta(rep_by_id("z2-sign"), 3.0)[0, 0] == -1
    q8 = rep_by_id("q8-2d")
    uniform = sum(q8.matrices[1:]) / 7
    assert np.abs(a_beta(q8, 0.0) - uniform).max() < 1e-14
    assert abs(a_beta(rep_by_id("z3-k1"), 10.0)[0, 0] + 0.5) < 1e-15


def test_c_beta():
    with pytest.raises(DegenerateSpectrumError):
        c_beta_main(rep_by_id("z2-sign"), 1.0)
    with pytest.raises(DegenerateSpectrumError):
        c_beta_abelian(rep_by_id("z2-sign"), 1.0)
    assert c_beta_main(rep_by_id("z3-k1"), 50.0) == pytest.approx(2.0 ** -19 * math.log(2), rel=1e-12)
    s3 = rep_by_id("s3-std2")
    # A_beta = -w I / (3 + 2w), w = exp(-300): the 3-cycles sum to -I
    assert c_beta_main(s3, 50.0) == pytest.approx(2.0 ** -19 * (300 + math.log(3)), rel=1e-9)
    # once the 3-cycle weight underflows the transpositions cancel exactly
    assert np.abs(a_beta(s3, 2e4)).max() == 0
    assert c_beta_main(s3, 2e4) == 0.15


@given(st.sampled_from(builtin_rep_ids()), st.floats(0, 20))
def test_a_beta_hermitian_and_contractive(rid, beta):
    rep = rep_by_id(rid)
    a = a_beta(rep, beta)
    assert np.abs(a - a.conj().T).max() == 0
    assert a_beta_op_norm(rep, beta) <= 1 + 1e-12


@given(st.sampled_from(builtin_rep_ids()), st.floats(0, 20))
def test_phi_symmetric_under_inverse(rid, beta):
    rep = rep_by_id(rid)
    phi = phi_table(rep, beta)
    assert np.array_equal(phi, phi[rep.group.inv])


@pytest.mark.parametrize("gid", ["z1", "z2", "z5", "z8", "s3", "s4", "d4", "d5", "q8"])
def test_group_axioms_exhaustive(gid):
    from finlgt.groups import group_by_id

    g = group_by_id(gid)
    m = g.mul
    n = g.order
    assert np.array_equal(m[0], np.arange(n)) and np.array_equal(m[:, 0], np.arange(n))
    assert np.all(m[np.arange(n), g.inv] == 0)
    # (ab)c == a(bc) for all triples
    assert np.array_equal(m[m[:, :, None], np.arange(n)], m[np.arange(n)[:, None, None], m[None, :, :]])


def test_standard_rep_needs_symmetric_group():
    from finlgt.errors import RepresentationError

    with pytest.raises(RepresentationError):
        standard_rep_symmetric(build_cyclic(3))
