import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import dense_defect
from isopair import bcl, defect, linops as lo, models
from isopair.spaces import HARDY_DISC, vector_hardy

W = np.diag([1, 1j])


def report(m, grade):
    return defect.defect_window_matrix(m.V1, m.V2, m.scheme, grade)


def test_pos_defect_is_constants_projection():
    r = report(models.pos_pair(), 6)
    assert r.cls.tag == bcl.POSITIVE and r.cls.evidence == (1.0,) and r.cls.support_certified
    ref = np.zeros_like(r.matrix)
    ref[0, 0] = 1
    np.testing.assert_array_equal(r.matrix, ref)
    assert r.boundary_ring_max == 0.0


def test_neg_defect_eigenvalue():
    r = report(models.neg_pair(), 6)
    assert r.cls.tag == bcl.NEGATIVE and r.cls.evidence == (-1.0,)


def test_offdiag_eigenvalues():
    r = report(models.offdiag_pair(W), 6)
    assert r.cls.tag == bcl.OFFDIAG and r.cls.evidence == (-1.0, -1.0, 1.0, 1.0)


def test_report_json_shape():
    j = report(models.pos_pair(), 4).to_json()
    assert set(j) == {"window_grade", "eigenvalues", "class", "support_certified", "boundary_ring_max"}
    assert j["eigenvalues"] == [1.0]


@pytest.mark.parametrize("grade", [3, 6])
def test_direct_defect_matches_dense_product_oracle(shipped, grade):
    for m in shipped:
        np.testing.assert_allclose(report(m, grade).matrix, dense_defect(m, grade), atol=1e-13,
                                   err_msg=m.name)


def test_three_routes_agree_on_shipped_models(shipped):
    for m in shipped:
        a = defect.defect_agreement(m, 8)
        assert a.stabilized and a.support_certified, m.name
        assert a.max_deviation <= 1e-12, m.name


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.integers(0, 2**31 - 1), st.sampled_from(["zero", "offdiag", "mixed"]))
def test_three_routes_agree_on_random_triples(d, seed, kind):
    d = d + (d % 2) if kind == "offdiag" else max(d, 2 if kind == "mixed" else 1)
    t = bcl.random_triple(d, np.random.default_rng(seed), kind)
    a = defect.defect_agreement(models.triple_pair(t), 4)
    assert a.max_deviation <= 1e-12
    # the triple formula alone, without the lazy plumbing, also matches
    V1, V2 = bcl.multiplier_pair(t)
    np.testing.assert_allclose(defect.defect_window_matrix(V1, V2, t.scheme, 4).matrix,
                               bcl.defect_from_triple(t, 4), atol=1e-12)


def test_pos_kernel_dimensions():
    m = models.pos_pair()
    for N in (3, 6):
        r = defect.verify_projection_identities(m.V1, m.V2, m.scheme, N)
        assert r.stabilized and r.max_deviation == 0.0
        assert r.dims["ker_V*"] == 2 * N + 1
        assert (r.dims["ker_V1*"], r.dims["V1(ker_V2*)"]) == (N + 1, N)
        assert (r.dims["ker_V2*"], r.dims["V2(ker_V1*)"]) == (N + 1, N)


def test_neg_first_kernel_is_high_powers_of_z2():
    m = models.neg_pair()
    rep = report(m, 6)
    K1 = rep.kernel_bases["ker_V1*"]
    support = sorted(c for v in K1.vectors() for c in v.entries if sum(c) <= 6)
    assert support == [(0, n) for n in range(2, 7)]
    r = defect.verify_projection_identities(m.V1, m.V2, m.scheme, 6)
    assert r.max_deviation <= 1e-12
    assert r.dims["ker_V1*"] + r.dims["V1(ker_V2*)"] == r.dims["ker_V*"]
    assert r.dims["ker_V2*"] + r.dims["V2(ker_V1*)"] == r.dims["ker_V*"]


def test_unitary_second_component_collapses():
    m = models.zero_pair(W)
    r = defect.verify_projection_identities(m.V1, m.V2, m.scheme, 5)
    assert r.dims["ker_V2*"] == 0 and r.dims["V2(ker_V1*)"] == r.dims["ker_V1*"]
    assert not np.any(report(m, 5).matrix)


def test_fringe_examples():
    F1, F2 = defect.fringe_matrices(*(lambda m: (m.V1, m.V2, m.scheme))(models.zero_pair(W)), 5)
    assert F1.isometry_deviation == 0.0 and F1.coisometry_deviation == 0.0
    F1, F2 = defect.fringe_matrices(*(lambda m: (m.V1, m.V2, m.scheme))(models.pos_pair()), 5)
    assert F1.isometry_deviation == 0.0 and not F1.is_coisometry()
    F1, F2 = defect.fringe_matrices(*(lambda m: (m.V1, m.V2, m.scheme))(models.offdiag_pair(W)), 5)
    assert F1.is_zero() and F2.is_zero()


def test_fringe_class_agrees_with_defect_class(shipped):
    for m in shipped + [models.zero_pair_twisted(W), models.tensor_multiplicity(models.neg_pair(), 2)]:
        F1, F2 = defect.fringe_matrices(m.V1, m.V2, m.scheme, 5)
        assert defect.fringe_class(F1, F2) == m.declared_class, m.name


def test_wold_examples():
    r = defect.wold(bcl.hardy_shift(), HARDY_DISC, 7)
    assert (r.wandering_dim, r.shift_part_dim, r.residual_dim) == (1, 8, 0)
    sch = vector_hardy(2)
    U = bcl.kron(lo.identity(HARDY_DISC.scheme_id), bcl.matrix_op(W), sch)
    r = defect.wold(U, sch, 4)
    assert r.wandering_dim == 0 and r.shift_part_dim == 0 and r.residual_dim == r.window_size
    n = models.neg_pair()
    r = defect.wold(n.V1 @ n.V2, n.scheme, 8)
    # a pure isometry: only vectors whose orbit would exit the window are left over
    assert r.residual_min_grade is None or r.residual_min_grade > 8 - 3


EXPECTED = {bcl.ZERO: {"zero", "doubly_commuting"}, bcl.POSITIVE: {"positive", "doubly_commuting"},
            bcl.NEGATIVE: {"negative"}, bcl.OFFDIAG: {"off_diagonal"}, bcl.MIXED: set()}


def _true_ladders(rep):
    return {k for k, items in rep.ladders.items() if all(items.values())}


def test_ladders_on_shipped_models(shipped):
    for m in shipped:
        rep = defect.equivalence_suite(m.V1, m.V2, m.scheme, 4, m.triple)
        assert rep.consistent, (m.name, rep.offending)
        assert _true_ladders(rep) == EXPECTED[m.declared_class], m.name


def test_neg_strict_containment_and_pos_double_commutation():
    n = models.neg_pair()
    rep = defect.equivalence_suite(n.V1, n.V2, n.scheme, 4)
    assert all(rep.ladders["negative"].values())
    p = models.pos_pair()
    rep = defect.equivalence_suite(p.V1, p.V2, p.scheme, 4)
    assert all(rep.ladders["doubly_commuting"].values()) and all(rep.ladders["positive"].values())


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1), st.sampled_from(["zero", "offdiag", "mixed"]))
def test_ladders_uniform_on_random_triples(d, seed, kind):
    d = d + (d % 2) if kind == "offdiag" else d
    t = bcl.random_triple(d, np.random.default_rng(seed), kind)
    V1, V2 = bcl.multiplier_pair(t)
    rep = defect.equivalence_suite(V1, V2, t.scheme, 3, t)
    assert rep.consistent, rep.offending
    assert _true_ladders(rep) == EXPECTED[bcl.classify(t).tag]
