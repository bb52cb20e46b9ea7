import numpy as np
import pytest

from isopair import bcl, defect, linops as lo, models
from isopair.spaces import HARDY_BIDISC

W = np.diag([1, 1j])


def img(op, c):
    return dict(op.image(c))


def test_pos_pair_action():
    p = models.pos_pair()
    assert img(p.V1, (2, 3)) == {(3, 3): 1.0}
    assert img(p.V2, (2, 3)) == {(2, 4): 1.0}


def _u_oracle(a, b):
    # the three-case map written out directly
    if a >= b:
        return (a + 2, b)
    if a + 1 == b:
        return (a + 1, b - 1)
    return (a, b - 2)


def test_special_unitary_is_the_case_map_and_unitary():
    U = models.special_unitary()
    win = HARDY_BIDISC.window(12)
    for c in win:
        assert img(U, c) == {_u_oracle(*c): 1.0}
        assert lo.apply(U.H @ U, lo.SparseVec.basis(HARDY_BIDISC.scheme_id, c)).entries == {c: 1.0}
        assert lo.apply(U @ U.H, lo.SparseVec.basis(HARDY_BIDISC.scheme_id, c)).entries == {c: 1.0}


def test_neg_pair_on_constants():
    n = models.neg_pair()
    assert img(n.V1, (0, 0)) == {(0, 1): 1.0}
    assert img(n.V2, (0, 0)) == {(2, 1): 1.0}


def test_neg_pair_defect_is_minus_projection_on_z2():
    n = models.neg_pair()
    rep = defect.defect_window_matrix(n.V1, n.V2, n.scheme, 6)
    ref = np.zeros_like(rep.matrix)
    i = rep.window.index((0, 1))
    ref[i, i] = -1
    np.testing.assert_array_equal(rep.matrix, ref)


def test_zero_pair_scalar_and_diag():
    m = models.zero_pair(np.eye(1))
    win = m.window(5)
    np.testing.assert_array_equal(lo.compress(m.V2, win), np.eye(len(win)))
    rep = defect.defect_window_matrix(m.V1, m.V2, m.scheme, 5)
    assert not np.any(rep.matrix)
    rep = defect.defect_window_matrix(*(lambda p: (p.V1, p.V2, p.scheme))(models.zero_pair(W)), 5)
    assert not np.any(rep.matrix)


def test_twisted_zero_pair_is_equivalent_to_plain():
    plain, twisted = models.zero_pair(W), models.zero_pair_twisted(W)
    Lam = models.intertwiner_zero(W)
    win = plain.window(6)
    for A, B in ((twisted.V1, plain.V1), (twisted.V2, plain.V2)):
        assert max(lo._diff_max(lo._act(Lam, A.image(c)), lo._act(B, Lam.image(c))) for c in win) == 0.0


def test_offdiag_defect_and_equal_ranges():
    m = models.offdiag_pair(W)
    rep = defect.defect_window_matrix(m.V1, m.V2, m.scheme, 5)
    ref = np.diag([1.0 if c[0] == 0 else -1.0 if c[0] == 1 else 0.0 for c in rep.window])
    np.testing.assert_array_equal(rep.matrix, ref)
    K = rep.kernel_bases
    assert defect._proj_dev(K["ker_V1*"], K["ker_V2*"], m.window(5)) == 0.0


def test_offdiag_scalar_twist_kernel():
    m = models.offdiag_pair(np.array([[np.exp(0.7j)]]))
    K = lo.kernel_basis((m.V1 @ m.V2).H, m.window(6))
    assert sorted(c for v in K.vectors() for c in v.entries) == [(0, 0), (1, 0)]


def test_intertwiner_neg_on_monomial():
    assert img(models.intertwiner_neg(), (3, 1)) == {(1, 2): 1.0}
    assert img(models.intertwiner_neg(), (1, 3)) == {(1, -2): 1.0}


@pytest.mark.parametrize("make", [models.pos_pair, models.neg_pair, lambda: models.zero_pair(W),
                                  lambda: models.offdiag_pair(W), lambda: models.offdiag_pair(np.eye(1)),
                                  lambda: models.zero_pair_twisted(W)])
def test_intertwiners_are_unitary_and_intertwine(make):
    rep = models.intertwiner_report(make(), 8)
    for key in ("gram_deviation", "coisometry_deviation", "intertwining_V1", "intertwining_V2"):
        assert rep[key] == 0.0, key


def test_invariant_embedding():
    J = models.invariant_embedding()
    assert img(J, (0, 0)) == {(0, 0): 1.0}
    assert img(J, (0, 1)) == {(2, 1): 1.0}
    rep = models.embedding_report(4)
    assert rep["gram_deviation"] == 0.0
    assert rep["compression_deviation_1"] == 0.0 and rep["compression_deviation_2"] == 0.0
    # the restriction to ran J has the positive defect E_(0,0)
    n = models.neg_pair()
    win = HARDY_BIDISC.window(4)
    A, B = J.H @ n.V1 @ J, J.H @ n.V2 @ J
    C = lo.compress(defect.defect_op(A, B), win)
    ref = np.zeros_like(C)
    ref[0, 0] = 1
    np.testing.assert_array_equal(C, ref)


def test_tensor_and_sum_classes():
    t = models.tensor_multiplicity(models.neg_pair(), 2)
    rep = defect.defect_window_matrix(t.V1, t.V2, t.scheme, 5)
    assert rep.cls.tag == bcl.NEGATIVE and rep.cls.evidence == (-1.0, -1.0)
    s = models.direct_sum(models.pos_pair(), models.zero_pair(W))
    assert s.declared_class == bcl.POSITIVE
    assert defect.classify_defect(s.V1, s.V2, s.scheme, 5).tag == bcl.POSITIVE
    s = models.direct_sum(models.pos_pair(), models.neg_pair())
    assert s.declared_class == bcl.MIXED
    assert defect.classify_defect(s.V1, s.V2, s.scheme, 5).tag == bcl.MIXED


def test_sum_rule():
    assert models.sum_class(bcl.ZERO, bcl.NEGATIVE) == bcl.NEGATIVE
    assert models.sum_class(bcl.OFFDIAG, bcl.ZERO) == bcl.MIXED
    assert models.sum_class(bcl.OFFDIAG, bcl.OFFDIAG) == bcl.OFFDIAG


def test_shipped_declared_classes_are_certified(shipped):
    for m in shipped:
        c = defect.classify_defect(m.V1, m.V2, m.scheme, 6)
        assert c.tag == m.declared_class and c.support_certified, m.name


def test_resolve_grammar(tmp_path):
    assert models.resolve("pos").declared_class == bcl.POSITIVE
    assert models.resolve("offdiag:diag(1,i)").scheme.label_kind == "VectorHardy"
    assert models.resolve("tensor:neg:3").declared_class == bcl.NEGATIVE
    assert models.resolve("sum:pos:zero:diag(1)").declared_class == bcl.POSITIVE
    p = tmp_path / "w.json"
    import json
    p.write_text(json.dumps(models.matrix_to_json(W)))
    assert models.resolve(f"zero:{p}").name == f"zero:{p}"
    for bad in ("", "foo", "zero", "pos:extra", "tensor:pos"):
        with pytest.raises(models.UnknownModel):
            models.resolve(bad)
    with pytest.raises(ValueError):
        models.resolve("zero:diag(2)")
