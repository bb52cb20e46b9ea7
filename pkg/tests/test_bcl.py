import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isopair import bcl, defect, linops as lo, models
from isopair.spaces import BILATERAL, vector_hardy

SWAP = np.array([[0, 1], [1, 0]], dtype=complex)


def test_phi_at_origin_for_swap():
    t = bcl.finite_triple(SWAP, np.diag([1, 0]))
    p1, p2 = bcl.phi(t, 0)
    # oracle: U* times the complement, projection times U
    Q = np.diag([0, 1])
    np.testing.assert_array_equal(p1, SWAP.conj().T @ Q)
    np.testing.assert_array_equal(p2, np.diag([1, 0]) @ SWAP)
    np.testing.assert_array_equal(p1, [[0, 1], [0, 0]])
    # the projection acts after U; the reversed order U P would give the transpose
    np.testing.assert_array_equal(p2, [[0, 1], [0, 0]])
    np.testing.assert_array_equal(p1 @ p2, np.zeros((2, 2)))


def test_phi_at_one_on_bilateral_preset():
    t = bcl.bilateral_p_minus()
    p1, p2 = bcl.phi(t, 1)
    win = BILATERAL.window(5)
    w = bcl.bilateral_shift()
    np.testing.assert_array_equal(lo.compress(p1, win), lo.compress(w.H, win))
    np.testing.assert_array_equal(lo.compress(p2, win), lo.compress(w, win))


def _grid16():
    return [r * np.exp(2j * np.pi * k / 4 + 0.3j) for r in (0, 0.3, 0.6, 0.95) for k in range(4)]


@pytest.mark.parametrize("seed", range(5))
def test_phi_product_is_scalar(seed):
    rng = np.random.default_rng(seed)
    t = bcl.random_triple(4, rng, "mixed")
    for z in _grid16():
        p1, p2 = bcl.phi(t, z)
        assert np.max(np.abs(p1 @ p2 - z * np.eye(4))) <= 1e-12
        assert np.max(np.abs(p2 @ p1 - z * np.eye(4))) <= 1e-12


def test_phi_product_on_lazy_presets():
    for t in (bcl.bilateral_p_minus(), bcl.bilateral_p_zero_plus()):
        win = BILATERAL.window(6)
        for z in _grid16():
            p1, p2 = bcl.phi(t, z)
            m = lo.compress(p1 @ p2, win)
            assert np.max(np.abs(m - z * np.eye(len(win)))) <= 1e-12


def test_preset_fiber_defects():
    win = BILATERAL.window(4)
    e = {c: i for i, c in enumerate(win)}
    Dm = lo.compress(bcl.fiber_defect_op(bcl.bilateral_p_minus()), win)
    ref = np.zeros_like(Dm)
    ref[e[(-1,)], e[(-1,)]] = -1
    np.testing.assert_array_equal(Dm, ref)
    Dp = lo.compress(bcl.fiber_defect_op(bcl.bilateral_p_zero_plus()), win)
    np.testing.assert_array_equal(Dp, -ref)


def test_multiplier_pair_with_zero_projection():
    U = bcl.random_unitary(3, np.random.default_rng(1))
    t = bcl.finite_triple(U, np.zeros((3, 3)))
    V1, V2 = bcl.multiplier_pair(t)
    win = t.scheme.window(3)
    sch = vector_hardy(3)
    ref1 = bcl.kron(lo.identity("HardyDisc"), bcl.matrix_op(U.conj().T), sch)
    ref2 = bcl.kron(bcl.hardy_shift(), bcl.matrix_op(U), sch)
    assert np.max(np.abs(lo.compress(V1, win) - lo.compress(ref1, win))) <= 1e-15
    assert np.max(np.abs(lo.compress(V2, win) - lo.compress(ref2, win))) <= 1e-15


def test_multiplier_product_is_shift_tensor_identity():
    t = bcl.random_triple(3, np.random.default_rng(2), "mixed")
    V1, V2 = bcl.multiplier_pair(t)
    win = t.scheme.window(5)
    ref = bcl.kron(bcl.hardy_shift(), bcl.matrix_op(np.eye(3)), t.scheme)
    assert np.max(np.abs(lo.compress(V1 @ V2, win) - lo.compress(ref, win))) <= 1e-12
    rep = lo.window_checks((V1, V2), win)
    assert rep.deviations["isometry1"] <= 1e-12 and rep.deviations["commutation"] <= 1e-12


def test_swap_defect_is_offdiagonal():
    t = bcl.finite_triple(SWAP, np.diag([1, 0]))
    D = bcl.defect_from_triple(t, 0)
    np.testing.assert_array_equal(D, np.diag([-1, 1]))
    assert bcl.classify(t).tag == bcl.OFFDIAG


def test_classification_examples():
    U = bcl.random_unitary(3, np.random.default_rng(3))
    assert bcl.classify(bcl.finite_triple(U, np.eye(3))).tag == bcl.ZERO
    perm = np.eye(4)[[1, 0, 3, 2]]
    assert bcl.classify(bcl.finite_triple(perm, np.diag([1, 0, 1, 0]))).tag == bcl.OFFDIAG
    c = bcl.classify(bcl.bilateral_p_minus())
    assert c.tag == bcl.NEGATIVE and c.support_certified and c.evidence == (-1.0,)
    c = bcl.classify(bcl.bilateral_p_zero_plus())
    assert c.tag == bcl.POSITIVE and c.support_certified and c.evidence == (1.0,)


def test_invalid_triples():
    with pytest.raises(bcl.InvalidTriple):
        bcl.finite_triple(np.array([[2.0]]), np.eye(1))
    with pytest.raises(bcl.InvalidTriple):
        bcl.finite_triple(np.eye(2), np.array([[1, 1], [0, 0]]))


def test_random_kinds_have_expected_class():
    rng = np.random.default_rng(4)
    for _ in range(10):
        assert bcl.classify(bcl.random_triple(4, rng, "zero")).tag == bcl.ZERO
        assert bcl.classify(bcl.random_triple(4, rng, "offdiag")).tag == bcl.OFFDIAG
        # finite traces vanish, so a nonzero finite defect has both signs
        assert bcl.classify(bcl.random_triple(4, rng, "mixed")).tag in (bcl.MIXED, bcl.OFFDIAG)


def test_json_roundtrip(tmp_path):
    t = bcl.random_triple(3, np.random.default_rng(5), "mixed")
    p = tmp_path / "t.json"
    p.write_text(json.dumps(bcl.triple_to_json(t)))
    back = bcl.load_triple(str(p))
    np.testing.assert_array_equal(back.U, t.U)
    np.testing.assert_array_equal(back.P, t.P)
    assert bcl.load_triple("bilateral_p_minus").name == "bilateral_p_minus"
    with pytest.raises(bcl.InvalidTriple):
        bcl.triple_from_json({"preset": "nope"})


def test_sarkar_on_scalar_offdiagonal_pair():
    m = models.offdiag_pair(np.eye(1))
    t = bcl.sarkar_triple(m.V1, m.V2, m.scheme, 6)
    assert t.dim == 2
    assert bcl.classify(t).tag == bcl.OFFDIAG
    # kernel of V* is spanned by 1 and z
    assert sorted(c for v in t.meta["basis"].vectors() for c in v.entries) == [(0, 0), (1, 0)]


def test_sarkar_zero_pair_gives_reducing_projection():
    m = models.zero_pair(np.diag([1, 1j]))
    t = bcl.sarkar_triple(m.V1, m.V2, m.scheme, 5)
    assert bcl.classify(t).tag == bcl.ZERO
    np.testing.assert_allclose(t.P, np.eye(t.dim), atol=1e-13)


def test_sarkar_reports_growing_kernel():
    m = models.pos_pair()
    with pytest.raises(bcl.WindowTooSmall):
        bcl.sarkar_triple(m.V1, m.V2, m.scheme, 6)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1), st.sampled_from(["zero", "offdiag", "mixed"]))
def test_sarkar_reproduces_defect_spectrum(d, seed, kind):
    if kind == "offdiag" and d % 2:
        d += 1
    t = bcl.random_triple(d, np.random.default_rng(seed), kind)
    V1, V2 = bcl.multiplier_pair(t)
    s = bcl.sarkar_triple(V1, V2, t.scheme, 3)
    a, b = bcl.classify(t), bcl.classify(s)
    assert a.tag == b.tag
    assert np.allclose(a.evidence, b.evidence, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31 - 1))
def test_offdiagonal_iff_fringes_vanish(d, seed):
    rng = np.random.default_rng(seed)
    kind = "offdiag" if (seed % 2 == 0 and d % 2 == 0) else "mixed"
    t = bcl.random_triple(d, rng, kind)
    V1, V2 = bcl.multiplier_pair(t)
    F1, F2 = defect.fringe_matrices(V1, V2, t.scheme, 2)
    U, P = t.U, t.P
    off = np.max(np.abs(U.conj().T @ P @ U - (np.eye(d) - P))) <= 1e-10
    assert off == (F1.is_zero() and F2.is_zero())


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1), st.sampled_from(["zero", "mixed"]))
def test_zero_iff_doubly_commuting_and_no_defect(d, seed, kind):
    if kind == "mixed" and d < 2:
        d = 2
    t = bcl.random_triple(d, np.random.default_rng(seed), kind)
    V1, V2 = bcl.multiplier_pair(t)
    win = t.scheme.window(3)
    dc = lo.window_checks((V1, V2), win).deviations["double_commutation"] <= 1e-10
    C = defect.defect_window_matrix(V1, V2, t.scheme, 3).matrix
    assert (bcl.classify(t).tag == bcl.ZERO) == (dc and np.max(np.abs(C)) <= 1e-10)
