import cmath

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isopair import bcl, koszul as kz
from isopair.spaces import ParameterError


def test_zero_pair_breaks_at_first_and_last_stage():
    r = kz.koszul_finite(np.zeros((1, 1)), np.zeros((1, 1)), 0, 0)
    assert r.ranks == (0, 0)
    assert 1 in r.break_stages and 3 in r.break_stages and not r.nonsingular


def test_diagonal_pair():
    A, B = np.diag([0.2, -0.5j]), np.diag([0.7, 0.1 + 0.1j])
    assert not kz.koszul_finite(A, B, 0.2, 0.7).nonsingular
    assert not kz.koszul_finite(A, B, -0.5j, 0.1 + 0.1j).nonsingular
    assert kz.koszul_finite(A, B, 0.2, 0.1 + 0.1j).nonsingular
    assert kz.koszul_finite(A, B, 0.3, 0.7).nonsingular


def test_report_invariants():
    A, B = np.diag([1, 2, 2]), np.diag([3, 4, 4])
    r = kz.koszul_finite(A, B, 2, 4)
    d = 3
    assert r.exact[0] == (r.ranks[0] == d) and r.exact[2] == (r.ranks[1] == d)
    assert r.exact[1] == (r.ranks[1] == d + (d - r.ranks[0]))
    assert r.commutator_norm == 0.0


def test_non_commuting_rejected():
    A = np.array([[0, 1], [0, 0]])
    with pytest.raises(kz.NonCommuting):
        kz.koszul_finite(A, A.T, 0, 0)
    with pytest.raises(kz.NonCommuting):
        kz.joint_spectrum_finite(A, A.T)


def test_joint_spectrum_examples():
    A, B = np.diag([1, 2, 3]), np.diag([4, 5, 6j])
    assert kz.hausdorff(kz.joint_spectrum_finite(A, B), [(1, 4), (2, 5), (3, 6j)]) <= 1e-12
    J = np.array([[0, 1], [0, 0]])
    assert kz.hausdorff(kz.joint_spectrum_finite(J, J @ J), [(0, 0)]) <= 1e-12


def test_tensor_product_of_normals():
    rng = np.random.default_rng(7)
    T, et = kz._random_normal(rng, 2)
    S, es = kz._random_normal(rng, 2)
    got = kz.joint_spectrum_finite(np.kron(T, np.eye(2)), np.kron(np.eye(2), S))
    assert kz.hausdorff(got, [(a, b) for a in et for b in es]) <= 1e-9


def _grid_scan(A, B, pts, tol=kz.RANK_TOL):
    return [p for p in pts if not kz.koszul_finite(A, B, *p, tol).nonsingular]


def test_swap_spectrum_at_quarter():
    t = kz.swap_triple()
    got = kz.phi_spectrum(t, 0.25)
    assert kz.hausdorff(got.points, [(0.5, 0.5), (-0.5, -0.5)]) <= 1e-12
    # independent oracle: rank scan over a lattice containing the candidates
    A, B = bcl.phi(t, 0.25)
    lattice = [(a / 4, b / 4) for a in range(-4, 5) for b in range(-4, 5)]
    assert sorted(_grid_scan(A, B, lattice)) == [(-0.5, -0.5), (0.5, 0.5)]


def test_zero_block_spectrum_formula():
    u1, u2 = (1.0, 1j), (-1.0, -1j)
    t = kz.zero_block_triple(u1, u2)
    z = 0.3
    want = [(z * np.conj(u), u) for u in u1] + [(np.conj(v), z * v) for v in u2]
    got = kz.phi_spectrum(t, z)
    assert kz.hausdorff(got.points, want) <= 1e-12
    assert kz.hausdorff(kz.predicted_points(t, z), want) <= 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_spectral_mapping_on_random_triples(seed):
    rng = np.random.default_rng(seed)
    t = bcl.random_triple(4, rng, "mixed")
    for z in (0, 0.3, -0.2 + 0.5j):
        for a, b in kz.phi_spectrum(t, z).points:
            assert abs(a * b - z) <= 1e-9


def test_offdiag_prediction_uses_both_square_roots():
    W = np.diag([1, 1j])
    from isopair import models
    t = models.offdiag_pair(W).triple
    z = 0.2 * cmath.exp(0.4j)
    got = kz.phi_spectrum(t, z).points
    r = cmath.sqrt(z)
    want = []
    for th in (0.0, np.pi / 2):
        want += [(s * r * cmath.exp(-0.5j * th), s * r * cmath.exp(0.5j * th)) for s in (1, -1)]
    assert kz.hausdorff(got, want) <= 1e-9


def test_dedup_and_hausdorff():
    pts = [(0, 0), (1e-10, 0), (1, 1)]
    assert len(kz.dedup(pts)) == 2
    assert kz.hausdorff([(0, 0)], [(0, 0), (3, 4)]) == 5.0
    assert kz.hausdorff([], []) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(1, 6))
def test_oracles_agree(seed, d):
    rng = np.random.default_rng(seed)
    A, B = kz.random_commuting_pair(rng, d)
    agree, total = kz.oracle_agreement(A, B, rng)
    assert agree == total


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_conjugation_symmetry(seed):
    assert kz.conjugation_property(np.random.default_rng(seed))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_block_union(seed):
    assert kz.block_property(np.random.default_rng(seed))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_tensor_product_property(seed):
    assert kz.tensor_property(np.random.default_rng(seed))


def test_random_suites_pass():
    assert kz.oracle_suite(1, count=60)["passed"]
    assert kz.reducing_suite(1, count=15)["passed"]


# --------------------------------------------------------------------------
# certificates

def test_psi_forward_certificate():
    s = kz.eigvec_certificate("psi", 0.5, 0.2, eps=1e-12)
    assert s.in_spectrum and s.break_stages == (1,) and s.certificate == "eigvec_forward"
    assert s.residual <= 1e-10 and s.residual <= max(s.bound, 1e-13)
    assert abs(s.z - 0.1) <= 1e-15


def test_eta_certificate_at_origin_is_exact():
    s = kz.eigvec_certificate("eta", 0, 0)
    assert s.residual == 0.0 and s.in_spectrum and s.break_stages == (3,)
    assert s.extra["tail_bound"] == 0.0


def test_pos_kernel_certificate():
    s = kz.eigvec_certificate("pos", 0.5, 0.25j)
    assert s.in_spectrum and s.certificate == "eigvec_adjoint"
    assert s.residual <= max(s.bound, 1e-13)


def test_certificate_rejects_outside_points():
    with pytest.raises(ParameterError):
        kz.eigvec_certificate("psi", 1.0, 0.1)
    with pytest.raises(ValueError):
        kz.eigvec_certificate("nope", 0.1, 0.1)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.9, allow_subnormal=False), st.floats(0, 6.28),
       st.floats(0, 0.9, allow_subnormal=False), st.floats(0, 6.28), st.sampled_from(["psi", "eta"]))
def test_certificates_hold_across_the_bidisc(r1, t1, r2, t2, subject):
    l1, l2 = r1 * cmath.exp(1j * t1), r2 * cmath.exp(1j * t2)
    s = kz.eigvec_certificate(subject, l1, l2)
    assert s.in_spectrum, (s.residual, s.bound)


@pytest.mark.parametrize("l1, l2", [(1.4e-157, 0), (2.3e-308, 0.5), (0.89, 1e-200), (1e-300, 1e-300)])
def test_certificates_near_the_axes(l1, l2):
    # the closed forms carry 1/l1 (psi) or 1/conj(l2) (eta), so the vectors are huge here
    assert kz.eigvec_certificate("psi", l1, l2).in_spectrum
    assert kz.eigvec_certificate("eta", l2, l1).in_spectrum


def test_subnormal_parameter_is_reported():
    with pytest.raises(ParameterError):
        kz.eigvec_certificate("psi", 1e-320, 0.3)


def test_stage2_trivial_origin():
    r = kz.stage2_certificate_neg(0, 0, N=10, M=10)
    assert r.pattern_ok and r.sufficient and r.passed
    assert all(p == 0 for p in r.pairings)


def test_stage2_at_interior_point():
    r = kz.stage2_certificate_neg(0.3, 0.5j, N=40, M=20)
    assert r.passed and max(map(abs, r.pairings)) <= 1e-10


def test_stage2_flags_insufficient_truncation():
    r = kz.stage2_certificate_neg(0.9, 0.9, N=40, M=5)
    assert not r.sufficient and not r.passed


# --------------------------------------------------------------------------
# grids and scans

def test_grids():
    assert kz.parse_grid("12x12") == (12, 12)
    with pytest.raises(ValueError):
        kz.parse_grid("12by12")
    zs = kz.z_grid(12, 12)
    assert len(zs) == 133 and all(abs(z) < 1 for z in zs) and zs[0] == 0
    assert len(kz.lambda_grid(24, 24)) == 576


def test_offdiag_scan():
    from isopair import models
    res = kz.scan(models.offdiag_pair(np.diag([1, 1j])))
    assert res.passed
    lo_side, hi_side = res.summary["hausdorff_one_sided"]
    assert max(lo_side, hi_side) <= res.summary["grid_resolution"] + 1e-9


def test_zero_block_scan_stages():
    res = kz.scan(kz.zero_block_triple(), zgrid="6x6")
    assert res.passed
    for s in res.samples:
        if s.in_spectrum:
            assert s.break_stages == (3,)
            assert abs(s.point[0] * s.point[1] - s.z) <= 1e-9


def test_infinite_scan_is_certificate_only():
    res = kz.scan("psi", lgrid="4x4")
    assert {s.certificate for s in res.samples} == {"eigvec_forward"}
    assert res.summary["certified_in_spectrum"] == 16
    assert res.csv_lines()[0] == ",".join(kz.CSV_HEADER)
