"""Defect and fringe operators of a commuting isometric pair, computed on windows.

All quantities come from exact basis actions.  Kernels are taken inside a
window enlarged by the pair's band radius and then compressed back, which
is exact as long as the kernels are spanned by vectors of bounded grade
(checked by enlarging twice and comparing).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linops as lo
from .bcl import (MIXED, NEGATIVE, OFFDIAG, POSITIVE, SIGN_TOL, ZERO, BclTriple, DefectClass,
                  matrix_op, nonzero_eigenvalues, tag_from)
from .linops import LazyOp, Subspace
from .spaces import BILATERAL, IndexScheme

FORMAT_VERSION = "isopair-report/1"
LADDER_TOL = 1e-9


class KernelNotStabilized(RuntimeError):
    pass


def _band(V1: LazyOp, V2: LazyOp) -> int:
    return max(V1.band_radius or 1, V2.band_radius or 1)


def defect_op(V1: LazyOp, V2: LazyOp) -> LazyOp:
    """I - V1 V1* - V2 V2* + V V* with V = V1 V2."""
    V = V1 @ V2
    C = lo.identity(V1.domain) - V1 @ V1.H - V2 @ V2.H + V @ V.H
    C.label = "C"
    return C


def _kernels(V1, V2, scheme, grade):
    V = V1 @ V2
    win = scheme.window(grade)
    return {"ker_V1*": lo.kernel_basis(V1.H, win), "ker_V2*": lo.kernel_basis(V2.H, win),
            "ker_V*": lo.kernel_basis(V.H, win)}


def _proj_dev(a: Subspace, b: Subspace, win) -> float:
    return float(np.max(np.abs(a.projector(win) - b.projector(win)), initial=0.0))


# --------------------------------------------------------------------------

@dataclass
class DefectReport:
    grade: int
    window: list
    matrix: np.ndarray
    boundary_ring_max: float
    cls: DefectClass
    kernel_bases: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"window_grade": self.grade, "eigenvalues": list(self.cls.evidence),
                "class": self.cls.tag, "support_certified": self.cls.support_certified,
                "boundary_ring_max": self.boundary_ring_max}


def defect_window_matrix(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int) -> DefectReport:
    b = _band(V1, V2)
    C = defect_op(V1, V2)
    win = scheme.window(grade)
    inwin = set(win)
    pos = {c: i for i, c in enumerate(win)}
    m = np.zeros((len(win), len(win)), dtype=complex)
    ring_max = 0.0
    for i, c in enumerate(win):
        col = C.image(c)
        ring = scheme.grade(c) > grade - b
        for d, v in col.items():
            j = pos.get(d)
            if j is not None:
                m[j, i] = v
            if ring or d not in inwin:
                ring_max = max(ring_max, abs(v))
    herm = float(np.max(np.abs(m - m.conj().T), initial=0.0))
    if herm > lo.EXACT_TOL:
        raise ValueError(f"defect matrix is not hermitian (deviation {herm:.3g}); pair does not commute?")
    ev = nonzero_eigenvalues(m)
    kers = _kernels(V1, V2, scheme, grade + b)
    off = bool(ev) and _proj_dev(kers["ker_V1*"], kers["ker_V2*"], win) <= LADDER_TOL
    cls = DefectClass(tag_from(ev, off), ev, ring_max <= lo.EXACT_TOL)
    return DefectReport(grade, win, m, ring_max, cls, kers)


def classify_defect(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int) -> DefectClass:
    return defect_window_matrix(V1, V2, scheme, grade).cls


# --------------------------------------------------------------------------

@dataclass
class IdentityReport:
    grade: int
    stabilized: bool
    deviation_form1: float
    deviation_form2: float
    decomposition_deviation: float
    dims: dict

    @property
    def max_deviation(self) -> float:
        return max(self.deviation_form1, self.deviation_form2, self.decomposition_deviation)

    def to_json(self) -> dict:
        return {"window_grade": self.grade, "stabilized": self.stabilized,
                "deviation_form1": self.deviation_form1, "deviation_form2": self.deviation_form2,
                "decomposition_deviation": self.decomposition_deviation, "dims": self.dims}


def _cross(a: Subspace, b: Subspace) -> float:
    if a.dim == 0 or b.dim == 0:
        return 0.0
    frame = sorted(set(a.frame) | set(b.frame), key=lo.order_key(a.scheme_id))
    return float(np.max(np.abs(a.rows(frame).conj().T @ b.rows(frame))))


def _stabilized(V1, V2, scheme, grade, b) -> bool:
    k1 = _kernels(V1, V2, scheme, grade + b)
    k2 = _kernels(V1, V2, scheme, grade + 2 * b)
    win = scheme.window(grade)
    return all(_proj_dev(k1[k], k2[k], win) <= LADDER_TOL for k in k1)


def verify_projection_identities(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int,
                                 C: np.ndarray | None = None) -> IdentityReport:
    """Compare C with both projection-difference forms on the window, and
    check both orthogonal decompositions of ker V*."""
    b = _band(V1, V2)
    win = scheme.window(grade)
    if C is None:
        C = lo.compress(defect_op(V1, V2), win)
    kers = _kernels(V1, V2, scheme, grade + b)
    K1, K2, K = kers["ker_V1*"], kers["ker_V2*"], kers["ker_V*"]
    V2K1, V1K2 = lo.image_subspace(V2, K1), lo.image_subspace(V1, K2)
    PK1, PK2, PK = K1.projector(win), K2.projector(win), K.projector(win)
    P21, P12 = V2K1.projector(win), V1K2.projector(win)
    dev1 = float(np.max(np.abs(C - (PK1 - P21)), initial=0.0))
    dev2 = float(np.max(np.abs(C - (PK2 - P12)), initial=0.0))
    dec = max(float(np.max(np.abs(PK1 + P12 - PK), initial=0.0)),
              float(np.max(np.abs(PK2 + P21 - PK), initial=0.0)),
              _cross(K1, V1K2), _cross(K2, V2K1))
    tr = lambda p: int(round(float(np.trace(p).real)))
    dims = {"ker_V*": tr(PK), "ker_V1*": tr(PK1), "V1(ker_V2*)": tr(P12),
            "ker_V2*": tr(PK2), "V2(ker_V1*)": tr(P21)}
    return IdentityReport(grade, _stabilized(V1, V2, scheme, grade, b), dev1, dev2, dec, dims)


# --------------------------------------------------------------------------

@dataclass
class Fringe:
    forward: np.ndarray   # inner kernel basis -> outer kernel basis
    adjoint: np.ndarray

    def _iso(self, m: np.ndarray) -> float:
        if m.shape[1] == 0:
            return 0.0
        return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[1]))))

    @property
    def isometry_deviation(self) -> float:
        return self._iso(self.forward)

    @property
    def coisometry_deviation(self) -> float:
        return self._iso(self.adjoint)

    def is_isometry(self, tol=LADDER_TOL) -> bool:
        return self.isometry_deviation <= tol

    def is_coisometry(self, tol=LADDER_TOL) -> bool:
        return self.coisometry_deviation <= tol

    def is_unitary(self, tol=LADDER_TOL) -> bool:
        return self.is_isometry(tol) and self.is_coisometry(tol)

    def is_zero(self, tol=LADDER_TOL) -> bool:
        return float(np.max(np.abs(self.forward), initial=0.0)) <= tol


def _fringe(V_ker: LazyOp, V_act: LazyOp, scheme, grade, b) -> Fringe:
    inner = lo.kernel_basis(V_ker.H, scheme.window(grade))
    outer = lo.kernel_basis(V_ker.H, scheme.window(grade + b))

    def coords(op):
        cols = [outer.basis.conj().T @ lo.apply(op, v).dense(outer.frame) for v in inner.vectors()]
        return np.column_stack(cols) if cols else np.zeros((outer.dim, 0), dtype=complex)

    return Fringe(coords(V_act), coords(V_act.H))


def fringe_matrices(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int) -> tuple[Fringe, Fringe]:
    """F1 = P_{ker V1*} V2 on ker V1*, F2 = P_{ker V2*} V1 on ker V2*.

    Each is given as a map from the kernel inside the window to the kernel
    inside the window enlarged by the band radius, together with the matrix
    of its adjoint, so isometry of either side is decided exactly.
    """
    b = _band(V1, V2)
    return _fringe(V1, V2, scheme, grade, b), _fringe(V2, V1, scheme, grade, b)


def fringe_class(F1: Fringe, F2: Fringe) -> str:
    if F1.is_unitary() and F2.is_unitary():
        return ZERO
    if F1.is_zero() and F2.is_zero():
        return OFFDIAG
    if F1.is_isometry() and F2.is_isometry():
        return POSITIVE
    if F1.is_coisometry() and F2.is_coisometry():
        return NEGATIVE
    return MIXED


# --------------------------------------------------------------------------

@dataclass
class WoldReport:
    grade: int
    window_size: int
    wandering_dim: int
    shift_part_dim: int
    residual_dim: int
    residual_min_grade: int | None

    def to_json(self) -> dict:
        return dict(self.__dict__)


def wold(V: LazyOp, scheme: IndexScheme, grade: int) -> WoldReport:
    """Orbits V^n(ker V*) that stay inside the window, and what is left over."""
    win = scheme.window(grade)
    inwin = set(win)
    K = lo.kernel_basis(V.H, win)
    family = []
    for v in K.vectors():
        while v.entries and all(c in inwin for c in v.entries):
            family.append(v)
            v = lo.apply(V, v)
    S = lo.orthonormalize(family, V.domain) if family else None
    rows = S.rows(win) if S is not None else np.zeros((len(win), 0), dtype=complex)
    k = rows.shape[1]
    res_min = None
    if k < len(win):
        u, s, _ = np.linalg.svd(rows, full_matrices=True)
        comp = u[:, k:]
        grades = [scheme.grade(c) for c, r in zip(win, comp) if np.max(np.abs(r)) > 1e-12]
        res_min = min(grades) if grades else None
    return WoldReport(grade, len(win), K.dim, k, len(win) - k, res_min)


# --------------------------------------------------------------------------
# equivalence ladders

@dataclass
class LadderReport:
    grade: int
    detected: str
    ladders: dict
    consistent: bool
    offending: list

    def to_json(self) -> dict:
        return {"window_grade": self.grade, "detected": self.detected, "ladders": self.ladders,
                "consistent": self.consistent, "offending": self.offending}


EXPECTED_TRUE = {ZERO: {"zero", "doubly_commuting"}, POSITIVE: {"positive", "doubly_commuting"},
                 NEGATIVE: {"negative"}, OFFDIAG: {"off_diagonal"}, MIXED: set()}


def _vecs_in(vs, sub: Subspace, tol=LADDER_TOL) -> bool:
    return all(sub.residual(v) <= tol for v in vs)


def _triple_ops(t: BclTriple):
    if t.kind == "finite":
        U, P = np.asarray(t.U), np.asarray(t.P)
        return matrix_op(U), matrix_op(P), matrix_op(np.eye(t.dim) - P), t.fiber.window(0)
    return t.u_op(), t.p_op(), t.p_perp_op(), None


def _zero_on(op: LazyOp, win) -> bool:
    return all(max(map(abs, op.image(c).values()), default=0.0) <= LADDER_TOL for c in win)


def _equal_on(a: LazyOp, b: LazyOp, win) -> bool:
    return all(lo._diff_max(a.image(c), b.image(c)) <= LADDER_TOL for c in win)


def _triple_items(t: BclTriple, grade: int) -> dict:
    U, P, Q, win = _triple_ops(t)
    if win is None:
        win = BILATERAL.window(grade)
    UPU_ = U @ P @ U.H
    inv_P = _zero_on(Q @ U @ P, win)           # U(ran P) inside ran P
    inv_Q = _zero_on(P @ U @ Q, win)           # U(ran P_perp) inside ran P_perp
    onto_P = _zero_on(P - UPU_ @ P, win)       # ran P inside U(ran P)
    onto_Q = _zero_on(Q - (U @ Q @ U.H) @ Q, win)
    return {"reduces": inv_P and inv_Q,
            "P_strict": inv_P and not onto_P,
            "Pperp_strict": inv_Q and not onto_Q,
            "swap": _equal_on(UPU_, Q, win),
            "P_invariant": inv_P}


def equivalence_suite(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int,
                      triple: BclTriple | None = None) -> LadderReport:
    """Evaluate every item of the four class ladders plus the doubly-commuting one.

    Each ladder lists equivalent statements, so its items must agree; the
    ladder that holds must match the class detected from the defect matrix.
    """
    b = _band(V1, V2)
    win = scheme.window(grade)
    rep = defect_window_matrix(V1, V2, scheme, grade)
    detected = rep.cls.tag
    Cm = rep.matrix
    Cop = defect_op(V1, V2)
    V = V1 @ V2
    ev = np.linalg.eigvalsh((Cm + Cm.conj().T) / 2) if Cm.size else np.zeros(0)
    C_zero = float(np.max(np.abs(Cm), initial=0.0)) <= LADDER_TOL
    C_pos = bool(np.all(ev >= -SIGN_TOL))
    C_neg = bool(np.all(ev <= SIGN_TOL))
    CC = Cop @ Cop
    C_proj = _equal_on(CC, Cop, win)
    C_negproj = _equal_on(CC, lo.scale(-1, Cop), win)

    inner = _kernels(V1, V2, scheme, grade)
    outer = _kernels(V1, V2, scheme, grade + b)
    K1i, K2i = inner["ker_V1*"], inner["ker_V2*"]
    K1o, K2o, Ko = outer["ker_V1*"], outer["ker_V2*"], outer["ker_V*"]
    V2K1o, V1K2o = lo.image_subspace(V2, K1o), lo.image_subspace(V1, K2o)
    V2K1i = [lo.apply(V2, v) for v in K1i.vectors()]
    V1K2i = [lo.apply(V1, v) for v in K2i.vectors()]

    sub_21 = _vecs_in(V2K1i, K1o)      # V2(ker V1*) inside ker V1*
    sup_21 = _vecs_in(K1i.vectors(), V2K1o)
    sub_12 = _vecs_in(V1K2i, K2o)
    sup_12 = _vecs_in(K2i.vectors(), V1K2o)

    def reduces_unitarily(Vact, Ki, Ko_):
        vs = Ki.vectors()
        return (_vecs_in([lo.apply(Vact, v) for v in vs], Ko_)
                and _vecs_in([lo.apply(Vact.H, v) for v in vs], Ko_)
                and all((lo.apply(Vact, lo.apply(Vact.H, v)) - v).norm() <= LADDER_TOL for v in vs))

    F1, F2 = fringe_matrices(V1, V2, scheme, grade)
    orth = _cross(K1o, K2o) <= LADDER_TOL
    sum_eq = float(np.max(np.abs(K1o.projector(win) + K2o.projector(win) - Ko.projector(win)),
                          initial=0.0)) <= LADDER_TOL
    dc = lo.commutation_deviation(V1, V2.H, win) <= LADDER_TOL
    Q1 = V1 @ V1.H - V @ V.H
    Q2 = V2 @ V2.H - V @ V.H
    f_zero = _zero_on(Q1 @ Q2, win) and _equal_on(Q1 + Q2 + V @ V.H, lo.identity(V1.domain), win)
    C_nonzero = not C_zero
    PK = Ko.projector(win)
    C2 = lo.compress(CC, win)

    lad = {
        "zero": {"a_defect_zero": C_zero,
                 "b_kerV2*_reduces_V1_unitarily": reduces_unitarily(V1, K2i, K2o),
                 "c_kerV1*_reduces_V2_unitarily": reduces_unitarily(V2, K1i, K1o),
                 "d_fringes_unitary": F1.is_unitary() and F2.is_unitary(),
                 "e_kernels_orthogonal_sum_kerV*": orth and sum_eq,
                 "f_range_decomposition": f_zero},
        "positive": {"a_defect_pos_nonzero": C_pos and C_nonzero,
                     "b_V2(kerV1*)_strictly_inside": sub_21 and not sup_21,
                     "c_V1(kerV2*)_strictly_inside": sub_12 and not sup_12,
                     "d_fringes_isometric_not_unitary": F1.is_isometry() and F2.is_isometry()
                     and not (F1.is_unitary() and F2.is_unitary()),
                     "e_doubly_commuting_nonzero": dc and C_nonzero,
                     "f_nonzero_projection": C_proj and C_nonzero},
        "negative": {"a_defect_neg_nonzero": C_neg and C_nonzero,
                     "b_V2(kerV1*)_strictly_contains": sup_21 and not sub_21,
                     "c_V1(kerV2*)_strictly_contains": sup_12 and not sub_12,
                     "d_fringe_adjoints_isometric_not_unitary": F1.is_coisometry() and F2.is_coisometry()
                     and not (F1.is_unitary() and F2.is_unitary()),
                     "e_kernels_orthogonal_sum_short": orth and not sum_eq,
                     "f_minus_nonzero_projection": C_negproj and C_nonzero},
        "off_diagonal": {"a_equal_ranges": _equal_on(V1 @ V1.H, V2 @ V2.H, win),
                         "b_V1(kerV2*)_eq_V2(kerV1*)": _vecs_in(V1K2i, V2K1o) and _vecs_in(V2K1i, V1K2o),
                         "c_symmetry_on_kerV*": float(np.max(np.abs(C2 - PK), initial=0.0)) <= LADDER_TOL
                         and C_nonzero,
                         "d_fringes_zero": F1.is_zero() and F2.is_zero()},
        "doubly_commuting": {"a_defect_pos": C_pos, "b_doubly_commuting": dc},
    }
    if triple is not None:
        ti = _triple_items(triple, grade)
        lad["zero"]["g_ranP_reduces_U"] = ti["reduces"]
        lad["positive"]["g_U(ranP)_strictly_inside"] = ti["P_strict"]
        lad["negative"]["g_U(ranPperp)_strictly_inside"] = ti["Pperp_strict"]
        lad["off_diagonal"]["e_U(ranP)_eq_ranPperp"] = ti["swap"]
        lad["doubly_commuting"]["c_U(ranP)_inside_ranP"] = ti["P_invariant"]

    offending = []
    holds = set()
    for name, items in lad.items():
        vals = set(items.values())
        if len(vals) > 1:
            offending += [f"{name}.{k}={v}" for k, v in items.items()]
        elif vals == {True}:
            holds.add(name)
    if holds != EXPECTED_TRUE[detected]:
        offending.append(f"ladders holding {sorted(holds)} do not match class {detected}")
    return LadderReport(grade, detected, lad, not offending, offending)


# --------------------------------------------------------------------------

@dataclass
class AgreementReport:
    grade: int
    direct_vs_projection: float
    direct_vs_triple: float | None
    support_certified: bool
    stabilized: bool

    @property
    def max_deviation(self) -> float:
        return max(self.direct_vs_projection, self.direct_vs_triple or 0.0)

    def to_json(self) -> dict:
        return dict(self.__dict__, max_deviation=self.max_deviation)


def defect_agreement(pair, grade: int) -> AgreementReport:
    """Compare the direct defect with the projection-difference form and, when the
    pair carries a triple, with E_0 (x) (U*PU - P) pulled back to the model space."""
    from .bcl import defect_operator
    rep = defect_window_matrix(pair.V1, pair.V2, pair.scheme, grade)
    ids = verify_projection_identities(pair.V1, pair.V2, pair.scheme, grade, rep.matrix)
    dev_t = None
    if pair.triple is not None and pair.to_multiplier is not None:
        L = pair.to_multiplier
        Ct = lo.compress(L.H @ defect_operator(pair.triple) @ L, rep.window)
        dev_t = float(np.max(np.abs(rep.matrix - Ct), initial=0.0))
    return AgreementReport(grade, max(ids.deviation_form1, ids.deviation_form2), dev_t,
                           rep.cls.support_certified, ids.stabilized)
