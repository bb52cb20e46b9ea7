"""Triples (E, P, U) with U unitary and P a projection, and their multiplier pairs.

A triple generates the commuting isometries

    M_phi1 = I (x) U* P_perp + M_z (x) U* P
    M_phi2 = I (x) P U      + M_z (x) P_perp U

on H^2 (x) E.  Finite triples carry matrices; lazy triples live on l2(Z)
with banded operators.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linops as lo
from .linops import LazyOp, SparseVec, Subspace
from .spaces import (BILATERAL, HARDY_BIDISC, HARDY_DISC, IndexScheme, finite, product,
                     vector_hardy)

ZERO, POSITIVE, NEGATIVE, OFFDIAG, MIXED = "Zero", "Positive", "Negative", "OffDiagonal", "Mixed"
CLASSES = (ZERO, POSITIVE, NEGATIVE, OFFDIAG, MIXED)
SIGN_TOL = 1e-10
TRIPLE_TOL = 1e-12


class InvalidTriple(ValueError):
    pass


class WindowTooSmall(RuntimeError):
    """Kernel bases did not stabilize inside the requested window."""


# --------------------------------------------------------------------------
# elementary operators

def hardy_shift() -> LazyOp:
    return LazyOp(HARDY_DISC.scheme_id, HARDY_DISC.scheme_id,
                  lambda c: {(c[0] + 1,): 1.0},
                  lambda c: {(c[0] - 1,): 1.0} if c[0] > 0 else {},
                  1.0, 1, "M_z")


def constants_projection() -> LazyOp:
    f = lambda c: {c: 1.0} if c[0] == 0 else {}
    return LazyOp(HARDY_DISC.scheme_id, HARDY_DISC.scheme_id, f, f, 1.0, 0, "E0")


def bidisc_shift(i: int) -> LazyOp:
    def fwd(c):
        return {(c[0] + 1, c[1]) if i == 1 else (c[0], c[1] + 1): 1.0}

    def adj(c):
        k = i - 1
        if c[k] == 0:
            return {}
        return {(c[0] - 1, c[1]) if i == 1 else (c[0], c[1] - 1): 1.0}

    return LazyOp(HARDY_BIDISC.scheme_id, HARDY_BIDISC.scheme_id, fwd, adj, 1.0, 1, f"M_z{i}")


def bilateral_shift() -> LazyOp:
    return LazyOp(BILATERAL.scheme_id, BILATERAL.scheme_id,
                  lambda c: {(c[0] + 1,): 1.0}, lambda c: {(c[0] - 1,): 1.0}, 1.0, 1, "omega")


def coordinate_projection(scheme: IndexScheme, keep, label: str = "") -> LazyOp:
    f = lambda c: {c: 1.0} if keep(c) else {}
    return LazyOp(scheme.scheme_id, scheme.scheme_id, f, f, 1.0, 0, label)


def kron(a: LazyOp, b: LazyOp, scheme: IndexScheme) -> LazyOp:
    """a (x) b on a product scheme whose parts carry a and b."""
    p, q = scheme.parts
    lo._same(a.domain, p.scheme_id)
    lo._same(b.domain, q.scheme_id)

    def act(c, adjoint=False):
        x, y = scheme.split(c)
        ia = a.coimage(x) if adjoint else a.image(x)
        if not ia:
            return {}
        ib = b.coimage(y) if adjoint else b.image(y)
        return {u + v: s * t for u, s in ia.items() for v, t in ib.items()}

    band = None if a.band_radius is None or b.band_radius is None else a.band_radius + b.band_radius
    return LazyOp(scheme.scheme_id, scheme.scheme_id, act, lambda c: act(c, True),
                  a.norm_bound * b.norm_bound, band, f"{a.label}(x){b.label}")


def matrix_op(m, label: str = "") -> LazyOp:
    m = np.asarray(m, dtype=complex)
    sch = finite(m.shape[0])
    return lo.from_matrix(sch.scheme_id, sch.window(0), m, band_radius=0, label=label)


# --------------------------------------------------------------------------
# triples

@dataclass
class BclTriple:
    """kind "finite": U, P are d x d arrays; kind "lazy": LazyOps on l2(Z)."""

    kind: str
    U: object
    P: object
    dim: int = 0
    band_radius: int = 0
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def fiber(self) -> IndexScheme:
        return finite(self.dim) if self.kind == "finite" else BILATERAL

    @property
    def scheme(self) -> IndexScheme:
        return vector_hardy(self.fiber)

    def u_op(self) -> LazyOp:
        if self.kind == "finite":
            return self._cached("_uop", lambda: matrix_op(self.U, "U"))
        return self.U

    def p_op(self) -> LazyOp:
        if self.kind == "finite":
            return self._cached("_pop", lambda: matrix_op(self.P, "P"))
        return self.P

    def p_perp_op(self) -> LazyOp:
        if self.kind == "finite":
            return self._cached("_qop", lambda: matrix_op(np.eye(self.dim) - self.P, "P_perp"))
        return self._cached("_qop", lambda: lo.identity(BILATERAL.scheme_id) - self.P)

    def _cached(self, key, make):
        if key not in self.meta:
            self.meta[key] = make()
        return self.meta[key]

    def validate(self, grade: int = 8) -> None:
        if self.kind == "finite":
            U, P = np.asarray(self.U), np.asarray(self.P)
            d = self.dim
            if U.shape != (d, d) or P.shape != (d, d):
                raise InvalidTriple("shape mismatch")
            I = np.eye(d)
            if np.max(np.abs(U.conj().T @ U - I)) > TRIPLE_TOL or np.max(np.abs(U @ U.conj().T - I)) > TRIPLE_TOL:
                raise InvalidTriple("U is not unitary")
            if np.max(np.abs(P - P.conj().T)) > TRIPLE_TOL or np.max(np.abs(P @ P - P)) > TRIPLE_TOL:
                raise InvalidTriple("P is not a hermitian idempotent")
            return
        win = BILATERAL.window(grade + self.band_radius)
        rep = lo.window_checks(self.U, win)
        if not rep.passed(TRIPLE_TOL, ["unitarity", "adjoint_consistency"]):
            raise InvalidTriple("U fails unitarity on the window")
        inner = BILATERAL.window(grade)
        P = self.P
        dev = max(lo._diff_max(P.image(c), P.coimage(c)) for c in inner)
        dev = max(dev, max(lo._diff_max(lo._act(P, P.image(c)), P.image(c)) for c in inner))
        if dev > TRIPLE_TOL:
            raise InvalidTriple("P fails the projection identities on the window")


def finite_triple(U, P, name: str = "", check: bool = True) -> BclTriple:
    U = np.asarray(U, dtype=complex)
    P = np.asarray(P, dtype=complex)
    t = BclTriple("finite", U, P, dim=U.shape[0], name=name)
    if check:
        t.validate()
    return t


def bilateral_p_minus() -> BclTriple:
    """(l2(Z), projection onto n < 0, bilateral shift)."""
    P = coordinate_projection(BILATERAL, lambda c: c[0] < 0, "p_minus")
    t = BclTriple("lazy", bilateral_shift(), P, band_radius=1, name="bilateral_p_minus")
    t.meta["wandering_dim"] = 1
    return t


def bilateral_p_zero_plus() -> BclTriple:
    """(l2(Z), projection onto n >= 0, bilateral shift)."""
    P = coordinate_projection(BILATERAL, lambda c: c[0] >= 0, "p_zero_plus")
    t = BclTriple("lazy", bilateral_shift(), P, band_radius=1, name="bilateral_p_zero_plus")
    t.meta["wandering_dim"] = 1
    return t


LAZY_PRESETS = {"bilateral_p_minus": bilateral_p_minus, "bilateral_p_zero_plus": bilateral_p_zero_plus}


def phi(triple: BclTriple, z: complex):
    """(phi1(z), phi2(z)): matrices for finite triples, LazyOps for lazy ones."""
    z = complex(z)
    if triple.kind == "finite":
        U, P = np.asarray(triple.U), np.asarray(triple.P)
        Q = np.eye(triple.dim) - P
        return U.conj().T @ (Q + z * P), (P + z * Q) @ U
    U, P, Q = triple.u_op(), triple.p_op(), triple.p_perp_op()
    return U.H @ (Q + lo.scale(z, P)), (P + lo.scale(z, Q)) @ U


def multiplier_pair(triple: BclTriple) -> tuple[LazyOp, LazyOp]:
    key = "_mult"
    if key in triple.meta:
        return triple.meta[key]
    sch = triple.scheme
    U, P, Q = triple.u_op(), triple.p_op(), triple.p_perp_op()
    I = lo.identity(HARDY_DISC.scheme_id)
    Mz = hardy_shift()
    if triple.kind == "finite":
        Um, Pm = np.asarray(triple.U), np.asarray(triple.P)
        Qm = np.eye(triple.dim) - Pm
        a0, a1 = matrix_op(Um.conj().T @ Qm), matrix_op(Um.conj().T @ Pm)
        b0, b1 = matrix_op(Pm @ Um), matrix_op(Qm @ Um)
    else:
        a0, a1, b0, b1 = U.H @ Q, U.H @ P, P @ U, Q @ U
    V1 = kron(I, a0, sch) + kron(Mz, a1, sch)
    V2 = kron(I, b0, sch) + kron(Mz, b1, sch)
    V1.norm_bound = V2.norm_bound = 1.0
    V1.label, V2.label = "M_phi1", "M_phi2"
    triple.meta[key] = (V1, V2)
    return V1, V2


def fiber_defect_op(triple: BclTriple) -> LazyOp:
    """U* P U - P on the fiber."""
    if triple.kind == "finite":
        U, P = np.asarray(triple.U), np.asarray(triple.P)
        return matrix_op(U.conj().T @ P @ U - P, "D")
    U, P = triple.u_op(), triple.p_op()
    return (U.H @ P @ U) - P


def defect_operator(triple: BclTriple) -> LazyOp:
    """E_0 (x) (U* P U - P) on H^2 (x) E."""
    return kron(constants_projection(), fiber_defect_op(triple), triple.scheme)


def defect_from_triple(triple: BclTriple, grade: int) -> np.ndarray:
    win = triple.scheme.window(grade)
    if triple.kind == "finite":
        U, P = np.asarray(triple.U), np.asarray(triple.P)
        D = U.conj().T @ P @ U - P
        m = np.zeros((len(win), len(win)), dtype=complex)
        idx = [i for i, c in enumerate(win) if c[0] == 0]
        fib = [win[i][1] for i in idx]
        m[np.ix_(idx, idx)] = D[np.ix_(fib, fib)]
        return m
    return lo.compress(defect_operator(triple), win)


# --------------------------------------------------------------------------
# classification

@dataclass
class DefectClass:
    tag: str
    evidence: tuple[float, ...]
    support_certified: bool

    def to_json(self) -> dict:
        return {"class": self.tag, "eigenvalues": list(self.evidence),
                "support_certified": self.support_certified}


def nonzero_eigenvalues(h: np.ndarray, tol: float = SIGN_TOL) -> tuple[float, ...]:
    if h.size == 0:
        return ()
    if not np.any(h):
        return ()
    ev = np.linalg.eigvalsh((h + h.conj().T) / 2)
    # shipped models give exact +-1; snap only values within rounding of an integer
    out = []
    for x in ev:
        if abs(x) > tol:
            r = round(x)
            out.append(float(r) if abs(x - r) <= lo.EXACT_TOL else float(x))
    return tuple(sorted(out))


def tag_from(evidence: Sequence[float], off_diagonal: bool) -> str:
    if not evidence:
        return ZERO
    if off_diagonal:
        return OFFDIAG
    if all(x > 0 for x in evidence):
        return POSITIVE
    if all(x < 0 for x in evidence):
        return NEGATIVE
    return MIXED


def classify(triple: BclTriple, grade: int = 8) -> DefectClass:
    if triple.kind == "finite":
        U, P = np.asarray(triple.U), np.asarray(triple.P)
        UPU = U.conj().T @ P @ U
        ev = nonzero_eigenvalues(UPU - P)
        off = np.max(np.abs(UPU - (np.eye(triple.dim) - P))) <= TRIPLE_TOL
        return DefectClass(tag_from(ev, off), ev, True)
    D = fiber_defect_op(triple)
    b = max(triple.band_radius, 1)
    win = BILATERAL.window(grade)
    cols = {c: D.image(c) for c in win}
    support = {c for c, col in cols.items() if col}
    support |= {d for col in cols.values() for d in col}
    gmax = max((BILATERAL.grade(c) for c in support), default=-1)
    ring = [c for c in win if gmax < BILATERAL.grade(c) <= gmax + b]
    ring_max = max((abs(v) for c in ring for v in cols[c].values()), default=0.0)
    certified = gmax + b <= grade and ring_max <= lo.EXACT_TOL
    inner = [c for c in win if BILATERAL.grade(c) <= max(gmax, 0)]
    ev = nonzero_eigenvalues(lo.compress(D, inner))
    U, P, Q = triple.u_op(), triple.p_op(), triple.p_perp_op()
    UPU = U.H @ P @ U
    off = bool(ev) and max(lo._diff_max(UPU.image(c), Q.image(c)) for c in win) <= lo.EXACT_TOL
    return DefectClass(tag_from(ev, off), ev, certified)


# --------------------------------------------------------------------------
# triple extraction from a pair

def _kernel(op: LazyOp, scheme: IndexScheme, grade: int) -> Subspace:
    return lo.kernel_basis(op, scheme.window(grade))


def sarkar_triple(V1: LazyOp, V2: LazyOp, scheme: IndexScheme, grade: int) -> BclTriple:
    """Finite triple on ker V* from the explicit recipe.

    E = ker V*, P = projection onto V2(ker V1*), and U0 acts as V2 on
    ker V1* and as V1* on V1(ker V2*).  Raises WindowTooSmall when ker V*
    keeps growing as the window is enlarged by the band radius.
    """
    b = max(V1.band_radius or 1, V2.band_radius or 1)
    V = V1 @ V2
    K = _kernel(V.H, scheme, grade)
    K_big = _kernel(V.H, scheme, grade + b)
    if K_big.dim != K.dim:
        raise WindowTooSmall(f"ker V* grows from {K.dim} to {K_big.dim} between grades "
                             f"{grade} and {grade + b}")
    K1 = _kernel(V1.H, scheme, grade)
    K2 = _kernel(V2.H, scheme, grade)
    dom = K1.vectors() + [lo.apply(V1, v) for v in K2.vectors()]
    img = [lo.apply(V2, v) for v in K1.vectors()] + K2.vectors()
    if len(dom) != K.dim:
        raise WindowTooSmall("kernel bookkeeping does not close inside the window")
    for v in dom + img:
        if K.residual(v) > 1e-10:
            raise WindowTooSmall("kernel vectors leave the window")
    B = K.basis

    def coords(vs):
        return np.column_stack([B.conj().T @ v.dense(K.frame) for v in vs]) if vs else \
            np.zeros((K.dim, 0), dtype=complex)

    D, Im = coords(dom), coords(img)
    U0 = Im @ D.conj().T
    Qp = coords([lo.apply(V2, v) for v in K1.vectors()])
    P = Qp @ Qp.conj().T
    t = finite_triple(U0, P, name="extracted", check=False)
    t.meta["basis"] = K
    t.validate()
    return t


# --------------------------------------------------------------------------
# random triples

def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_projection(d: int, rank: int, rng: np.random.Generator) -> np.ndarray:
    q = random_unitary(d, rng)[:, :rank]
    return q @ q.conj().T


def random_triple(d: int, rng: np.random.Generator, kind: str = "mixed") -> BclTriple:
    """kind: "zero" (ran P reduces U), "offdiag" (U swaps ran P and its complement,
    d even), "mixed" (generic U and P of rank strictly between 0 and d)."""
    if kind == "mixed":
        if d < 2:
            raise ValueError("mixed triples need d >= 2")
        r = int(rng.integers(1, d))
        return finite_triple(random_unitary(d, rng), random_projection(d, r, rng), "random-mixed")
    Q = random_unitary(d, rng)
    if kind == "zero":
        r = int(rng.integers(0, d + 1))
        blk = np.zeros((d, d), dtype=complex)
        if r:
            blk[:r, :r] = random_unitary(r, rng)
        if d - r:
            blk[r:, r:] = random_unitary(d - r, rng)
    elif kind == "offdiag":
        if d % 2:
            raise ValueError("off-diagonal triples need even d")
        r = d // 2
        blk = np.zeros((d, d), dtype=complex)
        blk[r:, :r] = random_unitary(r, rng)
        blk[:r, r:] = random_unitary(r, rng)
    else:
        raise ValueError(f"unknown kind {kind!r}")
    p = np.zeros(d)
    p[:r] = 1
    U = Q @ blk @ Q.conj().T
    P = (Q * p) @ Q.conj().T
    return finite_triple(U, P, f"random-{kind}")


# --------------------------------------------------------------------------
# files

def _pairs(m: np.ndarray) -> list:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(m, dtype=complex)]


def _unpairs(rows, d: int) -> np.ndarray:
    m = np.array([[complex(a, b) for a, b in row] for row in rows], dtype=complex)
    if m.shape != (d, d):
        raise InvalidTriple(f"expected a {d}x{d} matrix")
    return m


def triple_to_json(t: BclTriple) -> dict:
    if t.kind != "finite":
        return {"preset": t.name}
    return {"dim": t.dim, "U": _pairs(t.U), "P": _pairs(t.P)}


def triple_from_json(obj: dict) -> BclTriple:
    if "preset" in obj:
        make = LAZY_PRESETS.get(obj["preset"])
        if make is None:
            raise InvalidTriple(f"unknown preset {obj['preset']!r}")
        return make()
    d = int(obj["dim"])
    return finite_triple(_unpairs(obj["U"], d), _unpairs(obj["P"], d), "file")


def load_triple(path: str) -> BclTriple:
    if path in LAZY_PRESETS:
        return LAZY_PRESETS[path]()
    with open(path) as fh:
        return triple_from_json(json.load(fh))
