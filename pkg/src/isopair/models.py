"""Model pairs of commuting isometries, one family per defect class.

Every model ships with the triple that generates it (when one is known) and
the unitary carrying the model space onto the multiplier space of that
triple, so the triple formula for the defect can be compared on the model's
own basis.
"""
from __future__ import annotations

import json
import re
import threading
from dataclasses import dataclass, field

import numpy as np

from . import bcl
from . import linops as lo
from .bcl import (MIXED, NEGATIVE, OFFDIAG, POSITIVE, ZERO, BclTriple, bidisc_shift, finite_triple,
                  hardy_shift, kron, matrix_op)
from .linops import LazyOp
from .spaces import (BILATERAL, HARDY_BIDISC, HARDY_DISC, IndexScheme, direct_sum_scheme, finite,
                     product, vector_hardy)

UNITARY_TOL = 1e-10


@dataclass
class ModelPair:
    V1: LazyOp
    V2: LazyOp
    declared_class: str
    scheme: IndexScheme
    provenance: str
    name: str = ""
    triple: BclTriple | None = None
    to_multiplier: LazyOp | None = None  # unitary: model space -> H^2 (x) E of the triple
    extra: dict = field(default_factory=dict)

    @property
    def band_radius(self) -> int:
        return max(self.V1.band_radius or 1, self.V2.band_radius or 1)

    def window(self, grade: int):
        return self.scheme.window(grade)


# --------------------------------------------------------------------------
# the special unitary on H^2 of the bidisc

def _u_fwd(c):
    a, b = c
    if a >= b:
        return {(a + 2, b): 1.0}
    if a + 1 == b:
        return {(a + 1, b - 1): 1.0}
    return {(a, b - 2): 1.0}


def _u_inv(c):
    # inverse of the three-case map above: sort the target by which case produced it
    a, b = c
    if a >= b + 2:
        return {(a - 2, b): 1.0}
    if a == b + 1:
        return {(a - 1, b + 1): 1.0}
    return {(a, b + 2): 1.0}


def special_unitary() -> LazyOp:
    return LazyOp(HARDY_BIDISC.scheme_id, HARDY_BIDISC.scheme_id, _u_fwd, _u_inv, 1.0, 2, "U")


# --------------------------------------------------------------------------
# index bijections

def _monomial_map(src: IndexScheme, dst: IndexScheme, fwd, inv, band: int, label: str) -> LazyOp:
    return LazyOp(src.scheme_id, dst.scheme_id,
                  lambda c: {fwd(c): 1.0}, lambda c: {inv(c): 1.0}, 1.0, band, label)


def intertwiner_neg() -> LazyOp:
    """z1^(m+k) z2^k -> e_m z^k and z1^k z2^(m+k) -> e_(-m) z^k."""
    dst = vector_hardy(BILATERAL)
    return _monomial_map(HARDY_BIDISC, dst,
                         lambda c: (min(c), c[0] - c[1]),
                         lambda c: (c[0] + max(c[1], 0), c[0] + max(-c[1], 0)), 1, "Lambda_neg")


def intertwiner_pos() -> LazyOp:
    """z1^(m+k) z2^k -> e_(-(m+1)) z^k and z1^k z2^(m+k) -> e_(m-1) z^k."""
    dst = vector_hardy(BILATERAL)

    def inv(c):
        n, j = c
        return (n - j - 1, n) if j < 0 else (n, n + j + 1)

    return _monomial_map(HARDY_BIDISC, dst, lambda c: (min(c), c[1] - c[0] - 1), inv, 2,
                         "Lambda_pos")


class _Powers:
    def __init__(self, W: np.ndarray):
        self._p = [np.eye(W.shape[0], dtype=complex)]
        self._W = W
        self._lock = threading.Lock()

    def __getitem__(self, k: int) -> np.ndarray:
        with self._lock:
            while len(self._p) <= k:
                self._p.append(self._W @ self._p[-1])
            return self._p[k]


def _col(m: np.ndarray, j: int, n: int, offset: int = 0) -> dict:
    return {(n, i + offset): m[i, j] for i in np.flatnonzero(m[:, j])}


def intertwiner_zero(W) -> LazyOp:
    """sum a_m z^m -> sum W^m a_m z^m on H^2 (x) C^d."""
    W = check_unitary(W)
    sch = vector_hardy(W.shape[0])
    pw = _Powers(W)
    return LazyOp(sch.scheme_id, sch.scheme_id,
                  lambda c: _col(pw[c[0]], c[1], c[0]),
                  lambda c: _col(pw[c[0]].conj().T, c[1], c[0]), 1.0, 0, "Lambda_zero")


def offdiag_triple(W) -> BclTriple:
    """Triple on L + L (d + d) with U = [[0, W], [I, 0]] and P onto the second copy."""
    W = check_unitary(W)
    d = W.shape[0]
    U = np.zeros((2 * d, 2 * d), dtype=complex)
    U[:d, d:] = W
    U[d:, :d] = np.eye(d)
    P = np.diag([0.0] * d + [1.0] * d).astype(complex)
    return finite_triple(U, P, "offdiag-canonical")


def intertwiner_off(W) -> LazyOp:
    """Interleaving unitary from the multiplier space of `offdiag_triple(W)` onto H^2 (x) L.

    Coefficients in the first copy of L go to even degrees, those in the
    second copy to odd degrees, twisted by powers of W.
    """
    W = check_unitary(W)
    d = W.shape[0]
    src, dst = vector_hardy(2 * d), vector_hardy(d)
    pw = _Powers(W)

    def fwd(c):
        k, j = c
        if j < d:
            return _col(pw[k], j, 2 * k)
        return _col(pw[k + 1], j - d, 2 * k + 1)

    def adj(c):
        n, i = c
        k, odd = divmod(n, 2)
        m = pw[k + odd].conj().T
        return _col(m, i, k, d if odd else 0)

    return LazyOp(src.scheme_id, dst.scheme_id, fwd, adj, 1.0, None, "Lambda_off")


# --------------------------------------------------------------------------
# constructors

def pos_pair() -> ModelPair:
    return ModelPair(bidisc_shift(1), bidisc_shift(2), POSITIVE, HARDY_BIDISC,
                     "fundamental positive-defect pair: coordinate shifts on the bidisc Hardy space",
                     "pos", bcl.bilateral_p_zero_plus(), intertwiner_pos())


def neg_pair() -> ModelPair:
    U = special_unitary()
    t1 = U.H @ bidisc_shift(1)
    t2 = bidisc_shift(2) @ U
    t1.label, t2.label = "tau1", "tau2"
    m = ModelPair(t1, t2, NEGATIVE, HARDY_BIDISC,
                  "fundamental negative-defect pair: shifts twisted by the three-case unitary",
                  "neg", bcl.bilateral_p_minus(), intertwiner_neg())
    m.extra["U"] = U
    return m


def zero_pair(W) -> ModelPair:
    W = check_unitary(W)
    d = W.shape[0]
    sch = vector_hardy(d)
    Id = matrix_op(np.eye(d))
    t = finite_triple(W, np.eye(d), "zero-canonical")
    return ModelPair(kron(hardy_shift(), Id, sch), kron(lo.identity(HARDY_DISC.scheme_id), matrix_op(W), sch),
                     ZERO, sch, "zero-defect prototype: shift times identity, constant unitary",
                     f"zero[{d}]", t, intertwiner_zero(W).H)


def zero_pair_twisted(W) -> ModelPair:
    W = check_unitary(W)
    d = W.shape[0]
    sch = vector_hardy(d)
    t = finite_triple(W, np.eye(d), "zero-canonical")
    return ModelPair(kron(hardy_shift(), matrix_op(W.conj().T), sch),
                     kron(lo.identity(HARDY_DISC.scheme_id), matrix_op(W), sch),
                     ZERO, sch, "zero-defect prototype, twisted: shift times W*, constant unitary",
                     f"zero_twisted[{d}]", t, lo.identity(sch.scheme_id))


def offdiag_pair(W) -> ModelPair:
    W = check_unitary(W)
    d = W.shape[0]
    sch = vector_hardy(d)
    Mz = hardy_shift()
    return ModelPair(kron(Mz, matrix_op(np.eye(d)), sch), kron(Mz, matrix_op(W), sch), OFFDIAG, sch,
                     "equal-range prototype: shift times identity and shift times W",
                     f"offdiag[{d}]", offdiag_triple(W), intertwiner_off(W).H)


def _from_triple(t: BclTriple, cls: str, prov: str, name: str) -> ModelPair:
    V1, V2 = bcl.multiplier_pair(t)
    return ModelPair(V1, V2, cls, t.scheme, prov, name, t, lo.identity(t.scheme.scheme_id))


def psi_pair() -> ModelPair:
    return _from_triple(bcl.bilateral_p_minus(), NEGATIVE,
                        "multiplier pair of the bilateral shift with the projection onto negative indices",
                        "psi")


def eta_pair() -> ModelPair:
    return _from_triple(bcl.bilateral_p_zero_plus(), POSITIVE,
                        "multiplier pair of the bilateral shift with the projection onto nonnegative indices",
                        "eta")


def triple_pair(t: BclTriple) -> ModelPair:
    """Multiplier pair of an arbitrary triple, classified from the triple itself."""
    return _from_triple(t, bcl.classify(t).tag, f"multiplier pair of triple {t.name or 'input'}",
                        t.name or "triple")


def tensor_multiplicity(pair: ModelPair, d: int) -> ModelPair:
    fib = finite(d)
    sch = product(pair.scheme, fib)
    Id = matrix_op(np.eye(d))
    return ModelPair(kron(pair.V1, Id, sch), kron(pair.V2, Id, sch), pair.declared_class, sch,
                     f"{pair.provenance}; with multiplicity {d}", f"tensor[{pair.name},{d}]")


_SUM_RULE = {
    frozenset([ZERO]): ZERO, frozenset([POSITIVE]): POSITIVE, frozenset([NEGATIVE]): NEGATIVE,
    frozenset([OFFDIAG]): OFFDIAG, frozenset([ZERO, POSITIVE]): POSITIVE,
    frozenset([ZERO, NEGATIVE]): NEGATIVE,
}


def sum_class(a: str, b: str) -> str:
    return _SUM_RULE.get(frozenset([a, b]), MIXED)


def block_sum(a: LazyOp, b: LazyOp, sch: IndexScheme) -> LazyOp:
    def act(c, adjoint=False):
        op = a if c[0] == 0 else b
        img = op.coimage(c[1:]) if adjoint else op.image(c[1:])
        return {(c[0],) + k: v for k, v in img.items()}

    band = None if a.band_radius is None or b.band_radius is None else max(a.band_radius, b.band_radius)
    return LazyOp(sch.scheme_id, sch.scheme_id, act, lambda c: act(c, True),
                  max(a.norm_bound, b.norm_bound), band, f"{a.label}(+){b.label}")


def direct_sum(a: ModelPair, b: ModelPair) -> ModelPair:
    sch = direct_sum_scheme(a.scheme, b.scheme)
    return ModelPair(block_sum(a.V1, b.V1, sch), block_sum(a.V2, b.V2, sch),
                     sum_class(a.declared_class, b.declared_class), sch,
                     f"direct sum of [{a.provenance}] and [{b.provenance}]", f"sum[{a.name},{b.name}]")


def invariant_embedding() -> LazyOp:
    """J(z1^m z2^n) = tau1^m tau2^n (1), an isometry of H^2 of the bidisc into itself."""
    neg = neg_pair()
    t1, t2 = neg.V1, neg.V2

    def fwd(c):
        v = {(0, 0): 1.0}
        for _ in range(c[1]):
            v = lo._act(t2, v)
        for _ in range(c[0]):
            v = lo._act(t1, v)
        return v

    def adj(c):
        # J sends monomials to monomials injectively; invert by testing the
        # few preimages compatible with multiplication by z1 z2
        a, b = c
        for k in {min(a, b), 2 * a + 1 - b, 2 * b - a}:
            if 0 <= k <= min(a, b):
                for pre in ((a - k, b - k),):
                    cand = [(k, k)] if pre == (0, 0) else []
                    x, y = pre
                    if y == 2 * x + 1:
                        cand.append((k + x + 1, k))
                    if x == 2 * y and y > 0:
                        cand.append((k, k + y))
                    for mn in cand:
                        if fwd(mn) == {c: 1.0}:
                            return {mn: 1.0}
        return {}

    return LazyOp(HARDY_BIDISC.scheme_id, HARDY_BIDISC.scheme_id, fwd, adj, 1.0, None, "J")


# --------------------------------------------------------------------------
# matrices and the registry

def check_unitary(W, tol: float = UNITARY_TOL) -> np.ndarray:
    W = np.atleast_2d(np.asarray(W, dtype=complex))
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError("W must be square")
    if np.max(np.abs(W.conj().T @ W - np.eye(W.shape[0]))) > tol:
        raise ValueError("W is not unitary")
    return W


def load_matrix(path: str) -> np.ndarray:
    with open(path) as fh:
        obj = json.load(fh)
    d = int(obj["dim"])
    m = np.array([[complex(a, b) for a, b in row] for row in obj["rows"]], dtype=complex)
    if m.shape != (d, d):
        raise ValueError(f"matrix file {path}: expected {d}x{d}")
    return check_unitary(m)


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {"dim": m.shape[0], "rows": [[[float(x.real), float(x.imag)] for x in row] for row in m]}


def parse_complex(s: str) -> complex:
    return complex(s.strip().replace(" ", "").replace("i", "j"))


_DIAG = re.compile(r"^diag\((.*)\)$")


def resolve_matrix(token: str) -> np.ndarray:
    m = _DIAG.match(token)
    if m:
        return check_unitary(np.diag([parse_complex(x) for x in m.group(1).split(",")]))
    return load_matrix(token)


class UnknownModel(ValueError):
    pass


def _parse(tokens: list[str]) -> ModelPair:
    if not tokens:
        raise UnknownModel("empty model spec")
    head = tokens.pop(0)
    if head == "pos":
        return pos_pair()
    if head == "neg":
        return neg_pair()
    if head == "psi":
        return psi_pair()
    if head == "eta":
        return eta_pair()
    if head in ("zero", "zero_twisted", "offdiag"):
        if not tokens:
            raise UnknownModel(f"{head} needs a matrix")
        W = resolve_matrix(tokens.pop(0))
        return {"zero": zero_pair, "zero_twisted": zero_pair_twisted, "offdiag": offdiag_pair}[head](W)
    if head == "tensor":
        inner = _parse(tokens)
        if not tokens:
            raise UnknownModel("tensor needs a multiplicity")
        return tensor_multiplicity(inner, int(tokens.pop(0)))
    if head == "sum":
        a = _parse(tokens)
        b = _parse(tokens)
        return direct_sum(a, b)
    raise UnknownModel(f"unknown model {head!r}")


def resolve(spec: str) -> ModelPair:
    """Registry names: pos, neg, psi, eta, zero:W, zero_twisted:W, offdiag:W,
    tensor:<model>:<d>, sum:<a>:<b>; W is a matrix file or diag(...)."""
    tokens = spec.split(":")
    pair = _parse(tokens)
    if tokens:
        raise UnknownModel(f"trailing tokens in model spec: {':'.join(tokens)}")
    pair.name = spec
    return pair


def shipped_models(W=None) -> list[ModelPair]:
    """The six named models used by the suites, with W = diag(1, i) by default."""
    W = np.diag([1, 1j]) if W is None else W
    return [pos_pair(), neg_pair(), zero_pair(W), offdiag_pair(W), psi_pair(), eta_pair()]


# --------------------------------------------------------------------------
# unitarity and intertwining of the model-to-multiplier maps

def _gram_dev(L: LazyOp, win) -> float:
    cols = [lo.SparseVec(L.codomain, L.image(c)) for c in win]
    frame = sorted({k for v in cols for k in v.entries}, key=lo.order_key(L.codomain))
    if not frame:
        return 0.0
    m = np.column_stack([v.dense(frame) for v in cols])
    return float(np.max(np.abs(m.conj().T @ m - np.eye(len(win)))))


def intertwiner_report(pair: ModelPair, grade: int) -> dict:
    """Gram deviation of L on the model window, L L* - I on the multiplier window,
    and max |L V_i e - M_i L e| over model basis vectors of grade <= `grade`."""
    L = pair.to_multiplier
    if L is None or pair.triple is None:
        raise ValueError(f"model {pair.name} has no triple realisation")
    M1, M2 = bcl.multiplier_pair(pair.triple)
    win = pair.window(grade)
    twin = pair.triple.scheme.window(grade)
    co = max(lo._diff_max(lo._act(L, L.coimage(c)), {c: 1.0}) for c in twin)
    tw = [max(lo._diff_max(lo._act(L, V.image(c)), lo._act(M, L.image(c))) for c in win)
          for V, M in ((pair.V1, M1), (pair.V2, M2))]
    return {"model": pair.name, "window_grade": grade, "gram_deviation": _gram_dev(L, win),
            "coisometry_deviation": co, "intertwining_V1": tw[0], "intertwining_V2": tw[1]}


def embedding_report(grade: int = 4) -> dict:
    """Gram of {tau1^m tau2^n (1)} and the compression J* tau_i J against M_{z_i}."""
    J = invariant_embedding()
    neg = neg_pair()
    win = HARDY_BIDISC.window(grade)
    comp = [float(np.max(np.abs(lo.compress(J.H @ t @ J, win) - lo.compress(bidisc_shift(i), win))))
            for i, t in ((1, neg.V1), (2, neg.V2))]
    return {"window_grade": grade, "gram_deviation": _gram_dev(J, win),
            "compression_deviation_1": comp[0], "compression_deviation_2": comp[1]}
