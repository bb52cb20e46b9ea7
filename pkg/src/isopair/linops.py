"""Lazy linear algebra over countable orthonormal bases.

Vectors are finitely supported maps from basis coordinates to complex
coefficients.  Operators are given by their exact action on single basis
vectors (forward and adjoint), which makes every window identity an exact
finite computation.
"""
from __future__ import annotations

import cmath
import math
import threading
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

Coords = tuple[int, ...]
Scalar = complex
Action = Callable[[Coords], Mapping[Coords, complex]]

EXACT_TOL = 1e-13


class SchemeMismatch(ValueError):
    """Raised when an operator and a vector live on different index schemes."""


class InvalidIndex(ValueError):
    pass


# Schemes register a validator and an order key so that this module can check
# windows and sort supports without importing `spaces`.
_SCHEMES: dict[str, tuple[Callable[[Coords], bool], Callable[[Coords], tuple]]] = {}
_REG_LOCK = threading.Lock()


def register_scheme(scheme_id: str, validate: Callable[[Coords], bool],
                    order_key: Callable[[Coords], tuple]) -> None:
    with _REG_LOCK:
        _SCHEMES.setdefault(scheme_id, (validate, order_key))


def order_key(scheme_id: str) -> Callable[[Coords], tuple]:
    entry = _SCHEMES.get(scheme_id)
    return entry[1] if entry else (lambda c: c)


def check_index(scheme_id: str, c: Coords) -> None:
    entry = _SCHEMES.get(scheme_id)
    if entry is not None and not entry[0](c):
        raise InvalidIndex(f"{c!r} is not an index of {scheme_id}")


def scalar(re: float, im: float = 0.0) -> Scalar:
    z = complex(re, im)
    _require_finite(z)
    return z


def _require_finite(z: complex) -> None:
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise ValueError(f"non-finite coefficient {z!r}")


def _clean(entries: Mapping[Coords, complex]) -> dict[Coords, complex]:
    out = {}
    for c, v in entries.items():
        if v:
            v = complex(v)
            if not cmath.isfinite(v):
                raise ValueError(f"non-finite coefficient {v!r}")
            out[c] = v
    return out


@dataclass(frozen=True, order=True)
class BasisIndex:
    scheme_id: str
    coords: Coords


class SparseVec:
    """Finitely supported vector with a certified bound on the omitted tail."""

    __slots__ = ("scheme_id", "_entries", "tail_bound")

    def __init__(self, scheme_id: str, entries: Mapping[Coords, complex] | None = None,
                 tail_bound: float = 0.0):
        if not (tail_bound >= 0 and math.isfinite(tail_bound)):
            raise ValueError("tail_bound must be a finite nonnegative real")
        self.scheme_id = scheme_id
        self._entries = _clean(entries or {})
        self.tail_bound = float(tail_bound)

    @classmethod
    def basis(cls, scheme_id: str, c: Coords) -> "SparseVec":
        check_index(scheme_id, c)
        return cls(scheme_id, {c: 1.0})

    @property
    def entries(self) -> Mapping[Coords, complex]:
        return MappingProxyType(self._entries)

    def __getitem__(self, c: Coords) -> complex:
        return self._entries.get(c, 0j)

    def __len__(self) -> int:
        return len(self._entries)

    def support(self) -> list[Coords]:
        return sorted(self._entries, key=order_key(self.scheme_id))

    def norm(self) -> float:
        return math.hypot(*map(abs, self._entries.values()))  # scaled, no overflow

    def max_abs(self) -> float:
        return max((abs(v) for v in self._entries.values()), default=0.0)

    def inner(self, other: "SparseVec") -> complex:
        """<self, other>, linear in the first slot."""
        _same(self.scheme_id, other.scheme_id)
        small, big = (self, other) if len(self) <= len(other) else (other, self)
        s = 0j
        for c in small._entries:
            if c in big._entries:
                s += self._entries[c] * other._entries[c].conjugate()
        return s

    def _combine(self, other: "SparseVec", sign: float) -> "SparseVec":
        _same(self.scheme_id, other.scheme_id)
        out = dict(self._entries)
        for c, v in other._entries.items():
            out[c] = out.get(c, 0) + sign * v
        return SparseVec(self.scheme_id, out, self.tail_bound + other.tail_bound)

    def __add__(self, other: "SparseVec") -> "SparseVec":
        return self._combine(other, 1.0)

    def __sub__(self, other: "SparseVec") -> "SparseVec":
        return self._combine(other, -1.0)

    def __mul__(self, c: complex) -> "SparseVec":
        return SparseVec(self.scheme_id, {k: c * v for k, v in self._entries.items()},
                         abs(c) * self.tail_bound)

    __rmul__ = __mul__

    def dense(self, window: Sequence[Coords]) -> np.ndarray:
        return np.array([self._entries.get(c, 0j) for c in window], dtype=complex)

    def __repr__(self) -> str:
        return f"SparseVec({self.scheme_id}, {len(self)} entries, tail={self.tail_bound:.3g})"


def _same(a: str, b: str) -> None:
    if a != b:
        raise SchemeMismatch(f"{a} != {b}")


def _act(op: "LazyOp", entries: Mapping[Coords, complex], adjoint: bool = False) -> dict:
    out: dict[Coords, complex] = {}
    get = op.coimage if adjoint else op.image
    for c, a in entries.items():
        for d, b in get(c).items():
            out[d] = out.get(d, 0) + a * b
    return out


class LazyOp:
    """Bounded operator given by exact actions on basis vectors.

    `forward(c)` and `adjoint(c)` return finite coefficient maps.  Results are
    memoized per index behind a lock; the memo never changes results.
    """

    def __init__(self, domain: str, codomain: str, forward: Action, adjoint: Action,
                 norm_bound: float, band_radius: int | None = None, label: str = ""):
        if not (norm_bound >= 0 and math.isfinite(norm_bound)):
            raise ValueError("norm_bound must be finite and nonnegative")
        self.domain = domain
        self.codomain = codomain
        self._forward = forward
        self._adjoint = adjoint
        self.norm_bound = float(norm_bound)
        self.band_radius = band_radius
        self.label = label
        self._fmemo: dict[Coords, dict] = {}
        self._amemo: dict[Coords, dict] = {}
        self._lock = threading.Lock()
        self._H: LazyOp | None = None

    def image(self, c: Coords) -> Mapping[Coords, complex]:
        m = self._fmemo.get(c)
        if m is None:
            m = _clean(self._forward(c))
            with self._lock:
                m = self._fmemo.setdefault(c, m)
        return m

    def coimage(self, c: Coords) -> Mapping[Coords, complex]:
        m = self._amemo.get(c)
        if m is None:
            m = _clean(self._adjoint(c))
            with self._lock:
                m = self._amemo.setdefault(c, m)
        return m

    @property
    def H(self) -> "LazyOp":
        if self._H is None:
            h = LazyOp(self.codomain, self.domain, self._adjoint, self._forward,
                       self.norm_bound, self.band_radius, _star(self.label))
            # share memos and lock so each action is computed and cleaned once
            h._fmemo, h._amemo, h._lock = self._amemo, self._fmemo, self._lock
            h._H = self
            self._H = h
        return self._H

    def __call__(self, v: SparseVec) -> SparseVec:
        return apply(self, v)

    def __matmul__(self, other: "LazyOp") -> "LazyOp":
        return compose(self, other)

    def __add__(self, other: "LazyOp") -> "LazyOp":
        return add(self, other)

    def __sub__(self, other: "LazyOp") -> "LazyOp":
        return add(self, scale(-1, other))

    def __repr__(self) -> str:
        return f"LazyOp({self.label or '?'}: {self.domain} -> {self.codomain})"


def _star(label: str) -> str:
    if not label:
        return ""
    return label[:-1] if label.endswith("*") else (f"({label})*" if " " in label else label + "*")


def apply(op: LazyOp, v: SparseVec) -> SparseVec:
    _same(op.domain, v.scheme_id)
    return SparseVec(op.codomain, _act(op, v._entries), op.norm_bound * v.tail_bound)


def adjoint(op: LazyOp) -> LazyOp:
    return op.H


def compose(a: LazyOp, b: LazyOp) -> LazyOp:
    """a after b."""
    _same(b.codomain, a.domain)
    band = None if a.band_radius is None or b.band_radius is None else a.band_radius + b.band_radius
    return LazyOp(b.domain, a.codomain,
                  lambda c: _act(a, b.image(c)),
                  lambda c: _act(b, a.coimage(c), adjoint=True),
                  a.norm_bound * b.norm_bound, band, f"{a.label} {b.label}".strip())


def add(a: LazyOp, b: LazyOp) -> LazyOp:
    _same(a.domain, b.domain)
    _same(a.codomain, b.codomain)

    def merge(x, y):
        out = dict(x)
        for k, v in y.items():
            out[k] = out.get(k, 0) + v
        return out

    band = None if a.band_radius is None or b.band_radius is None else max(a.band_radius, b.band_radius)
    return LazyOp(a.domain, a.codomain,
                  lambda c: merge(a.image(c), b.image(c)),
                  lambda c: merge(a.coimage(c), b.coimage(c)),
                  a.norm_bound + b.norm_bound, band, f"({a.label} + {b.label})")


def scale(c: complex, a: LazyOp) -> LazyOp:
    c = complex(c)
    _require_finite(c)
    cc = c.conjugate()
    return LazyOp(a.domain, a.codomain,
                  lambda k: {d: c * v for d, v in a.image(k).items()},
                  lambda k: {d: cc * v for d, v in a.coimage(k).items()},
                  abs(c) * a.norm_bound, a.band_radius, a.label)


def identity(scheme_id: str) -> LazyOp:
    unit = lambda c: {c: 1.0}
    return LazyOp(scheme_id, scheme_id, unit, unit, 1.0, 0, "I")


def zero_op(domain: str, codomain: str | None = None) -> LazyOp:
    nothing = lambda c: {}
    return LazyOp(domain, codomain or domain, nothing, nothing, 0.0, 0, "0")


def from_matrix(scheme_id: str, window: Sequence[Coords], m, band_radius: int | None = None,
                label: str = "") -> LazyOp:
    """Operator acting as `m` on span(window) and as zero on the remaining basis vectors."""
    m = np.asarray(m, dtype=complex)
    n = len(window)
    if m.ndim != 2 or m.shape != (n, n):
        raise ValueError(f"matrix of shape {m.shape} is not square over a window of {n}")
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite matrix entry")
    for c in window:
        check_index(scheme_id, c)
    pos = {c: i for i, c in enumerate(window)}
    window = list(window)
    mh = m.conj().T

    def fwd(c, mat=m):
        i = pos.get(c)
        if i is None:
            return {}
        return {window[j]: mat[j, i] for j in np.flatnonzero(mat[:, i])}

    norm = float(np.linalg.norm(m, 2)) if n else 0.0
    return LazyOp(scheme_id, scheme_id, fwd, lambda c: fwd(c, mh), norm, band_radius, label)


def image_matrix(op: LazyOp, window: Sequence[Coords], adjoint: bool = False):
    """Exact images of the window vectors: returns (matrix, sorted support)."""
    get = op.coimage if adjoint else op.image
    cols = [get(c) for c in window]
    support = set()
    for col in cols:
        support.update(col)
    target = op.domain if adjoint else op.codomain
    rows = sorted(support, key=order_key(target))
    pos = {c: i for i, c in enumerate(rows)}
    m = np.zeros((len(rows), len(window)), dtype=complex)
    for i, col in enumerate(cols):
        for d, v in col.items():
            m[pos[d], i] = v
    return m, rows


def compress(op: LazyOp, window: Sequence[Coords],
             codomain_window: Sequence[Coords] | None = None) -> np.ndarray:
    """Matrix with entry [j, i] = <op e_i, e_j> over the given windows."""
    cod = list(window) if codomain_window is None else list(codomain_window)
    for c in window:
        check_index(op.domain, c)
    for c in cod:
        check_index(op.codomain, c)
    pos = {c: j for j, c in enumerate(cod)}
    m = np.zeros((len(cod), len(window)), dtype=complex)
    for i, c in enumerate(window):
        for d, v in op.image(c).items():
            j = pos.get(d)
            if j is not None:
                m[j, i] = v
    return m


# --------------------------------------------------------------------------
# window checks

@dataclass
class CheckReport:
    window_size: int
    deviations: dict[str, float] = field(default_factory=dict)

    def passed(self, tol: float = EXACT_TOL, only: Iterable[str] | None = None) -> bool:
        keys = self.deviations if only is None else only
        return all(self.deviations[k] <= tol for k in keys)


def _diff_max(x: Mapping, y: Mapping) -> float:
    keys = set(x) | set(y)
    return max((abs(x.get(k, 0) - y.get(k, 0)) for k in keys), default=0.0)


def isometry_deviation(op: LazyOp, window: Sequence[Coords]) -> float:
    m, _ = image_matrix(op, window)
    if not window:
        return 0.0
    g = m.conj().T @ m
    return float(np.max(np.abs(g - np.eye(len(window)))))


def adjoint_deviation(op: LazyOp, window: Sequence[Coords]) -> float:
    if not window:
        return 0.0
    fw = compress(op, window) if op.domain == op.codomain else None
    if fw is None:
        # rectangular: compare against the exact image supports
        m, rows = image_matrix(op, window)
        a = compress(op.H, rows, window)
        return float(np.max(np.abs(m - a.conj().T))) if rows else 0.0
    bw = compress(op.H, window)
    return float(np.max(np.abs(fw - bw.conj().T)))


def commutation_deviation(a: LazyOp, b: LazyOp, window: Sequence[Coords]) -> float:
    ab, ba = compose(a, b), compose(b, a)
    return max((_diff_max(ab.image(c), ba.image(c)) for c in window), default=0.0)


def window_checks(subject, window: Sequence[Coords]) -> CheckReport:
    """Structural checks on a window for one operator or a commuting pair.

    Each entry is a max-abs deviation; a pass on a window is only a necessary
    condition unless the window was enlarged by the band radius.
    """
    rep = CheckReport(len(window))
    ops = subject if isinstance(subject, tuple) else (subject,)
    for k, op in enumerate(ops, start=1):
        sfx = "" if len(ops) == 1 else str(k)
        rep.deviations["isometry" + sfx] = isometry_deviation(op, window)
        if op.domain == op.codomain:
            rep.deviations["unitarity" + sfx] = max(rep.deviations["isometry" + sfx],
                                                    isometry_deviation(op.H, window))
        rep.deviations["adjoint_consistency" + sfx] = adjoint_deviation(op, window)
    if len(ops) == 2:
        a, b = ops
        rep.deviations["commutation"] = commutation_deviation(a, b, window)
        rep.deviations["double_commutation"] = commutation_deviation(a, b.H, window)
    return rep


# --------------------------------------------------------------------------
# subspaces spanned inside a window

@dataclass
class Subspace:
    """Orthonormal columns `basis` over the ordered index list `frame`."""

    scheme_id: str
    frame: list
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def vectors(self) -> list[SparseVec]:
        return [SparseVec(self.scheme_id, {c: v for c, v in zip(self.frame, col) if v != 0})
                for col in self.basis.T]

    def rows(self, window: Sequence[Coords]) -> np.ndarray:
        pos = {c: i for i, c in enumerate(self.frame)}
        out = np.zeros((len(window), self.dim), dtype=complex)
        for j, c in enumerate(window):
            i = pos.get(c)
            if i is not None:
                out[j] = self.basis[i]
        return out

    def projector(self, window: Sequence[Coords]) -> np.ndarray:
        """Compression of the orthogonal projection onto this subspace."""
        r = self.rows(window)
        return r @ r.conj().T

    def residual(self, v: SparseVec) -> float:
        """Distance from v to the subspace (v must be supported on the frame to be exact)."""
        pos = {c: i for i, c in enumerate(self.frame)}
        outside = sum(abs(x) ** 2 for c, x in v.entries.items() if c not in pos)
        x = v.dense(self.frame)
        inside = x - self.basis @ (self.basis.conj().T @ x)
        return math.sqrt(outside + float(np.vdot(inside, inside).real))


def orthonormalize(vectors: Sequence[SparseVec], scheme_id: str, tol: float = 1e-10) -> Subspace:
    """Orthonormal basis of the span, keeping exactly orthonormal input untouched."""
    support = set()
    for v in vectors:
        _same(v.scheme_id, scheme_id)
        support.update(v.entries)
    frame = sorted(support, key=order_key(scheme_id))
    if not vectors or not frame:
        return Subspace(scheme_id, frame, np.zeros((len(frame), 0), dtype=complex))
    m = np.column_stack([v.dense(frame) for v in vectors])
    g = m.conj().T @ m
    if np.max(np.abs(g - np.eye(len(vectors)))) <= EXACT_TOL:
        return Subspace(scheme_id, frame, m)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    k = int(np.sum(s > tol * max(1.0, s[0]))) if s.size else 0
    return Subspace(scheme_id, frame, u[:, :k])


def kernel_basis(op: LazyOp, window: Sequence[Coords], tol: float = 1e-10) -> Subspace:
    """Orthonormal basis of {x in span(window): op x = 0}, computed exactly.

    Window vectors annihilated outright are kept as they are; the remaining
    kernel directions come from an SVD of the exact image matrix.
    """
    window = list(window)
    dead = [c for c in window if not op.image(c)]
    live = [c for c in window if op.image(c)]
    cols = []
    pos = {c: i for i, c in enumerate(window)}
    for c in dead:
        e = np.zeros(len(window), dtype=complex)
        e[pos[c]] = 1
        cols.append(e)
    if live:
        m, _ = image_matrix(op, live)
        _, s, vh = np.linalg.svd(m, full_matrices=True)
        thr = tol * max(1.0, s[0] if s.size else 0.0)
        rank = int(np.sum(s > thr))
        null = vh[rank:].conj().T
        for col in null.T:
            e = np.zeros(len(window), dtype=complex)
            for c, v in zip(live, col):
                e[pos[c]] = v
            cols.append(e)
    basis = np.column_stack(cols) if cols else np.zeros((len(window), 0), dtype=complex)
    return Subspace(op.domain, window, basis)


def image_subspace(op: LazyOp, sub: Subspace) -> Subspace:
    return orthonormalize([apply(op, v) for v in sub.vectors()], op.codomain)
