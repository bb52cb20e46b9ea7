"""Index schemes for the Hilbert spaces in play, and truncated analytic vectors.

Every scheme fixes a grade and a total order (grade first, then a
lexicographic tie-break), so that windows `window(scheme, N)` are
deterministic initial segments of the basis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

from .linops import Coords, SparseVec, register_scheme

__all__ = [
    "IndexScheme", "HARDY_DISC", "HARDY_BIDISC", "BILATERAL", "finite", "product",
    "vector_hardy", "direct_sum_scheme", "window", "AnalyticVectorSpec", "analytic_vector",
    "ParameterError",
]


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class IndexScheme:
    """kind is one of HardyDisc, HardyBidisc, BilateralZ, Finite, Product, Sum.

    VectorHardy over a fiber F is Product(HardyDisc, F), coordinates (n, *f).
    """

    kind: str
    parts: tuple["IndexScheme", ...] = ()
    dim: int = 0

    @cached_property
    def scheme_id(self) -> str:
        if self.kind == "Finite":
            return f"C{self.dim}"
        if self.parts:
            return f"{self.kind}({','.join(p.scheme_id for p in self.parts)})"
        return self.kind

    @property
    def label_kind(self) -> str:
        if self.kind == "Product" and self.parts[0].kind == "HardyDisc":
            return "VectorHardy"
        return self.kind

    @cached_property
    def arity(self) -> int:
        if self.kind in ("HardyDisc", "BilateralZ", "Finite"):
            return 1
        if self.kind == "HardyBidisc":
            return 2
        if self.kind == "Product":
            return self.parts[0].arity + self.parts[1].arity
        return -1  # Sum: block tag plus the arity of that block

    def split(self, c: Coords) -> tuple[Coords, Coords]:
        k = self.parts[0].arity
        return c[:k], c[k:]

    def valid(self, c: Coords) -> bool:
        if not isinstance(c, tuple) or not all(isinstance(x, int) for x in c):
            return False
        k = self.kind
        if k == "HardyDisc":
            return len(c) == 1 and c[0] >= 0
        if k == "HardyBidisc":
            return len(c) == 2 and c[0] >= 0 and c[1] >= 0
        if k == "BilateralZ":
            return len(c) == 1
        if k == "Finite":
            return len(c) == 1 and 0 <= c[0] < self.dim
        if k == "Product":
            if len(c) != self.arity:
                return False
            a, b = self.split(c)
            return self.parts[0].valid(a) and self.parts[1].valid(b)
        if k == "Sum":
            return len(c) >= 1 and c[0] in (0, 1) and self.parts[c[0]].valid(c[1:])
        return False

    def grade(self, c: Coords) -> int:
        k = self.kind
        if k == "HardyDisc":
            return c[0]
        if k == "HardyBidisc":
            return c[0] + c[1]
        if k == "BilateralZ":
            return abs(c[0])
        if k == "Finite":
            return 0
        if k == "Product":
            a, b = self.split(c)
            return self.parts[0].grade(a) + self.parts[1].grade(b)
        return self.parts[c[0]].grade(c[1:])

    def key(self, c: Coords) -> tuple:
        k = self.kind
        if k in ("HardyDisc", "Finite"):
            return (c[0],)
        if k == "HardyBidisc":
            return (c[0] + c[1], -c[0])
        if k == "BilateralZ":
            return (abs(c[0]), c[0])
        if k == "Product":
            a, b = self.split(c)
            return (self.grade(c), self.parts[0].key(a), self.parts[1].key(b))
        return (self.grade(c), c[0], self.parts[c[0]].key(c[1:]))

    def window(self, N: int) -> list[Coords]:
        if N < 0:
            return []
        k = self.kind
        if k == "HardyDisc":
            return [(n,) for n in range(N + 1)]
        if k == "HardyBidisc":
            return [(g - b, b) for g in range(N + 1) for b in range(g + 1)]
        if k == "BilateralZ":
            return [(0,)] + [c for g in range(1, N + 1) for c in ((-g,), (g,))]
        if k == "Finite":
            return [(j,) for j in range(self.dim)]
        if k == "Product":
            p, q = self.parts
            out = [a + b for a in p.window(N) for b in q.window(N - p.grade(a))]
        else:
            out = [(i,) + c for i in (0, 1) for c in self.parts[i].window(N)]
        return sorted(out, key=self.key)

    def label(self, c: Coords) -> str:
        k = self.kind
        if k == "HardyDisc":
            return _mono("z", c[0])
        if k == "HardyBidisc":
            s = "*".join(x for x in (_mono("z1", c[0]), _mono("z2", c[1])) if x != "1")
            return s or "1"
        if k == "BilateralZ":
            return f"e[{c[0]}]"
        if k == "Finite":
            return f"f[{c[0]}]"
        if k == "Product":
            a, b = self.split(c)
            return f"{self.parts[0].label(a)}(x){self.parts[1].label(b)}"
        return f"blk{c[0]}:{self.parts[c[0]].label(c[1:])}"


def _mono(v: str, n: int) -> str:
    return "1" if n == 0 else (v if n == 1 else f"{v}^{n}")


_REGISTERED: dict[str, IndexScheme] = {}


def _reg(s: IndexScheme) -> IndexScheme:
    if s.scheme_id not in _REGISTERED:
        _REGISTERED[s.scheme_id] = s
        register_scheme(s.scheme_id, s.valid, s.key)
    return _REGISTERED[s.scheme_id]


def lookup(scheme_id: str) -> IndexScheme:
    return _REGISTERED[scheme_id]


HARDY_DISC = _reg(IndexScheme("HardyDisc"))
HARDY_BIDISC = _reg(IndexScheme("HardyBidisc"))
BILATERAL = _reg(IndexScheme("BilateralZ"))


def finite(d: int) -> IndexScheme:
    if d < 1:
        raise ValueError("fiber dimension must be positive")
    return _reg(IndexScheme("Finite", dim=d))


def product(a: IndexScheme, b: IndexScheme) -> IndexScheme:
    return _reg(IndexScheme("Product", (a, b)))


def vector_hardy(fiber: IndexScheme | int) -> IndexScheme:
    if isinstance(fiber, int):
        fiber = finite(fiber)
    return product(HARDY_DISC, fiber)


def direct_sum_scheme(a: IndexScheme, b: IndexScheme) -> IndexScheme:
    return _reg(IndexScheme("Sum", (a, b)))


def window(scheme: IndexScheme, N: int) -> list[Coords]:
    return scheme.window(N)


# --------------------------------------------------------------------------
# analytic vectors

@dataclass(frozen=True)
class AnalyticVectorSpec:
    """name: kernel_k, x_neg, x_pos, h2 or ortho_gen_g.

    params: (lam,) or (w1, w2) for kernel_k; (l1, l2) for x_neg, x_pos, h2;
    (l2, m) for ortho_gen_g.  Give `target_eps`, a fixed `truncation` grade,
    or both.  `form` picks the closed form of x_neg / x_pos: "general" needs
    the parameter in the denominator to be nonzero, "z0" selects the special
    forms valid when l1*l2 = 0, and "auto" takes "z0" exactly when the
    general form would divide by zero.
    """

    name: str
    params: tuple
    target_eps: float | None = 1e-12
    truncation: int | None = None
    form: str = "auto"


def _rad(z: complex) -> float:
    r = abs(z)
    if not r < 1:
        raise ParameterError(f"parameter {z!r} is not in the open unit disc")
    return r


def _first_ok(check, start: int = 0, limit: int = 100000) -> int:
    n = start
    while not check(n):
        n += 1
        if n > limit:
            raise ParameterError("truncation did not converge")
    return n


def _geo_tail2(r: float, A: int) -> float:
    """Squared l2 norm of (r^n)_{n > A}."""
    return r ** (2 * (A + 1)) / (1 - r * r) if r > 0 else 0.0


def _one_var(r: float, eps2: float, N: int | None) -> int:
    if N is not None:
        return N
    return _first_ok(lambda A: _geo_tail2(r, A) <= eps2)


def _diag_tail2(r1: float, r2: float, K: int) -> float:
    """Sound bound for sum over m+n >= K of r1^(2m) r2^(2n)."""
    rho, sig = max(r1, r2) ** 2, min(r1, r2) ** 2
    if rho == 0:
        return 1.0 if K <= 0 else 0.0
    s = 0.0
    k = K
    inner_cap = 1 / (1 - sig / rho) if sig < rho else math.inf
    while True:
        term = rho ** k * min(k + 1, inner_cap)
        s += term
        if term < 1e-40 * max(s, 1e-300) or term == 0:
            break
        k += 1
        if k > K + 100000:
            break
    return s


def analytic_vector(spec: AnalyticVectorSpec) -> SparseVec:
    if spec.target_eps is None and spec.truncation is None:
        raise ParameterError("give target_eps or truncation")
    if spec.target_eps is not None and not spec.target_eps > 0:
        raise ParameterError("target_eps must be positive")
    if spec.truncation is not None and spec.truncation < 0:
        raise ParameterError("truncation must be nonnegative")
    eps2 = (spec.target_eps ** 2) / 2 if spec.target_eps else None
    N = spec.truncation
    builder = {"kernel_k": _kernel, "x_neg": _x_neg, "x_pos": _x_pos, "h2": _h2,
               "ortho_gen_g": _ortho_g}.get(spec.name)
    if builder is None:
        raise ParameterError(f"unknown analytic vector {spec.name!r}")
    vec = builder(spec, eps2, N)
    if spec.target_eps is not None and N is None and vec.tail_bound > spec.target_eps:
        raise ParameterError("tail bound exceeds target")  # pragma: no cover
    return vec


def _kernel(spec, eps2, N):
    if len(spec.params) == 1:
        lam = complex(spec.params[0])
        r = _rad(lam)
        A = 0 if r == 0 and N is None else _one_var(r, 2 * eps2 if eps2 else 0, N)
        b = lam.conjugate()
        ent = {(n,): b ** n for n in range(A + 1)}
        return SparseVec(HARDY_DISC.scheme_id, ent, math.sqrt(_geo_tail2(r, A)))
    w1, w2 = (complex(p) for p in spec.params)
    r1, r2 = _rad(w1), _rad(w2)
    c = 1 / ((1 - r1 * r1) * (1 - r2 * r2))
    if N is None:
        A = _first_ok(lambda a: c * (1 - r1 * r1) * _geo_tail2(r1, a) <= eps2)
        B = _first_ok(lambda b: c * (1 - r2 * r2) * _geo_tail2(r2, b) <= eps2)
    else:
        A = B = N
    b1, b2 = w1.conjugate(), w2.conjugate()
    p1 = [b1 ** a for a in range(A + 1)]
    p2 = [b2 ** b for b in range(B + 1)]
    ent = {(a, b): p1[a] * p2[b] for a in range(A + 1) for b in range(B + 1)}
    tail2 = c * ((1 - r1 * r1) * _geo_tail2(r1, A) + (1 - r2 * r2) * _geo_tail2(r2, B))
    return SparseVec(HARDY_BIDISC.scheme_id, ent, math.sqrt(tail2))


def _neg_tail(rs: float, rq: float, B: int) -> float:
    """Norm of s * sum_{n>B} q^(n-1) e_{-n}; kept unsquared since s may be huge."""
    return rs * rq ** B / math.sqrt(1 - rq * rq) if rq else 0.0


def _two_sided(pos_ratio: complex, neg_ratio: complex, neg_scale: complex, eps2, N,
               with_pos: bool = True) -> SparseVec:
    """sum_{n>=0} p^n e_n + s * sum_{n>=1} q^(n-1) e_{-n}, positive part optional."""
    rp, rq, rs = abs(pos_ratio), abs(neg_ratio), abs(neg_scale)
    if not math.isfinite(rs):
        raise ParameterError("parameter too close to zero for the general form")
    if N is None:
        A = _first_ok(lambda a: _geo_tail2(rp, a) <= eps2) if with_pos else -1
        eps = math.sqrt(eps2)
        B = _first_ok(lambda b: _neg_tail(rs, rq, b) <= eps, 1)
    else:
        A = N if with_pos else -1
        B = max(N, 1)
    ent = {}
    for n in range(A + 1):
        ent[(n,)] = pos_ratio ** n
    for n in range(1, B + 1):
        ent[(-n,)] = neg_scale * neg_ratio ** (n - 1)
    pos_tail = math.sqrt(_geo_tail2(rp, A)) if with_pos else 0.0
    return SparseVec(BILATERAL.scheme_id, ent, math.hypot(pos_tail, _neg_tail(rs, rq, B)))


def _pick_form(spec, singular: complex, other: complex) -> str:
    form = spec.form
    if form == "auto":
        form = "z0" if singular == 0 else "general"
    if form == "general" and singular == 0:
        raise ParameterError(f"{spec.name}: the general form divides by zero here; select form='z0'")
    if form == "z0" and singular * other != 0:
        raise ParameterError(f"{spec.name}: form 'z0' needs l1*l2 = 0")
    if form not in ("general", "z0"):
        raise ParameterError(f"unknown form {form!r}")
    return form


def _x_neg(spec, eps2, N):
    l1, l2 = (complex(p) for p in spec.params)
    _rad(l1), _rad(l2)
    form = _pick_form(spec, l1, l2)
    if form == "general" or l1 != 0:
        return _two_sided(l1, l2, 1 / l1, eps2, N)
    # l1 = 0: the eigenvector lives on the negative half only
    return _two_sided(0, l2, 1.0, eps2, N, with_pos=False)


def _x_pos(spec, eps2, N):
    l1, l2 = (complex(p) for p in spec.params)
    _rad(l1), _rad(l2)
    form = _pick_form(spec, l2, l1)
    b1, b2 = l1.conjugate(), l2.conjugate()
    if form == "general" or l2 != 0:
        return _two_sided(b2, b1, 1 / b2, eps2, N)
    return _two_sided(0, b1, 1.0, eps2, N, with_pos=False)


def _h2(spec, eps2, N):
    """Coefficient of z1^(m+2n) z2^n is conj(l2)^n l1^m; truncated at m+n <= K."""
    l1, l2 = (complex(p) for p in spec.params)
    r1, r2 = _rad(l1), _rad(l2)
    K = N if N is not None else _first_ok(lambda k: _diag_tail2(r1, r2, k + 1) <= 2 * eps2)
    b2 = l2.conjugate()
    ent = {}
    for n in range(K + 1):
        for m in range(K + 1 - n):
            ent[(m + 2 * n, n)] = b2 ** n * l1 ** m
    return SparseVec(HARDY_BIDISC.scheme_id, ent, math.sqrt(_diag_tail2(r1, r2, K + 1)))


def _ortho_g(spec, eps2, N):
    """sum_n conj(l2)^n z1^(m+2n) z2^n, truncated at n <= K."""
    l2, m = spec.params
    l2 = complex(l2)
    m = int(m)
    if m < 0:
        raise ParameterError("generator index must be nonnegative")
    r = _rad(l2)
    K = _one_var(r, 2 * eps2 if eps2 else 0, N) if (r > 0 or N is not None) else 0
    b = l2.conjugate()
    ent = {(m + 2 * n, n): b ** n for n in range(K + 1)}
    return SparseVec(HARDY_BIDISC.scheme_id, ent, math.sqrt(_geo_tail2(r, K)))


def grade_of(scheme: IndexScheme, vec: SparseVec) -> int:
    return max((scheme.grade(c) for c in vec.entries), default=0)


def labels(scheme: IndexScheme, coords: Sequence[Coords]) -> list[str]:
    return [scheme.label(c) for c in coords]
