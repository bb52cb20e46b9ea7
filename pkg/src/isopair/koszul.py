"""Koszul complexes of shifted commuting pairs, joint spectra and grid scans.

Finite pairs get rank verdicts.  Infinite subjects only ever get
certificate-based samples: an approximate joint eigenvector of the pair
or of its adjoint, with a residual bounded by the truncation tail.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import bcl
from . import linops as lo
from .bcl import MIXED, OFFDIAG, ZERO, BclTriple
from .models import neg_pair
from .spaces import AnalyticVectorSpec, ParameterError, analytic_vector

RANK_TOL = 1e-9
DEDUP = 1e-8
RESIDUAL_TOL = 1e-10


class NonCommuting(ValueError):
    pass


class DeflationError(RuntimeError):
    pass


def _c(x: complex) -> list:
    x = complex(x)
    return [x.real, x.imag]


# --------------------------------------------------------------------------
# finite pairs

@dataclass
class KoszulReport:
    lam: tuple
    ranks: tuple
    exact: tuple
    break_stages: tuple
    rank_tolerance: float
    commutator_norm: float
    dim: int

    @property
    def nonsingular(self) -> bool:
        return all(self.exact)

    def to_json(self) -> dict:
        return {"lambda": [_c(x) for x in self.lam], "ranks": list(self.ranks),
                "exact": list(self.exact), "break_stages": list(self.break_stages),
                "rank_tolerance": self.rank_tolerance, "commutator_norm": self.commutator_norm}


def numerical_rank(m: np.ndarray, tol: float = RANK_TOL, scale: float = 0.0) -> int:
    """Singular values above tol * max(sigma_max, scale) * max(rows, cols) count.

    `scale` guards against a shifted matrix that is pure rounding noise,
    e.g. A - a I for a scalar A, whose own sigma_max is meaningless.
    """
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    ref = max(s[0], scale)
    if ref == 0:
        return 0
    return int(np.sum(s > tol * ref * max(m.shape)))


def commutator_norm(A: np.ndarray, B: np.ndarray) -> float:
    return float(np.linalg.norm(A @ B - B @ A, 2)) if A.size else 0.0


def koszul_finite(A, B, l1: complex, l2: complex, tol: float = RANK_TOL) -> KoszulReport:
    A, B = np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)
    d = A.shape[0]
    cn = commutator_norm(A, B)
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1.0) if d else 1.0
    if cn > tol * scale:
        raise NonCommuting(f"commutator norm {cn:.3g} exceeds {tol:.1g} * {scale:.3g}")
    I = np.eye(d)
    Al, Bl = A - l1 * I, B - l2 * I
    r1 = numerical_rank(np.vstack([Al, Bl]), tol, scale)
    r2 = numerical_rank(np.hstack([-Bl, Al]), tol, scale)
    exact = (r1 == d, r1 + r2 == 2 * d, r2 == d)
    stages = tuple(i + 1 for i, e in enumerate(exact) if not e)
    return KoszulReport((complex(l1), complex(l2)), (r1, r2), exact, stages, tol, cn, d)


def _common_eigvec(A: np.ndarray, B: np.ndarray, tol: float) -> np.ndarray:
    d = A.shape[0]
    a = np.linalg.eigvals(A)[0]
    _, s, vh = np.linalg.svd(A - a * np.eye(d))
    thr = max(tol, 1e-7) * max(s[0], 1.0)
    k = max(1, int(np.sum(s <= thr)))
    N = vh[-k:].conj().T
    mu, Y = np.linalg.eig(N.conj().T @ B @ N)
    x = N @ Y[:, 0]
    return x / np.linalg.norm(x)


def joint_spectrum_finite(A, B, tol: float = RANK_TOL) -> list[tuple[complex, complex]]:
    """Diagonal pairs of a simultaneous triangularization, by repeatedly peeling
    off a common eigenvector and compressing to its orthogonal complement."""
    A, B = np.asarray(A, dtype=complex), np.asarray(B, dtype=complex)
    scale = max(np.linalg.norm(A, 2), np.linalg.norm(B, 2), 1.0) if A.size else 1.0
    if commutator_norm(A, B) > tol * scale:
        raise NonCommuting("input matrices do not commute")
    pts: list[tuple[complex, complex]] = []
    while A.shape[0]:
        x = _common_eigvec(A, B, tol)
        l1, l2 = x.conj() @ A @ x, x.conj() @ B @ x
        res = max(np.linalg.norm(A @ x - l1 * x), np.linalg.norm(B @ x - l2 * x))
        if res > 1e-6 * scale:
            raise DeflationError(f"common eigenvector residual {res:.3g}")
        pts.append((complex(l1), complex(l2)))
        q, _ = np.linalg.qr(np.column_stack([x, np.eye(A.shape[0], dtype=complex)]))
        Qp = q[:, 1:A.shape[0]]
        A, B = Qp.conj().T @ A @ Qp, Qp.conj().T @ B @ Qp
    return dedup(pts)


def dedup(pts, radius: float = DEDUP) -> list[tuple[complex, complex]]:
    out: list[tuple[complex, complex]] = []
    for p in pts:
        if all(_dist(p, q) > radius for q in out):
            out.append(p)
    return sorted(out, key=lambda p: (round(p[0].real, 9), round(p[0].imag, 9),
                                      round(p[1].real, 9), round(p[1].imag, 9)))


def _dist(p, q) -> float:
    return math.hypot(abs(p[0] - q[0]), abs(p[1] - q[1]))


def hausdorff(P, Q) -> float:
    """Symmetric Hausdorff distance between two finite point sets in C^2."""
    if not P and not Q:
        return 0.0
    if not P or not Q:
        return math.inf
    return max(max(min(_dist(p, q) for q in Q) for p in P),
               max(min(_dist(p, q) for p in P) for q in Q))


# --------------------------------------------------------------------------
# fibers of a finite triple

def _basis_of(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((P + P.conj().T) / 2)
    return v[:, w > 0.5]


def predicted_points(triple: BclTriple, z: complex) -> list[tuple[complex, complex]] | None:
    """Closed-form sigma(phi1(z), phi2(z)) for the Zero and OffDiagonal classes."""
    tag = bcl.classify(triple).tag
    U, P = np.asarray(triple.U), np.asarray(triple.P)
    Qr, Qc = _basis_of(P), _basis_of(np.eye(triple.dim) - P)
    pts = []
    if tag == ZERO:
        for lam in np.linalg.eigvals(Qr.conj().T @ U @ Qr) if Qr.size else []:
            pts.append((z * lam.conjugate(), complex(lam)))
        for mu in np.linalg.eigvals(Qc.conj().T @ U @ Qc) if Qc.size else []:
            pts.append((complex(mu.conjugate()), z * mu))
        return dedup(pts)
    if tag == OFFDIAG:
        r = cmath.sqrt(z)
        for e in np.linalg.eigvals(Qr.conj().T @ U @ U @ Qr):
            h = cmath.exp(0.5j * cmath.phase(e))
            for s in (1, -1):
                pts.append((s * r / h, s * r * h))
        return dedup(pts)
    return None


def _left_residual(A, B, l1, l2) -> float:
    """Smallest joint residual of A*, B* at conj(l): a common eigenvector of the adjoints."""
    try:
        pts_vec = _common_eigvec_at(A.conj().T, B.conj().T, l1.conjugate(), l2.conjugate())
    except DeflationError:
        return math.inf
    y = pts_vec
    return float(max(np.linalg.norm(A.conj().T @ y - l1.conjugate() * y),
                     np.linalg.norm(B.conj().T @ y - l2.conjugate() * y)))


def _common_eigvec_at(A, B, a, b) -> np.ndarray:
    M = np.vstack([A - a * np.eye(A.shape[0]), B - b * np.eye(A.shape[0])])
    _, s, vh = np.linalg.svd(M)
    return vh[-1].conj()


@dataclass
class PhiSpectrum:
    z: complex
    points: list
    reports: list

    def to_json(self) -> dict:
        return {"z": _c(self.z), "points": [[_c(a), _c(b)] for a, b in self.points],
                "reports": [r.to_json() for r in self.reports]}


def phi_spectrum(triple: BclTriple, z: complex, tol: float = RANK_TOL) -> PhiSpectrum:
    if triple.kind != "finite":
        raise ValueError("phi_spectrum needs a finite triple")
    if not abs(z) < 1:
        raise ParameterError("z must lie in the open unit disc")
    A, B = bcl.phi(triple, z)
    pts = joint_spectrum_finite(A, B, tol)
    return PhiSpectrum(complex(z), pts, [koszul_finite(A, B, a, b, tol) for a, b in pts])


# --------------------------------------------------------------------------
# certificates for infinite subjects

@dataclass
class SpectrumSample:
    z: complex | None
    point: tuple
    in_spectrum: bool
    break_stages: tuple
    certificate: str
    residual: float
    bound: float = 0.0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"z": None if self.z is None else _c(self.z), "point": [_c(x) for x in self.point],
                "in_spectrum": self.in_spectrum, "break_stages": list(self.break_stages),
                "certificate": self.certificate, "residual": self.residual, "bound": self.bound,
                **self.extra}

    def csv_row(self) -> list:
        z = self.z if self.z is not None else self.point[0] * self.point[1]
        return [repr(z.real), repr(z.imag), repr(self.point[0].real), repr(self.point[0].imag),
                repr(self.point[1].real), repr(self.point[1].imag), int(self.in_spectrum),
                ";".join(map(str, self.break_stages)), self.certificate, repr(self.residual)]


CSV_HEADER = ["z_re", "z_im", "l1_re", "l1_im", "l2_re", "l2_im", "in_spectrum", "break_stages",
              "certificate", "residual"]


def _residual(A: lo.LazyOp, B: lo.LazyOp, x: lo.SparseVec, l1: complex, l2: complex) -> float:
    return max((lo.apply(A, x) - x * l1).norm(), (lo.apply(B, x) - x * l2).norm())


def eigvec_certificate(subject: str, l1: complex, l2: complex, eps: float = 1e-12,
                       tol: float = RESIDUAL_TOL) -> SpectrumSample:
    """subject: "psi" (forward on psi(z)), "eta" (adjoint on eta(z)) or
    "pos" (adjoints of the coordinate shifts on a bidisc kernel vector)."""
    l1, l2 = complex(l1), complex(l2)
    for l in (l1, l2):
        if not abs(l) < 1:
            raise ParameterError(f"{l} is not in the open unit disc")
    z = l1 * l2
    if subject == "psi":
        A, B = bcl.phi(bcl.bilateral_p_minus(), z)
        x = analytic_vector(AnalyticVectorSpec("x_neg", (l1, l2), eps))
        side, stages, kind = (A, B), (1,), "eigvec_forward"
    elif subject == "eta":
        A, B = bcl.phi(bcl.bilateral_p_zero_plus(), z)
        x = analytic_vector(AnalyticVectorSpec("x_pos", (l1, l2), eps))
        side, stages, kind = (A.H, B.H), (3,), "eigvec_adjoint"
    elif subject == "pos":
        x = analytic_vector(AnalyticVectorSpec("kernel_k", (l1, l2), eps))
        side, stages, kind = (bcl.bidisc_shift(1).H, bcl.bidisc_shift(2).H), (3,), "eigvec_adjoint"
        z = None
    else:
        raise ValueError(f"no eigenvector certificate for subject {subject!r}")
    A, B = side
    # residuals are for x / |x|: the closed forms carry factors like 1/l2 that
    # make |x| huge near the coordinate axes
    nrm = x.norm()
    if kind == "eigvec_forward":
        res = _residual(A, B, x, l1, l2) / nrm
    else:
        res = _residual(A, B, x, l1.conjugate(), l2.conjugate()) / nrm
    nb = max(A.norm_bound, B.norm_bound) + max(abs(l1), abs(l2))
    bound = 2 * nb * x.tail_bound / nrm
    ok = res <= max(bound, lo.EXACT_TOL) and res <= tol
    return SpectrumSample(z, (l1, l2), ok, stages if ok else (), kind, res, bound,
                          {"vector_norm": x.norm(), "tail_bound": x.tail_bound})


# --------------------------------------------------------------------------

@dataclass
class Stage2Report:
    lam: tuple
    truncation: int
    generators: int
    pairings: list
    pairing_bound: float
    h2_tail: float
    pattern_ok: bool
    sufficient: bool
    threshold: float

    @property
    def passed(self) -> bool:
        return self.sufficient and self.pattern_ok and max(map(abs, self.pairings)) <= self.threshold

    def to_json(self) -> dict:
        return {"lambda": [_c(x) for x in self.lam], "truncation": self.truncation,
                "generators": self.generators, "pairings": [_c(p) for p in self.pairings],
                "max_pairing": max(map(abs, self.pairings)), "pairing_bound": self.pairing_bound,
                "h2_tail": self.h2_tail, "pattern_ok": self.pattern_ok,
                "sufficient": self.sufficient, "threshold": self.threshold, "passed": self.passed}


def stage2_certificate_neg(l1: complex, l2: complex, N: int = 40, M: int = 20,
                           threshold: float = RESIDUAL_TOL, tail_tol: float = 1e-12) -> Stage2Report:
    """Pairings of (tau1 - l1) h2 with the generators g_m of the orthocomplement of
    ran(tau2 - l2); they vanish exactly for the untruncated h2."""
    l1, l2 = complex(l1), complex(l2)
    h2 = analytic_vector(AnalyticVectorSpec("h2", (l1, l2), None, N))
    b2 = l2.conjugate()
    pattern = all(h2[(m + 2 * n, n)] == b2 ** n * l1 ** m for n in range(N + 1) for m in range(N + 1 - n))
    pattern = pattern and len(h2.entries) == sum(1 for n in range(N + 1) for m in range(N + 1 - n)
                                                 if b2 ** n * l1 ** m != 0)
    t1 = neg_pair().V1
    r = lo.apply(t1, h2) - h2 * l1
    pairs, bound = [], 0.0
    for m in range(M + 1):
        g = analytic_vector(AnalyticVectorSpec("ortho_gen_g", (l2, m), tail_tol))
        pairs.append(r.inner(g))
        bound = max(bound, (1 + abs(l1)) * h2.tail_bound * (g.norm() + g.tail_bound) + r.norm() * g.tail_bound)
    return Stage2Report((l1, l2), N, M, pairs, bound, h2.tail_bound, pattern,
                        h2.tail_bound <= tail_tol, threshold)


# --------------------------------------------------------------------------
# grids

def parse_grid(spec: str) -> tuple[int, int]:
    try:
        a, b = spec.lower().split("x")
        a, b = int(a), int(b)
    except ValueError as e:
        raise ValueError(f"grid spec must look like 12x12, got {spec!r}") from e
    if a < 1 or b < 1:
        raise ValueError("grid sizes must be positive")
    return a, b


def z_grid(n_rad: int, n_ang: int) -> list[complex]:
    """Polar grid in the open disc: the origin, then radii k/n_rad for k = 1..n_rad-1
    at n_ang angles each."""
    return [0j] + [k / n_rad * cmath.exp(2j * math.pi * j / n_ang)
                   for k in range(1, n_rad) for j in range(n_ang)]


def sunflower(n: int, radius: float = 0.9) -> list[complex]:
    g = math.pi * (3 - math.sqrt(5))
    return [radius * math.sqrt((k + 0.5) / n) * cmath.exp(1j * g * k) for k in range(n)]


def lambda_grid(n1: int, n2: int, radius: float = 0.9) -> list[tuple[complex, complex]]:
    return [(a, b) for a in sunflower(n1, radius) for b in sunflower(n2, radius)]


def _disc_mesh(n: int = 60) -> list[complex]:
    return [0j] + [k / n * cmath.exp(2j * math.pi * j / (6 * k)) for k in range(1, n + 1) for j in range(6 * k)]


def covering_radius(points: list[complex], mesh: list[complex] | None = None) -> float:
    """max over a fine mesh of the closed disc of the distance to the nearest point."""
    mesh = _disc_mesh() if mesh is None else mesh
    P = np.array(points)
    return float(max(np.min(np.abs(P - w)) for w in mesh))


def _dist_to_lines(p, alphas) -> float:
    best = math.inf
    for a in alphas:
        w = (p[0] + a.conjugate() * p[1]) / 2
        if abs(w) > 1:
            w = w / abs(w)
        best = min(best, math.hypot(abs(p[0] - w), abs(p[1] - w * a)))
    return best


# --------------------------------------------------------------------------
# scans

@dataclass
class ScanResult:
    subject: str
    cls: str
    samples: list
    summary: dict

    def csv_lines(self) -> list[str]:
        lines = [",".join(CSV_HEADER)]
        lines += [",".join(str(x) for x in s.csv_row()) for s in self.samples]
        return lines

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("passed"))


class _Stage1Window:
    """Injectivity of (M_phi1 - l1, M_phi2 - l2) on polynomials of degree <= grade.

    The multipliers raise degree by at most one, so compressing from the
    grade-G window into the grade-(G+1) window is exact; full column rank
    rules out a joint eigenvector of degree <= G.
    """

    def __init__(self, triple: BclTriple, grade: int = 4):
        V1, V2 = bcl.multiplier_pair(triple)
        win, big = triple.scheme.window(grade), triple.scheme.window(grade + 1)
        self.grade = grade
        self.M1, self.M2 = lo.compress(V1, win, big), lo.compress(V2, win, big)
        self.E = lo.compress(lo.identity(triple.scheme.scheme_id), win, big)
        self.smin = math.inf
        self.count = 0

    def add(self, l1: complex, l2: complex) -> None:
        d1 = np.vstack([self.M1 - l1 * self.E, self.M2 - l2 * self.E])
        self.smin = min(self.smin, float(np.linalg.svd(d1, compute_uv=False)[-1]))
        self.count += 1

    def summary(self, tol: float) -> dict:
        smin = self.smin if self.count else None
        # each shifted multiplier has norm at most 1 + |l| <= 2
        thr = tol * 2 * max(self.M1.shape)
        return {"grade": self.grade, "points": self.count, "min_singular_value": smin,
                "threshold": thr, "injective": smin is None or smin > thr}


def _finite_scan(name: str, triple: BclTriple, zs: list[complex], grid: str, tol: float,
                 tol_res: float) -> ScanResult:
    cls = bcl.classify(triple).tag
    samples, per_z, raw_breaks, worst_map = [], 0.0, {}, 0.0
    stage1 = _Stage1Window(triple)
    for z in zs:
        A, B = bcl.phi(triple, z)
        sp = phi_spectrum(triple, z, tol)
        pred = predicted_points(triple, z)
        if pred is not None:
            per_z = max(per_z, hausdorff(sp.points, pred))
        for (a, b), rep in zip(sp.points, sp.reports):
            key = ",".join(map(str, rep.break_stages))
            raw_breaks[key] = raw_breaks.get(key, 0) + 1
            res = _left_residual(A, B, a, b)
            ok = res <= tol_res
            worst_map = max(worst_map, abs(a * b - z))
            samples.append(SpectrumSample(z, (a, b), ok, (3,) if ok else (), "eigvec_adjoint", res))
            stage1.add(a, b)
    summary = {"subject": name, "class": cls, "grid": grid, "samples": len(samples),
               "tolerances": {"rank": tol, "residual": tol_res, "dedup": DEDUP},
               "per_z_hausdorff_max": per_z if cls in (ZERO, OFFDIAG) else None,
               "spectral_mapping_max": worst_map,
               "finite_fiber_break_stages": dict(sorted(raw_breaks.items())),
               "stage1_window": stage1.summary(tol)}
    res_grid = covering_radius(zs)
    pts = [s.point for s in samples]
    if cls == OFFDIAG:
        U, P = np.asarray(triple.U), np.asarray(triple.P)
        Qr = _basis_of(P)
        alphas = dedup([(complex(e), 0j) for e in np.linalg.eigvals(Qr.conj().T @ U @ U @ Qr)])
        alphas = [a for a, _ in alphas]
        to_pred = max((_dist_to_lines(p, alphas) for p in pts), default=0.0)
        mesh = [(w, w * a) for a in alphas for w in _disc_mesh(30)]
        to_samp = max(min(_dist(m, p) for p in pts) for m in mesh)
        summary["predicted_set_descriptor"] = {"kind": "lines_z(1,alpha)", "alpha": [_c(a) for a in alphas]}
        # samples sit at w = +-sqrt(z) on each line, at distance sqrt(2)|dw| apart
        summary["z_grid_covering_radius"] = res_grid
        res_grid = math.sqrt(2) * covering_radius([s * cmath.sqrt(z) for z in zs for s in (1, -1)])
    elif cls == ZERO:
        to_pred = per_z
        to_samp = per_z
        summary["predicted_set_descriptor"] = {"kind": "per_fiber_zero_formula"}
    else:
        to_pred, to_samp = worst_map, None
        summary["predicted_set_descriptor"] = {"kind": "spectral_mapping_l1l2_eq_z"}
    summary["hausdorff_one_sided"] = [to_pred, to_samp]
    summary["grid_resolution"] = res_grid
    ok = all(s.in_spectrum for s in samples) and worst_map <= 1e-8 and summary["stage1_window"]["injective"]
    if cls in (ZERO, OFFDIAG):
        ok = ok and per_z <= DEDUP
    if cls == OFFDIAG:
        ok = ok and to_pred <= DEDUP + res_grid and to_samp <= DEDUP + res_grid
    summary["passed"] = bool(ok)
    return ScanResult(name, cls, samples, summary)


_INFINITE = {"psi": ("psi", "Negative"), "neg": ("psi", "Negative"),
             "eta": ("eta", "Positive"), "pos": ("eta", "Positive")}


def _infinite_scan(name: str, lgrid: list, grid: str, eps: float, tol_res: float) -> ScanResult:
    cert, cls = _INFINITE[name]
    samples = [eigvec_certificate(cert, a, b, eps, tol_res) for a, b in lgrid]
    worst = max((s.residual for s in samples), default=0.0)
    pts = [s.point for s in samples]
    # the predicted set is the closed bidisc; every sample lies in it, and
    # the reverse distance is the covering radius of the grid
    cover = max(covering_radius([p[0] for p in pts]), covering_radius([p[1] for p in pts]))
    summary = {"subject": name, "class": cls, "grid": grid, "samples": len(samples),
               "certificate": samples[0].certificate if samples else None,
               "certified_in_spectrum": sum(s.in_spectrum for s in samples),
               "not_certified": sum(not s.in_spectrum for s in samples),
               "max_residual": worst,
               "predicted_set_descriptor": {"kind": "closed_bidisc"},
               "hausdorff_one_sided": [0.0, math.sqrt(2) * cover],
               "grid_resolution": math.sqrt(2) * cover,
               "tolerances": {"residual": tol_res, "truncation_eps": eps}}
    summary["passed"] = all(s.in_spectrum for s in samples)
    return ScanResult(name, cls, samples, summary)


def scan(subject, zgrid: str = "12x12", lgrid: str = "24x24", tol: float = RANK_TOL,
         tol_res: float = RESIDUAL_TOL, eps: float = 1e-12) -> ScanResult:
    """subject: a finite BclTriple, a ModelPair carrying a finite triple, or one of
    psi / neg / eta / pos for certificate scans over a lambda grid."""
    if isinstance(subject, str):
        if subject not in _INFINITE:
            raise ValueError(f"no scan available for {subject!r}")
        a, b = parse_grid(lgrid)
        return _infinite_scan(subject, lambda_grid(a, b), lgrid, eps, tol_res)
    name = getattr(subject, "name", "") or "triple"
    triple = subject if isinstance(subject, BclTriple) else getattr(subject, "triple", None)
    if triple is None or triple.kind != "finite":
        if name in _INFINITE:
            return scan(name, zgrid, lgrid, tol, tol_res, eps)
        raise ValueError(f"subject {name} has no finite triple to scan")
    a, b = parse_grid(zgrid)
    return _finite_scan(name, triple, z_grid(a, b), zgrid, tol, tol_res)


# --------------------------------------------------------------------------
# random commuting pairs and the oracle suite

def random_commuting_pair(rng: np.random.Generator, d: int) -> tuple[np.ndarray, np.ndarray]:
    """Two polynomials in one diagonalizable matrix, with repeated eigenvalues allowed."""
    k = int(rng.integers(1, d + 1))
    vals = (rng.normal(size=k) + 1j * rng.normal(size=k)) * 0.6
    m = vals[rng.integers(0, k, size=d)]
    S = np.eye(d) + 0.3 * (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    Mx = S @ np.diag(m) @ np.linalg.inv(S)

    def poly():
        c = rng.normal(size=3) + 1j * rng.normal(size=3)
        return c[0] * np.eye(d) + c[1] * Mx + c[2] * Mx @ Mx

    return poly(), poly()


def _test_points(pts, rng, extra: int = 3, sep: float = 1e-3):
    cands = list(pts)
    l1s = [p[0] for p in pts]
    l2s = [p[1] for p in pts]
    cross = [(a, b) for a in l1s for b in l2s]
    cross += [(complex(*rng.normal(size=2)), complex(*rng.normal(size=2))) for _ in range(extra)]
    far = [c for c in cross if all(_dist(c, p) > sep for p in pts)]
    return cands, far


def oracle_agreement(A, B, rng, tol: float = RANK_TOL) -> tuple[int, int]:
    pts = joint_spectrum_finite(A, B, tol)
    inside, outside = _test_points(pts, rng)
    agree = sum(not koszul_finite(A, B, a, b, tol).nonsingular for a, b in inside)
    agree += sum(koszul_finite(A, B, a, b, tol).nonsingular for a, b in outside)
    return agree, len(inside) + len(outside)


def oracle_suite(seed: int, count: int = 200, max_dim: int = 6, tol: float = RANK_TOL) -> dict:
    rng = np.random.default_rng(seed)
    agree = total = pairs_ok = 0
    for _ in range(count):
        d = int(rng.integers(1, max_dim + 1))
        A, B = random_commuting_pair(rng, d)
        a, t = oracle_agreement(A, B, rng, tol)
        agree, total, pairs_ok = agree + a, total + t, pairs_ok + (a == t)
    return {"seed": seed, "pairs": count, "pairs_agreeing": pairs_ok, "points": total,
            "points_agreeing": agree, "passed": pairs_ok == count}


def _singular(A, B, p, tol=RANK_TOL) -> bool:
    return not koszul_finite(A, B, p[0], p[1], tol).nonsingular


def block_property(rng, tol: float = RANK_TOL) -> bool:
    """Spectrum of a direct sum is the union of the block spectra."""
    d1, d2 = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    A1, B1 = random_commuting_pair(rng, d1)
    A2, B2 = random_commuting_pair(rng, d2)
    Z12, Z21 = np.zeros((d1, d2)), np.zeros((d2, d1))
    A = np.block([[A1, Z12], [Z21, A2]])
    B = np.block([[B1, Z12], [Z21, B2]])
    s1, s2 = joint_spectrum_finite(A1, B1, tol), joint_spectrum_finite(A2, B2, tol)
    inside, outside = _test_points(s1 + s2, rng)
    ok = all(_singular(A, B, p, tol) for p in inside)
    ok = ok and not any(_singular(A, B, p, tol) for p in outside)
    ok = ok and all(_singular(A1, B1, p, tol) or _singular(A2, B2, p, tol) for p in inside)
    return ok


def conjugation_property(rng, tol: float = RANK_TOL) -> bool:
    d = int(rng.integers(1, 6))
    A, B = random_commuting_pair(rng, d)
    inside, outside = _test_points(joint_spectrum_finite(A, B, tol), rng)
    Ah, Bh = A.conj().T, B.conj().T
    return all(_singular(A, B, p, tol) == _singular(Ah, Bh, (p[0].conjugate(), p[1].conjugate()), tol)
               for p in inside + outside)


def _random_normal(rng, d):
    q, _ = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    ev = (rng.normal(size=d) + 1j * rng.normal(size=d)) * 0.7
    return q @ np.diag(ev) @ q.conj().T, ev


def tensor_property(rng, tol: float = RANK_TOL) -> bool:
    """sigma(T (x) I, I (x) S) is the product of sigma(T) and sigma(S)."""
    dt, ds = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    T, et = _random_normal(rng, dt)
    S, es = _random_normal(rng, ds)
    A, B = np.kron(T, np.eye(ds)), np.kron(np.eye(dt), S)
    prod = [(complex(a), complex(b)) for a in et for b in es]
    ok = all(_singular(A, B, p, tol) for p in prod)
    others = [(complex(a), complex(*rng.normal(size=2))) for a in et]
    others += [(complex(*rng.normal(size=2)), complex(b)) for b in es]
    others = [p for p in others if all(_dist(p, q) > 1e-3 for q in prod)]
    ok = ok and not any(_singular(A, B, p, tol) for p in others)
    got = joint_spectrum_finite(A, B, tol)
    return ok and hausdorff(got, dedup(prod)) <= 1e-8


def reducing_suite(seed: int, count: int = 50, tol: float = RANK_TOL) -> dict:
    rng = np.random.default_rng(seed)
    out = {}
    for name, fn in (("block_union", block_property), ("conjugation", conjugation_property),
                     ("tensor_product", tensor_property)):
        good = sum(fn(rng, tol) for _ in range(count))
        out[name] = {"passed": good, "total": count}
    out["passed"] = all(v["passed"] == count for v in out.values() if isinstance(v, dict))
    return out


def zero_block_triple(u1=(1.0, 1j), u2=(-1.0, -1j)) -> BclTriple:
    """Block-diagonal Zero-class triple U = diag(u1) (+) diag(u2), P onto the first block."""
    d1, d2 = len(u1), len(u2)
    U = np.diag(np.array(list(u1) + list(u2), dtype=complex))
    P = np.diag([1.0] * d1 + [0.0] * d2).astype(complex)
    return bcl.finite_triple(U, P, "zero-block")


def swap_triple() -> BclTriple:
    U = np.array([[0, 1], [1, 0]], dtype=complex)
    P = np.diag([1.0, 0.0]).astype(complex)
    return bcl.finite_triple(U, P, "swap")
