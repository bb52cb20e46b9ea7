"""isopair command line.

Every report is deterministic JSON (sorted keys, complex numbers as
[re, im]) carrying the format version, the run configuration and the
subject's provenance.  Exit codes: 0 ok, 1 usage error, 2 failed or
uncertified.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import bcl, defect, koszul, models
from .defect import FORMAT_VERSION

DEFAULT_SEED = 0xC0FFEE
IDENTITY_TOL = 1e-12
EXACT_TOL = 1e-13

SUITES = ("identities", "ladders", "intertwiners", "koszul-oracle", "stage2-neg", "embedding")
SUITE_GRADES = {"identities": 8, "ladders": 4, "intertwiners": 8, "koszul-oracle": None,
                "stage2-neg": 40, "embedding": 4}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    subject: str | None = None
    grade: int | None = None
    zgrid: str = "12x12"
    lgrid: str = "24x24"
    tol_rank: float = koszul.RANK_TOL
    tol_residual: float = koszul.RESIDUAL_TOL
    tol_dedup: float = koszul.DEDUP
    seed: int = DEFAULT_SEED
    count: int | None = None
    extra: dict = field(default_factory=dict)
    format_version: str = FORMAT_VERSION

    def validate(self) -> None:
        for name in ("tol_rank", "tol_residual", "tol_dedup"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.grade is not None and self.grade < 1:
            raise UsageError("grade must be at least 1")


def _default(o):
    if isinstance(o, complex | np.complexfloating):
        return [float(o.real), float(o.imag)]
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (set, frozenset, tuple)):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, default=_default, sort_keys=True, indent=2) + "\n"


def _envelope(cfg: RunConfig, provenance: str | None, body: dict) -> dict:
    return {"format_version": FORMAT_VERSION, "config": asdict(cfg), "provenance": provenance, **body}


# --------------------------------------------------------------------------
# subjects

def _subject(args) -> models.ModelPair:
    if args.model and args.triple:
        raise UsageError("give --model or --triple, not both")
    try:
        if args.model:
            return models.resolve(args.model)
        if args.triple:
            t = bcl.load_triple(args.triple)
            pair = models.triple_pair(t)
            pair.name = args.triple
            return pair
    except (models.UnknownModel, bcl.InvalidTriple, ValueError, OSError, KeyError) as e:
        raise UsageError(str(e)) from e
    raise UsageError("a subject is required: --model or --triple")


def _grade(args, default: int | None) -> int | None:
    return args.grade if args.grade is not None else default


def _cfg(args, command: str, subject: str | None = None, grade: int | None = None, **extra) -> RunConfig:
    cfg = RunConfig(command, subject, grade, getattr(args, "zgrid", "12x12"), getattr(args, "lgrid", "24x24"),
                    args.tol_rank, args.tol_residual, koszul.DEDUP, args.seed, getattr(args, "count", None),
                    extra)
    cfg.validate()
    return cfg


# --------------------------------------------------------------------------
# commands

def cmd_classify(args):
    pair = _subject(args)
    N = _grade(args, 8)
    cfg = _cfg(args, "classify", pair.name, N)
    rep = defect.defect_window_matrix(pair.V1, pair.V2, pair.scheme, N)
    body = {"model": pair.name, "declared_class": pair.declared_class, **rep.to_json()}
    return _envelope(cfg, pair.provenance, body), 0 if rep.cls.support_certified else 2


def cmd_defect(args):
    pair = _subject(args)
    N = _grade(args, 8)
    cfg = _cfg(args, "defect", pair.name, N)
    rep = defect.defect_window_matrix(pair.V1, pair.V2, pair.scheme, N)
    agr = defect.defect_agreement(pair, N)
    entries = [{"row": pair.scheme.label(rep.window[i]), "col": pair.scheme.label(rep.window[j]),
                "value": complex(rep.matrix[i, j])}
               for i, j in zip(*np.nonzero(np.abs(rep.matrix) > EXACT_TOL))]
    ok = rep.cls.support_certified and agr.stabilized and agr.max_deviation <= IDENTITY_TOL
    body = {"model": pair.name, "defect": rep.to_json(), "nonzero_entries": entries,
            "agreement": agr.to_json()}
    return _envelope(cfg, pair.provenance, body), 0 if ok else 2


def cmd_wold(args):
    pair = _subject(args)
    N = _grade(args, 8)
    cfg = _cfg(args, "wold", pair.name, N, which=args.which)
    op = {"1": pair.V1, "2": pair.V2, "product": pair.V1 @ pair.V2}[args.which]
    rep = defect.wold(op, pair.scheme, N)
    return _envelope(cfg, pair.provenance, {"model": pair.name, "which": args.which, **rep.to_json()}), 0


def cmd_fringe(args):
    pair = _subject(args)
    N = _grade(args, 8)
    cfg = _cfg(args, "fringe", pair.name, N)
    F1, F2 = defect.fringe_matrices(pair.V1, pair.V2, pair.scheme, N)

    def desc(F):
        return {"shape": list(F.forward.shape), "isometry_deviation": F.isometry_deviation,
                "adjoint_isometry_deviation": F.coisometry_deviation, "zero": F.is_zero()}

    body = {"model": pair.name, "F1": desc(F1), "F2": desc(F2), "class": defect.fringe_class(F1, F2)}
    return _envelope(cfg, pair.provenance, body), 0


def cmd_sarkar(args):
    pair = _subject(args)
    N = _grade(args, 8)
    cfg = _cfg(args, "sarkar", pair.name, N)
    try:
        t = bcl.sarkar_triple(pair.V1, pair.V2, pair.scheme, N)
    except bcl.WindowTooSmall as e:
        known = bcl.triple_to_json(pair.triple) if pair.triple is not None else None
        body = {"model": pair.name, "error": str(e), "known_triple": known}
        return _envelope(cfg, pair.provenance, body), 2
    body = {"model": pair.name, "triple": bcl.triple_to_json(t), "class": bcl.classify(t).to_json()}
    return _envelope(cfg, pair.provenance, body), 0


def cmd_intertwine(args):
    N = _grade(args, 8)
    pairs = [_subject(args)] if (args.model or args.triple) else models.shipped_models()
    cfg = _cfg(args, "intertwine-check", ",".join(p.name for p in pairs), N)
    reps = [models.intertwiner_report(p, N) for p in pairs]
    ok = all(max(r["gram_deviation"], r["coisometry_deviation"], r["intertwining_V1"],
                 r["intertwining_V2"]) <= EXACT_TOL for r in reps)
    prov = {p.name: p.provenance for p in pairs}
    return _envelope(cfg, prov, {"reports": reps, "passed": ok}), 0 if ok else 2


def cmd_scan(args):
    if args.model in koszul._INFINITE and not args.triple:
        subject, prov, name = args.model, models.resolve(args.model).provenance, args.model
    else:
        pair = _subject(args)
        subject, prov, name = pair, pair.provenance, pair.name
    cfg = _cfg(args, "scan", name)
    try:
        res = koszul.scan(subject, args.zgrid, args.lgrid, args.tol_rank, args.tol_residual)
    except ValueError as e:
        raise UsageError(str(e)) from e
    code = 0 if res.passed else 2
    if args.csv:
        return "\n".join(res.csv_lines()) + "\n", code, _envelope(cfg, prov, {"summary": res.summary})
    body = {"summary": res.summary, "samples": [s.to_json() for s in res.samples]}
    return _envelope(cfg, prov, body), code


# --------------------------------------------------------------------------
# verification suites

def _assert(name, passed, deviation=None, /, **details):
    return {"name": name, "passed": bool(passed), "deviation": deviation, "details": details}


def _random_triples(rng, count, kinds=("zero", "offdiag", "mixed"), max_dim=8):
    out = []
    for i in range(count):
        kind = kinds[i % len(kinds)]
        d = int(rng.integers(1, max_dim + 1))
        if kind == "offdiag":
            d = max(2, d - d % 2)
        if kind == "mixed":
            d = max(2, d)
        out.append(bcl.random_triple(d, rng, kind))
    return out


def suite_identities(N, seed, count):
    items = []
    rng = np.random.default_rng(seed)
    subjects = models.shipped_models() + [models.triple_pair(t) for t in _random_triples(rng, count)]
    for k, p in enumerate(subjects):
        a = defect.defect_agreement(p, N)
        ok = a.max_deviation <= IDENTITY_TOL and a.stabilized and a.support_certified
        items.append(_assert(f"{p.name}#{k}", ok, a.max_deviation, **a.to_json()))
    return items


def suite_ladders(N, seed, count):
    items = []
    rng = np.random.default_rng(seed)
    subjects = models.shipped_models()
    for kind in ("zero", "offdiag", "mixed"):
        subjects += [models.triple_pair(t) for t in _random_triples(rng, count, (kind,))]
    for k, p in enumerate(subjects):
        rep = defect.equivalence_suite(p.V1, p.V2, p.scheme, N, p.triple)
        items.append(_assert(f"{p.name}#{k}", rep.consistent, None, detected=rep.detected,
                             offending=rep.offending))
    return items


def suite_intertwiners(N, seed, count):
    items = []
    for p in models.shipped_models():
        r = models.intertwiner_report(p, N)
        dev = max(r["gram_deviation"], r["coisometry_deviation"], r["intertwining_V1"], r["intertwining_V2"])
        items.append(_assert(p.name, dev <= EXACT_TOL, dev, **r))
    return items


def suite_koszul(N, seed, count):
    o = koszul.oracle_suite(seed, count)
    r = koszul.reducing_suite(seed + 1, 50)
    return [_assert("oracle_agreement", o["passed"], None, **o),
            _assert("reducing_properties", r["passed"], None, **r)]


def suite_stage2(N, seed, count, l1=0.3, l2=0.5j, m=20):
    rep = koszul.stage2_certificate_neg(l1, l2, N, m)
    return [_assert("stage2_pairings", rep.passed, max(map(abs, rep.pairings)), **rep.to_json())]


def suite_embedding(N, seed, count):
    r = models.embedding_report(N)
    dev = max(r["gram_deviation"], r["compression_deviation_1"], r["compression_deviation_2"])
    return [_assert("sign_flip_embedding", dev <= EXACT_TOL, dev, **r)]


def cmd_verify(args):
    suite = args.suite
    N = _grade(args, SUITE_GRADES[suite])
    count = args.count if args.count is not None else {"koszul-oracle": 200}.get(suite, 50)
    cfg = _cfg(args, "verify", suite, N, l1=args.l1, l2=args.l2)
    if suite == "stage2-neg":
        items = suite_stage2(N, args.seed, count, models.parse_complex(args.l1),
                             models.parse_complex(args.l2), args.generators)
    else:
        fn = {"identities": suite_identities, "ladders": suite_ladders, "intertwiners": suite_intertwiners,
              "koszul-oracle": suite_koszul, "embedding": suite_embedding}[suite]
        items = fn(N, args.seed, count)
    ok = all(i["passed"] for i in items)
    body = {"suite": suite, "passed": ok, "total": len(items), "failed": sum(not i["passed"] for i in items),
            "assertions": items}
    return _envelope(cfg, "verification suite over shipped models and seeded random subjects", body), \
        0 if ok else 2


# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grade", type=int, help="window grade N")
    common.add_argument("--tol-rank", type=float, default=koszul.RANK_TOL)
    common.add_argument("--tol-residual", type=float, default=koszul.RESIDUAL_TOL)
    common.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED)
    common.add_argument("--out", help="write the report here instead of stdout")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="JSON output (default)")
    fmt.add_argument("--csv", action="store_true", help="CSV sample rows (scan only)")

    subj = argparse.ArgumentParser(add_help=False)
    subj.add_argument("--model", help="pos, neg, psi, eta, zero:W, zero_twisted:W, offdiag:W, "
                                      "tensor:<model>:<d>, sum:<a>:<b>")
    subj.add_argument("--triple", help="triple JSON file or lazy preset name")

    p = _Parser(prog="isopair", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, fn, helptext in (("classify", cmd_classify, "defect class of a model or triple"),
                               ("defect", cmd_defect, "defect matrix and the three-way identity check"),
                               ("fringe", cmd_fringe, "fringe operators on kernel windows"),
                               ("sarkar", cmd_sarkar, "extract a finite triple from a pair")):
        s = sub.add_parser(name, parents=[common, subj], help=helptext)
        s.set_defaults(fn=fn)
    s = sub.add_parser("wold", parents=[common, subj], help="Wold decomposition on a window")
    s.add_argument("--which", choices=("1", "2", "product"), default="product")
    s.set_defaults(fn=cmd_wold)
    s = sub.add_parser("intertwine-check", parents=[common, subj], help="unitarity and intertwining")
    s.set_defaults(fn=cmd_intertwine)
    s = sub.add_parser("scan", parents=[common, subj], help="Koszul spectrum scan over a grid")
    s.add_argument("--zgrid", default="12x12", help="radii x angles of the z grid")
    s.add_argument("--lgrid", default="24x24", help="lambda1 x lambda2 points for certificate scans")
    s.add_argument("--summary", help="also write the summary JSON here (with --csv)")
    s.set_defaults(fn=cmd_scan)
    s = sub.add_parser("verify", parents=[common], help="run a verification suite")
    s.add_argument("suite", choices=SUITES)
    s.add_argument("--count", type=int, help="number of random subjects")
    s.add_argument("--l1", default="0.3")
    s.add_argument("--l2", default="0.5i")
    s.add_argument("--generators", type=int, default=20, help="stage2-neg: generators g_0..g_M")
    s.set_defaults(fn=cmd_verify)
    return p


def _write(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.csv and args.command != "scan":
            raise UsageError("--csv applies to scan only")
        out = args.fn(args)
    except UsageError as e:
        print(f"isopair: error: {e}", file=sys.stderr)
        return 1
    except (bcl.InvalidTriple, models.UnknownModel) as e:
        print(f"isopair: error: {e}", file=sys.stderr)
        return 1
    if len(out) == 3:
        text, code, summary = out
        _write(text, args.out)
        if getattr(args, "summary", None):
            _write(dumps(summary), args.summary)
    else:
        report, code = out
        _write(dumps(report), args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
