"""Command line front end: analyze | mfun | karamata | eigs | catalog."""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import catalog as K
from . import classify as C
from . import eigensolver as E
from . import karamata as KA
from . import report as R
from . import weyl
from .coeffs import (DivergenceError, NoBracketError, ParseError, _Lexer, _parse_expr, integrability, load_problem,
                     side_profile)

log = logging.getLogger("polarsl")

REGIMES = {"zero-plus": "zero_plus", "zero-minus": "zero_minus", "plus-inf": "plus_infinity",
           "minus-inf": "minus_infinity"}
TESTS = ("slowly-varying", "positively-increasing", "rv-index", "representation", "equivalence")


class UsageError(Exception):
    pass


def _add_common(p, problem=True):
    if problem:
        src = p.add_mutually_exclusive_group()
        src.add_argument("--problem", metavar="FILE", help="problem definition file")
        src.add_argument("--catalog", metavar="NAME", help="built-in problem (see the catalog subcommand)")
        p.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                       help="parameter override for $NAME in problem files or catalog factories")
        for flag in ("alpha-plus", "alpha-minus", "b-plus", "b-minus", "alpha", "beta"):
            p.add_argument(f"--{flag}", type=float, default=None)
    p.add_argument("--out", metavar="PATH", help="output file (stdout when omitted)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--tol", type=float, default=None, help="integrator relative tolerance (default 1e-9; eigs 1e-11)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent evaluations")
    p.add_argument("--strict", action="store_true", help="exit 3 when any verdict is inconclusive")


def build_parser():
    ap = argparse.ArgumentParser(prog="polarsl", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    a = sub.add_parser("analyze", help="full classification report")
    _add_common(a)
    a.add_argument("--verify", action="store_true", help="also run the numeric D-ratio at infinity")
    a.add_argument("--y-min", type=float, default=1e2)
    a.add_argument("--y-max", type=float, default=1e6)
    a.add_argument("--points", type=int, default=17)

    m = sub.add_parser("mfun", help="m-function trace along the imaginary axis (CSV)")
    _add_common(m)
    m.add_argument("--side", choices=("+", "-", "both"), default="+")
    m.add_argument("--y-min", type=float, default=1.0)
    m.add_argument("--y-max", type=float, default=1e6)
    m.add_argument("--points", type=int, default=13)

    k = sub.add_parser("karamata", help="one asymptotic test on a function")
    _add_common(k, problem=False)
    k.add_argument("--fn", required=True, help="catalog function name or expression such as 'x^0.5'")
    k.add_argument("--test", required=True, choices=TESTS)
    k.add_argument("--at", choices=tuple(REGIMES), default=None)
    k.add_argument("--gamma", type=float, default=1.0, help="gamma for rv-index")
    k.add_argument("--against", default=None, help="second function for the equivalence search")

    e = sub.add_parser("eigs", help="eigenvalues of the coupled problem in a window")
    _add_common(e)
    e.add_argument("--window", type=float, nargs=2, default=None, metavar=("LO", "HI"))
    e.add_argument("--count", type=int, default=None, help="keep at most this many smallest-|lam| values")
    e.add_argument("--oracle", action="store_true", help="add the finite-difference oracle column")
    e.add_argument("--fd-points", type=int, default=2000)
    e.add_argument("--panels", type=int, default=400)
    e.add_argument("--force-truncate", action="store_true", help="truncate singular endpoints with a Neumann cap")

    c = sub.add_parser("catalog", help="list built-in problems and functions")
    c.add_argument("--show", metavar="NAME", default=None, help="print the known verdict table of one problem")
    c.add_argument("--format", choices=("json", "csv"), default="csv")
    c.add_argument("--out", default=None)
    return ap


# ------------------------------------------------------------ helpers

def _params(args):
    out = {}
    for item in args.param:
        if "=" not in item:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    for flag in ("alpha_plus", "alpha_minus", "b_plus", "b_minus", "alpha", "beta"):
        v = getattr(args, flag, None)
        if v is not None:
            out[flag] = v
    return out


def _problem(args):
    params = _params(args)
    if args.catalog:
        entry = K.PROBLEMS.get(args.catalog)
        if entry is None:
            raise UsageError(f"unknown catalog problem {args.catalog!r}")
        allowed = set(entry.defaults)
        extra = set(params) - allowed
        if extra:
            raise UsageError(f"{args.catalog} takes no parameter(s) {sorted(extra)}")
        return entry.problem(**params), entry
    if args.problem:
        return load_problem(args.problem, params), None
    raise UsageError("give --problem FILE or --catalog NAME")


def _emit(args, text, default_name=None):
    if args.out:
        R.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)


def _sidecar_dir(args):
    return Path(args.out).parent if args.out else None


def _map(args, fn, items):
    if getattr(args, "threads", 1) and args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


# ------------------------------------------------------------ subcommands

def run_analyze(args):
    problem, _ = _problem(args)
    icfg = weyl.IntegratorConfig() if args.tol is None else replace(weyl.IntegratorConfig(), rtol=args.tol)
    cfg = C.ClassifyConfig(y_lo=args.y_min, y_hi=args.y_max, points=args.points, verify=args.verify,
                           integrator=icfg)
    stem = Path(args.out).stem if args.out else "report"
    rep, sidecars = R.build_report(problem, cfg, stem=stem)
    if args.format == "csv":
        _emit(args, R.csv_text(("item", "status", "route"), R.verdict_rows(rep)))
    else:
        _emit(args, R.dumps(rep))
    side_dir = _sidecar_dir(args)
    if side_dir is not None:
        for name, text in sorted(sidecars.items()):
            R.atomic_write(side_dir / name, text)
    if args.strict and "inconclusive" in R.statuses(rep):
        return 3
    return 0


MFUN_HEADER = ("side", "y", "re_m", "im_m", "abs_m", "drift", "disk_radius", "converged", "atkinson_im",
               "im_ratio", "error")


def run_mfun(args):
    if not (args.y_min > 0 and args.y_max >= args.y_min):
        raise UsageError("need 0 < y-min <= y-max")
    if args.points < 1:
        raise UsageError("need at least one point")
    problem, _ = _problem(args)
    icfg = weyl.IntegratorConfig() if args.tol is None else replace(weyl.IntegratorConfig(), rtol=args.tol)
    ys = np.geomspace(args.y_min, args.y_max, args.points) if args.points > 1 else np.array([args.y_min])
    sides = ("+", "-") if args.side == "both" else (args.side,)
    traces = _map(args, lambda s: weyl.m_trace(problem, s, ys, icfg), sides)
    rows = []
    for s, tr in zip(sides, traces):
        try:
            prof = side_profile(problem, s)
        except NoBracketError:
            prof = None
        for smp in tr.samples:
            pred = None
            if prof is not None:
                try:
                    pred = abs(weyl.atkinson_predict(prof, smp.y).imag)
                except (NoBracketError, DivergenceError, ValueError, OverflowError):
                    pred = None
            m = smp.m
            rows.append((s, smp.y, m.real, m.imag, abs(m), smp.wronskian_drift, smp.disk_radius, smp.converged,
                         pred, (m.imag / pred) if pred else None, smp.error or ""))
    if args.format == "json":
        _emit(args, R.dumps({"columns": MFUN_HEADER, "rows": rows}))
    else:
        _emit(args, R.csv_text(MFUN_HEADER, rows))
    bad = sum(1 for r in rows if r[-1])
    return 3 if (args.strict and bad) else 0


def _function(name, regime):
    if name in K.FUNCTIONS:
        h = K.get_function(name)
        if isinstance(h, tuple):
            return h
        if regime is not None and h.regime != regime:
            if regime == "zero_minus" and h.regime == "zero_plus" or regime == "minus_infinity" and h.regime == "plus_infinity":
                return h
            raise UsageError(f"{name} lives at {h.regime}, not {regime}")
        return h
    regime = regime or "zero_plus"
    if regime not in ("zero_plus", "plus_infinity"):
        raise UsageError("expressions are tested at zero-plus or plus-inf")
    try:
        lx = _Lexer(name, 1, 1)
        expr = _parse_expr(lx, {}, "plus", "w", {})
    except ParseError as exc:
        raise UsageError(f"cannot parse {name!r}: {exc}") from exc
    return KA.Handle.from_expr(expr, regime=regime, name=name)


def run_karamata(args):
    regime = REGIMES.get(args.at) if args.at else None
    h = _function(args.fn, regime)
    rows = []
    if args.test == "equivalence":
        if isinstance(h, tuple):
            f, g = h
        else:
            if not args.against:
                raise UsageError("equivalence needs a pair function or --against")
            f, g = h, _function(args.against, regime)
        wit = KA.seq_equivalence_search(f, g, regime or f.regime)
        status = "holds" if wit is not None else "inconclusive"
        line = f"equivalence {args.fn}: {status}" + (f" ({wit.points.size} witness points)" if wit else "")
        if wit is not None:
            rows = list(zip(wit.points, wit.ratios))
        header = ("point", "ratio")
    else:
        if isinstance(h, tuple):
            raise UsageError(f"{args.fn} is a pair; use --test equivalence")
        if args.test == "slowly-varying":
            v = KA.is_slowly_varying(h, regime)
        elif args.test == "positively-increasing":
            try:
                v = KA.is_positively_increasing(h, regime)
            except KA.PreconditionError as exc:
                v = KA.TriVerdict("inconclusive", {}, None, str(exc))
        elif args.test == "representation":
            v = KA.karamata_rep_check(h, regime)
        else:
            est, v = KA.rv_index_estimate(h, args.gamma)
            v.note = (v.note + "; " if v.note else "") + f"index {est:.10g}"
        line = f"{args.test} {args.fn} at {h.regime}: {v.status}" + (f" ({v.note})" if v.note else "")
        ev = v.evidence
        x = ev.get("depth", ev.get("x"))
        cols = [(k, val) for k, val in ev.items() if isinstance(val, np.ndarray) and val.ndim == 1
                and x is not None and val.shape == np.shape(x) and k not in ("depth", "x")]
        header = ("depth",) + tuple(k for k, _ in cols)
        if x is not None:
            rows = [(x[i],) + tuple(val[i] for _, val in cols) for i in range(len(x))]
        status = v.status
    print(line)
    if args.out:
        R.atomic_write(args.out, R.csv_text(header, rows))
    return 3 if (args.strict and status == "inconclusive") else 0


def run_eigs(args):
    problem, entry = _problem(args)
    cfg = E.EigenConfig(panels=args.panels, force_truncate=args.force_truncate)
    if args.tol is not None:
        cfg = replace(cfg, rtol=args.tol)
    decoupled = entry.decoupled if entry is not None else None
    window = tuple(args.window) if args.window else ((-1.0, 300.0) if decoupled else (-300.0, 300.0))
    if not args.force_truncate:
        disc = C.discreteness(problem)
        sides = [problem.half(s) for s in "+-"] if not decoupled else [problem.half(decoupled)]
        singular = [h for h in sides if not all(integrability(h))]
        if singular and not disc.overall.holds:
            print("refusing: an endpoint is singular and the discreteness precheck is "
                  f"{disc.overall.status}; rerun with --force-truncate for a truncated approximation",
                  file=sys.stderr)
            return 2
        if singular:
            cfg = replace(cfg, force_truncate=True)
    if decoupled:
        rep = E.neumann_eigenvalues(problem, window, decoupled, cfg)
    else:
        rep = E.eigenvalues(problem, window, cfg)
    if args.count is not None:
        keep = sorted(rep.eigenvalues, key=lambda e: abs(e.lam))[: args.count]
        rep.eigenvalues = sorted(keep, key=lambda e: e.lam)
    if args.oracle:
        nz = [e for e in rep.eigenvalues if e.sign_class != "zero"]
        fd = E.fd_oracle(problem, args.fd_points, max(1, len(nz)), cfg,
                         lam_max=max(abs(window[0]), abs(window[1])))
        oracle = []
        for e in rep.eigenvalues:
            if e.sign_class == "zero":
                oracle.append(0.0 if fd.zero_in_kernel else None)
            else:
                near = min(fd.eigenvalues, key=lambda v: abs(v - e.lam), default=None)
                oracle.append(near)
        rep.oracle = oracle
    header = ("index", "lam", "residual", "sign_class", "oracle_lam", "oracle_diff")
    if args.format == "json":
        doc = {"window": rep.window, "counts": rep.counts, "approximate": rep.approximate,
               "warnings": rep.warnings, "kernel": rep.kernel.as_dict() if rep.kernel else None,
               "eigenvalues": [dict(zip(header, r)) | {"note": e.multiplicity_note, "krein_norm": e.krein_norm}
                               for r, e in zip(rep.rows(), rep.eigenvalues)]}
        _emit(args, R.dumps(doc))
    else:
        _emit(args, R.csv_text(header, rep.rows()))
    summary = f"{rep.counts['negative']} negative, {rep.counts['zero']} zero, {rep.counts['positive']} positive"
    if rep.counts['zero'] and rep.kernel is not None and rep.kernel.kernel_dim:
        summary += f"; at 0: {E._zero_note(rep.kernel)}"
    if rep.approximate:
        summary += "; truncated endpoint (approximation)"
    print(summary, file=sys.stderr)
    for w in rep.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def run_catalog(args):
    if args.show:
        entry = K.PROBLEMS.get(args.show)
        if entry is None:
            raise UsageError(f"unknown catalog problem {args.show!r}")
        doc = {"name": entry.name, "description": entry.description, "defaults": entry.defaults,
               "expected": entry.expected_for()}
        text = R.dumps(doc) if args.format == "json" else R.csv_text(("item", "value"), sorted(doc["expected"].items()))
    else:
        rows = [("problem", n, e.description, " ".join(f"{k}={v}" for k, v in e.defaults.items()))
                for n, e in sorted(K.PROBLEMS.items())]
        rows += [("function", n, d, "") for n, (_, d) in sorted(K.FUNCTIONS.items())]
        if args.format == "json":
            text = R.dumps([dict(zip(("kind", "name", "description", "defaults"), r)) for r in rows])
        else:
            text = R.csv_text(("kind", "name", "description", "defaults"), rows)
    if args.out:
        R.atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


COMMANDS = {"analyze": run_analyze, "mfun": run_mfun, "karamata": run_karamata, "eigs": run_eigs,
            "catalog": run_catalog}


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except UsageError as exc:
        ap.error(str(exc))
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (E.NotApplicable, weyl.NotApplicable) as exc:
        print(f"not applicable: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
