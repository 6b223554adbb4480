"""Command-line front end.

Exit codes: 0 when every check passes, 1 when a check fails (a JSON
witness is printed), 2 on flag errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import random
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

from . import fgl as fgl_mod
from . import projops, sncdiv, symop, taylor
from .ringcore import GeneratorSet, SparsePoly, TruncationBudget, poly_from_json, truncate

THREADS_ENV = "COBORD_OPS_THREADS"


class CheckFailed(Exception):
    def __init__(self, report):
        super().__init__("check failed")
        self.report = report


# input grammar ------------------------------------------------------------

_SYM = re.compile(r"^([A-Za-z][A-Za-z0-9_]*)(?:\^(\d+))?$")


def _symbol_spec(name: str):
    if re.fullmatch(r"b\d+", name):
        return (name, -int(name[1:]))
    if name == "beta":
        return (name, -1)
    return (name, 1)


def parse_poly(text: str, N: int = 0, extra: Sequence[str] = ()) -> SparsePoly:
    """Parse ``c*sym^e*... +/- ...``.  ``b<i>`` and ``beta`` are coefficient
    generators, every other symbol is a degree-1 series variable."""
    text = text.strip()
    if not text:
        raise ValueError("empty polynomial")
    terms = []
    pos = 0
    src = text.replace(" ", "")
    if src[0] not in "+-":
        src = "+" + src
    for m in re.finditer(r"([+-])([^+-]+)", src):
        if m.start() != pos:
            raise ValueError(f"cannot parse {text!r}")
        pos = m.end()
        sign = -1 if m.group(1) == "-" else 1
        coeff = Fraction(sign)
        mono: Dict[str, int] = {}
        for factor in m.group(2).split("*"):
            if re.fullmatch(r"\d+(/\d+)?", factor):
                coeff *= Fraction(factor)
                continue
            sm = _SYM.match(factor)
            if not sm:
                raise ValueError(f"bad factor {factor!r} in {text!r}")
            name, e = sm.group(1), int(sm.group(2) or 1)
            mono[name] = mono.get(name, 0) + e
        terms.append((mono, coeff))
    if pos != len(src):
        raise ValueError(f"cannot parse {text!r}")
    names = sorted({n for mono, _ in terms for n in mono} | set(extra))
    specs = [(f"b{i}", -i) for i in range(1, N + 1)]
    specs += [_symbol_spec(n) for n in names if not (re.fullmatch(r"b\d+", n) and int(n[1:]) <= N)]
    ring = GeneratorSet.of(*specs)
    out = ring.zero()
    for mono, c in terms:
        out = out + SparsePoly.monomial(ring, mono, c)
    return out


def load_input(args, N: int) -> SparsePoly:
    if getattr(args, "input_file", None):
        with open(args.input_file) as fh:
            data = json.load(fh)
        names = sorted({n for t in data for n in t["m"]})
        specs = [(f"b{i}", -i) for i in range(1, N + 1)]
        specs += [_symbol_spec(n) for n in names if n not in {s for s, _ in specs}]
        return poly_from_json(GeneratorSet.of(*specs), data)
    return parse_poly(args.input, N)


# output ---------------------------------------------------------------------

def _rows_of(report) -> List[dict]:
    if isinstance(report, dict) and isinstance(report.get("rows"), list):
        return report["rows"]
    if isinstance(report, dict):
        return [{"key": k, "value": json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v}
                for k, v in sorted(report.items())]
    return [{"value": report}]


def emit(report, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(report, sort_keys=True, indent=2) + "\n")
        return
    rows = _rows_of(report)
    cols: List[str] = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v)
                        for k, v in r.items()})
        out.write(buf.getvalue())
        return
    widths = {c: max(len(c), *(len(str(r.get(c, ""))) for r in rows)) for c in cols}
    out.write("  ".join(c.ljust(widths[c]) for c in cols) + "\n")
    for r in rows:
        out.write("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in cols) + "\n")


def _workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# fgl -----------------------------------------------------------------------

def _law_axioms(F: fgl_mod.FormalGroupLaw) -> dict:
    ring = F.ring.union(GeneratorSet.of("w"))
    x, y, w = ring.gens("x", "y", "w")
    b = TruncationBudget(F.D)
    Fx = F.F.lift(ring)
    unit = truncate(fgl_mod.formal_sum(F, x, ring.zero(), b).lift(ring) - x, b)
    comm = truncate(Fx - Fx.rename({"x": "y", "y": "x"}, ring=ring), b)
    left = fgl_mod.formal_sum(F, fgl_mod.formal_sum(F, x, y, b), w, b).lift(ring)
    right = fgl_mod.formal_sum(F, x, fgl_mod.formal_sum(F, y, w, b), b).lift(ring)
    assoc = truncate(left - right, b)
    return {"unit": unit.is_zero(), "commutativity": comm.is_zero(),
            "associativity": assoc.is_zero(), "integral": F.F.is_integral()}


def cmd_fgl_universal(args):
    N = args.gens if args.gens is not None else args.deg
    if N < args.deg:
        raise argparse.ArgumentTypeError("--gens must be >= --deg")
    F = fgl_mod.make_universal(N, args.deg)
    checks = _law_axioms(F)
    coeffs = {}
    for i in range(0, args.deg + 1):
        for j in range(0, args.deg + 1 - i):
            if i and j:
                v = F.coefficient(i, j)
                if v:
                    coeffs[(i, j)] = v
    rows = [{"i": i, "j": j, "coefficient": str(v)} for (i, j), v in sorted(coeffs.items())]
    report = {"fgl": "universal", "D": args.deg, "N": N, "F": F.F.to_json(),
              "checks": checks, "rows": rows, "passed": all(checks.values())}
    if not report["passed"]:
        raise CheckFailed(report)
    return report


def cmd_fgl_nseries(args):
    F = fgl_mod.law_by_name(args.law, args.deg, args.gens)
    ring = F.coefficient_ring.union(GeneratorSet.of("x"))
    s = fgl_mod.n_series(F, args.n, ring.gen("x"), TruncationBudget(args.deg))
    rows = []
    for k, part in sorted(s.split_by("x").items()):
        rows.append({"k": k, "coefficient": str(fgl_mod.strip_var(part, "x"))})
    return {"fgl": F.name, "D": args.deg, "n": args.n, "series": s.to_json(), "rows": rows, "passed": True}


# taylor --------------------------------------------------------------------

def cmd_taylor_check(args):
    rng = random.Random(args.seed)
    failures = []
    for n in range(args.count):
        if args.suite == "dte":
            f = taylor.random_polynomial_map(rng, rng.randint(0, 4))
            k = rng.randint(1, 4)
            xs = {i: rng.randint(-10, 10) for i in range(k)}
            lhs = f(sum(xs.values()))
            rhs = taylor.taylor_expand(f, xs)
            ok = lhs == rhs
            if not ok:
                failures.append({"instance": n, "map": f.label, "inputs": xs, "lhs": lhs, "rhs": rhs})
        else:
            f = taylor.random_polynomial_map(rng, rng.randint(0, 4), label="f")
            g = taylor.random_polynomial_map(rng, rng.randint(0, 4), label="g")
            k = rng.randint(1, 3)
            xs = {i: rng.randint(-6, 6) for i in range(k)}
            r = taylor.chain_rule_residual(f, g, xs.keys(), xs)
            if r != 0:
                failures.append({"instance": n, "f": f.label, "g": g.label, "inputs": xs, "residual": r})
    report = {"suite": args.suite, "seed": args.seed, "instances": args.count,
              "failures": len(failures), "passed": not failures}
    if failures:
        report["witness"] = failures[0]
        raise CheckFailed(report)
    return report


# ops -----------------------------------------------------------------------

def _parse_op(spec: str):
    if spec == "identity":
        return ("identity", None)
    m = re.fullmatch(r"(power|steenrod):(\d+)", spec)
    if not m:
        raise argparse.ArgumentTypeError(f"bad --op {spec!r}")
    return (m.group(1), int(m.group(2)))


def build_op(kind: str, p: Optional[int], law_name: str, D: int):
    """Transformation plus the budget it is checked at."""
    if kind == "steenrod":
        W = D
        law = fgl_mod.law_by_name(law_name, W + 1, W + 1) if law_name != "additive" \
            else fgl_mod.make_additive(D + 2)
        budget = symop.laurent_budget(D, W if law.coefficient_ring.names else None)
        return symop.steenrod_total(symop.SteenrodConfig(p), law, budget), law, budget
    law = fgl_mod.law_by_name(law_name, D + 1, D + 1)
    budget = TruncationBudget(D)
    if kind == "identity":
        return projops.identity(law), law, budget
    return projops.power(law, p), law, budget


def cmd_ops_check(args):
    kind, p = args.op
    if kind != "identity" and (p is None or p < 1):
        raise argparse.ArgumentTypeError("power/steenrod need a positive integer")
    if kind == "steenrod" and not symop._is_prime(p):
        raise argparse.ArgumentTypeError("steenrod:P needs P prime")
    G, law, budget = build_op(kind, p, args.law, args.deg)
    samples = projops.sample_series(law, args.deg, count=args.samples, seed=args.seed)
    rep = projops.check_axioms(G, budget, samples)
    report = {"op": args.op_text, "law": law.name, "D": args.deg, **rep.to_json()}
    if not rep.passed:
        raise CheckFailed(report)
    return report


# snc -----------------------------------------------------------------------

def _load_model_file(path: str):
    with open(path) as fh:
        return sncdiv.load_model(json.load(fh))


def _as_square(model):
    if isinstance(model, sncdiv.SquareData):
        return model
    n = len(model.components)
    inc = [[1 if i == j else 0 for j in range(n)] for i in range(n)]
    return sncdiv.SquareData.build(list(model.mult), inc, list(model.mult))


def cmd_snc_check(args):
    model = _load_model_file(args.model)
    D = args.deg
    budget = TruncationBudget(D)
    F = fgl_mod.law_by_name(args.law, D + 1, D + 1)
    target = model.target if isinstance(model, sncdiv.SquareData) else model
    rows = []
    if args.suite == "recombine":
        ring = target.ring(F)
        total = sncdiv.formal_multiple_sum(F, [(m, ring.gen(r)) for m, r in zip(target.mult, target.roots)],
                                           budget, ring)
        pushes = {}
        for conv in sncdiv.CONVENTIONS:
            parts = sncdiv.splitting_series(F, target, conv, budget)
            push = truncate(sncdiv.recombine(parts, target, ring), budget)
            pushes[conv] = push
            rows.append({"convention": conv, "faces": len(parts), "recombines": (push - total).is_zero()})
        rows.append({"convention": "independence", "faces": "",
                     "recombines": pushes[sncdiv.STANDARD] == pushes[sncdiv.CONCENTRATED]})
        ok = all(r["recombines"] for r in rows)
    elif args.suite == "mpeif":
        sq = _as_square(model)
        ring = sq.ring(F)
        rng = random.Random(args.seed)
        for trial in range(args.samples):
            x = {}
            for i, r in zip(sq.target.components, sq.target.roots):
                v = ring.one() * rng.randint(-3, 3)
                for rr in sq.target.roots:
                    v = v + ring.gen(rr) * rng.randint(-2, 2)
                for c in F.coefficient_ring.names[:1]:
                    v = v + ring.gen(c) * ring.gen(r) * rng.randint(-2, 2)
                x[i] = v
            for conv in sncdiv.CONVENTIONS:
                res = sncdiv.check_mpeif(sq, F, x, budget, conv)
                rows.append({"trial": trial, "convention": conv, "residual_zero": res.is_zero()})
        ok = all(r["residual_zero"] for r in rows)
    elif args.suite == "gtil":
        ring = target.ring(F)
        gamma = {n: ring.one() + ring.gen(target.root(n)) * (k + 1) for k, n in enumerate(target.components)}
        for G in (projops.identity(F), projops.power(F, 2)):
            g = sncdiv.gtil(G, gamma, target, budget)
            direct = projops.eval_transformation(
                G, sum((ring.gen(target.root(n)) * gamma[n] for n in target.components), ring.zero()), budget)
            r = GeneratorSet.union(g.ring, direct.ring)
            rows.append({"G": G.label, "matches_direct": truncate(g.lift(r) - direct.lift(r), budget).is_zero()})
        ok = all(r["matches_direct"] for r in rows)
    else:
        comps = list(target.components)
        mults = dict(zip(target.components, target.mult))
        add = fgl_mod.make_additive(D + 1)
        Gs = [projops.scaled(projops.identity(add), 3), projops.power(add, 2), projops.power(F, 2)]
        for G in Gs:
            ring = projops.series_ring(G.source, 1, [f"mu{n}" for n in comps])
            fg = ring.gen("z1") + ring.one() * 2
            for J1 in taylor.nonempty_subsets(tuple(comps)):
                if len(J1) > 2:
                    continue
                res = sncdiv.check_subcentral_identity(G, mults, fg, J1, TruncationBudget(min(D, 4)))
                rows.append({"G": G.label, "law": G.source.name, "J1": ",".join(sorted(J1)),
                             "residual_zero": res.is_zero()})
        ok = all(r["residual_zero"] for r in rows)
    report = {"suite": args.suite, "law": F.name, "D": D, "rows": rows, "passed": ok}
    if not ok:
        raise CheckFailed(report)
    return report


# symop ---------------------------------------------------------------------

def _parse_reps(text: Optional[str]):
    if not text:
        return ()
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --reps {text!r}")


def _config(args) -> symop.SteenrodConfig:
    try:
        return symop.SteenrodConfig(args.p, _parse_reps(args.reps))
    except symop.ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def cmd_symop_phi(args):
    cfg = _config(args)
    try:
        alpha = load_input(args, args.gens or args.deg)
    except (ValueError, OSError) as exc:
        raise argparse.ArgumentTypeError(f"bad input polynomial: {exc}")
    res = symop.symmetric_phi(cfg, alpha, args.deg)
    report = res.to_json()
    report["K"] = res.K
    report["passed"] = res.ok
    if res.failure is not None:
        report["witness"] = {"exponent": res.failure.exponent, "coefficient": str(res.failure.coefficient)}
    if not res.ok:
        raise CheckFailed(report)
    return report


DEFAULT_VERIFY_INPUTS = ("z1", "z1^2", "z1*z2", "2*b1*z1")


def _verify_one(payload):
    p, reps, text, D = payload
    cfg = symop.SteenrodConfig(p, reps)
    return symop.verify_phi(cfg, [parse_poly(text, D)], D).rows[0]


def cmd_symop_verify(args):
    cfg = _config(args)
    inputs = args.input or list(DEFAULT_VERIFY_INPUTS)
    for text in inputs:
        try:
            parse_poly(text, args.deg)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(f"bad input polynomial: {exc}")
    payloads = [(cfg.p, cfg.reps, text, args.deg) for text in inputs]
    workers = min(_workers(), len(payloads))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_verify_one, payloads))
    else:
        rows = [_verify_one(pl) for pl in payloads]
    passed = all(r["passed"] for r in rows)
    report = {"p": cfg.p, "reps": list(cfg.reps), "D": args.deg, "rows": rows, "passed": passed}
    if not passed:
        raise CheckFailed(report)
    return report


# parser --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "pretty"), default="json")

    parser = argparse.ArgumentParser(prog="cobord-ops", description=__doc__.splitlines()[0])
    groups = parser.add_subparsers(dest="group", required=True)

    g = groups.add_parser("fgl", help="formal group laws").add_subparsers(dest="action", required=True)
    p = g.add_parser("universal", parents=[common])
    p.add_argument("--deg", type=int, required=True)
    p.add_argument("--gens", type=int, default=None)
    p.set_defaults(func=cmd_fgl_universal)
    p = g.add_parser("nseries", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--law", choices=("universal", "additive", "mult"), default="universal")
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--gens", type=int, default=None)
    p.set_defaults(func=cmd_fgl_nseries)

    g = groups.add_parser("taylor", help="discrete calculus").add_subparsers(dest="action", required=True)
    p = g.add_parser("check", parents=[common])
    p.add_argument("--suite", choices=("dte", "chain"), required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(func=cmd_taylor_check)

    g = groups.add_parser("ops", help="transformation axioms").add_subparsers(dest="action", required=True)
    p = g.add_parser("check", parents=[common])
    p.add_argument("--op", dest="op_text", required=True)
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--law", choices=("universal", "additive", "mult"), default="universal")
    p.add_argument("--samples", type=int, default=12)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ops_check)

    g = groups.add_parser("snc", help="normal crossing calculus").add_subparsers(dest="action", required=True)
    p = g.add_parser("check", parents=[common])
    p.add_argument("--suite", choices=("recombine", "mpeif", "gtil", "subcentral"), required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--law", choices=("universal", "additive", "mult"), default="universal")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_snc_check)

    g = groups.add_parser("symop", help="Steenrod-type operations").add_subparsers(dest="action", required=True)
    p = g.add_parser("phi", parents=[common])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--reps", default=None)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--input-file")
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--gens", type=int, default=None)
    p.set_defaults(func=cmd_symop_phi)
    p = g.add_parser("verify", parents=[common])
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--reps", default=None)
    p.add_argument("--deg", type=int, default=4)
    p.add_argument("--input", action="append", default=None)
    p.set_defaults(func=cmd_symop_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "op_text", None) is not None:
            args.op = _parse_op(args.op_text)
        if getattr(args, "deg", 1) is not None and getattr(args, "deg", 1) < 1:
            raise argparse.ArgumentTypeError("--deg must be >= 1")
        report = args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog}: error: {exc}\n")
        return 2
    except CheckFailed as exc:
        emit(exc.report, "json")
        return 1
    emit(report, args.format)
    return 0


if __name__ == "__main__":
    sys.exit(main())
