"""``qhl`` command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error, 3 unsupported fragment.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import cases, sem
from .assertions import (NotDecisive, Satisfied, UnsupportedFragment, entails,
                         probability_of, satisfies)
from .lang.analysis import FORALL_WINDOW
from .lang.lexer import ParseError
from .lang.parser import parse_assertion, parse_formula, parse_program_file

OK, FAIL, USAGE, UNSUPPORTED = 0, 1, 2, 3


class UsageError(Exception):
    pass


def locate(path: str) -> str:
    """Resolve ``path``, falling back to the bundled case-study files."""
    if os.path.exists(path):
        return path
    bundled = cases.data_path(path)
    if os.path.exists(bundled):
        return bundled
    raise UsageError(f"no such file: {path}")


def _range(text: str) -> tuple:
    try:
        lo, hi = text.split("..")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError("expected lo..hi") from None
    if lo > hi:
        raise argparse.ArgumentTypeError("empty range")
    return lo, hi


def _assignment(text: str) -> tuple:
    name, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected name=value")
    try:
        return name.strip(), int(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{val!r} is not an integer") from None


def config(args) -> sem.EvalConfig:
    return sem.EvalConfig(loop_tol=args.tol, max_iter=args.max_iter, mode=args.mode, seed=args.seed,
                          forall_window=args.forall_range)


def emit(args, payload: dict, text: str):
    if args.json:
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


# ---------------------------------------------------------------- run / check


def _state_text(amps, layout, cutoff=1e-9, limit=8) -> str:
    n = len(layout)
    idx = [i for i in np.argsort(-np.abs(amps)) if abs(amps[i]) > cutoff][:limit]
    terms = []
    for i in sorted(idx):
        a = complex(amps[i])
        coef = f"{a.real:.4g}" if abs(a.imag) < 1e-12 else f"({a.real:.4g}{a.imag:+.4g}j)"
        terms.append(f"{coef}|{format(int(i), f'0{n}b')}>")
    more = " + ..." if np.count_nonzero(np.abs(amps) > cutoff) > limit else ""
    return " + ".join(terms) + more


def _execute(args):
    program = parse_program_file(locate(args.program))
    cfg = config(args)
    return program, sem.run_program(program, cfg, dict(args.set or ())), cfg


def run_summary(program, res) -> str:
    mu = res.povd
    lines = [f"layout: {' '.join(mu.layout)}",
             f"{len(mu.branches)} branch{'es' if len(mu.branches) != 1 else ''}, mass {mu.mass():.12g}, "
             f"residual {res.residual:.3g}, iterations {res.iterations}"]
    for b in mu.branches:
        lines.append(f"  {str(b.sigma):<40} weight {b.weight:.12g}   {_state_text(b.amps, mu.layout)}")
    lines += [f"warning: {w}" for w in res.warnings]
    return "\n".join(lines)


def cmd_run(args) -> int:
    program, res, _ = _execute(args)
    emit(args, sem.report(res), run_summary(program, res))
    return OK


def cmd_check(args) -> int:
    if not args.assertion and not args.prob:
        raise UsageError("check needs --assert or --prob")
    program, res, cfg = _execute(args)
    out, lines, code = {"schema": 1}, [], OK
    if args.assertion:
        v = satisfies(res.povd, parse_assertion(args.assertion), cfg)
        name = type(v).__name__
        out["verdict"] = name
        out["reason"] = getattr(v, "reason", "")
        lines.append(name + (f": {v.reason}" if getattr(v, "reason", "") else ""))
        if isinstance(v, Satisfied):
            out["weights"] = list(v.weights)
            out["approximate"] = v.approximate
        else:
            code = FAIL
    if args.prob:
        p = probability_of(res.povd, parse_formula(args.prob), cfg)
        if isinstance(p, NotDecisive):
            out["probability"] = None
            out["probability_note"] = "NotDecisive: " + p.reason
            lines.append(f"probability: NotDecisive ({p.reason})")
            code = FAIL
        else:
            out["probability"] = p
            lines.append(f"{p:.12g}")
    emit(args, out, "\n".join(lines))
    return code


# ---------------------------------------------------------------- prove / entail / fuzz


def cmd_prove(args) -> int:
    from .lang.proofs import Triple, parse_proof_file
    from .prover import check_outline, validate_triple

    program = parse_program_file(locate(args.program)) if args.program else None
    script = parse_proof_file(locate(args.proof), program)
    program = program or script.program
    cfg = config(args)
    report = check_outline(script, program, cfg)
    out = report.to_json()
    lines = [f"{script.kind} with {report.steps or script.root.size()} steps: {report.overall}"]
    for n in report.failures():
        lines.append(f"  [{n.rule}] {n.status} at {n.path}" + (f" (line {n.line})" if n.line else "")
                     + f": {n.detail}")
    for e in report.errors:
        lines.append(f"  error: {e}")
    for c in report.conditional:
        lines.append(f"  conditional ({c.kind}) at {c.path}: {c.reason}")
    valid = True
    if args.validate:
        root = script.root.conclusion
        if not isinstance(root, Triple):
            raise UsageError("--validate needs a proof whose conclusion is a triple")
        v = validate_triple(root, args.validate, program, cfg, args.seed)
        out["validation"] = v.to_json()
        lines.append(f"validation: {v.satisfied} satisfied, {v.not_proven} not proven, {v.refuted} refuted"
                     + (f", unsupported: {v.unsupported}" if v.unsupported else ""))
        if v.unsupported and not v.refuted:
            emit(args, out, "\n".join(lines))
            return UNSUPPORTED
        valid = v.refuted == 0
    emit(args, out, "\n".join(lines))
    overall = report.overall
    if overall == "ok" or (overall == "conditional" and args.allow_conditional):
        return OK if valid else FAIL
    return FAIL


def cmd_entail(args) -> int:
    lhs, rhs = parse_assertion(args.lhs), parse_assertion(args.rhs)
    r = entails(lhs, rhs, config(args))
    if r:
        out = {"schema": 1, "result": "proven", "rules": list(r.rules), "approximate": r.approximate,
               "relaxations": list(r.relaxations)}
        text = "proven" + (f" by {', '.join(r.rules)}" if r.rules else "") + (
            " (classical part checked over a bounded window)" if r.approximate else "")
    else:
        status = "refuted" if r.refuted else "unknown"
        out = {"schema": 1, "result": status, "reason": r.reason, "rules": list(r.rules)}
        text = f"{status}: {r.reason}"
    emit(args, out, text)
    return OK if r else FAIL


def cmd_fuzz(args) -> int:
    from .harness import fuzz_soundness

    paths = [locate(p) for p in (args.paths or ["corpus"])]
    summary = fuzz_soundness(paths, args.trials, config(args), args.seed)
    emit(args, summary.to_json(), summary.table() + f"\nrefuted (genuine): {summary.refuted}, "
         f"refuted (mutants): {summary.mutant_refuted}, ok: {summary.ok}")
    return OK if summary.ok else FAIL


# ---------------------------------------------------------------- builders


def _matrix_arg(text: str) -> np.ndarray:
    try:
        return np.array([[complex(x) for x in row.replace(",", " ").split()] for row in text.split(";")])
    except ValueError:
        raise argparse.ArgumentTypeError("expected rows separated by ';'") from None


def _vector_arg(text: str) -> np.ndarray:
    try:
        v = np.array([complex(x) for x in text.replace(",", " ").split()])
    except ValueError:
        raise argparse.ArgumentTypeError("expected a comma-separated vector") from None
    return v / np.linalg.norm(v)


def _write(directory: str, files: dict) -> list[str]:
    os.makedirs(directory, exist_ok=True)
    out = []
    for name, text in files.items():
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(text)
        out.append(path)
    return out


def cmd_build_hhl(args) -> int:
    kw = {"n": args.n, "t_evo": args.t_evo, "C": args.C}
    if args.A is not None:
        kw["A"] = args.A
        kw["m"] = int(round(np.log2(len(args.A))))
    if args.b is not None:
        kw["b"] = args.b
    inst = cases.HHLInstance(**kw)
    try:
        text, _, warnings = cases.build_hhl(inst)
    except cases.BuildError as exc:
        raise UsageError(str(exc)) from None
    out = {"schema": 1, "program": text, "warnings": warnings, "phases": inst.phases().tolist(),
           "solution": [[z.real, z.imag] for z in inst.solution()]}
    if args.out:
        out["files"] = _write(args.out, {"hhl.qimp": text, "hhl.qhl": cases.hhl_outline(inst),
                                         "hhl_body.qhl": cases.hhl_body_outline(inst)})
    emit(args, out, text + "".join(f"# warning: {w}\n" for w in warnings)
         + "".join(f"# wrote {p}\n" for p in out.get("files", [])))
    return OK


def cmd_build_of(args) -> int:
    inst = cases.OFInstance(N=args.N, x=args.x, t=args.t, L=args.L)
    try:
        text, _ = cases.build_of(inst)
    except cases.BuildError as exc:
        raise UsageError(str(exc)) from None
    out = {"schema": 1, "program": text, "t": inst.t, "L": inst.L}
    if args.out:
        out["files"] = _write(args.out, {"of.qimp": text})
    emit(args, out, text + "".join(f"# wrote {p}\n" for p in out.get("files", [])))
    return OK


# ---------------------------------------------------------------- argument parsing


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    S = argparse.SUPPRESS
    p.add_argument("--tol", type=float, default=S, help="loop termination mass (default 1e-9)")
    p.add_argument("--max-iter", type=int, default=S, help="loop iteration cap (default 10000)")
    p.add_argument("--mode", choices=["exhaustive", "sample"], default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--json", action="store_true", default=S)
    p.add_argument("--forall-range", type=_range, default=S, metavar="LO..HI",
                   help="window for bounded quantifiers (default -64..64)")
    return p


DEFAULTS = {"tol": 1e-9, "max_iter": 10000, "mode": "exhaustive", "seed": 0, "json": False,
            "forall_range": FORALL_WINDOW}


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="qhl", parents=[common],
                                 description="Quantum programs with classical variables: run, assert, prove.")
    sub = ap.add_subparsers(dest="command", required=True)

    for name, helptext in (("run", "evaluate a program"), ("check", "evaluate a program and test an assertion")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("program")
        s.add_argument("--set", type=_assignment, action="append", metavar="NAME=VALUE",
                       help="override a classical initial value")
        if name == "check":
            s.add_argument("--assert", dest="assertion", metavar="D")
            s.add_argument("--prob", metavar="F")

    s = sub.add_parser("prove", parents=[common], help="check a proof outline or derivation tree")
    s.add_argument("proof")
    s.add_argument("--program")
    s.add_argument("--validate", type=int, metavar="TRIALS")
    s.add_argument("--allow-conditional", action="store_true")

    s = sub.add_parser("entail", parents=[common], help="decide D1 |- D2")
    s.add_argument("lhs")
    s.add_argument("rhs")

    s = sub.add_parser("fuzz", parents=[common], help="empirical soundness check of a proof corpus")
    s.add_argument("paths", nargs="*")
    s.add_argument("--trials", type=int, default=100)

    s = sub.add_parser("build-hhl", parents=[common], help="emit the linear-systems program at an instance")
    s.add_argument("--n", type=int, default=2)
    s.add_argument("--A", type=_matrix_arg, help="rows separated by ';', e.g. '0.25 0; 0 0.5'")
    s.add_argument("--b", type=_vector_arg, help="right-hand side, normalised on input")
    s.add_argument("--t-evo", type=float, default=2 * np.pi)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--out", metavar="DIR", help="write program and proof outlines here")

    s = sub.add_parser("build-of", parents=[common], help="emit the order-finding program at an instance")
    s.add_argument("--N", type=int, default=15)
    s.add_argument("--x", type=int, default=7)
    s.add_argument("--t", type=int, default=4)
    s.add_argument("--L", type=int)
    s.add_argument("--out", metavar="DIR")
    return ap


COMMANDS = {"run": cmd_run, "check": cmd_check, "prove": cmd_prove, "entail": cmd_entail, "fuzz": cmd_fuzz,
            "build-hhl": cmd_build_hhl, "build-of": cmd_build_of}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    for k, v in DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ParseError) as exc:
        print(f"qhl: {exc}", file=sys.stderr)
        return USAGE
    except UnsupportedFragment as exc:
        print(f"qhl: unsupported: {exc}", file=sys.stderr)
        return UNSUPPORTED
    except (sem.SemanticsError, ValueError) as exc:
        print(f"qhl: error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
