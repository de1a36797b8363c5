"""Formula-directed state generation and empirical soundness fuzzing."""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .assertions import entail as E
from .assertions.sat import Satisfied, UnsupportedFragment, is_convex, satisfies
from .lang import ast as A
from .lang.analysis import classical_vars, eval_pure, is_pure
from .lang.printer import pretty
from .sem import Branch, CState, EvalConfig, Povd, canonical, coalesce

MAX_REJECT = 100_000
DEFAULT_RANGE = (-3, 3)


@dataclass
class GenSpec:
    formula: object
    layout: tuple
    ranges: dict = field(default_factory=dict)
    seed: int = 0
    count: int = 1
    cvars: tuple = ()  # extra classical variables to randomize
    default_range: tuple = DEFAULT_RANGE


def _dist(d):
    return d if isinstance(d, (A.Single, A.Weighted, A.Unweighted)) else A.Single(d)


class _Gen:
    def __init__(self, spec: GenSpec, cfg: EvalConfig, rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.rng = rng
        self.layout = tuple(spec.layout)

    def _range(self, x: str) -> tuple:
        return self.spec.ranges.get(x, self.spec.default_range)

    def literals(self, f, out_pures: list, out_kets: list):
        """Flatten a conjunctive formula, resolving disjunctions by a random choice."""
        if isinstance(f, A.Const):
            if not f.value:
                raise UnsupportedFragment("false has no non-empty models")
            return
        if is_pure(f):
            out_pures.append(f)
            return
        if isinstance(f, (A.And, A.Odot)):
            self.literals(f.left, out_pures, out_kets)
            self.literals(f.right, out_pures, out_kets)
            return
        if isinstance(f, A.Ket):
            out_kets.extend((l.qvars, l.vector()) for l in E._factors(f.expr))
            return
        if isinstance(f, A.Or):
            first, second = (f.left, f.right) if self.rng.random() < 0.5 else (f.right, f.left)
            try:
                self.literals(first, out_pures, out_kets)
            except UnsupportedFragment:
                self.literals(second, out_pures, out_kets)
            return
        raise UnsupportedFragment(f"no generator for {pretty(f)}")

    def sigma(self, pures) -> CState:
        env, consistent = E.determine(pures, self.cfg.forall_window)
        if not consistent:
            raise UnsupportedFragment("classical constraints are contradictory")
        free = sorted((set().union(set(), *[classical_vars(p) for p in pures]) | set(self.spec.cvars)) - set(env))
        for _ in range(MAX_REJECT):
            vals = dict(env)
            for x in free:
                lo, hi = self._range(x)
                vals[x] = int(self.rng.integers(lo, hi + 1))
            s = CState.of(vals)
            if all(eval_pure(p, s, self.cfg.forall_window) for p in pures):
                return s
        raise UnsupportedFragment(f"no classical state found for {[pretty(p) for p in pures]} "
                                  f"after {MAX_REJECT} attempts")

    def quantum(self, kets) -> np.ndarray:
        for qv, _ in kets:
            missing = [q for q in qv if q not in self.layout]
            if missing:
                raise UnsupportedFragment(f"quantum variables {missing} are outside the layout")
        # keep the widest kets; narrower overlapping ones must follow from them
        chosen = []
        for qv, v in sorted(kets, key=lambda k: -len(k[0])):
            if any(set(qv) & set(c[0]) for c in chosen):
                if E.ket_implied(chosen, (qv, v), E._Trace()) is not True:
                    raise UnsupportedFragment("overlapping quantum expressions are not jointly realisable")
                continue
            chosen.append((qv, v))
        sub_layout, vec = (), np.ones(1, dtype=complex)
        for qv, v in chosen:
            sub_layout += tuple(qv)
            vec = np.kron(vec, v / np.linalg.norm(v))
        rest = [q for q in self.layout if q not in sub_layout]
        rest_vec = qcore.haar_state(self.rng, len(rest)) if rest else np.ones(1, dtype=complex)
        return qcore.embed_vector(vec, sub_layout, rest_vec, tuple(rest), self.layout)

    def branch(self, f, weight: float) -> Branch:
        pures, kets = [], []
        self.literals(f, pures, kets)
        return Branch(self.sigma(pures), weight, self.quantum(kets))

    def component(self, f, weight: float) -> list:
        """One or two branches satisfying ``f``; two only when ``f`` is preserved by mixing."""
        if weight <= 0:
            return []
        if f == A.FALSE:
            raise UnsupportedFragment("false has no non-empty models")
        k = 2 if is_convex(f) and self.rng.random() < 0.5 else 1
        if k == 1:
            return [self.branch(f, weight)]
        t = float(self.rng.uniform(0.2, 0.8))
        return [self.branch(f, weight * t), self.branch(f, weight * (1 - t))]

    def povd(self, d) -> Povd:
        d = _dist(d)
        if isinstance(d, A.Single):
            if d.formula == A.FALSE:
                return Povd(self.layout, ())
            parts = self.component(d.formula, 1.0)
        elif isinstance(d, A.Weighted):
            live = [(w, f) for w, f in d.comps if w > 0]
            if any(f == A.FALSE for _, f in live):
                raise UnsupportedFragment("a component with positive weight is false")
            parts = [b for w, f in live for b in self.component(f, float(w))]
        else:
            comps = [f for f in d.comps if f != A.FALSE]
            if not comps:
                return Povd(self.layout, ())
            ws = self.rng.dirichlet(np.ones(len(comps)))
            parts = [b for w, f in zip(ws, comps) for b in self.component(f, float(w))]
        return Povd(self.layout, tuple(canonical(coalesce(parts))))


def generate_states(spec: GenSpec, cfg: EvalConfig | None = None, max_retries: int = 50) -> list[Povd]:
    """Draw ``spec.count`` POVDs satisfying ``spec.formula``; each one is re-checked before it is returned."""
    cfg = cfg or EvalConfig()
    rng = np.random.default_rng(spec.seed)
    gen = _Gen(spec, cfg, rng)
    d = _dist(spec.formula)
    out = []
    misses = 0
    while len(out) < spec.count:
        mu = gen.povd(d)
        if isinstance(satisfies(mu, d, cfg), Satisfied):
            out.append(mu)
            continue
        misses += 1
        if misses > max_retries:
            raise UnsupportedFragment(f"generated states for {pretty(d)} could not be verified")
    return out


# ---------------------------------------------------------------- soundness fuzzing


@dataclass
class FuzzEntry:
    name: str
    rule: str
    check: str
    validation: object = None
    mutant: bool = False
    error: str = ""

    def to_json(self) -> dict:
        return {"name": self.name, "rule": self.rule, "check": self.check, "mutant": self.mutant,
                "error": self.error, "validation": self.validation.to_json() if self.validation else None}


@dataclass
class FuzzSummary:
    entries: list = field(default_factory=list)

    @property
    def refuted(self) -> int:
        return sum(e.validation.refuted for e in self.entries if e.validation and not e.mutant)

    @property
    def mutant_refuted(self) -> int:
        return sum(e.validation.refuted for e in self.entries if e.validation and e.mutant)

    @property
    def skipped(self) -> list:
        return [e for e in self.entries if e.validation is None or e.validation.unsupported]

    @property
    def ok(self) -> bool:
        genuine = [e for e in self.entries if not e.mutant]
        mutants = [e for e in self.entries if e.mutant]
        return (all(e.check == "ok" and e.validation and e.validation.valid for e in genuine)
                and all(e.validation and e.validation.refuted > 0 for e in mutants))

    def to_json(self) -> dict:
        return {"schema": 1, "ok": self.ok, "refuted": self.refuted, "mutant_refuted": self.mutant_refuted,
                "entries": [e.to_json() for e in self.entries]}

    def table(self) -> str:
        rows = [f"{'entry':<22} {'rule':<8} {'check':<10} {'sat':>5} {'n/p':>5} {'ref':>5}"]
        for e in self.entries:
            v = e.validation
            cells = (v.satisfied, v.not_proven, v.refuted) if v else ("-", "-", "-")
            tag = " (mutant)" if e.mutant else ""
            rows.append(f"{e.name + tag:<22} {e.rule:<8} {e.check:<10} {cells[0]:>5} {cells[1]:>5} {cells[2]:>5}"
                        + (f"  {e.error or (v.unsupported if v else '')}" if (e.error or (v and v.unsupported)) else ""))
        return "\n".join(rows)


class MutantChecker:
    """Checker whose [Cond] rule attaches the premises to the wrong branches."""

    @staticmethod
    def make(program, cfg):
        from .prover import Checker

        class _Swapped(Checker):
            def rule_Cond(self, node, t):
                c = t.cmd
                if isinstance(c, A.If):
                    t = type(t)(t.pre, A.If(c.cond, c.orelse, c.then), t.post)
                return Checker.rule_Cond(self, node, t)

        return _Swapped(program, cfg)


def corpus_files(path: str) -> list[str]:
    if os.path.isfile(path):
        return [path]
    out = []
    for root, _, files in os.walk(path):
        out.extend(os.path.join(root, f) for f in files if f.endswith(".qhl"))
    return sorted(out)


def fuzz_soundness(paths, trials: int = 100, cfg: EvalConfig | None = None, seed: int = 0) -> FuzzSummary:
    """Check each corpus proof, then validate its conclusion on generated states.

    Files under a ``mutants`` directory are negative controls: they are checked with a
    deliberately broken rule and are expected to be refuted.
    """
    from .lang.proofs import parse_proof_file
    from .prover import Checker, validate_triple

    cfg = cfg or EvalConfig()
    summary = FuzzSummary()
    files = [f for p in ([paths] if isinstance(paths, str) else paths) for f in corpus_files(p)]
    for k, path in enumerate(files):
        name = os.path.splitext(os.path.basename(path))[0]
        mutant = "mutants" in os.path.normpath(path).split(os.sep)
        try:
            script = parse_proof_file(path)
        except Exception as exc:  # reported, never silently passed
            summary.entries.append(FuzzEntry(name, "?", "parse-error", None, mutant, str(exc)))
            continue
        ck = MutantChecker.make(script.program, cfg) if mutant else Checker(script.program, cfg)
        ck.check(script.root)
        check = ck.report.overall
        entry = FuzzEntry(name, script.root.rule, check, None, mutant)
        if check != "ok":
            bad = [n for n in ck.report.nodes if n.status != "ok"]
            entry.error = bad[0].detail if bad else "; ".join(ck.report.errors)
        else:
            entry.validation = validate_triple(script.root.conclusion, trials, script.program, cfg, seed + k)
        summary.entries.append(entry)
    return summary
