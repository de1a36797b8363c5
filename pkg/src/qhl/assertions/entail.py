"""Entailment between assertions by normalization, numeric ket comparison and bounded search.

State formulas in the conjunctive fragment (``/\\``, ``(.)``, kets, classical clauses) are
normalized into classical conjuncts plus a list of kets; the structural laws for ``(.)``,
tensor products and reordering are applied implicitly and recorded in the trace.
Distribution-level entailment is reduced to a transportation problem over the
componentwise entailment relation.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import qcore
from ..lang import ast as A
from ..lang.analysis import FORALL_WINDOW, classical_vars, eval_aexp, eval_pure, is_pure
from ..lang.builtins import EvalError
from ..sem import EvalConfig
from .sat import SAT_TOL, is_convex
from .transport import transport

SEARCH_BUDGET = 200_000


@dataclass
class EntailProof:
    rules: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    approximate: bool = False
    relaxations: list = field(default_factory=list)

    def __bool__(self):
        return True


@dataclass
class Unknown:
    reason: str
    refuted: bool = False
    rules: list = field(default_factory=list)

    def __bool__(self):
        return False


class _Trace:
    def __init__(self):
        self.rules: list[str] = []
        self.steps: list[str] = []
        self.approximate = False
        self.relax: list[str] = []

    def use(self, rule: str, detail: str = ""):
        if rule not in self.rules:
            self.rules.append(rule)
        if detail:
            self.steps.append(f"{rule}: {detail}")

    def absorb(self, other: "_Trace"):
        for r in other.rules:
            if r not in self.rules:
                self.rules.append(r)
        self.steps.extend(other.steps)
        self.approximate |= other.approximate
        self.relax.extend(other.relax)

    def proof(self) -> EntailProof:
        return EntailProof(list(self.rules), list(self.steps), self.approximate, list(self.relax))


# ---------------------------------------------------------------- normal form


@dataclass
class NF:
    pures: list = field(default_factory=list)
    kets: list = field(default_factory=list)  # (qvars, vector)
    opaque: list = field(default_factory=list)
    false: bool = False


def normalize(f, tr: _Trace | None = None) -> NF:
    tr = tr or _Trace()
    nf = NF()

    def walk(g, in_odot: bool):
        if isinstance(g, A.Const):
            if not g.value:
                nf.false = True
            elif in_odot:
                tr.use("OdotE")
            return
        if is_pure(g) and not isinstance(g, (A.And, A.Odot)):
            if g not in nf.pures:
                nf.pures.append(g)
            return
        if isinstance(g, A.And):
            walk(g.left, in_odot)
            walk(g.right, in_odot)
            return
        if isinstance(g, A.Odot):
            if is_pure(g.left) or is_pure(g.right):
                tr.use("OdotO" if is_pure(g.left) and is_pure(g.right) else "OdotOP")
            if isinstance(g.left, A.Odot) or isinstance(g.right, A.Odot):
                tr.use("OdotA")
            walk(g.left, True)
            walk(g.right, True)
            return
        if isinstance(g, A.Ket):
            if isinstance(g.expr, A.QTensor):
                tr.use("OdotT")
            for lit in _factors(g.expr):
                nf.kets.append((lit.qvars, lit.vector()))
            return
        if g not in nf.opaque:
            nf.opaque.append(g)

    walk(f, False)
    return nf


def _factors(q) -> list:
    if isinstance(q, A.QLit):
        return [q]
    return _factors(q.left) + _factors(q.right)


# ---------------------------------------------------------------- classical implication


def determine(pures, window=FORALL_WINDOW):
    """Propagate equalities ``x = e``; returns ``(assignment, consistent)``."""
    env: dict = {}
    changed = True

    class _Env:
        def get(self, name, default=0):
            return env[name]

    while changed:
        changed = False
        for p in pures:
            if not (isinstance(p, A.Pred) and p.op == "="):
                continue
            for lhs, rhs in (p.args, p.args[::-1]):
                if isinstance(lhs, A.Var) and lhs.name not in env:
                    if _vars(rhs) <= set(env):
                        try:
                            env[lhs.name] = eval_aexp(rhs, _Env())
                        except EvalError:
                            return env, False
                        changed = True
                        break
    for p in pures:
        if classical_vars(p) <= set(env):
            try:
                if not eval_pure(p, _Env(), window):
                    return env, False
            except (EvalError, KeyError):
                return env, False
    return env, True


def _vars(e) -> set:
    from ..lang.analysis import aexp_vars

    return aexp_vars(e)


class _Assign:
    def __init__(self, d):
        self.d = d

    def get(self, name, default=0):
        return self.d.get(name, default)


def _holds(p, env, window) -> bool:
    try:
        return eval_pure(p, _Assign(env), window)
    except EvalError:
        return False


def pure_implies(pures, goal, tr: _Trace, cfg: EvalConfig):
    """Return True, False (counterexample found) or None (undecided)."""
    window = cfg.forall_window
    if goal == A.TRUE:
        return True
    if goal in pures:
        if len(pures) > 1:
            tr.use("AndE")
        return True
    env, consistent = determine(pures, window)
    if not consistent:
        tr.use("FalseE", "classical premises are contradictory")
        return True
    rest = sorted((set().union(*[classical_vars(p) for p in pures], classical_vars(goal))) - set(env))
    if classical_vars(goal) <= set(env):
        # the premises force every variable of the goal, so its value is fixed
        if _holds(goal, env, window):
            tr.use("Arith", "classical implication decided by evaluation")
            return True
        sat = pure_satisfiable(pures, cfg)
        if sat is False:
            tr.use("FalseE", "classical premises are unsatisfiable")
            return True
        return False if sat else None
    lo, hi = window
    size = (hi - lo + 1) ** len(rest)
    if size > SEARCH_BUDGET:
        return None
    for vals in itertools.product(range(lo, hi + 1), repeat=len(rest)):
        full = dict(env)
        full.update(zip(rest, vals))
        if all(_holds(p, full, window) for p in pures) and not _holds(goal, full, window):
            return False
    tr.use("Arith", f"classical implication checked over {rest} in [{lo}, {hi}]")
    tr.approximate = True
    return True


def pure_satisfiable(pures, cfg: EvalConfig) -> bool | None:
    env, consistent = determine(pures, cfg.forall_window)
    if not consistent:
        return False
    rest = sorted(set().union(set(), *[classical_vars(p) for p in pures]) - set(env))
    lo, hi = cfg.forall_window
    if (hi - lo + 1) ** len(rest) > SEARCH_BUDGET:
        return None
    for vals in itertools.product(range(lo, hi + 1), repeat=len(rest)):
        full = dict(env)
        full.update(zip(rest, vals))
        if all(_holds(p, full, cfg.forall_window) for p in pures):
            return True
    return False


# ---------------------------------------------------------------- kets


def _cover(kets, target: tuple):
    S = set(target)
    cands = [k for k in kets if S & set(k[0])]
    cands.sort(key=lambda k: (-len(S & set(k[0])), len(k[0])))
    picked, used = [], set()
    for qv, vec in cands:
        if used & set(qv):
            continue
        picked.append((qv, vec))
        used |= set(qv)
        if S <= used:
            break
    if not S <= used:
        return None
    layout, vec = (), np.ones(1, dtype=complex)
    for qv, v in picked:
        layout += tuple(qv)
        vec = np.kron(vec, v)
    return layout, vec, len(picked)


def ket_implied(kets, target, tr: _Trace) -> bool | None:
    tvars, tvec = target
    cov = _cover(kets, tvars)
    if cov is None:
        return None
    layout, vec, nparts = cov
    red = qcore.reduced_pure(vec, layout, tvars)
    ok = float(np.linalg.norm(red - np.outer(tvec, tvec.conj()))) <= SAT_TOL
    if ok:
        if nparts > 1:
            tr.use("Separ")
        elif set(layout) != set(tvars):
            tr.use("Separ", "factor of a product state")
        if list(layout) != list(tvars) and set(layout) == set(tvars):
            tr.use("ReArr")
        elif nparts == 1 and list(layout) != list(tvars) and len(layout) > len(tvars):
            pass
        if len(layout) > len(tvars):
            tr.use("PT")
    return ok


def _kets_consistent(kets) -> bool:
    for (a, va), (b, vb) in itertools.combinations(kets, 2):
        common = [q for q in a if q in b]
        if not common:
            continue
        ra = qcore.reduced_pure(va, a, common)
        rb = qcore.reduced_pure(vb, b, common)
        if np.linalg.norm(ra - rb) > SAT_TOL:
            return False
    return True


# ---------------------------------------------------------------- state formulas


def _state_entails(f, g, cfg: EvalConfig):
    """Return ``(_Trace, None)`` on success or ``(None, Unknown)``."""
    tr = _Trace()
    if f == g:
        return tr, None
    if g == A.TRUE:
        tr.use("PT")
        return tr, None
    src = normalize(f, tr)
    if src.false:
        tr.use("FalseE")
        return tr, None
    tgt = normalize(g, tr)
    if tgt.false:
        sat = pure_satisfiable(src.pures, cfg) if not src.kets and not src.opaque else None
        if sat is False:
            tr.use("FalseE")
            return tr, None
        return None, Unknown("target is false", refuted=sat is True)
    src_consistent = _kets_consistent(src.kets) and not src.opaque
    for p in tgt.pures:
        r = pure_implies(src.pures, p, tr, cfg)
        if r is None:
            return None, Unknown(f"could not decide classical implication of {_show(p)}")
        if r is False:
            return None, Unknown(f"classical clause {_show(p)} does not follow", refuted=src_consistent)
    for k in tgt.kets:
        r = ket_implied(src.kets, k, tr)
        if r is None:
            return None, Unknown(f"quantum variables {list(k[0])} are not determined by the premise",
                                 refuted=src_consistent and _sat_pures(src, cfg))
        if r is False:
            return None, Unknown(f"quantum expression over {list(k[0])} does not follow",
                                 refuted=src_consistent and _sat_pures(src, cfg))
    for o in tgt.opaque:
        if o not in src.opaque:
            return None, Unknown(f"cannot derive {_show(o)}")
    if len(src.pures) + len(src.kets) + len(src.opaque) > len(tgt.pures) + len(tgt.kets) + len(tgt.opaque):
        tr.use("AndE")
    return tr, None


def _sat_pures(nf: NF, cfg) -> bool:
    return pure_satisfiable(nf.pures, cfg) is True


def _show(f) -> str:
    from ..lang.printer import formula

    return formula(f)


# ---------------------------------------------------------------- distributions


def _as_dist(d):
    if isinstance(d, (A.Single, A.Weighted, A.Unweighted)):
        return d
    return A.Single(d)


def entails(d1, d2, cfg: EvalConfig | None = None):
    """Try to derive ``D1 |- D2``; returns ``EntailProof`` or ``Unknown``."""
    cfg = cfg or EvalConfig()
    d1, d2 = _as_dist(d1), _as_dist(d2)
    tr = _Trace()
    if d1 == d2:
        return tr.proof()
    if isinstance(d1, A.Weighted):
        src = [(w, f) for w, f in d1.comps if w > 0]
        if len(src) < len(d1.comps):
            tr.use("OMerg", "zero-weight premise components discarded")
    elif isinstance(d1, A.Single):
        src = [(Fraction(1), d1.formula)]
    else:
        src = [(None, f) for f in d1.comps]
    if all(f == A.FALSE for _, f in src):
        tr.use("FalseE")
        return tr.proof()
    if isinstance(d2, A.Weighted):
        tgt = [(w, g) for w, g in d2.comps if w > 0]
        for w, g in d2.comps:
            if w == 0:
                tr.relax.append(f"component {_show(g)} has weight 0 and is assumed satisfiable")
    elif isinstance(d2, A.Single):
        tgt = [(Fraction(1), d2.formula)]
    else:
        tgt = [(None, g) for g in d2.comps]

    memo: dict = {}

    def ok(i, k):
        key = (i, k)
        if key not in memo:
            memo[key] = _state_entails(src[i][1], tgt[k][1], cfg)
        return memo[key][0] is not None

    def sub(i, k):
        return memo[(i, k)]

    def first_failure(pairs):
        for i, k in pairs:
            t, u = memo.get((i, k), (None, None))
            if u is not None:
                return u
        return Unknown("no componentwise derivation found")

    # --- target is a single formula
    if isinstance(d2, A.Single) or (len(tgt) == 1 and tgt[0][0] is not None):
        g = tgt[0][1]
        pairs = [(i, 0) for i in range(len(src))]
        if not all(ok(i, 0) for i in range(len(src))):
            u = first_failure(pairs)
            return Unknown(u.reason, u.refuted and len(src) == 1)
        if len(src) > 1:
            if not is_convex(g):
                return Unknown(f"merging components into {_show(g)} needs a convex formula")
            tr.use("OMerg")
            tr.use("OCon")
        for i, _ in pairs:
            tr.absorb(sub(i, 0)[0])
        return tr.proof()

    # --- weighted target
    if isinstance(d2, A.Weighted):
        if any(w is None for w, _ in src):
            return Unknown("an unweighted premise cannot fix the weights of a weighted conclusion")
        allowed = [[ok(i, k) for k in range(len(tgt))] for i in range(len(src))]
        flow = transport([w for w, _ in src], [w for w, _ in tgt], allowed)
        if flow is None:
            refuted = False
            if all(_classical_only(f) for _, f in src + tgt):
                refuted = True
            return Unknown("weights cannot be matched componentwise", refuted=refuted)
        for k in range(len(tgt)):
            feeders = [i for i in range(len(src)) if flow[i][k] > 0]
            if len(feeders) > 1 and not is_convex(tgt[k][1]):
                return Unknown(f"merging into {_show(tgt[k][1])} needs a convex formula")
        if any(sum(1 for x in row if x > 0) > 1 for row in flow) or any(
                sum(1 for i in range(len(src)) if flow[i][k] > 0) > 1 for k in range(len(tgt))):
            tr.use("OMerg")
        for i in range(len(src)):
            for k in range(len(tgt)):
                if flow[i][k] > 0:
                    t = sub(i, k)[0]
                    if src[i][1] != tgt[k][1]:
                        tr.use("OCon")
                    tr.absorb(t)
        return tr.proof()

    # --- unweighted target
    if isinstance(d1, (A.Weighted, A.Single)):
        tr.use("Oplus")
    assign: dict = {}
    load: dict = {}
    for i in range(len(src)):
        choices = [k for k in range(len(tgt)) if ok(i, k)]
        if not choices:
            return first_failure([(i, k) for k in range(len(tgt))])
        free = [k for k in choices if k not in load or is_convex(tgt[k][1])]
        if not free:
            return Unknown(f"merging into {_show(tgt[choices[0]][1])} needs a convex formula")
        k = free[0]
        assign[i] = k
        load[k] = load.get(k, 0) + 1
    for k in range(len(tgt)):
        if k not in load:
            tr.relax.append(f"component {_show(tgt[k][1])} receives weight 0 and is assumed satisfiable")
    if any(v > 1 for v in load.values()):
        tr.use("OMerg")
    for i, k in assign.items():
        if src[i][1] != tgt[k][1]:
            tr.use("OCon")
        tr.absorb(sub(i, k)[0])
    return tr.proof()


def _classical_only(f) -> bool:
    return is_pure(f)


def equivalent(f, g, cfg: EvalConfig | None = None):
    """Both directions derivable; returns the joined proof or ``Unknown``."""
    a = entails(f, g, cfg)
    if not a:
        return a
    b = entails(g, f, cfg)
    if not b:
        return b
    return EntailProof(a.rules + [r for r in b.rules if r not in a.rules], a.steps + b.steps,
                       a.approximate or b.approximate, a.relaxations + b.relaxations)
