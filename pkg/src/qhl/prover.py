"""Checking derivation trees against the inference rules.

Every rule is checked as a concrete instance: the checker recomputes the shape the
rule demands from its premises and parameters and compares it with the conclusion
recorded in the tree.  Small mismatches that are closed by a proven entailment
(for example a reordered conjunction) are accepted; anything else is reported.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qcore
from .assertions import entail as E
from .assertions.sat import Refuted, Satisfied, UnsupportedFragment
from .lang import ast as A
from .lang.analysis import free_vars, mod_vars, substitute
from .lang.printer import pretty
from .lang.proofs import Entailment, ProofNode, ProofScript, Triple
from .sem import CState, EvalConfig, Resolver, SemanticsError

OK = "ok"
SIDE = "side-condition-failure"
SHAPE = "rule-shape-mismatch"
DELEGATED = "delegated-entailment-unknown"

ARITY = {"Skip": 0, "Abort": 0, "Assgn": 0, "QInit": 0, "QUnit": 0, "QMeas": 0, "Absurd": 0, "While": 1,
         "Conj": 2, "QFrame": 1, "Cond": (1, 2)}


@dataclass
class NodeStatus:
    path: str
    rule: str
    status: str
    detail: str = ""
    line: int | None = None


@dataclass
class Conditional:
    path: str
    lhs: str
    rhs: str
    reason: str
    kind: str  # "unknown" or "numeric"


@dataclass
class CheckReport:
    nodes: list = field(default_factory=list)
    conditional: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    steps: int = 0

    @property
    def overall(self) -> str:
        if self.errors or any(n.status in (SIDE, SHAPE) for n in self.nodes):
            return "failed"
        if self.conditional or any(n.status == DELEGATED for n in self.nodes):
            return "conditional"
        return "ok"

    @property
    def ok(self) -> bool:
        return self.overall == "ok"

    def failures(self) -> list:
        return [n for n in self.nodes if n.status != OK]

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "overall": self.overall,
            "steps": self.steps,
            "nodes": [vars(n) for n in self.nodes],
            "conditional": [vars(c) for c in self.conditional],
            "errors": list(self.errors),
        }


class _Fail(Exception):
    def __init__(self, status: str, detail: str):
        super().__init__(detail)
        self.status = status
        self.detail = detail


def _show(d) -> str:
    return pretty(d) if d is not None else "?"


def _dist(d):
    return d if isinstance(d, (A.Single, A.Weighted, A.Unweighted)) else A.Single(d)


def _state(d, what: str):
    if isinstance(d, A.Single):
        return d.formula
    if isinstance(d, A.Weighted) and len(d.comps) == 1:
        return d.comps[0][1]
    raise _Fail(SHAPE, f"{what} must be a state formula, got {_show(d)}")


# ---------------------------------------------------------------- structural comparison


def same(a, b, tol: float = 1e-9) -> bool:
    """Structural equality, comparing quantum literals up to global phase."""
    if type(a) is not type(b):
        return False
    if isinstance(a, A.QLit):
        if a.qvars != b.qvars:
            return False
        return qcore.equal_up_to_phase(a.vector(), b.vector(), tol)
    if isinstance(a, (A.Weighted, A.Unweighted)):
        ca, cb = a.comps, b.comps
        if len(ca) != len(cb):
            return False
        if isinstance(a, A.Weighted):
            return all(wa == wb and same(fa, fb, tol) for (wa, fa), (wb, fb) in zip(ca, cb))
        return all(same(fa, fb, tol) for fa, fb in zip(ca, cb))
    if isinstance(a, A.Single):
        return same(a.formula, b.formula, tol)
    if isinstance(a, A.Ket):
        return same(a.expr, b.expr, tol)
    if isinstance(a, A.Not):
        return same(a.body, b.body, tol)
    if isinstance(a, (A.And, A.Or, A.Odot, A.QTensor)):
        return same(a.left, b.left, tol) and same(a.right, b.right, tol)
    if isinstance(a, A.Forall):
        return a.var == b.var and same(a.body, b.body, tol)
    return a == b


# ---------------------------------------------------------------- U^dagger on formulas


def _lits(q) -> list:
    return [q] if isinstance(q, A.QLit) else _lits(q.left) + _lits(q.right)


def _tensor(lits):
    out = lits[0]
    for l in lits[1:]:
        out = A.QTensor(out, l)
    return out


def _apply_to_lit(lit: A.QLit, mat: np.ndarray, qs: tuple) -> A.QLit:
    pos = qcore.positions_of(lit.qvars, qs)
    vec = qcore.apply_matrix(lit.vector(), len(lit.qvars), mat, pos)
    vec = np.where(np.abs(vec) < 1e-13, 0, vec)
    return A.QLit.from_vector(lit.qvars, vec, cutoff=0.0)


def apply_to_qexpr(q, mat: np.ndarray, qs: tuple):
    """Apply ``mat`` (acting on ``qs``) to a quantum expression, merging factors as needed."""
    lits = _lits(q)
    touched = [l for l in lits if set(l.qvars) & set(qs)]
    if not touched:
        return q
    covered = set().union(*[set(l.qvars) for l in touched])
    if not set(qs) <= covered:
        raise _Fail(SHAPE, f"quantum expression only partially covers {list(qs)}")
    if len(touched) == 1:
        merged = touched[0]
    else:
        layout, vec = (), np.ones(1, dtype=complex)
        for l in touched:
            layout += l.qvars
            vec = np.kron(vec, l.vector())
        merged = A.QLit.from_vector(layout, vec)
    new = _apply_to_lit(merged, mat, qs)
    out, placed = [], False
    for l in lits:
        if l in touched:
            if not placed:
                out.append(new)
                placed = True
        else:
            out.append(l)
    return _tensor(out)


def apply_to_formula(f, mat: np.ndarray, qs: tuple):
    """Distribute an operator over the connectives of a state formula."""
    if isinstance(f, A.Ket):
        return A.Ket(apply_to_qexpr(f.expr, mat, qs))
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return type(f)(apply_to_formula(f.left, mat, qs), apply_to_formula(f.right, mat, qs))
    if isinstance(f, A.Not):
        return A.Not(apply_to_formula(f.body, mat, qs))
    if isinstance(f, A.Forall):
        return A.Forall(f.var, apply_to_formula(f.body, mat, qs))
    return f


# ---------------------------------------------------------------- checker


class Checker:
    def __init__(self, program: A.Program | None = None, cfg: EvalConfig | None = None):
        self.program = program or A.Program(A.Skip())
        self.cfg = cfg or EvalConfig()
        self.resolver = Resolver(self.program)
        self.report = CheckReport()

    # -------------------------------------------------------- entailment helpers

    def implies(self, a, b, what: str, status: str = SHAPE):
        """Accept ``a`` where ``b`` is required: equal, or ``a |- b`` provably."""
        if same(a, b) or same(_dist(a), _dist(b)):
            return None
        r = E.entails(a, b, self.cfg)
        if r:
            return r
        raise _Fail(status, f"{what}: {_show(a)} does not match {_show(b)} ({r.reason})")

    # -------------------------------------------------------- traversal

    def check(self, node: ProofNode, path: str = "0"):
        for i, p in enumerate(node.premises):
            self.check(p, f"{path}.{i}")
        try:
            detail = self._dispatch(node, path) or ""
            status = OK
        except _Fail as exc:
            status, detail = exc.status, exc.detail
        except (E.EvalError, qcore.QuantumError, SemanticsError, UnsupportedFragment) as exc:
            status, detail = SHAPE, f"{type(exc).__name__}: {exc}"
        self.report.nodes.append(NodeStatus(path, node.rule, status, detail, node.line))

    def _dispatch(self, node: ProofNode, path: str):
        rule = node.rule
        if isinstance(node.conclusion, Entailment):
            if rule == "Conseq" and node.premises:
                return self._entail_chain(node)
            return self._entail(node, path)
        want = ARITY.get(rule)
        if isinstance(want, int) and len(node.premises) != want:
            raise _Fail(SHAPE, f"[{rule}] takes {want} premise(s), got {len(node.premises)}")
        if isinstance(want, tuple) and len(node.premises) not in want:
            raise _Fail(SHAPE, f"[{rule}] takes {want} premises, got {len(node.premises)}")
        for p in node.premises:
            if rule != "Conseq" and not isinstance(p.conclusion, Triple):
                raise _Fail(SHAPE, f"[{rule}] premises must be Hoare triples")
        fn = getattr(self, f"rule_{rule}", None)
        if fn is None:
            raise _Fail(SHAPE, f"{rule} is not a Hoare-triple rule")
        return fn(node, node.conclusion)

    # -------------------------------------------------------- entailment nodes

    def _entail(self, node: ProofNode, path: str):
        lhs, rhs = node.conclusion.lhs, node.conclusion.rhs
        by = node.params.get("by", [node.rule])
        r = E.entails(lhs, rhs, self.cfg)
        if "Fact" in by:
            if not r:
                if r.refuted:
                    raise _Fail(SIDE, f"asserted fact is refuted: {r.reason}")
                self.report.conditional.append(Conditional(path, _show(lhs), _show(rhs), r.reason, "unknown"))
                raise _Fail(DELEGATED, r.reason)
            note = node.params.get("note", "")
            self.report.conditional.append(
                Conditional(path, _show(lhs), _show(rhs), f"verified numerically {note}".strip(), "numeric"))
            return "fact verified numerically"
        if r:
            msg = "derived by " + ", ".join(r.rules) if r.rules else "identical"
            if r.approximate:
                msg += " (classical part checked over a bounded window)"
            if r.relaxations:
                msg += "; " + "; ".join(r.relaxations)
            return msg
        if r.refuted:
            raise _Fail(SIDE, f"entailment refuted: {r.reason}")
        self.report.conditional.append(Conditional(path, _show(lhs), _show(rhs), r.reason, "unknown"))
        raise _Fail(DELEGATED, r.reason)

    def _entail_chain(self, node: ProofNode):
        cur = node.conclusion.lhs
        for p in node.premises:
            if not isinstance(p.conclusion, Entailment):
                raise _Fail(SHAPE, "an entailment chain may only contain entailments")
            self.implies(cur, p.conclusion.lhs, "chain link")
            cur = p.conclusion.rhs
        self.implies(cur, node.conclusion.rhs, "chain end")

    # -------------------------------------------------------- classical rules

    def rule_Skip(self, node, t: Triple):
        if not isinstance(t.cmd, A.Skip):
            raise _Fail(SHAPE, "[Skip] applies to skip")
        self.implies(t.pre, t.post, "pre/post")

    def rule_Abort(self, node, t: Triple):
        if not isinstance(t.cmd, A.Abort):
            raise _Fail(SHAPE, "[Abort] applies to abort")
        if not same(_dist(t.post), A.Single(A.FALSE)):
            raise _Fail(SHAPE, f"[Abort] concludes false, got {_show(t.post)}")

    def rule_Absurd(self, node, t: Triple):
        if not same(_dist(t.pre), A.Single(A.FALSE)):
            raise _Fail(SHAPE, f"[Absurd] needs precondition false, got {_show(t.pre)}")

    def rule_Assgn(self, node, t: Triple):
        if not isinstance(t.cmd, A.Assign):
            raise _Fail(SHAPE, "[Assgn] applies to an assignment")
        need = substitute(_dist(t.post), t.cmd.var, t.cmd.expr)
        self.implies(t.pre, need, "precondition vs D[a/x]")

    def rule_Seq(self, node, t: Triple):
        prem = [p.conclusion for p in node.premises]
        if len(prem) < 2:
            raise _Fail(SHAPE, "[Seq] takes at least two premises")
        if A.seq(*[p.cmd for p in prem]) != A.seq(t.cmd):
            raise _Fail(SHAPE, "[Seq] premises do not compose to the command")
        self.implies(t.pre, prem[0].pre, "first precondition")
        for a, b in zip(prem, prem[1:]):
            self.implies(a.post, b.pre, "intermediate assertion")
        self.implies(prem[-1].post, t.post, "last postcondition")

    def rule_Cond(self, node, t: Triple):
        c = t.cmd
        if not isinstance(c, A.If):
            raise _Fail(SHAPE, "[Cond] applies to a conditional")
        pre = _dist(t.pre)
        prem = [p.conclusion for p in node.premises]
        if isinstance(pre, A.Weighted) and len(pre.comps) == 2:
            (p, g1), (q, g2) = pre.comps
        elif isinstance(pre, A.Single) and "p" in node.params:
            p = Fraction(node.params["p"])
            q = 1 - p
            g1 = g2 = pre.formula
        else:
            raise _Fail(SHAPE, "[Cond] precondition must be p (F1 /\\ b) (+) (1-p) (F2 /\\ ~b)")
        if "p" in node.params and Fraction(node.params["p"]) != p:
            raise _Fail(SIDE, f"[Cond] weight {p} differs from the declared p = {node.params['p']}")
        if p + q != 1:
            raise _Fail(SIDE, f"[Cond] weights sum to {p + q}, not 1")
        branches = [(p, g1, c.cond, c.then), (q, g2, A.Not(c.cond), c.orelse)]
        if len(prem) == 1:
            if p not in (0, 1):
                raise _Fail(SHAPE, "[Cond] with one premise needs a branch of weight 0")
            branches = [branches[0] if p == 1 else branches[1]]
        posts = []
        for (w, g, guard, cmd), pr in zip(branches, prem):
            if pr.cmd != cmd:
                raise _Fail(SHAPE, "[Cond] premise command does not match its branch")
            self.implies(A.Single(g), A.Single(guard), "branch guard", SIDE)
            self.implies(A.Single(g), pr.pre, "branch precondition")
            posts.append((w, pr.post))
        self.implies(_mix(posts), t.post, "postcondition")

    def rule_Conseq(self, node, t: Triple):
        triples = [p for p in node.premises if isinstance(p.conclusion, Triple)]
        if len(triples) != 1:
            raise _Fail(SHAPE, "[Conseq] needs exactly one Hoare-triple premise")
        k = node.premises.index(triples[0])
        before, after = node.premises[:k], node.premises[k + 1:]
        mid = triples[0].conclusion
        if mid.cmd != t.cmd:
            raise _Fail(SHAPE, "[Conseq] premise command differs")
        if not before and not after:
            return self._delegate(t.pre, mid.pre, node) or self._delegate(mid.post, t.post, node)
        cur = t.pre
        for e in before:
            self.implies(cur, e.conclusion.lhs, "chain link")
            cur = e.conclusion.rhs
        self.implies(cur, mid.pre, "premise precondition")
        cur = mid.post
        for e in after:
            self.implies(cur, e.conclusion.lhs, "chain link")
            cur = e.conclusion.rhs
        self.implies(cur, t.post, "postcondition")

    def _delegate(self, a, b, node):
        if same(_dist(a), _dist(b)):
            return None
        r = E.entails(a, b, self.cfg)
        if r:
            return None
        if r.refuted:
            raise _Fail(SIDE, f"implication refuted: {r.reason}")
        self.report.conditional.append(Conditional("", _show(a), _show(b), r.reason, "unknown"))
        raise _Fail(DELEGATED, r.reason)

    def rule_While(self, node, t: Triple):
        c = t.cmd
        if not isinstance(c, A.While):
            raise _Fail(SHAPE, "[While] applies to a loop")
        d = _dist(t.pre)
        if not isinstance(d, A.Unweighted) or len(d.comps) != 2:
            raise _Fail(SHAPE, "[While] invariant must be (F0 /\\ b) (+) (F1 /\\ ~b)")
        g0, g1 = d.comps
        self.implies(A.Single(g0), A.Single(c.cond), "invariant component 0 vs guard", SHAPE)
        self.implies(A.Single(g1), A.Single(A.Not(c.cond)), "invariant component 1 vs negated guard", SHAPE)
        body = node.premises[0].conclusion
        if body.cmd != c.body:
            raise _Fail(SHAPE, "[While] premise command is not the loop body")
        self.implies(A.Single(g0), body.pre, "body precondition")
        self.implies(body.post, d, "body postcondition vs invariant")
        self.implies(A.Single(g1), t.post, "loop postcondition")

    def rule_Conj(self, node, t: Triple):
        a, b = (p.conclusion for p in node.premises)
        if a.cmd != t.cmd or b.cmd != t.cmd:
            raise _Fail(SHAPE, "[Conj] premises must be about the same command")
        f1, f2 = _state(a.pre, "[Conj] premise"), _state(b.pre, "[Conj] premise")
        g1, g2 = _state(a.post, "[Conj] premise"), _state(b.post, "[Conj] premise")
        self.implies(t.pre, A.Single(A.And(f1, f2)), "precondition")
        self.implies(A.Single(A.And(g1, g2)), t.post, "postcondition")

    def rule_QFrame(self, node, t: Triple):
        local = node.premises[0].conclusion
        if local.cmd != t.cmd:
            raise _Fail(SHAPE, "[QFrame] premise command differs")
        f1, f2 = _state(local.pre, "[QFrame] local precondition"), _state(local.post, "[QFrame] local postcondition")
        if "frame" in node.params:
            f3 = _state(node.params["frame"], "frame")
        else:
            pre = _state(t.pre, "[QFrame] precondition")
            if not isinstance(pre, A.Odot) or not same(pre.left, f1):
                raise _Fail(SHAPE, "[QFrame] cannot read the frame off the precondition")
            f3 = pre.right
        clash = free_vars(f3) & mod_vars(t.cmd, self.program)
        if clash:
            raise _Fail(SIDE, f"frame mentions modified variables {sorted(clash)}")
        for f in (f1, f2):
            both = free_vars(f) & free_vars(f3)
            if both:
                raise _Fail(SIDE, f"frame shares variables {sorted(both)} with the local assertion")
        self.implies(t.pre, A.Single(A.Odot(f1, f3)), "precondition")
        self.implies(A.Single(A.Odot(f2, f3)), t.post, "postcondition")

    def rule_Sum(self, node, t: Triple):
        prem = [p.conclusion for p in node.premises]
        if not prem:
            raise _Fail(SHAPE, "[Sum] needs at least one premise")
        if any(p.cmd != t.cmd for p in prem):
            raise _Fail(SHAPE, "[Sum] premises must be about the same command")
        if "weights" in node.params:
            ws = [Fraction(w) for w in node.params["weights"]]
        else:
            pre = _dist(t.pre)
            if not isinstance(pre, A.Weighted):
                raise _Fail(SHAPE, "[Sum] needs weights")
            ws = [w for w, _ in pre.comps if w > 0]
        if len(ws) != len(prem):
            raise _Fail(SHAPE, f"[Sum] has {len(prem)} premises but {len(ws)} weights")
        if any(w < 0 for w in ws) or sum(ws) != 1:
            raise _Fail(SIDE, f"[Sum] weights sum to {sum(ws)}, not 1")
        self.implies(t.pre, _mix([(w, p.pre) for w, p in zip(ws, prem)]), "precondition")
        self.implies(_mix([(w, p.post) for w, p in zip(ws, prem)]), t.post, "postcondition")

    # -------------------------------------------------------- quantum rules

    def rule_QInit(self, node, t: Triple):
        c = t.cmd
        if not isinstance(c, A.QInit):
            raise _Fail(SHAPE, "[QInit] applies to an initialisation")
        zero = A.Ket(A.QLit(tuple(c.qvars), ((0, 1 + 0j),)))
        self.implies(A.Single(zero), t.post, "postcondition")

    def _sigma_from(self, pre) -> CState:
        try:
            f = _state(pre, "precondition")
        except _Fail:
            return CState()
        env, _ = E.determine(E.normalize(f).pures, self.cfg.forall_window)
        return CState.of(env)

    def rule_QUnit(self, node, t: Triple):
        c = t.cmd
        if not isinstance(c, A.Unitary):
            raise _Fail(SHAPE, "[QUnit] applies to a unitary")
        post = _state(t.post, "[QUnit] postcondition")
        op = self.resolver.gate(c.gate, self._sigma_from(t.pre), len(c.qvars))
        mat = op.to_matrix().conj().T
        need = apply_to_formula(post, mat, tuple(c.qvars))
        self.implies(t.pre, A.Single(need), "precondition vs U^dag F")

    def rule_QMeas(self, node, t: Triple):
        c = t.cmd
        if not isinstance(c, A.Measure):
            raise _Fail(SHAPE, "[QMeas] applies to a measurement")
        nf = E.normalize(_state(t.pre, "[QMeas] precondition"))
        if nf.false or nf.opaque:
            raise _Fail(SHAPE, "[QMeas] precondition must be a conjunction of classical clauses and kets")
        cov = E._cover(nf.kets, tuple(c.qvars))
        if cov is None:
            raise _Fail(SHAPE, f"precondition does not determine the state of {list(c.qvars)}")
        layout, vec, _ = cov
        ms = self.resolver.measurement(c.meas, len(c.qvars))
        pos = qcore.positions_of(layout, c.qvars)
        outs = []
        for i, m in enumerate(ms.ops):
            v = qcore.apply_matrix(vec, len(layout), m, pos)
            p = float(np.vdot(v, v).real)
            if p > self.cfg.prune:
                outs.append((i, p, v / np.sqrt(p)))
        post = _dist(t.post)
        comps = [(Fraction(1), post.formula)] if isinstance(post, A.Single) else list(A.as_weighted(post))
        if isinstance(post, A.Unweighted):
            raise _Fail(SHAPE, "[QMeas] concludes a weighted distribution")
        if any(w == 0 for w, _ in comps):
            raise _Fail(SHAPE, "[QMeas] components for zero-probability outcomes must be absent")
        if len(comps) != len(outs):
            raise _Fail(SHAPE, f"[QMeas] expects {len(outs)} outcome components, got {len(comps)}")
        rest = [k for k in nf.kets if not set(k[0]) & set(layout)]
        tr = E._Trace()
        for (i, p, v), (w, g) in zip(outs, comps):
            if abs(float(w) - p) > 1e-9:
                raise _Fail(SHAPE, f"outcome {i} has probability {p:.12g}, component weight is {w}")
            gnf = E.normalize(g)
            if gnf.opaque or gnf.false:
                raise _Fail(SHAPE, f"outcome {i} component is not a conjunction of clauses and kets")
            avail = [(layout, v)] + rest
            for k in gnf.kets:
                if E.ket_implied(avail, k, tr) is not True:
                    raise _Fail(SHAPE, f"outcome {i}: quantum expression over {list(k[0])} is not M_{i}|v>/sqrt(p_{i})")
            for q in gnf.pures:
                goal = substitute(q, c.var, A.Num(i))
                r = E.pure_implies(nf.pures, goal, tr, self.cfg)
                if r is not True:
                    raise _Fail(SHAPE, f"precondition does not imply {_show(goal)} for outcome {i}")
        return f"{len(outs)} outcome(s)"


def _mix(parts):
    """Flatten ``(+)_i p_i . D_i`` into one weighted distribution."""
    comps = []
    for w, d in parts:
        if w == 0:
            continue
        d = _dist(d)
        if isinstance(d, A.Unweighted):
            raise _Fail(SHAPE, "cannot scale an unweighted distribution")
        comps.extend((w * v, f) for v, f in A.as_weighted(d))
    if len(comps) == 1:
        return A.Single(comps[0][1])
    return A.Weighted(tuple(comps))


# ---------------------------------------------------------------- entry points


def check_node(node: ProofNode, program: A.Program | None = None, cfg: EvalConfig | None = None) -> CheckReport:
    ck = Checker(program, cfg)
    ck.check(node)
    ck.report.nodes.sort(key=lambda n: [int(x) for x in n.path.split(".")])
    return ck.report


def check_outline(script: ProofScript, program: A.Program | None = None, cfg: EvalConfig | None = None) -> CheckReport:
    program = program or script.program
    report = check_node(script.root, program, cfg)
    report.steps = script.steps
    if script.kind == "outline" and program is not None and not isinstance(program.body, A.Skip):
        spine = A.seq(script.spine)
        if not any(spine == c for c in _fragments(program.body)):
            report.errors.append("outline commands do not match the program or any fragment of it")
    return report


def _fragments(c):
    """The command itself, contiguous runs of its sequences, and the bodies of its loops and branches."""
    yield c
    if isinstance(c, A.Seq):
        cs = c.cmds
        for i in range(len(cs)):
            for j in range(i + 1, len(cs) + 1):
                if (i, j) != (0, len(cs)):
                    yield A.seq(*cs[i:j])
        for d in cs:
            yield from _fragments(d)
    elif isinstance(c, A.While):
        yield from _fragments(c.body)
    elif isinstance(c, A.If):
        yield from _fragments(c.then)
        yield from _fragments(c.orelse)


@dataclass
class Validation:
    satisfied: int = 0
    not_proven: int = 0
    refuted: int = 0
    unsupported: str = ""
    first_refutation: str = ""

    @property
    def valid(self) -> bool:
        return self.refuted == 0 and not self.unsupported

    def to_json(self) -> dict:
        return {"satisfied": self.satisfied, "not_proven": self.not_proven, "refuted": self.refuted,
                "unsupported": self.unsupported, "first_refutation": self.first_refutation}


def triple_layout(t: Triple, program: A.Program | None) -> tuple:
    from .lang.analysis import quantum_vars

    qs = list(program.qvars) if program else []
    extra = set()
    for d in (t.pre, t.post):
        for f in A.components(_dist(d)):
            extra |= quantum_vars(f)
    from .lang.parser import _used_qvars

    for q in _used_qvars(t.cmd):
        if q not in qs:
            qs.append(q)
    qs += sorted(q for q in extra if q not in qs)
    return tuple(qs)


def validate_triple(t: Triple, trials: int = 100, program: A.Program | None = None,
                    cfg: EvalConfig | None = None, seed: int = 0) -> Validation:
    """Run ``t.cmd`` on generated states satisfying the precondition and judge the postcondition."""
    from . import harness
    from . import sem
    from .assertions import satisfies

    cfg = cfg or EvalConfig()
    out = Validation()
    layout = triple_layout(t, program)
    spec = harness.GenSpec(_dist(t.pre), layout, seed=seed, count=trials)
    try:
        states = harness.generate_states(spec, cfg)
    except UnsupportedFragment as exc:
        out.unsupported = str(exc)
        return out
    for mu in states:
        res = sem.eval(t.cmd, mu, program, cfg)
        v = satisfies(res.povd, _dist(t.post), cfg)
        if isinstance(v, Satisfied):
            out.satisfied += 1
        elif isinstance(v, Refuted):
            out.refuted += 1
            if not out.first_refutation:
                out.first_refutation = v.reason
        else:
            out.not_proven += 1
    return out
