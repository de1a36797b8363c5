"""Variable analysis, capture-avoiding substitution and classical evaluation."""
from __future__ import annotations

import itertools

from . import ast as A
from .builtins import EvalError, apply_function, apply_predicate

FORALL_WINDOW = (-64, 64)

# ---------------------------------------------------------------- free variables


def aexp_vars(a) -> set[str]:
    if isinstance(a, A.Var):
        return {a.name}
    if isinstance(a, A.App):
        out = set()
        for x in a.args:
            out |= aexp_vars(x)
        return out
    return set()


def qexpr_vars(q) -> tuple:
    if isinstance(q, A.QLit):
        return q.qvars
    return qexpr_vars(q.left) + qexpr_vars(q.right)


def classical_vars(f) -> set[str]:
    """Free classical variables of a formula or distribution formula."""
    if isinstance(f, A.Pred):
        out = set()
        for x in f.args:
            out |= aexp_vars(x)
        return out
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return classical_vars(f.left) | classical_vars(f.right)
    if isinstance(f, A.Not):
        return classical_vars(f.body)
    if isinstance(f, A.Forall):
        return classical_vars(f.body) - {f.var}
    if isinstance(f, (A.Single, A.Weighted, A.Unweighted)):
        out = set()
        for g in A.components(f):
            out |= classical_vars(g)
        return out
    return set()


def quantum_vars(f) -> set[str]:
    if isinstance(f, A.Ket):
        return set(qexpr_vars(f.expr))
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return quantum_vars(f.left) | quantum_vars(f.right)
    if isinstance(f, (A.Not, A.Forall)):
        return quantum_vars(f.body)
    if isinstance(f, (A.Single, A.Weighted, A.Unweighted)):
        out = set()
        for g in A.components(f):
            out |= quantum_vars(g)
        return out
    return set()


def free_vars(x) -> set[str]:
    """Free classical and quantum variables of a formula, distribution formula or command."""
    if isinstance(x, (A.Num, A.Var, A.App)):
        return aexp_vars(x)
    if is_command(x):
        return command_vars(x)
    return classical_vars(x) | quantum_vars(x)


def is_command(x) -> bool:
    return isinstance(x, (A.Skip, A.Abort, A.Assign, A.Random, A.Seq, A.If, A.While, A.QInit,
                          A.Unitary, A.Measure, A.Call))


def command_vars(c) -> set[str]:
    if isinstance(c, A.Assign):
        return {c.var} | aexp_vars(c.expr)
    if isinstance(c, A.Random):
        return {c.var} | aexp_vars(c.lo) | aexp_vars(c.hi)
    if isinstance(c, A.Seq):
        out = set()
        for d in c.cmds:
            out |= command_vars(d)
        return out
    if isinstance(c, A.If):
        return classical_vars(c.cond) | command_vars(c.then) | command_vars(c.orelse)
    if isinstance(c, A.While):
        return classical_vars(c.cond) | command_vars(c.body)
    if isinstance(c, A.QInit):
        return set(c.qvars)
    if isinstance(c, A.Unitary):
        out = set(c.qvars)
        for a in c.gate.args:
            out |= aexp_vars(a)
        return out
    if isinstance(c, A.Measure):
        return {c.var} | set(c.qvars)
    if isinstance(c, A.Call):
        out = {c.result} if c.result else set()
        for a in c.args:
            out |= aexp_vars(a)
        return out
    return set()


def mod_vars(c, program: A.Program | None = None) -> set[str]:
    """Variables a command may modify (assigned classical variables and touched qubits)."""
    if isinstance(c, (A.Assign, A.Random)):
        return {c.var}
    if isinstance(c, A.Seq):
        out = set()
        for d in c.cmds:
            out |= mod_vars(d, program)
        return out
    if isinstance(c, A.If):
        return mod_vars(c.then, program) | mod_vars(c.orelse, program)
    if isinstance(c, A.While):
        return mod_vars(c.body, program)
    if isinstance(c, (A.QInit, A.Unitary)):
        return set(c.qvars)
    if isinstance(c, A.Measure):
        return {c.var} | set(c.qvars)
    if isinstance(c, A.Call):
        out = {c.result} if c.result else set()
        if program is not None and program.macro(c.name) is not None:
            m = program.macro(c.name)
            out |= mod_vars(m.body, program)
        return out
    return set()


# ---------------------------------------------------------------- substitution


def subst_aexp(a, x: str, e):
    if isinstance(a, A.Var):
        return e if a.name == x else a
    if isinstance(a, A.App):
        return A.App(a.fn, tuple(subst_aexp(b, x, e) for b in a.args))
    return a


def _fresh(base: str, avoid: set[str]) -> str:
    for k in itertools.count(1):
        cand = f"{base}_{k}"
        if cand not in avoid:
            return cand
    raise AssertionError


def substitute(f, x: str, e):
    """Replace free occurrences of classical variable ``x`` by the expression ``e``."""
    if isinstance(f, (A.Num, A.Var, A.App)):
        return subst_aexp(f, x, e)
    if isinstance(f, A.Pred):
        return A.Pred(f.op, tuple(subst_aexp(b, x, e) for b in f.args))
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return type(f)(substitute(f.left, x, e), substitute(f.right, x, e))
    if isinstance(f, A.Not):
        return A.Not(substitute(f.body, x, e))
    if isinstance(f, A.Forall):
        if f.var == x or x not in classical_vars(f.body):
            return f
        fv = aexp_vars(e)
        if f.var in fv:
            y = _fresh(f.var, fv | classical_vars(f.body) | {x})
            body = substitute(f.body, f.var, A.Var(y))
            return A.Forall(y, substitute(body, x, e))
        return A.Forall(f.var, substitute(f.body, x, e))
    if isinstance(f, A.Single):
        return A.Single(substitute(f.formula, x, e))
    if isinstance(f, A.Weighted):
        return A.Weighted(tuple((w, substitute(g, x, e)) for w, g in f.comps))
    if isinstance(f, A.Unweighted):
        return A.Unweighted(tuple(substitute(g, x, e) for g in f.comps))
    return f


def subst_command(c, x: str, e):
    """Substitute an expression for a read-only parameter inside a macro body."""
    if isinstance(c, A.Assign):
        return A.Assign(c.var, subst_aexp(c.expr, x, e))
    if isinstance(c, A.Random):
        return A.Random(c.var, subst_aexp(c.lo, x, e), subst_aexp(c.hi, x, e))
    if isinstance(c, A.Seq):
        return A.Seq(tuple(subst_command(d, x, e) for d in c.cmds))
    if isinstance(c, A.If):
        return A.If(substitute(c.cond, x, e), subst_command(c.then, x, e), subst_command(c.orelse, x, e))
    if isinstance(c, A.While):
        return A.While(substitute(c.cond, x, e), subst_command(c.body, x, e))
    if isinstance(c, A.Unitary):
        g = c.gate
        return A.Unitary(A.GateRef(g.name, tuple(subst_aexp(a, x, e) for a in g.args), g.power, g.dagger), c.qvars)
    if isinstance(c, A.Call):
        return A.Call(c.result, c.name, tuple(subst_aexp(a, x, e) for a in c.args))
    return c


def expand_call(call: A.Call, program: A.Program, stack: tuple = ()):
    """Inline a macro call, rejecting recursion."""
    m = program.macro(call.name)
    if m is None:
        raise EvalError(f"unknown macro {call.name}")
    if call.name in stack:
        raise EvalError(f"recursive macro {call.name}")
    if len(call.args) != len(m.params):
        raise EvalError(f"{call.name} expects {len(m.params)} arguments")
    body = m.body
    written = mod_vars(body, program)
    for p, a in zip(m.params, call.args):
        if p in written:
            raise EvalError(f"macro {call.name} assigns its parameter {p}")
        if a != A.Var(p):
            body = subst_command(body, p, a)
    body = _expand_all(body, program, stack + (call.name,))
    if call.result and m.result and call.result != m.result:
        body = A.seq(body, A.Assign(call.result, A.Var(m.result)))
    return body


def _expand_all(c, program, stack):
    if isinstance(c, A.Call):
        return expand_call(c, program, stack)
    if isinstance(c, A.Seq):
        return A.seq(*[_expand_all(d, program, stack) for d in c.cmds])
    if isinstance(c, A.If):
        return A.If(c.cond, _expand_all(c.then, program, stack), _expand_all(c.orelse, program, stack))
    if isinstance(c, A.While):
        return A.While(c.cond, _expand_all(c.body, program, stack))
    return c


def expand_macros(c, program: A.Program):
    return _expand_all(c, program, ())


# ---------------------------------------------------------------- classical evaluation


def eval_aexp(a, sigma) -> int:
    if isinstance(a, A.Num):
        return a.value
    if isinstance(a, A.Var):
        return sigma.get(a.name, 0)
    return apply_function(a.fn, [eval_aexp(b, sigma) for b in a.args])


class _Bound:
    """Overlay a bound variable on a classical state."""

    def __init__(self, base, var, value):
        self.base, self.var, self.value = base, var, value

    def get(self, name, default=0):
        return self.value if name == self.var else self.base.get(name, default)


def eval_pure(f, sigma, window=FORALL_WINDOW) -> bool:
    """Evaluate a pure (ket-free) formula; ``forall`` ranges over ``window``."""
    if isinstance(f, A.Const):
        return f.value
    if isinstance(f, A.Pred):
        return apply_predicate(f.op, [eval_aexp(b, sigma) for b in f.args])
    if isinstance(f, (A.And, A.Odot)):
        return eval_pure(f.left, sigma, window) and eval_pure(f.right, sigma, window)
    if isinstance(f, A.Or):
        return eval_pure(f.left, sigma, window) or eval_pure(f.right, sigma, window)
    if isinstance(f, A.Not):
        return not eval_pure(f.body, sigma, window)
    if isinstance(f, A.Forall):
        lo, hi = window
        return all(eval_pure(f.body, _Bound(sigma, f.var, v), window) for v in range(lo, hi + 1))
    raise TypeError(f"not a pure formula: {type(f).__name__}")


def is_pure(f) -> bool:
    if isinstance(f, (A.Const, A.Pred)):
        return True
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return is_pure(f.left) and is_pure(f.right)
    if isinstance(f, (A.Not, A.Forall)):
        return is_pure(f.body)
    return False


def has_forall(f) -> bool:
    if isinstance(f, A.Forall):
        return True
    if isinstance(f, (A.And, A.Or, A.Odot)):
        return has_forall(f.left) or has_forall(f.right)
    if isinstance(f, A.Not):
        return has_forall(f.body)
    if isinstance(f, (A.Single, A.Weighted, A.Unweighted)):
        return any(has_forall(g) for g in A.components(f))
    return False
