"""Pretty printer; ``parse(pretty(t)) == t`` for every well-formed tree."""
from __future__ import annotations

from fractions import Fraction

from . import ast as A
from .builtins import INFIX

_APREC = {"+": 1, "-": 1, "*": 2, "div": 2, "mod": 2}


def aexp(e, prec: int = 0) -> str:
    if isinstance(e, A.Num):
        s = str(e.value)
        return f"({s})" if e.value < 0 and prec > 0 else s
    if isinstance(e, A.Var):
        return e.name
    if e.fn == "neg":
        inner = aexp(e.args[0], 3)
        s = f"-{inner}" if not inner.startswith("-") else f"-({inner})"
        return f"({s})" if prec > 0 else s
    if e.fn in INFIX:
        p = _APREC[e.fn]
        s = f"{aexp(e.args[0], p)} {e.fn} {aexp(e.args[1], p + 1)}"
        return f"({s})" if p < prec else s
    return f"{e.fn}({', '.join(aexp(a) for a in e.args)})"


def amplitude(z: complex) -> str:
    z = complex(z)
    if z.imag == 0:
        return repr(z.real)
    if z.real == 0:
        return repr(z.imag) + "j"
    return repr(z)


def _label(idx: int, width: int) -> str:
    return format(idx, f"0{width}b") if width else ""


def _subscript(qvars) -> str:
    if len(qvars) == 1:
        return "_" + qvars[0]
    return "_{" + " ".join(qvars) + "}"


def qexpr(q) -> str:
    if isinstance(q, A.QTensor):
        return f"{qexpr(q.left)} {qexpr(q.right)}"
    w = len(q.qvars)
    if len(q.terms) == 1 and q.terms[0][1] == 1:
        return f"|{_label(q.terms[0][0], w)}>{_subscript(q.qvars)}"
    parts = []
    for k, (idx, amp) in enumerate(q.terms):
        a = amplitude(amp)
        if k and a.startswith("-") and "j" not in a:
            parts.append(f"- {a[1:]}|{_label(idx, w)}>")
        else:
            parts.append(("+ " if k else "") + f"{a}|{_label(idx, w)}>")
    return "(" + " ".join(parts) + ")" + _subscript(q.qvars)


# precedence: forall/-> 0, \/ 1, (.) 2, /\ 3, ~ 4, atom 5
def formula(f, prec: int = 0) -> str:
    if isinstance(f, A.Const):
        return "true" if f.value else "false"
    if isinstance(f, A.Pred):
        s = f"{aexp(f.args[0])} {f.op} {aexp(f.args[1])}"
        return f"({s})" if prec > 4 else s
    if isinstance(f, A.Ket):
        return qexpr(f.expr)
    if isinstance(f, A.Forall):
        s = f"forall {f.var}. {formula(f.body, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(f, A.Not):
        return "~" + formula(f.body, 5)
    ops = {A.Or: ("\\/", 1), A.Odot: ("(.)", 2), A.And: ("/\\", 3)}
    sym, p = ops[type(f)]
    s = f"{formula(f.left, p)} {sym} {formula(f.right, p + 1)}"
    return f"({s})" if p < prec else s


def weight(w: Fraction) -> str:
    return str(w.numerator) if w.denominator == 1 else f"{w.numerator}/{w.denominator}"


def dist(d) -> str:
    if isinstance(d, A.Single):
        return formula(d.formula)
    if isinstance(d, A.Weighted):
        return " (+) ".join(f"{weight(w)} ({formula(f)})" for w, f in d.comps)
    return " (+) ".join(f"({formula(f)})" for f in d.comps)


def gateref(g: A.GateRef) -> str:
    s = g.name
    if g.args:
        s += "(" + ", ".join(aexp(a) for a in g.args) + ")"
    if g.dagger:
        s += "^dag"
    if g.power != 1:
        s += f"^{g.power}"
    return s


def command(c, indent: int = 0) -> str:
    pad = "  " * indent
    if isinstance(c, A.Seq):
        return ";\n".join(command(d, indent) for d in c.cmds)
    if isinstance(c, A.Skip):
        return pad + "skip"
    if isinstance(c, A.Abort):
        return pad + "abort"
    if isinstance(c, A.Assign):
        return f"{pad}{c.var} := {aexp(c.expr)}"
    if isinstance(c, A.Random):
        return f"{pad}{c.var} := random({aexp(c.lo)}, {aexp(c.hi)})"
    if isinstance(c, A.QInit):
        return f"{pad}{', '.join(c.qvars)} := |0>"
    if isinstance(c, A.Unitary):
        return f"{pad}{gateref(c.gate)}[{', '.join(c.qvars)}]"
    if isinstance(c, A.Measure):
        return f"{pad}{c.var} := {c.meas}[{', '.join(c.qvars)}]"
    if isinstance(c, A.Call):
        call = f"{c.name}({', '.join(aexp(a) for a in c.args)})"
        return f"{pad}{c.result} := {call}" if c.result else pad + call
    if isinstance(c, A.If):
        return (f"{pad}if {formula(c.cond)} then\n{command(c.then, indent + 1)}\n"
                f"{pad}else\n{command(c.orelse, indent + 1)}\n{pad}fi")
    if isinstance(c, A.While):
        return f"{pad}while {formula(c.cond)} do\n{command(c.body, indent + 1)}\n{pad}od"
    raise TypeError(type(c).__name__)


def command_inline(c) -> str:
    return " ".join(line.strip() for line in command(c).splitlines())


def _matrix_text(rows) -> str:
    return "\n".join("  " + " ".join(amplitude(z) if complex(z).imag == 0 else repr(complex(z)).strip("()") for z in row)
                     for row in rows)


def declaration(d) -> str:
    if isinstance(d, A.GateDecl):
        if d.kind == "matrix":
            return f"gate {d.name} = {{{{\n{_matrix_text(d.data)}\n}}}}"
        if d.kind == "perm":
            return f"gate {d.name} = perm [{' '.join(map(str, d.data))}]"
        if d.kind == "ctrlpow":
            k, base = d.data
            return f"gate {d.name} = ctrlpow({k}) {gateref(base)}"
        return f'gate {d.name} from "{d.data}"'
    if isinstance(d, A.MeasDecl):
        if d.elements is None:
            return f"measurement {d.name} = std({d.arity})"
        els = []
        for el in d.elements:
            parts = []
            for k, (amp, ket, bra) in enumerate(el):
                a = "" if amp == 1 else amplitude(amp) + " "
                parts.append(("+ " if k else "") + f"{a}|{ket}><{bra}|")
            els.append(" ".join(parts))
        return f"measurement {d.name} on {d.arity} = {{ {', '.join(els)} }}"
    if isinstance(d, A.MacroDecl):
        ret = f" returns {d.result}" if d.result else ""
        return f"def {d.name}({', '.join(d.params)}){ret} do\n{command(d.body, 1)}\nod"
    raise TypeError(type(d).__name__)


def program(p: A.Program) -> str:
    lines = []
    if p.qvars:
        lines.append("qvar " + ", ".join(p.qvars) + ";")
    if p.init:
        lines.append("init " + ", ".join(f"{x} = {v}" for x, v in p.init) + ";")
    for d in p.gates + p.measurements + p.macros:
        lines.append(declaration(d) + ";")
    lines.append(command(p.body))
    return "\n".join(lines) + "\n"


def pretty(x) -> str:
    if isinstance(x, A.Program):
        return program(x)
    if isinstance(x, (A.Single, A.Weighted, A.Unweighted)):
        return dist(x)
    if isinstance(x, (A.Num, A.Var, A.App)):
        return aexp(x)
    from .analysis import is_command

    if is_command(x):
        return command(x)
    return formula(x)
