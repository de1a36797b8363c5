"""Recursive-descent parser for programs and assertions."""
from __future__ import annotations

import cmath
import math
import os
from fractions import Fraction

import numpy as np

from .. import qcore
from . import ast as A
from .analysis import substitute
from .builtins import FUNCTIONS
from .lexer import ParseError, Token, tokenize

KEYWORDS = {"skip", "abort", "if", "then", "else", "fi", "while", "do", "od", "true", "false",
            "forall", "qvar", "gate", "measurement", "def", "returns", "init", "random", "by",
            "with", "div", "mod"}
REL_OPS = {"=", "/=", "<", "<=", ">", ">=", "|"}
FIXED_ARITY = {"H": 1, "X": 1, "Y": 1, "Z": 1, "I": 1, "S": 1, "T": 1, "CNOT": 2, "CZ": 2, "SWAP": 2}
NORM_TOL = 1e-9

_KET_CHARS = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
}


def ket_label_vector(label: str) -> np.ndarray:
    v = np.ones(1, dtype=complex)
    for ch in label:
        v = np.kron(v, _KET_CHARS[ch])
    return v


def _basis_index(label: str, tok: Token) -> int:
    if any(ch not in "01" for ch in label):
        raise ParseError(f"expected a computational basis label, got |{label}>", tok.line, tok.col)
    return int(label, 2)


class Parser:
    def __init__(self, src: str, program: A.Program | None = None):
        self.toks = tokenize(src)
        self.i = 0
        self.program = program
        self.macros = {m.name for m in program.macros} if program else set()
        self.meas_arity = {m.name: m.arity for m in program.measurements} if program else {}
        self.gate_decls = {g.name: g for g in program.gates} if program else {}

    # ------------------------------------------------------------ token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def at(self, value, kind="OP") -> bool:
        t = self.tok
        if kind == "IDENT":
            return t.kind == "IDENT" and t.value == value
        return t.kind == kind and t.value == value

    def at_kw(self, word: str) -> bool:
        return self.tok.kind == "IDENT" and self.tok.value == word

    def accept(self, value, kind="OP") -> bool:
        if self.at(value, kind):
            self.i += 1
            return True
        return False

    def accept_kw(self, word: str) -> bool:
        return self.accept(word, "IDENT")

    def expect(self, value, kind="OP") -> Token:
        if not self.at(value, kind):
            self.error(f"expected {value!r}")
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        return self.expect(word, "IDENT")

    def error(self, msg: str):
        t = self.tok
        found = "end of input" if t.kind == "EOF" else repr(t.value)
        raise ParseError(f"{msg}, found {found}", t.line, t.col)

    def ident(self) -> str:
        t = self.tok
        if t.kind != "IDENT" or t.value in KEYWORDS:
            self.error("expected an identifier")
        self.i += 1
        return t.value

    def integer(self) -> int:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "NUM" or not t.value.isdigit():
            self.error("expected an integer")
        self.i += 1
        return -int(t.value) if neg else int(t.value)

    def done(self):
        if self.tok.kind != "EOF":
            self.error("unexpected trailing input")

    # ------------------------------------------------------------ arithmetic

    def aexp(self):
        left = self.aterm()
        while self.tok.kind == "OP" and self.tok.value in ("+", "-"):
            op = self.advance().value
            left = A.App(op, (left, self.aterm()))
        return left

    def aterm(self):
        left = self.aunary()
        while (self.tok.kind == "OP" and self.tok.value == "*") or self.at_kw("div") or self.at_kw("mod"):
            op = self.advance().value
            left = A.App(op, (left, self.aunary()))
        return left

    def aunary(self):
        if self.accept("-"):
            inner = self.aunary()
            if isinstance(inner, A.Num):
                return A.Num(-inner.value)
            return A.App("neg", (inner,))
        return self.aatom()

    def aatom(self):
        t = self.tok
        if t.kind == "NUM":
            if not t.value.isdigit():
                self.error("classical expressions are integers")
            self.i += 1
            return A.Num(int(t.value))
        if t.kind == "IDENT" and t.value not in KEYWORDS:
            self.i += 1
            if self.at("("):
                if t.value not in FUNCTIONS:
                    raise ParseError(f"unknown function {t.value}", t.line, t.col)
                args = self.aexp_args()
                if len(args) != FUNCTIONS[t.value][0]:
                    raise ParseError(f"{t.value} expects {FUNCTIONS[t.value][0]} arguments", t.line, t.col)
                return A.App(t.value, args)
            return A.Var(t.value)
        if self.accept("("):
            e = self.aexp()
            self.expect(")")
            return e
        self.error("expected an expression")

    def aexp_args(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.aexp())
            while self.accept(","):
                args.append(self.aexp())
        self.expect(")")
        return tuple(args)

    # ------------------------------------------------------------ amplitudes

    def amp_expr(self) -> complex:
        v = self.amp_term()
        while self.tok.kind == "OP" and self.tok.value in ("+", "-"):
            op = self.advance().value
            w = self.amp_term()
            v = v + w if op == "+" else v - w
        return v

    def amp_term(self) -> complex:
        v = self.amp_factor()
        while self.tok.kind == "OP" and self.tok.value in ("*", "/"):
            op = self.advance().value
            w = self.amp_factor()
            if op == "/":
                if w == 0:
                    self.error("division by zero in amplitude")
                v = v / w
            else:
                v = v * w
        return v

    def amp_factor(self) -> complex:
        t = self.tok
        if self.accept("-"):
            return -self.amp_factor()
        if t.kind == "NUM":
            self.i += 1
            return complex(t.value) if t.value.endswith("j") else complex(float(t.value))
        if t.kind == "IDENT":
            if t.value == "pi":
                self.i += 1
                return complex(math.pi)
            if t.value == "i":
                self.i += 1
                return 1j
            if t.value in ("sqrt", "exp", "cos", "sin"):
                self.i += 1
                self.expect("(")
                v = self.amp_expr()
                self.expect(")")
                fn = {"sqrt": cmath.sqrt, "exp": cmath.exp, "cos": cmath.cos, "sin": cmath.sin}[t.value]
                return complex(fn(v))
        if self.accept("("):
            v = self.amp_expr()
            self.expect(")")
            return v
        self.error("expected an amplitude")

    # ------------------------------------------------------------ quantum expressions

    def _matching_paren(self, start: int) -> int:
        depth = 0
        for k in range(start, len(self.toks)):
            t = self.toks[k]
            if t.kind == "OP" and t.value == "(":
                depth += 1
            elif t.kind == "OP" and t.value == ")":
                depth -= 1
                if depth == 0:
                    return k
        return -1

    def at_amp_group(self) -> bool:
        if not self.at("("):
            return False
        end = self._matching_paren(self.i)
        if end < 0 or self.toks[end + 1].kind != "SUB":
            return False
        return any(t.kind == "KET" for t in self.toks[self.i:end])

    def at_qfactor(self) -> bool:
        return self.tok.kind == "KET" or self.at_amp_group()

    def _check_vars(self, qvars: tuple, tok: Token):
        if len(set(qvars)) != len(qvars):
            raise ParseError(f"repeated quantum variable in {list(qvars)}", tok.line, tok.col)
        for q in qvars:
            if q in KEYWORDS:
                raise ParseError(f"{q} is a keyword", tok.line, tok.col)

    def _make_lit(self, qvars: tuple, vec: np.ndarray, tok: Token) -> A.QLit:
        nrm = float(np.vdot(vec, vec).real)
        if abs(nrm - 1) > NORM_TOL:
            raise ParseError(f"quantum expression has squared norm {nrm:.12g}, expected 1", tok.line, tok.col)
        return A.QLit.from_vector(qvars, vec)

    def qfactor(self) -> A.QLit:
        t = self.tok
        if t.kind == "KET":
            self.i += 1
            if self.tok.kind != "SUB":
                raise ParseError(f"ket |{t.value}> needs a variable subscript", t.line, t.col)
            qvars = self.advance().value
            self._check_vars(qvars, t)
            if len(t.value) != len(qvars):
                raise ParseError(f"ket |{t.value}> does not match {len(qvars)} variables", t.line, t.col)
            return self._make_lit(qvars, ket_label_vector(t.value), t)
        self.expect("(")
        terms = []
        sign = 1
        if self.accept("-"):
            sign = -1
        elif self.accept("+"):
            pass
        while True:
            amp = 1 + 0j
            if self.tok.kind != "KET":
                amp = self.amp_term()
            kt = self.tok
            if kt.kind != "KET":
                self.error("expected a ket")
            self.i += 1
            terms.append((kt, sign * amp))
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            else:
                break
        self.expect(")")
        if self.tok.kind != "SUB":
            self.error("expected a variable subscript")
        qvars = self.advance().value
        self._check_vars(qvars, t)
        vec = np.zeros(2 ** len(qvars), dtype=complex)
        for kt, amp in terms:
            if len(kt.value) != len(qvars):
                raise ParseError(f"ket |{kt.value}> does not match {len(qvars)} variables", kt.line, kt.col)
            vec = vec + amp * ket_label_vector(kt.value)
        return self._make_lit(qvars, vec, t)

    def qexpr(self):
        t = self.tok
        e = self.qfactor()
        seen = set(e.qvars)
        while self.at_qfactor():
            f = self.qfactor()
            if seen & set(f.qvars):
                raise ParseError("tensor product of overlapping quantum expressions", t.line, t.col)
            seen |= set(f.qvars)
            e = A.QTensor(e, f)
        return e

    # ------------------------------------------------------------ formulas

    def formula(self):
        if self.accept_kw("forall"):
            x = self.ident()
            self.expect(".")
            return A.Forall(x, self.formula())
        return self.f_impl()

    def f_impl(self):
        left = self.f_or()
        if self.accept("->"):
            return A.Or(A.Not(left), self.f_impl())
        return left

    def f_or(self):
        left = self.f_odot()
        while self.accept("\\/"):
            left = A.Or(left, self.f_odot())
        return left

    def f_odot(self):
        left = self.f_and()
        while self.accept("(.)"):
            right = self.f_and()
            self._check_odot(left, right)
            left = A.Odot(left, right)
        return left

    def _check_odot(self, left, right):
        from .analysis import free_vars

        common = free_vars(left) & free_vars(right)
        if common:
            t = self.toks[self.i - 1]
            raise ParseError(f"(.) operands share free variables {sorted(common)}", t.line, t.col)

    def f_and(self):
        left = self.f_unary()
        while self.accept("/\\"):
            left = A.And(left, self.f_unary())
        return left

    def f_unary(self):
        if self.accept("~"):
            return A.Not(self.f_unary())
        if self.at_kw("forall"):
            return self.formula()
        f = self.f_primary()
        while self.at("[") and self._at_subst():
            self.expect("[")
            e = self.aexp()
            self.expect("/")
            x = self.ident()
            self.expect("]")
            f = substitute(f, x, e)
        return f

    def _at_subst(self) -> bool:
        depth = 0
        for k in range(self.i, len(self.toks)):
            t = self.toks[k]
            if t.kind == "OP" and t.value == "[":
                depth += 1
            elif t.kind == "OP" and t.value == "]":
                depth -= 1
                if depth == 0:
                    return False
            elif depth == 1 and t.kind == "OP" and t.value == "/":
                return True
        return False

    def f_primary(self):
        if self.accept_kw("true"):
            return A.TRUE
        if self.accept_kw("false"):
            return A.FALSE
        if self.at_qfactor():
            return A.Ket(self.qexpr())
        if self.at("("):
            save = self.i
            try:
                self.advance()
                f = self.formula()
                self.expect(")")
                if not (self.tok.kind == "OP" and self.tok.value in REL_OPS):
                    return f
            except ParseError:
                pass
            self.i = save
        return self.comparison()

    def comparison(self):
        left = self.aexp()
        t = self.tok
        if not (t.kind == "OP" and t.value in REL_OPS):
            self.error("expected a comparison operator")
        out = None
        while self.tok.kind == "OP" and self.tok.value in REL_OPS:
            op = self.advance().value
            right = self.aexp()
            atom = A.Pred(op, (left, right))
            out = atom if out is None else A.And(out, atom)
            left = right
        return out

    def guard(self):
        from .analysis import is_pure

        t = self.tok
        f = self.formula()
        if not is_pure(f):
            raise ParseError("guards must be classical (no quantum expressions)", t.line, t.col)
        return f

    # ------------------------------------------------------------ distribution formulas

    def _at_weight(self) -> bool:
        t = self.tok
        if t.kind != "NUM" or t.value.endswith("j"):
            return False
        k = self.i + 1
        if self.toks[k].kind == "OP" and self.toks[k].value == "/":
            if self.toks[k + 1].kind != "NUM":
                return False
            k += 2
        return self.toks[k].kind == "OP" and self.toks[k].value == "("

    def weight(self) -> Fraction:
        t = self.advance()
        w = Fraction(t.value)
        if self.accept("/"):
            d = self.advance()
            w = w / Fraction(d.value)
        if w < 0 or w > 1:
            raise ParseError(f"weight {w} outside [0, 1]", t.line, t.col)
        return w

    def dist(self):
        t = self.tok
        comps = []
        while True:
            if self._at_weight():
                w = self.weight()
                self.expect("(")
                f = self.formula()
                self.expect(")")
                comps.append((w, f))
            else:
                comps.append((None, self.formula()))
            if not self.accept("(+)"):
                break
        weighted = [w is not None for w, _ in comps]
        if all(weighted):
            total = sum(w for w, _ in comps)
            if total != 1:
                raise ParseError(f"weights sum to {total}, expected 1", t.line, t.col)
            return A.Weighted(tuple(comps))
        if any(weighted):
            raise ParseError("mixing weighted and unweighted components", t.line, t.col)
        if len(comps) == 1:
            return A.Single(comps[0][1])
        return A.Unweighted(tuple(f for _, f in comps))

    # ------------------------------------------------------------ commands

    def qvar_list(self) -> tuple:
        t = self.tok
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        self._check_vars(tuple(out), t)
        return tuple(out)

    def gateref(self) -> A.GateRef:
        t = self.tok
        name = self.ident()
        args = ()
        if self.at("("):
            args = self.aexp_args()
        power, dagger = 1, False
        while self.accept("^"):
            if self.accept_kw("dag"):
                dagger = not dagger
            else:
                k = self.integer()
                if k < 1:
                    raise ParseError("tensor power must be positive", t.line, t.col)
                power *= k
        return A.GateRef(name, args, power, dagger)

    def _check_gate_arity(self, g: A.GateRef, n: int, tok: Token):
        base = None
        if g.name in FIXED_ARITY:
            base = FIXED_ARITY[g.name]
        elif g.name in ("QFT", "QFTinv", "Uplus") and g.args and isinstance(g.args[0], A.Num):
            base = g.args[0].value
        elif g.name in self.gate_decls:
            base = gate_decl_arity(self.gate_decls[g.name])
        elif g.name not in qcore.BUILTIN_GATES and self.program is not None:
            raise ParseError(f"unknown gate {g.name}", tok.line, tok.col)
        if base is not None and base * g.power != n:
            raise ParseError(f"gate {g.name} of arity {base * g.power} applied to {n} qubits", tok.line, tok.col)

    def command(self):
        t = self.tok
        if self.accept_kw("skip"):
            return A.Skip()
        if self.accept_kw("abort"):
            return A.Abort()
        if self.accept_kw("if"):
            b = self.guard()
            self.expect_kw("then")
            c1 = self.commands()
            c2 = A.Skip()
            if self.accept_kw("else"):
                c2 = self.commands()
            self.expect_kw("fi")
            return A.If(b, c1, c2)
        if self.accept_kw("while"):
            b = self.guard()
            self.expect_kw("do")
            body = self.commands()
            self.expect_kw("od")
            return A.While(b, body)
        if t.kind != "IDENT" or t.value in KEYWORDS:
            self.error("expected a command")
        nxt = self.peek()
        if nxt.kind == "OP" and nxt.value == ",":
            qs = self.qvar_list()
            self.expect(":=")
            self._init_ket(len(qs))
            return A.QInit(qs)
        if nxt.kind == "OP" and nxt.value == ":=":
            x = self.ident()
            self.advance()
            if self.tok.kind == "KET":
                self._init_ket(1)
                return A.QInit((x,))
            if self.accept_kw("random"):
                self.expect("(")
                lo = self.aexp()
                self.expect(",")
                hi = self.aexp()
                self.expect(")")
                return A.Random(x, lo, hi)
            h = self.tok
            if h.kind == "IDENT" and self.peek().kind == "OP" and self.peek().value == "[":
                m = self.ident()
                self.expect("[")
                qs = self.qvar_list()
                self.expect("]")
                self._check_meas(m, len(qs), h)
                return A.Measure(x, m, qs)
            if (h.kind == "IDENT" and h.value not in FUNCTIONS and h.value not in KEYWORDS
                    and self.peek().kind == "OP" and self.peek().value == "("):
                if self.program is not None and h.value not in self.macros:
                    raise ParseError(f"unknown function or macro {h.value}", h.line, h.col)
                name = self.ident()
                return A.Call(x, name, self.aexp_args())
            return A.Assign(x, self.aexp())
        # gate application or bare macro call
        save = self.i
        name = t.value
        if (name in self.macros or (self.program is None and name not in qcore.BUILTIN_GATES)) and nxt.kind == "OP" and nxt.value == "(":
            self.advance()
            args = self.aexp_args()
            if not (self.at("[") or self.at("^")):
                return A.Call(None, name, args)
            self.i = save
        g = self.gateref()
        self.expect("[")
        qs = self.qvar_list()
        self.expect("]")
        self._check_gate_arity(g, len(qs), t)
        return A.Unitary(g, qs)

    def _init_ket(self, n: int):
        t = self.tok
        if t.kind != "KET" or set(t.value) != {"0"} or len(t.value) not in (1, n):
            raise ParseError("initialisation must be to |0>", t.line, t.col)
        self.i += 1

    def _check_meas(self, m: str, n: int, tok: Token):
        if m in self.meas_arity:
            if self.meas_arity[m] != n:
                raise ParseError(f"measurement {m} of arity {self.meas_arity[m]} applied to {n} qubits", tok.line, tok.col)
        elif m != "M" and self.program is not None:
            raise ParseError(f"unknown measurement {m}", tok.line, tok.col)

    _STOP = {"od", "fi", "else"}

    def commands(self):
        cmds = [self.command()]
        while self.accept(";"):
            if self.tok.kind == "EOF" or (self.tok.kind == "IDENT" and self.tok.value in self._STOP):
                break
            cmds.append(self.command())
        return A.seq(*cmds)

    # ------------------------------------------------------------ declarations

    def gate_decl(self) -> A.GateDecl:
        t = self.tok
        name = self.ident()
        if self.accept_kw("from"):
            path = self.expect_kind("STRING").value
            return A.GateDecl(name, "file", path)
        self.expect("=")
        if self.tok.kind == "MATRIX":
            raw = self.advance().value
            try:
                op = qcore.load_gate(raw, name)
            except qcore.QuantumError as exc:
                raise ParseError(str(exc), t.line, t.col) from None
            return A.GateDecl(name, "matrix", tuple(tuple(complex(z) for z in row) for row in op.matrix))
        if self.accept_kw("perm"):
            self.expect("[")
            images = []
            while not self.at("]"):
                images.append(self.integer())
                self.accept(",")
            self.expect("]")
            n = len(images)
            if sorted(images) != list(range(n)) or n & (n - 1) or n < 2:
                raise ParseError(f"gate {name}: not a permutation of 0..2^k-1", t.line, t.col)
            return A.GateDecl(name, "perm", tuple(images))
        if self.accept_kw("ctrlpow"):
            self.expect("(")
            k = self.integer()
            self.expect(")")
            base = self.gateref()
            return A.GateDecl(name, "ctrlpow", (k, base))
        self.error("expected a gate definition")

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind != kind:
            self.error(f"expected {kind.lower()}")
        return self.advance()

    def meas_decl(self) -> A.MeasDecl:
        t = self.tok
        name = self.ident()
        arity = None
        if self.accept_kw("on"):
            arity = self.integer()
        self.expect("=")
        if self.accept_kw("std"):
            self.expect("(")
            k = self.integer()
            self.expect(")")
            if arity is not None and arity != k:
                raise ParseError("arity mismatch in measurement declaration", t.line, t.col)
            return A.MeasDecl(name, k, None)
        self.expect("{")
        elements = [self.meas_element()]
        while self.accept(","):
            elements.append(self.meas_element())
        self.expect("}")
        widths = {len(lbl) for el in elements for _, lbl, _ in el}
        if len(widths) != 1:
            raise ParseError("measurement operators have inconsistent widths", t.line, t.col)
        k = widths.pop()
        if arity is not None and arity != k:
            raise ParseError("arity mismatch in measurement declaration", t.line, t.col)
        decl = A.MeasDecl(name, k, tuple(elements))
        try:
            meas_collection(decl).check_complete()
        except qcore.QuantumError as exc:
            raise ParseError(str(exc), t.line, t.col) from None
        return decl

    def meas_element(self) -> tuple:
        terms = []
        sign = 1
        while True:
            amp = 1 + 0j
            if self.tok.kind != "KET":
                amp = self.amp_term()
            k = self.expect_kind("KET")
            b = self.expect_kind("BRA")
            if len(k.value) != len(b.value):
                raise ParseError("ket and bra widths differ", k.line, k.col)
            terms.append((sign * amp, k.value, b.value))
            if self.accept("+"):
                sign = 1
            elif self.accept("-"):
                sign = -1
            else:
                return tuple(terms)

    def macro_decl(self) -> A.MacroDecl:
        name = self.ident()
        self.expect("(")
        params = []
        if not self.at(")"):
            params.append(self.ident())
            while self.accept(","):
                params.append(self.ident())
        self.expect(")")
        result = self.ident() if self.accept_kw("returns") else None
        self.expect_kw("do")
        self.macros.add(name)
        body = self.commands()
        self.expect_kw("od")
        return A.MacroDecl(name, tuple(params), result, body)

    def declarations(self) -> dict:
        decls = {"qvars": [], "gates": [], "measurements": [], "macros": [], "init": []}
        while True:
            if self.accept_kw("qvar"):
                decls["qvars"].extend(self.qvar_list())
            elif self.accept_kw("gate"):
                g = self.gate_decl()
                decls["gates"].append(g)
                self.gate_decls[g.name] = g
            elif self.accept_kw("measurement"):
                m = self.meas_decl()
                decls["measurements"].append(m)
                self.meas_arity[m.name] = m.arity
            elif self.accept_kw("def"):
                decls["macros"].append(self.macro_decl())
            elif self.accept_kw("init"):
                while True:
                    x = self.ident()
                    self.expect("=")
                    decls["init"].append((x, self.integer()))
                    if not self.accept(","):
                        break
            else:
                return decls
            self.accept(";")

    def program_(self, source_dir=None) -> A.Program:
        self.program = A.Program(A.Skip())  # enable strict name resolution
        decls = self.declarations()
        self.program = A.Program(A.Skip(), gates=tuple(decls["gates"]),
                                 measurements=tuple(decls["measurements"]), macros=tuple(decls["macros"]))
        body = self.commands()
        self.done()
        qvars = tuple(decls["qvars"])
        used = _used_qvars(body) + [q for m in decls["macros"] for q in _used_qvars(m.body)]
        for q in used:
            if q not in qvars:
                qvars += (q,)
        return A.Program(body, qvars, tuple(decls["gates"]), tuple(decls["measurements"]),
                         tuple(decls["macros"]), tuple(decls["init"]), source_dir)


def _used_qvars(c) -> list[str]:
    out: list[str] = []

    def walk(d):
        if isinstance(d, (A.QInit, A.Unitary, A.Measure)):
            for q in d.qvars:
                if q not in out:
                    out.append(q)
        elif isinstance(d, A.Seq):
            for e in d.cmds:
                walk(e)
        elif isinstance(d, A.If):
            walk(d.then)
            walk(d.orelse)
        elif isinstance(d, A.While):
            walk(d.body)

    walk(c)
    return out


def gate_decl_arity(g: A.GateDecl) -> int | None:
    if g.kind == "matrix":
        return len(g.data).bit_length() - 1
    if g.kind == "perm":
        return len(g.data).bit_length() - 1
    if g.kind == "ctrlpow":
        k, base = g.data
        inner = FIXED_ARITY.get(base.name)
        if inner is None and base.args and base.name in ("QFT", "QFTinv", "Uplus"):
            inner = base.args[0].value
        return None if inner is None else k + inner * base.power
    return None


def meas_collection(decl: A.MeasDecl) -> qcore.MeasurementCollection:
    if decl.elements is None:
        return qcore.std_measurement(decl.arity, decl.name)
    dim = 2 ** decl.arity
    ops = []
    for el in decl.elements:
        m = np.zeros((dim, dim), dtype=complex)
        for amp, k, b in el:
            m += amp * np.outer(ket_label_vector(k), ket_label_vector(b).conj())
        ops.append(m)
    return qcore.MeasurementCollection(decl.name, tuple(ops))


# ---------------------------------------------------------------- entry points


def parse_program(src: str, source_dir: str | None = None) -> A.Program:
    return Parser(src).program_(source_dir)


def parse_program_file(path: str) -> A.Program:
    with open(path) as fh:
        return parse_program(fh.read(), os.path.dirname(os.path.abspath(path)))


def parse_command(src: str, program: A.Program | None = None):
    p = Parser(src, program)
    c = p.commands()
    p.done()
    return c


def parse_formula(src: str):
    p = Parser(src)
    f = p.formula()
    p.done()
    return f


def parse_assertion(src: str):
    """Parse a distribution formula (a single state formula yields ``Single``)."""
    p = Parser(src)
    d = p.dist()
    p.done()
    return d


def parse_aexp(src: str):
    p = Parser(src)
    e = p.aexp()
    p.done()
    return e
