"""Case-study builders: the linear-systems solver and order finding at concrete instances.

Each builder emits program text that re-parses to the same AST, and the HHL builder also
emits proof outlines whose assertions are the instance's exact intermediate states.
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qcore
from .lang import ast as A
from .lang import printer

log = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")


class BuildError(ValueError):
    pass


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


# ---------------------------------------------------------------- HHL


@dataclass
class HHLInstance:
    n: int = 2
    m: int = 1
    A: np.ndarray = field(default_factory=lambda: np.diag([0.25, 0.5]))
    b: np.ndarray = field(default_factory=lambda: np.ones(2) / math.sqrt(2))
    t_evo: float = 2 * math.pi
    C: float = 1.0

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=complex)
        self.b = np.asarray(self.b, dtype=complex)

    @property
    def p(self) -> tuple:
        return tuple(f"p{i}" for i in range(self.n))

    @property
    def q(self) -> tuple:
        return tuple(f"q{i}" for i in range(self.m))

    @property
    def layout(self) -> tuple:
        return self.p + self.q + ("r",)

    def eigen(self):
        w, V = np.linalg.eigh(self.A)
        return w, V

    def phases(self) -> np.ndarray:
        w, _ = self.eigen()
        return w * self.t_evo / (2 * math.pi)

    def validate(self) -> list[str]:
        """Raise on broken invariants; return warnings for inexact phases."""
        dim = 2 ** self.m
        if self.A.shape != (dim, dim):
            raise BuildError(f"A must be {dim}x{dim}")
        if not np.allclose(self.A, self.A.conj().T, atol=1e-9):
            raise BuildError("A is not Hermitian")
        if self.b.shape != (dim,) or abs(np.linalg.norm(self.b) - 1) > 1e-9:
            raise BuildError("b must be a unit vector of matching dimension")
        phi = self.phases()
        if np.any(phi <= 0) or np.any(phi >= 1):
            raise BuildError(f"eigenphases {phi} must lie strictly between 0 and 1")
        scaled = phi * 2 ** self.n
        warnings = []
        if np.any(np.abs(scaled - np.round(scaled)) > 1e-9):
            warnings.append(f"eigenphases {phi} are not multiples of 2^-{self.n}; the result is approximate")
        lo = float(np.min(np.abs(scaled)))
        if not 0 < self.C <= lo + 1e-12:
            raise BuildError(f"C must lie in (0, {lo}]")
        return warnings

    def solution(self) -> np.ndarray:
        """Normalised A^-1 b, by a dense solve."""
        x = np.linalg.solve(self.A, self.b)
        return x / np.linalg.norm(x)


def _unitary_with_first_column(v: np.ndarray) -> np.ndarray:
    dim = len(v)
    q, r = np.linalg.qr(np.column_stack([v, np.eye(dim, dtype=complex)[:, 1:]]))
    q[:, 0] *= r[0, 0] / abs(r[0, 0])
    return q


def _clean(m: np.ndarray, eps: float = 1e-14) -> np.ndarray:
    m = np.array(m, dtype=complex)
    re, im = m.real.copy(), m.imag.copy()
    re[np.abs(re) < eps] = 0.0
    im[np.abs(im) < eps] = 0.0
    return re + 1j * im


def hhl_matrices(inst: HHLInstance) -> dict:
    w, V = inst.eigen()
    U = V @ np.diag(np.exp(1j * w * inst.t_evo)) @ V.conj().T
    N = 2 ** inst.n
    Uc = np.zeros((2 * N, 2 * N), dtype=complex)
    Uc[0, 0] = Uc[1, 1] = 1.0
    for j in range(1, N):
        s = min(1.0, inst.C / j)
        c = math.sqrt(1 - s * s)
        Uc[2 * j:2 * j + 2, 2 * j:2 * j + 2] = [[c, -s], [s, c]]
    return {"Ub": _clean(_unitary_with_first_column(inst.b)), "U": _clean(U), "Uc": _clean(Uc)}


def _regs(qs) -> str:
    return ", ".join(qs)


def hhl_program_text(inst: HHLInstance) -> str:
    mats = hhl_matrices(inst)
    p, q = _regs(inst.p), _regs(inst.q)
    decls = [
        "qvar " + _regs(inst.layout) + ";",
        printer.declaration(A.GateDecl("Ub", "matrix", _rows(mats["Ub"]))) + ";",
        printer.declaration(A.GateDecl("U", "matrix", _rows(mats["U"]))) + ";",
        f"gate Uf = ctrlpow({inst.n}) U;",
        printer.declaration(A.GateDecl("Uc", "matrix", _rows(mats["Uc"]))) + ";",
    ]
    h = f"H^{inst.n}" if inst.n > 1 else "H"
    body = [
        "v := 0;",
        "while v = 0 do",
        f"  {p} := |0>;",
        f"  {q} := |0>;",
        "  r := |0>;",
        f"  Ub[{q}];",
        f"  {h}[{p}];",
        f"  Uf[{p}, {q}];",
        f"  QFTinv[{p}];",
        f"  Uc[{p}, r];",
        f"  QFT[{p}];",
        f"  Uf^dag[{p}, {q}];",
        f"  {h}[{p}];",
        "  v := M[r]",
        "od",
    ]
    return "\n".join(decls + body) + "\n"


def _rows(m: np.ndarray) -> tuple:
    return tuple(tuple(complex(z) for z in row) for row in m)


def build_hhl(inst: HHLInstance | None = None):
    """Return ``(program_text, program, warnings)``."""
    from .lang.parser import parse_program

    inst = inst or HHLInstance()
    warnings = inst.validate()
    for w in warnings:
        log.warning(w)
    text = hhl_program_text(inst)
    return text, parse_program(text), warnings


# ------------------------------------------------ HHL proof outline


def _ket(groups) -> str:
    """Print a product of ``(qvars, vector)`` groups as a ket expression."""
    parts = []
    for qv, vec in groups:
        lit = A.QLit.from_vector(tuple(qv), _clean(vec, 1e-13), 1e-13)
        parts.append(printer.qexpr(lit))
    return " ".join(parts)


def _weight(p: float) -> Fraction:
    return Fraction(p).limit_denominator(10 ** 9)


class _Sim:
    """Amplitude bookkeeping on an ordered register list."""

    def __init__(self, qvars, vec):
        self.qvars = tuple(qvars)
        self.vec = np.asarray(vec, dtype=complex)

    def apply(self, mat, targets):
        pos = [self.qvars.index(t) for t in targets]
        self.vec = qcore.apply_matrix(self.vec, len(self.qvars), mat, pos)
        return self

    def extend(self, qvars, vec):
        return _Sim(self.qvars + tuple(qvars), np.kron(self.vec, vec))


def hhl_body_outline(inst: HHLInstance, program_file: str = "hhl.qimp", header: bool = True) -> str:
    mats = hhl_matrices(inst)
    n, N = inst.n, 2 ** inst.n
    P, Q = inst.p, inst.q
    PQ = P + Q
    plus = np.ones(N, dtype=complex) / math.sqrt(N)
    zero_p = np.eye(N, dtype=complex)[0]
    Uf = qcore.ControlledPower(mats["U"], n).to_matrix()
    qft = qcore.builtin_gate("QFT", arity=n).to_matrix()
    hn = qcore.tensor_power(qcore.builtin_gate("H").to_matrix(), n)
    p, q, h = _regs(P), _regs(Q), (f"H^{n}" if n > 1 else "H")

    s = _Sim(PQ, np.kron(plus, inst.b))
    k_in = s.vec.copy()
    s.apply(Uf, PQ)
    k_uf = s.vec.copy()
    s.apply(qft.conj().T, P)
    k_qpe = s.vec.copy()
    s = s.extend(("r",), np.array([1, 0], dtype=complex))
    full = P + Q + ("r",)
    steps = []
    for label, mat, regs in ((f"Uc[{p}, r]", mats["Uc"], P + ("r",)),
                             (f"QFT[{p}]", qft, P),
                             (f"Uf^dag[{p}, {q}]", Uf.conj().T, PQ),
                             (f"{h}[{p}]", hn, P)):
        s.apply(mat, regs)
        steps.append((label, s.vec.copy()))
    final = s.vec
    r_bit = np.arange(len(final)) % 2
    probs = [float(np.sum(np.abs(final[r_bit == k]) ** 2)) for k in (0, 1)]
    posts = [np.where(r_bit == k, final, 0) / math.sqrt(probs[k]) if probs[k] > 1e-12 else None for k in (0, 1)]
    w0 = _weight(probs[0])
    w1 = 1 - w0
    x = inst.solution()
    goal = _ket([(P, zero_p), (Q, x), (("r",), np.array([0, 1]))])

    L = []
    if header:
        L += [f'program "{program_file}"', ""]
    L += [
        "{ v = 0 }",
        "{ true }",
        "{ true (.) true (.) true }                                   by OdotE",
        f"<=> {{ true }} {p} := |0> {{ {_ket([(P, zero_p)])} }}             by QInit",
        f"<=> {{ true }} {q} := |0> {{ |{'0' * inst.m}>{_sub(Q)} }}            by QInit",
        "<=> { true } r := |0> { |0>_r }                              by QInit",
        f"<=> {{ |{'0' * inst.m}>{_sub(Q)} }} Ub[{q}] {{ {_ket([(Q, inst.b)])} }}   by QUnit",
        f"<=> {{ {_ket([(P, zero_p)])} }} {h}[{p}] {{ |{'+' * n}>{_sub(P)} }}      by QUnit",
        f"{{ {_ket([(PQ, k_in)])} (.) |0>_r }}",
        f"==> {{ {_ket([(PQ, k_in)])} }}",
        f"Uf[{p}, {q}]",
        f"<== {{ {_ket([(PQ, k_uf)])} }}                             by QUnit",
        f"{{ {_ket([(PQ, k_uf)])} |0>_r }}",
        f"QFTinv[{p}]",
        f"{{ {_ket([(PQ, k_qpe)])} |0>_r }}                          by QUnit",
    ]
    for label, vec in steps:
        L += [label, f"{{ {_ket([(full, vec)])} }}   by QUnit"]
    L += [
        f"{{ {_ket([(full, final)])} /\\ (v = 0)[0/v] /\\ (v = 1)[1/v] }}",
        "v := M[r]",
    ]
    comps = []
    if posts[0] is not None:
        comps.append(f"{printer.weight(w0)} ({_ket([(full, posts[0])])} /\\ v = 0)")
    comps.append(f"{printer.weight(w1)} ({_ket([(full, posts[1])])} /\\ v = 1)")
    L.append("{ " + "\n  (+) ".join(comps) + " }   by QMeas")
    if posts[0] is not None:
        L.append(f"{{ ({_ket([(full, posts[0])])} /\\ v = 0)\n  (+) ({_ket([(full, posts[1])])} /\\ v = 1) }}   by Oplus")
        L.append(f"{{ (v = 0) (+) ({_ket([(full, posts[1])])} /\\ v = 1) }}")
    else:
        L.append(f"{{ (v = 0) (+) ({_ket([(full, posts[1])])} /\\ v = 1) }}")
    L.append(f'{{ (v = 0) (+) ({goal} /\\ v = 1) }}   by Fact "success branch equals the normalised solution"')
    return "\n".join(L) + "\n"


def _sub(qs) -> str:
    return "_" + qs[0] if len(qs) == 1 else "_{" + " ".join(qs) + "}"


def hhl_outline(inst: HHLInstance, program_file: str = "hhl.qimp") -> str:
    """Top-level outline for ``{true} HHL {|x>_q}`` with the loop body proved inline."""
    P, Q = inst.p, inst.q
    zero_p = np.eye(2 ** inst.n, dtype=complex)[0]
    x = inst.solution()
    goal = _ket([(P, zero_p), (Q, x), (("r",), np.array([0, 1]))])
    body = hhl_body_outline(inst, header=False).rstrip("\n").splitlines()
    L = [
        f'program "{program_file}"',
        "",
        "{ true }",
        "{ (v = 0)[0/v] }",
        "v := 0",
        "{ v = 0 }                                                    by Assgn",
        f"{{ (v = 0) (+) ({goal} /\\ v = 1) }}                     by Oplus",
        "while v = 0 do",
        *("  " + l for l in body),
        "od",
        f"{{ {goal} /\\ v = 1 }}                                    by While",
        f"{{ {goal} }}",
        "{ " + " (.) ".join([_ket([(P, zero_p)]), _ket([(Q, x)]), "|1>_r"]) + " }                by OdotT",
        f"{{ true (.) {_ket([(Q, x)])} (.) true }}                  by PT",
        f"{{ {_ket([(Q, x)])} }}                                      by OdotE",
    ]
    return "\n".join(L) + "\n"


# ---------------------------------------------------------------- order finding


@dataclass
class OFInstance:
    N: int = 15
    x: int = 7
    t: int = 4
    L: int | None = None
    eps: float = 0.25

    def __post_init__(self):
        if self.L is None:
            self.L = max(1, math.ceil(math.log2(self.N)))

    @property
    def q(self) -> tuple:
        return tuple(f"q{i}" for i in range(self.t))

    @property
    def p(self) -> tuple:
        return tuple(f"p{i}" for i in range(self.L))

    def validate(self):
        if self.N < 3:
            raise BuildError("N must be at least 3")
        if not 2 <= self.x <= self.N - 1:
            raise BuildError("x must lie in [2, N-1]")
        if math.gcd(self.x, self.N) != 1:
            raise BuildError(f"x={self.x} and N={self.N} are not coprime")
        if 2 ** self.L < self.N:
            raise BuildError(f"{self.L} qubits cannot hold residues mod {self.N}")
        if self.t < 1:
            raise BuildError("t must be positive")

    @staticmethod
    def precision_t(N: int, eps: float) -> int:
        """Control-register size that recovers the phase to 2L+1 bits with failure probability at most eps."""
        L = max(1, math.ceil(math.log2(N)))
        return 2 * L + 1 + math.ceil(math.log2(2 + 1 / (2 * eps)))


def of_body_lines(inst: OFInstance, indent: str = "  ", result: str = "z") -> list[str]:
    q, p = _regs(inst.q), _regs(inst.p)
    ht = f"H^{inst.t}" if inst.t > 1 else "H"
    return [
        f"{indent}{q} := |0>;",
        f"{indent}{p} := |0>;",
        f"{indent}{ht}[{q}];",
        f"{indent}Uplus[{p}];",
        f"{indent}CMODMUL(x, N, {inst.t})[{q}, {p}];",
        f"{indent}QFTinv[{q}];",
        f"{indent}z' := M[{q}];",
        f"{indent}{result} := cf_denom(z', {2 ** inst.t}, N);",
        f"{indent}b := pow_mod(x, {result}, N)",
    ]


def of_program_text(inst: OFInstance) -> str:
    lines = [
        f"init N = {inst.N}, x = {inst.x};",
        "z := 1;",
        "b := pow_mod(x, z, N);",
        "while b /= 1 do",
        *of_body_lines(inst),
        "od",
    ]
    return "\n".join(lines) + "\n"


def build_of(inst: OFInstance | None = None):
    """Return ``(program_text, program)``; the controlled multiplier is the built-in permutation gate."""
    from .lang.parser import parse_program

    inst = inst or OFInstance()
    inst.validate()
    text = of_program_text(inst)
    return text, parse_program(text)


def shor_program_text(N: int = 15, t: int = 4) -> str:
    inst = OFInstance(N=N, x=2, t=t)
    body = of_body_lines(inst, "    ")
    lines = [
        f"init N = {N};",
        "def OF(x, N) returns z do",
        "  z := 1;",
        "  b := pow_mod(x, z, N);",
        "  while b /= 1 do",
        *body,
        "  od",
        "od;",
        "if 2 | N then",
        "  y := 2",
        "else",
        "  x := random(2, N - 1);",
        "  y := gcd(x, N);",
        "  while y = 1 do",
        "    z := OF(x, N);",
        "    if 2 | z /\\ pow_mod(x, z div 2, N) /= N - 1 then",
        "      y' := gcd(pow_mod(x, z div 2, N) - 1, N);",
        "      if 1 < y' /\\ y' < N then",
        "        y := y'",
        "      else",
        "        y := gcd(pow_mod(x, z div 2, N) + 1, N)",
        "      fi",
        "    else",
        "      x := random(2, N - 1);",
        "      y := gcd(x, N)",
        "    fi",
        "  od",
        "fi",
    ]
    return "\n".join(lines) + "\n"
