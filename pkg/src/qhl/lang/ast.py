"""Abstract syntax for programs, assertions and proof scripts.

All nodes are frozen dataclasses, so structural equality and hashing come for free.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

# ---------------------------------------------------------------- arithmetic


@dataclass(frozen=True)
class Num:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class App:
    """Function or operator application; infix operators use their symbol as ``fn``."""

    fn: str
    args: tuple


Aexp = Num | Var | App

# ---------------------------------------------------------------- formulas


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Pred:
    op: str
    args: tuple


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Not:
    body: object


@dataclass(frozen=True)
class Forall:
    var: str
    body: object


@dataclass(frozen=True)
class QLit:
    """A literal vector over ``qvars``: ``terms`` is a sorted tuple of (basis index, amplitude)."""

    qvars: tuple
    terms: tuple

    def vector(self) -> np.ndarray:
        v = np.zeros(2 ** len(self.qvars), dtype=complex)
        for idx, amp in self.terms:
            v[idx] = amp
        return v

    @staticmethod
    def from_vector(qvars, vec, cutoff: float = 0.0) -> "QLit":
        terms = tuple((i, complex(a)) for i, a in enumerate(vec) if abs(a) > cutoff)
        return QLit(tuple(qvars), terms)


@dataclass(frozen=True)
class QTensor:
    left: object
    right: object


@dataclass(frozen=True)
class Ket:
    expr: object  # QLit | QTensor


@dataclass(frozen=True)
class Odot:
    left: object
    right: object


TRUE = Const(True)
FALSE = Const(False)

# ---------------------------------------------------------------- distribution formulas


@dataclass(frozen=True)
class Single:
    formula: object


@dataclass(frozen=True)
class Weighted:
    comps: tuple  # of (Fraction, formula)


@dataclass(frozen=True)
class Unweighted:
    comps: tuple  # of formula


Dist = Single | Weighted | Unweighted

# ---------------------------------------------------------------- commands


@dataclass(frozen=True)
class GateRef:
    name: str
    args: tuple = ()  # Aexps
    power: int = 1  # tensor power
    dagger: bool = False


@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: object


@dataclass(frozen=True)
class Random:
    var: str
    lo: object
    hi: object


@dataclass(frozen=True)
class Seq:
    cmds: tuple


@dataclass(frozen=True)
class If:
    cond: object
    then: object
    orelse: object


@dataclass(frozen=True)
class While:
    cond: object
    body: object


@dataclass(frozen=True)
class QInit:
    qvars: tuple


@dataclass(frozen=True)
class Unitary:
    gate: GateRef
    qvars: tuple


@dataclass(frozen=True)
class Measure:
    var: str
    meas: str
    qvars: tuple


@dataclass(frozen=True)
class Call:
    result: str | None
    name: str
    args: tuple


# ---------------------------------------------------------------- declarations


@dataclass(frozen=True)
class GateDecl:
    """``kind`` is one of matrix, perm, ctrlpow, file; ``data`` depends on kind."""

    name: str
    kind: str
    data: object


@dataclass(frozen=True)
class MeasDecl:
    """``elements`` is None for ``std(k)``; otherwise a tuple of operator terms per outcome."""

    name: str
    arity: int
    elements: tuple | None = None


@dataclass(frozen=True)
class MacroDecl:
    name: str
    params: tuple
    result: str | None
    body: object


@dataclass(frozen=True)
class Program:
    body: object
    qvars: tuple = ()
    gates: tuple = ()  # GateDecl
    measurements: tuple = ()  # MeasDecl
    macros: tuple = ()  # MacroDecl
    init: tuple = ()  # (name, int) classical initial values
    source_dir: str | None = field(default=None, compare=False)

    def gate(self, name):
        return next((g for g in self.gates if g.name == name), None)

    def measurement(self, name):
        return next((m for m in self.measurements if m.name == name), None)

    def macro(self, name):
        return next((m for m in self.macros if m.name == name), None)


def seq(*cmds):
    """Build a flattened sequence, dropping nothing; a single command is returned as-is."""
    flat = []
    for c in cmds:
        if isinstance(c, Seq):
            flat.extend(c.cmds)
        else:
            flat.append(c)
    return flat[0] if len(flat) == 1 else Seq(tuple(flat))


def conj(*fs):
    fs = [f for f in fs]
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = And(out, f)
    return out


def odot(*fs):
    if not fs:
        return TRUE
    out = fs[0]
    for f in fs[1:]:
        out = Odot(out, f)
    return out


def weights_of(d) -> list:
    if isinstance(d, Weighted):
        return [w for w, _ in d.comps]
    return []


def as_weighted(d) -> list[tuple[Fraction, object]]:
    if isinstance(d, Single):
        return [(Fraction(1), d.formula)]
    if isinstance(d, Weighted):
        return list(d.comps)
    raise TypeError("unweighted sums have no weights")


def components(d) -> list:
    if isinstance(d, Single):
        return [d.formula]
    if isinstance(d, Weighted):
        return [f for _, f in d.comps]
    return list(d.comps)
