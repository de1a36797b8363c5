"""Independent reference implementations used by the tests.

Nothing here imports the simulator core: gates are embedded by explicit index loops,
states are density matrices keyed by classical dictionaries, and the transport oracle
enumerates assignments.
"""
from __future__ import annotations

from fractions import Fraction
from math import gcd

import numpy as np

SQ2 = 1 / np.sqrt(2)
GATES = {
    "H": np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Z": np.diag([1, -1]).astype(complex),
    "S": np.diag([1, 1j]),
    "T": np.diag([1, np.exp(1j * np.pi / 4)]),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}


def embed(mat, layout, targets):
    """Full matrix of ``mat`` acting on ``targets`` of ``layout`` (first qubit most significant)."""
    n = len(layout)
    pos = [layout.index(t) for t in targets]
    dim = 2 ** n
    out = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        bi = [(i >> (n - 1 - b)) & 1 for b in range(n)]
        for j in range(dim):
            bj = [(j >> (n - 1 - b)) & 1 for b in range(n)]
            if any(bi[b] != bj[b] for b in range(n) if b not in pos):
                continue
            si = sum(bi[p] << (len(pos) - 1 - k) for k, p in enumerate(pos))
            sj = sum(bj[p] << (len(pos) - 1 - k) for k, p in enumerate(pos))
            out[i, j] = mat[si, sj]
    return out


def _key(sigma: dict):
    return tuple(sorted((k, v) for k, v in sigma.items() if v != 0))


# ---------------------------------------------------------------- density-matrix interpreter
#
# Programs are nested tuples:
#   ("skip",) ("abort",) ("assign", x, k) ("incr", x) ("seq", c1, c2, ...)
#   ("if", x, k, c1, c2)              -- guard x = k
#   ("init", q) ("unitary", name, (q, ...)) ("measure", x, (q, ...))
#   ("while", x, k, body)             -- guard x = k, unrolled at most 64 times


def dm_run(prog, state: dict, layout) -> dict:
    """``state`` maps a classical key to a density matrix."""
    op = prog[0]
    if op == "skip":
        return dict(state)
    if op == "abort":
        return {}
    if op in ("assign", "incr"):
        out: dict = {}
        for key, rho in state.items():
            s = dict(key)
            s[prog[1]] = prog[2] if op == "assign" else s.get(prog[1], 0) + 1
            _acc(out, _key(s), rho)
        return out
    if op == "seq":
        for c in prog[1:]:
            state = dm_run(c, state, layout)
        return state
    if op == "if":
        _, x, k, c1, c2 = prog
        yes = {key: r for key, r in state.items() if dict(key).get(x, 0) == k}
        no = {key: r for key, r in state.items() if dict(key).get(x, 0) != k}
        out = {}
        for key, r in dm_run(c1, yes, layout).items():
            _acc(out, key, r)
        for key, r in dm_run(c2, no, layout).items():
            _acc(out, key, r)
        return out
    if op == "while":
        _, x, k, body = prog
        out, active = {}, dict(state)
        for _ in range(64):
            stay = {key: r for key, r in active.items() if dict(key).get(x, 0) == k}
            for key, r in active.items():
                if dict(key).get(x, 0) != k:
                    _acc(out, key, r)
            if not stay:
                break
            active = dm_run(body, stay, layout)
        return out
    if op == "init":
        q = prog[1]
        k0 = embed(np.array([[1, 0], [0, 0]], dtype=complex), layout, [q])
        k1 = embed(np.array([[0, 1], [0, 0]], dtype=complex), layout, [q])
        return {key: k0 @ r @ k0.conj().T + k1 @ r @ k1.conj().T for key, r in state.items()}
    if op == "unitary":
        u = embed(GATES[prog[1]], layout, list(prog[2]))
        return {key: u @ r @ u.conj().T for key, r in state.items()}
    if op == "measure":
        _, x, qs = prog
        dim = 2 ** len(qs)
        out = {}
        for key, r in state.items():
            for i in range(dim):
                p = np.zeros((dim, dim), dtype=complex)
                p[i, i] = 1
                m = embed(p, layout, list(qs))
                rr = m @ r @ m.conj().T
                if np.trace(rr).real > 1e-14:
                    s = dict(key)
                    s[x] = i
                    _acc(out, _key(s), rr)
        return out
    raise ValueError(op)


def _acc(d, key, rho):
    d[key] = d[key] + rho if key in d else rho


def to_text(prog, indent="") -> str:
    """Render an oracle program in the concrete syntax."""
    op = prog[0]
    if op == "skip":
        return "skip"
    if op == "abort":
        return "abort"
    if op == "assign":
        return f"{prog[1]} := {prog[2]}"
    if op == "incr":
        return f"{prog[1]} := {prog[1]} + 1"
    if op == "seq":
        return ";\n".join(to_text(c) for c in prog[1:])
    if op == "if":
        return f"if {prog[1]} = {prog[2]} then\n{to_text(prog[3])}\nelse\n{to_text(prog[4])}\nfi"
    if op == "while":
        return f"while {prog[1]} = {prog[2]} do\n{to_text(prog[3])}\nod"
    if op == "init":
        return f"{prog[1]} := |0>"
    if op == "unitary":
        return f"{prog[1]}[{', '.join(prog[2])}]"
    if op == "measure":
        return f"{prog[1]} := M[{', '.join(prog[2])}]"
    raise ValueError(op)


def random_program(rng, qubits=("a", "b", "c"), max_meas=2, depth=0, budget=None):
    """A random program over at most three qubits with at most ``max_meas`` measurements."""
    budget = budget if budget is not None else {"meas": max_meas}
    n = int(rng.integers(2, 5))
    cmds = [_random_cmd(rng, qubits, depth, budget) for _ in range(n)]
    return ("seq",) + tuple(cmds)


def _random_cmd(rng, qubits, depth, budget):
    r = rng.random()
    if r < 0.35:
        name = rng.choice(["H", "X", "Z", "S", "T"])
        return ("unitary", str(name), (str(rng.choice(qubits)),))
    if r < 0.5 and len(qubits) > 1:
        a, b = rng.choice(len(qubits), 2, replace=False)
        return ("unitary", str(rng.choice(["CNOT", "CZ", "SWAP"])), (qubits[a], qubits[b]))
    if r < 0.65 and budget["meas"] > 0:
        budget["meas"] -= 1
        k = int(rng.integers(1, min(2, len(qubits)) + 1))
        qs = tuple(str(q) for q in rng.choice(qubits, k, replace=False))
        return ("measure", str(rng.choice(["x", "y"])), qs)
    if r < 0.72:
        return ("init", str(rng.choice(qubits)))
    if r < 0.8:
        return ("assign", str(rng.choice(["x", "y"])), int(rng.integers(0, 3)))
    if r < 0.9 and depth < 2:
        return ("if", str(rng.choice(["x", "y"])), int(rng.integers(0, 2)),
                random_program(rng, qubits, 0, depth + 1, budget), random_program(rng, qubits, 0, depth + 1, budget))
    if r < 0.93:
        return ("skip",)
    if r < 0.95:
        return ("abort",)
    return ("incr", str(rng.choice(["x", "y"])))


# ---------------------------------------------------------------- transport brute force


def brute_force_feasible(supply, demand, allowed, steps=None) -> bool:
    """Exact feasibility of a bipartite transport with rational supplies.

    Every extreme point of the transport polytope routes each supply through a
    spanning forest; for small instances it suffices to search fractional splits on a
    grid of the common denominator.  Each supply is split into units of 1/den.
    """
    supply = [Fraction(s) for s in supply]
    demand = [Fraction(d) for d in demand]
    if sum(supply) != sum(demand):
        return False
    den = 1
    for v in supply + demand:
        den = den * v.denominator // gcd(den, v.denominator)
    units = [int(s * den) for s in supply]
    need = [int(d * den) for d in demand]
    m = len(demand)

    def rec(j, left):
        if j == len(units):
            return all(x == 0 for x in left)
        opts = [i for i in range(m) if allowed[j][i]]
        for split in _compositions(units[j], len(opts)):
            if all(split[t] <= left[opts[t]] for t in range(len(opts))):
                nl = list(left)
                for t, i in enumerate(opts):
                    nl[i] -= split[t]
                if rec(j + 1, nl):
                    return True
        return False

    return rec(0, need)


def _compositions(total, parts):
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


# ---------------------------------------------------------------- order finding


def order(x: int, N: int) -> int:
    r, y = 1, x % N
    while y != 1:
        y = y * x % N
        r += 1
    return r


def best_denominator(z: int, T: int, N: int) -> int:
    """Largest q <= N with p/q in lowest terms and |z/T - p/q| < 1/(2 q^2), else 1.

    By Legendre's theorem every such fraction is a convergent of z/T, so this exhaustive
    search in exact arithmetic recovers the continued-fraction denominator without
    expanding the continued fraction.
    """
    alpha = Fraction(z, T)
    out = 1
    for q in range(1, N + 1):
        p = round(q * alpha)
        if gcd(p, q) == 1 and abs(q * alpha - p) < Fraction(1, 2 * q):
            out = q
    return out


def of_outcomes(x: int, N: int, t: int) -> dict:
    """Phase-estimation outcome distribution for the order of ``x`` mod ``N``.

    With r the order, eigenphases are s/r for s = 0..r-1, each with weight 1/r; the
    amplitude of outcome z for phase phi is sum_k exp(2 pi i k (phi - z/2^t)) / 2^t.
    """
    r = order(x, N)
    T = 2 ** t
    out = {}
    for z in range(T):
        p = 0.0
        for s in range(r):
            a = sum(np.exp(2j * np.pi * k * (s / r - z / T)) for k in range(T)) / T
            p += abs(a) ** 2 / r
        if p > 1e-12:
            d = best_denominator(z, T, N)
            out[z] = (p, d)
    return out


def of_success(x: int, N: int, t: int) -> float:
    return sum(p for p, d in of_outcomes(x, N, t).values() if pow(x, d, N) == 1)
