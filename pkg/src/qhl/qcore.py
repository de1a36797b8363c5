"""Finite-dimensional quantum primitives over named qubit registers.

A layout is a tuple of qubit names.  The first name is the most significant
bit of a basis index, so ``|01>`` over ``("q", "p")`` is basis index 1.
States are dense complex vectors of length ``2**n``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

TOL = 1e-9
PRUNE = 1e-12

Layout = tuple


class QuantumError(ValueError):
    pass


# ---------------------------------------------------------------- states


@dataclass(frozen=True, eq=False)
class PureState:
    layout: Layout
    amps: np.ndarray

    def __post_init__(self):
        if len(set(self.layout)) != len(self.layout):
            raise QuantumError(f"duplicate qubit in layout {self.layout}")
        if self.amps.shape != (2 ** len(self.layout),):
            raise QuantumError("amplitude vector does not match layout")

    @property
    def n(self) -> int:
        return len(self.layout)

    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def normalized(self) -> "PureState":
        nrm = np.sqrt(self.norm2())
        if nrm == 0:
            raise QuantumError("cannot normalize the zero vector")
        return PureState(self.layout, self.amps / nrm)

    def density(self) -> "Operator":
        return Operator(self.layout, np.outer(self.amps, self.amps.conj()))

    def reorder(self, layout: Sequence[str]) -> "PureState":
        return PureState(tuple(layout), permute_vector(self.amps, self.layout, layout))


@dataclass(frozen=True, eq=False)
class Operator:
    """A square matrix, optionally bound to a qubit layout."""

    layout: Layout | None
    matrix: np.ndarray
    name: str = ""

    @property
    def arity(self) -> int:
        return int(self.matrix.shape[0]).bit_length() - 1

    def adjoint(self) -> "Operator":
        nm = self.name[:-4] if self.name.endswith("^dag") else self.name + "^dag"
        return Operator(self.layout, self.matrix.conj().T, nm)

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def apply_to(self, amps: np.ndarray, n: int, positions: Sequence[int]) -> np.ndarray:
        return apply_matrix(amps, n, self.matrix, positions)

    def to_matrix(self) -> np.ndarray:
        return self.matrix

    def is_unitary(self, tol: float = TOL) -> bool:
        m = self.matrix
        return m.shape[0] == m.shape[1] and np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol)

    def reduced(self, keep: Sequence[str]) -> np.ndarray:
        if self.layout is None:
            raise QuantumError("operator has no layout")
        return partial_trace(self, keep).matrix


class ControlledPower:
    """``sum_i |i><i| (x) U^i`` with ``k`` control qubits followed by the targets of ``U``.

    Applied block-wise so the full matrix is never formed unless requested.
    """

    def __init__(self, base: np.ndarray, k: int, name: str = "", adjoint: bool = False):
        self.base = np.asarray(base, dtype=complex)
        self.k = k
        self.name = name
        self.is_adjoint = adjoint
        self._powers: list[np.ndarray] | None = None

    @property
    def arity(self) -> int:
        return self.k + int(self.base.shape[0]).bit_length() - 1

    def powers(self) -> list[np.ndarray]:
        if self._powers is None:
            dim = self.base.shape[0]
            out = [np.eye(dim, dtype=complex)]
            for _ in range(2 ** self.k - 1):
                out.append(self.base @ out[-1])
            if self.is_adjoint:
                out = [p.conj().T for p in out]
            self._powers = out
        return self._powers

    def adjoint(self) -> "ControlledPower":
        nm = self.name[:-4] if self.name.endswith("^dag") else self.name + "^dag"
        return ControlledPower(self.base, self.k, nm, not self.is_adjoint)

    def apply_to(self, amps: np.ndarray, n: int, positions: Sequence[int]) -> np.ndarray:
        positions = list(positions)
        rest = [i for i in range(n) if i not in positions]
        order = positions + rest
        t = np.transpose(amps.reshape((2,) * n), order)
        dim_t = 2 ** (len(positions) - self.k)
        blocks = t.reshape(2 ** self.k, dim_t, -1).copy()
        for i, p in enumerate(self.powers()):
            blocks[i] = p @ blocks[i]
        out = blocks.reshape((2,) * n)
        return np.transpose(out, np.argsort(order)).reshape(-1)

    def to_matrix(self) -> np.ndarray:
        dim_t = self.base.shape[0]
        m = np.zeros((2 ** self.k * dim_t,) * 2, dtype=complex)
        for i, p in enumerate(self.powers()):
            m[i * dim_t:(i + 1) * dim_t, i * dim_t:(i + 1) * dim_t] = p
        return m


@dataclass(frozen=True)
class MeasurementCollection:
    name: str
    ops: tuple  # tuple of np.ndarray, one per outcome

    @property
    def arity(self) -> int:
        return int(self.ops[0].shape[0]).bit_length() - 1

    def check_complete(self, tol: float = TOL) -> None:
        dim = self.ops[0].shape[0]
        acc = sum(m.conj().T @ m for m in self.ops)
        if not np.allclose(acc, np.eye(dim), atol=tol):
            raise QuantumError(f"measurement {self.name} is not complete: sum M^dag M != I")


def std_measurement(k: int, name: str = "std") -> MeasurementCollection:
    dim = 2 ** k
    ops = []
    for i in range(dim):
        m = np.zeros((dim, dim), dtype=complex)
        m[i, i] = 1.0
        ops.append(m)
    return MeasurementCollection(name, tuple(ops))


# ---------------------------------------------------------------- helpers


def basis_state(layout: Sequence[str], index: int = 0) -> PureState:
    v = np.zeros(2 ** len(layout), dtype=complex)
    v[index] = 1.0
    return PureState(tuple(layout), v)


def permute_vector(amps: np.ndarray, src: Sequence[str], dst: Sequence[str]) -> np.ndarray:
    src, dst = list(src), list(dst)
    if sorted(src) != sorted(dst):
        raise QuantumError(f"layouts {src} and {dst} differ")
    if src == dst:
        return amps
    n = len(src)
    t = amps.reshape((2,) * n)
    return np.transpose(t, [src.index(q) for q in dst]).reshape(-1)


def apply_matrix(amps: np.ndarray, n: int, mat: np.ndarray, positions: Sequence[int]) -> np.ndarray:
    """Apply ``mat`` to the qubits at ``positions`` of an ``n``-qubit vector."""
    k = len(positions)
    if mat.shape != (2 ** k, 2 ** k):
        raise QuantumError(f"operator of dimension {mat.shape[0]} applied to {k} qubits")
    t = amps.reshape((2,) * n)
    m = mat.reshape((2,) * (2 * k))
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), list(positions)))
    # tensordot puts the k output axes first; move them back into place
    return np.moveaxis(out, list(range(k)), list(positions)).reshape(-1)


def positions_of(layout: Sequence[str], targets: Sequence[str]) -> list[int]:
    layout = list(layout)
    try:
        pos = [layout.index(q) for q in targets]
    except ValueError as exc:
        raise QuantumError(f"unknown qubit in {list(targets)}") from exc
    if len(set(pos)) != len(pos):
        raise QuantumError(f"repeated qubit in {list(targets)}")
    return pos


# ---------------------------------------------------------------- operations


def tensor(a: PureState, b: PureState) -> PureState:
    if set(a.layout) & set(b.layout):
        raise QuantumError("tensor of overlapping layouts")
    return PureState(a.layout + b.layout, np.kron(a.amps, b.amps))


def partial_trace(rho: Operator, keep: Sequence[str]) -> Operator:
    layout = list(rho.layout)
    keep = [q for q in keep]
    for q in keep:
        if q not in layout:
            raise QuantumError(f"qubit {q} not in layout")
    n = len(layout)
    drop = [q for q in layout if q not in keep]
    order = [layout.index(q) for q in keep] + [layout.index(q) for q in drop]
    t = rho.matrix.reshape((2,) * (2 * n))
    t = np.transpose(t, order + [n + i for i in order])
    dk, dd = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(dk, dd, dk, dd)
    return Operator(tuple(keep), np.einsum("ajbj->ab", t))


def reduced_pure(psi: PureState | np.ndarray, layout: Sequence[str], keep: Sequence[str]) -> np.ndarray:
    """Reduced density matrix of a pure vector on ``keep`` (in that order)."""
    amps = psi.amps if isinstance(psi, PureState) else psi
    layout = list(layout)
    n = len(layout)
    kp = [layout.index(q) for q in keep]
    rest = [i for i in range(n) if i not in kp]
    a = np.transpose(amps.reshape((2,) * n), kp + rest).reshape(2 ** len(kp), -1)
    return a @ a.conj().T


def apply_unitary(psi: PureState, u, targets: Sequence[str]) -> PureState:
    layout = getattr(u, "layout", None)
    if layout is not None and tuple(layout) != tuple(targets):
        raise QuantumError("operator layout does not match targets")
    if u.arity != len(targets):
        raise QuantumError(f"gate of arity {u.arity} applied to {len(targets)} qubits")
    pos = positions_of(psi.layout, targets)
    return PureState(psi.layout, u.apply_to(psi.amps, psi.n, pos))


def measure(psi: PureState, ms: MeasurementCollection, targets: Sequence[str],
            prune: float = PRUNE) -> list[tuple[int, float, PureState]]:
    """Return ``(outcome, probability, normalized post-state)`` for each outcome above ``prune``."""
    if ms.arity != len(targets):
        raise QuantumError(f"measurement of arity {ms.arity} applied to {len(targets)} qubits")
    pos = positions_of(psi.layout, targets)
    out = []
    for i, m in enumerate(ms.ops):
        v = apply_matrix(psi.amps, psi.n, m, pos)
        p = float(np.vdot(v, v).real)
        if p > prune:
            out.append((i, p, PureState(psi.layout, v / np.sqrt(p))))
    return out


def measure_unnormalized(amps: np.ndarray, n: int, ms: MeasurementCollection,
                         pos: Sequence[int]) -> list[tuple[int, np.ndarray]]:
    return [(i, apply_matrix(amps, n, m, pos)) for i, m in enumerate(ms.ops)]


def reset_qubit(psi: PureState, q: str, prune: float = PRUNE) -> list[tuple[float, PureState]]:
    """Apply ``rho -> |0><0|rho|0><0| + |0><1|rho|1><0|`` on qubit ``q``.

    Returns at most two weighted pure branches; branches equal up to phase are merged.
    """
    n = psi.n
    k = positions_of(psi.layout, [q])[0]
    t = psi.amps.reshape((2,) * n)
    parts = []
    for bit in (0, 1):
        sub = np.take(t, bit, axis=k)
        v = np.zeros_like(t)
        idx = [slice(None)] * n
        idx[k] = 0
        v[tuple(idx)] = sub
        v = v.reshape(-1)
        w = float(np.vdot(v, v).real)
        if w > prune:
            parts.append((w, v / np.sqrt(w)))
    if len(parts) == 2 and equal_up_to_phase(parts[0][1], parts[1][1]):
        parts = [(parts[0][0] + parts[1][0], parts[0][1])]
    return [(w, PureState(psi.layout, v)) for w, v in parts]


def equal_up_to_phase(a, b, tol: float = TOL) -> bool:
    """``|<a|b>| >= 1 - tol`` for normalized vectors."""
    va = a.amps if isinstance(a, PureState) else np.asarray(a)
    vb = b.amps if isinstance(b, PureState) else np.asarray(b)
    if va.shape != vb.shape:
        return False
    return bool(abs(np.vdot(va, vb)) >= 1 - tol)


def fidelity_pure(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


def is_pure_density(rho: np.ndarray, tol: float = 1e-7) -> np.ndarray | None:
    """Return a unit vector ``v`` with ``rho ~ |v><v|`` (unit trace assumed), else ``None``."""
    vals, vecs = np.linalg.eigh(rho)
    v = vecs[:, -1] * np.sqrt(max(vals[-1], 0.0))
    if np.linalg.norm(rho - np.outer(v, v.conj())) <= tol:
        return vecs[:, -1]
    return None


# ---------------------------------------------------------------- gates

_SQ2 = 1 / np.sqrt(2)
_FIXED = {
    "H": np.array([[_SQ2, _SQ2], [_SQ2, -_SQ2]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
    "I": np.eye(2, dtype=complex),
    "S": np.array([[1, 0], [0, 1j]], dtype=complex),
    "T": np.array([[1, 0], [0, np.exp(1j * np.pi / 4)]], dtype=complex),
    "CNOT": np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    "CZ": np.diag([1, 1, 1, -1]).astype(complex),
    "SWAP": np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex),
}

BUILTIN_GATES = frozenset(_FIXED) | {"QFT", "QFTinv", "Uplus", "MODMUL", "CMODMUL"}


def qft_matrix(n: int) -> np.ndarray:
    dim = 2 ** n
    j, k = np.meshgrid(np.arange(dim), np.arange(dim), indexing="ij")
    # row k, column j: <k|QFT|j> = exp(2 pi i jk / N) / sqrt(N)
    return np.exp(2j * np.pi * j * k / dim) / np.sqrt(dim)


def modmul_matrix(x: int, modulus: int, width: int) -> np.ndarray:
    """Permutation ``|y> -> |x*y mod N>`` for ``y < N``, identity otherwise."""
    dim = 2 ** width
    if modulus > dim:
        raise QuantumError(f"{width} qubits cannot hold residues mod {modulus}")
    if np.gcd(x, modulus) != 1:
        raise QuantumError(f"{x} is not invertible mod {modulus}")
    m = np.zeros((dim, dim), dtype=complex)
    for y in range(dim):
        m[(x * y) % modulus if y < modulus else y, y] = 1.0
    return m


def tensor_power(mat: np.ndarray, k: int) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for _ in range(k):
        out = np.kron(out, mat)
    return out


def builtin_gate(name: str, *args: int, arity: int | None = None):
    """Resolve a builtin gate family.

    ``QFT(n)``, ``QFTinv(n)`` and ``Uplus(n)`` take a width; ``MODMUL(x, N)`` and
    ``CMODMUL(x, N, t)`` infer the register width from ``arity``.
    """
    if name in _FIXED:
        if args:
            raise QuantumError(f"gate {name} takes no parameters")
        return Operator(None, _FIXED[name], name)
    if name in ("QFT", "QFTinv"):
        n = args[0] if args else arity
        if n is None or n < 1:
            raise QuantumError(f"{name} needs a positive width")
        m = qft_matrix(n)
        return Operator(None, m if name == "QFT" else m.conj().T, f"{name}({n})")
    if name == "Uplus":
        # prepares |0...01> from |0...0>: X on the least significant qubit
        n = args[0] if args else (arity or 1)
        return Operator(None, np.kron(np.eye(2 ** (n - 1)), _FIXED["X"]), f"Uplus({n})")
    if name == "MODMUL":
        x, modulus = args
        if arity is None:
            raise QuantumError("MODMUL needs its target width")
        return Operator(None, modmul_matrix(x, modulus, arity), f"MODMUL({x}, {modulus})")
    if name == "CMODMUL":
        x, modulus, t = args
        if arity is None or arity <= t:
            raise QuantumError("CMODMUL needs t controls and at least one target")
        return ControlledPower(modmul_matrix(x, modulus, arity - t), t, f"CMODMUL({x}, {modulus}, {t})")
    raise QuantumError(f"unknown gate {name}")


def parse_matrix_text(text: str) -> np.ndarray:
    """Parse the text matrix format: one row per line (or ``;``), entries like ``0.5+0.5j``."""
    rows = []
    for line in text.replace(";", "\n").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        rows.append([complex(tok.replace("i", "j")) for tok in line.split()])
    if not rows or any(len(r) != len(rows) for r in rows):
        raise QuantumError("matrix must be square and non-empty")
    m = np.array(rows, dtype=complex)
    dim = m.shape[0]
    if dim & (dim - 1):
        raise QuantumError(f"matrix dimension {dim} is not a power of two")
    return m


def load_gate(text: str, name: str = "", tol: float = 1e-8) -> Operator:
    op = Operator(None, parse_matrix_text(text), name)
    if not op.is_unitary(tol):
        raise QuantumError(f"gate {name or '<matrix>'} is not unitary")
    return op


def format_matrix(m: np.ndarray) -> str:
    def fmt(z: complex) -> str:
        return repr(complex(z)).strip("()")

    return "\n".join(" ".join(fmt(z) for z in row) for row in m)


def haar_state(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.normal(size=2 ** n) + 1j * rng.normal(size=2 ** n)
    return v / np.linalg.norm(v)


def haar_unitary(rng: np.random.Generator, dim: int) -> np.ndarray:
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def embed_vector(sub: np.ndarray, sub_layout: Sequence[str], rest: np.ndarray,
                 rest_layout: Sequence[str], layout: Sequence[str]) -> np.ndarray:
    """Tensor ``sub`` and ``rest`` and reorder into ``layout``."""
    return permute_vector(np.kron(sub, rest), list(sub_layout) + list(rest_layout), layout)
