"""Denotational semantics: programs map partial distributions over classical-quantum states.

A POVD is kept as a list of weighted pure branches ``(sigma, w, psi)``; its value at
``sigma`` is ``sum w |psi><psi|`` over the branches carrying ``sigma``.
"""
from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import qcore
from .lang import ast as A
from .lang.analysis import FORALL_WINDOW, eval_aexp, eval_pure, expand_call
from .lang.builtins import EvalError
from .lang.parser import meas_collection

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EvalConfig:
    loop_tol: float = 1e-9
    max_iter: int = 10000
    prune: float = 1e-12
    forall_window: tuple = FORALL_WINDOW
    mode: str = "exhaustive"
    seed: int = 0
    phase_tol: float = 1e-9
    sat_tol: float = 1e-7


# ---------------------------------------------------------------- classical states


@dataclass(frozen=True)
class CState:
    """Classical state: variables default to 0; only non-zero entries are stored."""

    items: tuple = ()

    @staticmethod
    def of(mapping=None, **kw) -> "CState":
        d = dict(mapping or {})
        d.update(kw)
        return CState(tuple(sorted((k, int(v)) for k, v in d.items() if v != 0)))

    def get(self, name: str, default: int = 0) -> int:
        for k, v in self.items:
            if k == name:
                return v
        return default

    def set(self, name: str, value: int) -> "CState":
        d = dict(self.items)
        d[name] = value
        return CState.of(d)

    def as_dict(self) -> dict:
        return dict(self.items)

    def __str__(self):
        return "{" + ", ".join(f"{k}={v}" for k, v in self.items) + "}"


@dataclass(frozen=True, eq=False)
class Branch:
    sigma: CState
    weight: float
    amps: np.ndarray


@dataclass(frozen=True, eq=False)
class Povd:
    layout: tuple
    branches: tuple = ()

    def mass(self) -> float:
        return float(sum(b.weight for b in self.branches))

    def groups(self) -> dict:
        out: dict = {}
        for b in self.branches:
            out.setdefault(b.sigma, []).append(b)
        return out

    def sigmas(self) -> list:
        return list(self.groups())

    def density(self, sigma: CState) -> np.ndarray:
        dim = 2 ** len(self.layout)
        rho = np.zeros((dim, dim), dtype=complex)
        for b in self.branches:
            if b.sigma == sigma:
                rho += b.weight * np.outer(b.amps, b.amps.conj())
        return rho

    def marginal(self, pred) -> float:
        return float(sum(b.weight for b in self.branches if pred(b.sigma)))

    def scaled(self, p: float) -> "Povd":
        return Povd(self.layout, tuple(Branch(b.sigma, b.weight * p, b.amps) for b in self.branches))

    def __len__(self):
        return len(self.branches)


def point_povd(layout: Sequence[str], sigma: CState | None = None, amps: np.ndarray | None = None,
               weight: float = 1.0) -> Povd:
    layout = tuple(layout)
    if amps is None:
        amps = qcore.basis_state(layout).amps
    return Povd(layout, (Branch(sigma or CState(), weight, np.asarray(amps, dtype=complex)),))


def povd_mix(povds: Sequence[Povd], weights: Sequence[float], tol: float = 1e-9) -> Povd:
    if not povds:
        raise ValueError("nothing to mix")
    layout = povds[0].layout
    branches = []
    for mu, p in zip(povds, weights):
        if mu.layout != layout:
            raise ValueError("mixing POVDs over different layouts")
        branches.extend(Branch(b.sigma, b.weight * p, b.amps) for b in mu.branches)
    return Povd(layout, tuple(canonical(coalesce(branches, tol))))


def povd_density(mu: Povd) -> dict:
    return {s: mu.density(s) for s in mu.groups()}


def coalesce(branches: Iterable[Branch], tol: float = 1e-9) -> list[Branch]:
    """Merge branches with equal classical state and states equal up to global phase."""
    groups: dict = {}
    for b in branches:
        if b.weight <= 0:
            continue
        bucket = groups.setdefault(b.sigma, [])
        for k, (w, v) in enumerate(bucket):
            if abs(np.vdot(v, b.amps)) >= 1 - tol:
                bucket[k] = (w + b.weight, v)
                break
        else:
            bucket.append((b.weight, b.amps))
    return [Branch(s, w, v) for s, bucket in groups.items() for w, v in bucket]


def _fingerprint(v: np.ndarray) -> bytes:
    k = int(np.argmax(np.abs(v)))
    ph = v[k] / abs(v[k]) if abs(v[k]) > 0 else 1
    r = np.round(v / ph, 9) + 0.0
    return hashlib.sha1(r.tobytes()).digest()


def canonical(branches: Iterable[Branch]) -> list[Branch]:
    return sorted(branches, key=lambda b: (b.sigma.items, _fingerprint(b.amps)))


# ---------------------------------------------------------------- results


@dataclass
class LoopStats:
    iterations: int = 0
    residual: float = 0.0
    per_iteration: list = field(default_factory=list)  # (active mass in, mass exiting)
    diverged: bool = False


@dataclass
class EvalResult:
    povd: Povd
    residual: float = 0.0
    iterations: int = 0
    loops: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)


class SemanticsError(RuntimeError):
    pass


# ---------------------------------------------------------------- gate resolution


class Resolver:
    """Turns gate references and measurement names into qcore objects."""

    def __init__(self, program: A.Program | None):
        self.program = program or A.Program(A.Skip())
        self._cache: dict = {}

    def _base(self, name: str, args: tuple, n: int):
        decl = self.program.gate(name)
        if decl is None:
            return qcore.builtin_gate(name, *args, arity=n)
        if args:
            raise SemanticsError(f"declared gate {name} takes no parameters")
        if decl.kind == "matrix":
            return qcore.Operator(None, np.array(decl.data, dtype=complex), name)
        if decl.kind == "perm":
            dim = len(decl.data)
            m = np.zeros((dim, dim), dtype=complex)
            for src, dst in enumerate(decl.data):
                m[dst, src] = 1.0
            return qcore.Operator(None, m, name)
        if decl.kind == "ctrlpow":
            k, base = decl.data
            inner = self.gate(base, CState(), n - k)
            return qcore.ControlledPower(inner.to_matrix(), k, name)
        if decl.kind == "file":
            path = decl.data
            if self.program.source_dir and not os.path.isabs(path):
                path = os.path.join(self.program.source_dir, path)
            with open(path) as fh:
                return qcore.load_gate(fh.read(), name)
        raise SemanticsError(f"unknown gate kind {decl.kind}")

    def gate(self, g: A.GateRef, sigma, n: int):
        args = tuple(eval_aexp(a, sigma) for a in g.args)
        key = (g, args, n)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if n % g.power:
            raise SemanticsError(f"{g.name}^{g.power} cannot act on {n} qubits")
        base = self._base(g.name, args, n // g.power)
        if base.arity * g.power != n:
            raise SemanticsError(f"gate {g.name} of arity {base.arity * g.power} applied to {n} qubits")
        if g.power != 1:
            base = qcore.Operator(None, qcore.tensor_power(base.to_matrix(), g.power), f"{g.name}^{g.power}")
        if g.dagger:
            base = base.adjoint()
        self._cache[key] = base
        return base

    def measurement(self, name: str, n: int) -> qcore.MeasurementCollection:
        key = ("meas", name, n)
        hit = self._cache.get(key)
        if hit is None:
            decl = self.program.measurement(name)
            if decl is None:
                if name != "M":
                    raise SemanticsError(f"unknown measurement {name}")
                hit = qcore.std_measurement(n, "M")
            else:
                hit = meas_collection(decl)
            if hit.arity != n:
                raise SemanticsError(f"measurement {name} of arity {hit.arity} applied to {n} qubits")
            self._cache[key] = hit
        return hit


# ---------------------------------------------------------------- exhaustive evaluation


class Evaluator:
    def __init__(self, program: A.Program | None, layout: Sequence[str], config: EvalConfig | None = None):
        self.program = program or A.Program(A.Skip())
        self.layout = tuple(layout)
        self.n = len(self.layout)
        self.cfg = config or EvalConfig()
        self.resolver = Resolver(self.program)
        self.loops: list[LoopStats] = []
        self.warnings: list[str] = []
        self.diagnostics: list[str] = []
        self._expanded: dict = {}

    def pos(self, qs):
        return qcore.positions_of(self.layout, qs)

    def _abort_branch(self, b: Branch, exc: Exception):
        msg = f"branch {b.sigma} aborted: {exc}"
        if msg not in self.diagnostics:
            self.diagnostics.append(msg)
        log.info(msg)

    def guard(self, b: Branch, cond) -> bool | None:
        try:
            return eval_pure(cond, b.sigma, self.cfg.forall_window)
        except EvalError as exc:
            self._abort_branch(b, exc)
            return None

    def run(self, c, branches: list[Branch]) -> list[Branch]:
        if not branches:
            return []
        if isinstance(c, A.Seq):
            for d in c.cmds:
                branches = self.run(d, branches)
            return branches
        if isinstance(c, A.Skip):
            return branches
        if isinstance(c, A.Abort):
            return []
        if isinstance(c, A.Assign):
            out = []
            for b in branches:
                try:
                    out.append(Branch(b.sigma.set(c.var, eval_aexp(c.expr, b.sigma)), b.weight, b.amps))
                except EvalError as exc:
                    self._abort_branch(b, exc)
            return coalesce(out, self.cfg.phase_tol)
        if isinstance(c, A.Random):
            out = []
            for b in branches:
                try:
                    lo, hi = eval_aexp(c.lo, b.sigma), eval_aexp(c.hi, b.sigma)
                except EvalError as exc:
                    self._abort_branch(b, exc)
                    continue
                if lo > hi:
                    self._abort_branch(b, EvalError(f"empty range random({lo}, {hi})"))
                    continue
                p = 1.0 / (hi - lo + 1)
                out.extend(Branch(b.sigma.set(c.var, v), b.weight * p, b.amps) for v in range(lo, hi + 1))
            return coalesce(out, self.cfg.phase_tol)
        if isinstance(c, A.If):
            yes, no = [], []
            for b in branches:
                g = self.guard(b, c.cond)
                if g is True:
                    yes.append(b)
                elif g is False:
                    no.append(b)
            return coalesce(self.run(c.then, yes) + self.run(c.orelse, no), self.cfg.phase_tol)
        if isinstance(c, A.While):
            return self.run_while(c, branches)
        if isinstance(c, A.QInit):
            cur = branches
            for q in c.qvars:
                nxt = []
                for b in cur:
                    for w, psi in qcore.reset_qubit(qcore.PureState(self.layout, b.amps), q, self.cfg.prune):
                        nxt.append(Branch(b.sigma, b.weight * w, psi.amps))
                cur = coalesce(nxt, self.cfg.phase_tol)
            return cur
        if isinstance(c, A.Unitary):
            pos = self.pos(c.qvars)
            out = []
            for b in branches:
                try:
                    u = self.resolver.gate(c.gate, b.sigma, len(c.qvars))
                except (EvalError, qcore.QuantumError) as exc:
                    self._abort_branch(b, exc)
                    continue
                out.append(Branch(b.sigma, b.weight, u.apply_to(b.amps, self.n, pos)))
            return out
        if isinstance(c, A.Measure):
            pos = self.pos(c.qvars)
            ms = self.resolver.measurement(c.meas, len(c.qvars))
            out = []
            for b in branches:
                for i, v in qcore.measure_unnormalized(b.amps, self.n, ms, pos):
                    p = float(np.vdot(v, v).real)
                    if p * b.weight > self.cfg.prune and p > self.cfg.prune:
                        out.append(Branch(b.sigma.set(c.var, i), b.weight * p, v / np.sqrt(p)))
            return coalesce(out, self.cfg.phase_tol)
        if isinstance(c, A.Call):
            return self.run(self.expand(c), branches)
        raise SemanticsError(f"cannot evaluate {type(c).__name__}")

    def expand(self, c: A.Call):
        body = self._expanded.get(c)
        if body is None:
            try:
                body = expand_call(c, self.program)
            except EvalError as exc:
                raise SemanticsError(str(exc)) from None
            self._expanded[c] = body
        return body

    def run_while(self, c: A.While, branches: list[Branch]) -> list[Branch]:
        stats = LoopStats()
        self.loops.append(stats)
        done: list[Branch] = []
        active = branches
        prev_key = None
        while True:
            stay, leave = [], []
            for b in active:
                g = self.guard(b, c.cond)
                if g is True:
                    stay.append(b)
                elif g is False:
                    leave.append(b)
            m_in = sum(b.weight for b in active)
            m_out = sum(b.weight for b in leave)
            done.extend(leave)
            m_stay = sum(b.weight for b in stay)
            if stats.iterations:
                stats.per_iteration.append((m_in, m_out))
            if m_stay <= self.cfg.loop_tol:
                stats.residual = m_stay
                break
            if stats.iterations >= self.cfg.max_iter:
                stats.residual = m_stay
                stats.diverged = True
                self.warnings.append(f"loop '{_guard_text(c)}' did not terminate within {self.cfg.max_iter} "
                                     f"iterations; residual mass {m_stay:.3g} discarded")
                break
            key = _branch_key(stay)
            if m_out == 0 and key == prev_key:
                stats.residual = m_stay
                stats.diverged = True
                self.warnings.append(f"loop '{_guard_text(c)}' reached a non-terminating fixed point; "
                                     f"residual mass {m_stay:.3g} discarded")
                break
            prev_key = key
            active = self.run(c.body, stay)
            stats.iterations += 1
        return coalesce(done, self.cfg.phase_tol)


def _guard_text(c: A.While) -> str:
    from .lang.printer import formula

    return formula(c.cond)


def _branch_key(branches: list[Branch]):
    return tuple(sorted((b.sigma.items, round(b.weight, 12), _fingerprint(b.amps)) for b in branches))


def initial_sigma(program: A.Program, overrides: dict | None = None) -> CState:
    d = dict(program.init)
    d.update(overrides or {})
    return CState.of(d)


def eval(c, mu: Povd, program: A.Program | None = None, config: EvalConfig | None = None) -> EvalResult:
    """Exhaustive evaluation of command ``c`` from ``mu``."""
    cfg = config or EvalConfig()
    ev = Evaluator(program, mu.layout, cfg)
    out = ev.run(c, coalesce(mu.branches, cfg.phase_tol))
    residual = sum(s.residual for s in ev.loops)
    top = ev.loops[0].iterations if ev.loops else 0
    return EvalResult(Povd(mu.layout, tuple(canonical(out))), residual, top, ev.loops, ev.warnings,
                      ev.diagnostics)


def eval_while(c: A.While, mu: Povd, program: A.Program | None = None,
               config: EvalConfig | None = None) -> tuple[Povd, float, int]:
    r = eval(c, mu, program, config)
    return r.povd, r.residual, r.iterations


def run_program(program: A.Program, config: EvalConfig | None = None, overrides: dict | None = None) -> EvalResult:
    cfg = config or EvalConfig()
    mu = point_povd(program.qvars, initial_sigma(program, overrides))
    if cfg.mode == "sample":
        rng = np.random.default_rng(cfg.seed)
        traj = sample_run(program.body, mu.branches[0].sigma, qcore.PureState(mu.layout, mu.branches[0].amps),
                          rng, program, cfg)
        return traj.as_result(mu.layout)
    return eval(program.body, mu, program, cfg)


# ---------------------------------------------------------------- sampling


@dataclass
class Trajectory:
    status: str  # ok | aborted | diverged
    sigma: CState | None = None
    state: qcore.PureState | None = None
    steps: int = 0
    diagnostics: list = field(default_factory=list)

    def as_result(self, layout) -> EvalResult:
        if self.status != "ok":
            warn = [f"trajectory {self.status}"] + self.diagnostics
            return EvalResult(Povd(tuple(layout), ()), 1.0 if self.status == "diverged" else 0.0, 0, [], warn,
                              self.diagnostics)
        return EvalResult(point_povd(layout, self.sigma, self.state.amps), 0.0, 0, [], [], self.diagnostics)


class _Stop(Exception):
    def __init__(self, status, msg=""):
        self.status, self.msg = status, msg


class Sampler:
    def __init__(self, program, layout, rng, config):
        self.program = program or A.Program(A.Skip())
        self.layout = tuple(layout)
        self.n = len(self.layout)
        self.rng = rng
        self.cfg = config
        self.resolver = Resolver(self.program)
        self.steps = 0
        self._expanded: dict = {}

    def pick(self, weights) -> int:
        w = np.asarray(weights, dtype=float)
        return int(self.rng.choice(len(w), p=w / w.sum()))

    def run(self, c, sigma: CState, amps: np.ndarray):
        self.steps += 1
        try:
            if isinstance(c, A.Seq):
                for d in c.cmds:
                    sigma, amps = self.run(d, sigma, amps)
                return sigma, amps
            if isinstance(c, A.Skip):
                return sigma, amps
            if isinstance(c, A.Abort):
                raise _Stop("aborted", "abort")
            if isinstance(c, A.Assign):
                return sigma.set(c.var, eval_aexp(c.expr, sigma)), amps
            if isinstance(c, A.Random):
                lo, hi = eval_aexp(c.lo, sigma), eval_aexp(c.hi, sigma)
                if lo > hi:
                    raise _Stop("aborted", f"empty range random({lo}, {hi})")
                return sigma.set(c.var, int(self.rng.integers(lo, hi + 1))), amps
            if isinstance(c, A.If):
                b = eval_pure(c.cond, sigma, self.cfg.forall_window)
                return self.run(c.then if b else c.orelse, sigma, amps)
            if isinstance(c, A.While):
                for _ in range(self.cfg.max_iter):
                    if not eval_pure(c.cond, sigma, self.cfg.forall_window):
                        return sigma, amps
                    sigma, amps = self.run(c.body, sigma, amps)
                raise _Stop("diverged", f"loop exceeded {self.cfg.max_iter} iterations")
            if isinstance(c, A.QInit):
                psi = qcore.PureState(self.layout, amps)
                for q in c.qvars:
                    opts = qcore.reset_qubit(psi, q, self.cfg.prune)
                    psi = opts[self.pick([w for w, _ in opts])][1]
                return sigma, psi.amps
            if isinstance(c, A.Unitary):
                u = self.resolver.gate(c.gate, sigma, len(c.qvars))
                return sigma, u.apply_to(amps, self.n, qcore.positions_of(self.layout, c.qvars))
            if isinstance(c, A.Measure):
                ms = self.resolver.measurement(c.meas, len(c.qvars))
                outs = qcore.measure_unnormalized(amps, self.n, ms, qcore.positions_of(self.layout, c.qvars))
                probs = [float(np.vdot(v, v).real) for _, v in outs]
                k = self.pick(probs)
                i, v = outs[k]
                return sigma.set(c.var, i), v / np.sqrt(probs[k])
            if isinstance(c, A.Call):
                body = self._expanded.get(c)
                if body is None:
                    body = self._expanded[c] = expand_call(c, self.program)
                return self.run(body, sigma, amps)
        except EvalError as exc:
            raise _Stop("aborted", str(exc)) from None
        raise SemanticsError(f"cannot evaluate {type(c).__name__}")


def sample_run(c, sigma: CState, psi: qcore.PureState, rng: np.random.Generator,
               program: A.Program | None = None, config: EvalConfig | None = None) -> Trajectory:
    cfg = config or EvalConfig(mode="sample")
    s = Sampler(program, psi.layout, rng, cfg)
    try:
        sig, amps = s.run(c, sigma, psi.amps)
    except _Stop as stop:
        return Trajectory(stop.status, steps=s.steps, diagnostics=[stop.msg])
    return Trajectory("ok", sig, qcore.PureState(psi.layout, amps), s.steps)


# ---------------------------------------------------------------- reporting


def state_dict(amps: np.ndarray, layout, cutoff: float = 1e-12) -> dict:
    n = len(layout)
    return {format(i, f"0{n}b") if n else "": [float(a.real), float(a.imag)]
            for i, a in enumerate(amps) if abs(a) > cutoff}


def report(result: EvalResult) -> dict:
    mu = result.povd
    return {
        "schema": 1,
        "layout": list(mu.layout),
        "mass": mu.mass(),
        "residual": result.residual,
        "iterations": result.iterations,
        "branches": [{"sigma": b.sigma.as_dict(), "weight": b.weight, "state": state_dict(b.amps, mu.layout)}
                     for b in mu.branches],
        "warnings": list(result.warnings),
        "diagnostics": list(result.diagnostics),
    }
