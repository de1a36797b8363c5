"""Satisfaction of state and distribution formulas by classical-quantum states and POVDs."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import qcore
from ..lang import ast as A
from ..lang.analysis import FORALL_WINDOW, _Bound, eval_pure, is_pure
from ..lang.builtins import EvalError
from ..sem import Branch, CState, EvalConfig, Povd
from .transport import transport

SAT_TOL = 1e-7


class UnsupportedFragment(ValueError):
    pass


# ---------------------------------------------------------------- verdicts


@dataclass
class Satisfied:
    """``witness[i]`` lists ``(sigma, weight, amps)`` pieces of the i-th sub-distribution."""

    witness: list = field(default_factory=list)
    weights: list = field(default_factory=list)
    relaxations: list = field(default_factory=list)
    approximate: bool = False

    def __bool__(self):
        return True


@dataclass
class Refuted:
    reason: str
    sigma: CState | None = None

    def __bool__(self):
        return False


@dataclass
class NotProven:
    reason: str

    def __bool__(self):
        return False


@dataclass
class NotDecisive:
    reason: str


# ---------------------------------------------------------------- quantum views


class QView:
    """Unnormalized density operator at one classical state, kept as an ensemble when possible."""

    def __init__(self, layout, ensemble=None, rho=None):
        self.layout = tuple(layout)
        self.ensemble = ensemble
        self.rho = rho
        self._cache: dict = {}

    @staticmethod
    def of(x, layout=None) -> "QView":
        if isinstance(x, QView):
            return x
        if isinstance(x, qcore.Operator):
            return QView(x.layout, rho=x.matrix)
        if isinstance(x, qcore.PureState):
            return QView(x.layout, ensemble=[(1.0, x.amps)])
        if layout is None:
            raise UnsupportedFragment("a layout is needed for a bare matrix")
        return QView(layout, rho=np.asarray(x))

    def trace(self) -> float:
        if self.ensemble is not None:
            return float(sum(w * np.vdot(v, v).real for w, v in self.ensemble))
        return float(np.trace(self.rho).real)

    def reduced(self, keep: tuple) -> np.ndarray:
        hit = self._cache.get(keep)
        if hit is not None:
            return hit
        for q in keep:
            if q not in self.layout:
                raise UnsupportedFragment(f"quantum variable {q} is not in the layout {list(self.layout)}")
        if self.ensemble is not None:
            dim = 2 ** len(keep)
            out = np.zeros((dim, dim), dtype=complex)
            for w, v in self.ensemble:
                out += w * qcore.reduced_pure(v, self.layout, keep)
        else:
            out = qcore.partial_trace(qcore.Operator(self.layout, self.rho), keep).matrix
        self._cache[keep] = out
        return out

    def rank_one(self, tol: float = 1e-9) -> bool:
        if self.ensemble is not None and len(self.ensemble) == 1:
            return True
        if self.ensemble is not None:
            vs = np.array([np.sqrt(w) * v for w, v in self.ensemble])
            sv = np.linalg.svd(vs, compute_uv=False)
        else:
            sv = np.linalg.eigvalsh(self.rho)[::-1]
        return len(sv) < 2 or sv[1] <= tol * max(sv[0], 1e-300)


def qexpr_vector(q) -> tuple[tuple, np.ndarray]:
    if isinstance(q, A.QLit):
        return q.qvars, q.vector()
    lv, la = qexpr_vector(q.left)
    rv, ra = qexpr_vector(q.right)
    return lv + rv, np.kron(la, ra)


# ---------------------------------------------------------------- state satisfaction


def _ket_holds(view: QView, q, tol: float) -> bool:
    qvars, vec = qexpr_vector(q)
    tr = view.trace()
    if tr <= 0:
        return True
    red = view.reduced(tuple(qvars)) / tr
    return float(np.linalg.norm(red - np.outer(vec, vec.conj()))) <= tol


def _sat(sigma, view: QView, f, window, tol) -> bool:
    if isinstance(f, A.Const):
        return f.value
    if isinstance(f, A.Pred):
        try:
            return eval_pure(f, sigma, window)
        except EvalError:
            return False
    if isinstance(f, A.Ket):
        return _ket_holds(view, f.expr, tol)
    if isinstance(f, (A.And, A.Odot)):
        # a conjunct only inspects the reduced state on its own variables, so the
        # restriction in the (.) clause is implicit
        return _sat(sigma, view, f.left, window, tol) and _sat(sigma, view, f.right, window, tol)
    if isinstance(f, A.Or):
        return _sat(sigma, view, f.left, window, tol) or _sat(sigma, view, f.right, window, tol)
    if isinstance(f, A.Not):
        return not _sat(sigma, view, f.body, window, tol)
    if isinstance(f, A.Forall):
        lo, hi = window
        return all(_sat(_Bound(sigma, f.var, v), view, f.body, window, tol) for v in range(lo, hi + 1))
    raise UnsupportedFragment(f"not a state formula: {type(f).__name__}")


def sat_state(sigma, rho, f, cfg: EvalConfig | None = None) -> bool:
    """``(sigma, rho) |= F`` for a state formula, with Frobenius tolerance on ket clauses."""
    cfg = cfg or EvalConfig()
    if isinstance(sigma, dict):
        sigma = CState.of(sigma)
    return _sat(sigma, QView.of(rho), f, cfg.forall_window, cfg.sat_tol)


def classical_truth(f, sigma, window=FORALL_WINDOW):
    """Three-valued evaluation treating quantum clauses as unknown (``None``)."""
    if is_pure(f):
        try:
            return eval_pure(f, sigma, window)
        except EvalError:
            return False
    if isinstance(f, A.Ket):
        return None
    if isinstance(f, (A.And, A.Odot)):
        a = classical_truth(f.left, sigma, window)
        if a is False:
            return False
        b = classical_truth(f.right, sigma, window)
        if b is False:
            return False
        return True if a is True and b is True else None
    if isinstance(f, A.Or):
        a = classical_truth(f.left, sigma, window)
        if a is True:
            return True
        b = classical_truth(f.right, sigma, window)
        if b is True:
            return True
        return False if a is False and b is False else None
    if isinstance(f, A.Not):
        a = classical_truth(f.body, sigma, window)
        return None if a is None else not a
    if isinstance(f, A.Forall):
        lo, hi = window
        vals = [classical_truth(f.body, _Bound(sigma, f.var, v), window) for v in range(lo, hi + 1)]
        if any(v is False for v in vals):
            return False
        return True if all(v is True for v in vals) else None
    return None


# ---------------------------------------------------------------- convexity


def is_face(f) -> bool:
    """Formulas whose truth on a mixture is the conjunction of their truth on the parts."""
    if is_pure(f) or isinstance(f, A.Ket):
        return True
    if isinstance(f, (A.And, A.Odot)):
        return is_face(f.left) and is_face(f.right)
    if isinstance(f, A.Forall):
        return is_face(f.body)
    return False


def is_convex(f) -> bool:
    """Sufficient syntactic condition for closure under mixing at a fixed classical state."""
    if is_face(f):
        return True
    if isinstance(f, A.Not):
        return is_face(f.body)
    if isinstance(f, (A.And, A.Odot)):
        return is_convex(f.left) and is_convex(f.right)
    if isinstance(f, A.Or):
        return (is_pure(f.left) and is_convex(f.right)) or (is_pure(f.right) and is_convex(f.left))
    if isinstance(f, A.Forall):
        return is_convex(f.body)
    return False


# ---------------------------------------------------------------- POVD satisfaction


@dataclass
class _Unit:
    sigma: CState
    pieces: list  # of Branch
    view: QView

    @property
    def mass(self) -> float:
        return float(sum(b.weight for b in self.pieces))


def _units(mu: Povd, per_branch: bool) -> list[_Unit]:
    out = []
    for sigma, bs in mu.groups().items():
        if per_branch and len(bs) > 1:
            out.extend(_Unit(sigma, [b], QView(mu.layout, [(b.weight, b.amps)])) for b in bs)
        else:
            out.append(_Unit(sigma, list(bs), QView(mu.layout, [(b.weight, b.amps) for b in bs])))
    return out


def _aggregate_ok(layout, pieces: list[Branch], f, cfg) -> bool:
    by_sigma: dict = {}
    for b in pieces:
        if b.weight > 0:
            by_sigma.setdefault(b.sigma, []).append((b.weight, b.amps))
    return all(_sat(s, QView(layout, ens), f, cfg.forall_window, cfg.sat_tol) for s, ens in by_sigma.items())


def verify_witness(mu: Povd, comps, verdict: Satisfied, cfg: EvalConfig | None = None) -> bool:
    """Re-check that each witnessed sub-distribution satisfies its component and that they sum to ``mu``."""
    cfg = cfg or EvalConfig()
    for f, pieces in zip(comps, verdict.witness):
        if not _aggregate_ok(mu.layout, pieces, f, cfg):
            return False
    total = sum(b.weight for pieces in verdict.witness for b in pieces)
    return abs(total - mu.mass()) <= 1e-8 * max(1.0, mu.mass())


def _allowed(units, comps, cfg):
    return [[_sat(u.sigma, u.view, f, cfg.forall_window, cfg.sat_tol) for f in comps] for u in units]


def _decisive(units, comps, cfg) -> bool:
    for u in units:
        if u.view.rank_one():
            continue
        if any(classical_truth(f, u.sigma, cfg.forall_window) is None for f in comps):
            return False
    return True


def _build_witness(units, flow, ncomp):
    witness = [[] for _ in range(ncomp)]
    for j, u in enumerate(units):
        m = u.mass
        for i in range(ncomp):
            f = float(flow[j][i])
            if f > 0 and m > 0:
                frac = f / m
                witness[i].extend(Branch(b.sigma, b.weight * frac, b.amps) for b in u.pieces)
    return witness


def _solve_weighted(mu, comps, weights, cfg, per_branch):
    units = _units(mu, per_branch)
    allowed = _allowed(units, comps, cfg)
    mass = mu.mass()
    flow = transport([u.mass for u in units], [float(w) * mass for w in weights], allowed, tol=cfg.loop_tol)
    return units, allowed, flow


def satisfies(mu: Povd, d, cfg: EvalConfig | None = None):
    """Decide ``mu |= D``: ``Satisfied`` (with witness), ``Refuted`` or ``NotProven``."""
    cfg = cfg or EvalConfig()
    if not isinstance(d, (A.Single, A.Weighted, A.Unweighted)):
        d = A.Single(d)
    approx = _uses_window(d)
    if mu.mass() <= cfg.prune:
        n = len(A.components(d))
        return Satisfied([[] for _ in range(n)], [Fraction(0)] * n, ["empty distribution"], approx)
    if isinstance(d, A.Single):
        for unit in _units(mu, False):
            if not _sat(unit.sigma, unit.view, d.formula, cfg.forall_window, cfg.sat_tol):
                return Refuted(f"fails at classical state {unit.sigma}", unit.sigma)
        return Satisfied([list(mu.branches)], [Fraction(1)], [], approx)
    if isinstance(d, A.Weighted):
        return _satisfies_weighted(mu, d, cfg, approx)
    return _satisfies_unweighted(mu, d, cfg, approx)


def _uses_window(d) -> bool:
    from ..lang.analysis import has_forall

    return has_forall(d)


def _satisfies_weighted(mu, d, cfg, approx):
    relax = []
    kept = []
    for k, (w, f) in enumerate(d.comps):
        if w == 0:
            relax.append(f"component {k} has weight 0 and was dropped")
        else:
            kept.append((k, w, f))
    comps = [f for _, _, f in kept]
    weights = [w for _, w, _ in kept]
    units, allowed, flow = _solve_weighted(mu, comps, weights, cfg, per_branch=False)
    if flow is None:
        if _decisive(units, comps, cfg):
            return Refuted("no split of the distribution matches the weights")
        units, allowed, flow = _solve_weighted(mu, comps, weights, cfg, per_branch=True)
        if flow is None:
            return NotProven("no branch-level split matches the weights; mixed states may admit one")
    wit = _build_witness(units, flow, len(comps))
    full = [[] for _ in d.comps]
    for (k, _, _), pieces in zip(kept, wit):
        full[k] = pieces
    verdict = Satisfied(full, [w for w, _ in d.comps], relax, approx)
    if not verify_witness(mu, [f for _, f in d.comps], verdict, cfg):
        return NotProven("branch-level witness does not aggregate to a valid split")
    return verdict


def _satisfies_unweighted(mu, d, cfg, approx):
    comps = list(d.comps)
    units = _units(mu, False)
    allowed = _allowed(units, comps, cfg)
    bad = [j for j, row in enumerate(allowed) if not any(row)]
    if bad:
        if _decisive([units[j] for j in bad], comps, cfg):
            return Refuted(f"no component holds at classical state {units[bad[0]].sigma}", units[bad[0]].sigma)
        units = _units(mu, True)
        allowed = _allowed(units, comps, cfg)
        if any(not any(row) for row in allowed):
            return NotProven("some branch satisfies no component")
    witness = [[] for _ in comps]
    for u, row in zip(units, allowed):
        witness[row.index(True)].extend(u.pieces)
    mass = mu.mass()
    weights = [Fraction(sum(b.weight for b in w) / mass).limit_denominator(10 ** 12) for w in witness]
    relax = [f"component {i} received no mass (weight 0)" for i, w in enumerate(witness) if not w]
    verdict = Satisfied(witness, weights, relax, approx)
    if not verify_witness(mu, comps, verdict, cfg):
        return NotProven("branch-level witness does not aggregate to a valid split")
    return verdict


def probability_of(mu: Povd, f, cfg: EvalConfig | None = None):
    """Largest ``p`` with ``mu = p mu1 + (1-p) mu2``, ``mu1 |= F``, ``mu2 |= ~F``; or ``NotDecisive``."""
    cfg = cfg or EvalConfig()
    if isinstance(f, A.Single):
        f = f.formula
    mass = mu.mass()
    if mass <= cfg.prune:
        return NotDecisive("empty distribution")
    good = 0.0
    for u in _units(mu, False):
        truth = classical_truth(f, u.sigma, cfg.forall_window)
        if truth is None:
            if not u.view.rank_one():
                return NotDecisive(f"mixed quantum state at classical state {u.sigma} can split either way")
            truth = _sat(u.sigma, u.view, f, cfg.forall_window, cfg.sat_tol)
        if truth:
            good += u.mass
    return good / mass
