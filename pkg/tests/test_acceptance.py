"""Acceptance suite: one PASS/FAIL line per criterion, printed straight to the terminal."""
import math
import time

import numpy as np
import pytest

from qhl import cases, qcore, sem
from qhl.assertions import Refuted, Satisfied, entails, probability_of, satisfies
from qhl.cases import data_path
from qhl.harness import GenSpec, corpus_files, fuzz_soundness, generate_states
from qhl.lang.parser import parse_assertion, parse_command, parse_formula, parse_program_file
from qhl.lang.proofs import parse_proof_file
from qhl.prover import check_outline
from qhl.sem import Branch, CState, EvalConfig, Povd, povd_density, povd_mix

import oracles


@pytest.fixture
def verdict(capsys):
    def report(n, ok, detail, elapsed, limit):
        ok = ok and elapsed < limit
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{elapsed:.2f}s / {limit}s]")
        assert ok, detail
    return report


def test_1_addm_distribution(verdict):
    t0 = time.perf_counter()
    res = sem.run_program(parse_program_file(data_path("addm.qimp")))
    mu = res.povd
    # expected table: (v0, v1, v) -> basis state of (q0, q1), each at weight 1/4
    table = {(0, 0, 0): 0b00, (0, 1, 1): 0b01, (1, 0, 1): 0b10, (1, 1, 2): 0b11}
    got = {}
    for b in mu.branches:
        key = (b.sigma.get("v0"), b.sigma.get("v1"), b.sigma.get("v"))
        got[key] = (b.weight, int(np.argmax(np.abs(b.amps))), float(np.max(np.abs(b.amps))))
    rows_ok = set(got) == set(table) and all(
        abs(w - 0.25) <= 1e-9 and idx == table[k] and abs(mag - 1) < 1e-9 for k, (w, idx, mag) in got.items())
    p = probability_of(mu, parse_formula("v = 1"))
    sat = satisfies(mu, parse_assertion("1/2 (v = 1) (+) 1/2 (v /= 1)"))
    elapsed = time.perf_counter() - t0
    ok = len(mu) == 4 and rows_ok and abs(p - 0.5) <= 1e-9 and isinstance(sat, Satisfied)
    verdict(1, ok, f"{len(mu)} branches, table match {rows_ok}, P(v=1)={p:.12g}, {type(sat).__name__}",
            elapsed, 1)


def test_2_addm_proof(verdict):
    t0 = time.perf_counter()
    r = check_outline(parse_proof_file(data_path("addm.qhl")))
    elapsed = time.perf_counter() - t0
    verdict(2, r.overall == "ok" and not r.conditional,
            f"overall {r.overall}, {len(r.conditional)} conditional entailments", elapsed, 1)


def test_3_hhl(verdict):
    t0 = time.perf_counter()
    inst = cases.HHLInstance()
    res = sem.run_program(parse_program_file(data_path("hhl.qimp")))
    mu = res.povd
    lost = max(res.residual, 1 - mu.mass())
    # dense linear-solve oracle, independent of the builder's helper
    x = np.linalg.solve(np.diag([0.25, 0.5]), np.ones(2) / math.sqrt(2))
    x = x / np.linalg.norm(x)
    rho = sum(b.weight * qcore.reduced_pure(b.amps, mu.layout, ["q0"]) for b in mu.branches) / mu.mass()
    fid = float(np.real(np.vdot(x, rho @ x)))
    phases_ok = np.allclose(sorted(inst.phases()), [0.25, 0.5])
    proofs = {}
    for name in ("hhl_body.qhl", "hhl.qhl"):
        r = check_outline(parse_proof_file(data_path(name)))
        # every node checks; the only open steps are numeric facts, each verified up to phase
        proofs[name] = (not r.failures() and not r.errors and bool(r.conditional)
                        and all(c.kind == "numeric" for c in r.conditional))
    elapsed = time.perf_counter() - t0
    ok = phases_ok and lost < 1e-6 and res.iterations <= 200 and fid >= 1 - 1e-6 and all(proofs.values())
    verdict(3, ok, f"residual {lost:.2e} in {res.iterations} iterations, fidelity 1-{1 - fid:.1e}, "
                   f"outlines checked with numeric conditionals only: {proofs}", elapsed, 10)


def test_4_order_finding(verdict):
    t0 = time.perf_counter()
    program = parse_program_file(data_path("of.qimp"))
    res = sem.run_program(program)
    finals = {(b.sigma.get("z"), b.sigma.get("b")) for b in res.povd.branches}
    stats = res.loops[0].per_iteration
    rates = [out / active for active, out in stats if active > 1e-6]
    expected = oracles.of_success(7, 15, 4)
    rate_ok = all(abs(r - expected) <= 1e-9 for r in rates) and abs(expected - 0.5) <= 1e-9
    elapsed = time.perf_counter() - t0
    ok = finals == {(4, 1)} and res.residual < 1e-6 and res.iterations <= 60 and rate_ok
    verdict(4, ok, f"final {sorted(finals)}, residual {res.residual:.2e} in {res.iterations} iterations, "
                   f"per-iteration success {rates[0]:.12f} (oracle {expected:.12f})", elapsed, 30)


def test_5_shor(verdict):
    t0 = time.perf_counter()
    program = parse_program_file(data_path("shor.qimp"))
    post = parse_assertion("y | N /\\ y /= 1 /\\ y /= N")
    ys, terminated, sat = [], 0, 0
    for seed in range(100):
        r = sem.run_program(program, EvalConfig(mode="sample", seed=seed))
        if not len(r.povd):
            continue
        terminated += 1
        ys.append(r.povd.branches[0].sigma.get("y"))
        sat += isinstance(satisfies(r.povd, post), Satisfied)
    elapsed = time.perf_counter() - t0
    ok = terminated > 0 and set(ys) <= {3, 5} and sat == terminated
    verdict(5, ok, f"{terminated}/100 terminated, y values {sorted(set(ys))}, postcondition {sat}/{terminated}",
            elapsed, 60)


RULES = {"Skip", "Abort", "Assgn", "Seq", "Cond", "Absurd", "Conseq", "While", "Conj", "QFrame", "Sum",
         "QInit", "QUnit", "QMeas"}


def test_6_soundness_fuzz(verdict):
    t0 = time.perf_counter()
    summary = fuzz_soundness(corpus_files(data_path("corpus")), 100, EvalConfig(), 0)
    genuine = [e for e in summary.entries if not e.mutant]
    covered = {e.rule for e in genuine}
    all_100 = all(e.validation and e.validation.satisfied + e.validation.not_proven == 100 for e in genuine)
    elapsed = time.perf_counter() - t0
    ok = (len(genuine) >= 14 and RULES <= covered and all(e.check == "ok" for e in genuine) and all_100
          and summary.refuted == 0 and summary.mutant_refuted >= 1)
    verdict(6, ok, f"{len(genuine)} entries covering {len(covered & RULES)}/14 rules, refuted {summary.refuted}, "
                   f"mutant refuted {summary.mutant_refuted}", elapsed, 120)


AXIOMS = {
    "PT": [("|+0>_{a b}", "true")],
    "OdotE": [("|+>_a (.) true", "|+>_a"), ("|+>_a", "|+>_a (.) true")],
    "OdotC": [("|+>_a (.) |1>_b", "|1>_b (.) |+>_a")],
    "OdotA": [("|0>_a (.) (|1>_b (.) x = 1)", "(|0>_a (.) |1>_b) (.) x = 1"),
              ("(|0>_a (.) |1>_b) (.) x = 1", "|0>_a (.) (|1>_b (.) x = 1)")],
    "OdotO": [("x = 1 (.) y = 2", "x = 1 /\\ y = 2"), ("x = 1 /\\ y = 2", "x = 1 (.) y = 2")],
    "OdotOP": [("x = 1 (.) |+1>_{a b}", "x = 1 /\\ |+1>_{a b}"), ("x = 1 /\\ |+1>_{a b}", "x = 1 (.) |+1>_{a b}")],
    "OdotOA": [("x = 1 /\\ (|0>_a (.) |+>_b)", "(x = 1 /\\ |0>_a) (.) |+>_b"),
               ("(x = 1 /\\ |0>_a) (.) |+>_b", "x = 1 /\\ (|0>_a (.) |+>_b)")],
    "OdotOC": [("|0>_a (.) (|+>_b /\\ x = 1)", "(|0>_a (.) |+>_b) /\\ (|0>_a (.) x = 1)"),
               ("(|0>_a (.) |+>_b) /\\ (|0>_a (.) x = 1)", "|0>_a (.) (|+>_b /\\ x = 1)")],
    "ReArr": [("|0>_a |+>_b", "|+>_b |0>_a"), ("|+>_b |0>_a", "|0>_a |+>_b")],
    "Separ": [("|0>_a |+>_b", "|0+>_{a b}"), ("|0+>_{a b}", "|0>_a |+>_b")],
    "OdotT": [("|0>_a |+>_b", "|0>_a (.) |+>_b"), ("|0>_a (.) |+>_b", "|0>_a |+>_b")],
    "OMerg": [("1/4 (|0>_a) (+) 1/4 (|0>_a) (+) 1/2 (|1>_a /\\ x = 1)", "1/2 (|0>_a) (+) 1/2 (|1>_a /\\ x = 1)"),
              ("1/2 (|0>_a) (+) 1/2 (|1>_a /\\ x = 1)", "1/4 (|0>_a) (+) 1/4 (|0>_a) (+) 1/2 (|1>_a /\\ x = 1)")],
    "Oplus": [("1/3 (|0>_a /\\ x = 0) (+) 2/3 (|1>_b /\\ x = 1)", "(|0>_a /\\ x = 0) (+) (|1>_b /\\ x = 1)")],
    "OCon": [("1/3 (|01>_{a b}) (+) 2/3 (|1>_a |+>_b)", "1/3 (|0>_a) (+) 2/3 (|+>_b)")],
}


def test_7_entailment_axioms(verdict):
    t0 = time.perf_counter()
    cfg = EvalConfig()
    underived, refuted, undecided, total = [], 0, 0, 0
    for k, (name, insts) in enumerate(AXIOMS.items()):
        for j, (lhs, rhs) in enumerate(insts):
            d1, d2 = parse_assertion(lhs), parse_assertion(rhs)
            if not entails(d1, d2, cfg):
                underived.append(name)
                continue
            for mu in generate_states(GenSpec(d1, ("a", "b"), seed=100 * k + j, count=1000), cfg):
                v = satisfies(mu, d2, cfg)
                total += 1
                refuted += isinstance(v, Refuted)
                undecided += not isinstance(v, (Satisfied, Refuted))
    elapsed = time.perf_counter() - t0
    ok = not underived and refuted == 0 and undecided == 0 and len(AXIOMS) == 14
    verdict(7, ok, f"{len(AXIOMS)} axioms, underived {underived}, {total} states, refuted {refuted}, "
                   f"not decided {undecided}", elapsed, 60)


def _dens(mu):
    return {s.items: r for s, r in povd_density(mu).items() if np.trace(r).real > 1e-12}


def _close(a, b, tol):
    return set(a) == set(b) and all(np.max(np.abs(a[k] - b[k])) <= tol for k in a)


def _random_povd(rng, n=2, layout=("a", "b", "c")):
    w = rng.dirichlet(np.ones(n))
    return Povd(layout, tuple(Branch(CState.of(x=int(rng.integers(0, 2))), float(w[i]),
                                     qcore.haar_state(rng, len(layout))) for i in range(n)))


def test_8_semantics_properties(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    suite = [oracles.random_program(rng) for _ in range(300)]
    lin_bad = dm_bad = mono_bad = 0
    for k in range(200):
        prog = suite[k]
        c = parse_command(oracles.to_text(prog))
        m0, m1, p = _random_povd(rng), _random_povd(rng), float(rng.random())
        lhs = sem.eval(c, povd_mix([m0, m1], [p, 1 - p])).povd
        r0, r1 = sem.eval(c, m0).povd, sem.eval(c, m1).povd
        d0, d1 = _dens(r0), _dens(r1)
        rhs = {key: p * d0.get(key, 0) + (1 - p) * d1.get(key, 0) for key in set(d0) | set(d1)}
        rhs = {key: r for key, r in rhs.items() if np.trace(r).real > 1e-12}
        lin_bad += not _close(_dens(lhs), rhs, 1e-9)
    for prog in suite:
        c = parse_command(oracles.to_text(prog))
        mu = _random_povd(rng)
        out = sem.eval(c, mu).povd
        expected = {k: r for k, r in oracles.dm_run(prog, {s.items: r for s, r in povd_density(mu).items()},
                                                     ["a", "b", "c"]).items() if np.trace(r).real > 1e-12}
        dm_bad += not _close(_dens(out), expected, 1e-9)
        mono_bad += out.mass() > mu.mass() + 1e-12
    elapsed = time.perf_counter() - t0
    verdict(8, lin_bad == 0 and dm_bad == 0 and mono_bad == 0,
            f"linearity failures {lin_bad}/200, oracle mismatches {dm_bad}/{len(suite)}, "
            f"mass increases {mono_bad}/{len(suite)}", elapsed, 120)
