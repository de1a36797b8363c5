import math

import numpy as np
import pytest

from qhl import cases, qcore, sem
from qhl.cases import BuildError, HHLInstance, OFInstance
from qhl.lang import ast as A
from qhl.lang import printer
from qhl.lang.parser import parse_program, parse_program_file
from qhl.lang.proofs import parse_proof
from qhl.prover import check_outline

import oracles


def expm_i(a, t, terms=80):
    """Oracle for exp(i a t) by scaling and squaring a Taylor series."""
    k = max(0, int(np.ceil(np.log2(max(np.abs(a).sum() * abs(t), 1)))) + 2)
    m = 1j * a * t / 2 ** k
    out, term = np.eye(len(a), dtype=complex), np.eye(len(a), dtype=complex)
    for j in range(1, terms):
        term = term @ m / j
        out = out + term
    for _ in range(k):
        out = out @ out
    return out


def q_reduced_fidelity(povd, inst):
    """Fidelity of the q-register reduced state of the v=1 branches with the dense solution."""
    branches = [b for b in povd.branches if b.sigma.get("v") == 1]
    mass = sum(b.weight for b in branches)
    rho = sum(b.weight * qcore.reduced_pure(b.amps, povd.layout, list(inst.q)) for b in branches) / mass
    x = inst.solution()
    return float(np.real(np.vdot(x, rho @ x)))


NON_DIAG = np.array([[0.375, 0.125], [0.125, 0.375]])  # eigenvalues 1/2 and 1/4


class TestHHLBuild:
    def test_round_trip(self):
        text, program, warnings = cases.build_hhl()
        assert not warnings
        assert parse_program(printer.program(program)) == program
        assert parse_program(text) == program

    def test_bundled_file_matches_builder(self):
        text, program, _ = cases.build_hhl()
        assert parse_program_file(cases.data_path("hhl.qimp")) == program

    def test_uc_identity_on_zero_clock(self):
        uc = cases.hhl_matrices(HHLInstance())["Uc"]
        assert np.allclose(uc[:2, :2], np.eye(2))

    @pytest.mark.parametrize("j", [1, 2, 3])
    def test_uc_rotation(self, j):
        inst = HHLInstance()
        uc = cases.hhl_matrices(inst)["Uc"]
        out = uc @ np.eye(8)[2 * j]
        s = inst.C / j
        assert np.allclose(out[2 * j:2 * j + 2], [math.sqrt(1 - s * s), s])

    def test_uc_unitary(self):
        uc = cases.hhl_matrices(HHLInstance(C=0.5))["Uc"]
        assert np.allclose(uc.conj().T @ uc, np.eye(8))

    @pytest.mark.parametrize("a", [np.diag([0.25, 0.5]), NON_DIAG])
    def test_u_is_matrix_exponential(self, a):
        inst = HHLInstance(A=a)
        assert np.allclose(cases.hhl_matrices(inst)["U"], expm_i(a, inst.t_evo), atol=1e-10)

    def test_uf_zero_control_identity(self):
        _, program, _ = cases.build_hhl()
        res = sem.Resolver(program)
        uf = res.gate(A.GateRef("Uf"), sem.CState(), 3).to_matrix()
        assert np.allclose(uf[:2, :2], np.eye(2))
        u = cases.hhl_matrices(HHLInstance())["U"]
        assert np.allclose(uf[2:4, 2:4], u)
        assert np.allclose(uf[6:8, 6:8], u @ u @ u)

    def test_ub_prepares_b(self):
        inst = HHLInstance(b=np.array([0.6, 0.8j]))
        ub = cases.hhl_matrices(inst)["Ub"]
        assert np.allclose(ub[:, 0], inst.b)

    @pytest.mark.parametrize("kw,msg", [
        ({"A": np.array([[0.25, 0.1], [0.0, 0.5]])}, "Hermitian"),
        ({"b": np.array([1.0, 1.0])}, "unit"),
        ({"A": np.diag([0.25, 1.0])}, "between 0 and 1"),
        ({"C": 1.5}, "C must"),
        ({"A": np.eye(4) * 0.25}, "2x2"),
    ])
    def test_invalid(self, kw, msg):
        with pytest.raises(BuildError, match=msg):
            cases.build_hhl(HHLInstance(**kw))

    def test_inexact_phase_warns(self):
        _, _, warnings = cases.build_hhl(HHLInstance(A=np.diag([0.3, 0.5])))
        assert warnings and "approximate" in warnings[0]


class TestHHLRun:
    @pytest.mark.parametrize("a,b", [
        (np.diag([0.25, 0.5]), np.ones(2) / math.sqrt(2)),
        (NON_DIAG, np.array([1.0, 0.0])),
        (NON_DIAG, np.array([0.6, 0.8])),
    ])
    def test_solution(self, a, b):
        inst = HHLInstance(A=a, b=b)
        _, program, _ = cases.build_hhl(inst)
        res = sem.run_program(program)
        assert 1 - res.povd.mass() < 1e-6 and res.iterations <= 200
        assert q_reduced_fidelity(res.povd, inst) >= 1 - 1e-6

    def test_success_probability(self):
        # exact phases 1/4 and 1/2 give clock values 1 and 2; success = sum |b_j|^2 (C/j)^2
        inst = HHLInstance()
        _, program, _ = cases.build_hhl(inst)
        res = sem.run_program(program, sem.EvalConfig(max_iter=1))
        active, exited = res.loops[0].per_iteration[0]
        assert exited / active == pytest.approx(0.5 * 1 + 0.5 * 0.25, abs=1e-9)

    def test_outlines_check(self):
        inst = HHLInstance(A=NON_DIAG, b=np.array([0.6, 0.8]))
        _, program, _ = cases.build_hhl(inst)
        for text in (cases.hhl_body_outline(inst, header=False), cases.hhl_outline(inst)):
            text = "\n".join(l for l in text.splitlines() if not l.startswith("program "))
            r = check_outline(parse_proof(text, program), program)
            assert r.overall == "conditional"
            assert {c.kind for c in r.conditional} == {"numeric"}


class TestOF:
    def test_round_trip(self):
        text, program = cases.build_of()
        assert parse_program(printer.program(program)) == program
        assert parse_program_file(cases.data_path("of.qimp")) == program

    @pytest.mark.parametrize("x", [5, 6, 10, 15, 1, 16])
    def test_invalid_x(self, x):
        with pytest.raises(BuildError):
            cases.build_of(OFInstance(x=x))

    def test_register_too_small(self):
        with pytest.raises(BuildError):
            cases.build_of(OFInstance(L=3))

    @pytest.mark.parametrize("x", [2, 4, 7, 8, 11, 13, 14])
    def test_terminates_at_order(self, x):
        _, program = cases.build_of(OFInstance(x=x))
        res = sem.run_program(program)
        assert res.residual < 1e-6 and res.iterations <= 60
        assert {(b.sigma.get("z"), b.sigma.get("b")) for b in res.povd.branches} == {(oracles.order(x, 15), 1)}

    @pytest.mark.parametrize("N,x,t", [(15, 7, 4), (15, 2, 3), (15, 11, 5), (21, 2, 6)])
    def test_first_iteration_success_matches_oracle(self, N, x, t):
        _, program = cases.build_of(OFInstance(N=N, x=x, t=t))
        res = sem.run_program(program, sem.EvalConfig(max_iter=1))
        active, exited = res.loops[0].per_iteration[0]
        assert exited / active == pytest.approx(oracles.of_success(x, N, t), abs=1e-9)

    def test_outcome_table(self):
        # first iteration of N=15, x=7, t=4: outcomes 0, 4, 8, 12 at 1/4 each
        out = oracles.of_outcomes(7, 15, 4)
        assert sorted(out) == [0, 4, 8, 12]
        assert all(p == pytest.approx(0.25) for p, _ in out.values())
        assert [out[z][1] for z in (0, 4, 8, 12)] == [1, 4, 2, 4]

    def test_precision_t(self):
        assert OFInstance.precision_t(15, 0.25) == 11


class TestShor:
    def test_parses(self):
        p = parse_program(cases.shor_program_text())
        assert parse_program_file(cases.data_path("shor.qimp")) == p

    @pytest.mark.parametrize("seed", range(10))
    def test_sample_factor(self, seed):
        p = parse_program_file(cases.data_path("shor.qimp"))
        r = sem.run_program(p, sem.EvalConfig(mode="sample", seed=seed))
        y = r.povd.branches[0].sigma.get("y")
        assert 15 % y == 0 and y not in (1, 15)

    def test_even_n(self):
        p = parse_program(cases.shor_program_text(N=14))
        r = sem.run_program(p, sem.EvalConfig(mode="sample", seed=0))
        assert r.povd.branches[0].sigma.get("y") == 2
