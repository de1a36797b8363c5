import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhl import qcore, sem
from qhl.cases import data_path
from qhl.lang.parser import parse_command, parse_program, parse_program_file
from qhl.sem import Branch, CState, EvalConfig, Povd, point_povd, povd_density, povd_mix

import oracles

LAYOUT = ("a", "b", "c")


def densities_close(got: dict, expected: dict, atol=1e-9) -> bool:
    """Compare {CState: rho} with the oracle's {sorted-items: rho}; zero-trace entries are ignored."""
    g = {s.items: r for s, r in got.items() if np.trace(r).real > atol}
    e = {k: r for k, r in expected.items() if np.trace(r).real > atol}
    if set(g) != set(e):
        return False
    return all(np.allclose(g[k], e[k], atol=atol) for k in g)


def random_povd(rng, n_branches=3, layout=LAYOUT):
    bs = []
    w = rng.dirichlet(np.ones(n_branches))
    for i in range(n_branches):
        sigma = CState.of(x=int(rng.integers(0, 2)), y=int(rng.integers(0, 2)))
        bs.append(Branch(sigma, float(w[i]), qcore.haar_state(rng, len(layout))))
    return Povd(layout, tuple(bs))


def oracle_state(mu: Povd) -> dict:
    return {s.items: r for s, r in povd_density(mu).items()}


class TestAddM:
    def test_four_branches(self):
        res = sem.run_program(parse_program_file(data_path("addm.qimp")))
        assert len(res.povd) == 4
        assert all(abs(b.weight - 0.25) < 1e-12 for b in res.povd.branches)
        vs = sorted(b.sigma.get("v") for b in res.povd.branches)
        assert vs == [0, 1, 1, 2]

    def test_marginal(self):
        res = sem.run_program(parse_program_file(data_path("addm.qimp")))
        assert abs(res.povd.marginal(lambda s: s.get("v") == 1) - 0.5) < 1e-12

    def test_deterministic_across_runs(self):
        p = parse_program_file(data_path("addm.qimp"))
        a, b = sem.run_program(p), sem.run_program(p)
        assert [x.sigma for x in a.povd.branches] == [x.sigma for x in b.povd.branches]


class TestBasics:
    def test_skip_identity(self):
        mu = random_povd(np.random.default_rng(0))
        out = sem.eval(parse_command("skip"), mu).povd
        assert densities_close(povd_density(out), oracle_state(mu))

    def test_abort_empty(self):
        mu = point_povd(("q",))
        out = sem.eval(parse_command("abort"), mu)
        assert len(out.povd) == 0 and out.povd.mass() == 0

    def test_while_false(self):
        mu = random_povd(np.random.default_rng(1))
        out = sem.eval(parse_command("while false do H[a] od"), mu)
        assert densities_close(povd_density(out.povd), oracle_state(mu))
        assert out.residual == 0

    def test_diverge(self):
        res = sem.run_program(parse_program_file(data_path("diverge.qimp")), EvalConfig(max_iter=50))
        assert res.povd.mass() == 0
        assert abs(res.residual - 1) < 1e-12
        assert res.warnings

    def test_unmentioned_vars_are_zero(self):
        mu = point_povd(("q",))
        out = sem.eval(parse_command("x := y + 1"), mu).povd
        assert out.branches[0].sigma == CState.of(x=1)

    def test_zero_values_not_stored(self):
        assert CState.of(x=0, y=2).items == (("y", 2),)
        assert CState.of(y=2).set("y", 0) == CState()

    def test_geometric_loop(self):
        # repeat-until-success on a fair coin: exit mass converges to 1
        c = parse_command("v := 0; while v = 0 do q := |0>; H[q]; v := M[q] od")
        res = sem.eval(c, point_povd(("q",)), None, EvalConfig(loop_tol=1e-12, prune=0.0))
        assert res.residual <= 1e-12
        assert 1 - res.povd.mass() <= 1e-12 + 1e-15
        assert 35 <= res.iterations <= 45

    def test_pruning_bounded(self):
        # with pruning, lost mass is at most the prune threshold per iteration on top of the loop tolerance
        c = parse_command("v := 0; while v = 0 do q := |0>; H[q]; v := M[q] od")
        res = sem.eval(c, point_povd(("q",)), None, EvalConfig(loop_tol=1e-12))
        assert 1 - res.povd.mass() <= 1e-12 + res.iterations * 1e-12

    def test_max_iter_reports_residual(self):
        c = parse_command("v := 0; while v = 0 do q := |0>; H[q]; v := M[q] od")
        res = sem.eval(c, point_povd(("q",)), None, EvalConfig(max_iter=3))
        assert abs(res.residual - 0.125) < 1e-12
        assert abs(res.povd.mass() - 0.875) < 1e-12

    def test_random_uniform(self):
        res = sem.eval(parse_command("x := random(1, 4)"), point_povd(("q",)))
        assert sorted(b.sigma.get("x") for b in res.povd.branches) == [1, 2, 3, 4]
        assert all(abs(b.weight - 0.25) < 1e-12 for b in res.povd.branches)

    def test_coalescing_merges_phase_equal(self):
        # HZH = X up to phase, so a single branch remains
        res = sem.eval(parse_command("H[q]; Z[q]; H[q]"), point_povd(("q",)))
        assert len(res.povd) == 1
        assert np.allclose(np.abs(res.povd.branches[0].amps), [0, 1])


class TestMixDensity:
    def test_mix_example(self):
        a = point_povd(("q",), CState.of(x=1))
        b = point_povd(("q",), CState.of(x=2), np.array([0, 1]))
        mu = povd_mix([a, b], [0.25, 0.75])
        d = povd_density(mu)
        assert np.allclose(d[CState.of(x=1)], np.diag([0.25, 0]))
        assert np.allclose(d[CState.of(x=2)], np.diag([0, 0.75]))

    def test_mix_coalesces(self):
        a = point_povd(("q",))
        b = point_povd(("q",), amps=-np.array([1, 0]))
        mu = povd_mix([a, b], [0.5, 0.5])
        assert len(mu) == 1 and abs(mu.mass() - 1) < 1e-12

    def test_mix_layout_mismatch(self):
        with pytest.raises(ValueError):
            povd_mix([point_povd(("a",)), point_povd(("b",))], [0.5, 0.5])

    def test_scaled(self):
        mu = point_povd(("q",)).scaled(0.3)
        assert abs(mu.mass() - 0.3) < 1e-15


class TestAgainstDensityOracle:
    @settings(max_examples=150, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_random_programs(self, seed):
        rng = np.random.default_rng(seed)
        prog = oracles.random_program(rng)
        mu = random_povd(rng, 2)
        got = sem.eval(parse_command(oracles.to_text(prog)), mu).povd
        expected = oracles.dm_run(prog, oracle_state(mu), list(LAYOUT))
        assert densities_close(povd_density(got), expected)

    @pytest.mark.parametrize("seed", range(5))
    def test_loops(self, seed):
        rng = np.random.default_rng(100 + seed)
        body = ("seq", ("unitary", "H", ("a",)), ("measure", "x", ("a",)), oracles.random_program(rng, max_meas=0))
        prog = ("seq", ("assign", "x", 0), ("while", "x", 0, body))
        mu = random_povd(rng, 2)
        res = sem.eval(parse_command(oracles.to_text(prog)), mu, None, EvalConfig(loop_tol=1e-15))
        expected = oracles.dm_run(prog, oracle_state(mu), list(LAYOUT))
        assert densities_close(povd_density(res.povd), expected, atol=1e-8)


class TestProperties:
    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_linearity(self, seed):
        rng = np.random.default_rng(seed)
        c = parse_command(oracles.to_text(oracles.random_program(rng)))
        m1, m2 = random_povd(rng, 2), random_povd(rng, 2)
        p = float(rng.random())
        lhs = sem.eval(c, povd_mix([m1, m2], [p, 1 - p])).povd
        r1, r2 = sem.eval(c, m1).povd, sem.eval(c, m2).povd
        rhs = povd_mix([r1, r2], [p, 1 - p]) if len(r1) + len(r2) else r1
        a = {s.items: r for s, r in povd_density(lhs).items()}
        assert densities_close(povd_density(rhs), a)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_mass_non_increasing(self, seed):
        rng = np.random.default_rng(seed)
        c = parse_command(oracles.to_text(oracles.random_program(rng)))
        mu = random_povd(rng, 3)
        assert sem.eval(c, mu).povd.mass() <= mu.mass() + 1e-9

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2 ** 31))
    def test_abort_free_preserves_mass(self, seed):
        rng = np.random.default_rng(seed)
        prog = oracles.random_program(rng)
        if "abort" in repr(prog):
            return
        mu = random_povd(rng, 2)
        assert abs(sem.eval(parse_command(oracles.to_text(prog)), mu).povd.mass() - mu.mass()) < 1e-9


class TestSampling:
    def test_frequency(self):
        p = parse_program_file(data_path("addm.qimp"))
        hits = 0
        for seed in range(10000):
            r = sem.run_program(p, EvalConfig(mode="sample", seed=seed))
            hits += r.povd.branches[0].sigma.get("v") == 1
        assert abs(hits / 10000 - 0.5) <= 0.02

    def test_seed_determinism(self):
        p = parse_program_file(data_path("of.qimp"))
        a = sem.run_program(p, EvalConfig(mode="sample", seed=11))
        b = sem.run_program(p, EvalConfig(mode="sample", seed=11))
        assert a.povd.branches[0].sigma == b.povd.branches[0].sigma
        assert np.allclose(a.povd.branches[0].amps, b.povd.branches[0].amps)

    def test_sample_abort(self):
        r = sem.run_program(parse_program("q := |0>; abort"), EvalConfig(mode="sample"))
        assert len(r.povd) == 0 and r.warnings

    def test_report_schema(self):
        r = sem.report(sem.run_program(parse_program_file(data_path("addm.qimp"))))
        assert r["schema"] == 1 and len(r["branches"]) == 4
        assert r["layout"] == ["q0", "q1"]
