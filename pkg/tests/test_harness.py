import numpy as np
import pytest

from qhl import qcore
from qhl.assertions import Satisfied, UnsupportedFragment, sat_state, satisfies
from qhl.cases import data_path
from qhl.harness import GenSpec, corpus_files, fuzz_soundness, generate_states
from qhl.lang.parser import parse_assertion, parse_formula
from qhl.sem import EvalConfig


def gen(text, layout=("q", "p"), count=5, seed=0, **kw):
    return generate_states(GenSpec(parse_assertion(text), layout, seed=seed, count=count, **kw))


class TestGenerate:
    def test_classical(self):
        states = gen("v = 0")
        assert len(states) == 5
        for mu in states:
            assert all(b.sigma.get("v") == 0 for b in mu.branches)
            assert abs(mu.mass() - 1) < 1e-12

    def test_haar_parts_differ(self):
        a, b = gen("v = 0", count=2)
        assert not np.allclose(a.branches[0].amps, b.branches[0].amps)

    def test_ket_with_free_rest(self):
        for mu in gen("|0>_q (.) true"):
            for b in mu.branches:
                assert sat_state(b.sigma, qcore.Operator(mu.layout, mu.density(b.sigma)), parse_formula("|0>_q"))

    def test_weighted(self):
        d = parse_assertion("1/2 (v = 1) (+) 1/2 (v /= 1)")
        for mu in gen("1/2 (v = 1) (+) 1/2 (v /= 1)"):
            assert isinstance(satisfies(mu, d), Satisfied)
            assert abs(mu.marginal(lambda s: s.get("v") == 1) - 0.5) < 1e-9

    def test_ranges(self):
        for mu in gen("x > 0", ranges={"x": (5, 9)}, count=20):
            for b in mu.branches:
                assert 5 <= b.sigma.get("x") <= 9

    def test_seed_determinism(self):
        a, b = gen("|+>_q /\\ x < 2", seed=3), gen("|+>_q /\\ x < 2", seed=3)
        for m1, m2 in zip(a, b):
            assert [x.sigma for x in m1.branches] == [x.sigma for x in m2.branches]
            assert all(np.allclose(x.amps, y.amps) for x, y in zip(m1.branches, m2.branches))

    def test_every_state_verified(self):
        text = "1/3 (|0>_q /\\ x = 1) (+) 2/3 (|1>_q (.) |+>_p)"
        d = parse_assertion(text)
        for mu in gen(text, count=30):
            assert isinstance(satisfies(mu, d), Satisfied)

    def test_unsupported_reported(self):
        with pytest.raises(UnsupportedFragment) as err:
            gen("~ |0>_q")
        assert "~|0>_q" in str(err.value)

    def test_unsatisfiable_classical(self):
        with pytest.raises(UnsupportedFragment):
            gen("x = 1 /\\ x = 2")


class TestFuzz:
    def test_corpus(self):
        summary = fuzz_soundness([data_path("corpus")], 30, EvalConfig(), 0)
        assert summary.ok
        assert summary.refuted == 0
        assert summary.mutant_refuted >= 1
        assert not summary.skipped

    def test_corpus_listing(self):
        files = corpus_files(data_path("corpus"))
        assert len(files) >= 15
        assert any("mutants" in f for f in files)

    def test_assgn_entry(self):
        s = fuzz_soundness([data_path("corpus/assgn.qhl")], 100)
        (e,) = s.entries
        assert e.check == "ok" and e.validation.satisfied == 100

    def test_summary_json(self):
        s = fuzz_soundness([data_path("corpus/qmeas.qhl")], 10)
        out = s.to_json()
        assert out["schema"] == 1 and out["ok"] and out["entries"][0]["validation"]["refuted"] == 0
        assert "qmeas" in s.table()
