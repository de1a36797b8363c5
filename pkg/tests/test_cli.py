import json
import os

import pytest

from qhl.cases import data_path
from qhl.cli import FAIL, OK, UNSUPPORTED, USAGE, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    return code, json.loads(out)


class TestRun:
    def test_addm(self, capsys):
        code, out = run_json(capsys, "run", "addm.qimp")
        assert code == OK
        assert out["schema"] == 1 and len(out["branches"]) == 4
        assert all(b["weight"] == pytest.approx(0.25) for b in out["branches"])

    def test_text_output(self, capsys):
        code, out, _ = run(capsys, "run", "addm.qimp")
        assert code == OK and "4 branches" in out

    def test_diverge(self, capsys):
        code, out = run_json(capsys, "run", "diverge.qimp", "--max-iter", "20")
        assert code == OK
        assert out["residual"] == pytest.approx(1) and out["warnings"]

    def test_sample_of(self, capsys):
        code, out = run_json(capsys, "run", "of.qimp", "--mode", "sample", "--seed", "1")
        assert code == OK
        (b,) = out["branches"]
        assert b["sigma"]["z"] == 4 and b["sigma"]["b"] == 1

    def test_set_override(self, capsys):
        code, out = run_json(capsys, "run", "of.qimp", "--set", "x=2")
        assert code == OK
        assert {br["sigma"]["z"] for br in out["branches"]} == {4}

    def test_options_before_subcommand(self, capsys):
        code, out = run_json(capsys, "--tol", "1e-3", "run", "of.qimp")
        assert code == OK and out["residual"] < 1e-3

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, "run", "nope.qimp")
        assert code == USAGE and "nope.qimp" in err

    def test_parse_error(self, capsys, tmp_path):
        p = tmp_path / "bad.qimp"
        p.write_text("x := (1 +")
        code, _, err = run(capsys, "run", str(p))
        assert code == USAGE and "1:" in err

    def test_bad_set(self):
        with pytest.raises(SystemExit) as exc:
            main(["run", "addm.qimp", "--set", "x"])
        assert exc.value.code == 2


class TestCheck:
    def test_assert_satisfied(self, capsys):
        code, out, _ = run(capsys, "check", "addm.qimp", "--assert", "1/2 (v = 1) (+) 1/2 (v /= 1)")
        assert code == OK and out.strip() == "Satisfied"

    def test_assert_refuted(self, capsys):
        code, out = run_json(capsys, "check", "addm.qimp", "--assert", "3/4 (v = 1) (+) 1/4 (v /= 1)")
        assert code == FAIL and out["verdict"] == "Refuted"

    @pytest.mark.parametrize("f,p", [("v = 1", 0.5), ("v = 0", 0.25), ("true", 1.0)])
    def test_prob(self, capsys, f, p):
        code, out = run_json(capsys, "check", "addm.qimp", "--prob", f)
        assert code == OK and out["probability"] == pytest.approx(p, abs=1e-9)

    def test_prob_not_decisive(self, capsys, tmp_path):
        prog = tmp_path / "mix.qimp"
        prog.write_text("q := |0>; H[q]; x := M[q]; x := 0")
        code, out = run_json(capsys, "check", str(prog), "--prob", "|+>_q")
        assert code == FAIL and out["probability"] is None and "NotDecisive" in out["probability_note"]

    def test_needs_assertion(self, capsys):
        code, _, _ = run(capsys, "check", "addm.qimp")
        assert code == USAGE


class TestProve:
    def test_addm(self, capsys):
        code, out = run_json(capsys, "prove", "addm.qhl")
        assert code == OK and out["overall"] == "ok" and not out["conditional"]

    def test_hhl_conditional_exit(self, capsys):
        code, out = run_json(capsys, "prove", "hhl.qhl")
        assert code == FAIL and out["overall"] == "conditional"

    def test_hhl_allow_conditional(self, capsys):
        code, out = run_json(capsys, "prove", "hhl_body.qhl", "--allow-conditional", "--validate", "20")
        assert code == OK
        assert out["validation"]["satisfied"] + out["validation"]["not_proven"] == 20
        assert out["validation"]["refuted"] == 0

    def test_explicit_program(self, capsys):
        code, _, _ = run(capsys, "prove", "addm.qhl", "--program", "addm.qimp")
        assert code == OK

    def test_failed_proof(self, capsys, tmp_path):
        p = tmp_path / "bad.qhl"
        p.write_text("[QUnit] { |0>_q } H[q] { |1>_q }")
        code, out, _ = run(capsys, "prove", str(p))
        assert code == FAIL and "rule-shape-mismatch" in out

    def test_unsupported_validation(self, capsys, tmp_path):
        p = tmp_path / "neg.qhl"
        p.write_text("[Skip] { ~ |0>_q } skip { ~ |0>_q }")
        code, _, _ = run(capsys, "prove", str(p), "--validate", "5")
        assert code == UNSUPPORTED


class TestEntail:
    def test_proven(self, capsys):
        code, out = run_json(capsys, "entail", "|0>_a (.) |1>_b", "|01>_{a b}")
        assert code == OK and out["result"] == "proven" and "Separ" in out["rules"]

    def test_unknown(self, capsys):
        code, out = run_json(capsys, "entail", "x = 1", "x = 2")
        assert code == FAIL and out["result"] in ("unknown", "refuted")

    def test_parse_error(self, capsys):
        code, _, _ = run(capsys, "entail", "|0>_q (.) |1>_q", "true")
        assert code == USAGE


class TestFuzz:
    def test_default_corpus(self, capsys):
        code, out = run_json(capsys, "fuzz", "--trials", "10")
        assert code == OK and out["ok"] and out["refuted"] == 0 and out["mutant_refuted"] > 0


class TestBuilders:
    def test_build_hhl_default(self, capsys):
        code, out = run_json(capsys, "build-hhl")
        assert code == OK and out["phases"] == pytest.approx([0.25, 0.5])
        assert not out["warnings"]

    def test_build_hhl_out(self, capsys, tmp_path):
        code, out = run_json(capsys, "build-hhl", "--A", "0.375 0.125; 0.125 0.375", "--b", "1,0",
                             "--out", str(tmp_path))
        assert code == OK
        assert sorted(os.listdir(tmp_path)) == ["hhl.qhl", "hhl.qimp", "hhl_body.qhl"]
        code, proof = run_json(capsys, "prove", str(tmp_path / "hhl.qhl"), "--allow-conditional")
        assert code == OK and proof["overall"] == "conditional"

    def test_build_hhl_invalid(self, capsys):
        code, _, err = run(capsys, "build-hhl", "--C", "3")
        assert code == USAGE and "C must" in err

    def test_build_of(self, capsys, tmp_path):
        code, out = run_json(capsys, "build-of", "--x", "2", "--out", str(tmp_path))
        assert code == OK
        code, res = run_json(capsys, "run", str(tmp_path / "of.qimp"))
        assert {b["sigma"]["z"] for b in res["branches"]} == {4}

    def test_build_of_non_coprime(self, capsys):
        code, _, err = run(capsys, "build-of", "--x", "5")
        assert code == USAGE and "coprime" in err

    def test_data_path_fallback_is_bundled(self):
        assert os.path.exists(data_path("addm.qimp"))
