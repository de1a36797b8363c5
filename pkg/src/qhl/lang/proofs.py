"""Proof scripts: explicit derivation trees and proof outlines.

Tree format, one node per line, premises indented below their conclusion::

    [Seq] { true } q := |0>; H[q] { |+>_q }
      [QInit] { true } q := |0> { |0>_q }
      [QUnit] { |0>_q } H[q] { |+>_q }

Outline format: assertions interleaved with commands, each assertion optionally
annotated with the rule that justifies it::

    { true }
    q := |0>
    { |0>_q }          by QInit
    <=> { |0>_q } H[q] { |+>_q }   by QUnit

``<=> {F1} c {F2}`` (or ``==> {F1} c <== {F2}``) proves ``c`` locally; the frame is the
rest of the current assertion.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from fractions import Fraction

from . import ast as A
from .analysis import free_vars
from .lexer import ParseError
from .parser import Parser

RULES = {"Skip", "Abort", "Assgn", "Seq", "Cond", "Absurd", "Conseq", "While", "Conj", "QFrame", "Sum",
         "QInit", "QUnit", "QMeas"}
ENTAIL_RULES = {"PT", "OdotE", "OdotC", "OdotA", "OdotO", "OdotOP", "OdotOA", "OdotOC", "ReArr", "Separ",
                "OdotT", "OMerg", "Oplus", "OCon", "Conseq", "Fact", "AndE", "Arith"}


@dataclass(frozen=True)
class Triple:
    pre: object
    cmd: object
    post: object


@dataclass(frozen=True)
class Entailment:
    lhs: object
    rhs: object


@dataclass
class ProofNode:
    rule: str
    conclusion: Triple | Entailment
    premises: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    line: int | None = None
    note: str = ""

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def walk(self):
        yield self
        for p in self.premises:
            yield from p.walk()


@dataclass
class ProofScript:
    root: ProofNode
    program: A.Program | None = None
    spine: object = None  # command reconstructed from an outline
    steps: int = 0  # assertion-to-assertion steps in an outline
    kind: str = "tree"


def _single(d):
    return d if isinstance(d, (A.Single, A.Weighted, A.Unweighted)) else A.Single(d)


# ---------------------------------------------------------------- shared parsing


class ProofParser(Parser):
    def braced_dist(self):
        self.expect("{")
        d = self.dist()
        self.expect("}")
        return d

    def braced_formula(self):
        t = self.tok
        d = self.braced_dist()
        if not isinstance(d, A.Single):
            raise ParseError("expected a state formula here", t.line, t.col)
        return d.formula

    def param_value(self):
        if self.at("{"):
            return self.braced_dist()
        if self.accept("["):
            vals = [self.weight_value()]
            while self.accept(","):
                vals.append(self.weight_value())
            self.expect("]")
            return vals
        if self.tok.kind == "STRING":
            return self.advance().value
        return self.weight_value()

    def weight_value(self):
        t = self.advance()
        if t.kind != "NUM":
            raise ParseError("expected a number", t.line, t.col)
        w = Fraction(t.value)
        if self.accept("/"):
            w /= Fraction(self.advance().value)
        return w

    def params(self) -> dict:
        out = {}
        while self.tok.kind == "IDENT" and self.peek().kind == "OP" and self.peek().value == "=":
            key = self.ident()
            self.expect("=")
            out[key] = self.param_value()
            if not self.accept(","):
                break
        return out

    def header(self):
        """Optional ``program "file"`` directive followed by declarations."""
        path = None
        if self.accept_kw("program"):
            path = self.expect_kind("STRING").value
            self.accept(";")
        self.program = A.Program(A.Skip())
        decls = self.declarations()
        return path, decls


def _merge_program(path, decls, base_dir, program):
    from .parser import parse_program_file

    if program is None and path is not None:
        if base_dir and not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        program = parse_program_file(path)
    if program is None:
        program = A.Program(A.Skip())
    if any(decls.values()):
        program = A.Program(program.body, program.qvars + tuple(q for q in decls["qvars"] if q not in program.qvars),
                            program.gates + tuple(decls["gates"]), program.measurements + tuple(decls["measurements"]),
                            program.macros + tuple(decls["macros"]), program.init + tuple(decls["init"]),
                            program.source_dir)
    return program


# ---------------------------------------------------------------- tree format


def _logical_lines(text: str):
    out = []
    buf, start, indent = "", 0, 0
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].rstrip()
        if not buf:
            if not line.strip():
                continue
            indent = len(line) - len(line.lstrip())
            start = no
        if line.endswith("\\"):
            buf += line[:-1] + " "
            continue
        buf += line
        out.append((indent, start, buf.strip()))
        buf = ""
    if buf:
        out.append((indent, start, buf.strip()))
    return out


def _parse_tree_line(text: str, program: A.Program, lineno: int) -> ProofNode:
    p = ProofParser(text, program)
    p.expect("[")
    t = p.tok
    rule = p.ident()
    if rule not in RULES and rule not in ENTAIL_RULES:
        raise ParseError(f"unknown rule {rule}", lineno, t.col)
    params = p.params()
    p.expect("]")
    pre = p.braced_dist()
    if p.accept("|-"):
        post = p.braced_dist()
        p.done()
        return ProofNode(rule, Entailment(pre, post), [], params, lineno)
    cmd = p.commands()
    post = p.braced_dist()
    p.done()
    return ProofNode(rule, Triple(pre, cmd, post), [], params, lineno)


def parse_tree(text: str, program: A.Program) -> ProofNode:
    lines = _logical_lines(text)
    if not lines:
        raise ParseError("empty proof")
    roots: list[ProofNode] = []
    stack: list[tuple[int, ProofNode]] = []
    for indent, lineno, body in lines:
        try:
            node = _parse_tree_line(body, program, lineno)
        except ParseError as exc:
            raise ParseError(exc.msg, lineno, exc.col) from None
        while stack and stack[-1][0] >= indent:
            stack.pop()
        if stack:
            stack[-1][1].premises.append(node)
        else:
            roots.append(node)
        stack.append((indent, node))
    if len(roots) != 1:
        raise ParseError("a derivation must have exactly one root", lines[0][1])
    return roots[0]


# ---------------------------------------------------------------- outline format


@dataclass
class OAssert:
    dist: object
    rules: list
    params: dict
    line: int


@dataclass
class OCmd:
    cmd: object
    line: int


@dataclass
class OFrame:
    pre: object
    cmd: object
    post: object
    rules: list
    params: dict
    line: int


@dataclass
class OWhile:
    cond: object
    body: list
    line: int


@dataclass
class OIf:
    cond: object
    then: list
    orelse: list
    line: int


class OutlineParser(ProofParser):
    def annotation(self):
        rules, params = [], {}
        if self.accept_kw("by"):
            rules.append(self.rule_name())
            while self.accept(","):
                rules.append(self.rule_name())
            if self.tok.kind == "STRING":
                params["note"] = self.advance().value
        if self.accept_kw("with"):
            params.update(self.params())
        return rules, params

    def rule_name(self) -> str:
        t = self.tok
        name = self.ident()
        if name not in RULES and name not in ENTAIL_RULES:
            raise ParseError(f"unknown rule {name}", t.line, t.col)
        return name

    def items(self, stop=()) -> list:
        out = []
        while True:
            t = self.tok
            if t.kind == "EOF" or (t.kind == "IDENT" and t.value in stop):
                return out
            if self.at("{"):
                d = self.braced_dist()
                rules, params = self.annotation()
                out.append(OAssert(d, rules, params, t.line))
            elif self.accept("<=>"):
                f1 = self.braced_formula()
                c = self.command()
                f2 = self.braced_formula()
                rules, params = self.annotation()
                out.append(OFrame(f1, c, f2, rules, params, t.line))
            elif self.accept("==>"):
                f1 = self.braced_formula()
                c = self.command()
                self.accept(";")
                self.expect("<==")
                f2 = self.braced_formula()
                rules, params = self.annotation()
                out.append(OFrame(f1, c, f2, rules, params, t.line))
            elif self.accept_kw("while"):
                b = self.guard()
                self.expect_kw("do")
                body = self.items(stop=("od",))
                self.expect_kw("od")
                out.append(OWhile(b, body, t.line))
            elif self.accept_kw("if"):
                b = self.guard()
                self.expect_kw("then")
                c1 = self.items(stop=("else", "fi"))
                c2 = []
                if self.accept_kw("else"):
                    c2 = self.items(stop=("fi",))
                self.expect_kw("fi")
                out.append(OIf(b, c1, c2, t.line))
            else:
                out.append(OCmd(self.command(), t.line))
            self.accept(";")


class ElaborationError(ParseError):
    pass


def _odot_parts(f) -> list:
    if isinstance(f, A.Odot):
        return _odot_parts(f.left) + _odot_parts(f.right)
    if isinstance(f, A.Ket) and isinstance(f.expr, A.QTensor):
        return _odot_parts(A.Ket(f.expr.left)) + _odot_parts(A.Ket(f.expr.right))
    return [f]


def odot_difference(cur, f1):
    """Frame left over when ``f1`` is carved out of ``cur``."""
    parts = _odot_parts(cur)
    rest = list(parts)
    removed = True
    for q in _odot_parts(f1):
        if q in rest:
            rest.remove(q)
        else:
            removed = False
            break
    if not removed:
        fv = free_vars(f1)
        rest = [p for p in parts if not (free_vars(p) & fv)]
    return A.odot(*rest) if rest else A.TRUE


_INFER = {A.Skip: "Skip", A.Abort: "Abort", A.Assign: "Assgn", A.QInit: "QInit", A.Unitary: "QUnit",
          A.Measure: "QMeas"}


def _infer_rule(cmd, line) -> str:
    r = _INFER.get(type(cmd))
    if r is None:
        raise ElaborationError(f"no rule annotation for {type(cmd).__name__} step", line)
    return r


def _partition(post, weights, line):
    comps = A.as_weighted(post)
    groups, k = [], 0
    for p in weights:
        acc, grp = Fraction(0), []
        while acc < p and k < len(comps):
            acc += comps[k][0]
            grp.append(comps[k])
            k += 1
        if acc != p:
            raise ElaborationError("post-condition components do not split along the Sum weights", line)
        groups.append(A.Weighted(tuple((w / p, f) for w, f in grp)))
    if k != len(comps):
        raise ElaborationError("post-condition has extra components for Sum", line)
    return groups


def _rule_node(rules, pre, cmd, post, params, line) -> ProofNode:
    rules = list(rules) or [_infer_rule(cmd, line)]
    if "Sum" in rules:
        inner = [r for r in rules if r != "Sum"] or [_infer_rule(cmd, line)]
        if not isinstance(pre, A.Weighted):
            raise ElaborationError("Sum needs a weighted precondition", line)
        weights = [w for w, _ in pre.comps]
        groups = _partition(post, [w for w in weights if w > 0], line)
        prem, gi = [], 0
        for w, f in pre.comps:
            if w == 0:
                continue
            prem.append(_rule_node(inner, A.Single(f), cmd, groups[gi], {}, line))
            gi += 1
        return ProofNode("Sum", Triple(pre, cmd, post), prem, {"weights": [w for w in weights if w > 0]}, line)
    rule = rules[0]
    return ProofNode(rule, Triple(pre, cmd, post), [], dict(params), line)


@dataclass
class _Link:
    kind: str  # entail | triple
    node: ProofNode


def _entail_node(rules, lhs, rhs, params, line, note=""):
    rule = rules[0] if rules else "Conseq"
    node = ProofNode("Entail", Entailment(lhs, rhs), [], dict(params), line, note)
    node.params.setdefault("by", list(rules) or ["Conseq"])
    node.params["label"] = rule
    return node


class _Elab:
    def __init__(self):
        self.steps = 0

    def run(self, items) -> tuple[ProofNode, object, object, object]:
        """Return ``(node, pre, post, command)`` for an item list."""
        if not items or not isinstance(items[0], OAssert):
            line = items[0].line if items else None
            raise ElaborationError("an outline must start with an assertion", line)
        cur = items[0].dist
        first = cur
        links: list[_Link] = []
        cmds = []
        k = 1
        while k < len(items):
            it = items[k]
            if isinstance(it, OAssert):
                self.steps += 1
                links.append(_Link("entail", _entail_node(it.rules, cur, it.dist, it.params, it.line)))
                cur = it.dist
                k += 1
                continue
            if isinstance(it, OFrame):
                self.steps += 1
                if not isinstance(cur, A.Single):
                    raise ElaborationError("framing needs a state-formula assertion", it.line)
                local = _rule_node(it.rules, A.Single(it.pre), it.cmd, A.Single(it.post), it.params, it.line)
                f3 = odot_difference(cur.formula, it.pre)
                pre = A.Single(A.Odot(it.pre, f3))
                post = A.Single(A.Odot(it.post, f3))
                if pre != cur:
                    links.append(_Link("entail", _entail_node([], cur, pre, {}, it.line, "frame alignment")))
                node = ProofNode("QFrame", Triple(pre, it.cmd, post), [local], {"frame": A.Single(f3)}, it.line)
                links.append(_Link("triple", node))
                cmds.append(it.cmd)
                cur = post
                k += 1
                continue
            # command-like items need a following assertion
            if k + 1 >= len(items) or not isinstance(items[k + 1], OAssert):
                raise ElaborationError("a command must be followed by an assertion", it.line)
            nxt = items[k + 1]
            self.steps += 1
            if isinstance(it, OCmd):
                node = _rule_node(nxt.rules, cur, it.cmd, nxt.dist, nxt.params, nxt.line)
                cmd = it.cmd
            elif isinstance(it, OWhile):
                body, bpre, bpost, bcmd = self.run(it.body)
                cmd = A.While(it.cond, bcmd)
                node = ProofNode("While", Triple(cur, cmd, nxt.dist), [body], dict(nxt.params), nxt.line)
                if nxt.rules and nxt.rules != ["While"]:
                    raise ElaborationError("a loop must be closed by the While rule", nxt.line)
            else:
                n1, _, _, c1 = self.run(it.then)
                n2, _, _, c2 = self.run(it.orelse) if it.orelse else (None, None, None, A.Skip())
                cmd = A.If(it.cond, c1, c2)
                prem = [n1] + ([n2] if n2 is not None else [])
                node = ProofNode("Cond", Triple(cur, cmd, nxt.dist), prem, dict(nxt.params), nxt.line)
            links.append(_Link("triple", node))
            cmds.append(cmd)
            cur = nxt.dist
            k += 2
        return _assemble(links, first, cur), first, cur, A.seq(*cmds) if cmds else A.Skip()


def _assemble(links: list[_Link], first, last) -> ProofNode:
    triples = [i for i, l in enumerate(links) if l.kind == "triple"]
    if not triples:
        chain = [l.node for l in links]
        return ProofNode("Conseq", Entailment(first, last), chain, {}, chain[0].line if chain else None)
    segments = []
    start = 0
    for n, ti in enumerate(triples):
        end = triples[n + 1] if n + 1 < len(triples) else len(links)
        # entailments before this triple go on its pre side; trailing ones after the last triple on its post side
        before = [l.node for l in links[start:ti]]
        after = [l.node for l in links[ti + 1:end]] if n + 1 == len(triples) else []
        t = links[ti].node
        if before or after:
            pre = before[0].conclusion.lhs if before else t.conclusion.pre
            post = after[-1].conclusion.rhs if after else t.conclusion.post
            t = ProofNode("Conseq", Triple(pre, t.conclusion.cmd, post), before + [t] + after, {}, t.line)
        segments.append(t)
        start = ti + 1
    if len(segments) == 1:
        return segments[0]
    cmd = A.seq(*[s.conclusion.cmd for s in segments])
    return ProofNode("Seq", Triple(segments[0].conclusion.pre, cmd, segments[-1].conclusion.post), segments, {},
                     segments[0].line)


def parse_outline(text: str, program: A.Program) -> tuple[ProofNode, object, int]:
    p = OutlineParser(text, program)
    items = p.items()
    p.done()
    el = _Elab()
    node, _, _, spine = el.run(items)
    return node, spine, el.steps


# ---------------------------------------------------------------- entry point


def _looks_like_tree(text: str) -> bool:
    for indent, _, body in _logical_lines(text):
        if body.startswith("["):
            return True
        if body.startswith("{") or body.startswith("<=>") or body.startswith("==>"):
            return False
    return False


def parse_proof(text: str, program: A.Program | None = None, base_dir: str | None = None) -> ProofScript:
    """Parse a proof script (tree or outline) into a derivation tree."""
    # continuation backslashes only matter to the tree reader; hide them from the header scan
    hp = ProofParser("\n".join(l.rstrip()[:-1] if l.rstrip().endswith("\\") else l for l in text.splitlines()))
    path, decls = hp.header()
    rest_start = hp.tok
    body = _strip_to(text, rest_start)
    program = _merge_program(path, decls, base_dir, program)
    if _looks_like_tree(body):
        return ProofScript(parse_tree(body, program), program, None, 0, "tree")
    root, spine, steps = parse_outline(body, program)
    return ProofScript(root, program, spine, steps, "outline")


def _strip_to(text: str, tok) -> str:
    """Blank out everything before ``tok`` so line numbers are preserved."""
    if tok.kind == "EOF":
        return ""
    lines = text.splitlines()
    head = ["" for _ in lines[:tok.line - 1]]
    cur = lines[tok.line - 1]
    return "\n".join(head + [" " * (tok.col - 1) + cur[tok.col - 1:]] + lines[tok.line:])


def parse_proof_file(path: str, program: A.Program | None = None) -> ProofScript:
    with open(path) as fh:
        return parse_proof(fh.read(), program, os.path.dirname(os.path.abspath(path)))
