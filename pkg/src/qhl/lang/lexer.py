from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(ValueError):
    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        self.msg, self.line, self.col = msg, line, col
        loc = f"{line}:{col}: " if line is not None else ""
        super().__init__(loc + msg)


@dataclass(frozen=True)
class Token:
    kind: str  # NUM IDENT KET BRA SUB MATRIX STRING OP EOF
    value: object
    line: int
    col: int
    glued: bool = False  # no whitespace before this token


OPS = ["<=>", "==>", "<==", "(.)", "(+)", ":=", "/=", "<=", ">=", "/\\", "\\/", "->", "|-",
       "+", "-", "*", "/", "^", "(", ")", "[", "]", "{", "}", ",", ";", ".", "|", "<", ">", "=", "~", ":"]

_WS = re.compile(r"(?:\s+|#[^\n]*)+")
_KET = re.compile(r"\|([01+\-]+)>")
_BRA = re.compile(r"<([01]+)\|")
_SUB = re.compile(r"_(?:\{([^}]*)\}|([A-Za-z][A-Za-z0-9']*))")
_NUM = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?j?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*")
_STRING = re.compile(r'"([^"\n]*)"')


def _split_vars(text: str) -> tuple:
    return tuple(v for v in re.split(r"[\s,]+", text.strip()) if v)


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(src)
    line, line_start = 1, 0

    def pos(k):
        return line, k - line_start + 1

    while i < n:
        m = _WS.match(src, i)
        glued = True
        if m:
            chunk = m.group(0)
            nl = chunk.count("\n")
            if nl:
                line += nl
                line_start = i + chunk.rfind("\n") + 1
            i = m.end()
            glued = False
            if i >= n:
                break
        ln, col = pos(i)
        prev = toks[-1] if toks else None
        if src.startswith("{{", i):
            end = src.find("}}", i + 2)
            if end < 0:
                raise ParseError("unterminated matrix literal", ln, col)
            raw = src[i + 2:end]
            line += raw.count("\n")
            toks.append(Token("MATRIX", raw, ln, col, glued))
            i = end + 2
            continue
        if glued and prev is not None and (prev.kind == "KET" or (prev.kind == "OP" and prev.value == ")")):
            m = _SUB.match(src, i)
            if m:
                toks.append(Token("SUB", _split_vars(m.group(1) if m.group(1) is not None else m.group(2)), ln, col, glued))
                i = m.end()
                continue
            if prev.kind == "KET":
                m = _BRA.match(src, i)
                if m:
                    toks.append(Token("BRA", m.group(1), ln, col, glued))
                    i = m.end()
                    continue
        m = _KET.match(src, i)
        if m:
            toks.append(Token("KET", m.group(1), ln, col, glued))
            i = m.end()
            continue
        m = _NUM.match(src, i)
        if m:
            toks.append(Token("NUM", m.group(0), ln, col, glued))
            i = m.end()
            continue
        m = _IDENT.match(src, i)
        if m:
            toks.append(Token("IDENT", m.group(0), ln, col, glued))
            i = m.end()
            continue
        m = _STRING.match(src, i)
        if m:
            toks.append(Token("STRING", m.group(1), ln, col, glued))
            i = m.end()
            continue
        for op in OPS:
            if src.startswith(op, i):
                toks.append(Token("OP", op, ln, col, glued))
                i += len(op)
                break
        else:
            raise ParseError(f"unexpected character {src[i]!r}", ln, col)
    ln, col = pos(i)
    toks.append(Token("EOF", None, ln, col))
    return toks
