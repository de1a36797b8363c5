"""Classical interpretation of function and predicate symbols over 64-bit integers."""
from __future__ import annotations

import math
from fractions import Fraction

INT_MIN = -(2 ** 63)
INT_MAX = 2 ** 63 - 1


class EvalError(ArithmeticError):
    pass


def _chk(v: int) -> int:
    if not INT_MIN <= v <= INT_MAX:
        raise EvalError(f"integer overflow: {v} does not fit in 64 bits")
    return v


def _div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    return a // b


def _mod(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("modulo by zero")
    return a % b


def pow_mod(base: int, exp: int, modulus: int) -> int:
    if modulus == 0:
        raise EvalError("pow_mod with zero modulus")
    if exp < 0:
        raise EvalError("pow_mod with negative exponent")
    return pow(base, exp, modulus)


def convergents(num: int, den: int):
    """Yield the continued-fraction convergents ``(m, n)`` of ``num/den``."""
    h0, h1 = 0, 1
    k0, k1 = 1, 0
    a, b = num, den
    while b:
        q, r = divmod(a, b)
        h0, h1 = h1, q * h1 + h0
        k0, k1 = k1, q * k1 + k0
        yield h1, k1
        a, b = b, r


def cf_denom(num: int, den: int, bound: int) -> int:
    """Denominator recovered from the phase ``num/den`` by continued fractions.

    Among convergents ``m/n`` with ``n <= bound`` and ``|m/n - num/den| < 1/(2 n^2)``
    the largest such ``n`` is returned; 1 when ``num == 0`` or nothing qualifies.
    """
    if den <= 0:
        raise EvalError("cf_denom needs a positive denominator")
    if num == 0:
        return 1
    x = Fraction(num, den)
    best = 1
    for m, n in convergents(num, den):
        if n > bound:
            break
        if abs(Fraction(m, n) - x) < Fraction(1, 2 * n * n):
            best = n
    return best


def mult_order(x: int, modulus: int) -> int:
    """Least ``r >= 1`` with ``x^r = 1 (mod N)``; 0 when none exists."""
    if modulus <= 1 or math.gcd(x, modulus) != 1:
        return 0
    r, acc = 1, x % modulus
    while acc != 1:
        acc = acc * x % modulus
        r += 1
    return r


def _gcd(a: int, b: int) -> int:
    return math.gcd(a, b)


FUNCTIONS = {
    "+": (2, lambda a, b: a + b),
    "-": (2, lambda a, b: a - b),
    "*": (2, lambda a, b: a * b),
    "neg": (1, lambda a: -a),
    "div": (2, _div),
    "mod": (2, _mod),
    "pow_mod": (3, pow_mod),
    "gcd": (2, _gcd),
    "cf_denom": (3, cf_denom),
    "ord": (2, mult_order),
    "abs": (1, abs),
    "min": (2, min),
    "max": (2, max),
}

INFIX = {"+", "-", "*", "div", "mod"}


def _divides(a: int, b: int) -> bool:
    if a == 0:
        return b == 0
    return b % a == 0


PREDICATES = {
    "=": lambda a, b: a == b,
    "/=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "|": _divides,
}


def apply_function(fn: str, args: list[int]) -> int:
    try:
        arity, impl = FUNCTIONS[fn]
    except KeyError:
        raise EvalError(f"unknown function {fn}") from None
    if len(args) != arity:
        raise EvalError(f"{fn} expects {arity} arguments, got {len(args)}")
    return _chk(impl(*args))


def apply_predicate(op: str, args: list[int]) -> bool:
    return PREDICATES[op](*args)
