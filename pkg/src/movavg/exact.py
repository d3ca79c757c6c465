"""Exact arithmetic in multi-quadratic number fields.

An :class:`ExactScalar` is a finite sum ``sum_D c_D * sqrt(D)`` with rational
coefficients ``c_D`` and distinct square-free ``D >= 1``.  Such numbers form a
field (every finite set of square roots generates one), the square roots of
distinct square-free integers are linearly independent over Q, and so

* zero testing is syntactic (all coefficients vanish),
* signs are decided by interval evaluation with increasing precision, which
  always terminates for a nonzero value,
* inverses follow from multiplying through by Galois conjugates.

That is enough to compare torus coordinates like ``frac(5*sqrt(2) - 5)``
exactly, which is what tower and set-measure certificates need.
"""

from __future__ import annotations

import ast
import math
import numbers
import re
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Union

__all__ = [
    "ExactScalar",
    "Number",
    "as_exact",
    "exact_sqrt",
    "rational_rank",
    "parse_exact",
    "GOLDEN",
    "SQRT2M1",
    "NAMED_CONSTANTS",
]

Number = Union[int, Fraction, "ExactScalar"]


@lru_cache(maxsize=4096)
def _prime_factors(n: int) -> tuple[int, ...]:
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out.append(n)
    return tuple(out)


@lru_cache(maxsize=4096)
def _square_split(n: int) -> tuple[int, int]:
    """Return (s, D) with n = s**2 * D and D square-free."""
    if n == 0:
        return 0, 1
    s, D = 1, 1
    p = 2
    while p * p <= n:
        e = 0
        while n % p == 0:
            n //= p
            e += 1
        s *= p ** (e // 2)
        if e % 2:
            D *= p
        p += 1 if p == 2 else 2
    D *= n
    return s, D


def _mul_terms(a: dict, b: dict) -> dict:
    out: dict[int, Fraction] = {}
    for d1, c1 in a.items():
        for d2, c2 in b.items():
            g = math.gcd(d1, d2)
            d = (d1 // g) * (d2 // g)
            out[d] = out.get(d, 0) + c1 * c2 * g
    return {d: c for d, c in out.items() if c}


def _invert_terms(c: dict) -> dict:
    if not c:
        raise ZeroDivisionError("ExactScalar division by zero")
    radicals = [d for d in c if d != 1]
    if not radicals:
        return {1: 1 / Fraction(c[1])}
    p = min(q for d in radicals for q in _prime_factors(d))
    conj = {d: (-v if d % p == 0 else v) for d, v in c.items()}
    norm = _mul_terms(c, conj)  # free of sqrt(p)
    return _mul_terms(conj, _invert_terms(norm))


class ExactScalar:
    """Element of Q(sqrt(D1), sqrt(D2), ...) with exact field operations."""

    __slots__ = ("_terms", "_key", "_float")

    def __init__(self, value: Union[Number, str, float] = 0):
        if isinstance(value, ExactScalar):
            terms = value._terms
        elif isinstance(value, (numbers.Integral, Fraction)):
            terms = {1: Fraction(int(value) if isinstance(value, numbers.Integral) else value)} if value else {}
        elif isinstance(value, str):
            terms = parse_exact(value)._terms
        elif isinstance(value, float):
            raise TypeError(
                "refusing to build an ExactScalar from a float; pass Fraction(x) "
                "explicitly if the binary value is what you mean"
            )
        else:
            raise TypeError(f"cannot convert {type(value).__name__} to ExactScalar")
        self._set(terms)

    def _set(self, terms: dict) -> None:
        self._terms = {d: Fraction(c) for d, c in terms.items() if c}
        self._key = tuple(sorted(self._terms.items()))
        self._float = None

    @classmethod
    def _from_terms(cls, terms: dict) -> "ExactScalar":
        obj = cls.__new__(cls)
        obj._set(terms)
        return obj

    # -- structure ---------------------------------------------------------
    @property
    def terms(self) -> dict[int, Fraction]:
        return dict(self._terms)

    def coefficient(self, radicand: int) -> Fraction:
        return self._terms.get(radicand, Fraction(0))

    def is_rational(self) -> bool:
        return all(d == 1 for d in self._terms)

    def to_fraction(self) -> Fraction:
        if not self.is_rational():
            raise ValueError(f"{self} is irrational")
        return self._terms.get(1, Fraction(0))

    def radicands(self) -> set[int]:
        return set(self._terms)

    # -- arithmetic --------------------------------------------------------
    def __add__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        terms = dict(self._terms)
        for d, c in o._terms.items():
            terms[d] = terms.get(d, 0) + c
        return ExactScalar._from_terms(terms)

    __radd__ = __add__

    def __neg__(self):
        return ExactScalar._from_terms({d: -c for d, c in self._terms.items()})

    def __pos__(self):
        return self

    def __sub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o + (-self)

    def __mul__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return ExactScalar._from_terms(_mul_terms(self._terms, o._terms))

    __rmul__ = __mul__

    def inverse(self) -> "ExactScalar":
        return ExactScalar._from_terms(_invert_terms(self._terms))

    def __truediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        if o.is_rational():
            q = o.to_fraction()
            if q == 0:
                raise ZeroDivisionError("ExactScalar division by zero")
            return ExactScalar._from_terms({d: c / q for d, c in self._terms.items()})
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return o / self

    def __pow__(self, n: int):
        if not isinstance(n, int):
            return NotImplemented
        if n < 0:
            return self.inverse() ** (-n)
        result = ExactScalar(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- ordering ----------------------------------------------------------
    def sign(self) -> int:
        if not self._terms:
            return 0
        if len(self._terms) == 1 and 1 in self._terms:
            c = self._terms[1]
            return (c > 0) - (c < 0)
        # fast path: float value with a generous error bound
        approx = 0.0
        scale = 0.0
        try:
            for d, c in self._terms.items():
                term = float(c) * math.sqrt(d)
                approx += term
                scale += abs(term)
            if abs(approx) > 1e-12 * scale + 1e-300 and math.isfinite(approx):
                return 1 if approx > 0 else -1
        except OverflowError:
            pass
        prec = 64
        while True:
            lo, hi = self._enclose(prec)
            if lo > 0:
                return 1
            if hi < 0:
                return -1
            prec *= 2

    def _enclose(self, prec: int) -> tuple[Fraction, Fraction]:
        scale = 1 << prec
        lo = hi = Fraction(0)
        for d, c in self._terms.items():
            if d == 1:
                lo += c
                hi += c
                continue
            r = math.isqrt(d * scale * scale)
            r_lo = Fraction(r, scale)
            r_hi = Fraction(r + 1, scale)
            if c > 0:
                lo += c * r_lo
                hi += c * r_hi
            else:
                lo += c * r_hi
                hi += c * r_lo
        return lo, hi

    def _cmp(self, other) -> int:
        o = _coerce(other)
        if o is NotImplemented:
            raise TypeError(f"cannot compare ExactScalar with {type(other).__name__}")
        return (self - o).sign()

    def __eq__(self, other):
        o = _coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self._key == o._key

    def __hash__(self):
        if self.is_rational():
            return hash(self._terms.get(1, Fraction(0)))
        return hash(self._key)

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __bool__(self):
        return bool(self._terms)

    def __abs__(self):
        return -self if self.sign() < 0 else self

    def __floor__(self) -> int:
        if self.is_rational():
            return math.floor(self.to_fraction())
        n = math.floor(float(self))
        while self < n:
            n -= 1
        while self >= n + 1:
            n += 1
        return n

    def __ceil__(self) -> int:
        return -math.floor(-self)

    def frac(self) -> "ExactScalar":
        """Representative in [0, 1)."""
        return self - math.floor(self)

    def dist_to_int(self) -> "ExactScalar":
        """||x||, the distance to the nearest integer."""
        f = self.frac()
        g = 1 - f
        return f if f <= g else g

    # -- conversion --------------------------------------------------------
    def __float__(self) -> float:
        if self._float is None:
            lo, hi = self._enclose(80)
            self._float = float((lo + hi) / 2)
        return self._float

    def __complex__(self) -> complex:
        return complex(float(self))

    def __repr__(self) -> str:
        return f"ExactScalar('{self}')"

    def __str__(self) -> str:
        return format_exact(self)

    def __reduce__(self):
        return (ExactScalar, (str(self),))


def _coerce(value) -> ExactScalar:
    if isinstance(value, ExactScalar):
        return value
    if isinstance(value, (int, Fraction)):
        return ExactScalar(value)
    return NotImplemented


def as_exact(value) -> ExactScalar:
    """Convert ints, Fractions, strings and ExactScalars; reject floats."""
    if isinstance(value, ExactScalar):
        return value
    if isinstance(value, str) and value in NAMED_CONSTANTS:
        return NAMED_CONSTANTS[value]
    return ExactScalar(value)


def exact_sqrt(q: Union[int, Fraction, ExactScalar]) -> ExactScalar:
    """Square root of a nonnegative rational, exactly."""
    if isinstance(q, ExactScalar):
        q = q.to_fraction()
    q = Fraction(q)
    if q < 0:
        raise ValueError("square root of a negative number")
    if q == 0:
        return ExactScalar(0)
    # sqrt(a/b) = sqrt(a*b)/b
    s, D = _square_split(q.numerator * q.denominator)
    return ExactScalar._from_terms({D: Fraction(s, q.denominator)})


def format_exact(x: ExactScalar) -> str:
    """Canonical ASCII form, e.g. ``(-1+sqrt(5))/2`` or ``3/8``."""
    terms = x._key
    if not terms:
        return "0"
    den = 1
    for _, c in terms:
        den = den * c.denominator // math.gcd(den, c.denominator)
    parts = []
    for d, c in terms:
        n = c.numerator * (den // c.denominator)
        if d == 1:
            body = str(abs(n))
        elif abs(n) == 1:
            body = f"sqrt({d})"
        else:
            body = f"{abs(n)}*sqrt({d})"
        sign = "-" if n < 0 else "+"
        parts.append((sign, body))
    s = "".join(sign + body for sign, body in parts)
    s = s[1:] if s.startswith("+") else s
    if den == 1:
        return s
    if len(parts) == 1 and parts[0][0] == "+":
        return f"{s}/{den}"
    return f"({s})/{den}"


_SQRT_GLYPH = re.compile(r"√\s*(\d+)")


def parse_exact(text: str) -> ExactScalar:
    """Parse strings like ``"(1+sqrt(5))/2"``, ``"sqrt(2)-1"``, ``"3/8"``, ``"√2/8"``.

    Only integer literals, ``+ - * /``, parentheses, integer powers and
    ``sqrt(<rational expr>)`` are accepted.
    """
    text = text.strip()
    if text in NAMED_CONSTANTS:
        return NAMED_CONSTANTS[text]
    src = _SQRT_GLYPH.sub(r"sqrt(\1)", text)
    try:
        tree = ast.parse(src, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"not an exact scalar: {text!r}") from exc
    return _eval_node(tree.body, text)


def _eval_node(node, text: str) -> ExactScalar:
    if isinstance(node, ast.Constant) and isinstance(node.value, int) and not isinstance(node.value, bool):
        return ExactScalar(node.value)
    if isinstance(node, ast.Constant) and isinstance(node.value, float):
        # decimal literals like 0.25 are read as the decimal they spell
        return ExactScalar(Fraction(repr(node.value)))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval_node(node.operand, text)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.BinOp):
        a = _eval_node(node.left, text)
        if isinstance(node.op, ast.Pow):
            if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)):
                raise ValueError(f"only integer powers are supported: {text!r}")
            return a ** node.right.value
        b = _eval_node(node.right, text)
        if isinstance(node.op, ast.Add):
            return a + b
        if isinstance(node.op, ast.Sub):
            return a - b
        if isinstance(node.op, ast.Mult):
            return a * b
        if isinstance(node.op, ast.Div):
            return a / b
    if (
        isinstance(node, ast.Call)
        and isinstance(node.func, ast.Name)
        and node.func.id == "sqrt"
        and len(node.args) == 1
    ):
        arg = _eval_node(node.args[0], text)
        if not arg.is_rational():
            raise ValueError(f"nested radicals are not supported: {text!r}")
        return exact_sqrt(arg.to_fraction())
    if isinstance(node, ast.Name) and node.id in NAMED_CONSTANTS:
        return NAMED_CONSTANTS[node.id]
    raise ValueError(f"unsupported syntax in exact scalar {text!r}")


def rational_rank(rows: Iterable[Iterable[Fraction]]) -> int:
    """Rank over Q of a matrix of rationals (Gaussian elimination)."""
    mat = [[Fraction(v) for v in row] for row in rows]
    mat = [row for row in mat if any(row)]
    if not mat:
        return 0
    ncols = len(mat[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(mat)) if mat[r][col] != 0), None)
        if pivot is None:
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        pv = mat[rank][col]
        for r in range(len(mat)):
            if r != rank and mat[r][col] != 0:
                f = mat[r][col] / pv
                mat[r] = [a - f * b for a, b in zip(mat[r], mat[rank])]
        rank += 1
        if rank == len(mat):
            break
    return rank


GOLDEN = ExactScalar._from_terms({1: Fraction(-1, 2), 5: Fraction(1, 2)})
SQRT2M1 = ExactScalar._from_terms({1: Fraction(-1), 2: Fraction(1)})
NAMED_CONSTANTS = {"golden": GOLDEN, "sqrt2m1": SQRT2M1}
