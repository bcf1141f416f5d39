"""Text syntax for operator polynomials.

Grammar (whitespace is insignificant, site indices are 1-based)::

    expression  := ('+'|'-')? term (('+'|'-') term)*
    term        := coefficient? ('*'? factor)*        (at least one of the two)
    factor      := ('x'|'p') index ('^' exponent)?
    coefficient := decimal | decimal 'i' | 'i' | '(' signed [('+'|'-') decimal] 'i'? ')'
    decimal     := digits ('.' digits?)? ([eE] ('+'|'-')? digits)?

Factors inside a term are multiplied left to right and normal-ordered with
``p x = x p - i``, so ``"p1*x1"`` parses to ``x1*p1 - i``.
:func:`format_operator` prints the same grammar; every float is written with
``repr`` so ``parse(format(P)) == P`` exactly.
"""

from __future__ import annotations

import math
import re

from .operators import MAX_EXPONENT, OperatorPolynomial, multiply


class OperatorSyntaxError(ValueError):
    """Malformed operator text; ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at byte {offset}")


_NUMBER = re.compile(r"\d+(?:\.\d*)?(?:[eE][+-]?\d+)?")
_INTEGER = re.compile(r"\d+")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        try:
            text.encode("ascii")
        except UnicodeEncodeError as exc:
            raise OperatorSyntaxError("non-ASCII character", len(text[:exc.start].encode()), text)
        self.pos = 0

    def error(self, message, offset=None):
        raise OperatorSyntaxError(message, self.pos if offset is None else offset, self.text)

    def skip(self):
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def take(self, ch: str) -> bool:
        if self.peek() == ch:
            self.pos += 1
            return True
        return False

    def number(self) -> float:
        self.skip()
        m = _NUMBER.match(self.text, self.pos)
        if not m:
            self.error("expected a number")
        self.pos = m.end()
        value = float(m.group())
        if not math.isfinite(value):
            self.error("number out of range", m.start())
        return value

    def integer(self, what: str) -> tuple[int, int]:
        self.skip()
        start = self.pos
        m = _INTEGER.match(self.text, self.pos)
        if not m:
            self.error(f"expected {what}")
        # "x1.5" or "x1e3" must not be read as "x1" followed by junk
        tail = _NUMBER.match(self.text, start)
        if tail.end() != m.end():
            self.error(f"{what} must be an integer", start)
        self.pos = m.end()
        return int(m.group()), start

    def expression(self) -> OperatorPolynomial:
        total = OperatorPolynomial()
        sign = 1
        if self.peek() in ("+", "-"):
            sign = -1 if self.text[self.pos] == "-" else 1
            self.pos += 1
        total = total + self.term().scale(sign)
        while True:
            ch = self.peek()
            if ch in ("+", "-"):
                self.pos += 1
                total = total + self.term().scale(-1 if ch == "-" else 1)
            elif ch == "":
                return total
            else:
                self.error(f"unexpected character {ch!r}")

    def coefficient(self) -> complex | None:
        ch = self.peek()
        if ch == "(":
            self.pos += 1
            sign = -1.0 if self.peek() == "-" else 1.0
            if self.peek() in ("+", "-"):
                self.pos += 1
            first = sign * self.number()
            if self.take("i"):
                value = complex(0, first)
            else:
                value = complex(first, 0)
                if self.peek() in ("+", "-"):
                    s2 = -1.0 if self.text[self.pos] == "-" else 1.0
                    self.pos += 1
                    imag = s2 * self.number()
                    if not self.take("i"):
                        self.error("expected 'i' after imaginary part")
                    value = complex(first, imag)
            if not self.take(")"):
                self.error("expected ')'")
            return value
        if ch.isdigit():
            value = self.number()
            if self.take("i"):
                return complex(0, value)
            return complex(value, 0)
        if ch == "i":
            self.pos += 1
            return 1j
        return None

    def factor(self) -> OperatorPolynomial:
        kind = self.text[self.pos]
        self.pos += 1
        site, at = self.integer("site index")
        if site < 1:
            self.error("site indices start at 1", at)
        power = 1
        if self.take("^"):
            power, at = self.integer("exponent")
            if power > MAX_EXPONENT:
                self.error(f"exponent {power} exceeds {MAX_EXPONENT}", at)
        if kind == "x":
            return OperatorPolynomial.x(site, power)
        return OperatorPolynomial.p(site, power)

    def term(self) -> OperatorPolynomial:
        self.skip()
        start = self.pos
        coef = self.coefficient()
        product = OperatorPolynomial.identity(1.0 if coef is None else coef)
        n_factors = 0
        while True:
            ch = self.peek()
            if ch == "*":
                self.pos += 1
                if self.peek() not in ("x", "p"):
                    self.error("expected 'x' or 'p' after '*'")
            elif ch not in ("x", "p"):
                break
            at = self.pos
            product = multiply(product, self.factor())
            n_factors += 1
            if any(a > MAX_EXPONENT or b > MAX_EXPONENT
                   for t in product.terms for _, a, b in t.factors):
                self.error(f"combined exponent exceeds {MAX_EXPONENT}", at)
        if coef is None and n_factors == 0:
            self.error("expected a term", start)
        return product


def parse_operator(text: str) -> OperatorPolynomial:
    """Parse operator text into a normal-ordered polynomial."""
    return _Parser(text).expression()


def _fmt_real(v: float) -> str:
    r = repr(float(v))
    if "inf" in r or "nan" in r:
        raise ValueError(f"cannot format non-finite coefficient {v!r}")
    return r


def _coefficient_text(c: complex) -> tuple[str, str]:
    """Split a coefficient into a sign and an unsigned coefficient token."""
    re_, im = c.real, c.imag
    if im == 0:
        sign = "-" if math.copysign(1, re_) < 0 else "+"
        return sign, _fmt_real(abs(re_))
    if re_ == 0:
        sign = "-" if math.copysign(1, im) < 0 else "+"
        return sign, _fmt_real(abs(im)) + "i"
    op = "-" if math.copysign(1, im) < 0 else "+"
    return "+", f"({_fmt_real(re_)}{op}{_fmt_real(abs(im))}i)"


def _factor_text(site: int, a: int, b: int) -> list[str]:
    out = []
    for name, e in (("x", a), ("p", b)):
        if e == 1:
            out.append(f"{name}{site}")
        elif e > 1:
            out.append(f"{name}{site}^{e}")
    return out


def format_operator(P: OperatorPolynomial) -> str:
    """Canonical text for ``P`` in the parser's grammar (``"0"`` when empty)."""
    if P.is_zero():
        return "0"
    pieces = []
    for term in P.terms:
        sign, coef = _coefficient_text(term.coefficient)
        factors = [f for s, a, b in term.factors for f in _factor_text(s, a, b)]
        if factors and coef == "1.0":
            body = "*".join(factors)
        else:
            body = "*".join([coef] + factors)
        pieces.append((sign, body))
    first_sign, first = pieces[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in pieces[1:]:
        text += f" {sign} {body}"
    return text
