"""Sparse truncated multivariate power series over an exact or floating field.

A :class:`PowerSeries` in ``k`` variables stores the coefficients of all
monomials ``x^w`` of total degree ``<= order`` that are nonzero.  ``order`` is
the degree through which the series is trustworthy: sums and products keep the
smaller order of their operands, differentiation loses one degree.

Multi-indices are plain tuples of non-negative ints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Sequence, Union

Scalar = Union[Fraction, float]
MultiIndex = tuple[int, ...]

GRAMMAR_VERSION = "1"


class UsageError(ValueError):
    """Raised for dimension, field or argument mismatches."""


# ---------------------------------------------------------------------------
# coefficient fields


@dataclass(frozen=True)
class Field:
    name: str

    @property
    def exact(self) -> bool:
        return self.name == "rational"

    def coerce(self, value) -> Scalar:
        """Convert ``value`` into this field.

        The rational field refuses floats: a binary float silently turned into
        a huge fraction is almost never what the caller meant.
        """
        if self.exact:
            if isinstance(value, Fraction):
                return value
            if isinstance(value, bool) or isinstance(value, float):
                raise UsageError(f"float {value!r} given to the rational field")
            if isinstance(value, (int, str)):
                try:
                    return Fraction(value)
                except ValueError as exc:
                    raise UsageError(f"not a rational literal: {value!r}") from exc
            if hasattr(value, "numerator") and hasattr(value, "denominator"):
                return Fraction(int(value.numerator), int(value.denominator))
            raise UsageError(f"cannot coerce {value!r} to a rational")
        if isinstance(value, str):
            try:
                return float(Fraction(value))
            except ValueError as exc:
                raise UsageError(f"not a numeric literal: {value!r}") from exc
        return float(value)

    def zero(self) -> Scalar:
        return Fraction(0) if self.exact else 0.0

    def one(self) -> Scalar:
        return Fraction(1) if self.exact else 1.0


RATIONAL = Field("rational")
FLOAT = Field("float")


def get_field(name: str | Field) -> Field:
    if isinstance(name, Field):
        return name
    if name == "rational":
        return RATIONAL
    if name == "float":
        return FLOAT
    raise UsageError(f"unknown field {name!r}; expected 'rational' or 'float'")


# ---------------------------------------------------------------------------
# multi-index helpers


def total(w: Sequence[int]) -> int:
    return sum(w)


def unit(k: int, u: int) -> MultiIndex:
    """Multi-index with a single 1 on axis ``u`` (0-based)."""
    return tuple(1 if i == u else 0 for i in range(k))


def degree_key(w: Sequence[int]):
    """Sort key: total degree first, then lexicographic."""
    return (sum(w), tuple(w))


def multi_indices(k: int, max_total: int) -> list[MultiIndex]:
    """All k-variable multi-indices with total <= max_total, in degree order."""
    out: list[MultiIndex] = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 0:
            out.append(tuple(prefix))
            return
        for e in range(remaining + 1):
            prefix.append(e)
            rec(prefix, remaining - e, slots - 1)
            prefix.pop()

    rec([], max_total, k)
    out.sort(key=degree_key)
    return out


def factorial_product(w: Sequence[int]) -> int:
    return math.prod(math.factorial(e) for e in w)


# ---------------------------------------------------------------------------
# power series


class PowerSeries:
    """Immutable sparse truncated power series.

    ``terms`` maps multi-index -> nonzero coefficient; every stored index has
    total degree <= ``order``.  Two series compare equal iff they have the same
    number of variables, order, field and term map.
    """

    __slots__ = ("k", "order", "field", "_terms", "truncated")

    def __init__(
        self,
        k: int,
        order: int,
        terms: Mapping[MultiIndex, Scalar] | None = None,
        field: Field = RATIONAL,
        *,
        truncated: bool = False,
    ):
        if k < 1:
            raise UsageError("a series needs at least one variable")
        if order < 0:
            raise UsageError(f"series order must be >= 0, got {order}")
        clean: dict[MultiIndex, Scalar] = {}
        if terms:
            for w, c in terms.items():
                w = tuple(int(e) for e in w)
                if len(w) != k:
                    raise UsageError(f"multi-index {w} does not have {k} entries")
                if any(e < 0 for e in w):
                    raise UsageError(f"negative exponent in {w}")
                if sum(w) > order:
                    continue
                c = field.coerce(c)
                if c != 0:
                    clean[w] = c
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "field", field)
        object.__setattr__(self, "_terms", clean)
        # set by parse_polynomial when input degree exceeded the order
        object.__setattr__(self, "truncated", truncated)

    @classmethod
    def _raw(cls, k: int, order: int, terms: dict, field: Field) -> "PowerSeries":
        # trusted constructor: terms already canonical
        s = object.__new__(cls)
        object.__setattr__(s, "k", k)
        object.__setattr__(s, "order", order)
        object.__setattr__(s, "field", field)
        object.__setattr__(s, "_terms", terms)
        object.__setattr__(s, "truncated", False)
        return s

    def __setattr__(self, name, value):
        raise AttributeError("PowerSeries is immutable")

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, k: int, order: int, field: Field = RATIONAL) -> "PowerSeries":
        return cls(k, order, None, field)

    @classmethod
    def constant(cls, value, k: int, order: int, field: Field = RATIONAL) -> "PowerSeries":
        return cls(k, order, {(0,) * k: value}, field)

    @classmethod
    def monomial(
        cls, w: Sequence[int], coeff=1, order: int | None = None, field: Field = RATIONAL
    ) -> "PowerSeries":
        w = tuple(w)
        return cls(len(w), sum(w) if order is None else order, {w: coeff}, field)

    @classmethod
    def variable(cls, u: int, k: int, order: int, field: Field = RATIONAL) -> "PowerSeries":
        return cls(k, order, {unit(k, u): 1}, field)

    # -- inspection ---------------------------------------------------------

    @property
    def terms(self) -> Mapping[MultiIndex, Scalar]:
        return MappingProxyType(self._terms)

    def coefficient(self, w: Sequence[int]) -> Scalar:
        w = tuple(w)
        if sum(w) > self.order:
            raise UsageError(f"degree {sum(w)} exceeds series order {self.order}")
        return self._terms.get(w, self.field.zero())

    def items(self) -> list[tuple[MultiIndex, Scalar]]:
        """Terms in deterministic degree-then-lexicographic order."""
        return sorted(self._terms.items(), key=lambda kv: degree_key(kv[0]))

    def is_zero(self, tol: float = 0.0) -> bool:
        if tol == 0.0:
            return not self._terms
        return all(abs(c) <= tol for c in self._terms.values())

    def max_abs(self) -> float:
        return max((abs(float(c)) for c in self._terms.values()), default=0.0)

    def degree(self) -> int:
        """Largest total degree present (-1 for the zero series)."""
        return max((sum(w) for w in self._terms), default=-1)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self._terms)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PowerSeries):
            return NotImplemented
        return (
            self.k == other.k
            and self.order == other.order
            and self.field == other.field
            and self._terms == other._terms
        )

    def __hash__(self):
        return hash((self.k, self.order, self.field, frozenset(self._terms.items())))

    def __repr__(self) -> str:
        return f"PowerSeries({format_series(self)}, order={self.order})"

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "PowerSeries"):
        if self.k != other.k:
            raise UsageError(f"variable count mismatch: {self.k} vs {other.k}")
        if self.field != other.field:
            raise UsageError(f"field mismatch: {self.field.name} vs {other.field.name}")

    def _lift(self, other) -> "PowerSeries":
        if isinstance(other, PowerSeries):
            self._check(other)
            return other
        return PowerSeries.constant(self.field.coerce(other), self.k, self.order, self.field)

    def __add__(self, other) -> "PowerSeries":
        other = self._lift(other)
        order = min(self.order, other.order)
        terms = {w: c for w, c in self._terms.items() if sum(w) <= order}
        for w, c in other._terms.items():
            if sum(w) > order:
                continue
            v = terms.get(w, 0) + c
            if v == 0:
                terms.pop(w, None)
            else:
                terms[w] = v
        return PowerSeries._raw(self.k, order, terms, self.field)

    __radd__ = __add__

    def __neg__(self) -> "PowerSeries":
        return PowerSeries._raw(self.k, self.order, {w: -c for w, c in self._terms.items()}, self.field)

    def __sub__(self, other) -> "PowerSeries":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "PowerSeries":
        return self._lift(other) - self

    def scale(self, c) -> "PowerSeries":
        c = self.field.coerce(c)
        if c == 0:
            return PowerSeries._raw(self.k, self.order, {}, self.field)
        return PowerSeries._raw(self.k, self.order, {w: v * c for w, v in self._terms.items()}, self.field)

    def __mul__(self, other) -> "PowerSeries":
        if not isinstance(other, PowerSeries):
            return self.scale(other)
        self._check(other)
        order = min(self.order, other.order)
        if not self._terms or not other._terms:
            return PowerSeries._raw(self.k, order, {}, self.field)
        b_items = sorted(((sum(w), w, c) for w, c in other._terms.items()), key=lambda t: t[0])
        terms: dict[MultiIndex, Scalar] = {}
        for wa, ca in self._terms.items():
            budget = order - sum(wa)
            if budget < 0:
                continue
            for db, wb, cb in b_items:
                if db > budget:
                    break
                w = tuple(x + y for x, y in zip(wa, wb))
                terms[w] = terms.get(w, 0) + ca * cb
        terms = {w: c for w, c in terms.items() if c != 0}
        return PowerSeries._raw(self.k, order, terms, self.field)

    def __rmul__(self, other) -> "PowerSeries":
        return self.scale(other)

    def __pow__(self, e: int) -> "PowerSeries":
        if not isinstance(e, int):
            raise UsageError("only integer powers are supported")
        if e < 0:
            return self.reciprocal() ** (-e)
        result = PowerSeries.constant(1, self.k, self.order, self.field)
        base = self
        while e:
            if e & 1:
                result = result * base
            e >>= 1
            if e:
                base = base * base
        return result

    def reciprocal(self) -> "PowerSeries":
        """Truncated multiplicative inverse; needs a nonzero constant term."""
        c0 = self._terms.get((0,) * self.k)
        if c0 is None or c0 == 0:
            raise UsageError("reciprocal of a series with zero constant term")
        inv0 = self.field.one() / c0
        rest = (self - c0).scale(-inv0)  # -E/c0, no constant term
        acc = PowerSeries.constant(1, self.k, self.order, self.field)
        power = acc
        for _ in range(self.order):
            power = power * rest
            if power.is_zero():
                break
            acc = acc + power
        return acc.scale(inv0)

    def partial(self, u: int) -> "PowerSeries":
        """Formal derivative along axis ``u`` (0-based); order drops by one."""
        if not 0 <= u < self.k:
            raise UsageError(f"axis {u} out of range for {self.k} variables")
        if self.order == 0:
            raise UsageError("cannot differentiate an order-0 series")
        terms = {}
        for w, c in self._terms.items():
            e = w[u]
            if e == 0:
                continue
            if sum(w) - 1 > self.order - 1:
                continue
            terms[w[:u] + (e - 1,) + w[u + 1 :]] = c * e
        return PowerSeries._raw(self.k, self.order - 1, terms, self.field)

    def partial_multi(self, m: Sequence[int]) -> "PowerSeries":
        s = self
        for u, e in enumerate(m):
            for _ in range(e):
                s = s.partial(u)
        return s

    def truncate(self, order: int) -> "PowerSeries":
        if order > self.order:
            raise UsageError(f"cannot raise order {self.order} to {order}")
        if order == self.order:
            return self
        terms = {w: c for w, c in self._terms.items() if sum(w) <= order}
        return PowerSeries._raw(self.k, order, terms, self.field)

    def with_order(self, order: int) -> "PowerSeries":
        """Re-declare the trusted order (no check that degrees above were exact)."""
        terms = {w: c for w, c in self._terms.items() if sum(w) <= order}
        return PowerSeries._raw(self.k, order, terms, self.field)

    def shift(self, w: Sequence[int], coeff=1, order: int | None = None) -> "PowerSeries":
        """Multiply by ``coeff * x^w``; the result is trusted to ``self.order + |w|``."""
        w = tuple(w)
        d = sum(w)
        order = self.order + d if order is None else order
        coeff = self.field.coerce(coeff)
        terms = {}
        if coeff != 0:
            for v, c in self._terms.items():
                t = tuple(a + b for a, b in zip(v, w))
                if sum(t) <= order:
                    terms[t] = c * coeff
        return PowerSeries._raw(self.k, order, terms, self.field)

    def to_field(self, field: Field) -> "PowerSeries":
        if field == self.field:
            return self
        if field.exact:
            raise UsageError("float series cannot be converted to rationals")
        return PowerSeries._raw(self.k, self.order, {w: float(c) for w, c in self._terms.items()}, field)

    def evaluate(self, point: Sequence) -> Scalar:
        """Sum of the retained terms at ``point``, in degree-then-lex order."""
        if len(point) != self.k:
            raise UsageError(f"point has {len(point)} coordinates, series has {self.k} variables")
        x = [self.field.coerce(v) for v in point]
        acc = self.field.zero()
        for w, c in self.items():
            term = c
            for xi, e in zip(x, w):
                if e:
                    term = term * xi**e
            acc = acc + term
        return acc


def format_scalar(c: Scalar) -> str:
    if isinstance(c, Fraction):
        return str(c)
    return repr(float(c))


def format_series(s: PowerSeries, names: Sequence[str] | None = None) -> str:
    names = names or [f"x{i + 1}" for i in range(s.k)]
    parts = []
    for w, c in s.items():
        mono = "*".join(
            name if e == 1 else f"{name}^{e}" for name, e in zip(names, w) if e
        )
        if not mono:
            parts.append(format_scalar(c))
        elif c == 1:
            parts.append(mono)
        elif c == -1:
            parts.append("-1*" + mono)
        else:
            parts.append(f"{format_scalar(c)}*{mono}")
    return " + ".join(parts) if parts else "0"


def series_sum(items: Iterable[PowerSeries], k: int, order: int, field: Field) -> PowerSeries:
    acc = PowerSeries.zero(k, order, field)
    for s in items:
        acc = acc + s
    return acc


# ---------------------------------------------------------------------------
# polynomial parsing
#
#   expr     := term (('+'|'-') term)*
#   term     := factor ('*' factor)*
#   factor   := base ('^' nat)?
#   base     := rational | var | '(' expr ')'
#   var      := 'x' nat
#   rational := int ('/' nat)?          int may carry a leading '-'


class PolynomialSyntaxError(UsageError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        super().__init__(f"{message} at position {pos}: {text!r}")


class _Parser:
    """Recursive-descent parser producing a small tuple AST."""

    def __init__(self, text: str, k: int):
        self.text = text
        self.k = k
        self.pos = 0

    def error(self, msg: str, pos: int | None = None):
        raise PolynomialSyntaxError(msg, self.text, self.pos if pos is None else pos)

    def peek(self) -> str:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def nat(self) -> int:
        self.peek()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error("expected a natural number")
        return int(self.text[start : self.pos])

    def parse(self):
        if not self.text.strip():
            self.error("empty expression", 0)
        node = self.expr()
        if self.peek():
            self.error(f"unexpected character {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.text[self.pos]
            self.pos += 1
            node = (op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek() == "*":
            self.pos += 1
            node = ("*", node, self.factor())
        return node

    def factor(self):
        node = self.base()
        if self.peek() == "^":
            self.pos += 1
            node = ("^", node, self.nat())
        return node

    def base(self):
        ch = self.peek()
        at = self.pos
        if ch == "(":
            self.pos += 1
            node = self.expr()
            if self.peek() != ")":
                self.error("expected ')'")
            self.pos += 1
            return node
        if ch == "x":
            self.pos += 1
            if not self.text[self.pos : self.pos + 1].isdigit():
                self.error("expected variable number after 'x'")
            idx = self.nat()
            if not 1 <= idx <= self.k:
                self.error(f"variable x{idx} outside x1..x{self.k}", at)
            return ("var", idx - 1)
        if ch == "-" or ch.isdigit():
            sign = 1
            if ch == "-":
                self.pos += 1
                if not self.text[self.pos : self.pos + 1].isdigit():
                    self.error("'-' inside a factor must start an integer literal", at)
                sign = -1
            num = self.nat() * sign
            den = 1
            if self.peek() == "/":
                self.pos += 1
                den = self.nat()
                if den == 0:
                    self.error("zero denominator", at)
            return ("const", Fraction(num, den))
        if not ch:
            self.error("unexpected end of expression")
        self.error(f"unexpected character {ch!r}")


def _degree_bound(node) -> int:
    tag = node[0]
    if tag == "const":
        return 0
    if tag == "var":
        return 1
    if tag == "^":
        return _degree_bound(node[1]) * node[2]
    if tag == "*":
        return _degree_bound(node[1]) + _degree_bound(node[2])
    return max(_degree_bound(node[1]), _degree_bound(node[2]))


def _expand(node, k: int, order: int, field: Field) -> PowerSeries:
    tag = node[0]
    if tag == "const":
        return PowerSeries.constant(field.coerce(node[1]) if field.exact else float(node[1]), k, order, field)
    if tag == "var":
        return PowerSeries.variable(node[1], k, order, field)
    if tag == "^":
        return _expand(node[1], k, order, field) ** node[2]
    a = _expand(node[1], k, order, field)
    b = _expand(node[2], k, order, field)
    if tag == "*":
        return a * b
    return a + b if tag == "+" else a - b


def parse_polynomial(text: str, k: int, order: int, field: Field | str = RATIONAL) -> PowerSeries:
    """Parse a polynomial in x1..xk into a series of the given order.

    If the expanded polynomial has terms above ``order`` they are dropped and
    the result carries ``truncated=True``.
    """
    field = get_field(field)
    node = _Parser(text, k).parse()
    bound = _degree_bound(node)
    if bound <= order:
        return _expand(node, k, order, field)
    full = _expand(node, k, bound, field)
    if full.degree() <= order:
        return full.truncate(order)
    return PowerSeries(k, order, dict(full.terms), field, truncated=True)
