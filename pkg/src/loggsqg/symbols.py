"""Radial Fourier symbols as immutable expression trees.

Every symbol is a function ``r -> value`` on ``r >= 0`` built from a few
closed-form families (constants, power laws, logarithmic and iterated
logarithmic powers) combined with sums, products, quotients and ``1 + s``.
Trees are frozen dataclasses, so they hash, compare by value, and can be
shared freely between threads.

The textual form used in config files is produced by ``str(sym)`` and read
back by :func:`parse_symbol`::

    >>> parse_symbol("quot(logpow(0), one_plus(logpow(1.5)))")
    Quotient(num=LogPower(mu=0.0), den=OnePlus(arg=LogPower(mu=1.5)))
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, SingularAtOrigin, SymbolOverflow

E = math.e


def _fmt(x: float) -> str:
    return repr(float(x))


class Symbol:
    """Base class; subclasses implement ``_value`` and ``_deriv`` on arrays."""

    @property
    def singular_at_origin(self) -> bool:
        return False

    def _value(self, r: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _deriv(self, r: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def __call__(self, r):
        return eval_symbol(self, r)

    # arithmetic sugar so suites can be written as ``LogPower(1) / LogPower(.5)``
    def __add__(self, other: Symbol) -> Symbol:
        return Sum(self, other)

    def __mul__(self, other: Symbol) -> Symbol:
        return Product(self, other)

    def __truediv__(self, other: Symbol) -> Symbol:
        return Quotient(self, other)


@dataclass(frozen=True)
class Identity(Symbol):
    """The symbol of the identity operator, i.e. the constant 1."""

    def _value(self, r):
        return np.ones_like(r)

    def _deriv(self, r):
        return np.zeros_like(r)

    def __str__(self):
        return "identity()"


@dataclass(frozen=True)
class Constant(Symbol):
    c: float

    def __post_init__(self):
        if not self.c >= 0:
            raise ValueError(f"Constant symbol must be nonnegative, got {self.c}")
        object.__setattr__(self, "c", float(self.c))

    def _value(self, r):
        return np.full_like(r, self.c)

    def _deriv(self, r):
        return np.zeros_like(r)

    def __str__(self):
        return f"const({_fmt(self.c)})"


@dataclass(frozen=True)
class PowerLaw(Symbol):
    """``r ** alpha``; singular at the origin when ``alpha < 0``."""

    alpha: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def singular_at_origin(self):
        return self.alpha < 0

    def _value(self, r):
        if self.alpha == 0:
            return np.ones_like(r)
        return r**self.alpha

    def _deriv(self, r):
        if self.alpha == 0:
            return np.zeros_like(r)
        return self.alpha * r ** (self.alpha - 1.0)

    def __str__(self):
        return f"pow({_fmt(self.alpha)})"


@dataclass(frozen=True)
class LogPower(Symbol):
    """``(ln(e + r^2)) ** mu``; equals 1 at the origin for every ``mu``."""

    mu: float

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))

    def _value(self, r):
        if self.mu == 0:
            return np.ones_like(r)
        return np.log(E + r * r) ** self.mu

    def _deriv(self, r):
        if self.mu == 0:
            return np.zeros_like(r)
        s = E + r * r
        return self.mu * np.log(s) ** (self.mu - 1.0) * 2.0 * r / s

    def __str__(self):
        return f"logpow({_fmt(self.mu)})"


@dataclass(frozen=True)
class IterLogPower(Symbol):
    """``(ln(e + ln(1 + r^2))) ** mu``; equals 1 at the origin."""

    mu: float

    def __post_init__(self):
        object.__setattr__(self, "mu", float(self.mu))

    def _value(self, r):
        if self.mu == 0:
            return np.ones_like(r)
        return np.log(E + np.log1p(r * r)) ** self.mu

    def _deriv(self, r):
        if self.mu == 0:
            return np.zeros_like(r)
        inner = E + np.log1p(r * r)
        return self.mu * np.log(inner) ** (self.mu - 1.0) / inner * 2.0 * r / (1.0 + r * r)

    def __str__(self):
        return f"iterlogpow({_fmt(self.mu)})"


@dataclass(frozen=True)
class Sum(Symbol):
    a: Symbol
    b: Symbol

    @property
    def singular_at_origin(self):
        return self.a.singular_at_origin or self.b.singular_at_origin

    def _value(self, r):
        return self.a._value(r) + self.b._value(r)

    def _deriv(self, r):
        return self.a._deriv(r) + self.b._deriv(r)

    def __str__(self):
        return f"sum({self.a},{self.b})"


@dataclass(frozen=True)
class Product(Symbol):
    a: Symbol
    b: Symbol

    @property
    def singular_at_origin(self):
        return self.a.singular_at_origin or self.b.singular_at_origin

    def _value(self, r):
        return self.a._value(r) * self.b._value(r)

    def _deriv(self, r):
        return self.a._deriv(r) * self.b._value(r) + self.a._value(r) * self.b._deriv(r)

    def __str__(self):
        return f"prod({self.a},{self.b})"


@dataclass(frozen=True)
class Quotient(Symbol):
    num: Symbol
    den: Symbol

    @property
    def singular_at_origin(self):
        return self.num.singular_at_origin or self.den.singular_at_origin

    def _value(self, r):
        return self.num._value(r) / self.den._value(r)

    def _deriv(self, r):
        d = self.den._value(r)
        return (self.num._deriv(r) * d - self.num._value(r) * self.den._deriv(r)) / (d * d)

    def __str__(self):
        return f"quot({self.num},{self.den})"


@dataclass(frozen=True)
class OnePlus(Symbol):
    """``1 + arg``; used for ``m1 = 1 + m``."""

    arg: Symbol

    @property
    def singular_at_origin(self):
        return self.arg.singular_at_origin

    def _value(self, r):
        return 1.0 + self.arg._value(r)

    def _deriv(self, r):
        return self.arg._deriv(r)

    def __str__(self):
        return f"one_plus({self.arg})"


def _as_array(r):
    arr = np.asarray(r, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise ValueError("symbols are defined for r >= 0 only")
    return arr


def _check_finite(out, sym, r):
    if not np.all(np.isfinite(out)):
        bad = np.asarray(r)[~np.isfinite(out)] if np.ndim(out) else r
        raise SymbolOverflow(f"{sym} is not representable at r = {np.ravel(bad)[0]!r}")


def eval_symbol(sym: Symbol, r):
    """Evaluate ``sym`` at ``r`` (scalar or array), refusing to saturate.

    Raises
    ------
    SingularAtOrigin
        if ``r`` contains 0 and ``sym`` has a negative power law factor.
    SymbolOverflow
        if any value overflows (it is never silently clipped).
    """
    arr = _as_array(r)
    if sym.singular_at_origin and np.any(arr == 0):
        raise SingularAtOrigin(f"{sym} is singular at r = 0")
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            out = sym._value(arr)
    except FloatingPointError as exc:
        raise SymbolOverflow(f"{sym}: {exc}") from exc
    _check_finite(out, sym, arr)
    return float(out) if np.ndim(out) == 0 else out


def eval_derivative(sym: Symbol, r, rule: str = "analytic"):
    """Derivative of ``sym`` with respect to ``r`` for ``r > 0``.

    ``rule="analytic"`` differentiates the expression tree exactly;
    ``rule="central"`` is the central difference with ``h = 1e-4 (1 + r)``,
    kept as an independent cross-check.
    """
    arr = _as_array(r)
    if np.any(arr <= 0):
        raise ValueError("derivatives are taken at r > 0")
    if rule == "analytic":
        try:
            with np.errstate(over="raise", invalid="raise", divide="raise"):
                out = sym._deriv(arr)
        except FloatingPointError as exc:
            raise SymbolOverflow(f"d/dr {sym}: {exc}") from exc
        _check_finite(out, sym, arr)
    elif rule == "central":
        h = 1e-4 * (1.0 + arr)
        lo = np.maximum(arr - h, 0.0)
        out = (np.asarray(eval_symbol(sym, arr + h)) - np.asarray(eval_symbol(sym, lo))) / (arr + h - lo)
    else:
        raise ValueError(f"unknown derivative rule {rule!r}")
    return float(out) if np.ndim(out) == 0 else out


def as_ratio(sym: Symbol) -> tuple[Symbol, Symbol]:
    """Split ``sym`` into (numerator, denominator) of nondecreasing factors.

    Negative log powers are moved to the denominator, so that e.g.
    ``LogPower(-0.5)`` becomes ``(1, LogPower(0.5))``.  Used to test the
    quotient classes factor by factor.
    """
    one = Identity()
    if isinstance(sym, (LogPower, IterLogPower, PowerLaw)):
        exponent = sym.alpha if isinstance(sym, PowerLaw) else sym.mu
        if exponent < 0:
            return one, type(sym)(-exponent)
        return sym, one
    if isinstance(sym, Quotient):
        na, da = as_ratio(sym.num)
        nb, db = as_ratio(sym.den)
        return _mul(na, db), _mul(da, nb)
    if isinstance(sym, Product):
        na, da = as_ratio(sym.a)
        nb, db = as_ratio(sym.b)
        return _mul(na, nb), _mul(da, db)
    return sym, one


def _mul(a: Symbol, b: Symbol) -> Symbol:
    if isinstance(a, Identity):
        return b
    if isinstance(b, Identity):
        return a
    return Product(a, b)


# ---------------------------------------------------------------------------
# textual grammar:  ident(args)  with nesting, commas and real literals

_UNARY_REAL = {"const": Constant, "pow": PowerLaw, "logpow": LogPower, "iterlogpow": IterLogPower}
_BINARY = {"sum": Sum, "prod": Product, "quot": Quotient}
_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)|(?P<id>[A-Za-z_]\w*)|(?P<p>[(),]))")


_KNOWN = {"identity", "one_plus"} | set(_UNARY_REAL) | set(_BINARY)


class _Parser:
    def __init__(self, text: str, line: int | None, col0: int):
        self.text = text
        self.pos = 0
        self.line = line
        self.col0 = col0

    def _err(self, msg):
        raise ParseError(msg, self.line, self.col0 + self.pos + 1)

    def _peek(self):
        m = _TOKEN.match(self.text, self.pos)
        if not m:
            if self.text[self.pos:].strip() == "":
                return None, None, self.pos
            self._err(f"unexpected character {self.text[self.pos:].strip()[0]!r}")
        kind = m.lastgroup
        return kind, m.group(kind), m.end()

    def _take(self, kind, value=None):
        k, v, end = self._peek()
        if k != kind or (value is not None and v != value):
            self._err(f"expected {value or kind}, found {'end of input' if v is None else repr(v)}")
        self.pos = end
        return v

    def expr(self) -> Symbol:
        _, _, end = self._peek()
        start = end - len(self.text[self.pos:end].lstrip())
        name = self._take("id")
        if name not in _KNOWN:
            self.pos = start
            self._err(f"unknown symbol family {name!r}")
        self._take("p", "(")
        if name == "identity":
            self._take("p", ")")
            return Identity()
        if name in _UNARY_REAL:
            value = float(self._take("num"))
            self._take("p", ")")
            try:
                return _UNARY_REAL[name](value)
            except ValueError as exc:
                self._err(str(exc))
        if name == "one_plus":
            arg = self.expr()
            self._take("p", ")")
            return OnePlus(arg)
        if name in _BINARY:
            a = self.expr()
            self._take("p", ",")
            b = self.expr()
            self._take("p", ")")
            return _BINARY[name](a, b)
        raise AssertionError(name)  # pragma: no cover

    def parse(self) -> Symbol:
        sym = self.expr()
        if self._peek()[0] is not None:
            self._err("trailing input after expression")
        return sym


def parse_symbol(text: str, line: int | None = None, column: int = 0) -> Symbol:
    """Parse the config-file expression grammar (inverse of ``str``)."""
    return _Parser(text, line, column).parse()
