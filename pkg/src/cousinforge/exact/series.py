"""Truncated multivariate (Laurent) power series with an explicit window.

A series lives in the window [-D, N) in every variable: exponents >= N are
dropped and exponents < -D are dropped as well (Laurent mode). Any drop sets
the ``truncated`` flag, which propagates through arithmetic.
"""

from __future__ import annotations

import os
from typing import Iterable, Mapping

import sympy

from ..errors import ParseError
from .fields import FieldDesc

DEFAULT_N = 8
DEFAULT_D = 8


def default_window() -> tuple[int, int]:
    """(N, D) honoring the COUSINFORGE_WINDOW environment override (``N`` or ``N,D``)."""
    raw = os.environ.get("COUSINFORGE_WINDOW")
    if not raw:
        return DEFAULT_N, DEFAULT_D
    parts = [int(x) for x in raw.replace(" ", "").split(",") if x]
    if len(parts) == 1:
        return parts[0], parts[0]
    return parts[0], parts[1]


class TruncSeries:
    __slots__ = ("field", "variables", "coeffs", "N", "D", "truncated")

    def __init__(self, field: FieldDesc, variables: Iterable[str], coeffs: Mapping | None = None,
                 N: int | None = None, D: int | None = None, truncated: bool = False):
        dn, dd = default_window()
        self.field = field
        self.variables = tuple(variables)
        self.N = dn if N is None else N
        self.D = dd if D is None else D
        self.truncated = truncated
        self.coeffs = {}
        n = len(self.variables)
        for e, c in (coeffs or {}).items():
            e = tuple(e)
            if len(e) != n:
                raise ValueError(f"exponent {e} does not match variables {self.variables}")
            if not c:
                continue
            if any(x >= self.N or x < -self.D for x in e):
                self.truncated = True
                continue
            self.coeffs[e] = field(c)

    # constructors

    def _new(self, coeffs, truncated=False):
        return TruncSeries(self.field, self.variables, coeffs, self.N, self.D,
                           self.truncated or truncated)

    @classmethod
    def const(cls, field, variables, c, **kw):
        variables = tuple(variables)
        return cls(field, variables, {(0,) * len(variables): c}, **kw)

    @classmethod
    def monomial(cls, field, variables, exps, c=1, **kw):
        return cls(field, tuple(variables), {tuple(exps): c}, **kw)

    @classmethod
    def var(cls, field, variables, name, **kw):
        variables = tuple(variables)
        e = tuple(1 if v == name else 0 for v in variables)
        return cls(field, variables, {e: 1}, **kw)

    @classmethod
    def parse(cls, text: str, field: FieldDesc, variables: Iterable[str], **kw) -> "TruncSeries":
        """Parse a polynomial expression such as ``T - u`` or ``T**2 + 3*u*T``."""
        variables = tuple(variables)
        syms = {v: sympy.Symbol(v) for v in variables}
        for v in field.variables:
            syms[v] = sympy.Symbol(v)
        try:
            expr = sympy.sympify(text.replace("^", "**"), locals=syms)
            poly = sympy.Poly(sympy.expand(expr), *[syms[v] for v in variables])
        except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
            raise ParseError(f"cannot parse series {text!r}") from exc
        coeffs = {}
        for mon, c in poly.terms():
            coeffs[mon] = field.dom.from_sympy(c)
        return cls(field, variables, coeffs, **kw)

    # arithmetic

    def _check(self, other):
        if self.variables != other.variables or self.field != other.field:
            raise ValueError("series over different rings")

    def __add__(self, other):
        if not isinstance(other, TruncSeries):
            other = TruncSeries.const(self.field, self.variables, other, N=self.N, D=self.D)
        self._check(other)
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, self.field.zero) + c
        return self._new(out, other.truncated)

    __radd__ = __add__

    def __neg__(self):
        return self._new({e: -c for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            c = self.field(other)
            return self._new({e: c * v for e, v in self.coeffs.items()})
        self._check(other)
        out = {}
        trunc = other.truncated
        zero = self.field.zero
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                if any(x >= self.N or x < -self.D for x in e):
                    trunc = True
                    continue
                out[e] = out.get(e, zero) + c1 * c2
        return self._new(out, trunc)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = TruncSeries.const(self.field, self.variables, 1, N=self.N, D=self.D)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def constant_term(self):
        return self.coeffs.get((0,) * len(self.variables), self.field.zero)

    def is_unit(self) -> bool:
        return bool(self.constant_term()) and all(min(e) >= 0 for e in self.coeffs)

    def inverse(self) -> "TruncSeries":
        """Inverse of a unit power series, exact up to the window."""
        if not self.is_unit():
            raise ZeroDivisionError("series is not a unit")
        c0 = self.constant_term()
        one = TruncSeries.const(self.field, self.variables, 1, N=self.N, D=self.D)
        h = one - self * (self.field.one / c0)
        # 1/(c0 (1 - h)) = c0^{-1} sum h^k; h has no constant term so the sum stops
        total, term = one, one
        for _ in range(len(self.variables) * self.N + 1):
            term = term * h
            if term.is_zero():
                break
            total = total + term
        return total * (self.field.one / c0)

    # inspection

    def is_zero(self) -> bool:
        return not self.coeffs

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self.variables == other.variables and self.coeffs == other.coeffs

    def __hash__(self):
        return hash((self.variables, frozenset(self.coeffs)))

    def total_order(self) -> int | None:
        """Smallest total degree of a term, None for zero."""
        if not self.coeffs:
            return None
        return min(sum(e) for e in self.coeffs)

    def support(self):
        return sorted(self.coeffs)

    def split(self, predicate):
        """Split into (terms whose exponent satisfies predicate, the rest)."""
        a = {e: c for e, c in self.coeffs.items() if predicate(e)}
        b = {e: c for e, c in self.coeffs.items() if not predicate(e)}
        return self._new(a), self._new(b)

    def with_window(self, N: int, D: int | None = None) -> "TruncSeries":
        return TruncSeries(self.field, self.variables, self.coeffs, N, self.D if D is None else D,
                           self.truncated)

    def as_poly_dict(self) -> dict:
        return dict(self.coeffs)

    def __repr__(self):
        return f"TruncSeries({self})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for e in sorted(self.coeffs, key=lambda e: (sum(e), tuple(-x for x in e))):
            c = self.coeffs[e]
            mon = "*".join(v if k == 1 else f"{v}^{k}" for v, k in zip(self.variables, e) if k)
            cs = self.field.encode(c)
            if self.field.tag == "rationals" and cs.endswith("/1"):
                cs = cs[:-2]
            if not mon:
                terms.append(cs)
            elif cs == "1":
                terms.append(mon)
            elif cs == "-1":
                terms.append("-" + mon)
            else:
                terms.append(f"({cs})*{mon}")
        return " + ".join(terms)
