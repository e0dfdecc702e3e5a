"""Effective principal ideal domains: the integers and K[y].

Elements of Z are Python ints; elements of K[y] are sympy ``PolyElement``
objects of the ring underlying the fraction field K(y), so numerators and
denominators of fraction-field elements are directly PID elements.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import sympy
from sympy import QQ

from ..errors import NonEffective, ParseError
from .fields import FieldDesc, PRIME_FIELD, RATIONALS

INTEGERS = "integers"
POLY_RING = "poly-ring"


@dataclass(frozen=True)
class PrimeBound:
    """Enumeration bound for materialized primes.

    Over Z: primes p <= height. Over K[y]: monic irreducibles of degree
    <= degree whose coefficients (as integers, or residues mod p) have
    absolute value <= height.
    """

    height: int
    degree: int = 1

    def to_json(self) -> dict:
        return {"degree": self.degree, "height": self.height}


@dataclass(frozen=True)
class PIDDesc:
    tag: str
    field: FieldDesc | None = None
    variable: str | None = None

    def __post_init__(self):
        if self.tag == POLY_RING:
            if self.field is None or self.variable is None:
                raise ValueError("poly-ring needs a field and a variable")
            if self.field.tag not in (RATIONALS, PRIME_FIELD):
                raise ValueError("poly-ring coefficients must be Q or F_p")
            if self.variable in self.field.variables:
                raise ValueError("ring variable clashes with a field variable")
        elif self.tag != INTEGERS:
            raise ValueError(f"unknown PID tag {self.tag!r}")

    @staticmethod
    def integers() -> "PIDDesc":
        return PIDDesc(INTEGERS)

    @staticmethod
    def poly(field_: FieldDesc, variable: str = "y") -> "PIDDesc":
        return PIDDesc(POLY_RING, field_, variable)

    @property
    def is_integers(self) -> bool:
        return self.tag == INTEGERS

    # rings

    @cached_property
    def frac_dom(self):
        if self.is_integers:
            return QQ
        return self.field.dom.frac_field(sympy.Symbol(self.variable))

    @cached_property
    def frac_field(self) -> FieldDesc:
        if self.is_integers:
            return FieldDesc.rationals()
        return FieldDesc.ratfunc(self.field, [self.variable])

    @cached_property
    def ring(self):
        if self.is_integers:
            return None
        return self.frac_dom.field.ring

    @property
    def gen(self):
        return self.ring.gens[0]

    def name(self) -> str:
        return "Z" if self.is_integers else f"{self.field.name()}[{self.variable}]"

    # elements

    @property
    def zero(self):
        return 0 if self.is_integers else self.ring.zero

    @property
    def one(self):
        return 1 if self.is_integers else self.ring.one

    def __call__(self, x):
        if self.is_integers:
            if isinstance(x, str):
                return int(x)
            return int(x)
        if isinstance(x, str):
            return self.decode(x)
        if isinstance(x, int):
            return self.ring(x)
        return self.ring(x)

    def degree(self, a) -> int:
        if self.is_integers:
            raise TypeError("degree is defined for polynomial PIDs only")
        return a.degree()

    def size(self, a) -> int:
        """Euclidean size: |a| over Z, degree over K[y] (-1 for zero)."""
        if self.is_integers:
            return abs(a)
        return a.degree() if a else -1

    def divmod(self, a, b):
        if not b:
            raise ZeroDivisionError("division by zero in PID")
        if self.is_integers:
            return divmod(a, b)
        return a.div(b)

    def mod(self, a, b):
        return self.divmod(a, b)[1]

    def normalize(self, a):
        """Return (unit, normal) with a = unit * normal; normal is positive or monic."""
        if self.is_integers:
            return (-1, -a) if a < 0 else (1, a)
        if not a:
            return self.one, a
        lc = a.LC
        return self.ring(lc), a.monic()

    def is_unit(self, a) -> bool:
        if self.is_integers:
            return a in (1, -1)
        return bool(a) and a.degree() == 0

    def gcd(self, a, b):
        while b:
            a, b = b, self.mod(a, b)
        return self.normalize(a)[1]

    def xgcd(self, a, b):
        """(g, s, t) with s a + t b = g and g normalized."""
        r0, r1 = a, b
        s0, s1 = self.one, self.zero
        t0, t1 = self.zero, self.one
        while r1:
            q, r = self.divmod(r0, r1)
            r0, r1 = r1, r
            s0, s1 = s1, s0 - q * s1
            t0, t1 = t1, t0 - q * t1
        u, g = self.normalize(r0)
        if self.is_integers:
            return g, s0 * u, t0 * u
        inv = self.ring(self.field.one / u.LC)
        return g, s0 * inv, t0 * inv

    def inverse_mod(self, a, m):
        g, s, _ = self.xgcd(a, m)
        if not self.is_unit(g):
            raise ZeroDivisionError("not invertible modulo m")
        return self.mod(s, m)

    def factor(self, a) -> list:
        """Prime factorization [(prime, exponent), ...] of a nonzero element."""
        if not a:
            raise ValueError("cannot factor zero")
        if self.is_integers:
            return sorted(sympy.factorint(abs(a)).items())
        try:
            _, facs = a.factor_list()
        except (NotImplementedError, sympy.polys.polyerrors.PolynomialError) as exc:
            raise NonEffective(f"cannot factor {a} over {self.field.name()}") from exc
        out = [(self.normalize(f)[1], e) for f, e in facs if f.degree() > 0]
        return sorted(out, key=lambda pe: self.prime_key(pe[0]))

    def is_prime(self, a) -> bool:
        f = self.factor(a) if a else []
        return len(f) == 1 and f[0][1] == 1 and self.normalize(a)[1] == f[0][0]

    def prime_key(self, p):
        """Sort key: degree then lexicographic on coefficients."""
        if self.is_integers:
            return (p,)
        coeffs = p.to_dense()
        return (p.degree(), tuple(_coeff_key(self.field, c) for c in coeffs))

    def residue_dim(self, p) -> int:
        """Dimension of R/(p) over the prime field (1 for Z, deg p for K[y])."""
        return 1 if self.is_integers else p.degree()

    def residues(self, p) -> list:
        """A fixed set of representatives for R/(p): digits of the p-adic expansion."""
        if self.is_integers:
            return list(range(p))
        raise TypeError("residue enumeration is only used over Z")

    # fraction field

    def frac(self, a, b=None):
        if b is None:
            b = self.one
        if self.is_integers:
            return QQ(int(a), int(b))
        F = self.frac_dom.field
        return F(a) / F(b)

    def num_den(self, q):
        """(numerator, denominator) with normalized denominator."""
        if self.is_integers:
            return int(q.numerator), int(q.denominator)
        n, d = q.numer, q.denom
        u, dn = self.normalize(d)
        inv = self.field.one / u.LC
        return n * self.ring(inv), dn

    def to_frac(self, a):
        return self.frac(a)

    def encode(self, a) -> str:
        return str(a)

    def decode(self, s: str):
        if self.is_integers:
            try:
                return int(s)
            except ValueError as exc:
                raise ParseError(f"bad integer {s!r}") from exc
        try:
            expr = sympy.sympify(s, locals={self.variable: sympy.Symbol(self.variable)})
            return self.ring.from_expr(expr) if expr.free_symbols else self.ring(self.field.dom.from_sympy(expr))
        except (sympy.SympifyError, ValueError, TypeError, sympy.polys.polyerrors.PolynomialError) as exc:
            raise ParseError(f"cannot parse {s!r} in {self.name()}") from exc

    def encode_frac(self, q) -> str:
        if self.is_integers:
            return f"{int(q.numerator)}/{int(q.denominator)}"
        n, d = self.num_den(q)
        return f"({n})/({d})"

    def decode_frac(self, s: str):
        if self.is_integers:
            return FieldDesc.rationals().decode(s)
        expr = sympy.sympify(s, locals={self.variable: sympy.Symbol(self.variable)})
        return self.frac_dom.from_sympy(expr)

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if not self.is_integers:
            out["field"] = self.field.to_json()
            out["variable"] = self.variable
        return out

    @staticmethod
    def from_json(d: dict) -> "PIDDesc":
        if d.get("tag") == INTEGERS:
            return PIDDesc.integers()
        if d.get("tag") == POLY_RING:
            return PIDDesc.poly(FieldDesc.from_json(d["field"]), d.get("variable", "y"))
        raise ParseError(f"bad PID descriptor {d!r}")

    @staticmethod
    def parse(s: str) -> "PIDDesc":
        """``Z``, ``Q[y]``, ``F5[t]``."""
        s = s.replace(" ", "")
        if s in ("Z", "ZZ"):
            return PIDDesc.integers()
        if s.endswith("]") and "[" in s:
            f, _, v = s[:-1].partition("[")
            return PIDDesc.poly(FieldDesc.parse(f), v)
        raise ParseError(f"unknown PID {s!r}")

    # partial fractions

    def padic_digits(self, c, p, k) -> list:
        """Digits d_0..d_{k-1} with c = sum d_i p^i (mod p^k), each reduced mod p."""
        out = []
        for _ in range(k):
            c, r = self.divmod(c, p)
            out.append(r)
        return out

    def principal_part(self, q, p) -> dict:
        """The p-part of q in Frac(R)/R as {order k: digit}, digit reduced mod p.

        Over Z the p-primary component is taken with representative in [0,1).
        """
        a, b = self.num_den(q)
        e = 0
        while not self.mod(b, p):
            b = self.divmod(b, p)[0]
            e += 1
        if e == 0:
            return {}
        pe = p ** e
        c = self.mod(a * self.inverse_mod(b, pe), pe)
        digits = self.padic_digits(c, p, e)
        return {e - i: d for i, d in enumerate(digits) if d}

    def partial_fractions(self, q):
        """Return (polynomial part, {(p, k): digit}) with q = poly + sum digit/p^k."""
        if isinstance(q, tuple):
            a, b = q
            if not b:
                raise ZeroDivisionError("zero denominator")
            q = self.frac(a, b)
        _, b = self.num_den(q)
        parts = {}
        for p, _ in (self.factor(b) if not self.is_unit(b) else []):
            for k, d in self.principal_part(q, p).items():
                parts[(p, k)] = d
        rest = q - self.pp_value(parts)
        n, d = self.num_den(rest)
        if not self.is_unit(d):
            raise ArithmeticError("partial fraction remainder is not integral")
        poly = self.divmod(n, d)[0] if not self.is_integers else n // d
        return poly, parts

    def pp_value(self, parts: dict):
        """Sum of digit / p^k over a {(p, k): digit} map as a fraction-field element."""
        total = self.frac(self.zero)
        for (p, k), d in parts.items():
            total += self.frac(d, p ** k)
        return total

    def pp_reduce(self, p, digits: dict) -> dict:
        """Normalize a {k: element} map so digits are reduced residues mod p."""
        q = self.frac(self.zero)
        for k, d in digits.items():
            if k >= 1:
                q += self.frac(d, p ** k)
        return self.principal_part(q, p)

    # enumeration

    def primes(self, bound: PrimeBound | int) -> list:
        """Materialized primes in the declared order (degree, then lex)."""
        if isinstance(bound, int):
            bound = PrimeBound(bound, 1)
        if self.is_integers:
            return list(sympy.primerange(2, bound.height + 1))
        out = []
        for deg in range(1, bound.degree + 1):
            for coeffs in self._coeff_tuples(deg, bound.height):
                f = self.ring.from_list([self.field.one] + [self.field(c) for c in coeffs])
                if self.is_prime(f):
                    out.append(f)
        return sorted(set(out), key=self.prime_key)

    def _coeff_tuples(self, deg: int, height: int) -> Iterator[tuple]:
        if self.field.tag == PRIME_FIELD:
            vals = range(min(self.field.p, 2 * height + 1))
        else:
            vals = range(-height, height + 1)
        return itertools.product(vals, repeat=deg)

    def random_element(self, rng: random.Random, size: int = 3):
        if self.is_integers:
            return rng.randint(-size * 3, size * 3)
        coeffs = [self.field.random(rng, 2) for _ in range(rng.randint(1, size))]
        return self.ring.from_list(coeffs)

    def random_frac(self, rng: random.Random, primes: list, max_order: int = 2):
        """A random fraction whose denominator only involves the given primes."""
        den = self.one
        for p in primes:
            den *= p ** rng.randint(0, max_order)
        return self.frac(self.random_element(rng), den)


def _coeff_key(field_: FieldDesc, c):
    if field_.tag == PRIME_FIELD:
        return (int(c),)
    v = QQ.convert(c)
    return (abs(v), v < 0)
