"""Field descriptors: the rationals, prime fields and one rational-function layer.

Elements are sympy domain elements (gmpy2 ``mpq`` for the rationals,
modular integers for prime fields, ``FracElement`` for function fields).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable

import sympy
from sympy import GF, QQ

from ..errors import ParseError

RATIONALS = "rationals"
PRIME_FIELD = "prime-field"
RATFUNC = "rational-function-field"


@dataclass(frozen=True)
class FieldDesc:
    tag: str
    p: int | None = None
    base: "FieldDesc | None" = None
    variables: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.tag == PRIME_FIELD:
            if self.p is None or not sympy.isprime(self.p):
                raise ValueError(f"prime-field needs a prime, got {self.p!r}")
        elif self.tag == RATFUNC:
            if self.base is None or self.base.tag == RATFUNC:
                raise ValueError("rational-function-field base must be Q or F_p")
            if not self.variables or len(set(self.variables)) != len(self.variables):
                raise ValueError("rational-function-field needs distinct variables")
            object.__setattr__(self, "variables", tuple(self.variables))
        elif self.tag != RATIONALS:
            raise ValueError(f"unknown field tag {self.tag!r}")

    # constructors

    @staticmethod
    def rationals() -> "FieldDesc":
        return FieldDesc(RATIONALS)

    @staticmethod
    def prime(p: int) -> "FieldDesc":
        return FieldDesc(PRIME_FIELD, p=p)

    @staticmethod
    def ratfunc(base: "FieldDesc", variables: Iterable[str]) -> "FieldDesc":
        return FieldDesc(RATFUNC, base=base, variables=tuple(variables))

    # structure

    @property
    def prime_base(self) -> "FieldDesc":
        return self.base if self.tag == RATFUNC else self

    @property
    def trdeg(self) -> int:
        return len(self.variables)

    @property
    def characteristic(self) -> int:
        return self.prime_base.p or 0

    def extend(self, variables: Iterable[str]) -> "FieldDesc":
        """Adjoin transcendental variables, keeping a single function-field layer."""
        new = tuple(variables)
        if not new:
            return self
        clash = set(new) & set(self.variables)
        if clash:
            raise ValueError(f"variables already present: {sorted(clash)}")
        return FieldDesc.ratfunc(self.prime_base, self.variables + new)

    def is_subfield_of(self, other: "FieldDesc") -> bool:
        if self.prime_base != other.prime_base:
            return False
        return set(self.variables) <= set(other.variables)

    @cached_property
    def dom(self):
        if self.tag == RATIONALS:
            return QQ
        if self.tag == PRIME_FIELD:
            return GF(self.p, symmetric=False)
        return self.base.dom.frac_field(*[sympy.Symbol(v) for v in self.variables])

    @cached_property
    def gens(self) -> dict:
        if self.tag != RATFUNC:
            return {}
        return dict(zip(self.variables, self.dom.gens))

    # elements

    @property
    def zero(self):
        return self.dom.zero

    @property
    def one(self):
        return self.dom.one

    def __call__(self, x: Any):
        """Coerce ints, Fractions, strings and subfield elements."""
        dom = self.dom
        if isinstance(x, str):
            return self.decode(x)
        if isinstance(x, bool):
            x = int(x)
        if isinstance(x, int):
            return dom(x)
        if isinstance(x, Fraction):
            return dom(x.numerator) / dom(x.denominator)
        if dom.of_type(x):
            return x
        for src in self._subdomains():
            if src.of_type(x):
                return dom.convert_from(x, src)
        return dom.convert(x)

    def _subdomains(self):
        out = [self.prime_base.dom]
        return out

    def embed(self, x, source: "FieldDesc"):
        if source == self:
            return x
        return self.dom.convert_from(x, source.dom)

    def var(self, name: str):
        return self.gens[name]

    def is_zero(self, x) -> bool:
        return not x

    def random(self, rng: random.Random, height: int = 3, nonzero: bool = False):
        """Small random element; function-field elements are low-degree quotients."""
        while True:
            if self.tag == RATIONALS:
                x = QQ(rng.randint(-height, height), rng.randint(1, height))
            elif self.tag == PRIME_FIELD:
                x = self.dom(rng.randrange(self.p))
            else:
                sub = self.base
                num = self.zero + sub.random(rng, height)
                for v in self.variables:
                    if rng.random() < 0.5:
                        num = num + self.embed(sub.random(rng, height), sub) * self.gens[v]
                den = self.one
                if rng.random() < 0.3:
                    v = rng.choice(self.variables)
                    den = self.gens[v] + self.embed(sub.random(rng, height), sub)
                x = num / den
            if not nonzero or x:
                return x

    # text encoding

    def encode(self, x) -> str:
        if self.tag == RATIONALS:
            return f"{int(x.numerator)}/{int(x.denominator)}"
        if self.tag == PRIME_FIELD:
            return str(int(x) % self.p)
        return str(self.dom.to_sympy(x))

    def decode(self, s: str):
        s = s.strip()
        try:
            if self.tag == RATIONALS:
                if "/" in s:
                    a, b = s.split("/")
                    return QQ(int(a), int(b))
                return QQ(int(s))
            if self.tag == PRIME_FIELD:
                if "/" in s:
                    a, b = s.split("/")
                    return self.dom(int(a)) / self.dom(int(b))
                return self.dom(int(s))
            expr = sympy.sympify(s, locals={v: sympy.Symbol(v) for v in self.variables})
            return self.dom.from_sympy(expr)
        except (ValueError, TypeError, ZeroDivisionError, sympy.SympifyError) as exc:
            raise ParseError(f"cannot parse {s!r} as an element of {self.name()}") from exc

    def name(self) -> str:
        if self.tag == RATIONALS:
            return "Q"
        if self.tag == PRIME_FIELD:
            return f"F{self.p}"
        return f"{self.base.name()}({','.join(self.variables)})"

    def to_json(self) -> dict:
        out = {"tag": self.tag}
        if self.tag == PRIME_FIELD:
            out["p"] = self.p
        if self.tag == RATFUNC:
            out["base"] = self.base.to_json()
            out["variables"] = list(self.variables)
        return out

    @staticmethod
    def from_json(d: dict) -> "FieldDesc":
        try:
            tag = d["tag"]
            if tag == RATIONALS:
                return FieldDesc.rationals()
            if tag == PRIME_FIELD:
                return FieldDesc.prime(int(d["p"]))
            if tag == RATFUNC:
                return FieldDesc.ratfunc(FieldDesc.from_json(d["base"]), d["variables"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad field descriptor {d!r}") from exc
        raise ParseError(f"unknown field tag {d.get('tag')!r}")

    @staticmethod
    def parse(s: str) -> "FieldDesc":
        """Parse ``Q``, ``F7`` / ``GF(7)``, ``Q(X)`` or ``F5(X,Y)``."""
        s = s.replace(" ", "")
        base_s, _, rest = s.partition("(")
        if base_s.upper() == "GF" and rest.endswith(")"):
            return FieldDesc.prime(int(rest[:-1]))
        if base_s in ("Q", "QQ"):
            base = FieldDesc.rationals()
        elif base_s[:1] == "F" and base_s[1:].isdigit():
            base = FieldDesc.prime(int(base_s[1:]))
        else:
            raise ParseError(f"unknown field {s!r}")
        if not rest:
            return base
        if not rest.endswith(")"):
            raise ParseError(f"unbalanced field {s!r}")
        return FieldDesc.ratfunc(base, [v for v in rest[:-1].split(",") if v])


Q = FieldDesc.rationals()
