"""Generalized fractions over B = A[[T_1..T_r]] with coefficients in a finite A-module.

The top local cohomology H^r_{(T)}(M[[T]]) is modelled by :class:`FractionModule`,
whose basis symbols are [m / T^alpha] with every alpha_j >= 1. A
:class:`GenFraction` is a formal symbol [n / s_1^{a_1}, ..., s_n^{a_n}] with a
C (Cech) or K (Koszul) flavor. Two independent routes produce its normal form:

* :func:`normalize` finds a transition matrix U with T_i^c = sum_j U_ij s_j^{a_j}
  on the numerator and applies the determinant rule;
* :func:`cech_oracle` / :func:`koszul_oracle` expand n / prod s_j^{a_j} as an
  iterated Laurent series and keep the part with every exponent negative.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from typing import Sequence

import sympy

from . import signs
from .errors import (HypothesisFailure, ModelMismatch, NotSystemOfParameters, ParseError,
                     WindowTooSmall)
from .exact import linalg
from .exact.fields import FieldDesc
from .exact.series import TruncSeries, default_window
from .zerodim import LocalRingDesc, ModuleBase, ZModule, _mono_str, vadd, vclean, vscale

FLAVORS = ("C", "K")


def power_series_over(A: LocalRingDesc, names: Sequence[str]) -> LocalRingDesc:
    """A[[names]]: the relations of A are kept, the new variables are free."""
    names = tuple(names)
    rels = [tuple(r) + (0,) * len(names) for r in A.relations]
    return LocalRingDesc(A.field, A.variables + names, frozenset(rels))


# fraction modules


class FractionModule(ModuleBase):
    """Fraction symbols [b / V^alpha] over a base module, alpha_j >= 1.

    ``base`` is a module over a ring whose variables are the images of the
    non-fraction variables of ``ring`` under ``var_map`` (identity by default).
    ``ann`` is a list of monomials, either exponent tuples over ``ring`` or
    dicts ``{name: exponent}`` whose names are ring variables or variables of
    the base ring (these act through the base). When given, the module is the
    common annihilator of these monomials (used by the punctual functor).
    """

    finite = False

    def __init__(self, base: ModuleBase, ring: LocalRingDesc, new_vars: Sequence[str],
                 var_map: dict | None = None, ann: Sequence = (), omega: str = "1"):
        self.base = base
        self.ring = ring
        self.field = ring.field
        self.new_vars = tuple(new_vars)
        self.r = len(self.new_vars)
        old = [v for v in ring.variables if v not in self.new_vars]
        self.var_map = {v: v for v in old} if var_map is None else dict(var_map)
        for v in old:
            if v not in self.var_map:
                raise ModelMismatch(f"no image for ring variable {v}")
        self.ann = [self._ann_dict(a) for a in ann]
        self.omega = omega
        self._windows = {}
        self._base_field = base.field

    def _ann_dict(self, mono) -> dict:
        if isinstance(mono, dict):
            return {k: int(v) for k, v in mono.items() if v}
        return {v: int(e) for v, e in zip(self.ring.variables, mono) if e}

    def act_name(self, name: str, x: dict) -> dict:
        """Action of a ring variable, or of a base-ring variable through the base.

        A base variable whose name clashes with a ring variable is passed as
        ("base", name).
        """
        if isinstance(name, tuple):
            name = name[1]
        elif name in self.ring.variables:
            return self.act(name, x)
        out = {}
        for (bk, alpha), c in x.items():
            for k, v in self.base.act_key(name, bk).items():
                out = vadd(out, {(k, alpha): c * self._coerce(v)})
        return out

    def kills_all(self, x: dict) -> bool:
        for mono in self.ann:
            y = x
            for name, e in mono.items():
                for _ in range(e):
                    y = self.act_name(name, y)
            if y:
                return False
        return True

    def _coerce(self, c):
        if self._base_field == self.field:
            return c
        return self.field.embed(c, self._base_field)

    def act_key(self, var, key):
        bk, alpha = key
        if var in self.new_vars:
            j = self.new_vars.index(var)
            if alpha[j] <= 1:
                return {}
            a2 = alpha[:j] + (alpha[j] - 1,) + alpha[j + 1:]
            return {(bk, a2): self.field.one}
        target = self.var_map[var]
        if target is None:
            return {}
        return {(k, alpha): self._coerce(c) for k, c in self.base.act_key(target, bk).items()}

    def symbols(self, N: int):
        return list(itertools.product(range(1, N + 1), repeat=self.r))

    def window_basis(self, N: int) -> list:
        if N in self._windows:
            return self._windows[N]
        base_basis = self.base.window_basis(N)
        full = []
        for b in base_basis:
            for alpha in self.symbols(N):
                full.append({(k, alpha): self._coerce(c) for k, c in b.items()})
        if self.ann:
            full = self._annihilated(full)
        self._windows[N] = full
        return full

    def _annihilated(self, elems: list) -> list:
        """Basis of the common kernel of the ``ann`` monomials on span(elems)."""
        out_keys = {}
        cols = []
        for e in elems:
            col = {}
            for t, mono in enumerate(self.ann):
                y = e
                for name, ex in mono.items():
                    for _ in range(ex):
                        y = self.act_name(name, y)
                for k, c in y.items():
                    col[out_keys.setdefault((t, k), len(out_keys))] = c
            cols.append(col)
        if not out_keys:
            return elems
        zero = self.field.zero
        rows = [[cols[j].get(i, zero) for j in range(len(cols))] for i in range(len(out_keys))]
        out = []
        for vec in linalg.nullspace(self.field, rows):
            x = {}
            for c, e in zip(vec, elems):
                if c:
                    x = vadd(x, vscale(c, e))
            out.append(x)
        return out

    def element(self, coeffs: dict) -> "FracElement":
        return FracElement(self, vclean(coeffs))

    def format_key(self, key) -> str:
        bk, alpha = key
        label = _base_label(self.base, bk)
        return f"[{label}/{_mono_str(self.new_vars, alpha)}]"

    def __repr__(self):
        return f"FractionModule({self.ring.name()}, new={self.new_vars})"


def _base_label(base, key) -> str:
    if isinstance(base, ZModule):
        return f"e{key}"
    if isinstance(base, FractionModule):
        return base.format_key(key)
    return repr(key)


@dataclass(eq=False)
class FracElement:
    """An element of a fraction module: ``{(base_key, alpha): coefficient}``."""

    module: FractionModule
    coeffs: dict

    def __eq__(self, other):
        if isinstance(other, FracElement):
            return self.coeffs == other.coeffs
        if isinstance(other, dict):
            return self.coeffs == vclean(other)
        return NotImplemented

    def __add__(self, other):
        return FracElement(self.module, vadd(self.coeffs, other.coeffs))

    def __neg__(self):
        return FracElement(self.module, vscale(-1, self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def scale(self, c):
        return FracElement(self.module, vscale(self.module.field(c), self.coeffs))

    def act(self, var: str) -> "FracElement":
        return FracElement(self.module, self.module.act(var, self.coeffs))

    def is_zero(self) -> bool:
        return not self.coeffs

    def max_exponent(self) -> int:
        return max((max(a, default=1) for _, a in self.coeffs), default=1)

    def __str__(self):
        if not self.coeffs:
            return "0"
        fld = self.module.field
        parts = []
        for key in sorted(self.coeffs, key=lambda k: (k[1], repr(k[0]))):
            c = fld.encode(self.coeffs[key])
            if fld.tag == "rationals" and c.endswith("/1"):
                c = c[:-2]
            sym = self.module.format_key(key)
            parts.append(sym if c == "1" else f"-{sym}" if c == "-1" else f"({c})*{sym}")
        return " + ".join(parts)

    __repr__ = __str__


# numerators: graded vectors {T-exponent: coordinate list in M}


def _gv_add(x: dict, y: dict, c=None) -> dict:
    out = dict(x)
    for g, v in y.items():
        w = [a * c for a in v] if c is not None else v
        if g in out:
            s = [a + b for a, b in zip(out[g], w)]
            if any(s):
                out[g] = s
            else:
                del out[g]
        elif any(w):
            out[g] = list(w)
    return out


class _Numerics:
    """Cached action of A-monomials on coordinate vectors of a finite module."""

    def __init__(self, M: ZModule, avars: Sequence[str]):
        self.M = M
        self.avars = tuple(avars)
        self._mats = {}

    def mono(self, beta: tuple):
        Mx = self._mats.get(beta)
        if Mx is None:
            exps = [0] * len(self.M.ring.variables)
            for v, e in zip(self.avars, beta):
                exps[self.M.ring.index(v)] = e
            Mx = self.M.monomial_matrix(exps)
            self._mats[beta] = Mx
        return Mx

    def apply(self, beta: tuple, v: list) -> list:
        if not any(beta):
            return v
        return linalg.matvec(self.mono(beta), v)


@dataclass(frozen=True)
class _Poly:
    """Polynomial over B split as terms (A-exponent, T-exponent, coefficient)."""

    terms: tuple

    @staticmethod
    def from_series(s: TruncSeries, avars, tvars) -> "_Poly":
        ia = [s.variables.index(v) for v in avars]
        it = [s.variables.index(v) for v in tvars]
        terms = []
        for e, c in s.coeffs.items():
            terms.append((tuple(e[i] for i in ia), tuple(e[i] for i in it), c))
        return _Poly(tuple(sorted(terms, key=lambda t: (t[1], t[0]))))

    def mul(self, other: "_Poly", tbound: int | None = None) -> "_Poly":
        acc = {}
        for a1, t1, c1 in self.terms:
            for a2, t2, c2 in other.terms:
                t = tuple(x + y for x, y in zip(t1, t2))
                if tbound is not None and sum(t) >= tbound:
                    continue
                key = (tuple(x + y for x, y in zip(a1, a2)), t)
                acc[key] = acc.get(key, 0) + c1 * c2
        return _Poly(tuple(sorted(((a, t, c) for (a, t), c in acc.items() if c),
                                  key=lambda x: (x[1], x[0]))))

    def power(self, k: int, one, tbound: int | None = None) -> "_Poly":
        na = len(self.terms[0][0]) if self.terms else 0
        nt = len(self.terms[0][1]) if self.terms else 0
        out = _Poly((((0,) * na, (0,) * nt, one),))
        for _ in range(k):
            out = out.mul(self, tbound)
        return out

    def t_order(self) -> int:
        return min((sum(t) for _, t, _ in self.terms), default=0)

    def act(self, num: _Numerics, gv: dict, keep=None) -> dict:
        """Apply to a graded vector; ``keep(exponent)`` filters output exponents."""
        out = {}
        for a, t, c in self.terms:
            for g, v in gv.items():
                e = tuple(x + y for x, y in zip(g, t))
                if keep is not None and not keep(e):
                    continue
                w = num.apply(a, v)
                if any(w):
                    out = _gv_add(out, {e: w}, c)
        return out


# the fraction symbol


@dataclass(eq=False)
class GenFraction:
    """[numerator (x) omega / s_1^{a_1}, ..., s_n^{a_n}] with flavor C or K.

    ``module`` is a finite module over A, ``ring`` is B = A[[tvars]].
    ``numerator`` maps (key of module, T-exponent) to a coefficient; plain
    module elements (keys only) are accepted and placed in T-degree 0.
    Denominators are (TruncSeries over ring.variables, exponent) pairs.
    """

    module: ZModule
    ring: LocalRingDesc
    tvars: tuple
    numerator: dict
    denominators: tuple
    flavor: str = "C"
    omega: str = "1"

    def __post_init__(self):
        self.tvars = tuple(self.tvars)
        if self.flavor not in FLAVORS:
            raise ValueError(f"flavor must be C or K, got {self.flavor!r}")
        r = len(self.tvars)
        num = {}
        for k, c in self.numerator.items():
            if not (isinstance(k, tuple) and len(k) == 2 and isinstance(k[1], tuple)):
                k = (k, (0,) * r)
            if c:
                num[k] = num.get(k, 0) + self.ring.field(c)
        self.numerator = vclean(num)
        dens = []
        for s, a in self.denominators:
            if not isinstance(s, TruncSeries):
                s = TruncSeries.parse(str(s), self.ring.field, self.ring.variables, N=64, D=0)
            if s.variables != self.ring.variables:
                raise ModelMismatch("denominator is not a series over the declared ring")
            if int(a) < 1:
                raise ValueError("denominator exponents must be positive")
            if s.constant_term():
                raise NotSystemOfParameters(f"denominator {s} is not in the maximal ideal")
            dens.append((s, int(a)))
        self.denominators = tuple(dens)
        missing = [v for v in self.tvars if v not in self.ring.variables]
        if missing:
            raise ModelMismatch(f"fraction variables {missing} not in ring")

    # structure

    @property
    def degree(self) -> int:
        return len(self.denominators)

    @property
    def avars(self) -> tuple:
        return tuple(v for v in self.ring.variables if v not in self.tvars)

    @property
    def field(self) -> FieldDesc:
        return self.ring.field

    @cached_property
    def fraction_module(self) -> FractionModule:
        M = self.module
        base = M if tuple(M.ring.variables) == self.avars else M
        return FractionModule(base, self.ring, self.tvars, var_map={v: v for v in self.avars},
                              omega=self.omega)

    def graded_numerator(self) -> dict:
        dim = self.module.dim
        out = {}
        for (k, g), c in self.numerator.items():
            v = out.setdefault(g, [self.field.zero] * dim)
            v[k] += c
        return {g: v for g, v in out.items() if any(v)}

    def with_numerator(self, numerator: dict) -> "GenFraction":
        return GenFraction(self.module, self.ring, self.tvars, numerator, self.denominators,
                           self.flavor, self.omega)

    def scaled(self, c) -> "GenFraction":
        return self.with_numerator(vscale(self.field(c), self.numerator))

    # text form

    def __str__(self):
        return format_fraction(self)

    __repr__ = __str__

    @staticmethod
    def parse(text: str, module: ZModule, ring: LocalRingDesc, tvars: Sequence[str]) -> "GenFraction":
        return parse_fraction(text, module, ring, tvars)


def make_fraction(module: ZModule, tvars: Sequence[str], numerator: dict, denominators,
                  flavor: str = "C", ring: LocalRingDesc | None = None, omega: str = "1") -> GenFraction:
    """Convenience constructor: denominators may be strings such as ``"T-u"``."""
    ring = ring or power_series_over(module.ring, tvars)
    return GenFraction(module, ring, tuple(tvars), numerator, tuple(denominators), flavor, omega)


# grammar:  [ num (x) l / s1^a1, s2^a2 ]#C    ("⊗" or "(x)"; "#C" optional)

_FRAC_RE = re.compile(r"^\s*\[(?P<num>[^/\]]*)/(?P<den>[^\]]*)\]\s*(?:#\s*(?P<flavor>[CK]))?\s*$")


def _split_top(text: str, sep: str = ",") -> list:
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == sep and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [x.strip() for x in out]


def _split_power(item: str):
    m = re.fullmatch(r"\((.*)\)\s*\^\s*(\d+)", item)
    if m:
        return m.group(1), int(m.group(2))
    m = re.fullmatch(r"([A-Za-z_]\w*)\s*\^\s*(\d+)", item)
    if m:
        return m.group(1), int(m.group(2))
    return item, 1


def parse_fraction(text: str, module: ZModule, ring: LocalRingDesc, tvars: Sequence[str]) -> GenFraction:
    """Parse the text notation.

    The numerator is a linear combination of the basis names ``e0, e1, ...`` of
    the module with polynomial coefficients in the ring variables, optionally
    followed by ``⊗ label`` (or ``(x) label``) naming the omega generator.
    """
    tvars = tuple(tvars)
    m = _FRAC_RE.match(text.replace("**", "^"))
    if not m:
        raise ParseError(f"cannot parse fraction {text!r}")
    num_text = m.group("num").replace("(x)", "⊗")
    omega = "1"
    if "⊗" in num_text:
        num_text, omega = [x.strip() for x in num_text.split("⊗", 1)]
    flavor = m.group("flavor") or "C"
    dens = []
    den_text = m.group("den").strip()
    if den_text:
        for item in _split_top(den_text):
            base, a = _split_power(item)
            dens.append((TruncSeries.parse(base, ring.field, ring.variables, N=64, D=0), a))
    numerator = parse_numerator(num_text, module, ring, tvars)
    return GenFraction(module, ring, tvars, numerator, tuple(dens), flavor, omega)


def parse_numerator(text: str, module: ZModule, ring: LocalRingDesc, tvars: Sequence[str]) -> dict:
    tvars = tuple(tvars)
    avars = tuple(v for v in ring.variables if v not in tvars)
    names = {f"e{i}": sympy.Symbol(f"e{i}") for i in range(module.dim)}
    syms = {v: sympy.Symbol(v) for v in ring.variables}
    for v in ring.field.variables:
        syms[v] = sympy.Symbol(v)
    try:
        expr = sympy.expand(sympy.sympify(text.replace("^", "**"), locals={**syms, **names}))
        poly = sympy.Poly(expr, *[names[f"e{i}"] for i in range(module.dim)],
                          *[syms[v] for v in ring.variables])
    except (sympy.SympifyError, sympy.PolynomialError, TypeError) as exc:
        raise ParseError(f"cannot parse numerator {text!r}") from exc
    num = _Numerics(module, avars)
    out = {}
    dim = module.dim
    for mon, c in poly.terms():
        e, rest = mon[:dim], mon[dim:]
        if sum(e) != 1:
            raise ParseError(f"numerator {text!r} is not linear in the basis names")
        k = e.index(1)
        emap = dict(zip(ring.variables, rest))
        beta = tuple(emap[v] for v in avars)
        gamma = tuple(emap[v] for v in tvars)
        vec = [ring.field.zero] * dim
        vec[k] = ring.field.one
        vec = num.apply(beta, vec)
        cc = ring.field.dom.from_sympy(c)
        for i, x in enumerate(vec):
            if x:
                out = vadd(out, {(i, gamma): cc * x})
    return out


def format_numerator(f: GenFraction) -> str:
    parts = []
    fld = f.field
    for (k, g), c in sorted(f.numerator.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        cs = fld.encode(c)
        if fld.tag == "rationals" and cs.endswith("/1"):
            cs = cs[:-2]
        mon = _mono_str(f.tvars, g)
        term = f"e{k}" if mon == "1" else f"{mon}*e{k}"
        parts.append(term if cs == "1" else f"({cs})*{term}")
    return " + ".join(parts) or "0"


def format_fraction(f: GenFraction) -> str:
    num = format_numerator(f)
    if f.omega != "1":
        num += f" ⊗ {f.omega}"
    dens = ", ".join(f"({s})^{a}" for s, a in f.denominators)
    return f"[ {num} / {dens} ]#{f.flavor}"


# flavor


def convert_flavor(f: GenFraction) -> GenFraction:
    """Same class in the other flavor: the numerator picks up (-1)^n."""
    other = "K" if f.flavor == "C" else "C"
    g = f.scaled(signs.flavor(f.degree))
    g.flavor = other
    return g


def to_C(f: GenFraction) -> GenFraction:
    return f if f.flavor == "C" else convert_flavor(f)


# normal form by the determinant rule


def _radical_exponent_bound(window: int | None) -> int:
    return window if window is not None else default_window()[0]


def _a_basis(num: _Numerics, gv: dict, na: int) -> list:
    """A-monomials beta whose images beta * n are independent and span A n."""
    dim = num.M.dim
    keys = sorted(gv)

    def flat(x: dict) -> list:
        out = []
        for g in keys:
            out.extend(x.get(g, [num.M.field.zero] * dim))
        return out

    chosen, vecs = [], []
    deg = 0
    while True:
        found_nonzero = False
        for beta in _monomials_of_degree(na, deg):
            img = {g: num.apply(beta, v) for g, v in gv.items()}
            fv = flat(img)
            if not any(fv):
                continue
            found_nonzero = True
            if not vecs or not linalg.span_contains(num.M.field, vecs, fv):
                chosen.append(beta)
                vecs.append(fv)
        if not found_nonzero or na == 0:
            break
        deg += 1
    return chosen


def _monomials_of_degree(n: int, d: int):
    if n == 0:
        if d == 0:
            yield ()
        return
    for combo in itertools.combinations_with_replacement(range(n), d):
        e = [0] * n
        for i in combo:
            e[i] += 1
        yield tuple(e)


def _t_monomials_below(r: int, bound: int) -> list:
    """T-exponents of total degree < bound in graded-lex order."""
    out = []
    for d in range(bound):
        mons = list(_monomials_of_degree(r, d))
        mons.sort(key=lambda e: tuple(-x for x in e))
        out.extend(mons)
    return out


def transition_matrix(f: GenFraction, c: int):
    """Polynomial U with T_i^c n = sum_j U_ij s_j^{a_j} n modulo T-degree N', or None.

    Returns (U, N') where U[i][j] is a _Poly; N' = c + r(c-1) + 1 makes the
    truncation invisible in the top cohomology.
    """
    r = len(f.tvars)
    avars = f.avars
    num = _Numerics(f.module, avars)
    gv = f.graded_numerator()
    dim = f.module.dim
    Nprime = c + r * (c - 1) + 1
    betas = _a_basis(num, gv, len(avars))
    S = [_Poly.from_series(s, avars, f.tvars).power(a, f.field.one, Nprime) for s, a in f.denominators]
    keep = lambda e: sum(e) < Nprime  # noqa: E731
    row_index: dict = {}

    def rows_of(x: dict) -> dict:
        out = {}
        for g, v in x.items():
            for i, val in enumerate(v):
                if val:
                    out[row_index.setdefault((g, i), len(row_index))] = val
        return out

    # V[j][beta] = beta * S_j * n
    V = []
    for Sj in S:
        base = Sj.act(num, gv, keep)
        V.append([{g: num.apply(b, v) for g, v in base.items()} for b in betas])
    unknowns = []
    cols = []
    for j, Sj in enumerate(S):
        gammas = _t_monomials_below(r, Nprime - Sj.t_order())
        for bi, b in enumerate(betas):
            for gm in gammas:
                shifted = {}
                for g, v in V[j][bi].items():
                    e = tuple(x + y for x, y in zip(g, gm))
                    if sum(e) < Nprime and any(v):
                        shifted[e] = v
                unknowns.append((j, b, gm))
                cols.append(rows_of(shifted))
    U = []
    for i in range(r):
        unit = tuple(c if t == i else 0 for t in range(r))
        rhs = {}
        for g, v in gv.items():
            e = tuple(x + y for x, y in zip(g, unit))
            if sum(e) < Nprime:
                rhs[e] = v
        rhs_rows = rows_of(rhs)
        sol = linalg.solve_sparse(f.field, cols, len(row_index), rhs_rows)
        if sol is None:
            return None
        row = [dict() for _ in range(r)]
        for val, (j, b, gm) in zip(sol, unknowns):
            if val:
                row[j][(b, gm)] = val
        U.append([_Poly(tuple(sorted(((b, gm, val) for (b, gm), val in row[j].items()),
                                     key=lambda t: (t[1], t[0])))) for j in range(r)])
    del dim
    return U, Nprime


def _det_times(U, num: _Numerics, gv: dict, box: tuple, one) -> dict:
    """det(U) applied to a graded vector, keeping exponents inside the box."""
    r = len(U)
    keep = lambda e: all(x < b for x, b in zip(e, box))  # noqa: E731
    total = {}
    for perm in itertools.permutations(range(r)):
        sign = signs.permutation_sign(perm)
        x = gv
        for i in range(r):
            x = U[i][perm[i]].act(num, x, keep)
            if not x:
                break
        if x:
            total = _gv_add(total, x, one * sign)
    return total


def normalize(f: GenFraction, window: int | None = None) -> FracElement:
    """Normal form of a fraction in the basis [m / T^alpha] (C-flavor).

    Searches c = c0, c0 + 1, ... up to the window for a transition matrix,
    then applies [n / s^a] = [det(U) n / T^c]. K-flavored input is first
    converted with the (-1)^n law.
    """
    f = to_C(f)
    r = len(f.tvars)
    fm = f.fraction_module
    if f.degree != r:
        raise NotSystemOfParameters(f"{f.degree} denominators for {r} fraction variables")
    if not f.numerator:
        return fm.element({})
    if r == 0:
        return fm.element({(k, ()): c for (k, g), c in f.numerator.items() if not any(g)})
    bound = _radical_exponent_bound(window)
    c0 = max(1, max(a * _Poly.from_series(s, f.avars, f.tvars).t_order() for s, a in f.denominators))
    c0 = min(c0, bound)
    num = _Numerics(f.module, f.avars)
    gv = f.graded_numerator()
    for c in range(c0, bound + 1):
        found = transition_matrix(f, c)
        if found is None:
            continue
        U, _ = found
        box = (c,) * r
        dv = _det_times(U, num, gv, box, f.field.one)
        out = {}
        for g, v in dv.items():
            alpha = tuple(c - x for x in g)
            for k, val in enumerate(v):
                if val:
                    out[(k, alpha)] = out.get((k, alpha), 0) + val
        return fm.element(out)
    raise NotSystemOfParameters(
        f"no c <= {bound} with T^c in ({', '.join(str(s) for s, _ in f.denominators)}) + ann(numerator)")


def check_support(f: GenFraction, window: int | None = None) -> int:
    """Least c <= window with T_j^c in (s_1^{a_1}..s_n^{a_n}) + ann(numerator); raises otherwise."""
    bound = _radical_exponent_bound(window)
    for c in range(1, bound + 1):
        if transition_matrix(f, c) is not None:
            return c
    raise NotSystemOfParameters("denominators do not generate (T) up to radical within the window")


# the Laurent oracle


def _split_denominator(s: TruncSeries, f: GenFraction, j: int):
    """s = c T_j^e u(T_j) + Q with u a unit in T_j alone and Q "smaller".

    Every term of Q must contain a variable of A or some T_l with l < j; this
    triangular shape is what the oracle handles.
    """
    tv = f.tvars
    it = [s.variables.index(v) for v in tv]
    pure, rest = {}, []
    for e, c in s.coeffs.items():
        others = [x for i, x in enumerate(e) if i != it[j]]
        if not any(others):
            pure[e[it[j]]] = c
        else:
            rest.append((e, c))
    if not pure:
        raise ModelMismatch(f"denominator {s} has no pure {tv[j]} part; outside the oracle domain")
    for e, c in rest:
        has_a = any(e[i] for i, v in enumerate(s.variables) if v not in tv)
        has_lower = any(e[it[l]] for l in range(j))
        if not (has_a or has_lower):
            raise ModelMismatch(f"term of {s} outside the oracle domain (needs a T_l with l < {j + 1})")
    e0 = min(pure)
    lead = pure[e0]
    u = {d - e0: c / lead for d, c in pure.items()}
    Q = _Poly.from_series(TruncSeries(s.field, s.variables, dict(rest), N=s.N, D=s.D), f.avars, tv)
    return lead, e0, u, Q


def _unit_inverse_power(u: dict, k: int, degree: int, field: FieldDesc) -> dict:
    """Coefficients of u(T)^{-k} up to T-degree < degree (u(0) = 1)."""
    if degree <= 0:
        return {}
    ser = TruncSeries(field, ("t",), {(d,): c for d, c in u.items()}, N=degree, D=0)
    inv = ser.inverse() ** k
    return {e[0]: c for e, c in inv.coeffs.items()}


def laurent_class(f: GenFraction, window: int | None = None) -> FracElement:
    """The all-negative part of n / prod s_j^{a_j}, expanded as an iterated Laurent series."""
    r = len(f.tvars)
    fm = f.fraction_module
    if f.degree != r:
        raise NotSystemOfParameters(f"{f.degree} denominators for {r} fraction variables")
    D = window if window is not None else default_window()[1]
    num = _Numerics(f.module, f.avars)
    cur = f.graded_numerator()
    fld = f.field
    for j, (s, a) in enumerate(f.denominators):
        lead, e, u, Q = _split_denominator(s, f, j)

        def alive(ex, j=j):
            return all(ex[l] < 0 for l in range(j))

        # P_k = Q^k * cur, pruned; terms with T_l >= 0 (l < j) never come back
        P = cur
        new = {}
        k = 0
        while P:
            coef = fld(comb(a + k - 1, k)) * (fld.one if k % 2 == 0 else -fld.one)
            shift = e * (a + k)
            low = min(ex[j] for ex in P)
            degree = max(shift - low, 0)
            uinv = _unit_inverse_power(u, a + k, degree, fld)
            scale = coef / (lead ** (a + k))
            for ex, v in P.items():
                for d, cu in uinv.items():
                    ex2 = ex[:j] + (ex[j] - shift + d,) + ex[j + 1:]
                    if ex2[j] >= 0:
                        continue
                    new = _gv_add(new, {ex2: v}, scale * cu)
            P = Q.act(num, P, alive)
            k += 1
            if k > 10_000:
                raise WindowTooSmall("Laurent expansion does not terminate", exponent=None)
        cur = new
    out = {}
    for ex, v in cur.items():
        if any(x >= 0 for x in ex):
            continue
        worst = min(ex, default=0)
        if -worst > D:
            raise WindowTooSmall(f"exponent {worst} outside the Laurent window D={D}", exponent=worst)
        alpha = tuple(-x for x in ex)
        for k, val in enumerate(v):
            if val:
                out[(k, alpha)] = out.get((k, alpha), 0) + val
    return fm.element(out)


def cech_oracle(f: GenFraction, window: int | None = None) -> FracElement:
    """Class of the raw data read as a C-fraction, whatever flavor f carries."""
    g = f if f.flavor == "C" else _reflavor(f, "C")
    return laurent_class(g, window)


def _reflavor(f: GenFraction, flavor: str) -> GenFraction:
    return GenFraction(f.module, f.ring, f.tvars, f.numerator, f.denominators, flavor, f.omega)


def koszul_oracle(f: GenFraction, window: int | None = None) -> FracElement:
    """Class of f computed from the data in its own flavor.

    A K-fraction is first read in the direct-limit Koszul complex (where its
    normal form is the negative Laurent part) and then transported to the
    C-normalized basis by the comparison sign computed on explicit truncated
    complexes (see :func:`comparison_signs`).
    """
    base = laurent_class(f, window)
    if f.flavor == "C":
        return base
    eps = comparison_signs(f.degree)[f.degree] if f.degree else 1
    return base.scale(eps)


# explicit truncated complexes: Cech of the cover {D(T_i)} versus stable Koszul


def _stable_koszul(r: int, lo: int, hi: int):
    """Truncated stable Koszul complex on T_1..T_r over K.

    Degree p is spanned by (I, e) with |I| = p and Laurent monomials e in the
    window, negative exponents allowed only at indices in I. The differential
    is the tensor-product differential.
    """
    comps = {}
    for p in range(r + 1):
        basis = []
        for I in itertools.combinations(range(r), p):
            ranges = [range(lo, hi) if i in I else range(0, hi) for i in range(r)]
            for e in itertools.product(*ranges):
                basis.append((I, e))
        comps[p] = basis
    diffs = {}
    for p in range(r):
        index = {b: i for i, b in enumerate(comps[p + 1])}
        mat = {}
        for col, (I, e) in enumerate(comps[p]):
            for jx in range(r):
                if jx in I:
                    continue
                J = tuple(sorted(I + (jx,)))
                sign = signs.tensor_differential(sum(1 for i in I if i < jx))
                mat[(index[(J, e)], col)] = sign
        diffs[p] = mat
    return comps, diffs


def comparison_signs(n: int, lo: int = -2, hi: int = 2) -> dict:
    """Signs eps_q with psi^q = eps_q * id a chain map C[-1] -> K on the truncated complexes.

    The Cech complex of the cover has C^{q-1} = K^q with the same matrices, the
    shift C[-1] negates the differential, and eps_1 is fixed by the sign of the
    connecting map. Each subsequent eps is solved for on the explicit matrices.
    """
    comps, diffs = _stable_koszul(n, lo, hi)
    eps = {1: signs.CONNECTING}
    for q in range(1, n):
        dK = diffs[q]
        dC = {k: v * signs.shift_differential(-1) for k, v in dK.items()}  # differential of C[-1]
        found = None
        for cand in (1, -1):
            lhs = {k: cand * v for k, v in dC.items()}
            rhs = {k: eps[q] * v for k, v in dK.items()}
            if lhs == rhs:
                found = cand
                break
        if found is None:
            raise ModelMismatch(f"no sign makes the comparison a chain map in degree {q}")
        eps[q + 1] = found
    return eps


# iteration


@dataclass(eq=False)
class OuterFraction:
    """[[inner] (x) l / t_1^{b_1}, ..., t_j^{b_j}] over C = B[[uvars]]."""

    inner: GenFraction
    ring: LocalRingDesc
    uvars: tuple
    denominators: tuple
    flavor: str = "C"
    omega: str = "1"

    def __post_init__(self):
        self.uvars = tuple(self.uvars)
        dens = []
        for s, a in self.denominators:
            if not isinstance(s, TruncSeries):
                s = TruncSeries.parse(str(s), self.ring.field, self.ring.variables, N=64, D=0)
            dens.append((s, int(a)))
        self.denominators = tuple(dens)

    @property
    def degree(self) -> int:
        return len(self.denominators)


def make_outer(inner: GenFraction, uvars: Sequence[str], denominators, flavor: str = "C",
               omega: str = "1") -> OuterFraction:
    ring = power_series_over(inner.ring, uvars)
    return OuterFraction(inner, ring, tuple(uvars), tuple(denominators), flavor, omega)


def _lift(s: TruncSeries, ring: LocalRingDesc) -> TruncSeries:
    idx = [ring.variables.index(v) for v in s.variables]
    coeffs = {}
    for e, c in s.coeffs.items():
        full = [0] * ring.r
        for i, x in zip(idx, e):
            full[i] = x
        coeffs[tuple(full)] = c
    return TruncSeries(s.field, ring.variables, coeffs, N=max(s.N, 64), D=0)


def _reduce_to(s: TruncSeries, keep: Sequence[str]) -> TruncSeries:
    """Set every variable not in ``keep`` to zero."""
    idx = [s.variables.index(v) for v in keep]
    coeffs = {}
    for e, c in s.coeffs.items():
        if any(x for i, x in enumerate(e) if i not in idx):
            continue
        key = tuple(e[i] for i in idx)
        coeffs[key] = coeffs.get(key, 0) + c
    return TruncSeries(s.field, tuple(keep), coeffs, N=s.N, D=0)


def generates_up_to_radical(series: Sequence[TruncSeries], window: int | None = None) -> int | None:
    """Least c <= window with (series) containing every monomial of degree c, else None.

    Works in K[[V]] for the variables V of the series: by Nakayama it is enough
    that the degree-c monomials lie in (series) + (V)^{c+1}.
    """
    if not series:
        return None
    variables = series[0].variables
    nv = len(variables)
    fld = series[0].field
    if nv == 0:
        return None
    if any(s.constant_term() for s in series):
        return None
    bound = _radical_exponent_bound(window)
    for c in range(1, bound + 1):
        top = c + 1
        index = {}
        cols = []
        for s in series:
            sp = [(e, v) for e, v in s.coeffs.items() if sum(e) < top]
            for d in range(0, top):
                for b in _monomials_of_degree(nv, d):
                    col = {}
                    for e, v in sp:
                        ex = tuple(x + y for x, y in zip(e, b))
                        if sum(ex) < top:
                            row = index.setdefault(ex, len(index))
                            col[row] = col.get(row, 0) + v
                    cols.append(col)
        ok = True
        for mono in _monomials_of_degree(nv, c):
            row = index.setdefault(mono, len(index))
            if linalg.solve_sparse(fld, cols, len(index), {row: fld.one}) is None:
                ok = False
                break
        if ok:
            return c
    return None


def check_iteration_hypotheses(outer: OuterFraction, window: int | None = None) -> None:
    """Hypotheses (a)-(c) of the iteration formula, certified within the window.

    (a) the numerator module N = M (x)_A B is I-torsion for I = m_A B, i.e. M is
        a finite-length A-module;
    (b) the inner denominators s lie in m_B and generate m_B / I up to radical;
    (c) the outer denominators t lie in m_C and generate m_C / m_B C up to radical.
    """
    inner = outer.inner
    M = inner.module
    if not getattr(M, "finite", False) or not isinstance(M, ZModule):
        raise HypothesisFailure("a", "numerator module is not torsion over the maximal ideal of A")
    if M.validate():
        raise HypothesisFailure("a", "numerator module has a non-nilpotent action")
    if inner.tvars:
        s_bar = [_reduce_to(s, inner.tvars) for s, _ in inner.denominators]
        if generates_up_to_radical(s_bar, window) is None:
            raise HypothesisFailure("b", "inner denominators do not generate m_B / m_A B up to radical")
    elif inner.denominators:
        raise HypothesisFailure("b", "inner denominators but no fraction variables")
    t_bar = [_reduce_to(t, outer.uvars) for t, _ in outer.denominators]
    if any(t.constant_term() for t, _ in outer.denominators):
        raise HypothesisFailure("c", "outer denominator is a unit")
    if outer.uvars and generates_up_to_radical(t_bar, window) is None:
        raise HypothesisFailure("c", "outer denominators do not generate m_C / m_B C up to radical")
    if not outer.uvars and outer.denominators:
        raise HypothesisFailure("c", "outer denominators but no new variables")


def iterate(outer: OuterFraction, check: bool = True, shifts: tuple = (0, 0),
            window: int | None = None) -> GenFraction:
    """[[n / s] (x) l / t] -> [n (x) l / s, t] (C-flavor).

    ``shifts=(a, b)`` runs the sign bookkeeping of the (a, b)-parameterized
    isomorphism; the result does not depend on it.
    """
    if check:
        check_iteration_hypotheses(outer, window)
    inner = to_C(outer.inner)
    if outer.flavor == "K":
        outer_sign = signs.flavor(outer.degree)
    else:
        outer_sign = 1
    a, b = shifts
    p, q = outer.degree, inner.degree
    sign = outer_sign * signs.iterate_shift_sign(a, b, p, q) * signs.iterate_shift_sign(0, 0, p, q)
    C = outer.ring
    dens = tuple((_lift(s, C), e) for s, e in inner.denominators) + tuple(outer.denominators)
    omega = inner.omega if outer.omega == "1" else (
        outer.omega if inner.omega == "1" else f"{inner.omega}⊗{outer.omega}")
    nu = len(outer.uvars)
    numerator = {(k, g + (0,) * nu): sign * c for (k, g), c in inner.numerator.items()}
    return GenFraction(inner.module, C, inner.tvars + outer.uvars, numerator, dens, "C", omega)


def two_step_oracle(outer: OuterFraction, window: int | None = None) -> FracElement:
    """Oracle for the left side: inner class first, then the outer fraction over its window.

    The inner class is a finite combination of symbols; the window of the
    fraction module containing it is a finite module over B, and the outer
    fraction is expanded over that module. Keys are merged to (m, alpha + beta).
    """
    inner = outer.inner
    xi = koszul_oracle(inner, window)
    fm = inner.fraction_module
    N = xi.max_exponent() if xi.coeffs else 1
    W = fm.window_module(N)
    target = FractionModule(inner.module, outer.ring, inner.tvars + outer.uvars,
                            var_map={v: v for v in inner.avars})
    if not xi.coeffs:
        return target.element({})
    coords = linalg.coordinates(fm.field, [_as_vec(W, e) for e in W.elements], _as_vec(W, xi.coeffs))
    if coords is None:
        raise ModelMismatch("inner class is not in its window")
    numerator = {i: c for i, c in enumerate(coords) if c}
    Wmod = ZModule(inner.ring, W.actions, W.labels, dim=W.dim, check=False)
    g = GenFraction(Wmod, outer.ring, outer.uvars, numerator, outer.denominators, outer.flavor,
                    outer.omega)
    eta = koszul_oracle(g, window)
    out = {}
    for (wi, beta), c in eta.coeffs.items():
        for (k, alpha), x in W.elements[wi].items():
            key = (k, alpha + beta)
            out[key] = out.get(key, 0) + c * x
    return target.element(out)


def _as_vec(W: ZModule, x: dict) -> list:
    keys = sorted({k for e in W.elements for k in e}, key=repr)
    return [x.get(k, W.field.zero) for k in keys]


# random instances (triangular denominators, inside the oracle domain)


def random_denominators(rng, ring: LocalRingDesc, tvars: Sequence[str], max_exp: int = 3,
                        max_lead: int = 2) -> list:
    fld = ring.field
    avars = [v for v in ring.variables if v not in tvars]
    out = []
    for j, t in enumerate(tvars):
        e = rng.randint(1, max_lead) if rng.random() < 0.3 else 1
        coeffs = {}

        def mono(**kw):
            return tuple(kw.get(v, 0) for v in ring.variables)

        coeffs[mono(**{t: e})] = fld(rng.choice([1, 1, 2, -1, 3]))
        if rng.random() < 0.4:
            coeffs[mono(**{t: e + 1})] = fld(rng.randint(-2, 2))
        for _ in range(rng.randint(0, 2)):
            pool = []
            if avars:
                pool.append("a")
            if j > 0:
                pool.append("t")
            if not pool:
                break
            kind = rng.choice(pool)
            exps = {}
            if kind == "a":
                exps[rng.choice(avars)] = rng.randint(1, 2)
                if rng.random() < 0.3:
                    exps[t] = 1
            else:
                exps[rng.choice(tvars[:j])] = rng.randint(1, 2)
            key = mono(**exps)
            coeffs[key] = coeffs.get(key, 0) + fld(rng.choice([1, -1, 2]))
        s = TruncSeries(fld, ring.variables, coeffs, N=64, D=0)
        out.append((s, rng.randint(1, max_exp)))
    return out


def random_numerator(rng, M: ZModule, r: int, t_degree: int = 0) -> dict:
    fld = M.field
    out = {}
    for k in range(M.dim):
        if rng.random() < 0.7:
            g = tuple(rng.randint(0, t_degree) for _ in range(r))
            out[(k, g)] = fld(rng.randint(-3, 3))
    return vclean(out) or {(0, (0,) * r): fld.one}


def random_fraction(rng, M: ZModule, tvars: Sequence[str], flavor: str = "C", max_exp: int = 3,
                    t_degree: int = 0) -> GenFraction:
    ring = power_series_over(M.ring, tvars)
    dens = random_denominators(rng, ring, tvars, max_exp)
    return GenFraction(M, ring, tuple(tvars), random_numerator(rng, M, len(tvars), t_degree),
                       tuple(dens), flavor)
