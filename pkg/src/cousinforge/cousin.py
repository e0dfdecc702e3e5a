"""Cousin complexes on finite specialization posets.

A complex is stored point by point: a module at each point and one coboundary
callable per immediate specialization. Infinite fibers of Spec are
materialized up to a prime bound, and every homology answer carries that
bound as its scope.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .errors import ModelMismatch, ParseError, WindowTooSmall
from .exact.pid import PIDDesc, PrimeBound
from .exact.smith import SmithForm, smith_diagonal
from .zerodim import TorsionModule, is_injective_hull


# points and posets


@dataclass(frozen=True)
class Point:
    """A point of a desk-scale Spec.

    kind is one of generic, prime (closed point of Spec R), fiber-generic
    and fiber-closed (points of A^1 over a base point named ``base``).
    """

    name: str
    kind: str
    prime: object = None
    fiber: object = None
    base: str | None = None

    def to_json(self) -> dict:
        out = {"name": self.name, "kind": self.kind}
        if self.base is not None:
            out["base"] = self.base
        return out


class SpecPoset:
    """Points with their immediate specializations ``covers`` = {(x, x')}."""

    def __init__(self, points: Sequence[Point], covers: Iterable[tuple]):
        self.points = {p.name: p for p in points}
        if len(self.points) != len(points):
            raise ModelMismatch("duplicate point names")
        self.order = [p.name for p in points]
        self.covers = sorted(set(covers), key=lambda c: (self.order.index(c[0]), self.order.index(c[1]))
                             if c[0] in self.points and c[1] in self.points else (0, 0))
        for x, y in self.covers:
            if x not in self.points or y not in self.points:
                raise ModelMismatch(f"cover {x} -> {y} mentions an unknown point")
        self._up = {p: [] for p in self.order}
        self._down = {p: [] for p in self.order}
        for x, y in self.covers:
            self._up[x].append(y)
            self._down[y].append(x)
        self._check()

    def _check(self):
        # acyclic, and no cover is implied by a longer chain
        for x in self.order:
            below = self.specializations(x)
            if x in below:
                raise ModelMismatch(f"specialization relation has a cycle through {x}")
            for y in self._up[x]:
                for z in self._up[x]:
                    if z != y and y in self.specializations(z):
                        raise ModelMismatch(f"{x} -> {y} is not immediate (passes through {z})")

    def up(self, x: str) -> list:
        return list(self._up[x])

    def down(self, x: str) -> list:
        return list(self._down[x])

    def specializations(self, x: str) -> set:
        out, stack = set(), list(self._up[x])
        while stack:
            y = stack.pop()
            if y not in out:
                out.add(y)
                stack.extend(self._up[y])
        return out

    def generizations(self, x: str) -> set:
        out, stack = set(), list(self._down[x])
        while stack:
            y = stack.pop()
            if y not in out:
                out.add(y)
                stack.extend(self._down[y])
        return out

    def intermediate(self, x: str, z: str) -> list:
        return [y for y in self._up[x] if z in self._up[y]]

    def length_two(self) -> list:
        """All (x, z) joined by a chain of two immediate specializations."""
        out = []
        for x in self.order:
            seen = []
            for y in self._up[x]:
                for z in self._up[y]:
                    if z not in seen:
                        seen.append(z)
            out += [(x, z) for z in seen]
        return out

    def is_open(self, subset: Iterable[str]) -> bool:
        s = set(subset)
        return all(self.generizations(x) <= s for x in s)

    def restrict(self, subset: Iterable[str]) -> "SpecPoset":
        s = set(subset)
        return SpecPoset([self.points[p] for p in self.order if p in s],
                         [(x, y) for x, y in self.covers if x in s and y in s])

    def to_json(self) -> dict:
        return {"points": [self.points[p].to_json() for p in self.order],
                "covers": [list(c) for c in self.covers]}

    def to_dot(self, delta: "CodimFn | None" = None, arrows: dict | None = None) -> str:
        """DOT text: points with their codimension, one edge per immediate specialization."""
        lines = ["digraph spec {", "  rankdir=TB;"]
        for p in self.order:
            label = p if delta is None else f"{p}\\nΔ={delta[p]}"
            lines.append(f'  "{p}" [label="{label}"];')
        for x, y in self.covers:
            extra = ""
            if arrows and (x, y) in arrows:
                extra = f' [label="{arrows[(x, y)]}"]'
            lines.append(f'  "{x}" -> "{y}"{extra};')
        lines.append("}")
        return "\n".join(lines) + "\n"


@dataclass
class CodimFn:
    """A codimension function: Delta(x') = Delta(x) + 1 along immediate specializations."""

    values: dict

    def __getitem__(self, x):
        return self.values[x]

    def violations(self, poset: SpecPoset) -> list:
        return [(x, y) for x, y in poset.covers if self.values[y] != self.values[x] + 1]

    def check(self, poset: SpecPoset) -> "CodimFn":
        bad = self.violations(poset)
        if bad:
            raise ModelMismatch(f"not a codimension function along {bad}")
        return self

    def shift(self, n: int) -> "CodimFn":
        """Codimension function of C[n]: Delta - n."""
        return CodimFn({x: v - n for x, v in self.values.items()})

    def restrict(self, subset) -> "CodimFn":
        return CodimFn({x: v for x, v in self.values.items() if x in subset})


# point modules


class PointModule:
    """Interface for the module sitting at one point of a Cousin complex."""

    pid: PIDDesc | None = None

    def zero(self):
        raise NotImplementedError

    def add(self, a, b):
        raise NotImplementedError

    def scale(self, c, a):
        raise NotImplementedError

    def is_zero(self, a) -> bool:
        raise NotImplementedError

    def window(self, N: int) -> list:
        """Generators of the part of the module materialized at window N."""
        raise NotImplementedError

    def nilpotency(self, a):
        """Least k with m^k a = 0 (m the maximal ideal of the point), None if none."""
        raise NotImplementedError

    def hull_report(self):
        raise NotImplementedError

    def encode(self, a):
        return repr(a)

    def describe(self) -> str:
        return type(self).__name__

    def sub(self, a, b):
        return self.add(a, self.scale(-1, b))

    # presentation interface used by homology
    def presentation(self, N: int):
        """(generators, relation orders) with the window = sum R g_i / (r_i); r_i None for free."""
        raise NotImplementedError(f"{self.describe()} has no window presentation")

    def coordinates(self, a, N: int) -> list:
        raise NotImplementedError


def as_frac(pid: PIDDesc, c):
    """Coerce an int, ring element or fraction into Frac(R)."""
    if pid.is_integers:
        from sympy import QQ

        return QQ.convert(c)
    return pid.frac_dom.field(c)


def _is_fraction(pid: PIDDesc, c) -> bool:
    if pid.is_integers:
        return not isinstance(c, int)
    return hasattr(c, "numer")


def _canon(pid: PIDDesc, q, prime):
    """The pi-principal part of q, as a canonical fraction."""
    return pid.pp_value({(prime, k): d for k, d in pid.principal_part(q, prime).items()})


def _pole_order(pid: PIDDesc, q, prime) -> int:
    pp = pid.principal_part(q, prime)
    return max(pp, default=0)


class FracVector(PointModule):
    """Frac(R)^rank at the generic point of Spec R; windows use the materialized primes."""

    def __init__(self, pid: PIDDesc, rank: int, primes: Sequence = (), label: str = ""):
        self.pid = pid
        self.rank = rank
        self.primes = list(primes)
        self.label = label

    def zero(self):
        return tuple(self.pid.frac(self.pid.zero) for _ in range(self.rank))

    def add(self, a, b):
        return tuple(x + y for x, y in zip(a, b))

    def scale(self, c, a):
        c = as_frac(self.pid, c)
        return tuple(c * x for x in a)

    def is_zero(self, a) -> bool:
        return not any(a)

    def unit(self, i: int, q):
        return tuple(q if j == i else self.pid.frac(self.pid.zero) for j in range(self.rank))

    def _denominator(self, N: int):
        D = self.pid.one
        for p in self.primes:
            D *= p ** N
        return D

    def window(self, N: int) -> list:
        pid = self.pid
        out = []
        for i in range(self.rank):
            out.append(self.unit(i, pid.frac(pid.one)))
            for p in self.primes:
                digits = [pid.one] if pid.is_integers else [pid.gen ** e for e in range(pid.residue_dim(p))]
                for k in range(1, N + 1):
                    for d in digits:
                        out.append(self.unit(i, pid.frac(d, p ** k)))
            if not pid.is_integers:
                for a in range(1, N):
                    out.append(self.unit(i, pid.frac(pid.gen ** a)))
        return out

    def nilpotency(self, a):
        return 0 if self.is_zero(a) else 1

    def hull_report(self):
        from .zerodim import HullReport

        if self.rank == 1:
            return HullReport(True, "the residue field itself")
        return HullReport(False, f"rank {self.rank} over the residue field")

    def encode(self, a):
        return [self.pid.encode_frac(x) for x in a]

    def describe(self) -> str:
        F = "Q" if self.pid.is_integers else f"{self.pid.field.name()}({self.pid.variable})"
        return F if self.rank == 1 else f"{F}^{self.rank}"

    def presentation(self, N: int):
        D = self._denominator(N)
        return [self.unit(i, self.pid.frac(self.pid.one, D)) for i in range(self.rank)], [None] * self.rank

    def coordinates(self, a, N: int) -> list:
        D = self._denominator(N)
        out = []
        for x in a:
            n, d = self.pid.num_den(x * D)
            if not self.pid.is_unit(d):
                raise WindowTooSmall(f"{x} has poles outside the window")
            out.append(self.pid.divmod(n, d)[0] if not self.pid.is_integers else n // d)
        return out


class LocalLayer(PointModule):
    """H^1_(pi) at a closed point: rank copies of R_pi/R plus pi-primary cyclic torsion.

    Elements are (free part, torsion part): canonical principal parts at pi
    for the first, residues modulo pi^e for the second.
    """

    def __init__(self, pid: PIDDesc, prime, rank: int = 1, torsion: Sequence[int] = (), label: str = ""):
        self.pid = pid
        self.prime = prime
        self.rank = rank
        self.torsion = tuple(int(e) for e in torsion)
        self.label = label

    def zero(self):
        z = self.pid.frac(self.pid.zero)
        return (tuple(z for _ in range(self.rank)), tuple(self.pid.zero for _ in self.torsion))

    def canon(self, q):
        return _canon(self.pid, q, self.prime)

    def add(self, a, b):
        free = tuple(self.canon(x + y) for x, y in zip(a[0], b[0]))
        tors = tuple(self.pid.mod(x + y, self.prime ** e) for x, y, e in zip(a[1], b[1], self.torsion))
        return free, tors

    def scale(self, c, a):
        pid = self.pid
        cf = as_frac(pid, c)
        cr = None
        if self.torsion:
            n, d = pid.num_den(cf)
            if not pid.mod(d, self.prime):
                raise ModelMismatch("scalar is not in the local ring")
            cr = n * pid.inverse_mod(d, self.prime ** max(self.torsion))
        free = tuple(self.canon(cf * x) for x in a[0])
        tors = tuple(pid.mod(cr * x, self.prime ** e) for x, e in zip(a[1], self.torsion)) if self.torsion else ()
        return free, tors

    def act(self, r, a):
        """Multiplication by a ring element r of R."""
        return self.scale(r, a)

    def is_zero(self, a) -> bool:
        return not any(a[0]) and not any(a[1])

    def free_unit(self, i: int, q):
        z = self.zero()
        free = list(z[0])
        free[i] = self.canon(q)
        return tuple(free), z[1]

    def torsion_unit(self, j: int, r):
        z = self.zero()
        tors = list(z[1])
        tors[j] = self.pid.mod(r, self.prime ** self.torsion[j])
        return z[0], tuple(tors)

    def window(self, N: int) -> list:
        pid, p = self.pid, self.prime
        digits = [pid.one] if pid.is_integers else [pid.gen ** e for e in range(pid.residue_dim(p))]
        out = []
        for i in range(self.rank):
            for k in range(1, N + 1):
                for d in digits:
                    out.append(self.free_unit(i, pid.frac(d, p ** k)))
        for j, e in enumerate(self.torsion):
            for k in range(e):
                for d in digits:
                    out.append(self.torsion_unit(j, d * p ** k))
        return out

    def nilpotency(self, a):
        pid, p = self.pid, self.prime
        k = max((_pole_order(pid, x, p) for x in a[0]), default=0)
        for x, e in zip(a[1], self.torsion):
            j = 0
            while pid.mod(x * p ** j, p ** e):
                j += 1
            k = max(k, j)
        return k

    def torsion_module(self) -> TorsionModule:
        return TorsionModule(self.pid, self.prime, self.torsion, self.rank)

    def hull_report(self):
        return is_injective_hull(self.torsion_module())

    def encode(self, a):
        return {"free": [self.pid.encode_frac(x) for x in a[0]],
                "torsion": [self.pid.encode(x) for x in a[1]]}

    def describe(self) -> str:
        parts = []
        base = "Q/Z" if self.pid.is_integers else f"{self.pid.field.name()}({self.pid.variable})/R"
        if self.rank:
            parts.append(f"{base}_({self.prime})" + (f"^{self.rank}" if self.rank > 1 else ""))
        for e in self.torsion:
            parts.append(f"R/({self.prime})^{e}")
        return " + ".join(parts) or "0"

    def presentation(self, N: int):
        pid, p = self.pid, self.prime
        gens = [self.free_unit(i, pid.frac(pid.one, p ** N)) for i in range(self.rank)]
        rels = [p ** N] * self.rank
        for j, e in enumerate(self.torsion):
            gens.append(self.torsion_unit(j, pid.one))
            rels.append(p ** e)
        return gens, rels

    def coordinates(self, a, N: int) -> list:
        pid, p = self.pid, self.prime
        out = []
        for x in a[0]:
            n, d = pid.num_den(x * p ** N)
            if not pid.is_unit(d):
                raise WindowTooSmall(f"pole order of {x} exceeds the window {N}")
            out.append(pid.divmod(n, d)[0] if not pid.is_integers else n // d)
        out += list(a[1])
        return out


# complexes


class CousinComplex:
    """Point modules plus one coboundary per immediate specialization.

    ``labels`` optionally records, per point, the codimension of its image in
    a base (the fiber-codimension labeling used by the F/G filtrations).
    """

    def __init__(self, poset: SpecPoset, delta: CodimFn, modules: dict, coboundaries: dict,
                 meta: dict | None = None, labels: dict | None = None):
        self.poset = poset
        self.delta = delta.check(poset)
        self.modules = modules
        self.coboundaries = coboundaries
        self.meta = dict(meta or {})
        self.labels = labels
        for x in poset.order:
            if x not in modules:
                raise ModelMismatch(f"no module at {x}")

    def d(self, x: str, y: str, a):
        fn = self.coboundaries.get((x, y))
        if fn is None:
            return self.modules[y].zero()
        return fn(a)

    def degrees(self) -> list:
        return sorted({self.delta[x] for x in self.poset.order})

    def points_in_degree(self, n: int) -> list:
        return [x for x in self.poset.order if self.delta[x] == n]

    def restrict(self, subset: Iterable[str]) -> "CousinComplex":
        s = [x for x in self.poset.order if x in set(subset)]
        P = self.poset.restrict(s)
        return CousinComplex(P, self.delta.restrict(s), {x: self.modules[x] for x in s},
                             {c: f for c, f in self.coboundaries.items() if c[0] in s and c[1] in s},
                             self.meta, None if self.labels is None else {x: self.labels[x] for x in s})

    def shift(self, n: int) -> "CousinComplex":
        """C[n]: codimension Delta - n and coboundaries times (-1)^n."""
        sgn = -1 if n % 2 else 1
        cob = {c: _scaled(self.modules[c[1]], sgn, f) for c, f in self.coboundaries.items()}
        labels = None if self.labels is None else {x: v - n for x, v in self.labels.items()}
        return CousinComplex(self.poset, self.delta.shift(n), self.modules, cob,
                             dict(self.meta, shift=self.meta.get("shift", 0) + n), labels)

    def to_json(self, N: int = 2) -> dict:
        return {
            "schema": "v1",
            "kind": "cousin-complex",
            "meta": {k: v for k, v in self.meta.items() if isinstance(v, (int, str, list, dict))},
            "poset": self.poset.to_json(),
            "delta": {x: self.delta[x] for x in self.poset.order},
            "terms": {x: self.modules[x].describe() for x in self.poset.order},
            "coboundaries": [
                {"from": x, "to": y,
                 "samples": [[self.modules[x].encode(a), self.modules[y].encode(self.d(x, y, a))]
                             for a in self.modules[x].window(1)[:4]]}
                for x, y in self.poset.covers
            ],
        }


def _scaled(M: PointModule, c, fn):
    return lambda a: M.scale(c, fn(a))


# checks


@dataclass
class Report:
    ok: bool
    violations: list = field(default_factory=list)
    scope: dict = field(default_factory=dict)

    def __bool__(self):
        return self.ok

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": [repr(v) for v in self.violations[:10]], "scope": self.scope}


def check_cousin(C: CousinComplex, N: int = 2) -> Report:
    """Square-zero along every length-two specialization and zero-dimensional terms."""
    bad = []
    for x, z in C.poset.length_two():
        Mx, Mz = C.modules[x], C.modules[z]
        mids = C.poset.intermediate(x, z)
        for a in Mx.window(N):
            total = Mz.zero()
            for y in mids:
                total = Mz.add(total, C.d(y, z, C.d(x, y, a)))
            if not Mz.is_zero(total):
                bad.append(("square-zero", x, z, Mx.encode(a), Mz.encode(total)))
                break
    for x in C.poset.order:
        M = C.modules[x]
        for a in M.window(N):
            if M.nilpotency(a) is None:
                bad.append(("not zero-dimensional", x, M.encode(a)))
                break
    return Report(not bad, bad, {"window": N})


def is_residual(C: CousinComplex, N: int = 2) -> Report:
    rep = check_cousin(C, N)
    bad = list(rep.violations)
    for x in C.poset.order:
        h = C.modules[x].hull_report()
        if not h:
            bad.append(("not an injective hull", x, h.reason))
    return Report(not bad, bad, rep.scope)


def is_CM(C: CousinComplex, N: int = 2) -> Report:
    """Local cohomology of the complex at every point sits in degree Delta(x) only.

    Terms at strict generizations contribute nothing because some element of
    m_x acts invertibly on them; the term at x itself is m_x-torsion. Both are
    checked on the window, and the surviving degree is compared with Delta.
    """
    bad = []
    for x in C.poset.order:
        pt = C.poset.points[x]
        for g in C.poset.generizations(x):
            M = C.modules[g]
            t = _parameter(C, pt, C.poset.points[g])
            if t is None:
                continue
            if not _acts_invertibly(M, t, N):
                bad.append(("local cohomology at a generization", x, g))
        M = C.modules[x]
        if any(M.nilpotency(a) is None for a in M.window(N)):
            bad.append(("term is not torsion", x))
    return Report(not bad, bad, {"window": N})


def _parameter(C, pt: Point, gen: Point):
    """An element of m_x outside the prime of a generization, when the point is a prime of R."""
    if pt.kind == "prime" and gen.kind == "generic":
        return pt.prime
    return getattr(C.modules[gen.name], "parameter_for", lambda p: None)(pt)


def _acts_invertibly(M: PointModule, t, N: int) -> bool:
    if isinstance(M, FracVector):
        return bool(t)
    act = getattr(M, "act", None)
    if act is None:
        return True
    # injective on a window and every window element is hit from the next window
    return all(not M.is_zero(act(t, a)) for a in M.window(N) if not M.is_zero(a))


# the Cousin functor over a PID


@dataclass(frozen=True)
class ModulePresentation:
    """A finitely generated module over a PID: R^rank plus cyclic torsion R/(d)."""

    pid: PIDDesc
    rank: int
    invariants: tuple = ()

    @staticmethod
    def from_rows(pid: PIDDesc, ngens: int, rows: Sequence[Sequence]) -> "ModulePresentation":
        """R^ngens modulo the row span of ``rows`` (each row is one relation)."""
        rows = [[pid(x) if not isinstance(x, str) else pid.decode(x) for x in r] for r in rows]
        if any(len(r) != ngens for r in rows):
            raise ParseError("relation rows must have one entry per generator")
        diag = smith_diagonal(pid, rows) if rows else []
        inv = tuple(d for d in diag if not pid.is_unit(d))
        return ModulePresentation(pid, ngens - len(diag), inv)

    def primary(self) -> dict:
        """{prime: [exponents]} of the torsion part."""
        out = {}
        for d in self.invariants:
            for p, e in self.pid.factor(d):
                out.setdefault(p, []).append(e)
        return out

    def to_json(self) -> dict:
        return {"schema": "v1", "kind": "pid-module", "pid": self.pid.to_json(), "rank": self.rank,
                "invariants": [self.pid.encode(d) for d in self.invariants]}

    @staticmethod
    def from_json(d: dict) -> "ModulePresentation":
        pid = PIDDesc.from_json(d["pid"])
        if "rows" in d:
            return ModulePresentation.from_rows(pid, int(d["ngens"]), d["rows"])
        return ModulePresentation(pid, int(d.get("rank", 0)), tuple(pid.decode(str(x)) for x in d.get("invariants", ())))


def prime_name(pid: PIDDesc, p) -> str:
    return f"({pid.encode(p)})"


def cousin_E_pid(pid: PIDDesc, M: ModulePresentation | int, bound: PrimeBound | int = 7) -> CousinComplex:
    """E(M) over Spec R with Delta = height.

    The free part gives Frac(R)^rank at the generic point and Pruefer layers
    at the materialized primes; the pi-primary torsion sits at (pi) in degree
    1. Primes dividing the torsion are always materialized.
    """
    if isinstance(M, int):
        M = ModulePresentation(pid, M)
    primes = list(pid.primes(bound))
    prim = M.primary()
    for p in prim:
        if all(p != q for q in primes):
            primes.append(p)
    primes.sort(key=pid.prime_key)
    gen = Point("η", "generic")
    pts = [gen] + [Point(prime_name(pid, p), "prime", prime=p) for p in primes]
    covers = [("η", pt.name) for pt in pts[1:]]
    P = SpecPoset(pts, covers)
    delta = CodimFn({"η": 0, **{pt.name: 1 for pt in pts[1:]}})
    eta = FracVector(pid, M.rank, primes)
    modules = {"η": eta}
    cob = {}
    for pt in pts[1:]:
        L = LocalLayer(pid, pt.prime, M.rank, prim.get(pt.prime, ()))
        modules[pt.name] = L
        cob[("η", pt.name)] = _class_map(L)
    meta = {"regime": "pid", "pid": pid.name(), "bound": _bound_json(bound), "rank": M.rank}
    return CousinComplex(P, delta, modules, cob, meta)


def _class_map(L: LocalLayer):
    def fn(a):
        return tuple(L.canon(x) for x in a), L.zero()[1]

    return fn


def _bound_json(bound):
    return bound.to_json() if isinstance(bound, PrimeBound) else {"height": int(bound), "degree": 1}


# homology on a window


@dataclass
class HomologyGroup:
    free: int
    torsion: list
    generators: list  # kernel representatives, encoded, per point
    elements: list = field(default_factory=list)  # the same representatives, raw

    def is_zero(self) -> bool:
        return self.free == 0 and not self.torsion


def homology(C: CousinComplex, N: int = 2) -> dict:
    """Cohomology of the window of C in every degree, over the base PID.

    Each term is presented as sum R g_i / (r_i); coboundaries become R-matrices
    and H^n = Z^n / (B^n + relations) is read off a Smith form. Two-term
    complexes (free generic part, primary layers) are localized prime by
    prime, which keeps every Smith form small.
    """
    fast = _two_term_shape(C)
    if fast is not None:
        return _homology_two_term(C, N, *fast)
    return _homology_general(C, N)


def _two_term_shape(C: CousinComplex):
    degs = C.degrees()
    if len(degs) != 2 or degs[1] != degs[0] + 1:
        return None
    top = C.points_in_degree(degs[1])
    if any(getattr(C.modules[y], "prime", None) is None for y in top):
        return None
    return degs[0], degs[1]


def _homology_two_term(C: CousinComplex, N: int, a: int, b: int) -> dict:
    pid = _common_pid(C)
    gens, index = [], []
    for x in C.points_in_degree(a):
        g, r = C.modules[x].presentation(N)
        if any(v is not None for v in r):
            return _homology_general(C, N)
        gens += g
        index += [x] * len(g)
    g = len(gens)
    by_prime = {}
    for y in C.points_in_degree(b):
        by_prime.setdefault(pid.encode(C.modules[y].prime), []).append(y)
    lattice = [[pid.one if i == j else pid.zero for i in range(g)] for j in range(g)]
    torsion = []
    for ys in by_prime.values():
        rows_a, rels = [], []
        for y in ys:
            M = C.modules[y]
            yg, yr = M.presentation(N)
            cols = []
            for gen, x in zip(gens, index):
                img = C.d(x, y, gen) if y in C.poset.up(x) else M.zero()
                cols.append(M.coordinates(img, N))
            rows_a += [[c[i] for c in cols] for i in range(len(yg))]
            rels += yr
        n = len(rels)
        if not n:
            continue
        block = [row + [r if i == k else pid.zero for k, r in enumerate(rels)] for i, row in enumerate(rows_a)]
        torsion += [pid.encode(d) for d in smith_diagonal(pid, block) if not pid.is_unit(d)]
        if g:
            ker = SmithForm(pid, [row[:g] + [-v for v in row[g:]] for row in block]).kernel()
            local = [v[:g] for v in ker if any(v[:g])]
            lattice = _intersect(pid, lattice, local, g)
    reps = []
    for vec in lattice:
        vec = _normalize_vector(pid, vec)
        rep = {}
        for coeff, gen, x in zip(vec, gens, index):
            if coeff:
                M = C.modules[x]
                rep[x] = M.add(rep.get(x, M.zero()), M.scale(coeff, gen))
        reps.append(rep)
    enc = [{x: C.modules[x].encode(v) for x, v in rep.items()} for rep in reps]
    return {a: HomologyGroup(len(lattice), [], enc, reps), b: HomologyGroup(0, torsion, [])}


def _normalize_vector(pid: PIDDesc, vec: list) -> list:
    lead = next((v for v in vec if v), None)
    if lead is None:
        return vec
    u, _ = pid.normalize(lead)
    if pid.is_integers:
        return [u * v for v in vec]
    inv = pid.ring(pid.field.one / u.LC)
    return [inv * v for v in vec]


def _intersect(pid: PIDDesc, L1: list, L2: list, g: int) -> list:
    """Basis of the intersection of two full sublattices of R^g given by generators."""
    B2 = SmithForm(pid, [[v[i] for v in L2] for i in range(g)]).image_basis() if L2 else []
    if not L1 or not B2:
        return []
    rows = [[v[i] for v in L1] + [-w[i] for w in B2] for i in range(g)]
    ker = SmithForm(pid, rows).kernel()
    k1 = len(L1)
    gens = []
    for u in ker:
        vec = [sum((u[j] * L1[j][i] for j in range(k1)), pid.zero) for i in range(g)]
        if any(vec):
            gens.append(vec)
    if not gens:
        return []
    return SmithForm(pid, [[v[i] for v in gens] for i in range(g)]).image_basis()


def _homology_general(C: CousinComplex, N: int) -> dict:
    pid = _common_pid(C)
    terms = {}
    for n in C.degrees():
        gens, rels, index = [], [], []
        for x in C.points_in_degree(n):
            g, r = C.modules[x].presentation(N)
            gens += g
            rels += r
            index += [(x, i) for i in range(len(g))]
        terms[n] = (gens, rels, index)
    degs = C.degrees()
    mats = {}
    for n in degs:
        if n + 1 not in terms:
            continue
        gens, _, index = terms[n]
        _, _, index2 = terms[n + 1]
        pos2 = {}
        for k, (y, i) in enumerate(index2):
            pos2.setdefault(y, []).append(k)
        cols = []
        for gen, (x, _) in zip(gens, index):
            col = [pid.zero] * len(index2)
            for y in C.poset.up(x):
                if y not in pos2:
                    continue
                img = C.d(x, y, gen)
                coords = C.modules[y].coordinates(img, N)
                for k, c in zip(pos2[y], coords):
                    col[k] = col[k] + c
            cols.append(col)
        mats[n] = cols
    out = {}
    for n in degs:
        gens, rels, index = terms[n]
        g = len(gens)
        # Z^n: x with d x in the relations of the next term
        if n in mats and terms[n + 1][0]:
            nxt_rels = terms[n + 1][1]
            m = len(terms[n + 1][0])
            rows = []
            for i in range(m):
                row = [mats[n][j][i] for j in range(g)]
                row += [(-nxt_rels[k] if k == i else pid.zero) if nxt_rels[k] is not None else pid.zero
                        for k in range(m)]
                rows.append(row)
            ker = SmithForm(pid, rows).kernel() if rows else []
            zgens = [v[:g] for v in ker]
        else:
            zgens = [[pid.one if i == j else pid.zero for i in range(g)] for j in range(g)]
        if not g:
            out[n] = HomologyGroup(0, [], [])
            continue
        zgens = [z for z in zgens if any(z)]
        if not zgens:
            out[n] = HomologyGroup(0, [], [])
            continue
        Zs = SmithForm(pid, [[z[i] for z in zgens] for i in range(g)])
        zb = Zs.image_basis()
        if not zb:
            out[n] = HomologyGroup(0, [], [])
            continue
        Zmat = SmithForm(pid, [[b[i] for b in zb] for i in range(g)])
        bcols = []
        if n - 1 in mats:
            bcols += mats[n - 1]
        for k, r in enumerate(rels):
            if r is not None:
                bcols.append([r if i == k else pid.zero for i in range(g)])
        X = []
        for col in bcols:
            sol = Zmat.solve(col)
            if sol is None:
                raise ModelMismatch("boundary is not a cycle; coboundaries do not square to zero")
            X.append(sol)
        k = len(zb)
        if X:
            diag = smith_diagonal(pid, [[x[i] for x in X] for i in range(k)])
        else:
            diag = []
        tors = [pid.encode(d) for d in diag if not pid.is_unit(d)]
        free = k - len(diag)
        reps = []
        for b in zb:
            rep = {}
            for coeff, gen, (x, _) in zip(b, gens, index):
                if coeff:
                    M = C.modules[x]
                    rep[x] = M.add(rep.get(x, M.zero()), M.scale(coeff, gen))
            reps.append(rep)
        enc = [{x: C.modules[x].encode(v) for x, v in rep.items()} for rep in reps]
        out[n] = HomologyGroup(free, tors, enc, reps)
    return out


def _common_pid(C: CousinComplex) -> PIDDesc:
    pids = {id(M.pid): M.pid for M in C.modules.values() if M.pid is not None}
    if not pids:
        raise ModelMismatch("no base ring for homology")
    pid = next(iter(pids.values()))
    if any(p != pid for p in pids.values()):
        raise ModelMismatch("terms live over different rings")
    return pid


def homology_json(H: dict) -> dict:
    return {str(n): {"free": h.free, "torsion": h.torsion, "generators": h.generators} for n, h in H.items()}


# local cohomology of a single module at a point (is_CM for plain modules)


def module_local_cohomology(M: ModulePresentation, point: str, prime=None) -> dict:
    """{i: description} of H^i at the generic point or at (prime), from the Koszul complex on prime.

    H^0 is the prime-power torsion, H^1 is M_pi / M (nonzero exactly when the
    rank is positive). At the generic point only H^0 = M (x) Frac(R) survives.
    """
    if point == "generic":
        return {0: M.rank} if M.rank else {}
    out = {}
    tors = M.primary().get(prime, [])
    if tors:
        out[0] = tors
    if M.rank:
        out[1] = M.rank
    return out


def module_is_CM(M: ModulePresentation, degree: int, bound: PrimeBound | int = 7) -> Report:
    """Is M placed in degree ``degree`` CM for Delta = height (generic 0, closed 1)?"""
    bad = []
    pts = [("generic", None, 0)]
    primes = list(M.pid.primes(bound))
    for p in M.primary():
        if all(p != q for q in primes):
            primes.append(p)
    pts += [(prime_name(M.pid, p), p, 1) for p in primes]
    for name, p, d in pts:
        H = module_local_cohomology(M, "generic" if p is None else "closed", p)
        for i in H:
            if i + degree != d:
                bad.append((name, i + degree, d))
    return Report(not bad, bad, {"bound": _bound_json(bound)})


# filtrations


def filter_F(C: CousinComplex, p: int) -> CousinComplex:
    """Subcomplex on the points whose label is at least p."""
    if C.labels is None:
        raise ModelMismatch("complex carries no fiber-codimension labeling")
    return C.restrict([x for x in C.poset.order if C.labels[x] >= p])


def filter_G(C: CousinComplex, p: int) -> CousinComplex:
    """Quotient complex on the points whose label is at most p."""
    if C.labels is None:
        raise ModelMismatch("complex carries no fiber-codimension labeling")
    return C.restrict([x for x in C.poset.order if C.labels[x] <= p])


def same_complex(A: CousinComplex, B: CousinComplex, N: int = 2, iso: dict | None = None) -> Report:
    """Exact equality of points, codimensions and coboundaries on the window.

    ``iso`` optionally maps point names of A to callables A(x) -> B(x).
    """
    bad = []
    if A.poset.order != B.poset.order and set(A.poset.order) != set(B.poset.order):
        return Report(False, [("points differ", A.poset.order, B.poset.order)])
    if set(A.poset.covers) != set(B.poset.covers):
        return Report(False, [("covers differ",)])
    for x in A.poset.order:
        if A.delta[x] != B.delta[x]:
            bad.append(("codimension", x))
    ident = lambda a: a  # noqa: E731
    for x, y in A.poset.covers:
        fx = (iso or {}).get(x, ident)
        fy = (iso or {}).get(y, ident)
        for a in A.modules[x].window(N):
            lhs = fy(A.d(x, y, a))
            rhs = B.d(x, y, fx(a))
            if not B.modules[y].is_zero(B.modules[y].sub(lhs, rhs)):
                bad.append(("coboundary", x, y, A.modules[x].encode(a)))
                break
    return Report(not bad, bad, {"window": N})


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, no trailing spaces."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=1) + "\n"
