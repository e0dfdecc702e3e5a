"""Zero-dimensional modules over effective complete local rings.

Two models are provided. The matrix model (:class:`ZModule`) is a finite
dimensional K-vector space with commuting nilpotent actions of the series
variables. The PID model (:class:`TorsionModule`) describes pi-power torsion
modules over Z or K[y] as cyclic plus Pruefer summands.

Every module exposes the small protocol of :class:`ModuleBase`: elements are
sparse dicts ``{key: coefficient}`` and ``act_key`` gives the action of a
ring variable on a basis key. Infinite modules (fraction modules, see
``genfrac``) are explored through finite windows ``window_basis(N)``.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from sympy.polys.matrices import DomainMatrix

from .errors import ModelMismatch, ParseError, UnsupportedRing
from .exact import linalg
from .exact.fields import FieldDesc
from .exact.pid import PIDDesc

# sparse element helpers


def vclean(x: dict) -> dict:
    return {k: c for k, c in x.items() if c}


def vadd(x: dict, y: dict) -> dict:
    out = dict(x)
    for k, c in y.items():
        if k in out:
            s = out[k] + c
            if s:
                out[k] = s
            else:
                del out[k]
        elif c:
            out[k] = c
    return out


def vscale(c, x: dict) -> dict:
    if not c:
        return {}
    return {k: c * v for k, v in x.items() if v}


def vsub(x: dict, y: dict) -> dict:
    return vadd(x, vscale(-1, y))


def vsum(items: Iterable[dict]) -> dict:
    out = {}
    for it in items:
        out = vadd(out, it)
    return out


def monomial_divides(a: Sequence[int], b: Sequence[int]) -> bool:
    return all(x <= y for x, y in zip(a, b))


# rings


@dataclass(frozen=True)
class LocalRingDesc:
    """K[[T_1..T_r]]/(monomial relations), K the residue field.

    ``relations`` holds exponent tuples aligned with ``variables``.
    ``provenance`` optionally records (base ring, map) for rings produced by
    the punctual functor; it does not take part in equality.
    """

    field: FieldDesc
    variables: tuple = ()
    relations: frozenset = frozenset()
    provenance: object = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        rels = frozenset(tuple(r) for r in self.relations)
        for r in rels:
            if len(r) != len(self.variables) or min(r, default=0) < 0 or sum(r) == 0:
                raise ValueError(f"bad relation monomial {r}")
        # keep only minimal generators
        minimal = frozenset(r for r in rels if not any(s != r and monomial_divides(s, r) for s in rels))
        object.__setattr__(self, "relations", minimal)
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate series variables")
        if set(self.variables) & set(self.field.variables):
            raise ValueError("series variables clash with residue-field variables")

    @property
    def r(self) -> int:
        return len(self.variables)

    @property
    def trdeg(self) -> int:
        return self.field.trdeg

    def index(self, v: str) -> int:
        return self.variables.index(v)

    def monomial(self, **exps) -> tuple:
        return tuple(exps.get(v, 0) for v in self.variables)

    def nilpotency_order(self, v: str) -> int | None:
        """Least k with v^k a relation, None when v is free."""
        i = self.index(v)
        best = None
        for rel in self.relations:
            if all(e == 0 for j, e in enumerate(rel) if j != i):
                best = rel[i] if best is None else min(best, rel[i])
        return best

    def free_variables(self) -> tuple:
        return tuple(v for v in self.variables if self.nilpotency_order(v) is None)

    def is_artinian(self) -> bool:
        return not self.free_variables()

    def is_regular(self) -> bool:
        return not self.relations

    def in_ideal(self, mono: Sequence[int]) -> bool:
        return any(monomial_divides(r, mono) for r in self.relations)

    def standard_monomials(self) -> list:
        """K-basis of an artinian ring, in graded order."""
        if not self.is_artinian():
            raise UnsupportedRing("ring is not artinian")
        bounds = [self.nilpotency_order(v) for v in self.variables]
        out = [m for m in itertools.product(*[range(b) for b in bounds]) if not self.in_ideal(m)]
        return sorted(out, key=lambda m: (sum(m), tuple(-x for x in m)))

    def length(self) -> int:
        return len(self.standard_monomials())

    def with_relations(self, extra: Iterable[Sequence[int]]) -> "LocalRingDesc":
        return LocalRingDesc(self.field, self.variables, self.relations | frozenset(tuple(e) for e in extra))

    def name(self) -> str:
        s = self.field.name()
        if self.variables:
            s += "[[" + ",".join(self.variables) + "]]"
        if self.relations:
            s += "/(" + ",".join(_mono_str(self.variables, r) for r in sorted(self.relations)) + ")"
        return s

    def to_json(self) -> dict:
        return {
            "field": self.field.to_json(),
            "variables": list(self.variables),
            "relations": sorted(list(r) for r in self.relations),
        }

    @staticmethod
    def from_json(d: dict) -> "LocalRingDesc":
        try:
            return LocalRingDesc(FieldDesc.from_json(d["field"]), tuple(d.get("variables", ())),
                                 frozenset(tuple(r) for r in d.get("relations", ())))
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"bad local ring {d!r}") from exc

    @staticmethod
    def parse(text: str) -> "LocalRingDesc":
        """Parse ``Q[[T,U]]/(T^2,T*U)``, ``Q(X)[[T]]`` or ``F5``."""
        s = text.replace(" ", "")
        m = re.fullmatch(r"([^\[/]+)(?:\[\[([^\]]*)\]\])?(?:/\((.*)\))?", s)
        if not m:
            raise ParseError(f"cannot parse local ring {text!r}")
        fld = FieldDesc.parse(m.group(1))
        vars_ = tuple(v for v in (m.group(2) or "").split(",") if v)
        rels = []
        for mono in (m.group(3) or "").split(","):
            if mono:
                rels.append(_parse_mono(mono, vars_))
        return LocalRingDesc(fld, vars_, frozenset(rels))


def _mono_str(variables, exps) -> str:
    parts = [v if e == 1 else f"{v}^{e}" for v, e in zip(variables, exps) if e]
    return "*".join(parts) or "1"


def _parse_mono(text: str, variables) -> tuple:
    exps = [0] * len(variables)
    for factor in text.split("*"):
        name, _, pw = factor.partition("^")
        if name not in variables:
            raise ParseError(f"unknown variable {name!r} in monomial {text!r}")
        exps[variables.index(name)] += int(pw) if pw else 1
    return tuple(exps)


# module protocol


class ModuleBase:
    """Common protocol. Subclasses set ``ring`` and ``field`` and implement
    ``act_key`` and ``window_basis``."""

    ring: LocalRingDesc
    field: FieldDesc
    finite: bool = True

    def act_key(self, var: str, key) -> dict:
        raise NotImplementedError

    def act(self, var: str, x: dict) -> dict:
        """Action of a ring variable; ``act_key`` images carry coefficients in self.field."""
        out = {}
        for k, c in x.items():
            for kk, v in self.act_key(var, k).items():
                s = out.get(kk)
                s = c * v if s is None else s + c * v
                if s:
                    out[kk] = s
                else:
                    out.pop(kk, None)
        return out

    def act_monomial(self, exps: Sequence[int], x: dict) -> dict:
        for v, e in zip(self.ring.variables, exps):
            for _ in range(e):
                if not x:
                    return x
                x = self.act(v, x)
        return x

    def window_basis(self, N: int) -> list:
        raise NotImplementedError

    def kills(self, mono: Sequence[int], x: dict) -> bool:
        return not self.act_monomial(mono, x)

    def is_element(self, x: dict) -> bool:
        return True

    def window_module(self, N: int) -> "ZModule":
        """The finite window as a matrix-model module, with its basis elements."""
        basis = self.window_basis(N)
        return ZModule.from_elements(self, basis)


# matrix model


class ZModule(ModuleBase):
    """Finite-length module: commuting nilpotent action matrices over K.

    Keys are the integers ``0..dim-1``; ``labels`` are display names.
    """

    finite = True

    def __init__(self, ring: LocalRingDesc, actions: dict, labels: Sequence | None = None,
                 dim: int | None = None, check: bool = True, elements: list | None = None,
                 parent: ModuleBase | None = None):
        self.ring = ring
        self.field = ring.field
        if dim is None:
            if actions:
                first = next(iter(actions.values()))
                dim = first.shape[0] if isinstance(first, DomainMatrix) else len(first)
            else:
                dim = len(labels or [])
        self.dim = dim
        self.actions = {}
        for v in ring.variables:
            A = actions.get(v)
            if A is None:
                A = linalg.zeros(self.field, dim, dim)
            else:
                A = linalg.as_matrix(self.field, A)
            if A.shape != (dim, dim):
                raise ModelMismatch(f"action of {v} has shape {A.shape}, expected {(dim, dim)}")
            self.actions[v] = A
        extra = set(actions) - set(ring.variables)
        if extra:
            raise ModelMismatch(f"actions for unknown variables {sorted(extra)}")
        self.labels = list(labels) if labels is not None else [f"e{i}" for i in range(dim)]
        self.elements = elements
        self.parent = parent
        self._cols = {}
        if check:
            problems = self.validate()
            if problems:
                raise ModelMismatch("; ".join(problems))

    # construction

    @staticmethod
    def from_elements(parent: ModuleBase, basis: list) -> "ZModule":
        """Matrix model of a finite submodule of ``parent`` spanned by ``basis``."""
        keys = sorted({k for b in basis for k in b}, key=repr)
        index = {k: i for i, k in enumerate(keys)}
        fld = parent.field

        def vec(x):
            v = [fld.zero] * len(keys)
            for k, c in x.items():
                if k not in index:
                    raise ModelMismatch("window is not closed under the action")
                v[index[k]] = c
            return v

        cols = [vec(b) for b in basis]
        actions = {}
        for var in parent.ring.variables:
            imgs = []
            for b in basis:
                coords = linalg.coordinates(fld, cols, vec(parent.act(var, b)))
                if coords is None:
                    raise ModelMismatch("window is not closed under the action")
                imgs.append(coords)
            actions[var] = linalg.from_columns(fld, imgs, len(basis))
        return ZModule(parent.ring, actions, [repr(b) for b in basis], dim=len(basis), check=False,
                       elements=basis, parent=parent)

    @staticmethod
    def cyclic(ring: LocalRingDesc, ideal: Iterable[Sequence[int]]) -> "ZModule":
        """R/J for a monomial ideal J containing the ring relations; must be artinian."""
        quot = ring.with_relations(ideal)
        mons = quot.standard_monomials()
        index = {m: i for i, m in enumerate(mons)}
        fld = ring.field
        actions = {}
        for j, v in enumerate(ring.variables):
            rows = [[fld.zero] * len(mons) for _ in mons]
            for m, i in index.items():
                up = tuple(e + (1 if t == j else 0) for t, e in enumerate(m))
                if up in index:
                    rows[index[up]][i] = fld.one
            actions[v] = rows
        labels = [_mono_str(ring.variables, m) for m in mons]
        return ZModule(ring, actions, labels, dim=len(mons))

    @staticmethod
    def trivial(ring: LocalRingDesc, dim: int = 1) -> "ZModule":
        return ZModule(ring, {}, dim=dim)

    def direct_sum(self, other: "ZModule") -> "ZModule":
        if other.ring != self.ring:
            raise ModelMismatch("direct sum over different rings")
        fld = self.field
        n, m = self.dim, other.dim
        actions = {}
        for v in self.ring.variables:
            A, B = self.actions[v].to_list(), other.actions[v].to_list()
            rows = [list(A[i]) + [fld.zero] * m for i in range(n)]
            rows += [[fld.zero] * n + list(B[i]) for i in range(m)]
            actions[v] = rows
        return ZModule(self.ring, actions, self.labels + other.labels, dim=n + m)

    def conjugate(self, P: DomainMatrix) -> "ZModule":
        """The module with actions P A P^{-1} (same isomorphism class)."""
        Pi = linalg.inverse(self.field, P)
        actions = {v: P * A * Pi for v, A in self.actions.items()}
        return ZModule(self.ring, actions, dim=self.dim)

    def base_change(self, field_: FieldDesc, ring: LocalRingDesc | None = None) -> "ZModule":
        """Scalar extension along a subfield inclusion K -> field_."""
        ring = ring or LocalRingDesc(field_, self.ring.variables, self.ring.relations)
        actions = {v: A.convert_to(field_.dom) for v, A in self.actions.items()}
        return ZModule(ring, actions, self.labels, dim=self.dim, check=False)

    # protocol

    def act_key(self, var, key):
        col = self._cols.get((var, key))
        if col is None:
            A = self.actions[var]
            col = {i: A.rep.getitem(i, key) for i in range(self.dim) if A.rep.getitem(i, key)}
            self._cols[(var, key)] = col
        return col

    def window_basis(self, N: int) -> list:
        return [{i: self.field.one} for i in range(self.dim)]

    def vector(self, x: dict) -> list:
        v = [self.field.zero] * self.dim
        for k, c in x.items():
            v[k] = c
        return v

    def element(self, v: Sequence) -> dict:
        return {i: c for i, c in enumerate(v) if c}

    # invariants

    def monomial_matrix(self, exps: Sequence[int]) -> DomainMatrix:
        M = linalg.eye(self.field, self.dim)
        for v, e in zip(self.ring.variables, exps):
            for _ in range(e):
                M = self.actions[v] * M
        return M

    def validate(self) -> list:
        problems = []
        vs = self.ring.variables
        for a, b in itertools.combinations(vs, 2):
            A, B = self.actions[a], self.actions[b]
            if A * B != B * A:
                problems.append(f"actions of {a} and {b} do not commute")
        for v in vs:
            P = self.actions[v]
            for _ in range(max(self.dim, 1)):
                P = P * self.actions[v] if self.dim else P
            if self.dim and not P.is_zero_matrix:
                problems.append(f"action of {v} is not nilpotent")
        for rel in self.ring.relations:
            if self.dim and not self.monomial_matrix(rel).is_zero_matrix:
                problems.append(f"relation {_mono_str(vs, rel)} does not act as zero")
        return problems

    @property
    def length(self) -> int:
        return self.dim

    def stacked_actions(self) -> DomainMatrix:
        fld = self.field
        rows = []
        for v in self.ring.variables:
            rows.extend(self.actions[v].to_list())
        if not rows:
            return linalg.zeros(fld, 0, self.dim)
        return linalg.as_matrix(fld, rows)

    def socle(self) -> "Socle":
        basis = linalg.nullspace(self.field, self.stacked_actions()) if self.ring.variables else \
            [[self.field.one if i == j else self.field.zero for i in range(self.dim)] for j in range(self.dim)]
        incl = linalg.from_columns(self.field, basis, self.dim)
        return Socle(basis, len(basis), incl)

    def annihilator_basis(self, monomials: Iterable[Sequence[int]]) -> list:
        rows = []
        for m in monomials:
            rows.extend(self.monomial_matrix(m).to_list())
        if not rows:
            return [[self.field.one if i == j else self.field.zero for i in range(self.dim)]
                    for j in range(self.dim)]
        return linalg.nullspace(self.field, rows)

    def submodule(self, basis: list) -> "ZModule":
        """Matrix model of the submodule spanned by the given vectors (checked invariant)."""
        fld = self.field
        actions = {}
        for v, A in self.actions.items():
            imgs = []
            for b in basis:
                coords = linalg.coordinates(fld, basis, linalg.matvec(A, b))
                if coords is None:
                    raise ModelMismatch("span is not a submodule")
                imgs.append(coords)
            actions[v] = linalg.from_columns(fld, imgs, len(basis))
        return ZModule(self.ring, actions, dim=len(basis), check=False)

    def quotient(self, basis: list) -> "ZModule":
        """Matrix model of M / span(basis) using a complement of coordinate vectors."""
        fld = self.field
        n = self.dim
        sub = linalg.row_basis(fld, basis, n)
        comp = []
        span = list(sub)
        for i in range(n):
            e = [fld.one if j == i else fld.zero for j in range(n)]
            if not linalg.span_contains(fld, span, e):
                comp.append(e)
                span.append(e)
        full = comp + sub
        actions = {}
        for v, A in self.actions.items():
            imgs = []
            for c in comp:
                coords = linalg.coordinates(fld, full, linalg.matvec(A, c))
                imgs.append(coords[: len(comp)])
            actions[v] = linalg.from_columns(fld, imgs, len(comp))
        return ZModule(self.ring, actions, dim=len(comp), check=False)

    def invariants(self) -> tuple:
        """Cheap isomorphism invariants: ranks of all monomials of small degree."""
        vs = self.ring.variables
        out = [self.dim]
        for deg in range(1, min(self.dim, 4) + 1):
            for mono in _monomials(len(vs), deg):
                out.append(linalg.rank(self.field, self.monomial_matrix(mono)) if self.dim else 0)
        return tuple(out)

    def to_json(self) -> dict:
        return {
            "schema": "v1",
            "kind": "zmodule",
            "ring": self.ring.to_json(),
            "dim": self.dim,
            "labels": list(self.labels),
            "actions": {v: [[self.field.encode(x) for x in row] for row in A.to_list()]
                        for v, A in self.actions.items()},
        }

    @staticmethod
    def from_json(d: dict) -> "ZModule":
        try:
            ring = LocalRingDesc.from_json(d["ring"])
            acts = {v: [[ring.field.decode(x) for x in row] for row in rows]
                    for v, rows in d.get("actions", {}).items()}
            return ZModule(ring, acts, d.get("labels"), dim=int(d["dim"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad zmodule JSON: {exc}") from exc

    def __repr__(self):
        return f"ZModule({self.ring.name()}, dim={self.dim})"


def _monomials(n: int, deg: int):
    for c in itertools.combinations_with_replacement(range(n), deg):
        e = [0] * n
        for i in c:
            e[i] += 1
        yield tuple(e)


@dataclass(frozen=True)
class Socle:
    basis: list
    dim: int
    inclusion: DomainMatrix


def socle(M: ZModule) -> Socle:
    return M.socle()


# maps


@dataclass
class ZMap:
    """A K-linear map between matrix-model modules, checked to be R-linear."""

    source: ZModule
    target: ZModule
    matrix: DomainMatrix

    def __post_init__(self):
        self.matrix = linalg.as_matrix(self.source.field, self.matrix)
        if self.matrix.shape != (self.target.dim, self.source.dim):
            raise ModelMismatch("map matrix has the wrong shape")

    def is_linear(self) -> bool:
        for v in self.source.ring.variables:
            if self.matrix * self.source.actions[v] != self.target.actions[v] * self.matrix:
                return False
        return True

    def is_iso(self) -> bool:
        return linalg.is_invertible(self.source.field, self.matrix) and self.is_linear()

    def compose(self, other: "ZMap") -> "ZMap":
        """self after other."""
        return ZMap(other.source, self.target, self.matrix * other.matrix)

    def apply(self, v: Sequence) -> list:
        return linalg.matvec(self.matrix, v)

    @staticmethod
    def identity(M: ZModule) -> "ZMap":
        return ZMap(M, M, linalg.eye(M.field, M.dim))


def hom_space(M: ZModule, N: ZModule) -> list:
    """Basis of Hom_R(M, N) as a list of matrices (dim N x dim M)."""
    if M.ring.variables != N.ring.variables:
        raise ModelMismatch("modules over different rings")
    fld = M.field
    m, n = M.dim, N.dim
    rows = []
    # unknown X[i][j] at position i*m + j; equations X A - B X = 0
    for v in M.ring.variables:
        A = M.actions[v].to_list()
        B = N.actions[v].to_list()
        for i in range(n):
            for j in range(m):
                row = [fld.zero] * (n * m)
                for k in range(m):
                    if A[k][j]:
                        row[i * m + k] += A[k][j]
                for k in range(n):
                    if B[i][k]:
                        row[k * m + j] -= B[i][k]
                rows.append(row)
    if not rows:
        ker = [[fld.one if t == s else fld.zero for t in range(n * m)] for s in range(n * m)]
    else:
        ker = linalg.nullspace(fld, rows)
    return [DomainMatrix([k[i * m:(i + 1) * m] for i in range(n)], (n, m), fld.dom) for k in ker]


def find_isomorphism(M: ZModule, N: ZModule, rng: random.Random | None = None, tries: int = 30):
    """An R-isomorphism M -> N as a ZMap, or None.

    Hom_R(M, N) is computed exactly; an invertible element is then searched
    among seeded random combinations (a nonzero determinant is a polynomial
    condition, so random points find one with high probability when it exists).
    """
    if M.dim != N.dim or M.ring.variables != N.ring.variables:
        return None
    if M.dim == 0:
        return ZMap(M, N, linalg.zeros(M.field, 0, 0))
    if M.invariants() != N.invariants():
        return None
    basis = hom_space(M, N)
    if not basis:
        return None
    rng = rng or random.Random(0)
    fld = M.field
    for attempt in range(tries):
        X = None
        for B in basis:
            c = fld(rng.randint(-10 * (attempt + 1), 10 * (attempt + 1)))
            X = B * c if X is None else X + B * c
        if linalg.is_invertible(fld, X):
            return ZMap(M, N, X)
    return None


def is_isomorphic(M: ZModule, N: ZModule, rng=None) -> bool:
    return find_isomorphism(M, N, rng) is not None


# PID model


@dataclass(frozen=True)
class TorsionModule:
    """A pi-power torsion module over a PID: cyclic summands plus Pruefer summands.

    Elements are tuples with one entry per summand: a residue modulo pi^k for a
    cyclic summand, a principal-part dict ``{order: digit}`` for a Pruefer one.
    """

    pid: PIDDesc
    prime: object
    cyclic: tuple = ()
    prufer: int = 0

    def __post_init__(self):
        orders = tuple(sorted((int(k) for k in self.cyclic if int(k) > 0), reverse=True))
        object.__setattr__(self, "cyclic", orders)
        if self.prufer < 0:
            raise ValueError("negative Pruefer count")
        if not self.pid.is_prime(self.prime):
            raise ValueError(f"{self.prime} is not prime in {self.pid.name()}")

    @property
    def finite(self) -> bool:
        return self.prufer == 0

    @property
    def length(self):
        """Length as an R-module (None when a Pruefer summand is present)."""
        return sum(self.cyclic) if self.finite else None

    def socle_dim(self) -> int:
        """Dimension of ann(pi) over the residue field R/(pi)."""
        return len(self.cyclic) + self.prufer

    def annihilator(self, j: int) -> "TorsionModule":
        """ann(pi^j) as a (finite) torsion module."""
        orders = [min(k, j) for k in self.cyclic] + [j] * self.prufer
        return TorsionModule(self.pid, self.prime, tuple(orders), 0)

    def direct_sum(self, other: "TorsionModule") -> "TorsionModule":
        if other.pid != self.pid or other.prime != self.prime:
            raise ModelMismatch("direct sum of torsion modules at different primes")
        return TorsionModule(self.pid, self.prime, self.cyclic + other.cyclic, self.prufer + other.prufer)

    def is_hull(self) -> bool:
        return self.prufer == 1 and not self.cyclic

    def to_json(self) -> dict:
        return {
            "schema": "v1",
            "kind": "torsion",
            "pid": self.pid.to_json(),
            "prime": self.pid.encode(self.prime),
            "cyclic": list(self.cyclic),
            "prufer": self.prufer,
        }

    @staticmethod
    def from_json(d: dict) -> "TorsionModule":
        pid = PIDDesc.from_json(d["pid"])
        return TorsionModule(pid, pid.decode(str(d["prime"])), tuple(d.get("cyclic", ())), int(d.get("prufer", 0)))


@dataclass(frozen=True)
class HullReport:
    is_hull: bool
    reason: str
    witness: object = None

    def __bool__(self):
        return self.is_hull


def is_injective_hull(M) -> HullReport:
    """Decide whether M is an injective hull of the residue field.

    Supported: torsion modules at a PID point (exactly one Pruefer summand,
    no cyclic part), finite modules over artinian monomial rings (simple socle
    and length equal to the ring's), and fraction modules built from a hull
    (the registered model of a smooth extension, possibly cut down by an
    annihilator of monomials).
    """
    if isinstance(M, TorsionModule):
        if M.is_hull():
            return HullReport(True, "one divisible summand", witness=("prufer", M.prime))
        if M.cyclic:
            return HullReport(False, f"cyclic summands {list(M.cyclic)} are not divisible")
        return HullReport(False, f"{M.prufer} divisible summands, expected 1")
    if isinstance(M, ZModule):
        ring = M.ring
        if not ring.is_artinian():
            if ring.relations:
                raise UnsupportedRing(f"no hull model registered for {ring.name()}")
            return HullReport(False, "finite length module over a ring of positive dimension")
        soc = M.socle()
        if soc.dim != 1:
            return HullReport(False, f"socle has dimension {soc.dim}")
        if M.dim != ring.length():
            return HullReport(False, f"length {M.dim} differs from ring length {ring.length()}")
        return HullReport(True, "simple socle and length(M) = length(R)", witness=soc.basis[0])
    hull = getattr(M, "hull_report", None)
    if hull is not None:
        return hull()
    raise UnsupportedRing(f"no hull test for {type(M).__name__}")


# Matlis duality


def matlis_dual(M: ZModule) -> ZModule:
    """K-linear dual with transposed actions (finite length input)."""
    if not isinstance(M, ZModule):
        raise ModelMismatch("matlis_dual needs a finite-length matrix-model module")
    actions = {v: A.transpose() for v, A in M.actions.items()}
    return ZModule(M.ring, actions, [f"{l}*" for l in M.labels], dim=M.dim, check=False)


def _hull_window(ring: LocalRingDesc, N: int) -> ZModule:
    """The part of the hull of K over K[[T]] killed by all T_i^N, as matrices.

    Basis: symbols [1/T^a] with 1 <= a_i <= N; T_i lowers a_i, and a_i = 0 is zero.
    """
    r = ring.r
    idx = list(itertools.product(range(1, N + 1), repeat=r))
    pos = {a: i for i, a in enumerate(idx)}
    fld = ring.field
    actions = {}
    for j, v in enumerate(ring.variables):
        rows = [[fld.zero] * len(idx) for _ in idx]
        for a, i in pos.items():
            b = tuple(x - 1 if t == j else x for t, x in enumerate(a))
            if b[j] >= 1:
                rows[pos[b]][i] = fld.one
        actions[v] = rows
    free = LocalRingDesc(fld, ring.variables)
    return ZModule(free, actions, [f"[1/{_mono_str(ring.variables, a)}]" for a in idx], dim=len(idx))


class HomDual:
    """Hom_R(M, E) for finite M, with E the hull of K over the regular ring K[[T]].

    Any R-linear map lands in the finite window of E killed by T^N where N is
    the nilpotency index of M, so the computation is exact.
    """

    def __init__(self, M: ZModule):
        self.M = M
        N = max(M.dim, 1)
        self.E = _hull_window(M.ring, N)
        free_M = ZModule(self.E.ring, M.actions, dim=M.dim, check=False)
        self.maps = hom_space(free_M, self.E)
        fld = M.field
        # R acts on Hom(M, E) by (r.phi)(m) = phi(r m)
        actions = {}
        flat = [self._flat(X) for X in self.maps]
        for v in M.ring.variables:
            imgs = []
            for X in self.maps:
                Y = X * M.actions[v]
                coords = linalg.coordinates(fld, flat, self._flat(Y))
                if coords is None:
                    raise ModelMismatch("Hom space is not closed under the action")
                imgs.append(coords)
            actions[v] = linalg.from_columns(fld, imgs, len(self.maps))
        self.module = ZModule(M.ring, actions, dim=len(self.maps), check=False)

    @staticmethod
    def _flat(X: DomainMatrix) -> list:
        return [x for row in X.to_list() for x in row]

    def evaluate(self, phi_coords: Sequence, m: Sequence) -> list:
        X = None
        for c, B in zip(phi_coords, self.maps):
            if c:
                X = B * c if X is None else X + B * c
        if X is None:
            return [self.M.field.zero] * self.E.dim
        return linalg.matvec(X, m)


def double_dual_evaluation(M: ZModule) -> tuple:
    """(ev matrix, D(M) length, DD(M) length, is_iso) for ev: M -> Hom(Hom(M,E),E).

    ev(m) is the functional phi -> phi(m); it is expressed in the computed
    basis of the double dual and tested for bijectivity and R-linearity.
    """
    D = HomDual(M)
    DD = HomDual(D.module)
    fld = M.field
    flat_dd = [DD._flat(X) for X in DD.maps]
    cols = []
    for i in range(M.dim):
        m = [fld.one if j == i else fld.zero for j in range(M.dim)]
        # matrix of the functional phi -> phi(m) from D(M) to E
        f_cols = []
        for k in range(D.module.dim):
            coords = [fld.one if t == k else fld.zero for t in range(D.module.dim)]
            f_cols.append(D.evaluate(coords, m))
        F = linalg.from_columns(fld, f_cols, D.E.dim)
        coords = linalg.coordinates(fld, flat_dd, DD._flat(F))
        if coords is None:
            return None, D.module.dim, DD.module.dim, False
        cols.append(coords)
    ev = linalg.from_columns(fld, cols, DD.module.dim)
    iso = ZMap(M, DD.module, ev).is_iso() if DD.module.dim == M.dim else False
    return ev, D.module.dim, DD.module.dim, iso


# random generation


def random_zmodule(ring: LocalRingDesc, rng: random.Random, max_length: int = 4,
                   conjugate: bool = True) -> ZModule:
    """A random finite-length module: a sum of monomial cyclic modules, randomly conjugated."""
    total = None
    budget = max_length
    while budget > 0:
        ideal = list(ring.relations)
        for v in ring.variables:
            e = [0] * ring.r
            e[ring.index(v)] = rng.randint(1, 3)
            ideal.append(tuple(e))
        if ring.r >= 2 and rng.random() < 0.5:
            e = [0] * ring.r
            for j in rng.sample(range(ring.r), 2):
                e[j] = 1
            ideal.append(tuple(e))
        C = ZModule.cyclic(ring, ideal)
        if C.dim > budget:
            C = ZModule.cyclic(ring, [tuple(1 if t == i else 0 for t in range(ring.r)) for i in range(ring.r)])
        budget -= C.dim
        total = C if total is None else total.direct_sum(C)
        if rng.random() < 0.4:
            break
    if conjugate and total.dim:
        fld = ring.field
        while True:
            P = linalg.as_matrix(fld, [[fld(rng.randint(-2, 2)) for _ in range(total.dim)]
                                       for _ in range(total.dim)])
            if linalg.is_invertible(fld, P):
                break
        total = total.conjugate(P)
    return total
