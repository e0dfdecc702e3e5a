"""Variance of Cousin complexes: f-flat, f-sharp for A^1-maps, localization.

Fiber terms of A^1 over a base point are stored as finite sums of base
basis vectors with coefficients in K(T) (the generic point of the fiber) or
in the principal parts at a monic irreducible rho(T) (a closed point of the
fiber). Base terms are read through K-coordinates, so the construction can
be iterated.

Sign conventions for f# with d = 1, at a point x over y with q = Delta(y):

* fiber coboundary (generic -> rho): the principal part at rho, sign +1;
* lateral coboundary between fiber-generic points: -d_M on the base part;
* lateral coboundary between closed points: +d_M.

These are the fraction-wise coboundaries (-1)^d d_M of the explicit Cousin
complex E_h twisted pointwise by theta(x) = (-1)^{(p+d)q+p}, p = 1 at
fiber-generic points and 0 at closed ones. With this normalization the
residue along a section is the plain res map (no sign); on the untwisted
complex it is (-1)^q res.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

from .cousin import (CodimFn, CousinComplex, FracVector, LocalLayer, Point, PointModule, Report,
                     SpecPoset, _canon, _parameter, _pole_order, as_frac, filter_F, filter_G,
                     homology, same_complex)
from .errors import HypothesisFailure, ModelMismatch, UnsupportedRing
from .exact import linalg
from .exact.fields import FieldDesc
from .exact.pid import PIDDesc, PrimeBound
from .zerodim import HullReport, LocalRingDesc, ZModule, _monomials, vadd, vscale


# K-coordinates on point modules


def _poly_terms(a) -> dict:
    return {m[0]: c for m, c in a.items()} if a else {}


@lru_cache(maxsize=65536)
def _pf_coords(pid: PIDDesc, q) -> dict:
    poly, parts = pid.partial_fractions(q)
    out = {("poly", e): c for e, c in _poly_terms(poly).items()}
    for (p, k), d in parts.items():
        for e, c in _poly_terms(d).items():
            out[("pp", pid.encode(p), k, e)] = c
    return out


@lru_cache(maxsize=65536)
def _pp_coords(pid: PIDDesc, q, prime) -> dict:
    enc = pid.encode(prime)
    out = {}
    for k, d in pid.principal_part(q, prime).items():
        for e, c in _poly_terms(d).items():
            out[("pp", enc, k, e)] = c
    return out


@lru_cache(maxsize=65536)
def _pf_element(pid: PIDDesc, key):
    if key[0] == "poly":
        return pid.frac(pid.gen ** key[1])
    _, p, k, e = key
    return pid.frac(pid.gen ** e, pid.decode(p) ** k)


def _pp_keys(pid: PIDDesc, prime, N: int) -> list:
    enc = pid.encode(prime)
    return [("pp", enc, k, e) for k in range(1, N + 1) for e in range(pid.residue_dim(prime))]


def _fraction_keys(pid: PIDDesc, primes: Sequence, N: int) -> list:
    keys = [("poly", 0)]
    for p in primes:
        keys += _pp_keys(pid, p, N)
    keys += [("poly", a) for a in range(1, N)]
    return keys


def _need_field(pid: PIDDesc):
    if pid.is_integers:
        raise UnsupportedRing("A^1 over Z mixes characteristics; only K[y] bases are modeled")


def kbasis(M: PointModule, N: int) -> list:
    """[(key, element)] spanning the window N of M over the residue field K."""
    if hasattr(M, "kbasis"):
        return M.kbasis(N)
    if isinstance(M, FracVector):
        _need_field(M.pid)
        keys = _fraction_keys(M.pid, M.primes, N)
        return [((i, k), M.unit(i, _pf_element(M.pid, k))) for i in range(M.rank) for k in keys]
    if isinstance(M, LocalLayer):
        _need_field(M.pid)
        pid, p = M.pid, M.prime
        out = [((i, k), M.free_unit(i, _pf_element(pid, k))) for i in range(M.rank) for k in _pp_keys(pid, p, N)]
        for j, e in enumerate(M.torsion):
            for k in range(e):
                for f in range(pid.residue_dim(p)):
                    out.append((("t", j, k, f), M.torsion_unit(j, pid.gen ** f * p ** k)))
        return out
    raise UnsupportedRing(f"no K-coordinates for {M.describe()}")


def kcoords(M: PointModule, a) -> dict:
    if hasattr(M, "kcoords"):
        return M.kcoords(a)
    if isinstance(M, FracVector):
        _need_field(M.pid)
        return {(i, k): c for i, x in enumerate(a) for k, c in _pf_coords(M.pid, x).items()}
    if isinstance(M, LocalLayer):
        _need_field(M.pid)
        pid, p = M.pid, M.prime
        out = {(i, k): c for i, x in enumerate(a[0]) for k, c in _pp_coords(pid, x, p).items()}
        for j, (r, e) in enumerate(zip(a[1], M.torsion)):
            for k, d in enumerate(pid.padic_digits(r, p, e)):
                for f, c in _poly_terms(d).items():
                    out[("t", j, k, f)] = c
        return out
    raise UnsupportedRing(f"no K-coordinates for {M.describe()}")


def kelement(M: PointModule, key):
    if hasattr(M, "kelement"):
        return M.kelement(key)
    if isinstance(M, FracVector):
        return M.unit(key[0], _pf_element(M.pid, key[1]))
    if isinstance(M, LocalLayer):
        if key[0] == "t":
            _, j, k, f = key
            return M.torsion_unit(j, M.pid.gen ** f * M.prime ** k)
        return M.free_unit(key[0], _pf_element(M.pid, key[1]))
    raise UnsupportedRing(f"no K-coordinates for {M.describe()}")


def _act(M: PointModule, r, a):
    act = getattr(M, "act", None)
    return act(r, a) if act is not None else M.scale(r, a)


def _field_of(M: PointModule) -> FieldDesc:
    if isinstance(M, (FiberTerm, VectorTerm, PolyTerm)):
        return M.field
    if isinstance(M, AnnSubmodule):
        return _field_of(M.parent)
    pid = getattr(M, "pid", None)
    if pid is None:
        raise UnsupportedRing(f"cannot find the residue field of {M.describe()}")
    _need_field(pid)
    return pid.field


def _key_str(key) -> str:
    if isinstance(key, tuple):
        return "(" + ",".join(_key_str(k) for k in key) + ")"
    return str(key)


# point modules


class VectorTerm(PointModule):
    """A finite-length module over an artinian local ring, as the term of a one-point complex."""

    def __init__(self, M: ZModule, label: str = ""):
        self.M = M
        self.field = M.field
        self.label = label

    def zero(self):
        return {}

    def add(self, a, b):
        return vadd(a, b)

    def scale(self, c, a):
        return vscale(self.field(c) if isinstance(c, int) else c, a)

    def act(self, r, a):
        if isinstance(r, str):
            return self.M.act(r, a)
        return self.scale(r, a)

    def is_zero(self, a) -> bool:
        return not a

    def window(self, N: int) -> list:
        return self.M.window_basis(N)

    def kbasis(self, N: int) -> list:
        return [(i, {i: self.field.one}) for i in range(self.M.dim)]

    def kcoords(self, a) -> dict:
        return dict(a)

    def kelement(self, key):
        return {key: self.field.one}

    def nilpotency(self, a):
        if not a:
            return 0
        n = len(self.M.ring.variables)
        for k in range(1, self.M.dim + 1):
            if all(not self.M.act_monomial(m, a) for m in _monomials(n, k)):
                return k
        return None

    def hull_report(self):
        from .zerodim import is_injective_hull

        return is_injective_hull(self.M)

    def encode(self, a):
        return {str(k): str(c) for k, c in sorted(a.items())}

    def describe(self) -> str:
        return f"{self.M.field.name()}^{self.M.dim}" if not self.M.ring.variables else repr(self.M)


class FiberTerm(PointModule):
    """The f#-term at a point of A^1 over the base point ``base_point``.

    ``rho`` is None at the generic point of the fiber (coefficients in K(T))
    and a monic irreducible of K[T] at a closed point (coefficients are
    principal parts at rho). Elements are {base key: coefficient}.
    """

    def __init__(self, base: PointModule, T: PIDDesc, rho=None, primes: Sequence = (),
                 base_point: str = "", label: str = ""):
        self.base = base
        self.T = T
        self.pid = T
        self.field = T.field
        self.rho = rho
        self.prime = rho
        self.primes = list(primes)
        self.base_point = base_point
        self.label = label

    def _clean(self, q):
        return _canon(self.T, q, self.rho) if self.rho is not None else q

    def zero(self):
        return {}

    def add(self, a, b):
        out = dict(a)
        for k, v in b.items():
            s = self._clean(out[k] + v) if k in out else v
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return out

    def scale(self, c, a):
        if isinstance(c, tuple):
            return self.act(c, a)
        c = as_frac(self.T, c)
        out = {}
        for k, v in a.items():
            s = self._clean(c * v)
            if s:
                out[k] = s
        return out

    def act(self, r, a):
        """Multiplication by r in K[T], or by ("base", s) with s acting on the base."""
        if isinstance(r, tuple) and r and r[0] == "base":
            out = {}
            for k, v in a.items():
                img = _act(self.base, r[1], kelement(self.base, k))
                for k2, c in kcoords(self.base, img).items():
                    out = self.add(out, {k2: v * c})
            return out
        return self.scale(r, a)

    def is_zero(self, a) -> bool:
        return not a

    def _tkeys(self, N: int) -> list:
        if self.rho is None:
            return _fraction_keys(self.T, self.primes, N)
        return _pp_keys(self.T, self.rho, N)

    def kbasis(self, N: int) -> list:
        return [((bk, tk), {bk: _pf_element(self.T, tk)}) for bk, _ in kbasis(self.base, N) for tk in self._tkeys(N)]

    def kcoords(self, a) -> dict:
        out = {}
        for bk, v in a.items():
            cs = _pf_coords(self.T, v) if self.rho is None else _pp_coords(self.T, v, self.rho)  # cached, read only
            for tk, c in cs.items():
                out[(bk, tk)] = c
        return out

    def kelement(self, key):
        return {key[0]: _pf_element(self.T, key[1])}

    def window(self, N: int) -> list:
        return [e for _, e in self.kbasis(N)]

    def nilpotency(self, a):
        k = 0
        for bk, v in a.items():
            nb = self.base.nilpotency(kelement(self.base, bk))
            if nb is None:
                return None
            if self.rho is not None:
                nb += _pole_order(self.T, v, self.rho) - 1
            k = max(k, nb)
        return k

    def hull_report(self):
        h = self.base.hull_report()
        where = "K(T)" if self.rho is None else f"the layer at {self.T.encode(self.rho)}"
        return HullReport(bool(h), f"{h.reason}; tensored with {where}")

    def encode(self, a):
        return {_key_str(k): self.T.encode_frac(v) for k, v in sorted(a.items(), key=lambda kv: _key_str(kv[0]))}

    def describe(self) -> str:
        F = f"{self.field.name()}({self.T.variable})"
        if self.rho is None:
            return f"{self.base.describe()} (x) {F}"
        return f"{self.base.describe()} (x) {F}/{self.field.name()}[{self.T.variable}]_({self.T.encode(self.rho)})"

    def parameter_for(self, pt: Point):
        """An element of m_pt outside the prime of this point (pt a strict specialization)."""
        if pt.base == self.base_point:
            return pt.prime
        if pt.fiber is not None:
            return ("base", pt.fiber)
        return None

    # homology over K[T]: one free generator per base key of the window
    def presentation(self, N: int):
        keys = [k for k, _ in kbasis(self.base, N)]
        if self.rho is None:
            D = self.T.one
            for p in self.primes:
                D *= p ** N
            return [{k: self.T.frac(self.T.one, D)} for k in keys], [None] * len(keys)
        return [{k: self.T.frac(self.T.one, self.rho ** N)} for k in keys], [self.rho ** N] * len(keys)

    def coordinates(self, a, N: int) -> list:
        from .errors import WindowTooSmall

        keys = [k for k, _ in kbasis(self.base, N)]
        if set(a) - set(keys):
            raise WindowTooSmall("base part outside the window")
        if self.rho is None:
            D = self.T.one
            for p in self.primes:
                D *= p ** N
        else:
            D = self.rho ** N
        out = []
        for k in keys:
            v = a.get(k)
            if v is None:
                out.append(self.T.zero)
                continue
            n, d = self.T.num_den(v * D)
            if not self.T.is_unit(d):
                raise WindowTooSmall(f"{v} has poles outside the window")
            out.append(self.T.divmod(n, d)[0])
        return out


class PolyTerm(PointModule):
    """The quasi-coherent module M (x) K[T] dT, the source of eta_f."""

    def __init__(self, base: PointModule, T: PIDDesc):
        self.base = base
        self.T = T
        self.pid = T
        self.field = T.field
        self._inner = FiberTerm(base, T)

    def zero(self):
        return {}

    def add(self, a, b):
        return self._inner.add(a, b)

    def scale(self, c, a):
        return self._inner.scale(c, a)

    def is_zero(self, a) -> bool:
        return not a

    def window(self, N: int) -> list:
        return [{bk: self.T.frac(self.T.gen ** e)} for bk, _ in kbasis(self.base, N) for e in range(N)]

    def nilpotency(self, a):
        return None if a else 0

    def hull_report(self):
        return HullReport(False, "not zero-dimensional")

    def encode(self, a):
        return self._inner.encode(a)

    def describe(self) -> str:
        return f"{self.base.describe()} (x) {self.field.name()}[{self.T.variable}] d{self.T.variable}"

    def presentation(self, N: int):
        keys = [k for k, _ in kbasis(self.base, N)]
        return [{k: self.T.frac(self.T.one)} for k in keys], [None] * len(keys)

    def coordinates(self, a, N: int) -> list:
        from .errors import WindowTooSmall

        out = []
        for k, _ in kbasis(self.base, N):
            v = a.get(k)
            if v is None:
                out.append(self.T.zero)
                continue
            n, d = self.T.num_den(v)
            if not self.T.is_unit(d):
                raise WindowTooSmall("coefficient is not a polynomial")
            out.append(self.T.divmod(n, d)[0])
        return out


class AnnSubmodule(PointModule):
    """ann_M(I) for generators ``gens`` acting through ``M.act``.

    Every window basis used here consists of monomial vectors, each either
    killed by I or not, so the window of the annihilator is the sub-list of
    killed basis vectors.
    """

    def __init__(self, parent: PointModule, gens: Sequence):
        self.parent = parent
        self.gens = tuple(gens)
        self.pid = getattr(parent, "pid", None)
        self.prime = getattr(parent, "prime", None)

    def killed(self, a) -> bool:
        return all(self.parent.is_zero(_act(self.parent, g, a)) for g in self.gens)

    def zero(self):
        return self.parent.zero()

    def add(self, a, b):
        return self.parent.add(a, b)

    def scale(self, c, a):
        return self.parent.scale(c, a)

    def act(self, r, a):
        return _act(self.parent, r, a)

    def is_zero(self, a) -> bool:
        return self.parent.is_zero(a)

    def window(self, N: int) -> list:
        return [a for a in self.parent.window(N) if self.killed(a)]

    def kbasis(self, N: int) -> list:
        return [(k, a) for k, a in kbasis(self.parent, N) if self.killed(a)]

    def kcoords(self, a) -> dict:
        return kcoords(self.parent, a)

    def kelement(self, key):
        return kelement(self.parent, key)

    def nilpotency(self, a):
        return self.parent.nilpotency(a)

    def encode(self, a):
        return self.parent.encode(a)

    def describe(self) -> str:
        return f"ann({', '.join(map(_gen_str, self.gens))}) in {self.parent.describe()}"

    def hull_report(self):
        P = self.parent
        h = P.hull_report()
        if h and any(not P.is_zero(a) for a in self.window(1)):
            return HullReport(True, f"Hom(R/I, E) of the hull E: {h.reason}")
        if isinstance(P, LocalLayer):
            j = min((_valuation(P.pid, g, P.prime) for g in self.gens), default=None)
            if j is None:
                return h
            parts = [min(e, j) for e in P.torsion if min(e, j)] + [j] * P.rank
            ok = len(parts) == 1 and parts[0] == j
            return HullReport(ok, f"ann of ({P.pid.encode(P.prime)})^{j} has cyclic parts of lengths {parts}")
        return HullReport(False, f"annihilator inside a term that is not a hull: {h.reason}")


def _valuation(pid: PIDDesc, g, p):
    if not g:
        return None
    v = 0
    while not pid.mod(g, p):
        g = pid.divmod(g, p)[0]
        v += 1
    return v


def _gen_str(g) -> str:
    if isinstance(g, tuple):
        return str(g[1])
    return str(g)


# scheme maps


@dataclass(frozen=True)
class SchemeMapDesc:
    """A map of the effective regime.

    kind: identity, closed-immersion (``ideal`` as (where, text) pairs with
    where in {base, fiber}), smooth-A1 (fiber ``variable``, prime ``bound``
    for the fiber, extra fiber ``points``), localization / completion at
    ``point``, open (``subset``), composite (``parts``, applied first to last
    to the complex, i.e. the rightmost map of the composite first).
    """

    kind: str
    ideal: tuple = ()
    variable: str = "T"
    bound: object = 1
    points: tuple = ()
    point: str | None = None
    subset: tuple = ()
    parts: tuple = ()
    name: str = field(default="", compare=False)

    KINDS = ("identity", "closed-immersion", "smooth-A1", "localization", "completion", "open", "composite")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ModelMismatch(f"unknown map kind {self.kind!r}")
        if isinstance(self.bound, int):
            object.__setattr__(self, "bound", PrimeBound(self.bound, 1))

    @staticmethod
    def identity() -> "SchemeMapDesc":
        return SchemeMapDesc("identity")

    @staticmethod
    def smooth_a1(variable: str = "T", bound=1, points: Sequence[str] = ()) -> "SchemeMapDesc":
        return SchemeMapDesc("smooth-A1", variable=variable, bound=bound, points=tuple(points))

    @staticmethod
    def closed_immersion(*gens: str, fiber: Sequence[str] = ()) -> "SchemeMapDesc":
        ideal = tuple(("base", str(g)) for g in gens) + tuple(("fiber", str(g)) for g in fiber)
        return SchemeMapDesc("closed-immersion", ideal=ideal)

    @staticmethod
    def section(c=0, variable: str = "T") -> "SchemeMapDesc":
        """The section T = c of A^1 over the base."""
        return SchemeMapDesc("closed-immersion", ideal=(("fiber", f"{variable} - ({c})"),), variable=variable)

    @staticmethod
    def localization(point: str) -> "SchemeMapDesc":
        return SchemeMapDesc("localization", point=point)

    @staticmethod
    def completion(point: str) -> "SchemeMapDesc":
        return SchemeMapDesc("completion", point=point)

    @staticmethod
    def open(subset: Sequence[str]) -> "SchemeMapDesc":
        return SchemeMapDesc("open", subset=tuple(subset))

    @staticmethod
    def composite(*parts: "SchemeMapDesc") -> "SchemeMapDesc":
        return SchemeMapDesc("composite", parts=tuple(parts))

    def to_json(self) -> dict:
        out = {"schema": "v1", "kind": self.kind}
        if self.kind == "closed-immersion":
            out["ideal"] = [{"where": w, "generator": g} for w, g in self.ideal]
        if self.kind == "smooth-A1":
            out.update(variable=self.variable, points=list(self.points),
                       bound=self.bound.to_json() if isinstance(self.bound, PrimeBound) else {"height": self.bound, "degree": 1})
        if self.point is not None:
            out["point"] = self.point
        if self.kind == "open":
            out["subset"] = list(self.subset)
        if self.kind == "composite":
            out["parts"] = [p.to_json() for p in self.parts]
        return out

    @staticmethod
    def from_json(d: dict) -> "SchemeMapDesc":
        kind = d["kind"]
        if kind == "closed-immersion":
            ideal = tuple((g.get("where", "base"), str(g["generator"])) for g in d.get("ideal", ()))
            return SchemeMapDesc(kind, ideal=ideal, variable=d.get("variable", "T"))
        if kind == "smooth-A1":
            b = d.get("bound", {"height": 1, "degree": 1})
            return SchemeMapDesc(kind, variable=d.get("variable", "T"),
                                 bound=PrimeBound(int(b.get("height", 1)), int(b.get("degree", 1))),
                                 points=tuple(d.get("points", ())))
        if kind == "composite":
            return SchemeMapDesc(kind, parts=tuple(SchemeMapDesc.from_json(p) for p in d["parts"]))
        return SchemeMapDesc(kind, point=d.get("point"), subset=tuple(d.get("subset", ())))


def apply_map(f: SchemeMapDesc, C: CousinComplex) -> CousinComplex:
    """f-sharp of any supported kind (closed immersions use f-flat)."""
    if f.kind == "identity":
        return C
    if f.kind == "closed-immersion":
        return f_flat(f, C)
    if f.kind == "smooth-A1":
        return f_sharp_smooth(f, C)
    if f.kind == "composite":
        for part in reversed(f.parts):
            C = apply_map(part, C)
        return C
    return kappa_sharp(f, C)


# base complexes


def point_complex(V: ZModule | int = 1, q: int = 0, field_: FieldDesc | None = None,
                  name: str = "pt") -> CousinComplex:
    """A module over a field (or an artinian local ring) placed in degree q on a one-point Spec."""
    if isinstance(V, int):
        V = ZModule.trivial(LocalRingDesc(field_ or FieldDesc.rationals()), V)
    P = SpecPoset([Point(name, "generic")], [])
    return CousinComplex(P, CodimFn({name: q}), {name: VectorTerm(V)}, {}, {"regime": "point"})


def truncate_ge(C: CousinComplex, p: int) -> CousinComplex:
    """The brutal truncation in degrees >= p."""
    return C.restrict([x for x in C.poset.order if C.delta[x] >= p])


def truncate_le(C: CousinComplex, p: int) -> CousinComplex:
    return C.restrict([x for x in C.poset.order if C.delta[x] <= p])


# f# for A^1


def _complex_field(C: CousinComplex) -> FieldDesc:
    if not C.modules:
        return FieldDesc.rationals()
    return _field_of(next(iter(C.modules.values())))


def _variables(M) -> set:
    M = _unwrap(M)
    if isinstance(M, FiberTerm):
        return {M.T.variable} | _variables(M.base)
    if isinstance(M, VectorTerm):
        return set(M.M.ring.variables)
    pid = getattr(M, "pid", None)
    return {pid.variable} if pid is not None and not pid.is_integers else set()


def _fiber_pid(f: SchemeMapDesc, C: CousinComplex) -> PIDDesc:
    K = _complex_field(C)
    taken = set()
    for M in C.modules.values():
        taken |= _variables(M)
    if f.variable in taken:
        raise ModelMismatch(f"fiber variable {f.variable} is already used by the base")
    return PIDDesc.poly(K, f.variable)


def fiber_primes(f: SchemeMapDesc, T: PIDDesc) -> list:
    primes = list(T.primes(f.bound))
    for text in f.points:
        p = T.decode(text)
        if not T.is_prime(p):
            raise ModelMismatch(f"{text} is not a monic irreducible")
        if all(p != q for q in primes):
            primes.append(p)
    return sorted(primes, key=T.prime_key)


def fiber_point_name(y: str, T: PIDDesc, rho=None) -> str:
    return f"{y}|η_{T.variable}" if rho is None else f"{y}|({T.encode(rho)})"


def f_sharp_smooth(f: SchemeMapDesc, C: CousinComplex) -> CousinComplex:
    """f#C for the projection A^1_Y -> Y.

    Points over y: the fiber-generic point (Delta drops by one) and one
    closed point per materialized rho (Delta kept). Coboundaries follow the
    sign conventions of the module docstring.
    """
    if f.kind != "smooth-A1":
        raise ModelMismatch("f_sharp_smooth needs a smooth-A1 map")
    if any(getattr(M, "pid", None) is not None and M.pid.is_integers for M in C.modules.values()):
        return _sharp_over_Z(f, C)
    T = _fiber_pid(f, C)
    primes = fiber_primes(f, T)
    pts, covers, modules, cob, delta, labels = [], [], {}, {}, {}, {}
    for y in C.poset.order:
        base_pt = C.poset.points[y]
        base_prime = base_pt.prime if base_pt.kind != "fiber-closed" else base_pt.prime
        g = fiber_point_name(y, T)
        pts.append(Point(g, "fiber-generic", None, base_prime, y))
        modules[g] = FiberTerm(C.modules[y], T, None, primes, y)
        delta[g] = C.delta[y] - 1
        labels[g] = C.delta[y]
        for rho in primes:
            x = fiber_point_name(y, T, rho)
            pts.append(Point(x, "fiber-closed", rho, base_prime, y))
            L = FiberTerm(C.modules[y], T, rho, primes, y)
            modules[x] = L
            delta[x] = C.delta[y]
            labels[x] = C.delta[y]
            covers.append((g, x))
            cob[(g, x)] = _fiber_class(L)
    for y, y2 in C.poset.covers:
        d = C.coboundaries.get((y, y2))
        if d is None:
            continue
        src, tgt = C.modules[y], C.modules[y2]
        g, g2 = fiber_point_name(y, T), fiber_point_name(y2, T)
        covers.append((g, g2))
        cob[(g, g2)] = _lateral(d, src, modules[g2], -1)
        for rho in primes:
            x, x2 = fiber_point_name(y, T, rho), fiber_point_name(y2, T, rho)
            covers.append((x, x2))
            cob[(x, x2)] = _lateral(d, src, modules[x2], 1)
    meta = {"regime": "A1", "variable": T.variable, "base": dict(C.meta)}
    return CousinComplex(SpecPoset(pts, covers), CodimFn(delta), modules, cob, meta, labels)


def _fiber_class(L: FiberTerm):
    def fn(a):
        return L.add({}, {k: L._clean(v) for k, v in a.items()})

    return fn


def _lateral(d: Callable, src: PointModule, tgt: FiberTerm, sign: int):
    cache = {}

    def image(bk):
        if bk not in cache:
            cache[bk] = kcoords(tgt.base, d(kelement(src, bk)))
        return cache[bk]

    def fn(a):
        out = {}
        for bk, v in a.items():
            for k2, c in image(bk).items():
                out = tgt.add(out, {k2: v * (c * sign)})
        return out

    return fn


def sharp_morphism(f_src: CousinComplex, f_tgt: CousinComplex, phi: dict) -> dict:
    """f#(phi) for a pointwise map phi = {y: M(y) -> N(y)} between the base complexes."""
    out = {}
    for x in f_src.poset.order:
        A, B = f_src.modules[x], f_tgt.modules[x]
        out[x] = _sharp_point(A, B, phi[A.base_point])
    return out


def _sharp_point(A: FiberTerm, B: FiberTerm, fn: Callable):
    cache = {}

    def image(bk):
        if bk not in cache:
            cache[bk] = kcoords(B.base, fn(kelement(A.base, bk)))
        return cache[bk]

    def g(a):
        out = {}
        for bk, v in a.items():
            for k2, c in image(bk).items():
                out = B.add(out, {k2: v * c})
        return out

    return g


def theta(C: CousinComplex, x: str) -> int:
    """theta(x) = (-1)^{(p+d)q+p} for d = 1, p = 1 at fiber-generic points."""
    p = 1 if C.poset.points[x].kind == "fiber-generic" else 0
    q = C.labels[x]
    return -1 if ((p + 1) * q + p) % 2 else 1


def untwisted(S: CousinComplex) -> CousinComplex:
    """The same terms with theta removed: fraction-wise coboundaries of E_h."""
    cob = {}
    for (x, y), fn in S.coboundaries.items():
        s = theta(S, x) * theta(S, y)
        cob[(x, y)] = fn if s == 1 else _neg(S.modules[y], fn)
    return CousinComplex(S.poset, S.delta, S.modules, cob, dict(S.meta, twist="E_h"), S.labels)


def _neg(M, fn):
    return lambda a: M.scale(-1, fn(a))


# f-flat and kappa-sharp


def _resolve_ideal(f: SchemeMapDesc, C: CousinComplex) -> list:
    """[(where, element)] with base elements in the base PID and fiber ones in K[T]."""
    regime = C.meta.get("regime")
    out = []
    for where, text in f.ideal:
        if where == "fiber":
            if regime != "A1":
                raise ModelMismatch("fiber generators need an A^1 complex")
            T = next(_unwrap(M).T for M in C.modules.values())
            out.append(("fiber", _decode_expr(T, text)))
        else:
            pid = _base_pid(C)
            out.append(("base", _decode_expr(pid, text)))
    return out


def _unwrap(M):
    while isinstance(M, AnnSubmodule):
        M = M.parent
    return M


def _base_pid(C: CousinComplex) -> PIDDesc:
    for M in C.modules.values():
        M = _unwrap(M)
        if isinstance(M, FiberTerm):
            B = _unwrap(M.base)
            while isinstance(B, FiberTerm):
                B = _unwrap(B.base)
            if getattr(B, "pid", None) is not None:
                return B.pid
        elif getattr(M, "pid", None) is not None:
            return M.pid
    raise ModelMismatch("complex has no base ring")


def _decode_expr(pid: PIDDesc, text: str):
    import sympy

    if pid.is_integers:
        return int(sympy.sympify(text))
    sym = sympy.Symbol(pid.variable)
    expr = sympy.expand(sympy.sympify(text.replace("^", "**"), locals={pid.variable: sym}))
    poly = sympy.Poly(expr, sym)
    return pid.ring.from_list([pid.field.dom.from_sympy(c) for c in poly.all_coeffs()])


def _contains(pid: PIDDesc, g, prime) -> bool:
    if prime is None:
        return not g
    return not pid.mod(g, prime)


def f_flat(f: SchemeMapDesc, C: CousinComplex) -> CousinComplex:
    """f-flat for a closed immersion: points in V(I), terms ann(I), coboundaries restricted."""
    if f.kind != "closed-immersion":
        raise ModelMismatch("f_flat needs a closed immersion")
    ideal = _resolve_ideal(f, C)
    regime = C.meta.get("regime")
    keep, gens_at = [], {}
    for x in C.poset.order:
        pt = C.poset.points[x]
        acts, inside = [], True
        for where, g in ideal:
            if regime == "A1":
                if where == "fiber":
                    inside &= _contains(C.modules[x].pid, g, pt.prime)
                else:
                    inside &= _contains(_base_pid(C), g, pt.fiber)
                    g = ("base", g) if g else g
            else:
                inside &= _contains(_base_pid(C), g, pt.prime)
            if (g[1] if isinstance(g, tuple) else g):
                acts.append(g)
        if inside:
            keep.append(x)
            gens_at[x] = acts
    R = C.restrict(keep)
    modules = {x: AnnSubmodule(C.modules[x], gens_at[x]) if gens_at[x] else C.modules[x] for x in keep}
    meta = dict(C.meta, flat=[list(p) for p in f.ideal])
    return CousinComplex(R.poset, R.delta, modules, R.coboundaries, meta, R.labels)


def kappa_sharp(k: SchemeMapDesc, C: CousinComplex) -> CousinComplex:
    """Restriction to the preimage: an open subset, or the local scheme at a point.

    For the completion at a point the generic layers keep only the
    materialized primes of that local scheme; its I-supported part is the
    term at the point itself (see :func:`gamma_I`).
    """
    if k.kind == "identity":
        return C
    if k.kind == "open":
        if not C.poset.is_open(k.subset):
            raise ModelMismatch("subset is not closed under generization")
        return C.restrict(k.subset)
    if k.kind not in ("localization", "completion"):
        raise ModelMismatch(f"kappa_sharp does not handle {k.kind}")
    if k.point not in C.poset.points:
        raise ModelMismatch(f"unknown point {k.point}")
    keep = C.poset.generizations(k.point) | {k.point}
    R = C.restrict(keep)
    local_primes = [C.poset.points[x].prime for x in keep if C.poset.points[x].prime is not None]
    modules = {}
    for x, M in R.modules.items():
        if isinstance(M, FracVector):
            M = FracVector(M.pid, M.rank, [p for p in M.primes if any(p == q for q in local_primes)], M.label)
        modules[x] = M
    return CousinComplex(R.poset, R.delta, modules, R.coboundaries, dict(C.meta, local=k.point, kind=k.kind),
                         R.labels)


def gamma_I(C: CousinComplex, point: str) -> CousinComplex:
    """The subcomplex supported on the closure of ``point``."""
    return C.restrict(C.poset.specializations(point) | {point})


# translation


@dataclass
class TranslationIso:
    source: CousinComplex  # f#(M[n])
    target: CousinComplex  # (f#M)[n]
    n: int
    signs: dict

    def apply(self, x: str, a):
        return self.target.modules[x].scale(self.signs[x], a)

    def maps(self) -> dict:
        return {x: (lambda a, x=x: self.apply(x, a)) for x in self.source.poset.order}

    def check(self, N: int = 1) -> Report:
        return chain_map_report(self.source, self.target, self.maps(), N)


def transcendence(C: CousinComplex, x: str) -> int:
    return 1 if C.poset.points[x].kind == "fiber-generic" else 0


def translate_iso(f: SchemeMapDesc, C: CousinComplex, n: int) -> TranslationIso:
    src = f_sharp_smooth(f, C.shift(n))
    tgt = f_sharp_smooth(f, C).shift(n)
    signs = {x: (-1) ** (n * transcendence(src, x)) for x in src.poset.order}
    return TranslationIso(src, tgt, n, signs)


def chain_map_report(A: CousinComplex, B: CousinComplex, maps: dict, N: int = 1) -> Report:
    """Does {x: A(x) -> B(x)} commute with every coboundary on the window?"""
    bad = []
    if set(A.poset.covers) != set(B.poset.covers):
        return Report(False, [("posets differ",)])
    for x, y in A.poset.covers:
        Mx, My = A.modules[x], B.modules[y]
        for a in Mx.window(N):
            lhs = maps[y](A.d(x, y, a))
            rhs = B.d(x, y, maps[x](a))
            if not My.is_zero(My.sub(lhs, rhs)):
                bad.append(("square fails", x, y, Mx.encode(a)))
                break
    return Report(not bad, bad, {"window": N})


def translation_additivity(f: SchemeMapDesc, C: CousinComplex, m: int, n: int, N: int = 1) -> Report:
    """phi_{m+n} = phi_m[n] o phi_n(M[m]) as maps f#(M[m+n]) -> (f#M)[m+n]."""
    inner = translate_iso(f, C.shift(m), n)     # f#(M[m][n]) -> (f#(M[m]))[n]
    outer = translate_iso(f, C, m)              # f#(M[m]) -> (f#M)[m], shifted by n below
    total = translate_iso(f, C, m + n)
    bad = []
    for x in total.source.poset.order:
        M = total.target.modules[x]
        for a in inner.source.modules[x].window(N):
            lhs = outer.apply(x, inner.apply(x, a))
            rhs = total.apply(x, a)
            if not M.is_zero(M.sub(lhs, rhs)):
                bad.append(("additivity", x, M.encode(a)))
                break
    for A, B in ((inner.source, total.source), (outer.target.shift(n), total.target)):
        r = same_complex(A, B, N)
        bad += r.violations
    return Report(not bad, bad, {"m": m, "n": n, "window": N})


def translation_composite(f: SchemeMapDesc, g: SchemeMapDesc, C: CousinComplex, n: int, N: int = 1) -> Report:
    """f#(phi^g_n) followed by phi^f_n(g#M) equals the pointwise sign (-1)^{n(t_f + t_g)}."""
    phi_g = translate_iso(g, C, n)                        # g#(M[n]) -> (g#M)[n]
    A = f_sharp_smooth(f, phi_g.source)                   # f#g#(M[n])
    B = f_sharp_smooth(f, phi_g.target)                   # f#((g#M)[n])
    lifted = sharp_morphism(A, B, phi_g.maps())
    phi_f = translate_iso(f, f_sharp_smooth(g, C), n)     # f#((g#M)[n]) -> (f#g#M)[n]
    bad = []
    r = chain_map_report(A, B, lifted, N)
    bad += r.violations
    for x in A.poset.order:
        base = A.modules[x].base_point
        t = transcendence(A, x) + transcendence(phi_g.source, base)
        sign = (-1) ** (n * t)
        M = phi_f.target.modules[x]
        for a in A.modules[x].window(N):
            lhs = phi_f.apply(x, lifted[x](a))
            rhs = M.scale(sign, a)
            if not M.is_zero(M.sub(lhs, rhs)):
                bad.append(("composite", x, M.encode(a)))
                break
    return Report(not bad, bad, {"n": n, "window": N})


# factorization independence


def res_map(S: CousinComplex, x: str, base: PointModule):
    """The residue along T = c: {b: d/(T - c)} -> sum d b."""
    U = _unwrap(S.modules[x])
    rho, T = U.rho, U.T

    def fn(a):
        out = base.zero()
        for bk, v in a.items():
            pp = T.principal_part(v, rho)
            if set(pp) - {1}:
                raise ModelMismatch("element is not killed by T - c")
            d = pp.get(1)
            if d:
                out = base.add(out, base.scale(_poly_terms(d).get(0), kelement(base, bk)))
        return out

    return fn


def check_section(C: CousinComplex, c=0, variable: str = "T", bound=1, N: int = 1) -> Report:
    """(i|h)# M = M via res for the section T = c of h: A^1_Y -> Y, on f# and on E_h."""
    K = _complex_field(C)
    T = PIDDesc.poly(K, variable)
    rho = _decode_expr(T, f"{variable} - ({c})")
    h = SchemeMapDesc.smooth_a1(variable, bound, points=(T.encode(rho),))
    i = SchemeMapDesc.section(c, variable)
    bad = []
    signs = {}
    for level, S in (("sharp", f_sharp_smooth(h, C)), ("E_h", None)):
        if S is None:
            S = untwisted(f_sharp_smooth(h, C))
        Z = f_flat(i, S)
        names = {y: fiber_point_name(y, T, rho) for y in C.poset.order}
        if sorted(Z.poset.order) != sorted(names.values()):
            bad.append((level, "points of the composite", Z.poset.order))
            continue
        sgn = {y: 1 if level == "sharp" else (-1) ** (C.delta[y] % 2) for y in C.poset.order}
        if level == "E_h":
            signs = {y: sgn[y] for y in C.poset.order}
        maps = {}
        for y, x in names.items():
            r = res_map(Z, x, C.modules[y])
            maps[y] = (lambda a, r=r, s=sgn[y], M=C.modules[y]: M.scale(s, r(a)))
            # res is a bijection of windows
            keys = {bk for a in Z.modules[x].window(N) for bk in a}
            base_keys = {bk for bk, _ in kbasis(C.modules[y], N)}
            if keys != base_keys:
                bad.append((level, "res is not onto the window", y))
            if Z.delta[x] != C.delta[y]:
                bad.append((level, "codimension", y))
        for y, y2 in C.poset.covers:
            x, x2 = names[y], names[y2]
            M2 = C.modules[y2]
            for a in Z.modules[x].window(N):
                lhs = maps[y2](Z.d(x, x2, a))
                rhs = C.d(y, y2, maps[y](a))
                if not M2.is_zero(M2.sub(lhs, rhs)):
                    bad.append((level, "res does not commute with the coboundary", y, y2))
                    break
    return Report(not bad, bad, {"section": str(c), "window": N, "E_h sign": signs})


def check_base_change(C: CousinComplex, prime: str = "y", variable: str = "T", bound=1, N: int = 1) -> Report:
    """(j|f)# = (g|i)# for X = A^1_Y, Z = V(prime) in Y: j-flat f-sharp versus g-sharp i-flat."""
    f = SchemeMapDesc.smooth_a1(variable, bound)
    imm = SchemeMapDesc.closed_immersion(prime)
    A = f_flat(imm, f_sharp_smooth(f, C))
    B = f_sharp_smooth(f, f_flat(imm, C))
    bad = []
    if A.poset.order != B.poset.order:
        return Report(False, [("points", A.poset.order, B.poset.order)])
    for x in A.poset.order:
        ka = sorted(_key_str(k) for k, _ in kbasis(A.modules[x], N))
        kb = sorted(_key_str(k) for k, _ in kbasis(B.modules[x], N))
        if ka != kb:
            bad.append(("window", x))
    r1, r2 = same_complex(A, B, N), same_complex(B, A, N)
    bad += r1.violations + r2.violations
    return Report(not bad, bad, {"window": N, "points": A.poset.order})


def check_factorization_independence(kind: str, C: CousinComplex, N: int = 1, **kw) -> Report:
    """kind = section (kw c), sections (kw cs: list of c), or base-change (kw prime)."""
    if kind == "section":
        return check_section(C, N=N, **kw)
    if kind == "sections":
        cs = kw.pop("cs", (0, 1))
        reps = [check_section(C, c=c, N=N, **kw) for c in cs]
        return Report(all(reps), [v for r in reps for v in r.violations], {"sections": [str(c) for c in cs]})
    if kind == "base-change":
        return check_base_change(C, N=N, **kw)
    raise ModelMismatch(f"unknown factorization kind {kind!r}")


# eta_f


@dataclass
class EtaMap:
    source: CousinComplex
    target: CousinComplex
    point: str

    def apply(self, a):
        return dict(a)

    def report(self, N: int = 2) -> Report:
        bad = []
        S, Tg = self.source, self.target
        g = next(x for x in Tg.poset.order if Tg.poset.points[x].kind == "fiber-generic")
        src = S.poset.order[0]
        if S.delta[src] != Tg.delta[g]:
            bad.append(("degree",))
        for a in S.modules[src].window(N):
            b = self.apply(a)
            for y in Tg.poset.up(g):
                if not Tg.modules[y].is_zero(Tg.d(g, y, b)):
                    bad.append(("not a chain map", y, S.modules[src].encode(a)))
        Hs, Ht = homology(S, N), homology(Tg, N)
        degs = sorted(set(Hs) | set(Ht))
        for n in degs:
            hs, ht = Hs.get(n), Ht.get(n)
            fs = (hs.free, sorted(hs.torsion)) if hs else (0, [])
            ft = (ht.free, sorted(ht.torsion)) if ht else (0, [])
            if fs != ft:
                bad.append(("homology differs", n, fs, ft))
        T = Tg.modules[g].T
        for rep in Ht[Tg.delta[g]].elements:
            vals = rep.get(g, {})
            if any(not T.is_unit(T.num_den(v)[1]) for v in vals.values()) or set(rep) - {g}:
                bad.append(("cycle outside the image of eta", Tg.modules[g].encode(vals)))
        scope = {"window": N, "homology": {str(n): [Hs[n].free if n in Hs else 0, Ht[n].free if n in Ht else 0]
                                           for n in degs}}
        return Report(not bad, bad, scope)


def eta_f(f: SchemeMapDesc, C: CousinComplex) -> EtaMap:
    """f*M (x) omega[1] -> f#M for M concentrated at one point (the adic regimes)."""
    if f.kind != "smooth-A1":
        raise ModelMismatch("eta_f needs a smooth-A1 map")
    if len(C.poset.order) != 1:
        raise HypothesisFailure("adic", "eta_f needs the complex concentrated at one point")
    y = C.poset.order[0]
    Tg = f_sharp_smooth(f, C)
    T = Tg.modules[Tg.poset.order[0]].T
    name = f"{y}|A1"
    P = SpecPoset([Point(name, "quasi-coherent", base=y)], [])
    S = CousinComplex(P, CodimFn({name: C.delta[y] - 1}), {name: PolyTerm(C.modules[y], T)}, {},
                      {"regime": "quasi-coherent"})
    return EtaMap(S, Tg, y)


# exactness and filtrations


def _vectors(M: PointModule, elems: list, keys: list) -> list:
    pos = {k: i for i, k in enumerate(keys)}
    K = _field_of(M)
    out = []
    for a in elems:
        v = [K.zero] * len(keys)
        for k, c in kcoords(M, a).items():
            if k not in pos:
                return None
            v[pos[k]] = c
        out.append(v)
    return out


def is_termwise_exact(A: CousinComplex, B: CousinComplex, C: CousinComplex,
                      alpha: dict, beta: dict, N: int = 1) -> Report:
    """0 -> A -> B -> C -> 0 exact at every point on the window (K-linear algebra)."""
    bad = []
    for x in B.poset.order:
        MA, MB, MC = A.modules[x], B.modules[x], C.modules[x]
        K = _field_of(MB)
        kA = [e for _, e in kbasis(MA, N)]
        kB = [k for k, _ in kbasis(MB, N)]
        eB = [e for _, e in kbasis(MB, N)]
        kC = [k for k, _ in kbasis(MC, N)]
        img_a = _vectors(MB, [alpha[x](a) for a in kA], kB)
        img_b = _vectors(MC, [beta[x](b) for b in eB], kC)
        if img_a is None or img_b is None:
            bad.append(("maps leave the window", x))
            continue
        ra = linalg.rank(K, img_a) if img_a else 0
        rb = linalg.rank(K, img_b) if img_b else 0
        if ra != len(kA):
            bad.append(("not injective", x))
        if rb != len(kC):
            bad.append(("not surjective", x))
        if len(eB) - rb != ra:
            bad.append(("middle homology", x))
        for a in kA:
            if not MC.is_zero(beta[x](alpha[x](a))):
                bad.append(("composite is not zero", x))
                break
    return Report(not bad, bad, {"window": N})


def matrix_map(src: CousinComplex, tgt: CousinComplex, P: Sequence[Sequence]) -> dict:
    """Pointwise action of a constant K-matrix on free Cousin complexes E(R^a) -> E(R^b)."""
    out = {}
    for x in src.poset.order:
        A, B = src.modules[x], tgt.modules[x]
        out[x] = _matrix_point(A, B, P)
    return out


def _matrix_point(A, B, P):
    pid = A.pid

    def fn(a):
        comps = a if isinstance(A, FracVector) else a[0]
        vals = []
        for row in P:
            s = pid.frac(pid.zero)
            for c, v in zip(row, comps):
                if c:
                    s += v * c
            vals.append(s)
        if isinstance(B, FracVector):
            return tuple(vals)
        return tuple(B.canon(v) for v in vals), B.zero()[1]

    return fn


def random_exact_instance(pid: PIDDesc, rng: random.Random, bound=1, max_rank: int = 2):
    """0 -> E(R^a) -> E(R^{a+b}) -> E(R^b) -> 0 mixed by a random invertible K-matrix."""
    from .cousin import cousin_E_pid

    a, b = rng.randint(1, max_rank), rng.randint(1, max_rank)
    n = a + b
    K = pid.field
    while True:
        P = [[K.dom(rng.randint(-2, 2)) for _ in range(n)] for _ in range(n)]
        if linalg.is_invertible(K, P):
            break
    Pi = linalg.inverse(K, P)
    Pi = [[Pi.rep.getitem(i, j) for j in range(n)] for i in range(n)]
    inc = [[P[i][j] for j in range(a)] for i in range(n)]
    proj = [Pi[a + i] for i in range(b)]
    E1, E2, E3 = (cousin_E_pid(pid, r, bound) for r in (a, n, b))
    return E1, E2, E3, matrix_map(E1, E2, inc), matrix_map(E2, E3, proj)


def filtration_report(f: SchemeMapDesc, C: CousinComplex, N: int = 1) -> Report:
    """F^p(f#M) = f#(M truncated in degrees >= p), G_p(f#M) = f#(M truncated in degrees <= p)."""
    S = f_sharp_smooth(f, C)
    bad = []
    degs = C.degrees()
    for p in range(min(degs) - 1, max(degs) + 2):
        for name, lhs, rhs in (("F", filter_F(S, p), f_sharp_smooth(f, truncate_ge(C, p))),
                               ("G", filter_G(S, p), f_sharp_smooth(f, truncate_le(C, p)))):
            if lhs.poset.order != rhs.poset.order:
                bad.append((name, p, "points"))
                continue
            r = same_complex(lhs, rhs, N)
            if not r:
                bad.append((name, p, r.violations[:1]))
            for x in lhs.poset.order:
                if lhs.labels[x] != rhs.labels[x]:
                    bad.append((name, p, "label", x))
    return Report(not bad, bad, {"window": N, "degrees": degs})


# agreement with the punctual functor


def punctual_agreement(S: CousinComplex, x: str, rng: random.Random, samples: int = 4) -> Report:
    """Fiber coboundaries into a rational point agree with the Koszul class of [m dT / s].

    S is f# of a one-point complex over a field; x is the closed point T = c.
    A fraction m / ((T-c)^a h(T-c)) at the generic point goes to its principal
    part at T - c; the same symbol over K[[u]], u = T - c, is evaluated with
    the Koszul oracle of the generalized-fraction module.
    """
    from .genfrac import GenFraction, koszul_oracle

    M = S.modules[x]
    rho = M.rho
    T = M.T
    if T.degree(rho) != 1:
        raise ModelMismatch("punctual comparison needs a rational point")
    c = -_poly_terms(rho).get(0, T.field.zero)
    g = next(p for p in S.poset.down(x))
    base = M.base
    if not isinstance(base, VectorTerm) or base.M.ring.variables:
        raise ModelMismatch("punctual comparison is set up over a field")
    V = base.M
    B = LocalRingDesc(V.field, ("u",))
    bad = []
    for _ in range(samples):
        a = rng.randint(1, 3)
        h = [V.field.one] + [V.field.dom(rng.randint(-2, 2)) for _ in range(rng.randint(0, 2))]
        k = rng.randrange(V.dim)
        s_text = "u**%d*(%s)" % (a, " + ".join(f"({hc})*u**{i}" for i, hc in enumerate(h)))
        frac = GenFraction(V, B, ("u",), {k: V.field.one}, ((s_text, 1),), "C", "du")
        cls = koszul_oracle(frac)
        u = T.gen - T.ring(c)
        hv = sum((T.ring(hc) * u ** i for i, hc in enumerate(h)), T.zero)
        elem = {k: T.frac(T.one, u ** a * hv)}
        img = S.d(g, x, elem)
        pp = T.principal_part(img.get(k, T.frac(T.zero)), rho)
        ours = {(k, (j,)): _poly_terms(d).get(0) for j, d in pp.items() if d}
        theirs = {key: v for key, v in cls.coeffs.items() if v}
        if ours != theirs:
            bad.append(("disagree", s_text, ours, theirs))
    return Report(not bad, bad, {"point": x, "samples": samples})


def is_CM_koszul(C: CousinComplex, N: int = 1) -> Report:
    """CM check with Koszul complexes on a parameter, computed K-linearly.

    At every point x and strict generization g, a parameter t in m_x outside
    the prime of g must act bijectively on C(g): H^0 = ker t vanishes on the
    window N and H^1 = coker t vanishes on it, with preimages taken in the
    window N + 1. The term at x must be m_x-torsion.
    """
    bad = []
    for x in C.poset.order:
        pt = C.poset.points[x]
        for g in sorted(C.poset.generizations(x)):
            M = C.modules[g]
            t = _parameter(C, pt, C.poset.points[g])
            if t is None:
                bad.append(("no parameter", x, g))
                continue
            if not _koszul_acyclic(M, t, N):
                bad.append(("local cohomology at a generization", x, g))
        M = C.modules[x]
        if any(M.nilpotency(a) is None for a in M.window(N)):
            bad.append(("term is not torsion", x))
    return Report(not bad, bad, {"window": N})


def _koszul_acyclic(M: PointModule, t, N: int) -> bool:
    K = _field_of(M)
    small = kbasis(M, N)
    big = kbasis(M, N + 1)
    keys = sorted({k for k, _ in big} | {k for k, _ in small}, key=_key_str)
    imgs = [_act(M, t, e) for _, e in big]
    allkeys = set(keys)
    for im in imgs:
        allkeys |= set(kcoords(M, im))
    keys = sorted(allkeys, key=_key_str)
    vs = _vectors(M, [e for _, e in small], keys)
    ws = _vectors(M, [_act(M, t, e) for _, e in small], keys)
    if linalg.rank(K, ws) != len(small):
        return False
    W = _vectors(M, imgs, keys)
    basis = linalg.row_basis(K, W, len(keys))
    return all(linalg.span_contains(K, basis, v) for v in vs)


# A^1 over Spec Z
#
# Points over eta: the generic point and horizontal primes rho(T); over (p):
# the vertical prime (p) and closed points m = (p, T - c), 0 <= c < p. The
# term at m is H^2_m = H^1_g(H^1_p), g = T - c: the image of a / (p^i b) is
# the negative part of a / b in (Z/p^i)((g)), divided by p^i. Both the fiber
# coboundary from (p) and the lateral one from rho use this map, with the base
# direction first.


def _int_pair(T: PIDDesc, q):
    """q = n / d with n, d integer coefficient dicts {exponent: int}."""
    from fractions import Fraction
    from math import lcm

    n, d = T.num_den(q)
    cn = {m[0]: Fraction(int(c.numerator), int(c.denominator)) for m, c in n.items()}
    cd = {m[0]: Fraction(int(c.numerator), int(c.denominator)) for m, c in d.items()}
    L = lcm(*[c.denominator for c in list(cn.values()) + list(cd.values())])
    return ({e: int(c * L) for e, c in cn.items() if c}, {e: int(c * L) for e, c in cd.items() if c})


def _vp(x: int, p: int) -> int:
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


def _content_valuation(P: dict, p: int) -> int:
    return min(_vp(c, p) for c in P.values())


def _taylor(P: dict, c: int) -> dict:
    """Coefficients of P(g + c) in powers of g."""
    from math import comb

    out = {}
    for e, a in P.items():
        for k in range(e + 1):
            out[k] = out.get(k, 0) + a * comb(e, k) * c ** (e - k)
    return {k: v for k, v in out.items() if v}


def _series_mul(A: dict, B: dict, mod: int, below: int) -> dict:
    out = {}
    for e, a in A.items():
        for f, b in B.items():
            if e + f < below:
                out[e + f] = (out.get(e + f, 0) + a * b) % mod
    return {k: v for k, v in out.items() if v}


def _series_inverse(U: dict, mod: int, below: int) -> dict:
    u0 = pow(U[0], -1, mod)
    inv = {0: u0}
    for n in range(1, below):
        s = sum(U.get(k, 0) * inv.get(n - k, 0) for k in range(1, n + 1))
        c = (-s * u0) % mod
        if c:
            inv[n] = c
    return inv


def pp_closed(T: PIDDesc, q, p: int, c: int) -> dict:
    """Image of q in H^2 at (p, T - c) as {l: r}, r in Z[1/p]/Z, meaning sum r / g^l."""
    from fractions import Fraction

    if not q:
        return {}
    n, d = _int_pair(T, q)
    vn, vd = _content_valuation(n, p), _content_valuation(d, p)
    i = vd - vn
    if i <= 0:
        return {}
    mod = p ** i
    a = {e: (x // p ** vn) % mod for e, x in _taylor(n, c).items()}
    b = {e: (x // p ** vd) % mod for e, x in _taylor(d, c).items()}
    a = {e: x for e, x in a.items() if x}
    j = min(e for e, x in b.items() if x % p)
    U = {e - j: x for e, x in b.items() if e >= j}
    W = {e: x for e, x in b.items() if e < j}
    top = j * i
    Uinv = _series_inverse(U, mod, top + 1)
    out = {}
    term = {0: 1}        # (-W)^n U^{-n}, built up as n grows
    for m in range(i):
        part = _series_mul(_series_mul(a, term, mod, top + 1), Uinv, mod, top + 1)
        shift = j * (m + 1)
        for e, x in part.items():
            if e - shift < 0:
                out[shift - e] = (out.get(shift - e, 0) + x) % mod
        term = _series_mul(_series_mul(term, {e: -x for e, x in W.items()}, mod, top + 1), Uinv, mod, top + 1)
    return {l: Fraction(x, mod) % 1 for l, x in sorted(out.items()) if Fraction(x, mod) % 1}


class _ZTerm(PointModule):
    """Common arithmetic for terms of f#E(Z) whose elements are fractions in Q(T)."""

    def __init__(self, T: PIDDesc, base_point: str):
        self.T = T
        self.pid = None
        self.base_point = base_point

    def zero(self):
        return self.T.frac(self.T.zero)

    def add(self, a, b):
        return self.canon(a + b)

    def scale(self, c, a):
        return self.canon(as_frac(self.T, c) * a)

    def act(self, r, a):
        return self.scale(r, a)

    def canon(self, q):
        return q

    def encode(self, a):
        return self.T.encode_frac(a)


class ZGeneric(_ZTerm):
    def __init__(self, T, base_point, primes, horizontals):
        super().__init__(T, base_point)
        self.primes, self.horizontals = list(primes), list(horizontals)

    def is_zero(self, a) -> bool:
        return not a

    def window(self, N: int) -> list:
        T = self.T
        one = T.one
        out = [T.frac(one)] + [T.frac(T.gen ** e) for e in range(1, N)]
        for p in self.primes:
            out += [T.frac(one, T.ring(p ** k)) for k in range(1, N + 1)]
            out += [T.frac(T.one, T.ring(p) * r) for r in self.horizontals]
            out += [T.frac(T.gen + T.one, T.ring(p ** 2) * r ** 2) for r in self.horizontals]
        for r in self.horizontals:
            out += [T.frac(one, r ** k) for k in range(1, N + 1)]
            out += [T.frac(one, r * s) for s in self.horizontals if T.prime_key(s) > T.prime_key(r)]
        return out

    def nilpotency(self, a):
        return 0 if not a else 1

    def hull_report(self):
        return HullReport(True, "the residue field Q(T)")

    def describe(self) -> str:
        return "Q(T)"

    def parameter_for(self, pt: Point):
        return pt.fiber if pt.fiber is not None else pt.prime


class ZHorizontal(_ZTerm):
    def __init__(self, T, base_point, rho):
        super().__init__(T, base_point)
        self.rho = rho

    def canon(self, q):
        return _canon(self.T, q, self.rho)

    def is_zero(self, a) -> bool:
        return not a

    def window(self, N: int) -> list:
        T, r = self.T, self.rho
        out = [self.canon(T.frac(T.gen ** e, r ** k)) for k in range(1, N + 1) for e in range(T.residue_dim(r))]
        out += [self.canon(T.frac(T.one, r * T.ring(p))) for p in (2, 3)]
        return out

    def nilpotency(self, a):
        return _pole_order(self.T, a, self.rho)

    def hull_report(self):
        return HullReport(True, f"H^1 of the discrete valuation ring Q[T]_({self.T.encode(self.rho)})")

    def describe(self) -> str:
        return f"Q(T)/Q[T]_({self.T.encode(self.rho)})"

    def parameter_for(self, pt: Point):
        return pt.fiber


class ZVertical(_ZTerm):
    """Q(T) / Z[T]_(p); elements are representatives, zero means p-integral."""

    def __init__(self, T, base_point, p, horizontals):
        super().__init__(T, base_point)
        self.p = p
        self.prime = p
        self.horizontals = list(horizontals)

    def valuation(self, a) -> int:
        if not a:
            return 10 ** 9
        n, d = _int_pair(self.T, a)
        return _content_valuation(n, self.p) - _content_valuation(d, self.p)

    def is_zero(self, a) -> bool:
        return self.valuation(a) >= 0

    def window(self, N: int) -> list:
        T, p = self.T, self.p
        out = [T.frac(T.gen ** e, T.ring(p ** k)) for k in range(1, N + 1) for e in range(2)]
        out += [T.frac(T.one, T.ring(p) * (T.gen - T.ring(c))) for c in range(p)]
        out += [T.frac(T.one, T.ring(p) * r) for r in self.horizontals]
        return out

    def nilpotency(self, a):
        return max(0, -self.valuation(a))

    def hull_report(self):
        return HullReport(True, f"H^1 of the discrete valuation ring Z[T]_({self.p})")

    def describe(self) -> str:
        return f"Q(T)/Z[T]_({self.p})"

    def parameter_for(self, pt: Point):
        return pt.prime


class ZClosed(PointModule):
    """H^2 at m = (p, T - c) as {l: r}: sum of r / (T - c)^l with r in Z[1/p]/Z."""

    def __init__(self, T, base_point, p, c):
        self.T = T
        self.pid = None
        self.base_point = base_point
        self.p, self.c = p, c
        self.prime = T.gen - T.ring(c)

    def zero(self):
        return {}

    def add(self, a, b):
        out = dict(a)
        for l, r in b.items():
            s = (out.get(l, 0) + r) % 1
            if s:
                out[l] = s
            else:
                out.pop(l, None)
        return out

    def scale(self, c, a):
        return self.act(c, a)

    def act(self, r, a):
        """Multiplication by r in Z[T] (an int is a constant polynomial)."""
        from fractions import Fraction

        if isinstance(r, int):
            poly = {0: r}
        else:
            n, d = _int_pair(self.T, self.T.frac(r))
            if d != {0: 1} and set(d) != {0}:
                raise ModelMismatch("only polynomials act on closed terms")
            poly = {e: Fraction(x, d[0]) for e, x in n.items()}
        shifted = _taylor(poly, self.c)
        out = {}
        for l, x in a.items():
            for e, y in shifted.items():
                if l - e >= 1:
                    out = self.add(out, {l - e: (x * y) % 1})
        return out

    def is_zero(self, a) -> bool:
        return not a

    def window(self, N: int) -> list:
        from fractions import Fraction

        return [{l: Fraction(1, self.p ** k)} for l in range(1, N + 1) for k in range(1, N + 1)]

    def nilpotency(self, a):
        if not a:
            return 0
        return max(l + _vp(r.denominator, self.p) - 1 for l, r in a.items())

    def hull_report(self):
        return HullReport(True, f"H^2 of the regular local ring Z[T]_(p, T - {self.c}), p = {self.p}")

    def encode(self, a):
        return {str(l): str(r) for l, r in sorted(a.items())}

    def describe(self) -> str:
        return f"H^2_(({self.p}, T - {self.c}))"


def _sharp_over_Z(f: SchemeMapDesc, C: CousinComplex) -> CousinComplex:
    """f#E(Z) for the projection A^1_Z -> Spec Z (rank one, torsion free)."""
    gens = [x for x in C.poset.order if C.poset.points[x].kind == "generic"]
    if len(gens) != 1 or not isinstance(C.modules[gens[0]], FracVector) or C.modules[gens[0]].rank != 1:
        raise UnsupportedRing("A^1 over Z is modeled for E(Z) of rank one")
    eta = gens[0]
    closed = [x for x in C.poset.order if x != eta]
    for y in closed:
        L = C.modules[y]
        if not isinstance(L, LocalLayer) or L.rank != 1 or L.torsion:
            raise UnsupportedRing("A^1 over Z is modeled for E(Z) of rank one")
    # coboundary sign of the input (E(Z) or a shift of it)
    sgn = {}
    for y in closed:
        L = C.modules[y]
        img = C.d(eta, y, C.modules[eta].unit(0, as_frac(L.pid, 1) / L.prime))
        cls = L.free_unit(0, as_frac(L.pid, 1) / L.prime)
        if L.is_zero(L.sub(img, cls)):
            sgn[y] = 1
        elif L.is_zero(L.add(img, cls)):
            sgn[y] = -1
        else:
            raise UnsupportedRing("A^1 over Z needs the coboundaries of E(Z) up to sign")
    T = PIDDesc.poly(FieldDesc.rationals(), f.variable)
    horizontals = fiber_primes(f, T)
    primes = [C.modules[y].prime for y in closed]
    q0 = C.delta[eta]
    pts, covers, modules, cob, delta, labels = [], [], {}, {}, {}, {}
    g = fiber_point_name(eta, T)
    pts.append(Point(g, "fiber-generic", None, None, eta))
    G = ZGeneric(T, eta, primes, horizontals)
    modules[g], delta[g], labels[g] = G, q0 - 1, q0
    hnames = {}
    for r in horizontals:
        x = fiber_point_name(eta, T, r)
        hnames[T.encode(r)] = x
        pts.append(Point(x, "fiber-closed", r, None, eta))
        H = ZHorizontal(T, eta, r)
        modules[x], delta[x], labels[x] = H, q0, q0
        covers.append((g, x))
        cob[(g, x)] = (lambda a, H=H: H.canon(a))
    for y in closed:
        p = int(C.modules[y].prime)
        q1 = C.delta[y]
        v = fiber_point_name(y, T)
        pts.append(Point(v, "fiber-generic", None, p, y))
        Vt = ZVertical(T, y, p, horizontals)
        modules[v], delta[v], labels[v] = Vt, q1 - 1, q1
        covers.append((g, v))
        cob[(g, v)] = (lambda a, s=-sgn[y]: as_frac(T, s) * a)
        for c in range(p):
            x = f"{y}|(T - {c})" if c else f"{y}|(T)"
            pts.append(Point(x, "fiber-closed", T.gen - T.ring(c), p, y))
            Z = ZClosed(T, y, p, c)
            modules[x], delta[x], labels[x] = Z, q1, q1
            covers.append((v, x))
            cob[(v, x)] = (lambda a, p=p, c=c: pp_closed(T, a, p, c))
            for r in horizontals:
                n, _ = _int_pair(T, T.frac(r))
                if sum(coef * c ** e for e, coef in n.items()) % p == 0:
                    h = hnames[T.encode(r)]
                    covers.append((h, x))
                    cob[(h, x)] = (lambda a, p=p, c=c, s=sgn[y]: pp_closed(T, as_frac(T, s) * a, p, c))
    meta = {"regime": "A1-over-Z", "variable": T.variable, "base": dict(C.meta)}
    return CousinComplex(SpecPoset(pts, covers), CodimFn(delta), modules, cob, meta, labels)
