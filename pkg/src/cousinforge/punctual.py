"""The punctual pseudofunctor on the effective fragment of complete local rings.

A map is described by a monomial assignment (:class:`RingMapDesc`): each
source variable goes to a target variable or to zero, the residue field may
grow by transcendental variables X, the target may have extra series
variables V and extra monomial relations. Such a map factors as a smooth
adjunction A -> P = A(X)[[V]] followed by the quotient P -> B, so

    phi#M = ann of the kernel inside the fraction module FM_V(M (x) K(X)),

with symbols [m (x) omega / V^alpha], omega = dX_1 ^ ... ^ dX_t ^ dV_1 ^ ... ^ dV_r.

Comparison isomorphisms are relabelings of symbols with a sign: the twist
(-1)^{t_f r_g} for two smooth legs, times the sign needed to bring the
wedge omega_f ^ omega_g into the canonical order of omega_{gf}. A series
direction killed by g is contracted with sign (-1)^x, x the number of field
differentials in front of it; series directions pass each other freely.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import signs
from .errors import ModelMismatch, UnsupportedComposite
from .exact import linalg
from .exact.fields import FieldDesc
from .genfrac import FracElement, FractionModule, GenFraction, normalize
from .zerodim import LocalRingDesc, ModuleBase, ZMap, ZModule, monomial_divides, vadd, vscale


@dataclass(frozen=True)
class RingMapDesc:
    """A local map A -> B of the effective fragment.

    ``assign`` maps every source variable to a target variable or to None
    (the variable is killed). ``new_field_vars`` are the transcendental
    variables added to the residue field, in declared order.
    """

    source: LocalRingDesc
    target: LocalRingDesc
    assign: tuple  # ((source var, target var | None), ...)
    new_field_vars: tuple = ()
    name: str = field(default="", compare=False)

    def __post_init__(self):
        assign = dict(self.assign)
        object.__setattr__(self, "assign", tuple((v, assign.get(v)) for v in self.source.variables))
        object.__setattr__(self, "new_field_vars", tuple(self.new_field_vars))
        missing = set(assign) - set(self.source.variables)
        if missing:
            raise ModelMismatch(f"assignment for unknown variables {sorted(missing)}")
        images = [w for _, w in self.assign if w is not None]
        if len(set(images)) != len(images):
            raise ModelMismatch("assignment is not injective")
        if any(w not in self.target.variables for w in images):
            raise ModelMismatch("assignment lands outside the target variables")
        expected = self.source.field.extend(self.new_field_vars)
        if expected != self.target.field:
            raise ModelMismatch(f"target field {self.target.field.name()} is not "
                                f"{self.source.field.name()} extended by {self.new_field_vars}")
        for rel in self.source.relations:
            img = self.image_monomial(rel)
            if img is not None and not self.target.in_ideal(img):
                raise ModelMismatch("a source relation does not map into the target relations")

    # structure

    @property
    def amap(self) -> dict:
        return dict(self.assign)

    @property
    def killed(self) -> tuple:
        return tuple(v for v, w in self.assign if w is None)

    @property
    def new_vars(self) -> tuple:
        """Series variables of the target not in the image (declared target order)."""
        images = {w for _, w in self.assign if w is not None}
        return tuple(v for v in self.target.variables if v not in images)

    @property
    def new_relations(self) -> tuple:
        """Target relations not already images of source relations."""
        imgs = [self.image_monomial(r) for r in self.source.relations]
        imgs = [m for m in imgs if m is not None]
        return tuple(rel for rel in sorted(self.target.relations) if rel not in imgs)

    @property
    def r(self) -> int:
        return len(self.new_vars)

    @property
    def t(self) -> int:
        return len(self.new_field_vars)

    @property
    def kind(self) -> str:
        quotient = bool(self.killed) or bool(self.new_relations)
        smooth = bool(self.new_vars) or bool(self.new_field_vars)
        if not quotient and not smooth:
            return "identity"
        if not quotient:
            return "localization" if not self.new_vars else "smooth"
        if not smooth:
            return "surjection"
        return "composite"

    def image_monomial(self, mono: Sequence[int]):
        out = [0] * self.target.r
        for (v, w), e in zip(self.assign, mono):
            if not e:
                continue
            if w is None:
                return None
            out[self.target.index(w)] += e
        return tuple(out)

    def omega_vars(self) -> tuple:
        return self.new_field_vars + self.new_vars

    def omega_label(self) -> str:
        vs = self.omega_vars()
        return "∧".join(f"d{v}" for v in vs) if vs else "1"

    def kernel_monomials(self) -> list:
        """Generators of ker(P -> B) as dicts over target names and killed source names."""
        out = [{("base", v): 1} for v in self.killed]
        for rel in sorted(self.target.relations):
            out.append({w: e for w, e in zip(self.target.variables, rel) if e})
        return out

    def then(self, g: "RingMapDesc") -> "RingMapDesc":
        """The composite g o self."""
        if g.source != self.target:
            raise UnsupportedComposite("maps are not composable")
        gmap = g.amap
        assign = []
        for v, w in self.assign:
            assign.append((v, None if w is None else gmap[w]))
        return RingMapDesc(self.source, g.target, tuple(assign),
                           self.new_field_vars + g.new_field_vars,
                           name=f"{g.name or 'g'}∘{self.name or 'f'}")

    def label(self) -> str:
        return self.name or f"{self.source.name()}->{self.target.name()}"

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "assign": {v: w for v, w in self.assign},
            "new_field_vars": list(self.new_field_vars),
            "kind": self.kind,
        }

    @staticmethod
    def from_json(d: dict) -> "RingMapDesc":
        return RingMapDesc(LocalRingDesc.from_json(d["source"]), LocalRingDesc.from_json(d["target"]),
                           tuple(d.get("assign", {}).items()), tuple(d.get("new_field_vars", ())),
                           name=d.get("name", ""))


# constructors


def identity_map(A: LocalRingDesc) -> RingMapDesc:
    return RingMapDesc(A, A, tuple((v, v) for v in A.variables), name="1")


def smooth_map(A: LocalRingDesc, series_vars: Sequence[str] = (), field_vars: Sequence[str] = (),
               name: str = "") -> RingMapDesc:
    """A -> A(X)[[V]]: adjoin residue-field variables X and series variables V."""
    fld = A.field.extend(field_vars)
    rels = [tuple(r) + (0,) * len(series_vars) for r in A.relations]
    B = LocalRingDesc(fld, A.variables + tuple(series_vars), frozenset(rels))
    return RingMapDesc(A, B, tuple((v, v) for v in A.variables), tuple(field_vars), name=name)


def localization_map(A: LocalRingDesc, field_vars: Sequence[str], name: str = "") -> RingMapDesc:
    return smooth_map(A, (), field_vars, name=name)


def quotient_map(A: LocalRingDesc, kill: Sequence[str] = (), relations: Sequence = (),
                 name: str = "") -> RingMapDesc:
    """A -> A/(killed variables, monomial relations); relations are dicts or tuples over A."""
    keep = tuple(v for v in A.variables if v not in kill)
    rels = set()
    for rel in list(A.relations) + [_as_tuple(A, m) for m in relations]:
        if any(rel[A.index(v)] for v in kill):
            continue
        rels.add(tuple(rel[A.index(v)] for v in keep))
    B = LocalRingDesc(A.field, keep, frozenset(rels))
    assign = tuple((v, None if v in kill else v) for v in A.variables)
    return RingMapDesc(A, B, assign, (), name=name)


def _as_tuple(A: LocalRingDesc, m) -> tuple:
    if isinstance(m, dict):
        return tuple(m.get(v, 0) for v in A.variables)
    return tuple(m)


# the functor on objects


def sharp(phi: RingMapDesc, M: ModuleBase) -> FractionModule:
    """phi#M as the annihilator of the kernel in the fraction module over the smooth part."""
    if M.ring != phi.source:
        raise ModelMismatch(f"module lives over {M.ring.name()}, map starts at {phi.source.name()}")
    var_map = {w: v for v, w in phi.assign if w is not None}
    return FractionModule(M, phi.target, phi.new_vars, var_map=var_map,
                          ann=phi.kernel_monomials(), omega=phi.omega_label())


def smooth_sharp(phi: RingMapDesc, M: ModuleBase) -> FractionModule:
    if phi.kind not in ("smooth", "localization", "identity"):
        raise ModelMismatch(f"smooth_sharp needs a smooth map, got {phi.kind}")
    return sharp(phi, M)


def surj_sharp(phi: RingMapDesc, M: ModuleBase, window: int = 4):
    """ann_M(I) for a surjection; finite inputs come back as (ZModule, inclusion matrix)."""
    if phi.kind not in ("surjection", "identity"):
        raise ModelMismatch(f"surj_sharp needs a surjection, got {phi.kind}")
    fm = sharp(phi, M)
    if not isinstance(M, ZModule):
        return fm, None
    basis = fm.window_basis(window)
    sub = ZModule.from_elements(fm, basis)
    fld = M.field
    cols = []
    for b in basis:
        v = [fld.zero] * M.dim
        for (k, _), c in b.items():
            v[k] = c
        cols.append(v)
    return sub, linalg.from_columns(fld, cols, M.dim)


# comparison isomorphisms


def _perm_sign(seq: Sequence, target: Sequence) -> int:
    pos = {x: i for i, x in enumerate(target)}
    return signs.permutation_sign([pos[x] for x in seq])


@dataclass
class ComparisonIso:
    """C_{f,g}: g#f#M -> (gf)#M as a signed relabeling of symbols."""

    f: RingMapDesc
    g: RingMapDesc
    gf: RingMapDesc
    sign: int
    twist_exponent: int
    source: FractionModule | None = None
    target: FractionModule | None = None

    def apply_key(self, key):
        (inner, alpha), beta = key[0], key[1]
        m = inner
        fv = self.f.new_vars
        gmap = self.g.amap
        gamma = {}
        for v, a in zip(fv, alpha):
            w = gmap[v]
            if w is None:
                if a != 1:
                    raise ModelMismatch(f"symbol {key} is not killed by {v}")
                continue
            gamma[w] = a
        for w, b in zip(self.g.new_vars, beta):
            gamma[w] = b
        return m, tuple(gamma[w] for w in self.gf.new_vars)

    def apply(self, x: dict) -> dict:
        out = {}
        for key, c in x.items():
            k2 = self.apply_key(key)
            out = vadd(out, {k2: c * self.sign})
        return out

    def matrix(self, N: int = 2):
        """Matrix between the windows of source and target."""
        return _window_matrix(self.source, self.target, self.apply, N)


def compose_sharp(f: RingMapDesc, g: RingMapDesc, M: ModuleBase | None = None,
                  drop_twist: bool = False) -> ComparisonIso:
    """The comparison isomorphism g#f#M -> (gf)#M.

    ``drop_twist`` suppresses the (-1)^{t_f r_g} factor (debugging aid used to
    show that the twist is needed for associativity).
    """
    if f.target != g.source:
        raise UnsupportedComposite(f"cannot compose {f.label()} and {g.label()}")
    gf = f.then(g)
    gmap = g.amap
    seq = [("X", x) for x in f.new_field_vars]
    for v in f.new_vars:
        seq.append(("V", v) if gmap[v] is None else ("W", gmap[v]))
    seq += [("X", x) for x in g.new_field_vars]
    seq += [("W", w) for w in g.new_vars]
    target = [("X", x) for x in gf.new_field_vars] + [("W", w) for w in gf.new_vars]
    kept = [s for s in seq if s[0] != "V"]
    if sorted(kept) != sorted(target):
        raise UnsupportedComposite("differentials do not match up; composite outside the fragment")
    perm = _perm_sign(kept, target)
    # a killed direction is contracted after passing the field differentials before it
    for i, s in enumerate(seq):
        if s[0] == "V":
            perm *= signs.contraction(sum(1 for u in seq[:i] if u[0] == "X"))
    twist_exp = f.t * g.r
    twist = 1 if drop_twist else signs.composition(f.t, g.r)
    iso = ComparisonIso(f, g, gf, perm * twist, twist_exp)
    if M is not None:
        iso.source = sharp(g, sharp(f, M))
        iso.target = sharp(gf, M)
    return iso


def lift_map(phi: RingMapDesc, fn: Callable[[dict], dict]) -> Callable[[dict], dict]:
    """phi# applied to a module map given on elements: acts on the base part of keys."""

    def lifted(x: dict) -> dict:
        out = {}
        for (bk, alpha), c in x.items():
            for k, v in fn({bk: 1}).items():
                out = vadd(out, {(k, alpha): c * v})
        return out

    return lifted


def zmap_function(phi: ZMap) -> Callable[[dict], dict]:
    def fn(x: dict) -> dict:
        v = phi.source.vector(x)
        return phi.target.element(linalg.matvec(phi.matrix, v))

    return fn


def _window_matrix(source: ModuleBase, target: ModuleBase, fn, N: int):
    """Matrix of fn from the N-window of source into the N-window of target."""
    sb = source.window_basis(N)
    tb = target.window_basis(N)
    keys = sorted({k for b in tb for k in b}, key=repr)
    fld = target.field

    def vec(x):
        return [x.get(k, fld.zero) for k in keys]

    tvecs = [vec(b) for b in tb]
    cols = []
    for b in sb:
        img = fn(b)
        if any(k not in set(keys) for k in img):
            raise ModelMismatch("image leaves the target window")
        coords = linalg.coordinates(fld, tvecs, vec(img))
        if coords is None:
            raise ModelMismatch("image is not in the target module")
        cols.append(coords)
    return linalg.from_columns(fld, cols, len(tb))


# residue and unit


def insert(M: ZModule, m: dict, r: int) -> dict:
    """m -> [m (x) dT_1..dT_r / T_1, ..., T_r]."""
    one = (1,) * r
    return {(k, one): c for k, c in m.items() if c}


def res(xi, r: int | None = None) -> dict:
    """Residue: the (1,...,1) layer of a fraction-module element killed by every T_j.

    Accepts a FracElement, a plain dict over (key, alpha) or a GenFraction
    (normalized first).
    """
    if isinstance(xi, GenFraction):
        xi = normalize(xi)
    if isinstance(xi, FracElement):
        fm = xi.module
        coeffs = xi.coeffs
        for v in fm.new_vars:
            if fm.act(v, coeffs):
                raise ModelMismatch(f"element is not annihilated by {v}")
        r = fm.r
    else:
        coeffs = xi
        if r is None:
            r = len(next(iter(coeffs))[1]) if coeffs else 0
        if any(max(a, default=1) > 1 for _, a in coeffs):
            raise ModelMismatch("element is not annihilated by all fraction variables")
    one = (1,) * r
    out = {}
    for (k, alpha), c in coeffs.items():
        if alpha == one:
            out = vadd(out, {k: c})
    return out


def unit_delta(M: ZModule) -> ZMap:
    """(1_A)#M = M, computed via the smooth route and via the Hom route; both must agree."""
    one = identity_map(M.ring)
    smooth_route = sharp(one, M)                   # H^0 of M (x) A, no fraction variables
    hom_route, incl = surj_sharp(one, M)           # Hom_A(A, M) = ann_M(0)
    fld = M.field
    cols = []
    for b in smooth_route.window_basis(1):
        v = [fld.zero] * M.dim
        for (k, alpha), c in b.items():
            if alpha != ():
                raise ModelMismatch("identity produced fraction symbols")
            v[k] = c
        cols.append(v)
    A1 = linalg.from_columns(fld, cols, M.dim)
    if A1 != incl:
        raise ModelMismatch("the two unit identifications differ")
    return ZMap(M, M, A1)


def retract_identity(f: RingMapDesc, pi: RingMapDesc, M: ZModule) -> bool:
    """pi#f#M -> M through C_{f,pi} and through res agree with unit_delta."""
    if f.then(pi) != identity_map(f.source):
        raise ModelMismatch("pi o f is not the identity")
    C = compose_sharp(f, pi, M)
    delta = unit_delta(M)
    fld = M.field
    for b in C.source.window_basis(2):
        inner = {k: c for (k, _), c in b.items()}
        via_res = res(inner, f.r)
        via_c = {k: c for (k, _), c in C.apply(b).items()}
        image = M.element(linalg.matvec(delta.matrix, M.vector(via_c)))
        if vadd(via_res, vscale(-fld.one, image)):
            return False
    return True


# coherence


def _route_value(fns: list, x: dict) -> dict:
    for fn in fns:
        x = fn(x)
    return x


def _dict_diff(a: dict, b: dict) -> dict:
    return vadd(a, vscale(-1, b))


def associativity(f: RingMapDesc, g: RingMapDesc, h: RingMapDesc, M: ModuleBase, N: int = 2,
                  drop_twist: bool = False) -> tuple:
    """Compare C_{gf,h} o h#(C_{f,g}) with C_{f,hg} o C_{g,h} on the N-window of h#g#f#M.

    Returns (ok, witness) where witness lists (basis element, difference).
    """
    Cfg = compose_sharp(f, g, None, drop_twist)
    Cgf_h = compose_sharp(Cfg.gf, h, None, drop_twist)
    Cgh = compose_sharp(g, h, None, drop_twist)
    Cf_hg = compose_sharp(f, Cgh.gf, None, drop_twist)
    top = sharp(h, sharp(g, sharp(f, M)))
    route1 = [lift_map(h, Cfg.apply), Cgf_h.apply]
    route2 = [Cgh.apply, Cf_hg.apply]
    witness = []
    for b in top.window_basis(N):
        d = _dict_diff(_route_value(route1, b), _route_value(route2, b))
        if d:
            witness.append((b, d))
    return not witness, witness


def unit_triangles(f: RingMapDesc, M: ModuleBase, N: int = 2) -> tuple:
    """C_{1,f} against f#(delta) and C_{f,1} against delta of f#M."""
    one_a = identity_map(f.source)
    one_b = identity_map(f.target)
    witness = []
    C1 = compose_sharp(one_a, f)
    src = sharp(f, sharp(one_a, M))
    delta = lambda x: {k: c for (k, _), c in x.items()}  # noqa: E731
    for b in src.window_basis(N):
        d = _dict_diff(C1.apply(b), lift_map(f, delta)(b))
        if d:
            witness.append(("left", b, d))
    C2 = compose_sharp(f, one_b)
    src2 = sharp(one_b, sharp(f, M))
    for b in src2.window_basis(N):
        d = _dict_diff(C2.apply(b), delta(b))
        if d:
            witness.append(("right", b, d))
    return not witness, witness


def naturality(f: RingMapDesc, g: RingMapDesc, phi: ZMap, N: int = 2) -> bool:
    """C_{f,g} o g#f#(phi) == (gf)#(phi) o C_{f,g} on the window of g#f#(source)."""
    C = compose_sharp(f, g)
    fn = zmap_function(phi)
    left = [lift_map(g, lift_map(f, fn)), C.apply]
    right = [C.apply, lift_map(C.gf, fn)]
    for b in sharp(g, sharp(f, phi.source)).window_basis(N):
        if _dict_diff(_route_value(left, b), _route_value(right, b)):
            return False
    return True


def chains(generators: Sequence[RingMapDesc], depth: int) -> list:
    """All composable chains (f1, f2, ...) of length 1..depth."""
    out = [(g,) for g in generators]
    frontier = list(out)
    for _ in range(depth - 1):
        nxt = []
        for ch in frontier:
            for g in generators:
                if ch[-1].target == g.source:
                    nxt.append(ch + (g,))
        out += nxt
        frontier = nxt
    return out


def check_pseudofunctor(generators: Sequence[RingMapDesc], modules: dict, depth: int = 3,
                        N: int = 2, drop_twist: bool = False) -> list:
    """Report on every associativity square and unit triangle within depth.

    ``modules`` maps a source ring to a list of modules over it. Each report
    entry is {chain, diagram, status, witness}.
    """
    report = []
    for ch in chains(generators, depth):
        mods = modules.get(ch[0].source, [])
        names = [f.label() for f in ch]
        for M in mods:
            if len(ch) == 1:
                ok, wit = unit_triangles(ch[0], M, N)
                report.append(_entry(names, "unit", ok, wit))
            elif len(ch) == 2:
                try:
                    C = compose_sharp(ch[0], ch[1], M, drop_twist)
                    mat = C.matrix(N)
                    ok = linalg.is_invertible(C.target.field, mat)
                    report.append(_entry(names, "invertible", ok, [] if ok else ["singular"]))
                except (ModelMismatch, UnsupportedComposite) as exc:
                    report.append(_entry(names, "invertible", False, [str(exc)]))
            else:
                ok, wit = associativity(*ch, M, N, drop_twist)
                report.append(_entry(names, "associativity", ok, wit))
    return report


def _entry(chain, diagram, ok, witness) -> dict:
    return {"chain": chain, "diagram": diagram, "status": "pass" if ok else "fail",
            "witness": [_show_witness(w) for w in witness[:3]]}


def _show_witness(w) -> str:
    return repr(w)


# a standard generator fragment


def standard_fragment(K: FieldDesc) -> list:
    """Smooth adjunctions (r <= 2), monomial quotients, one localization layer, and sections."""
    R0 = LocalRingDesc(K)
    R1 = LocalRingDesc(K, ("T",))
    R2 = LocalRingDesc(K, ("T", "U"))
    ell0 = localization_map(R0, ("X",), name="ℓ0")
    R0X = ell0.target
    ell1 = localization_map(R1, ("X",), name="ℓ1")
    R1X = ell1.target
    gens = [
        ell0,
        ell1,
        smooth_map(R0, ("T",), name="σT"),
        smooth_map(R0X, ("T",), name="σTX"),
        smooth_map(R1, ("U",), name="σU"),
        smooth_map(R0, ("T", "U"), name="σTU"),
        quotient_map(R1, kill=("T",), name="πT"),
        quotient_map(R1X, kill=("T",), name="πTX"),
        quotient_map(R2, kill=("U",), name="πU"),
        quotient_map(R1, relations=[(2,)], name="qT2"),
        quotient_map(R2, relations=[(1, 1)], name="qTU"),
    ]
    return gens
