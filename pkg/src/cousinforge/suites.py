"""Named check suites shared by the command line and the acceptance tests.

Each suite returns a :class:`SuiteResult`; ``ok`` is the conjunction of its
checks. Randomized suites take a seed and are deterministic for it.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass, field

from .cousin import check_cousin, cousin_E_pid, homology, is_CM, is_residual, same_complex
from .errors import HypothesisFailure, WindowTooSmall
from .exact.fields import FieldDesc
from .exact.pid import PIDDesc, PrimeBound
from .exact.series import TruncSeries
from .genfrac import (GenFraction, OuterFraction, cech_oracle, comparison_signs, iterate, koszul_oracle,
                      make_fraction, normalize, power_series_over, random_denominators, random_fraction,
                      two_step_oracle, check_iteration_hypotheses)
from .punctual import check_pseudofunctor, quotient_map, retract_identity, smooth_map, standard_fragment
from .variance import (SchemeMapDesc, check_factorization_independence, eta_f, f_flat, f_sharp_smooth,
                       filtration_report, is_CM_koszul, is_termwise_exact, kappa_sharp, point_complex,
                       random_exact_instance, sharp_morphism, translate_iso, translation_additivity,
                       translation_composite)
from .zerodim import LocalRingDesc, ZModule, double_dual_evaluation, random_zmodule

WINDOW = 12


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)   # (label, ok, detail)
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    def add(self, label: str, ok, detail="") -> None:
        self.checks.append((label, bool(ok), detail))

    def failures(self) -> list:
        return [(label, detail) for label, ok, detail in self.checks if not ok]

    def to_json(self) -> dict:
        return {
            "schema": "v1",
            "suite": self.name,
            "ok": self.ok,
            "checks": [{"label": l, "ok": ok, "detail": _jsonable(d)} for l, ok, d in self.checks],
        }


def _jsonable(x):
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return str(x)


def _timed(fn):
    def run(*args, **kw):
        t = time.perf_counter()
        res = fn(*args, **kw)
        res.seconds = time.perf_counter() - t
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


Q = FieldDesc.rationals()
Z = PIDDesc.integers()
QY = PIDDesc.poly(Q, "y")


def E_Z(bound: int = 7):
    return cousin_E_pid(Z, 1, bound)


def E_Qy():
    return cousin_E_pid(QY, 1, PrimeBound(1, 1))


@_timed
def residual_Z(bound: int = 7) -> SuiteResult:
    """E(Z): Q -> sum over p <= B of Q/Z_(p), H^0 = Z, H^1 = 0, residual."""
    res = SuiteResult("residual-Z")
    t = time.perf_counter()
    E = E_Z(bound)
    primes = [p for p in range(2, bound + 1) if all(p % q for q in range(2, p))]
    res.add("points", E.poset.order == ["η"] + [f"({p})" for p in primes], E.poset.order)
    res.add("terms", [E.modules[x].describe() for x in E.poset.order][0] == "Q", "")
    res.add("cousin", check_cousin(E).ok)
    res.add("residual", is_residual(E).ok)
    H = homology(E)
    res.add("H0 = Z", H[0].free == 1 and not H[0].torsion, (H[0].free, H[0].torsion))
    res.add("H1 = 0", H[1].is_zero(), (H[1].free, H[1].torsion))
    dt = time.perf_counter() - t
    res.add("under one second", dt < 1.0, f"{dt:.3f}s")
    return res


def widening(fn, *args, window: int = WINDOW, limit: int = 48):
    """fn(*args, window), doubling the window while it is too small."""
    while True:
        try:
            return fn(*args, window)
        except WindowTooSmall:
            if window >= limit:
                raise
            window *= 2


def _random_module(rng, ring_names, max_length):
    A = LocalRingDesc.parse(rng.choice(ring_names))
    if A.r:
        return random_zmodule(A, rng, max_length)
    return ZModule.trivial(A, rng.randint(1, max_length))


@_timed
def sign_law(seed: int = 0, count: int = 30) -> SuiteResult:
    """K-reading of a fraction = (-1)^n times its C-reading, n = 1, 2, 3."""
    rng = random.Random(seed)
    res = SuiteResult("sign-law")
    tv = ["T1", "T2", "T3"]
    for n in (1, 2, 3):
        res.add(f"comparison sign n={n}", comparison_signs(n)[n] == (-1) ** n)
        bad = []
        for i in range(count):
            M = _random_module(rng, ["Q", "Q[[u]]"], 4)
            f = random_fraction(rng, M, tv[:n], flavor="K", max_exp=3)
            k, c = widening(koszul_oracle, f), widening(cech_oracle, f)
            if k != c.scale((-1) ** n):
                bad.append(str(f))
            elif n == 1 and widening(normalize, f) != k:
                bad.append(f"normal form of {f}")
        res.add(f"n={n}: {count} instances", not bad, bad[:2])
    return res


def _random_outer(rng):
    M = _random_module(rng, ["Q", "Q[[u]]"], 3)
    i, j = rng.randint(0, 2), rng.randint(0, 2)
    if i + j == 0:
        j = 1
    inner = random_fraction(rng, M, ["T1", "T2"][:i], max_exp=2)
    uv = ("U1", "U2")[:j]
    C = power_series_over(inner.ring, uv)
    return OuterFraction(inner, C, uv, tuple(random_denominators(rng, C, uv, max_exp=2)))


def hypothesis_violations(rng) -> list:
    """Twenty iterated fractions, each breaking one hypothesis: [(expected clause, outer)]."""
    out = []
    A = LocalRingDesc.parse("Q[[u]]")
    for k in range(5):
        # (a): u acts invertibly, so the module is not torsion
        dim = k % 2 + 1
        M = ZModule(A, {"u": [[Q(1 + k) if r == c else Q(0) for c in range(dim)] for r in range(dim)]},
                    check=False)
        inner = make_fraction(M, ["T1"], {0: 1}, [("T1", rng.randint(1, 2))])
        C = power_series_over(inner.ring, ["U1"])
        out.append(("a", OuterFraction(inner, C, ("U1",), (("U1", 1),))))
    for k in range(5):
        # (b): the inner denominators cut out only T1 = 0 modulo u
        M = ZModule.cyclic(A, [(k % 3 + 1,)])
        dens = [("T1", 1), (f"T1^{k % 2 + 2} + u*T2", rng.randint(1, 2))]
        inner = make_fraction(M, ["T1", "T2"], {0: 1}, dens)
        C = power_series_over(inner.ring, ["U1"])
        out.append(("b", OuterFraction(inner, C, ("U1",), (("U1", 1),))))
    for k in range(5):
        # (c): an outer denominator is a unit
        M = ZModule.cyclic(A, [(2,)])
        inner = make_fraction(M, ["T1"], {0: 1}, [("T1 - u", 1)])
        C = power_series_over(inner.ring, ["U1"])
        unit = TruncSeries.parse(f"{k + 1} + U1", Q, C.variables, N=64, D=0)
        out.append(("c", OuterFraction(inner, C, ("U1",), ((unit, 1),))))
    for k in range(5):
        # (c): outer denominators generate only (U1) modulo the inner maximal ideal
        M = ZModule.cyclic(A, [(1,)])
        inner = make_fraction(M, ["T1"], {0: 1}, [("T1", 1)])
        C = power_series_over(inner.ring, ["U1", "U2"])
        dens = (("U1", 1), (f"U1^{k + 1} + T1*U2", 1))
        out.append(("c", OuterFraction(inner, C, ("U1", "U2"), dens)))
    return out


@_timed
def iteration(seed: int = 5, count: int = 50) -> SuiteResult:
    """Iterated fractions against the Koszul oracle; twenty hypothesis violations are rejected."""
    rng = random.Random(seed)
    res = SuiteResult("iteration")
    bad = []
    for _ in range(count):
        outer = _random_outer(rng)
        g = iterate(outer)
        lhs, rhs = widening(two_step_oracle, outer), widening(koszul_oracle, g)
        if lhs != rhs:
            bad.append((str(outer.inner), lhs, rhs))
    res.add(f"{count} instances match", not bad, bad[:2])
    missed = []
    for which, outer in hypothesis_violations(rng):
        try:
            check_iteration_hypotheses(outer, WINDOW)
            missed.append((which, "accepted"))
        except HypothesisFailure as exc:
            if exc.which != which:
                missed.append((which, exc.which))
    res.add("20 violations rejected", not missed, missed)
    return res


def fragment_modules(gens) -> dict:
    mods = {}
    for g in gens:
        A = g.source
        if A in mods:
            continue
        L = [ZModule.trivial(A)]
        if A.r == 1:
            L.append(ZModule.cyclic(A, [(2,)]))
        if A.r == 2:
            L.append(ZModule.cyclic(A, [(2, 0), (1, 1), (0, 2)]))
        mods[A] = L
    return mods


@_timed
def pseudofunctor(depth: int = 3, seed: int = 7, drop_twist: bool = False) -> SuiteResult:
    """Associativity squares and unit triangles on the generator fragment.

    ``drop_twist`` suppresses the twist sign (a debugging aid): failing
    diagrams are reported with their witnesses.
    """
    res = SuiteResult("pseudofunctor" + ("-drop-twist" if drop_twist else ""))
    gens = standard_fragment(Q)
    rng = random.Random(seed)
    mods = fragment_modules(gens)
    for A in mods:
        if A.r:
            mods[A].append(random_zmodule(A, rng, 3))
    rep = check_pseudofunctor(gens, mods, depth, drop_twist=drop_twist)
    fails = [{"chain": e["chain"], "diagram": e["diagram"], "witness": e["witness"][:2],
              "t1=r2=1": _t1_r2(e["chain"], gens)} for e in rep if e["status"] != "pass"]
    res.add(f"{len(rep)} diagrams", not fails, fails)
    return res


def _t1_r2(chain, gens) -> bool:
    """Some step adds a residue-field variable and the next one a series variable."""
    by_label = {g.label(): g for g in gens}
    maps = [by_label[n] for n in chain if n in by_label]
    return any(a.t == 1 and b.r == 1 for a, b in zip(maps, maps[1:]))


@_timed
def retract(seed: int = 3, count: int = 12) -> SuiteResult:
    """pi# f# M -> M through res equals the unit map; sections of A^1 over a point."""
    rng = random.Random(seed)
    res = SuiteResult("retract")
    bad = []
    for _ in range(count):
        A = LocalRingDesc.parse(rng.choice(["Q", "Q[[u]]"]))
        M = random_zmodule(A, rng, 4) if A.r else ZModule.trivial(A, rng.randint(1, 4))
        V = ("V1", "V2")[:rng.randint(1, 2)]
        f = smooth_map(A, V)
        pi = quotient_map(LocalRingDesc(Q, A.variables + V), kill=V)
        if not retract_identity(f, pi, M):
            bad.append((A.name(), M.dim, V))
    res.add(f"{count} modules", not bad, bad)
    P = point_complex(1)
    for c in (0, 2):
        r = check_factorization_independence("section", P, c=c)
        res.add(f"section T = {c}", r.ok, r.violations[:2])
    r = check_factorization_independence("sections", point_complex(2), cs=(0, 3))
    res.add("two sections", r.ok, r.violations[:2])
    return res


@_timed
def base_change() -> SuiteResult:
    res = SuiteResult("base-change")
    r = check_factorization_independence("base-change", E_Qy(), prime="y")
    res.add("A^1 over Q[y] at y = 0", r.ok, r.violations[:2])
    r = check_factorization_independence("section", E_Qy(), c=0)
    res.add("section T = 0 over Q[y]", r.ok, r.violations[:2])
    return res


@_timed
def translation() -> SuiteResult:
    res = SuiteResult("translation")
    A = SchemeMapDesc.smooth_a1("T", 1)
    E = E_Qy()
    fixtures = {"point": point_complex(2), "E(Q[y])": E, "closed fiber": E.restrict(["(y)"])}
    for name, C in fixtures.items():
        bad = [n for n in range(-2, 3) if not translate_iso(A, C, n).check(1).ok]
        res.add(f"{name}: chain maps", not bad, bad)
        for m, n in ((1, 1), (-1, 2)):
            res.add(f"{name}: additivity ({m},{n})", translation_additivity(A, C, m, n).ok)
    U = SchemeMapDesc.smooth_a1("U", 1)
    for n in (1, 2):
        res.add(f"composite n={n}", translation_composite(U, A, point_complex(1), n).ok)
    return res


@_timed
def residual() -> SuiteResult:
    """f-flat, f-sharp and kappa-sharp keep E(Z) and E(Q[y]) residual."""
    res = SuiteResult("residual")
    A = SchemeMapDesc.smooth_a1("T", 1)
    EZ, EY = E_Z(7), E_Qy()
    SZ = f_sharp_smooth(A, EZ)
    cases = {
        "flat Z/3 on E(Z)": f_flat(SchemeMapDesc.closed_immersion("3"), EZ),
        "flat Z/9 on E(Z)": f_flat(SchemeMapDesc.closed_immersion("9"), EZ),
        "sharp A^1 on E(Z)": SZ,
        "kappa at (3) on E(Z)": kappa_sharp(SchemeMapDesc.localization("(3)"), EZ),
        "completion at (5) on E(Z)": kappa_sharp(SchemeMapDesc.completion("(5)"), EZ),
        "open on E(Z)": kappa_sharp(SchemeMapDesc.open(["η"]), EZ),
        "kappa on sharp E(Z)": kappa_sharp(SchemeMapDesc.localization("(3)|(T)"), SZ),
        "flat y on E(Q[y])": f_flat(SchemeMapDesc.closed_immersion("y"), EY),
        "sharp A^1 on E(Q[y])": f_sharp_smooth(A, EY),
        "kappa at (y) on E(Q[y])": kappa_sharp(SchemeMapDesc.localization("(y)"), EY),
    }
    for name, C in cases.items():
        r = is_residual(C, 1 if "sharp A^1 on E(Q" in name else 2)
        res.add(name, r.ok, r.violations[:2])
    return res


@_timed
def cm_eta() -> SuiteResult:
    res = SuiteResult("cm-eta")
    A = SchemeMapDesc.smooth_a1("T", 1)
    P = point_complex(1)
    E = E_Qy()
    res.add("CM: sharp over a point", is_CM_koszul(f_sharp_smooth(A, P), 1).ok)
    res.add("CM: sharp over E(Q[y])", is_CM_koszul(f_sharp_smooth(A, E), 1).ok)
    res.add("CM: sharp over E(Z)", is_CM(f_sharp_smooth(A, E_Z(5))).ok)
    for name, C in (("point", P), ("closed fiber", E.restrict(["(y)"]))):
        r = eta_f(A, C).report(2)
        res.add(f"eta on A^1 over the {name}", r.ok, r.scope)
    return res


@_timed
def matlis(seed: int = 11, count: int = 20) -> SuiteResult:
    rng = random.Random(seed)
    res = SuiteResult("matlis")
    rings = ["Q[[T]]", "Q[[T1,T2]]", "Q[[T1,T2]]/(T1^3,T1*T2,T2^2)", "Q[[T1,T2]]/(T1^2,T2^3)"]
    bad = []
    for i in range(count):
        R = LocalRingDesc.parse(rings[0] if i < count // 2 else rng.choice(rings[1:]))
        M = random_zmodule(R, rng, 5)
        _, lenD, lenDD, iso = double_dual_evaluation(M)
        if not (iso and lenD == lenDD == M.dim):
            bad.append((R.name(), M.dim, lenD, lenDD))
    res.add(f"{count} double duals", not bad, bad)
    return res


@_timed
def exactness(seed: int = 1, count: int = 10) -> SuiteResult:
    rng = random.Random(seed)
    res = SuiteResult("exactness")
    A = SchemeMapDesc.smooth_a1("T", 1)
    bad = []
    for i in range(count):
        E1, E2, E3, al, be = random_exact_instance(QY, rng, 1)
        if not is_termwise_exact(E1, E2, E3, al, be, 1).ok:
            bad.append((i, "input"))
            continue
        S1, S2, S3 = (f_sharp_smooth(A, e) for e in (E1, E2, E3))
        if not is_termwise_exact(S1, S2, S3, sharp_morphism(S1, S2, al), sharp_morphism(S2, S3, be), 1).ok:
            bad.append((i, "sharp"))
    res.add(f"{count} short exact sequences", not bad, bad)
    for name, C in (("E(Q[y])", E_Qy()), ("point", point_complex(2))):
        r = filtration_report(A, C)
        res.add(f"filtrations on {name}", r.ok, r.violations[:2])
    return res


SUITES = {
    "residual-Z": residual_Z,
    "sign-law": sign_law,
    "iteration": iteration,
    "pseudofunctor": pseudofunctor,
    "retract": retract,
    "base-change": base_change,
    "translation": translation,
    "residual": residual,
    "cm-eta": cm_eta,
    "matlis": matlis,
    "exactness": exactness,
}

# acceptance criterion -> suite name
CRITERIA = {1: "residual-Z", 2: "sign-law", 3: "iteration", 4: "pseudofunctor", 5: "retract",
            6: "base-change", 7: "translation", 8: "residual", 9: "cm-eta", 10: "matlis", 11: "exactness"}
