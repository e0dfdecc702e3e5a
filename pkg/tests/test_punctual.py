import random

import pytest

from cousinforge.errors import ModelMismatch
from cousinforge.exact.fields import FieldDesc
from cousinforge.punctual import (RingMapDesc, associativity, check_pseudofunctor, compose_sharp, identity_map,
                                  quotient_map, retract_identity, smooth_map, standard_fragment, unit_delta,
                                  unit_triangles)
from cousinforge.suites import fragment_modules
from cousinforge.zerodim import LocalRingDesc, ZModule, random_zmodule

Q = FieldDesc.rationals()
R0, R1, R2 = LocalRingDesc(Q), LocalRingDesc(Q, ("T",)), LocalRingDesc(Q, ("T", "U"))


@pytest.fixture(scope="module")
def fragment():
    gens = standard_fragment(Q)
    return gens, fragment_modules(gens)


def test_fragment_shape(fragment):
    gens, _ = fragment
    kinds = {g.label(): g.kind for g in gens}
    assert kinds["σTU"] == "smooth" and kinds["πU"] == "surjection"
    assert max(g.r for g in gens) == 2
    assert sum(1 for g in gens if g.t) == 2


def test_map_json_roundtrip(fragment):
    gens, _ = fragment
    for g in gens:
        assert RingMapDesc.from_json(g.to_json()) == g


def test_pseudofunctor_holds(fragment):
    gens, mods = fragment
    rep = check_pseudofunctor(gens, mods, 3)
    assert rep and all(e["status"] == "pass" for e in rep)
    assert {e["diagram"] for e in rep} == {"unit", "invertible", "associativity"}


def test_dropped_twist_is_caught(fragment):
    gens, mods = fragment
    rep = check_pseudofunctor(gens, mods, 3, drop_twist=True)
    bad = [e for e in rep if e["status"] == "fail"]
    assert bad and all(e["witness"] for e in bad)
    assert ["ℓ0", "σTX", "πTX"] in [e["chain"] for e in bad]


def test_unit_triangles_on_quotient():
    q = quotient_map(R2, relations=[(1, 1)])
    ok, witness = unit_triangles(q, ZModule.cyclic(R2, [(2, 0), (0, 1)]))
    assert ok, witness


def test_unit_delta_is_identity():
    M = random_zmodule(R2, random.Random(1), 4)
    D = unit_delta(M)
    assert D.is_iso() and D.matrix.to_Matrix() == identity_matrix(M).to_Matrix()


def identity_matrix(M):
    from cousinforge.exact import linalg
    return linalg.eye(M.field, M.dim)


def test_retract_identity():
    s, p = smooth_map(R0, ("T", "U")), quotient_map(R2, kill=("T", "U"))
    assert retract_identity(s, p, ZModule.trivial(R0, 3))
    s, p = smooth_map(R1, ("U",)), quotient_map(R2, kill=("U",))
    assert retract_identity(s, p, ZModule.cyclic(R1, [(3,)]))


def test_retract_requires_a_retraction():
    s, p = smooth_map(R1, ("U",)), quotient_map(R2, kill=("T",))
    with pytest.raises(ModelMismatch):
        retract_identity(s, p, ZModule.trivial(R1))


def test_associativity_chain():
    f, g, h = smooth_map(R0, ("T",)), smooth_map(R1, ("U",)), quotient_map(R2, kill=("U",))
    ok, witness = associativity(f, g, h, ZModule.trivial(R0, 2))
    assert ok, witness
