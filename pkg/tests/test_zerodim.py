import random

import pytest
from hypothesis import given, strategies as st

from cousinforge.errors import ModelMismatch, ParseError
from cousinforge.exact import linalg
from cousinforge.exact.fields import FieldDesc
from cousinforge.exact.pid import PIDDesc
from cousinforge.zerodim import (LocalRingDesc, TorsionModule, ZModule, double_dual_evaluation, find_isomorphism,
                                 is_injective_hull, matlis_dual, random_zmodule)

Q = FieldDesc.rationals()


@pytest.mark.parametrize("text", ["Q", "Q[[T]]", "Q[[T,U]]/(T^2,T*U)", "F5[[T1,T2]]/(T1^3)", "Q(X)[[T]]"])
def test_ring_parse_roundtrip(text):
    R = LocalRingDesc.parse(text)
    assert LocalRingDesc.parse(R.name()) == R
    assert LocalRingDesc.from_json(R.to_json()) == R


def test_ring_parse_errors():
    with pytest.raises(ParseError):
        LocalRingDesc.parse("Q[[T]")
    with pytest.raises(ParseError):
        LocalRingDesc.from_json({"variables": ["T"]})


def test_artinian_length():
    R = LocalRingDesc.parse("Q[[T,U]]/(T^2,T*U,U^3)")
    # 1, T, U, U^2
    assert R.is_artinian() and R.length() == 4
    assert not LocalRingDesc.parse("Q[[T,U]]/(T^2)").is_artinian()


def test_cyclic_module_structure():
    R = LocalRingDesc.parse("Q[[T1,T2]]")
    M = ZModule.cyclic(R, [(2, 0), (0, 2)])
    assert M.dim == 4 and M.labels == ["1", "T1", "T2", "T1*T2"]
    assert M.socle().dim == 1
    assert not M.validate()


def test_non_nilpotent_action_rejected():
    R = LocalRingDesc.parse("Q[[u]]")
    with pytest.raises(ModelMismatch):
        ZModule(R, {"u": [[1]]})
    assert ZModule(R, {"u": [[1]]}, check=False).validate()


def test_hull_of_artinian_ring():
    R = LocalRingDesc.parse("Q[[T]]/(T^3)")
    E = matlis_dual(ZModule.cyclic(R, []))
    assert is_injective_hull(E).is_hull
    assert not is_injective_hull(ZModule.trivial(R, 2)).is_hull


def test_torsion_module_hull():
    Z = PIDDesc.integers()
    assert is_injective_hull(TorsionModule(Z, 3, (), 1)).is_hull
    assert not is_injective_hull(TorsionModule(Z, 3, (2,), 1)).is_hull
    T = TorsionModule(Z, 5, (3, 1), 2)
    assert T.socle_dim() == 4 and T.annihilator(2).cyclic == (2, 2, 2, 1)
    assert TorsionModule.from_json(T.to_json()) == T


def test_matlis_dual_swaps_socle_and_top():
    R = LocalRingDesc.parse("Q[[T1,T2]]")
    # R/(T1^2, T1*T2, T2^2): socle of dim 2, cyclic; its dual has simple socle, two generators
    M = ZModule.cyclic(R, [(2, 0), (1, 1), (0, 2)])
    D = matlis_dual(M)
    assert M.socle().dim == 2 and D.socle().dim == 1


@given(st.integers(0, 10 ** 6))
def test_double_dual_iso(seed):
    rng = random.Random(seed)
    R = LocalRingDesc.parse(rng.choice(["Q[[T]]", "Q[[T1,T2]]", "Q[[T1,T2]]/(T1^2)"]))
    M = random_zmodule(R, rng, 5)
    _, lenD, lenDD, iso = double_dual_evaluation(M)
    assert iso and lenD == lenDD == M.dim


@given(st.integers(0, 10 ** 6))
def test_conjugate_is_isomorphic(seed):
    rng = random.Random(seed)
    R = LocalRingDesc.parse("Q[[T1,T2]]")
    M = random_zmodule(R, rng, 4, conjugate=False)
    while True:
        P = linalg.as_matrix(Q, [[Q(rng.randint(-2, 2)) for _ in range(M.dim)] for _ in range(M.dim)])
        if linalg.is_invertible(Q, P):
            break
    N = M.conjugate(P)
    phi = find_isomorphism(M, N)
    assert phi is not None and phi.is_iso()


def test_non_isomorphic_modules():
    R = LocalRingDesc.parse("Q[[T]]")
    assert find_isomorphism(ZModule.cyclic(R, [(2,)]), ZModule.trivial(R, 2)) is None


def test_module_json_roundtrip():
    R = LocalRingDesc.parse("Q[[T,U]]")
    M = random_zmodule(R, random.Random(2), 4)
    N = ZModule.from_json(M.to_json())
    assert N.to_json() == M.to_json()
