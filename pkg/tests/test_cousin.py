from fractions import Fraction

import pytest

from cousinforge.cousin import (CousinComplex, ModulePresentation, check_cousin, cousin_E_pid, homology,
                                homology_json, is_CM, is_residual, module_is_CM, same_complex)
from cousinforge.errors import ParseError
from cousinforge.exact.fields import FieldDesc
from cousinforge.exact.pid import PIDDesc, PrimeBound
from cousinforge.variance import SchemeMapDesc, f_sharp_smooth

Z = PIDDesc.integers()
QY = PIDDesc.poly(FieldDesc.rationals(), "y")


@pytest.fixture(scope="module")
def EZ():
    return cousin_E_pid(Z, 1, 7)


def test_EZ_shape(EZ):
    assert EZ.poset.order == ["η", "(2)", "(3)", "(5)", "(7)"]
    assert {x: EZ.delta[x] for x in EZ.poset.order} == {"η": 0, "(2)": 1, "(3)": 1, "(5)": 1, "(7)": 1}
    assert EZ.modules["η"].describe() == "Q"


def test_EZ_homology_frozen(EZ):
    assert homology_json(homology(EZ)) == homology_json(homology(cousin_E_pid(Z, 1, 7)))
    H = homology(EZ)
    assert (H[0].free, H[0].torsion, H[1].free, H[1].torsion) == (1, [], 0, [])


def test_EZ_coboundary_is_class_map(EZ):
    L = EZ.modules["(3)"]
    a = (Fraction(5, 18),)
    assert L.is_zero(L.sub(EZ.d("η", "(3)", a), L.free_unit(0, Fraction(7, 9))))
    assert L.is_zero(EZ.d("η", "(2)", (Fraction(1, 9),)))


def test_EZ_residual(EZ):
    assert check_cousin(EZ) and is_residual(EZ) and is_CM(EZ)


def test_torsion_homology():
    M = ModulePresentation(Z, 2, (12,))
    H = homology(cousin_E_pid(Z, M, 7))
    assert (H[0].free, H[1].free, sorted(H[1].torsion)) == (2, 0, ["3", "4"])
    # the torsion layer is not an injective hull
    assert not is_residual(cousin_E_pid(Z, M, 7))


def test_EQy_residual():
    E = cousin_E_pid(QY, 1, PrimeBound(1, 1))
    assert is_residual(E)
    assert homology(E)[1].is_zero()


def test_presentation_from_rows():
    M = ModulePresentation.from_rows(Z, 3, [[2, 0, 0], [0, 6, 0]])
    assert (M.rank, sorted(M.invariants)) == (1, [2, 6])
    assert M.primary() == {2: [1, 1], 3: [1]}
    assert ModulePresentation.from_json(M.to_json()) == M
    with pytest.raises(ParseError):
        ModulePresentation.from_rows(Z, 2, [[1]])


def test_module_is_CM():
    assert module_is_CM(ModulePresentation(Z, 1), 0)
    assert module_is_CM(ModulePresentation(Z, 0, (3,)), 1)
    assert not module_is_CM(ModulePresentation(Z, 0, (3,)), 0)
    assert not module_is_CM(ModulePresentation(Z, 1, (3,)), 0)


def test_shift_restrict(EZ):
    S = EZ.shift(1)
    assert S.delta["η"] == -1 and S.delta["(5)"] == 0
    L = EZ.modules["(5)"]
    a = (Fraction(1, 5),)
    assert L.is_zero(L.add(S.d("η", "(5)", a), EZ.d("η", "(5)", a)))
    assert same_complex(EZ.shift(1).shift(-1), EZ, 2)
    R = EZ.restrict(["(3)"])
    assert R.poset.order == ["(3)"] and is_residual(R)


def test_dot(EZ):
    dot = EZ.poset.to_dot(EZ.delta)
    assert dot.startswith("digraph") and '"η" -> "(3)"' in dot


def test_sabotaged_coboundary_is_caught():
    A = SchemeMapDesc.smooth_a1("T", 1)
    S = f_sharp_smooth(A, cousin_E_pid(QY, 1, PrimeBound(1, 1)))
    assert check_cousin(S, 1)
    cob = dict(S.coboundaries)
    key = next(c for c in cob if S.delta[c[0]] == -1 and S.delta[c[1]] == 0)
    M = S.modules[key[1]]
    f = cob[key]
    cob[key] = lambda a: M.scale(2, f(a))
    bad = CousinComplex(S.poset, S.delta, S.modules, cob, S.meta)
    rep = check_cousin(bad, 1)
    assert not rep and rep.violations[0][0] == "square-zero"
