import random
from fractions import Fraction

import pytest

from cousinforge.cousin import (CousinComplex, ModulePresentation, check_cousin, cousin_E_pid, homology, is_CM,
                                is_residual, same_complex)
from cousinforge.errors import UnsupportedRing
from cousinforge.exact.fields import FieldDesc
from cousinforge.exact.pid import PIDDesc, PrimeBound
from cousinforge.variance import (SchemeMapDesc, check_factorization_independence, eta_f, f_flat, f_sharp_smooth,
                                  filtration_report, gamma_I, is_CM_koszul, kappa_sharp, point_complex, pp_closed,
                                  translate_iso, translation_additivity)

Q = FieldDesc.rationals()
Z = PIDDesc.integers()
QY = PIDDesc.poly(Q, "y")
QT = PIDDesc.poly(Q, "T")
A1 = SchemeMapDesc.smooth_a1("T", 1)


@pytest.fixture(scope="module")
def EQy():
    return cousin_E_pid(QY, 1, PrimeBound(1, 1))


@pytest.fixture(scope="module")
def EZ():
    return cousin_E_pid(Z, 1, 7)


def T(expr):
    return QT.frac(QT.decode(expr))


def test_pp_closed_hand_values():
    assert pp_closed(QT, T("1") / T("2*T"), 2, 0) == {1: Fraction(1, 2)}
    assert pp_closed(QT, T("1") / T("4*T + 8"), 2, 0) == {1: Fraction(1, 4), 2: Fraction(1, 2)}
    assert pp_closed(QT, T("1") / T("3*T - 3"), 3, 1) == {1: Fraction(1, 3)}
    # no pole along T - c, or no p in the denominator
    assert pp_closed(QT, T("1") / T("3*T - 3"), 3, 0) == {}
    assert pp_closed(QT, T("1") / T("T"), 3, 0) == {}


def test_sharp_point():
    S = f_sharp_smooth(A1, point_complex(1))
    assert check_cousin(S, 2) and is_residual(S, 2) and is_CM(S, 1)
    H = homology(S, 2)
    assert (H[-1].free, H[0].is_zero()) == (1, True)


def test_sharp_Qy(EQy):
    S = f_sharp_smooth(A1, EQy)
    assert len(S.poset.order) == 16
    assert check_cousin(S, 1) and is_residual(S, 1)


def test_sharp_over_Z(EZ):
    S = f_sharp_smooth(A1, EZ)
    assert S.meta["regime"] == "A1-over-Z"
    assert len(S.poset.order) == 25
    assert sum(1 for x in S.poset.order if S.delta[x] == 1) == 17
    assert check_cousin(S, 2) and is_residual(S, 2)


def test_sharp_over_Z_shifted(EZ):
    S = f_sharp_smooth(A1, EZ.shift(1))
    assert check_cousin(S, 2)


def test_sharp_over_Z_sign_sabotage(EZ):
    S = f_sharp_smooth(A1, EZ)
    for key in [("η|η_T", "(3)|η_T"), ("(3)|η_T", "(3)|(T - 1)")]:
        cob = dict(S.coboundaries)
        f, M = cob[key], S.modules[key[1]]
        cob[key] = lambda a, f=f, M=M: M.scale(-1, f(a))
        assert not check_cousin(CousinComplex(S.poset, S.delta, S.modules, cob, S.meta), 2), key


def test_sharp_over_Z_needs_rank_one():
    with pytest.raises(UnsupportedRing):
        f_sharp_smooth(A1, cousin_E_pid(Z, ModulePresentation(Z, 1, (3,)), 3))


def test_kappa_over_Z(EZ):
    for k in (SchemeMapDesc.localization("(3)"), SchemeMapDesc.completion("(3)"), SchemeMapDesc.identity()):
        assert is_residual(kappa_sharp(k, EZ), 2), k.kind
    C = kappa_sharp(SchemeMapDesc.open(["η"]), EZ)
    assert C.poset.order == ["η"]
    assert gamma_I(kappa_sharp(SchemeMapDesc.completion("(3)"), EZ), "(3)").poset.order == ["(3)"]


def test_flat(EZ):
    C = f_flat(SchemeMapDesc.closed_immersion("3"), EZ)
    assert is_residual(C, 2)
    C9 = f_flat(SchemeMapDesc.closed_immersion("3"), f_flat(SchemeMapDesc.closed_immersion("9"), EZ))
    assert same_complex(C9, C, 3)
    Ct = cousin_E_pid(Z, ModulePresentation(Z, 0, (3,)), 3)
    assert is_residual(f_flat(SchemeMapDesc.closed_immersion("3"), Ct), 2)


def test_translation(EQy):
    for fx in (point_complex(2), EQy.restrict(["(y)"])):
        assert all(translate_iso(A1, fx, n).check(1) for n in range(-2, 3))
        assert translation_additivity(A1, fx, 1, 1) and translation_additivity(A1, fx, -1, 2)


def test_sections_and_base_change(EQy):
    assert check_factorization_independence("section", EQy, c=0)
    assert check_factorization_independence("sections", point_complex(2), cs=(0, 3))
    assert check_factorization_independence("base-change", EQy, prime="y")


def test_eta_and_cm(EQy):
    assert eta_f(A1, point_complex(1)).report(2)
    assert eta_f(A1, EQy.restrict(["(y)"])).report(2)
    assert is_CM_koszul(f_sharp_smooth(A1, point_complex(1)), 1)


def test_filtration_point():
    assert filtration_report(A1, point_complex(2))


def test_scheme_map_json():
    for f in (A1, SchemeMapDesc.closed_immersion("3"), SchemeMapDesc.section(2), SchemeMapDesc.open(["η"])):
        assert SchemeMapDesc.from_json(f.to_json()) == f
