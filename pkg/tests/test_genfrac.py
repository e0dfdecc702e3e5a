import random

import pytest
from hypothesis import given, strategies as st

from cousinforge import signs
from cousinforge.errors import HypothesisFailure, NotSystemOfParameters, ParseError, WindowTooSmall
from cousinforge.exact.fields import FieldDesc
from cousinforge.genfrac import (OuterFraction, cech_oracle, comparison_signs, convert_flavor, iterate,
                                 koszul_oracle, make_fraction, normalize, parse_fraction, power_series_over,
                                 random_fraction, check_iteration_hypotheses, two_step_oracle)
from cousinforge.suites import hypothesis_violations, widening
from cousinforge.zerodim import LocalRingDesc, ZModule, random_zmodule

Q = FieldDesc.rationals()
K = LocalRingDesc(Q)
Au = LocalRingDesc.parse("Q[[u]]")


def frac(M, tvars, num, dens, flavor="C"):
    return make_fraction(M, tvars, num, dens, flavor)


# hand-computed classes; keys are (basis index, exponent tuple)

def test_geometric_expansion_over_dual_numbers():
    # 1/(T - u) = sum u^k / T^(k+1), and u^2 = 0
    M = ZModule.cyclic(Au, [(2,)])
    f = frac(M, ["T"], {0: 1}, [("T - u", 1)])
    expected = {(0, (1,)): 1, (1, (2,)): 1}
    assert normalize(f) == expected
    assert cech_oracle(f) == expected


def test_unit_factor_drops_out():
    # 1/(T (1 + T)) has negative part 1/T; 1/(T^2 (1 + T)^2) = 1/T^2 - 2/T + ...
    assert normalize(frac(ZModule.trivial(K), ["T"], {0: 1}, [("T + T^2", 1)])) == {(0, (1,)): 1}
    assert normalize(frac(ZModule.trivial(K), ["T"], {0: 1}, [("T + T^2", 2)])) == {(0, (2,)): 1, (0, (1,)): -2}


def test_numerator_cancels_denominator():
    f = frac(ZModule.trivial(K), ["T"], {(0, (1,)): 1}, [("T", 2)])
    assert normalize(f) == {(0, (1,)): 1}
    g = frac(ZModule.trivial(K), ["T"], {(0, (2,)): 1}, [("T", 2)])
    assert normalize(g).is_zero()


def test_transformation_law_two_variables():
    # (T1 + T2, T2) = C (T1, T2) with det C = 1
    M = ZModule.trivial(K)
    f = frac(M, ["T1", "T2"], {0: 1}, [("T1 + T2", 1), ("T2", 1)])
    assert normalize(f) == {(0, (1, 1)): 1}
    # swapping the denominators changes the sign
    g = frac(M, ["T1", "T2"], {0: 1}, [("T2", 1), ("T1", 1)])
    assert normalize(g) == {(0, (1, 1)): -1}
    # [T1 / T1^2, T2] = [1 / T1, T2]
    h = frac(M, ["T1", "T2"], {(0, (1, 0)): 1}, [("T1", 2), ("T2", 1)])
    assert normalize(h) == {(0, (1, 1)): 1}


def test_flavor_sign():
    M = ZModule.trivial(K)
    for n, tv in ((1, ["T"]), (2, ["T1", "T2"])):
        fk = frac(M, tv, {0: 1}, [(t, 1) for t in tv], flavor="K")
        c = cech_oracle(fk)
        assert koszul_oracle(fk) == c.scale(signs.flavor(n))
        assert normalize(fk) == c.scale((-1) ** n)
        # flavor conversion keeps the class
        assert koszul_oracle(convert_flavor(fk)) == koszul_oracle(fk)


def test_comparison_signs_are_alternating():
    for n in (1, 2, 3):
        assert comparison_signs(n)[n] == (-1) ** n


def test_not_a_system_of_parameters():
    with pytest.raises(NotSystemOfParameters):
        frac(ZModule.trivial(K), ["T"], {0: 1}, [("1 + T", 1)])
    with pytest.raises(NotSystemOfParameters):
        normalize(frac(ZModule.trivial(K), ["T1", "T2"], {0: 1}, [("T1", 1), ("T1^2", 1)]))


def test_window_too_small():
    f = frac(ZModule.trivial(K), ["T"], {0: 1}, [("T", 6)])
    with pytest.raises(WindowTooSmall):
        cech_oracle(f, 3)
    assert cech_oracle(f, 8) == {(0, (6,)): 1}


def test_parse_grammar():
    M = ZModule.cyclic(Au, [(2,)])
    B = power_series_over(Au, ["T"])
    f = parse_fraction("[e0 ⊗ dT / (T - u)^2]#K", M, B, ["T"])
    assert f.flavor == "K" and f.omega == "dT" and f.denominators[0][1] == 2
    for bad in ("[e0 / T", "[1 / T]", "[e0 / T]#Z"):
        with pytest.raises(ParseError):
            parse_fraction(bad, M, B, ["T"])


@given(st.integers(0, 10 ** 6))
def test_print_parse_roundtrip(seed):
    rng = random.Random(seed)
    M = random_zmodule(Au, rng, 3)
    f = random_fraction(rng, M, ["T1", "T2"][:rng.randint(1, 2)], flavor=rng.choice("CK"), t_degree=1)
    g = parse_fraction(str(f), M, f.ring, f.tvars)
    assert g.numerator == f.numerator and g.flavor == f.flavor
    assert [(str(s), a) for s, a in g.denominators] == [(str(s), a) for s, a in f.denominators]


@given(st.integers(0, 10 ** 6), st.integers(-3, 3))
def test_normal_form_is_linear(seed, c):
    rng = random.Random(seed)
    M = random_zmodule(Au, rng, 3)
    f = random_fraction(rng, M, ["T"], max_exp=3)
    assert widening(normalize, f.scaled(c)) == widening(normalize, f).scale(c)


@given(st.integers(0, 10 ** 6))
def test_normal_form_matches_cech_oracle(seed):
    rng = random.Random(seed)
    A = LocalRingDesc.parse(rng.choice(["Q", "Q[[u]]", "Q[[u,v]]"]))
    M = random_zmodule(A, rng, 3) if A.r else ZModule.trivial(A, rng.randint(1, 2))
    f = random_fraction(rng, M, ["T1", "T2"][:rng.randint(1, 2)], max_exp=2)
    assert widening(normalize, f) == widening(cech_oracle, f)


def test_iteration_simple():
    inner = frac(ZModule.trivial(K), ["T"], {0: 1}, [("T", 2)])
    C = power_series_over(inner.ring, ["U"])
    outer = OuterFraction(inner, C, ("U",), (("U", 1),))
    g = iterate(outer)
    assert koszul_oracle(g) == {(0, (2, 1)): 1}
    assert two_step_oracle(outer) == koszul_oracle(g)


@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 3), st.integers(0, 3))
def test_iteration_sign_independent_of_shifts(a, b, p, q):
    assert signs.iterate_shift_sign(a, b, p, q) == signs.iterate_shift_sign(0, 0, p, q)


def test_iteration_result_independent_of_shifts():
    rng = random.Random(8)
    M = random_zmodule(Au, rng, 3)
    inner = random_fraction(rng, M, ["T1"], max_exp=2)
    C = power_series_over(inner.ring, ["U1"])
    outer = OuterFraction(inner, C, ("U1",), (("U1 + T1*U1", 2),))
    base = iterate(outer).numerator
    for a in range(-2, 3):
        for b in range(-2, 3):
            assert iterate(outer, shifts=(a, b)).numerator == base


def test_hypothesis_violations_are_rejected():
    cases = hypothesis_violations(random.Random(0))
    assert len(cases) == 20
    for which, outer in cases:
        with pytest.raises(HypothesisFailure) as info:
            check_iteration_hypotheses(outer)
        assert info.value.which == which
        with pytest.raises(HypothesisFailure):
            iterate(outer)
