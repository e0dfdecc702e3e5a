import random

import pytest
import sympy
from hypothesis import given, strategies as st
from sympy.matrices.normalforms import smith_normal_form

from cousinforge.exact import linalg
from cousinforge.exact.fields import FieldDesc
from cousinforge.exact.pid import PIDDesc, PrimeBound
from cousinforge.exact.series import TruncSeries, default_window
from cousinforge.exact.smith import SmithForm, cohomology_of_free_complex, smith_diagonal

Q = FieldDesc.rationals()
Z = PIDDesc.integers()
QY = PIDDesc.poly(Q, "y")


@pytest.mark.parametrize("text", ["Q", "F5", "Q(X)", "F3(X,Y)"])
def test_field_parse_and_json(text):
    F = FieldDesc.parse(text)
    assert FieldDesc.from_json(F.to_json()) == F
    assert FieldDesc.parse(F.name()) == F


def test_field_encode_roundtrip():
    F = FieldDesc.parse("Q(X)")
    x = F.var("X")
    for v in (F(0), F(3), x / (x + 1), (x ** 2 - 2) / 7):
        assert F.decode(F.encode(v)) == v


def test_finite_field_arithmetic():
    F = FieldDesc.prime(5)
    assert F(3) * F(2) == F(1)
    assert F.characteristic == 5


def test_series_inverse_geometric():
    T = TruncSeries.parse("1 - T", Q, ("T",), N=10, D=0)
    inv = T.inverse()
    assert all(inv.coeffs[(k,)] == 1 for k in range(10))
    assert (T * inv).with_window(10) == TruncSeries.const(Q, ("T",), 1, N=10, D=0)


def test_series_parse_and_power():
    s = TruncSeries.parse("T + U", Q, ("T", "U"), N=6, D=0)
    sq = s ** 2
    assert sq.coeffs == {(2, 0): 1, (1, 1): 2, (0, 2): 1}
    assert s.total_order() == 1 and not s.is_unit()


def test_default_window_env(monkeypatch):
    monkeypatch.setenv("COUSINFORGE_WINDOW", "5,7")
    assert default_window() == (5, 7)
    monkeypatch.setenv("COUSINFORGE_WINDOW", "9")
    assert default_window() == (9, 9)
    monkeypatch.delenv("COUSINFORGE_WINDOW")
    assert default_window() == (8, 8)


small = st.integers(-6, 6)


@given(st.integers(1, 3), st.integers(1, 3), st.data())
def test_smith_diagonal_matches_sympy(m, n, data):
    rows = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    ours = [abs(int(d)) for d in smith_diagonal(Z, rows)]
    ref = smith_normal_form(sympy.Matrix(rows), domain=sympy.ZZ)
    theirs = [abs(int(ref[i, i])) for i in range(min(m, n)) if ref[i, i] != 0]
    assert ours == theirs


def test_smith_form_transforms():
    rows = [[2, 4, 4], [-6, 6, 12], [10, -4, -16]]
    F = SmithForm(Z, rows)
    assert [abs(int(d)) for d in F.diagonal] == [2, 6, 12]
    UA = [[sum(F.U[i][k] * rows[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    S = [[sum(UA[i][k] * F.V[k][j] for k in range(3)) for j in range(3)] for i in range(3)]
    assert all(S[i][j] == 0 for i in range(3) for j in range(3) if i != j)


def test_smith_over_polynomials():
    y = QY.gen
    diag = smith_diagonal(QY, [[y ** 2, QY.zero], [QY.zero, y * (y + 1)]])
    assert [QY.encode(d) for d in diag] == ["y", "y**3 + y**2"]


def test_cohomology_of_free_complex():
    # Z --2--> Z: H^0 = 0, H^1 = Z/2
    H = cohomology_of_free_complex(Z, {0: 1, 1: 1}, {0: [[2]]})
    assert H[0] == {"free": 0, "torsion": []}
    assert [int(t) for t in H[1]["torsion"]] == [2]


@given(st.lists(st.lists(st.integers(-3, 3), min_size=4, max_size=4), min_size=1, max_size=4))
def test_nullspace_against_sympy(rows):
    A = linalg.as_matrix(Q, [[Q(x) for x in r] for r in rows])
    assert linalg.rank(Q, A) == sympy.Matrix(rows).rank()
    for v in linalg.nullspace(Q, A):
        assert all(x == 0 for x in linalg.matvec(A, v))
    assert len(linalg.nullspace(Q, A)) == 4 - sympy.Matrix(rows).rank()


def test_primes_enumeration():
    assert [int(p) for p in Z.primes(12)] == [2, 3, 5, 7, 11]
    names = sorted(QY.encode(p) for p in QY.primes(PrimeBound(1, 2)))
    assert "y" in names and "y**2 + 1" in names and "y**2 + y + 1" in names
    assert all(QY.is_prime(p) for p in QY.primes(PrimeBound(1, 2)))


def test_partial_fractions_sum_back():
    rng = random.Random(4)
    y = QY.gen
    for _ in range(10):
        q = QY.random_frac(rng, [y, y + 1, y ** 2 + 1], 2)
        poly, parts = QY.partial_fractions(q)
        total = QY.frac(poly)
        for p, digits in parts.items():
            total += QY.pp_value({p: digits})
        assert total == q


def test_xgcd_and_inverse_mod():
    a, b = QY.decode("y^3 - 1"), QY.decode("y^2 + 1")
    g, s, t = QY.xgcd(a, b)
    assert s * a + t * b == g and QY.is_unit(g)
    inv = QY.inverse_mod(a, b)
    assert QY.mod(inv * a, b) == QY.one
    assert Z.inverse_mod(3, 7) * 3 % 7 == 1


@pytest.mark.parametrize("text", ["Z", "Q[y]", "F5[t]"])
def test_pid_parse_json(text):
    R = PIDDesc.parse(text)
    assert PIDDesc.from_json(R.to_json()) == R
