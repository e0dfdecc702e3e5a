"""All sign conventions in one place.

Every other module asks this table for its signs, so a convention change is a
one-line edit here and the coherence checks pick it up.
"""

from __future__ import annotations


def parity(n: int) -> int:
    return -1 if n % 2 else 1


def theta(i: int, j: int, p: int) -> int:
    """Sign of A[i] (x) B[j] -> (A (x) B)[i+j] on the summand A^{p+i} (x) B^{q+j}."""
    return parity(p * j)


def theta_modules(i: int, j: int) -> int:
    """Same isomorphism for two modules sitting in degree 0 (so p = -i)."""
    return theta(i, j, -i)


def tensor_differential(p: int) -> int:
    """Sign on 1 (x) d_B restricted to A^p (x) B^q."""
    return parity(p)


def shift_differential(n: int) -> int:
    """The differential of F[n] is (-1)^n d_F."""
    return parity(n)


CONNECTING = -1
"""Chasing-elements connecting map versus the map coming from the triangle."""


def flavor(n: int) -> int:
    """[m/t]_K = flavor(n) [m/t]_C for a fraction of degree n."""
    return parity(n)


def delta_functor(p: int, n: int) -> int:
    """Translation isomorphism K (x) (F[n]) -> (K (x) F)[n] on K^p (x) F^*."""
    return theta(0, n, p)


def theta_associative(i: int, j: int, k: int, p: int, q: int) -> bool:
    """theta_{i+j,k}(theta_{i,j} (x) 1) == theta_{i,j+k}(1 (x) theta_{j,k}) on A^{p+i}B^{q+j}C^{*}."""
    lhs = theta(i, j, p) * theta(i + j, k, p + q)
    rhs = theta(j, k, q) * theta(i, j + k, p)
    return lhs == rhs


def iterate_shift_sign(a: int, b: int, p: int, q: int) -> int:
    """Product of the step signs in the (a, b)-parameterized iteration isomorphism.

    Steps: splitting (H (x) L)[a-q+b], the translation of the inner local
    cohomology by a, recombining N[a] (x) L[b], and the two translation
    isomorphisms of the outer local cohomology at source (degree p) and
    target (degree p+q).
    """
    split = theta_modules(a - q, b)
    recombine = theta_modules(a, b)
    inner = delta_functor(q, a)
    source = delta_functor(p, a - q + b)
    target = delta_functor(p + q, a + b)
    return split * recombine * inner * source * target


def lateral(d: int) -> int:
    """Cousin coboundary along a lateral specialization versus the base one."""
    return parity(d)


def composition(t_f: int, r_g: int) -> int:
    """Extra sign in the punctual comparison C_{f,g} (II(i) type)."""
    return parity(t_f * r_g)


def contraction(x_before: int) -> int:
    """Residue along a killed series direction preceded by x_before field differentials."""
    return parity(x_before)


def permutation_sign(seq) -> int:
    """Sign of the permutation sorting ``seq`` (distinct comparable items)."""
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def translation(m: int, n: int) -> int:
    """Sign of the identification (F[m])[n] = F[m+n] used by translation coherence."""
    return theta_modules(m, n)
