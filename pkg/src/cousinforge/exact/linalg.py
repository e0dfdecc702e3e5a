"""Exact linear algebra over FieldDesc fields, backed by sympy's DomainMatrix.

Matrices are passed around as ``DomainMatrix`` objects; the helpers here
accept plain nested lists too.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from sympy.polys.matrices import DomainMatrix

from .fields import FieldDesc


def as_matrix(field: FieldDesc, rows, ncols: int | None = None) -> DomainMatrix:
    if isinstance(rows, DomainMatrix):
        if rows.domain != field.dom:
            return rows.convert_to(field.dom)
        return rows
    rows = [list(r) for r in rows]
    m = len(rows)
    n = len(rows[0]) if rows else (ncols or 0)
    conv = [[field(x) for x in r] for r in rows]
    return DomainMatrix(conv, (m, n), field.dom)


def zeros(field: FieldDesc, m: int, n: int) -> DomainMatrix:
    return DomainMatrix.zeros((m, n), field.dom)


def eye(field: FieldDesc, n: int) -> DomainMatrix:
    return DomainMatrix.eye(n, field.dom)


def entries(A: DomainMatrix) -> list:
    return A.to_list() if A.shape[0] else []


def column(A: DomainMatrix, j: int) -> list:
    return [A.rep.getitem(i, j) for i in range(A.shape[0])]


def from_columns(field: FieldDesc, cols: Sequence[Sequence], nrows: int) -> DomainMatrix:
    if not cols:
        return zeros(field, nrows, 0)
    rows = [[cols[j][i] for j in range(len(cols))] for i in range(nrows)]
    return DomainMatrix(rows, (nrows, len(cols)), field.dom)


@dataclass(frozen=True)
class LinSolveResult:
    """Outcome of solving A x = b.

    ``kernel`` is a list of basis vectors of ker A, ``image`` a list of the
    pivot columns of A (a basis of its column space), ``solution`` one
    particular solution or None when the system is inconsistent.
    """

    kernel: list
    image: list
    solution: list | None
    pivots: tuple
    ncols: int

    @property
    def consistent(self) -> bool:
        return self.solution is not None

    @property
    def rank(self) -> int:
        return len(self.pivots)


def solve_linear(field: FieldDesc, A, b=None) -> LinSolveResult:
    """Gaussian elimination with the first nonzero pivot taken in column order."""
    A = as_matrix(field, A)
    m, n = A.shape
    dom = field.dom
    if b is None:
        b = [dom.zero] * m
    b = [field(x) for x in b]
    if len(b) != m:
        raise ValueError(f"rhs has length {len(b)}, matrix has {m} rows")
    aug = A.hstack(DomainMatrix([[x] for x in b], (m, 1), dom)) if m else zeros(field, 0, n + 1)
    R, pivots = aug.rref(method="GJ") if m else (aug, ())
    solution = None
    if n not in pivots:
        solution = [dom.zero] * n
        for row, pc in enumerate(pivots):
            solution[pc] = R.rep.getitem(row, n)
    pivots = tuple(p for p in pivots if p < n)
    kernel = []
    if n:
        free = [j for j in range(n) if j not in pivots]
        for f in free:
            v = [dom.zero] * n
            v[f] = dom.one
            for row, pc in enumerate(pivots):
                v[pc] = -R.rep.getitem(row, f)
            kernel.append(v)
    image = [column(A, j) for j in pivots]
    return LinSolveResult(kernel, image, solution, pivots, n)


def rank(field: FieldDesc, A) -> int:
    A = as_matrix(field, A)
    if 0 in A.shape:
        return 0
    return A.rank()


def nullspace(field: FieldDesc, A) -> list:
    """Basis of {x : A x = 0} as a list of vectors."""
    return solve_linear(field, A).kernel


def left_nullspace(field: FieldDesc, A) -> list:
    return nullspace(field, as_matrix(field, A).transpose())


def is_invertible(field: FieldDesc, A) -> bool:
    A = as_matrix(field, A)
    m, n = A.shape
    return m == n and (m == 0 or A.rank() == m)


def inverse(field: FieldDesc, A) -> DomainMatrix:
    A = as_matrix(field, A)
    if A.shape == (0, 0):
        return A
    return A.inv()


def matvec(A: DomainMatrix, v: Sequence) -> list:
    m, n = A.shape
    dom = A.domain
    out = [dom.zero] * m
    rep = A.rep.to_sdm() if hasattr(A.rep, "to_sdm") else None
    if rep is not None:
        for i, row in rep.items():
            s = dom.zero
            for j, a in row.items():
                if v[j]:
                    s += a * v[j]
            out[i] = s
        return out
    for i in range(m):
        out[i] = sum((A.rep.getitem(i, j) * v[j] for j in range(n)), dom.zero)
    return out


def span_contains(field: FieldDesc, basis: Sequence[Sequence], v: Sequence) -> bool:
    if not basis:
        return not any(v)
    cols = from_columns(field, list(basis), len(v))
    return solve_linear(field, cols, v).consistent


def coordinates(field: FieldDesc, basis: Sequence[Sequence], v: Sequence) -> list | None:
    """Coordinates of v in the given (independent) basis, or None."""
    if not basis:
        return [] if not any(v) else None
    cols = from_columns(field, list(basis), len(v))
    return solve_linear(field, cols, v).solution


def row_basis(field: FieldDesc, vectors: Sequence[Sequence], n: int) -> list:
    """A basis (RREF rows) of the span of the given vectors."""
    if not vectors:
        return []
    A = as_matrix(field, vectors)
    R, pivots = A.rref(method="GJ")
    return [list(R.to_list()[i]) for i in range(len(pivots))]


def intersect_spans(field: FieldDesc, U: Sequence[Sequence], V: Sequence[Sequence], n: int) -> list:
    """Basis of span(U) ∩ span(V) inside K^n."""
    if not U or not V:
        return []
    cols = list(U) + [[-x for x in v] for v in V]
    ker = nullspace(field, from_columns(field, cols, n))
    out = []
    dom = field.dom
    for k in ker:
        w = [dom.zero] * n
        for c, u in zip(k[: len(U)], U):
            if c:
                for i in range(n):
                    w[i] += c * u[i]
        out.append(w)
    return row_basis(field, out, n)


def solve_sparse(field: FieldDesc, cols: Sequence[dict], nrows: int, rhs: dict):
    """Solve sum_j x_j cols[j] = rhs for sparse column dicts ``{row: value}``.

    Pivots are taken in column order, free unknowns are set to zero, so the
    returned particular solution is deterministic. Returns None if inconsistent.
    """
    n = len(cols)
    dom = field.dom
    rows: dict = {}
    for j, col in enumerate(cols):
        for i, v in col.items():
            if v:
                rows.setdefault(i, {})[j] = v
    for i, v in rhs.items():
        if v:
            rows.setdefault(i, {})[n] = v
    if not rows:
        return [dom.zero] * n
    M = DomainMatrix(rows, (nrows, n + 1), dom)
    R, pivots = M.rref(method="GJ")
    if n in pivots:
        return None
    rep = R.rep.to_sdm()
    sol = [dom.zero] * n
    for row, pc in enumerate(pivots):
        sol[pc] = rep.get(row, {}).get(n, dom.zero)
    return sol
