"""Smith normal form over a Euclidean PID (Z or K[y]).

sympy only accepts PIDs it recognizes (ZZ, not QQ[y]), so a small generic
elimination is kept here.
"""

from __future__ import annotations

from .pid import PIDDesc


def smith_diagonal(pid: PIDDesc, rows) -> list:
    """Normalized nonzero diagonal entries d_1 | d_2 | ... of the Smith form."""
    A = [[pid(x) if not isinstance(x, str) else pid.decode(x) for x in r] for r in rows]
    m = len(A)
    n = len(A[0]) if A else 0
    diag = []
    t = 0
    while t < min(m, n):
        pos = _min_entry(pid, A, t, m, n)
        if pos is None:
            break
        i, j = pos
        A[t], A[i] = A[i], A[t]
        for r in A:
            r[t], r[j] = r[j], r[t]
        while True:
            changed = False
            for i in range(t + 1, m):
                if A[i][t]:
                    q, r = pid.divmod(A[i][t], A[t][t])
                    A[i] = [a - q * b for a, b in zip(A[i], A[t])]
                    if r:
                        A[t], A[i] = A[i], A[t]
                        changed = True
            for j in range(t + 1, n):
                if A[t][j]:
                    q, r = pid.divmod(A[t][j], A[t][t])
                    for row in A:
                        row[j] = row[j] - q * row[t]
                    if r:
                        for row in A:
                            row[t], row[j] = row[j], row[t]
                        changed = True
            if changed:
                continue
            # divisibility condition d_t | every remaining entry
            bad = None
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if pid.mod(A[i][j], A[t][t]):
                        bad = i
                        break
                if bad is not None:
                    break
            if bad is None:
                break
            A[t] = [a + b for a, b in zip(A[t], A[bad])]
        diag.append(pid.normalize(A[t][t])[1])
        t += 1
    return diag


def _min_entry(pid, A, t, m, n):
    best = None
    for i in range(t, m):
        for j in range(t, n):
            if A[i][j]:
                s = pid.size(A[i][j])
                if best is None or s < best[0]:
                    best = (s, i, j)
    return None if best is None else best[1:]


def cohomology_of_free_complex(pid: PIDDesc, ranks: dict, diffs: dict) -> dict:
    """Cohomology of a bounded complex of free modules R^{ranks[i]}.

    ``diffs[i]`` is the matrix (ranks[i+1] x ranks[i]) of d^i. Returns
    {i: {"free": rank, "torsion": [invariant factors that are non-units]}}.
    """
    out = {}
    smith = {}
    for i, M in diffs.items():
        smith[i] = smith_diagonal(pid, M) if M and M[0] else []
    for i, n in ranks.items():
        rk_out = len(smith.get(i, []))
        incoming = smith.get(i - 1, [])
        free = n - rk_out - len(incoming)
        tors = [d for d in incoming if not pid.is_unit(d)]
        out[i] = {"free": free, "torsion": tors}
    return out


class SmithForm:
    """U A V = S with S diagonal (d_1 | d_2 | ...), U and V invertible over the PID.

    ``Ui`` is the inverse of U, kept alongside so images can be read off.
    """

    def __init__(self, pid: PIDDesc, rows):
        self.pid = pid
        S = [[pid(x) for x in r] for r in rows]
        m = len(S)
        n = len(S[0]) if S else 0
        self.m, self.n = m, n
        one, zero = pid.one, pid.zero
        U = [[one if i == j else zero for j in range(m)] for i in range(m)]
        Ui = [[one if i == j else zero for j in range(m)] for i in range(m)]
        V = [[one if i == j else zero for j in range(n)] for i in range(n)]

        def row_add(i, j, q):  # row_i += q row_j
            S[i] = [a + q * b for a, b in zip(S[i], S[j])]
            U[i] = [a + q * b for a, b in zip(U[i], U[j])]
            for r in Ui:
                r[j] = r[j] - q * r[i]

        def row_swap(i, j):
            S[i], S[j] = S[j], S[i]
            U[i], U[j] = U[j], U[i]
            for r in Ui:
                r[i], r[j] = r[j], r[i]

        def row_scale(i, u, uinv):
            S[i] = [uinv * a for a in S[i]]
            U[i] = [uinv * a for a in U[i]]
            for r in Ui:
                r[i] = r[i] * u

        def col_add(i, j, q):  # col_i += q col_j
            for M in (S, V):
                for r in M:
                    r[i] = r[i] + q * r[j]

        def col_swap(i, j):
            for M in (S, V):
                for r in M:
                    r[i], r[j] = r[j], r[i]

        t = 0
        while t < min(m, n):
            pos = _min_entry(pid, S, t, m, n)
            if pos is None:
                break
            i, j = pos
            row_swap(t, i)
            col_swap(t, j)
            while True:
                dirty = False
                for i in range(t + 1, m):
                    if S[i][t]:
                        q, r = pid.divmod(S[i][t], S[t][t])
                        row_add(i, t, -q)
                        if r:
                            row_swap(t, i)
                            dirty = True
                for j in range(t + 1, n):
                    if S[t][j]:
                        q, r = pid.divmod(S[t][j], S[t][t])
                        col_add(j, t, -q)
                        if r:
                            col_swap(t, j)
                            dirty = True
                if dirty:
                    continue
                bad = next((i for i in range(t + 1, m) for j in range(t + 1, n)
                            if pid.mod(S[i][j], S[t][t])), None)
                if bad is None:
                    break
                row_add(t, bad, one)
            u, _ = pid.normalize(S[t][t])
            if not pid.is_integers:
                uinv = pid.ring(pid.field.one / u.LC)
            else:
                uinv = u
            row_scale(t, u, uinv)
            t += 1
        self.S, self.U, self.Ui, self.V = S, U, Ui, V
        self.rank = t

    @property
    def diagonal(self) -> list:
        return [self.S[i][i] for i in range(self.rank)]

    def kernel(self) -> list:
        """A basis of ker A (columns of V past the rank)."""
        return [[self.V[i][j] for i in range(self.n)] for j in range(self.rank, self.n)]

    def image_basis(self) -> list:
        """A basis of the column space: d_i times column i of U^{-1}."""
        return [[self.S[i][i] * self.Ui[k][i] for k in range(self.m)] for i in range(self.rank)]

    def solve(self, b):
        """Some x with A x = b, or None."""
        pid = self.pid
        ub = [sum((self.U[i][k] * b[k] for k in range(self.m)), pid.zero) for i in range(self.m)]
        y = []
        for i in range(self.n):
            if i < self.rank:
                q, r = pid.divmod(ub[i], self.S[i][i])
                if r:
                    return None
                y.append(q)
            else:
                y.append(pid.zero)
        if any(ub[i] for i in range(self.rank, self.m)):
            return None
        return [sum((self.V[k][i] * y[i] for i in range(self.n)), pid.zero) for k in range(self.n)]
