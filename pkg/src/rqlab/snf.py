"""Smith normal form over the integers (exact, Python ints)."""

from __future__ import annotations

from math import gcd
from itertools import combinations


def _identity(n):
    return [[int(i == j) for j in range(n)] for i in range(n)]


def smith_normal_form(A, transforms: bool = False):
    """Diagonalise ``A`` by unimodular row and column operations.

    Returns ``(D, U, V)`` with ``U @ A @ V == D`` when ``transforms`` is set,
    otherwise ``(D, None, None)``.  The diagonal of ``D`` is nonnegative and
    each entry divides the next.
    """
    A = [[int(x) for x in row] for row in A]
    r = len(A)
    c = len(A[0]) if r else 0
    U = _identity(r) if transforms else None
    V = _identity(c) if transforms else None

    def swap_rows(i, j):
        A[i], A[j] = A[j], A[i]
        if U is not None:
            U[i], U[j] = U[j], U[i]

    def swap_cols(i, j):
        for row in A:
            row[i], row[j] = row[j], row[i]
        if V is not None:
            for row in V:
                row[i], row[j] = row[j], row[i]

    def add_row(dst, src, q):  # row dst -= q * row src
        if q:
            a, b = A[dst], A[src]
            for k in range(c):
                if b[k]:
                    a[k] -= q * b[k]
            if U is not None:
                a, b = U[dst], U[src]
                for k in range(r):
                    a[k] -= q * b[k]

    def add_col(dst, src, q):  # col dst -= q * col src
        if q:
            for row in A:
                if row[src]:
                    row[dst] -= q * row[src]
            if V is not None:
                for row in V:
                    row[dst] -= q * row[src]

    for t in range(min(r, c)):
        best = None
        for i in range(t, r):
            row = A[i]
            for j in range(t, c):
                if row[j] and (best is None or abs(row[j]) < best[0]):
                    best = (abs(row[j]), i, j)
        if best is None:
            break
        swap_rows(t, best[1])
        swap_cols(t, best[2])
        while True:
            p = A[t][t]
            clean = True
            for i in range(t + 1, r):
                if A[i][t]:
                    add_row(i, t, A[i][t] // p)
                    if A[i][t]:
                        clean = False
            for j in range(t + 1, c):
                if A[t][j]:
                    add_col(j, t, A[t][j] // p)
                    if A[t][j]:
                        clean = False
            if not clean:
                best = None
                for i in range(t + 1, r):
                    if A[i][t] and (best is None or abs(A[i][t]) < best[0]):
                        best = (abs(A[i][t]), i, None)
                for j in range(t + 1, c):
                    if A[t][j] and (best is None or abs(A[t][j]) < best[0]):
                        best = (abs(A[t][j]), None, j)
                if best[1] is not None:
                    swap_rows(t, best[1])
                else:
                    swap_cols(t, best[2])
                continue
            # the pivot must divide everything left over
            bad = next(
                (i for i in range(t + 1, r) for j in range(t + 1, c) if A[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, -1)
        if A[t][t] < 0:
            A[t] = [-x for x in A[t]]
            if U is not None:
                U[t] = [-x for x in U[t]]
    return A, U, V


def invariant_factors(A) -> list:
    """Diagonal of the Smith form, padded with zeros to the row count."""
    r = len(A)
    if r == 0:
        return []
    D, _, _ = smith_normal_form(A)
    diag = [D[i][i] for i in range(min(r, len(D[0])))]
    return diag + [0] * (r - len(diag))


def determinantal_factors(A) -> list:
    """Invariant factors as ratios of gcds of k x k minors (slow, independent)."""
    r = len(A)
    c = len(A[0]) if r else 0
    divs = [1]
    for k in range(1, min(r, c) + 1):
        g = 0
        for rows in combinations(range(r), k):
            for cols in combinations(range(c), k):
                g = gcd(g, _det([[A[i][j] for j in cols] for i in rows]))
        if g == 0:
            break
        divs.append(g)
    out = [divs[k] // divs[k - 1] for k in range(1, len(divs))]
    return out + [0] * (r - len(out))


def _det(M) -> int:
    """Integer determinant by fraction-free (Bareiss) elimination."""
    M = [row[:] for row in M]
    n = len(M)
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if M[i][k]), None)
            if swap is None:
                return 0
            M[k], M[swap] = M[swap], M[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[-1][-1] if n else 1


def matmul(A, B):
    return [[sum(a * b for a, b in zip(row, col)) for col in zip(*B)] for row in A]
