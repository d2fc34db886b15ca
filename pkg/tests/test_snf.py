import numpy as np
import pytest

from rqlab.snf import _det, determinantal_factors, invariant_factors, matmul, smith_normal_form


def _random(rng, r, c, lo=-9, hi=9):
    return rng.integers(lo, hi + 1, (r, c)).tolist()


def _check_smith(A):
    D, U, V = smith_normal_form(A, transforms=True)
    assert matmul(matmul(U, A), V) == D
    assert abs(_det(U)) == 1 and abs(_det(V)) == 1
    diag = [D[i][i] for i in range(min(len(D), len(D[0])))]
    for i in range(len(D)):
        for j in range(len(D[0])):
            if i != j:
                assert D[i][j] == 0
    assert all(x >= 0 for x in diag)
    for a, b in zip(diag, diag[1:]):
        assert (b == 0) if a == 0 else b % a == 0
    return diag


def test_examples():
    assert invariant_factors([[2, 1], [0, 1]]) == [1, 2]
    assert invariant_factors([[0, 0], [0, 0]]) == [0, 0]
    assert invariant_factors([[6, 0], [0, 4]]) == [2, 12]
    assert invariant_factors([]) == []


@pytest.mark.parametrize("shape", [(3, 5), (2, 2), (4, 3), (1, 4)])
def test_random_against_minor_gcds(shape):
    rng = np.random.default_rng(sum(shape))
    for _ in range(250):
        A = _random(rng, *shape)
        diag = _check_smith(A)
        want = determinantal_factors(A)
        assert diag == want[:len(diag)]


def test_degenerate_shapes():
    _check_smith([[0, 0, 0]])
    _check_smith([[5], [10], [15]])
    assert invariant_factors([[5], [10], [15]]) == [5, 0, 0]


def test_large_entries_stay_exact():
    A = [[10 ** 20 + 1, 3], [7, 10 ** 19]]
    diag = _check_smith(A)
    assert diag == determinantal_factors(A)
