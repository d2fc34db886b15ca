import itertools

import numpy as np
import pytest

from rqlab.ball import cayley_ball, sphere_slice
from rqlab.errors import CapacityError, InputError
from rqlab.groups import (Finite, Free, batch_is_identity, is_identity, norm, normal_form,
                          parse_group)
from rqlab.words import Alphabet, cyclic_reduce, free_reduce, inverse_word, is_reduced

A2 = Alphabet(2)
a, A, b, B = 0, 1, 2, 3


@pytest.mark.parametrize("word, expected", [
    ((a, A, b), (b,)),
    ((a, b, A), (a, b, A)),
    ((a, b, B, A), ()),
])
def test_free_reduce(word, expected):
    assert free_reduce(word) == expected


@pytest.mark.parametrize("word, expected", [
    ((a, b, A), (b,)),
    ((a, b), (a, b)),
    ((a, b, b, A), (b, b)),
])
def test_cyclic_reduce(word, expected):
    assert cyclic_reduce(word) == expected


def test_alphabet_roundtrip():
    alpha = Alphabet(3)
    w = (0, 3, 5, 4, 1)
    assert alpha.parse(alpha.format(w)) == w
    assert alpha.format(()) == "e"
    assert alpha.parse("e") == ()
    assert alpha.parse("a1 A2") == alpha.parse("a1A2") == (0, 3)
    with pytest.raises(InputError):
        alpha.parse("a4")
    with pytest.raises(InputError):
        alpha.check([6])


def test_letter_involution_fixed_point_free():
    for x in range(10):
        assert x ^ 1 != x and (x ^ 1) ^ 1 == x


def test_normal_form_examples():
    f2 = Free(2)
    assert normal_form(f2, (a, A)) == ()
    g = parse_group("direct(free(4), z2)")
    assert normal_form(g, g.alphabet.parse("u a1 u")) == g.alphabet.parse("a1")
    h = parse_group("freeprod(free(1), free(1))")
    assert normal_form(h, h.alphabet.parse("a1 a2 A2 a1")) == h.alphabet.parse("a1 a1")


def test_is_identity_examples():
    f2 = Free(2)
    assert not is_identity(f2, (a, b, A, B))
    assert is_identity(f2, ())
    g = parse_group("direct(free(4), z2)")
    assert is_identity(g, g.alphabet.parse("u u"))
    assert is_identity(g, g.alphabet.parse("u U"))


def test_norm_examples():
    f2 = Free(2)
    assert norm(f2, (a, a, B)) == 3
    g = parse_group("direct(free(4), z2)")
    w = g.alphabet.parse("a1 u A1")
    assert norm(g, w) == 1
    ball = cayley_ball(g, 3)
    assert norm(g, w, ball) == 1
    for model in (f2, g, Finite.named("z5")):
        assert norm(model, ()) == 0


def test_normal_form_idempotent_and_norm_zero_iff_identity():
    rng = np.random.default_rng(1)
    for expr in ("free(2)", "direct(free(2), z2)", "freeprod(z2, z3)", "z6", "v4"):
        g = parse_group(expr)
        for _ in range(200):
            w = tuple(int(x) for x in rng.integers(0, g.alphabet.size, rng.integers(0, 9)))
            nf = normal_form(g, w)
            assert normal_form(g, nf) == nf
            assert (norm(g, w) == 0) == is_identity(g, w)
            assert is_identity(g, w + inverse_word(w))


def test_norm_matches_bfs_ball():
    # additivity for the product against a brute-force BFS
    g = parse_group("direct(free(2), z2)")
    ball = cayley_ball(g, 5)
    rng = np.random.default_rng(2)
    for _ in range(300):
        w = tuple(int(x) for x in rng.integers(0, g.alphabet.size, rng.integers(0, 6)))
        assert norm(g, w) == ball.norms[ball.lookup(w)]


def test_batch_identity_agrees():
    g = Free(2)
    rng = np.random.default_rng(3)
    words = rng.integers(0, 4, (2000, 6))
    got = batch_is_identity(g, words)
    want = [is_identity(g, tuple(int(x) for x in w)) for w in words]
    assert list(map(bool, got)) == want


@pytest.mark.parametrize("expr, rho, sizes", [
    ("free(2)", 3, [1, 4, 12, 36]),
    ("free(1)", 5, [1, 2, 2, 2, 2, 2]),
    # (w, e) with |w| + e = r over 5 generators: 1, 4 + 1, 12 + 4
    ("direct(free(2), z2)", 2, [1, 5, 16]),
])
def test_sphere_sizes(expr, rho, sizes):
    assert cayley_ball(parse_group(expr), rho).sphere_sizes() == sizes


def test_direct_product_sphere_bruteforce():
    g = parse_group("direct(free(2), z2)")
    alpha = g.alphabet
    seen = {}
    for r in range(4):
        for w in itertools.product(range(alpha.size), repeat=r):
            seen.setdefault(g.element(w), r)
    counts = [0] * 4
    for r in seen.values():
        counts[r] += 1
    assert cayley_ball(g, 3).sphere_sizes() == counts


def test_adjacency_involutive():
    ball = cayley_ball(parse_group("freeprod(z2, z3)"), 5)
    adj = ball.adjacency
    for x in range(adj.shape[1]):
        nxt = adj[:, x]
        ok = nxt >= 0
        back = adj[nxt[ok], x ^ 1]
        assert (back == np.flatnonzero(ok)).all()


def test_finite_complete_ball():
    ball = cayley_ball(Finite.named("z5"), 10)
    assert ball.complete and len(ball) == 5


def test_sphere_slice():
    z = Free(1)
    assert sorted(sphere_slice(cayley_ball(z, 3), 3, 0)) == [(0, 0, 0), (1, 1, 1)]
    ball = cayley_ball(Free(2), 3)
    assert len(sphere_slice(ball, 2, 0)) == 12
    assert len(sphere_slice(ball, 2, 1)) == 52


def test_ball_node_budget():
    with pytest.raises(CapacityError):
        cayley_ball(Free(3), 12, node_budget=1000)


def test_parse_group_errors():
    for bad in ("free(", "bogus(2)", "direct(free(2))", "free(x)"):
        with pytest.raises(InputError):
            parse_group(bad)


def test_reduced_predicates():
    assert is_reduced((a, b, A))
    assert not is_reduced((a, A))
