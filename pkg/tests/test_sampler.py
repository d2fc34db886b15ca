from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import all_words, cyc_reduced, reduced_words
from rqlab.ball import cayley_ball
from rqlab.errors import CapacityError, DomainError, InputError
from rqlab.groups import Free
from rqlab.sampler import (BLOCK, MeasureSpec, RelatorSet, RngStream, count_words, density_base,
                           density_count, prefix_probability, sample_relator_set, sample_stratum,
                           sample_words, satisfies_measure)
from rqlab.words import Alphabet, is_cyclically_reduced, is_reduced


def _chi2_uniform(words, support):
    counts = Counter(map(tuple, words.tolist()))
    assert set(counts) <= set(support)
    obs = np.array([counts.get(w, 0) for w in support])
    return chisquare(obs).pvalue


def test_plain_uniform():
    words = sample_words(MeasureSpec("plain", 2, 3), 64_000, RngStream(11))
    assert _chi2_uniform(words, list(all_words(4, 3))) > 1e-3


def test_reduced_uniform():
    words = sample_words(MeasureSpec("reduced", 2, 2), 100_000, RngStream(12))
    support = reduced_words(2, 2)
    assert len(support) == 12
    assert _chi2_uniform(words, support) > 1e-3


def test_cyclic_uniform():
    words = sample_words(MeasureSpec("cyclic", 2, 3), 100_000, RngStream(13))
    support = cyc_reduced(2, 3)
    assert _chi2_uniform(words, support) > 1e-3


def test_reduced_uniform_bigger_alphabet():
    words = sample_words(MeasureSpec("reduced", 3, 3), 150_000, RngStream(14))
    assert _chi2_uniform(words, reduced_words(3, 3)) > 1e-3


@pytest.mark.parametrize("kind, m, ell, expected", [
    ("plain", 2, 5, 1024),
    ("reduced", 2, 5, 324),
])
def test_count_words_closed(kind, m, ell, expected):
    assert count_words(kind, m, ell) == expected


@pytest.mark.parametrize("m, ell", [(2, 4), (2, 5), (3, 3), (1, 4)])
def test_count_cyclic_bruteforce(m, ell):
    assert count_words("cyclic", m, ell) == len(cyc_reduced(m, ell))


def test_count_geodesic_is_annulus():
    ball = cayley_ball(Free(2), 3)
    assert count_words("geodesic", 2, 2, ball=ball, L=1) == 4 + 12 + 36


def test_density_count_examples():
    assert density_count(3 ** 20, 0.6, 20) == 3 ** 12 == 531441
    assert density_count(10 ** 6, Fraction(1, 2)) == 1000
    assert density_count(12345, 0) == 1
    assert density_count(12345, 0, override=7) == 7


def test_density_count_exact_floor():
    # floor is exact even when the float power lands just below an integer
    for base, d in [(3 ** 30, Fraction(2, 3)), (2 ** 60, Fraction(1, 3)), (7 ** 12, Fraction(5, 6))]:
        n = density_count(base, d)
        assert n ** d.denominator <= base ** d.numerator < (n + 1) ** d.denominator


def test_density_count_errors():
    with pytest.raises(DomainError):
        density_count(100, 1.5)
    with pytest.raises(CapacityError) as exc:
        density_count(3 ** 40, 0.9, 40, budget=10 ** 6)
    assert "largest feasible density" in str(exc.value)


def test_relator_set_reduced_at_scale():
    spec = MeasureSpec("reduced", 2, 20)
    rs = sample_relator_set(spec, 0.6, RngStream(5))
    assert len(rs) == 531441
    w = rs.words.astype(np.int64)
    assert not (w[:, 1:] == (w[:, :-1] ^ 1)).any()


def test_override_and_geodesic():
    rs = sample_relator_set(MeasureSpec("plain", 2, 10), 0, RngStream(1), count_override=5)
    assert len(rs) == 5
    z = Free(1)
    spec = MeasureSpec("geodesic", 1, 4, L=1)
    ball = cayley_ball(z, 5)
    rs = sample_relator_set(spec, 0, RngStream(2), ball=ball, count_override=3)
    assert len(rs) == 3
    for w in rs.rows():
        assert len(w) in (3, 4, 5) and satisfies_measure(spec, w)


def test_geodesic_needs_ball():
    with pytest.raises(CapacityError):
        sample_relator_set(MeasureSpec("geodesic", 1, 4), 0, RngStream(2), count_override=1)


def test_support_predicates():
    rng = RngStream(21)
    for kind, pred in (("reduced", is_reduced), ("cyclic", is_cyclically_reduced)):
        spec = MeasureSpec(kind, 3, 9)
        for w in sample_words(spec, 5000, rng).tolist():
            assert pred(w) and satisfies_measure(spec, w)


def test_reproducible_and_prefix_consistent():
    spec = MeasureSpec("reduced", 2, 12)
    a = sample_words(spec, BLOCK + 100, RngStream(9, (12, 3)))
    b = sample_words(spec, BLOCK + 100, RngStream(9, (12, 3)))
    c = sample_words(spec, 500, RngStream(9, (12, 3)))
    assert (a == b).all()
    assert (a[:500] == c).all()
    d = sample_words(spec, 500, RngStream(9, (12, 4)))
    assert not (c == d).all()


def test_text_roundtrip():
    alpha = Alphabet(2)
    rs = sample_relator_set(MeasureSpec("cyclic", 2, 7), 0.3, RngStream(3))
    back = RelatorSet.from_text(rs.to_text(alpha), alpha)
    assert (back.words == rs.words).all() and back.d == rs.d and back.spec == rs.spec
    with pytest.raises(InputError):
        RelatorSet.from_text("", alpha)


def test_prefix_probability_sums_to_one():
    for kind in ("plain", "reduced", "cyclic"):
        spec = MeasureSpec(kind, 2, 5)
        total = sum(prefix_probability(spec, p) for p in all_words(4, 2))
        assert total == 1


def test_prefix_probability_cyclic_bruteforce():
    spec = MeasureSpec("cyclic", 2, 5)
    words = cyc_reduced(2, 5)
    for p in [(0,), (0, 2), (2, 1, 1)]:
        want = Fraction(sum(w[:len(p)] == p for w in words), len(words))
        assert prefix_probability(spec, p) == want


def test_stratum_conditioned_and_sized():
    spec = MeasureSpec("cyclic", 2, 60)
    rs = sample_stratum(spec, Fraction(1, 5), RngStream(4), budget=20_000)
    prefix = tuple(rs.stratum["prefix"])
    assert len(prefix) > 0
    assert 0 < len(rs) <= 20_000
    for w in rs.rows():
        assert w[:len(prefix)] == prefix and is_cyclically_reduced(w)
    # expected stratum size is N * P(prefix)
    mean = int(rs.stratum["total"]) * Fraction(rs.stratum["probability"])
    assert abs(len(rs) - mean) < 6 * float(mean) ** 0.5 + 1


def test_density_base_kinds():
    assert density_base(MeasureSpec("plain", 2, 5)) == 4 ** 5
    assert density_base(MeasureSpec("reduced", 2, 5)) == 3 ** 5
    assert density_base(MeasureSpec("cyclic", 2, 5)) == 3 ** 5
