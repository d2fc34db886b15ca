import math
from fractions import Fraction

import numpy as np
import pytest

from rqlab.ball import cayley_ball
from rqlab.errors import InputError, InsufficientSignal
from rqlab.groups import Finite, Free, parse_group
from rqlab.phase import (INCONCLUSIVE, TRIVIAL, Z2, SweepConfig, abelianization,
                         abelianization_by_law, axiom_probe, birthday_expectation,
                         cell_feasibility, exponent_pmf, geodesic_collapse_scan,
                         letter_collapse_verdict, phase_sweep, plain_word_collapse_scan,
                         prefix_collision_scan, sweep_curve)
from rqlab.sampler import MeasureSpec, RelatorSet, RngStream, sample_relator_set
from rqlab.spectra import return_prob_exact

a, A, b, B = 0, 1, 2, 3


def test_prefix_scan_examples():
    scan = prefix_collision_scan(np.array([(a, b, a, b, a), (a, b, a, b, A)]), size=4)
    assert scan.identifications == {(a, A)} and scan.collisions == 1
    scan = prefix_collision_scan(np.array([(a, b), (a, b)]), size=4)
    assert scan.identifications == set() and scan.collisions == 1


def test_prefix_scan_matches_pairwise():
    rs = sample_relator_set(MeasureSpec("reduced", 2, 8), Fraction(1, 2), RngStream(3))
    rows = rs.rows()
    pairs = 0
    idents = set()
    for i in range(len(rows)):
        for j in range(i + 1, len(rows)):
            if rows[i][:-1] == rows[j][:-1]:
                pairs += 1
                x, y = rows[i][-1], rows[j][-1]
                if x != y:
                    idents.add((min(x, y), max(x, y)))
    scan = prefix_collision_scan(rs)
    assert scan.collisions == pairs and scan.identifications == idents


def test_collisions_near_birthday_mean():
    spec = MeasureSpec("reduced", 2, 20)
    rs = sample_relator_set(spec, 0.6, RngStream(0))
    mu, sd = birthday_expectation(len(rs), 2, 20)
    assert abs(prefix_collision_scan(rs).collisions - mu) <= 3 * sd


def test_collisions_unbiased_at_large_mean():
    n = 300_000
    rs = sample_relator_set(MeasureSpec("reduced", 2, 12), 0, RngStream(1), count_override=n)
    mu, sd = birthday_expectation(n, 2, 12)
    assert mu > 1e5
    assert abs(prefix_collision_scan(rs).collisions - mu) <= 4 * sd


def test_verdict_examples():
    everything = {(x, y) for x in range(4) for y in range(x + 1, 4)}
    assert letter_collapse_verdict(everything, True, 2).verdict == Z2
    assert letter_collapse_verdict(everything, False, 2).verdict == TRIVIAL
    assert letter_collapse_verdict({(a, b)}, True, 2).verdict == INCONCLUSIVE
    # a = a^-1 and a = b merge only {a, A, b, B} via closure
    rep = letter_collapse_verdict({(a, A), (a, b)}, True, 2)
    assert rep.verdict == Z2 and rep.classes == 1
    assert letter_collapse_verdict(set(), True, 2, killed=(0, 1)).verdict == TRIVIAL
    assert letter_collapse_verdict(everything, True, 2, base_bipartite=False).verdict == INCONCLUSIVE


def test_closure_is_involution_equivariant():
    rep = letter_collapse_verdict({(a, b)}, True, 2)
    # (a, b) forces (A, B): two classes remain
    assert rep.classes == 2


def test_plain_scan_examples():
    f2 = Free(2)
    idents, hits = plain_word_collapse_scan(f2, np.array([(a, b, B, A, a, b)]))
    assert idents == {(a, B)} and hits == [0]
    z2 = Finite.named("z2")
    idents, hits = plain_word_collapse_scan(z2, np.array([(0, 0, 0, 1)]))
    assert hits == [0] and idents == set()  # u = U^-1 is the same letter class


def test_plain_scan_hit_rate_matches_return_probability():
    f2 = Free(2)
    spec = MeasureSpec("plain", 2, 16)
    n = 200_000
    rs = sample_relator_set(spec, 0, RngStream(6), count_override=n)
    _, hits = plain_word_collapse_scan(f2, rs)
    p = return_prob_exact(f2, 14).prob(14)
    mu, sd = n * p, math.sqrt(n * p * (1 - p))
    assert abs(len(hits) - mu) <= 3 * sd


def test_geodesic_scan_examples():
    z = Free(1)
    ball = cayley_ball(z, 6)
    rs = RelatorSet(MeasureSpec("geodesic", 1, 4, 1), Fraction(0), 2, 0, (), [(0, 0, 0), (0, 0, 0, 0)])
    killed, wit = geodesic_collapse_scan(rs, ball)
    assert killed == (0,)
    assert letter_collapse_verdict(set(), False, 1, killed=killed).verdict == TRIVIAL
    spec = MeasureSpec("geodesic", 1, 5, 0)
    ball = cayley_ball(z, 5)
    for seed in range(20):
        rs = sample_relator_set(spec, 0, RngStream(seed), ball=ball, count_override=10)
        assert geodesic_collapse_scan(rs, ball)[0] == ()


def test_geodesic_kill_rate():
    f2 = Free(2)
    ball = cayley_ball(f2, 9)
    spec = MeasureSpec("geodesic", 2, 8, 1)
    size = len(ball.slice_indices(8, 1))
    n = int(4 * math.sqrt(size))
    kills = 0
    for seed in range(200):
        rs = sample_relator_set(spec, 0, RngStream(seed), ball=ball, count_override=n)
        kills += bool(geodesic_collapse_scan(rs, ball)[0])
    assert kills >= 180


def test_abelianization_examples():
    assert abelianization(2, [(a, b, A, B)]) == [0, 0]
    assert abelianization(2, [(a, a), (a, b)]) == [1, 2]
    # an element involution contributes a Z/2 coordinate
    assert sorted(abelianization(2, [(a,)], involutions={1})) == [1, 2]


def test_exponent_pmf_matches_enumeration():
    import itertools
    vecs, probs = exponent_pmf("plain", 2, 4)
    law = {}
    for w in itertools.product(range(4), repeat=4):
        v = [0, 0]
        for x in w:
            v[x >> 1] += -1 if x & 1 else 1
        law[tuple(v)] = law.get(tuple(v), 0) + 1 / 256
    got = {tuple(int(x) for x in v): p for v, p in zip(vecs, probs)}
    assert set(got) == set(law)
    for k in law:
        assert got[k] == pytest.approx(law[k])


def test_abelianization_by_law_small_factors():
    out = abelianization_by_law(2, 40, 0.3, RngStream(1))
    assert set(out["factors"]) <= {1, 2}
    assert out["count"] == math.floor(4 ** 12)


def test_sweep_d_zero_never_collapses_and_monotone():
    cfg = SweepConfig(measure="reduced", m=2, ells=(10, 12), densities=(0, 0.3, 0.5, 0.7),
                      trials=6, seed=2)
    recs = phase_sweep(cfg)
    assert all(not r["collapsed"] for r in recs if r["d"] == 0)
    by = {}
    for r in recs:
        by.setdefault((r["ell"], r["trial"]), []).append((r["d"], r["collapsed"]))
    for series in by.values():
        flags = [c for _, c in sorted(series)]
        assert flags == sorted(flags)
    rows = sweep_curve(recs)
    assert [(r[0], r[1]) for r in rows] == sorted((r[0], r[1]) for r in rows)


def test_sweep_geodesic_z_never_trivial():
    cfg = SweepConfig(measure="geodesic", m=1, ells=(5, 6), densities=(0.3, 0.9), trials=5, seed=0)
    for r in phase_sweep(cfg):
        assert r["verdict"] != TRIVIAL


def test_sweep_skips_infeasible_cells():
    cfg = SweepConfig(measure="reduced", m=2, ells=(30,), densities=(0.1, 0.9), trials=1, budget=1000)
    recs = phase_sweep(cfg)
    assert [r["status"] for r in recs] == ["ok", "skipped"]
    feas = cell_feasibility(cfg)
    assert [f[3] for f in feas] == [True, False]


def test_sweep_rejects_mismatched_group():
    with pytest.raises(InputError):
        phase_sweep(SweepConfig(m=3, group="free(2)", ells=(6,), densities=(0.1,), trials=1))


def test_axiom3_probe_free():
    f2 = Free(2)
    rep = axiom_probe(f2, "plain", 3, [(2, 2), (3, 3), (4, 4), (5, 5)], 400_000, RngStream(5))
    lo, hi = rep.to_dict()["exponent_ci"]
    ref = rep.reference["finite_horizon_exponent"]
    assert lo <= ref <= hi
    rep = axiom_probe(f2, "plain", 3, [(0, 0)], 10, RngStream(5))
    assert rep.log_probs == [0.0]


def test_axiom_probe_censored():
    with pytest.raises(InsufficientSignal):
        axiom_probe(Free(2), "plain", 3, [(20, 20)], 100, RngStream(1))


def test_axiom3_geodesic():
    f2 = Free(2)
    ball = cayley_ball(f2, 4)
    rep = axiom_probe(f2, "geodesic", 3, [(4, 4)], 200_000, RngStream(3), ball=ball)
    ref = rep.reference["geodesic"][0]
    p = rep.hits[0] / rep.trials
    q = ref["exact_prob"]
    assert abs(p - q) <= 4 * math.sqrt(q / rep.trials)
    assert abs(ref["exponent_base_2m_g"] - 0.5) < 0.05
