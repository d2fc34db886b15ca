"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (the lines are echoed in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
Each criterion returns its JSONL payload lines; criterion 10 reruns every
other criterion and compares those lines byte for byte.
"""

import math
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from rqlab import diagrams, records, spectra  # noqa: E402
from rqlab.ball import cayley_ball  # noqa: E402
from rqlab.groups import Free, batch_is_identity, parse_group  # noqa: E402
from rqlab.phase import (SweepConfig, abelianization_by_law, birthday_expectation,  # noqa: E402
                         phase_sweep)
from rqlab.sampler import MeasureSpec, RngStream, sample_relator_set, sample_stratum  # noqa: E402
from rqlab.smallcanc import small_cancellation_check  # noqa: E402
from rqlab.snf import determinantal_factors, invariant_factors  # noqa: E402

RESULTS = {}


def report(n, ok, detail, elapsed):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail} [{elapsed:.1f}s]"
    RESULTS[n] = line
    print(line, flush=True)
    return line


def lines(recs):
    return [records.dumps(r) for r in recs]


# --- 1. closed-form numerics ---------------------------------------------------


def crit1():
    lam_f4 = spectra.lambda_free(4)
    lam_f4z2 = spectra.kesten_z2_product(4)
    lam_g2 = spectra.kesten_z2_product(8)
    theta_g2 = spectra.theta_from_lambda(lam_g2, 18)
    crit_g2 = spectra.critical_density("plain", theta_g2)["critical_density"]
    log18_10 = math.log(10) / math.log(18)
    checks = {
        "lambda_F4": abs(lam_f4 - math.sqrt(7) / 4) < 1e-15,
        "lambda_F4xZ2": abs(lam_f4z2 - (1 + math.sqrt(7)) / 5) < 1e-15,
        "lambda_G2": abs(lam_g2 - (1 + math.sqrt(15)) / 9) < 1e-15,
        "theta_G2": abs(theta_g2 - 0.7877) <= 0.0005 and round(theta_g2, 3) == 0.788,
        "critical_G2": abs(crit_g2 - 0.2123) <= 0.0005 and round(crit_g2, 3) == 0.212,
        "log18_10": abs(log18_10 - 0.7966) <= 0.0005 and round(log18_10, 3) == 0.797,
        "dC_bound": round(1 - log18_10, 3) == 0.203,
    }
    rec = {"criterion": 1, "lambda_F4": lam_f4, "lambda_F4xZ2": lam_f4z2, "lambda_G2": lam_g2,
           "theta_G2": theta_g2, "critical_G2": crit_g2, "log18_10": log18_10, "checks": checks}
    detail = (f"theta(G2)={theta_g2:.5f} d_crit={crit_g2:.5f} log18(10)={log18_10:.5f} "
              f"lambda(G2)={lam_g2:.6f}")
    return all(checks.values()), detail, lines([rec])


# --- 2. consistency triangle ---------------------------------------------------


def crit2():
    worst_theta = worst_res = 0.0
    for m in range(2, 11):
        closed = spectra.theta_free(m)
        via = spectra.theta_from_lambda(spectra.lambda_free(m), 2 * m)
        worst_theta = max(worst_theta, abs(closed - via))
        worst_res = max(worst_res, spectra.grigorchuk_residual(closed, 0.5, m))
    ok = worst_theta <= 1e-12 and worst_res <= 1e-12
    rec = {"criterion": 2, "max_theta_gap": worst_theta, "max_grigorchuk_residual": worst_res}
    return ok, f"max |theta gap|={worst_theta:.1e} max residual={worst_res:.1e}", lines([rec])


# --- 3. exact dynamic programme ------------------------------------------------


def _exhaustive_returns(t):
    if t == 0:
        return 1
    words = np.indices((4,) * t).reshape(t, -1).T.astype(np.uint8)
    return int(batch_is_identity(Free(2), words).sum())


def crit3():
    f2 = Free(2)
    T = 10
    series = spectra.return_prob_exact(f2, T, exact_counts=True)
    counts = series.counts
    exact_ok = True
    for t in range(T + 1):
        ratio = Fraction(_exhaustive_returns(t), 4 ** t)
        exact_ok &= series.ratio(t) == ratio
        # the log-space value agrees to rounding
        exact_ok &= abs(series.prob(t) - float(ratio)) <= 1e-12 * float(ratio)
    est = spectra.theta_dp(parse_group("direct(free(8), z2)"), 4000)
    target = spectra.theta_from_lambda((1 + math.sqrt(15)) / 9, 18)
    gap = abs(est.value - target)
    ok = exact_ok and gap <= 0.005
    rec = {"criterion": 3, "counts": counts, "theta_hat": est.value, "theta_raw": est.extra["theta_raw"],
           "target": target}
    return ok, (f"P_t exact for t<=10: {exact_ok}; theta_hat(G2, t=4000)={est.value:.5f} "
                f"vs {target:.5f} (gap {gap:.5f})"), lines([rec])


# --- 4. ball lower bounds ------------------------------------------------------


def crit4():
    f2 = Free(2)
    vals = [spectra.spectral_radius_ball(cayley_ball(f2, r)).value for r in (4, 6, 8)]
    g1 = parse_group("freeprod(direct(free(4), z2), free(4))")
    g1_val = spectra.spectral_radius_ball(cayley_ball(g1, 4)).value
    lam_g2 = (1 + math.sqrt(15)) / 9
    increasing = vals[0] < vals[1] < vals[2]
    below = all(v <= math.sqrt(3) / 2 + 1e-9 for v in vals)
    ok = increasing and below and g1_val <= lam_g2 + 1e-9
    rec = {"criterion": 4, "lambda_F2": vals, "lambda_G1_rho4": g1_val}
    return ok, (f"F2 rho=4,6,8: {', '.join(f'{v:.5f}' for v in vals)} (<= {math.sqrt(3) / 2:.5f}); "
                f"G1 rho=4: {g1_val:.5f} <= {lam_g2:.5f}"), lines([rec])


# --- 5. phase transition -------------------------------------------------------

SWEEP = dict(measure="reduced", m=2, ells=(14, 17, 20, 23), densities=(0.35, 0.45, 0.55, 0.65),
             trials=50, seed=2024, budget=15_000_000)


def crit5():
    recs = phase_sweep(SweepConfig(**SWEEP))
    cells = {}
    for r in recs:
        cells.setdefault((r["ell"], r["d"]), []).append(r)
    frac = {k: sum(r["collapsed"] for r in v) / len(v) for k, v in cells.items()}
    jumps = {ell: frac[(ell, 0.65)] - frac[(ell, 0.35)] for ell in SWEEP["ells"]}
    within = 0
    for (ell, d), rs in cells.items():
        mu, sd = birthday_expectation(rs[0]["n_relators"], 2, ell)
        total = sum(r["collisions"] for r in rs)
        # independent trials: the cell total has mean n mu and sd sqrt(n) sd
        within += abs(total - len(rs) * mu) <= 3 * math.sqrt(len(rs)) * sd
    share = within / len(cells)
    ok = all(j >= 0.5 for j in jumps.values()) and share >= 0.9
    curve = {ell: [frac[(ell, d)] for d in SWEEP["densities"]] for ell in SWEEP["ells"]}
    return ok, (f"jump(0.65-0.35) per ell {', '.join(f'{e}:{j:.2f}' for e, j in jumps.items())}; "
                f"cells within 3 sd of birthday mean {within}/{len(cells)}; curves {curve}"), lines(recs)


# --- 6. small cancellation -----------------------------------------------------


def crit6():
    ell, trials = 200, 100
    spec = MeasureSpec("cyclic", 2, ell)
    out = []
    good_low = bad_high = 0
    for k in range(trials):
        rs = sample_relator_set(spec, Fraction(1, 20), RngStream(7, (ell, k)))
        rep = small_cancellation_check(rs.words, exact=False)
        good_low += rep.satisfies
        out.append({"criterion": 6, "d": 0.05, "trial": k, **rep.to_dict()})
    for k in range(trials):
        rs = sample_stratum(spec, Fraction(1, 5), RngStream(8, (ell, k)), budget=20_000)
        rep = small_cancellation_check(rs.words, exact=False)
        bad_high += not rep.satisfies
        out.append({"criterion": 6, "d": 0.2, "trial": k, "stratum": rs.stratum, **rep.to_dict()})
    ok = good_low >= 95 and bad_high >= 95
    return ok, (f"d=0.05 satisfied {good_low}/100; d=0.2 violated {bad_high}/100 "
                f"(prefix strata of <=20000 relators)"), lines(out)


# --- 7. abelianisation ----------------------------------------------------------


def crit7():
    rng = np.random.default_rng(77)
    agree = 0
    for _ in range(1000):
        r, c = int(rng.integers(1, 5)), int(rng.integers(1, 6))
        A = rng.integers(-9, 10, (r, c)).tolist()
        got = invariant_factors(A)
        want = determinantal_factors(A)
        want = want + [0] * (len(got) - len(want))
        agree += got == want
    small = 0
    out = []
    for k in range(100):
        res = abelianization_by_law(2, 40, Fraction(3, 10), RngStream(70, (40, k)))
        small += set(res["factors"]) <= {1, 2}
        out.append({"criterion": 7, "trial": k, **res})
    ok = agree == 1000 and small >= 90
    return ok, f"SNF agrees on {agree}/1000 matrices; factors within {{1,2}} in {small}/100 quotients", lines(out)


# --- 8. diagram combinatorics ---------------------------------------------------


def crit8():
    identity_bad = lemma_bad = count_bad = counted = 0
    k2 = {}
    dens = (Fraction(0), Fraction(1, 4), Fraction(1, 2))
    for K in (1, 2):
        for ell in range(1, 13):
            n = 0
            for D in diagrams.enumerate_davkd(K, ell):
                n += 1
                G = diagrams.build_gamma(D)
                identity_bad += D.boundary_length() + 2 * len(G.edges) != D.n_faces * ell
                rep = diagrams.gamma_dims(G, 0)
                for d in dens:
                    lemma_bad += not diagrams.iso_check(D, d)["lemma_holds"]
                if len(G.parts) * ell <= 12:
                    counted += 1
                    count_bad += (diagrams.count_fulfilling_reduced(D, 2)
                                  != diagrams.count_fulfilling_bruteforce(D, 2))
            if K == 2:
                k2[ell] = n
    ratios = {ell: n / ell ** 8 for ell, n in k2.items() if ell >= 2}
    poly_ok = all(n <= diagrams.count_bound_N(2, ell) for ell, n in k2.items())
    ok = identity_bad == 0 and lemma_bad == 0 and count_bad == 0 and poly_ok
    rec = {"criterion": 8, "k2_counts": k2, "identity_violations": identity_bad,
           "lemma_violations": lemma_bad, "count_mismatches": count_bad, "counted": counted}
    return ok, (f"identity violations {identity_bad}, lemma violations {lemma_bad}, "
                f"count mismatches {count_bad}/{counted}, max K=2 count/ell^8 "
                f"{max(ratios.values()):.3g} (bound 16)"), lines([rec])


# --- 9. escape speed ----------------------------------------------------------


def crit9():
    ell = 2000
    speed = spectra.escape_speed_free(2, ell)
    grid = [ell * k // 10 for k in range(1, 10)]
    rows = spectra.norm_tail_check(2, ell, grid)
    worst = max(r["log_slack"] - r["allowed_log_slack"] for r in rows)
    ok = 0.49 <= speed <= 0.51 and all(r["ok"] for r in rows)
    rec = {"criterion": 9, "speed": speed, "tail": rows}
    return ok, f"mean norm/ell={speed:.6f}; tail bound holds at {sum(r['ok'] for r in rows)}/9 points", \
        lines([rec])


CRITERIA = {1: crit1, 2: crit2, 3: crit3, 4: crit4, 5: crit5, 6: crit6, 7: crit7, 8: crit8, 9: crit9}
PAYLOADS = {}


def run_criterion(n):
    t0 = time.perf_counter()
    ok, detail, payload = CRITERIA[n]()
    PAYLOADS[n] = payload
    report(n, ok, detail, time.perf_counter() - t0)
    return ok


def crit10():
    same = []
    for n, fn in CRITERIA.items():
        if n not in PAYLOADS:
            run_criterion(n)
        _, _, again = fn()
        same.append((n, again == PAYLOADS[n]))
    ok = all(s for _, s in same)
    bad = [n for n, s in same if not s]
    return ok, f"payloads byte-identical on rerun for {sum(s for _, s in same)}/9 criteria" + \
        (f" (differs: {bad})" if bad else "")


@pytest.mark.parametrize("n", list(CRITERIA))
def test_criterion(n):
    assert run_criterion(n), RESULTS[n]


def test_criterion_10_reproducible():
    t0 = time.perf_counter()
    ok, detail = crit10()
    report(10, ok, detail, time.perf_counter() - t0)
    assert ok, RESULTS[10]


if __name__ == "__main__":
    failed = 0
    for n in CRITERIA:
        failed += not run_criterion(n)
    t0 = time.perf_counter()
    ok, detail = crit10()
    report(10, ok, detail, time.perf_counter() - t0)
    sys.exit(1 if failed or not ok else 0)
