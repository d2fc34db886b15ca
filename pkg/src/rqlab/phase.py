"""Triviality mechanisms, axiom probes and density sweeps at desk scale."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import CapacityError, InputError, InsufficientSignal
from .groups import GroupModel, batch_is_identity, free_rank, parse_group
from .sampler import (
    DEFAULT_SAMPLE_BUDGET,
    MeasureSpec,
    RelatorSet,
    RngStream,
    count_words,
    density_base,
    density_count,
    sample_relator_set,
    sample_words,
)
from .snf import invariant_factors

log = logging.getLogger(__name__)

TRIVIAL, Z2, INCONCLUSIVE = "trivial", "z2", "inconclusive"


# --- letter identifications -------------------------------------------------


@dataclass
class PrefixScan:
    collisions: int  # unordered pairs sharing their first ell-1 letters
    pairs: list  # (i, j) for pairs with different last letters
    identifications: set  # {(a, b)} with a < b, deduced a = b


def _prefix_keys(words: np.ndarray, size: int) -> np.ndarray:
    n, ell = words.shape
    k = ell - 1
    if k * math.log2(size) < 62:
        key = np.empty(n, dtype=np.int64)
        for s in range(0, n, 1 << 16):
            cols = np.ascontiguousarray(words[s:s + (1 << 16), :k].T).astype(np.int64)
            acc = np.zeros(cols.shape[1], dtype=np.int64)
            for c in range(k):
                acc *= size
                acc += cols[c]
            key[s:s + (1 << 16)] = acc
        return key
    view = np.ascontiguousarray(words[:, :k].astype(np.uint8 if size <= 256 else np.uint16))
    _, inverse = np.unique(view.view(np.dtype((np.void, view.dtype.itemsize * k))).ravel(),
                           return_inverse=True)
    return inverse.astype(np.int64)


def _shared_key_rows(key: np.ndarray) -> np.ndarray:
    """Indices of rows whose key occurs more than once, grouped by key."""
    sk = np.sort(key)
    dup = np.unique(sk[1:][sk[1:] == sk[:-1]])
    if len(dup) == 0:
        return np.zeros(0, dtype=np.int64)
    # cheap residue filter before the exact membership test
    mod = 1 << 22
    table = np.zeros(mod, dtype=bool)
    table[dup % mod] = True
    cand = np.flatnonzero(table[key % mod])
    cand = cand[np.isin(key[cand], dup)]
    return cand[np.argsort(key[cand], kind="stable")]


def prefix_collision_scan(relators, size: Optional[int] = None) -> PrefixScan:
    """Pairs of relators ``w a``, ``w b`` sharing all but their last letter.

    Both are trivial in the quotient, so ``a = b`` there.
    """
    words = relators.words if isinstance(relators, RelatorSet) else relators
    words = np.asarray(words)
    if words.ndim != 2 or words.shape[1] < 2:
        raise InputError("prefix scan needs words of one length >= 2")
    if size is None:
        size = relators.spec.size if isinstance(relators, RelatorSet) else int(words.max()) + 2 & ~1
    n = words.shape[0]
    if n < 2:
        return PrefixScan(0, [], set())
    key = _prefix_keys(words, size)
    rows = _shared_key_rows(key)
    rk = key[rows]
    starts = np.flatnonzero(np.concatenate([[True], rk[1:] != rk[:-1]])) if len(rows) else np.zeros(0, int)
    sizes = np.diff(np.concatenate([starts, [len(rows)]]))
    collisions = int((sizes * (sizes - 1) // 2).sum())
    pairs, idents = [], set()
    last = words[:, -1]
    for s, c in zip(starts, sizes):
        members = rows[s:s + c]
        seen = {}
        for i in members.tolist():
            a = int(last[i])
            for b, j in seen.items():
                if b != a:
                    pairs.append((min(i, j), max(i, j)))
                    idents.add((min(a, b), max(a, b)))
            seen.setdefault(a, i)
    return PrefixScan(collisions, sorted(pairs), idents)


def birthday_expectation(n: int, m: int, ell: int):
    """Mean and standard deviation of the prefix-collision count for reduced words.

    Prefixes of uniform reduced words are uniform over reduced words of
    length ``ell - 1``, so pair indicators are pairwise uncorrelated.
    """
    p = 1.0 / (2 * m * (2 * m - 1) ** (ell - 2))
    pairs = n * (n - 1) / 2
    return pairs * p, math.sqrt(pairs * p * (1 - p))


@dataclass
class CollapseReport:
    identifications: set
    verdict: str
    evidence: list
    parity: bool  # all relator lengths even
    classes: int = 0
    killed: tuple = ()

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "identifications": sorted(list(p) for p in self.identifications),
            "evidence": [list(e) for e in self.evidence],
            "parity_even": self.parity,
            "classes": self.classes,
            "killed": list(self.killed),
        }


class _Letters:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, x, y):
        x, y = self.find(x), self.find(y)
        if x != y:
            self.parent[max(x, y)] = min(x, y)


def letter_collapse_verdict(identifications, lengths_even: bool, m: int,
                            involutions=frozenset(), killed=(), base_bipartite: bool = True,
                            evidence=()) -> CollapseReport:
    """Close the identifications under ``x ~ y => x^-1 ~ y^-1`` and classify.

    Z2 needs every letter in a single class, relators of even length only and
    a base group whose relations are all even.  A single class together with
    an odd relator, or every class containing a killed generator, is
    Trivial.  Anything else is Inconclusive.
    """
    uf = _Letters(2 * m)
    for g in involutions:
        uf.union(2 * g, 2 * g + 1)
    for a, b in identifications:
        uf.union(a, b)
        uf.union(a ^ 1, b ^ 1)
    for g in killed:
        uf.union(2 * g, 2 * g + 1)
    roots = {uf.find(x) for x in range(2 * m)}
    dead = {uf.find(2 * g) for g in killed}
    if m == 0 or roots <= dead:
        verdict = TRIVIAL
    elif len(roots) == 1:
        verdict = Z2 if (lengths_even and base_bipartite) else (TRIVIAL if not lengths_even else INCONCLUSIVE)
    else:
        verdict = INCONCLUSIVE
    return CollapseReport(set(identifications), verdict, list(evidence), lengths_even,
                          len(roots), tuple(sorted(killed)))


def plain_word_collapse_scan(model: GroupModel, relators) -> tuple:
    """Relators ``w a b`` with ``w`` trivial give ``a = b^-1``.

    Returns ``(identifications, hit indices)``.
    """
    words = np.asarray(relators.words if isinstance(relators, RelatorSet) else relators)
    if words.ndim != 2 or words.shape[1] < 2:
        raise InputError("scan needs words of one length >= 2")
    hit = np.flatnonzero(batch_is_identity(model, words[:, :-2]))
    idents = set()
    for i in hit.tolist():
        a, b = int(words[i, -2]), int(words[i, -1]) ^ 1
        if a != b:
            idents.add((min(a, b), max(a, b)))
    return idents, hit.tolist()


def geodesic_collapse_scan(relators: RelatorSet, ball) -> tuple:
    """Generators ``a`` with ``x a = y`` for relators ``x, y``; each is killed.

    Returns ``(killed generators, witnesses)``.
    """
    if relators.elements is None:
        idx = np.array([ball.lookup(w) for w in relators.rows()], dtype=np.int64)
    else:
        idx = np.asarray(relators.elements, dtype=np.int64)
    present = np.zeros(len(ball), dtype=bool)
    present[idx] = True
    uniq = np.unique(idx)
    killed, witnesses = [], []
    m = ball.model.alphabet.m
    for g in range(m):
        nb = ball.adjacency[uniq, 2 * g]
        ok = (nb >= 0)
        ok[ok] = present[nb[ok]]
        if ok.any():
            k = int(np.flatnonzero(ok)[0])
            killed.append(g)
            witnesses.append((int(uniq[k]), g, int(nb[k])))
    return tuple(killed), witnesses


# --- abelianization --------------------------------------------------------


def exponent_matrix(m: int, relators, involutions=frozenset()) -> list:
    """Generators x relators matrix of exponent sums, plus ``2 e_u`` columns."""
    rows = [[0] * 0 for _ in range(m)]
    cols = []
    for w in relators:
        v = [0] * m
        for x in w:
            x = int(x)
            g = x >> 1
            v[g] += 1 if (x & 1 == 0 or g in involutions) else -1
        cols.append(v)
    for g in sorted(involutions):
        v = [0] * m
        v[g] = 2
        cols.append(v)
    for g in range(m):
        rows[g] = [c[g] for c in cols]
    return rows


def abelianization(m: int, relators, involutions=frozenset()) -> list:
    """Invariant factors ``d_1 | d_2 | ...`` of the abelianised quotient (0 = free)."""
    A = exponent_matrix(m, relators, involutions)
    if not A or not A[0]:
        return [0] * m
    return _factors_from_columns(A)


def _factors_from_columns(A) -> list:
    # only the column lattice matters; drop repeats before the elimination
    cols = sorted({tuple(c) for c in zip(*A)} - {tuple([0] * len(A))})
    if not cols:
        return [0] * len(A)
    return invariant_factors([list(r) for r in zip(*cols)])


def exponent_pmf(kind: str, m: int, ell: int) -> tuple:
    """Exact law of the exponent-sum vector of one random word.

    Returns ``(vectors, probabilities)``.  Plain words only: each letter moves
    one coordinate by +-1 with probability ``1/(2m)``.
    """
    if kind != "plain":
        raise InputError("exact exponent law is implemented for plain words")
    span = 2 * ell + 1
    dist = np.zeros((span,) * m)
    dist[(ell,) * m] = 1.0
    for _ in range(ell):
        new = np.zeros_like(dist)
        for g in range(m):
            new += np.roll(dist, 1, axis=g) + np.roll(dist, -1, axis=g)
        dist = new / (2 * m)
    support = np.argwhere(dist > 0)
    probs = dist[tuple(support.T)]
    return support - ell, probs / probs.sum()


def abelianization_by_law(m: int, ell: int, d, rng: RngStream, kind: str = "plain",
                          budget: int = 10 ** 12) -> dict:
    """Abelianisation of a density-``d`` quotient without drawing the words.

    The abelianisation only sees the multiset of exponent-sum vectors, whose
    joint law is Multinomial(N, p) over the exact single-word law ``p``.
    """
    spec = MeasureSpec(kind, m, ell)
    n = density_count(density_base(spec), d, ell, budget=budget)
    vecs, probs = exponent_pmf(kind, m, ell)
    counts = rng.generator().multinomial(n, probs)
    used = vecs[counts > 0]
    A = [[int(v[g]) for v in used] for g in range(m)]
    factors = _factors_from_columns(A) if len(used) else [0] * m
    return {"count": n, "distinct_vectors": int(len(used)), "factors": factors}


# --- sweeps ------------------------------------------------------------------


@dataclass
class SweepConfig:
    measure: str = "reduced"
    m: int = 2
    group: Optional[str] = None
    ells: tuple = (14, 17, 20, 23)
    densities: tuple = (0.35, 0.45, 0.55, 0.65)
    trials: int = 50
    seed: int = 0
    L: int = 0
    budget: int = DEFAULT_SAMPLE_BUDGET
    count_override: Optional[int] = None
    ball_budget: int = 5_000_000


def cell_feasibility(cfg: SweepConfig, ball_sizes: Optional[dict] = None) -> list:
    """``(ell, d, N, feasible, reason)`` for every grid cell."""
    out = []
    for ell in cfg.ells:
        spec = MeasureSpec(cfg.measure, cfg.m, ell, cfg.L)
        for d in cfg.densities:
            if cfg.measure == "geodesic":
                base = (ball_sizes or {}).get(ell)
                if base is None:
                    out.append((ell, d, None, True, ""))
                    continue
            else:
                base = density_base(spec)
            try:
                n = density_count(base, d, ell, budget=cfg.budget, override=cfg.count_override)
                out.append((ell, d, n, True, ""))
            except CapacityError as exc:
                out.append((ell, d, None, False, str(exc)))
    return out


def _collapse_one(model, rs: RelatorSet, ball=None) -> tuple:
    spec = rs.spec
    m = spec.m
    alphabet = model.alphabet
    counters = {"n_relators": len(rs)}
    idents, killed, evidence = set(), (), []
    if spec.kind == "geodesic":
        killed, wit = geodesic_collapse_scan(rs, ball)
        counters["kills"] = len(killed)
        evidence = wit
        lengths = {len(w) for w in rs.rows()}
        even = all(x % 2 == 0 for x in lengths)
    else:
        scan = prefix_collision_scan(rs)
        idents |= scan.identifications
        counters["collisions"] = scan.collisions
        evidence = scan.pairs[:16]
        if spec.kind == "plain":
            more, hits = plain_word_collapse_scan(model, rs)
            idents |= more
            counters["scan_hits"] = len(hits)
        even = spec.ell % 2 == 0
    rep = letter_collapse_verdict(idents, even, m, alphabet.involutions, killed,
                                  model.bipartite, evidence)
    return rep, counters


def collapse_trial(model, spec: MeasureSpec, d, rng: RngStream, ball=None,
                   count_override=None, budget=DEFAULT_SAMPLE_BUDGET) -> tuple:
    rs = sample_relator_set(spec, d, rng, ball=ball, count_override=count_override, budget=budget)
    rep, counters = _collapse_one(model, rs, ball)
    return rs, rep, counters


def phase_sweep(cfg: SweepConfig, on_record=None) -> list:
    """Run the collapse pipeline on every feasible (ell, d, trial) cell.

    The stream of trial ``k`` at length ``ell`` does not depend on ``d``, and
    relator sets are prefix-consistent, so for each (ell, trial) the sets grow
    with ``d`` and the collapsed fraction is monotone in ``d``.
    """
    from .ball import cayley_ball

    group_expr = cfg.group or f"free({cfg.m})"
    model = parse_group(group_expr)
    if model.alphabet.m != cfg.m:
        raise InputError(f"group {group_expr} has {model.alphabet.m} generators, config says m={cfg.m}")
    records = []
    for ell in cfg.ells:
        spec = MeasureSpec(cfg.measure, cfg.m, ell, cfg.L)
        ball = None
        if cfg.measure == "geodesic":
            ball = cayley_ball(model, ell + cfg.L, node_budget=cfg.ball_budget)
        for d in cfg.densities:
            base = density_base(spec, ball)
            try:
                n = density_count(base, d, ell, budget=cfg.budget, override=cfg.count_override)
            except CapacityError as exc:
                log.warning("skipping cell ell=%d d=%s: %s", ell, d, exc)
                rec = {"kind": "sweep", "status": "skipped", "reason": str(exc), "ell": ell,
                       "d": _num(d), "measure": cfg.measure, "group": group_expr}
                records.append(rec)
                if on_record:
                    on_record(rec)
                continue
            expected = None
            if cfg.measure == "reduced" and free_rank(model) is not None:
                mu, sd = birthday_expectation(n, cfg.m, ell)
                expected = {"mean": mu, "sd": sd}
            for k in range(cfg.trials):
                rng = RngStream(cfg.seed, (ell, k))
                _, rep, counters = collapse_trial(model, spec, d, rng, ball, cfg.count_override, cfg.budget)
                rec = {
                    "kind": "sweep",
                    "status": "ok",
                    "ell": ell,
                    "d": _num(d),
                    "trial": k,
                    "seed": cfg.seed,
                    "stream": [ell, k],
                    "measure": cfg.measure,
                    "group": group_expr,
                    "verdict": rep.verdict,
                    "collapsed": rep.verdict != INCONCLUSIVE,
                    "classes": rep.classes,
                }
                rec.update(counters)
                if expected is not None:
                    rec["expected_collisions"] = expected["mean"]
                    rec["expected_collisions_sd"] = expected["sd"]
                records.append(rec)
                if on_record:
                    on_record(rec)
    return records


def _num(d):
    if isinstance(d, Fraction):
        return float(d)
    return d


def sweep_curve(records) -> list:
    """Rows ``(ell, d, fraction_collapsed, n_trials)`` sorted by (ell, d)."""
    cells = {}
    for r in records:
        if r.get("kind") != "sweep" or r.get("status") != "ok":
            continue
        c = cells.setdefault((r["ell"], r["d"]), [0, 0])
        c[0] += bool(r["collapsed"])
        c[1] += 1
    return [(ell, d, hit / n, n) for (ell, d), (hit, n) in sorted(cells.items())]


# --- axiom probes ------------------------------------------------------------


@dataclass
class AxiomProbeReport:
    axiom: int
    grid: list
    log_probs: list  # base 2m, None where censored
    hits: list
    trials: int
    slope: Optional[float]
    slope_ci: Optional[tuple]
    reference: dict = field(default_factory=dict)
    censored: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "axiom": self.axiom,
            "grid": self.grid,
            "log_probs": self.log_probs,
            "hits": self.hits,
            "trials": self.trials,
            "exponent": None if self.slope is None else -self.slope,
            "exponent_ci": None if self.slope_ci is None else [-self.slope_ci[1], -self.slope_ci[0]],
            "reference": self.reference,
            "censored": self.censored,
        }


def _wls(xs, ys, ws):
    xs, ys, ws = map(np.asarray, (xs, ys, ws))
    W = ws.sum()
    xm, ym = (ws * xs).sum() / W, (ws * ys).sum() / W
    sxx = (ws * (xs - xm) ** 2).sum()
    slope = (ws * (xs - xm) * (ys - ym)).sum() / sxx
    return float(slope), float(math.sqrt(1 / sxx))


def axiom_probe(model: GroupModel, spec_kind: str, axiom: int, grid: Sequence,
                trials: int, rng: RngStream, ball=None) -> AxiomProbeReport:
    """Empirical exponents of the axioms on a grid of lengths.

    Axiom 3: ``grid`` holds pairs ``(|x|, |y|)``; estimates
    ``log_2m Pr(x y = e)`` for independent ``x``, ``y`` and fits its slope
    against ``|x| + |y|``.  Axiom 2: ``grid`` holds lengths ``t``; estimates
    ``log_2m Pr(|x| < kappa t)`` with ``kappa = (1-theta)/theta``.
    """
    from .spectra import return_prob_exact, theta_dp

    m = model.alphabet.m
    size = 2 * m
    lb = math.log(size)
    xs, logs, hits_list, censored = [], [], [], []
    reference = {}
    if axiom == 3 and spec_kind == "geodesic":
        return _geodesic_axiom3(model, grid, trials, rng, ball)
    if axiom == 3:
        if spec_kind != "plain":
            raise InputError("axiom 3 probe implemented for plain and geodesic measures")
        for k, (a, b) in enumerate(grid):
            t = int(a) + int(b)
            if t == 0:
                hits = trials
            else:
                w = sample_words(MeasureSpec("plain", m, t), trials, rng.child(k))
                hits = int(batch_is_identity(model, w).sum())
            xs.append(t)
            hits_list.append(hits)
        try:
            series = return_prob_exact(model, max(xs) if xs else 0)
            exact = [float(series.log_p[t] / lb) for t in xs]
            reference["exact_log_probs"] = exact
            reference["asymptotic_exponent"] = 1 - theta_dp(model, 4000).value
        except InputError:
            pass
    elif axiom == 2:
        th = theta_dp(model, 2000).value
        kappa = (1 - th) / th
        reference["kappa"] = kappa
        for k, t in enumerate(grid):
            t = int(t)
            w = sample_words(MeasureSpec("plain", m, t), trials, rng.child(k))
            norms = _norms(model, w)
            hits = int((norms < kappa * t).sum())
            xs.append(t)
            hits_list.append(hits)
    else:
        raise InputError(f"axiom {axiom} not probed (2 or 3)")
    pts = []
    for x, h in zip(xs, hits_list):
        if h == 0:
            censored.append(x)
            logs.append(None)
            continue
        p = h / trials
        logs.append(math.log(p) / lb)
        if x > 0:
            var = (1 - p) / (h * lb * lb) if h < trials else 1e-12
            pts.append((x, math.log(p) / lb, 1 / max(var, 1e-12)))
    if len(censored) == len(xs):
        raise InsufficientSignal("every grid point is censored (no hits)")
    if len(pts) < 2:
        return AxiomProbeReport(axiom, list(grid), logs, hits_list, trials, None, None, reference, censored)
    slope, se = _wls(*zip(*pts))
    exact = reference.get("exact_log_probs")
    if exact is not None:
        # the exact curve fitted with the empirical weights is what the estimate targets
        ex = dict(zip(xs, exact))
        if all(np.isfinite(ex[x]) for x, _, _ in pts):
            reference["finite_horizon_exponent"] = -_wls([x for x, _, _ in pts], [ex[x] for x, _, _ in pts],
                                                        [w for _, _, w in pts])[0]
    ci = (slope - 1.96 * se, slope + 1.96 * se)
    return AxiomProbeReport(axiom, [list(g) if isinstance(g, tuple) else g for g in grid], logs,
                            hits_list, trials, slope, ci, reference, censored)


def _norms(model, words):
    from .groups import _stack_reduce

    if free_rank(model) is not None:
        return _stack_reduce(words)
    return np.array([model.elem_norm(model.element(r)) for r in words.tolist()])


def _geodesic_axiom3(model, grid, trials, rng, ball):
    from .words import inverse_word

    if ball is None:
        raise CapacityError("geodesic probe needs a Cayley ball")
    m = model.alphabet.m
    lb = math.log(2 * m)
    logs, hits_list, xs, refs = [], [], [], []
    for k, (a, b) in enumerate(grid):
        a, b = int(a), int(b)
        g = rng.child(k).generator()
        pa, pb = ball.slice_indices(a, 0), ball.slice_indices(b, 0)
        xi = pa[g.integers(0, len(pa), trials)]
        yi = pb[g.integers(0, len(pb), trials)]
        inv_index = {int(i): ball.lookup(inverse_word(ball.word(int(i)))) for i in np.unique(xi)}
        hits = int(sum(inv_index[int(x)] == int(y) for x, y in zip(xi.tolist(), yi.tolist())))
        hits_list.append(hits)
        xs.append(a + b)
        logs.append(math.log(hits / trials) / lb if hits else None)
        size = len(pa)
        # exponent in base (2m)^g with g measured at this radius
        growth = math.log(size) / (a * lb) if a else 0.0
        refs.append({"sphere_size": size, "exact_prob": (1 / size) if a == b else 0.0,
                     "exponent_base_2m_g": (-math.log(hits / trials) / ((a + b) * growth * lb))
                     if hits and growth else None})
    return AxiomProbeReport(3, [list(g) for g in grid], logs, hits_list, trials, None, None,
                            {"geodesic": refs, "reference_exponent": 0.5}, [])
