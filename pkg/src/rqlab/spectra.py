"""Growth, cogrowth, gross cogrowth and spectral radius.

Return probabilities are kept as natural logarithms so that horizons where
``P_t`` is far below the float range (``P_4000 ~ 1e-1070`` for the
``F_8 x Z/2`` example) still carry full relative precision.
"""

from __future__ import annotations

import logging
import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import logsumexp

from .errors import DomainError, InputError, InsufficientSignal, MethodNotAvailable, NumericError
from .groups import DirectWithFinite, Finite, GroupModel, batch_is_identity, free_rank
from .sampler import MeasureSpec, RngStream, count_words, sample_words

log = logging.getLogger(__name__)

NEG_INF = -np.inf


@dataclass
class SpectralEstimate:
    quantity: str  # "g" | "eta" | "theta" | "lambda"
    value: float
    method: str  # closed | dp | ball | mc | conversion
    base: Optional[float] = None
    horizon: Optional[int] = None
    stderr: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "quantity": self.quantity,
            "value": self.value,
            "method": self.method,
            "base": self.base,
            "horizon": self.horizon,
            "stderr": self.stderr,
        }
        out.update(self.extra)
        return out


@dataclass
class ReturnSeries:
    """``log_p[t]`` is the natural log of the probability of being at e at time t."""

    model: str
    log_p: np.ndarray
    method: str
    letters: int
    counts: Optional[list] = None  # exact return counts, when requested

    @property
    def horizon(self) -> int:
        return len(self.log_p) - 1

    def prob(self, t: int) -> float:
        return float(np.exp(self.log_p[t]))

    def ratio(self, t: int) -> Fraction:
        """``P_t`` as an exact fraction (needs the series built with ``exact_counts``)."""
        if self.counts is None:
            raise InputError("series was built without exact counts")
        return Fraction(self.counts[t], self.letters ** t)


# --- closed forms ---------------------------------------------------------


def lambda_free(k: int) -> float:
    if k < 1:
        raise DomainError("rank must be >= 1")
    return math.sqrt(2 * k - 1) / k


def kesten_z2_product(k: int) -> float:
    """Spectral radius of ``F_k x Z/2`` for the walk on its ``2k + 2`` letters."""
    if k < 1:
        raise DomainError("rank must be >= 1")
    return (1 + math.sqrt(2 * k - 1)) / (k + 1)


def theta_free(m: int) -> float:
    return 0.5 * math.log(8 * m - 4) / math.log(2 * m)


def theta_from_lambda(lam: float, letters: int) -> float:
    if not lam > 0 or lam > 1 + 1e-12:
        raise DomainError(f"spectral radius {lam} outside (0, 1]")
    if letters < 2:
        raise DomainError("need at least two letters")
    return 1 + math.log(lam) / math.log(letters)


def lambda_from_theta(theta: float, letters: int) -> float:
    if letters < 2:
        raise DomainError("need at least two letters")
    return float(letters) ** (theta - 1)


def eta_from_theta(theta: float, m: int) -> float:
    """Cogrowth from gross cogrowth through ``(2m)^theta = q^eta + q^(1-eta)``, ``q = 2m-1``.

    With ``x = q^eta`` this is ``x^2 - S x + q = 0``; the larger root is the
    one with ``eta >= 1/2``.
    """
    if m < 2:
        raise DomainError("cogrowth needs m >= 2")
    q = 2 * m - 1
    s = (2.0 * m) ** theta
    disc = s * s - 4 * q
    if disc < 0:
        if disc > -1e-9 * s * s:
            disc = 0.0
        else:
            raise DomainError(f"theta={theta} is below the minimum {0.5 * math.log(4 * q) / math.log(2 * m):.12f}")
    x = (s + math.sqrt(disc)) / 2
    return math.log(x) / math.log(q)


def theta_from_eta(eta: float, m: int) -> float:
    if m < 2:
        raise DomainError("cogrowth needs m >= 2")
    if not 0 <= eta <= 1:
        raise DomainError(f"eta={eta} outside [0, 1]")
    q = 2 * m - 1
    return math.log(q ** eta + q ** (1 - eta)) / math.log(2 * m)


def grigorchuk_residual(theta: float, eta: float, m: int) -> float:
    q = 2 * m - 1
    return abs((2.0 * m) ** theta - q ** eta - q ** (1 - eta))


# --- exact return probabilities -------------------------------------------


def _free_step(v: np.ndarray, lup: float, ldown: float) -> np.ndarray:
    """One step of the distance chain on log-probabilities ``v[j]``."""
    out = np.full_like(v, NEG_INF)
    out[1] = v[0]  # from e every letter goes up
    out[2:] = v[1:-1] + lup
    out[:-1] = np.logaddexp(out[:-1], v[1:] + ldown)
    return out


def return_prob_exact(model: GroupModel, T: int, exact_counts: bool = False) -> ReturnSeries:
    """Exact ``P_t`` for ``t <= T`` from a finite projection of the walk.

    Free-like models use the distance chain, ``F x (finite)`` the product of
    the distance chain with the finite walk, and finite groups their own
    transition matrix.  The chain runs in log space; ``exact_counts`` also
    runs it over the integers so that ``series.ratio(t)`` is exact.
    """
    if T < 0:
        raise InputError("horizon must be >= 0")
    if exact_counts:
        series = return_prob_exact(model, T)
        series.counts = return_counts_exact(model, T)
        return series
    n = model.alphabet.size
    k = free_rank(model)
    out = np.full(T + 1, NEG_INF)
    out[0] = 0.0
    if k is not None:
        lup, ldown = math.log((2 * k - 1) / (2 * k)), math.log(1 / (2 * k))
        v = np.full(T + 2, NEG_INF)
        v[0] = 0.0
        for t in range(1, T + 1):
            v = _free_step(v, lup, ldown)
            out[t] = v[0]
        return ReturnSeries(model.expr, out, "dp", n)
    if isinstance(model, Finite):
        P = _finite_transition(model, range(n))
        vec = np.zeros(model.order)
        vec[0] = 1.0
        for t in range(1, T + 1):
            vec = vec @ P
            out[t] = math.log(vec[0]) if vec[0] > 0 else NEG_INF
        return ReturnSeries(model.expr, out, "dp", n)
    if isinstance(model, DirectWithFinite) and free_rank(model.inner) is not None:
        k = free_rank(model.inner)
        fin = model.finite
        split = model.split
        with np.errstate(divide="ignore"):
            lfree = math.log(split / n)
            Pf = _finite_transition(fin, range(n - split))
            lPf = np.log(Pf) + math.log((n - split) / n)
        lup, ldown = math.log((2 * k - 1) / (2 * k)), math.log(1 / (2 * k))
        v = np.full((T + 2, fin.order), NEG_INF)
        v[0, 0] = 0.0
        for t in range(1, T + 1):
            free_part = np.full_like(v, NEG_INF)
            free_part[1] = v[0]
            free_part[2:] = v[1:-1] + lup
            free_part[:-1] = np.logaddexp(free_part[:-1], v[1:] + ldown)
            fin_part = logsumexp(v[:, :, None] + lPf[None, :, :], axis=1)
            v = np.logaddexp(free_part + lfree, fin_part)
            out[t] = v[0, 0]
        return ReturnSeries(model.expr, out, "dp", n)
    raise MethodNotAvailable(
        f"no exact return-probability chain for {model.expr}; use --method ball or mc"
    )


def _finite_transition(fin: Finite, letters) -> np.ndarray:
    P = np.zeros((fin.order, fin.order))
    letters = list(letters)
    for g in range(fin.order):
        for x in letters:
            P[g, fin.table[g, fin.letter_elem[x]]] += 1.0 / len(letters)
    return P


def return_counts_exact(model: GroupModel, T: int) -> list:
    """Exact number of words of each length ``t <= T`` equal to e (big integers)."""
    k = free_rank(model)
    if k is not None:
        v = [1] + [0] * (T + 1)
        out = [1]
        for _ in range(T):
            w = [0] * (T + 2)
            w[1] += v[0] * 2 * k
            for j in range(1, T + 1):
                if v[j]:
                    w[j + 1] += v[j] * (2 * k - 1)
                    w[j - 1] += v[j]
            v = w
            out.append(v[0])
        return out
    if isinstance(model, DirectWithFinite) and free_rank(model.inner) is not None:
        k = free_rank(model.inner)
        fin = model.finite
        nf = model.alphabet.size - model.split
        moves = [[0] * fin.order for _ in range(fin.order)]
        for g in range(fin.order):
            for x in range(nf):
                moves[g][int(fin.table[g, fin.letter_elem[x]])] += 1
        v = [[0] * fin.order for _ in range(T + 2)]
        v[0][0] = 1
        out = [1]
        for _ in range(T):
            w = [[0] * fin.order for _ in range(T + 2)]
            for j in range(T + 1):
                for g in range(fin.order):
                    c = v[j][g]
                    if not c:
                        continue
                    if j == 0:
                        w[1][g] += c * 2 * k
                    else:
                        w[j + 1][g] += c * (2 * k - 1)
                        w[j - 1][g] += c
                    for h in range(fin.order):
                        if moves[g][h]:
                            w[j][h] += c * moves[g][h]
            v = w
            out.append(v[0][0])
        return out
    if isinstance(model, Finite):
        n = model.alphabet.size
        v = [1] + [0] * (model.order - 1)
        out = [1]
        for _ in range(T):
            w = [0] * model.order
            for g, c in enumerate(v):
                if c:
                    for x in range(n):
                        w[int(model.table[g, model.letter_elem[x]])] += c
            v = w
            out.append(v[0])
        return out
    raise MethodNotAvailable(f"no exact counting chain for {model.expr}")


def gross_cogrowth_from_series(series: ReturnSeries, base: Optional[float] = None) -> SpectralEstimate:
    """theta from return probabilities at even horizons.

    The raw value ``1 + log_b(P_t)/t`` and the two-point value
    ``1 + log_b(P_t / P_{t-2})/2`` are both lower bounds for theta: even
    return probabilities are supermultiplicative and log-convex in ``t/2``.
    The two-point value is reported as ``value``.
    """
    b = float(base or series.letters)
    lb = math.log(b)
    ts = [t for t in range(2, series.horizon + 1, 2) if np.isfinite(series.log_p[t])]
    if not ts:
        raise NumericError("return series has no nonzero even entries; theta undefined")
    t = ts[-1]
    raw = 1 + series.log_p[t] / (t * lb)
    if len(ts) >= 2 and ts[-2] == t - 2:
        extrap = 1 + (series.log_p[t] - series.log_p[t - 2]) / (2 * lb)
    else:
        extrap = raw
    path = [(s, float(1 + series.log_p[s] / (s * lb))) for s in ts]
    return SpectralEstimate(
        "theta", float(extrap), series.method, base=b, horizon=t,
        extra={"theta_raw": float(raw), "theta_extrapolated": float(extrap), "series": path},
    )


def theta_dp(model: GroupModel, T: int) -> SpectralEstimate:
    return gross_cogrowth_from_series(return_prob_exact(model, T))


def norm_distribution_exact_free(m: int, ell: int) -> np.ndarray:
    """Natural-log law of the norm of a length-``ell`` simple random walk on F_m."""
    if m < 1 or ell < 0:
        raise InputError("need m >= 1 and ell >= 0")
    v = np.full(ell + 2, NEG_INF)
    v[0] = 0.0
    lup, ldown = math.log((2 * m - 1) / (2 * m)), math.log(1 / (2 * m))
    for _ in range(ell):
        v = _free_step(v, lup, ldown)
    return v[: ell + 1]


def escape_speed_free(m: int, ell: int) -> float:
    logp = norm_distribution_exact_free(m, ell)
    return float(np.sum(np.exp(logp) * np.arange(ell + 1)) / ell)


def norm_tail_check(m: int, ell: int, grid) -> list:
    """Compare ``Pr(|B_ell| <= l')`` with ``(2m)^(theta l' - (1-theta) ell)``.

    Since ``Pr(|B_ell| = L) <= (2m)^L P_{ell+L}`` and ``P_t <= lambda^t``,
    the ratio ``slack`` is at most ``l' + 1``.
    """
    logp = norm_distribution_exact_free(m, ell)
    theta = theta_free(m)
    l2m = math.log(2 * m)
    out = []
    for lp in grid:
        lp = int(lp)
        lhs = float(logsumexp(logp[: lp + 1]))
        rhs = (theta * lp - (1 - theta) * ell) * l2m
        slack = lhs - rhs
        out.append({
            "ell_prime": lp,
            "log_prob": lhs,
            "log_bound": rhs,
            "log_slack": slack,
            "allowed_log_slack": math.log(lp + 1),
            "ok": slack <= math.log(lp + 1) + 1e-9,
        })
    return out


# --- Monte Carlo ------------------------------------------------------------


def return_prob_mc(model: GroupModel, t: int, trials: int, rng: RngStream) -> SpectralEstimate:
    """Fraction of ``trials`` uniform words of length ``t`` equal to e.

    Only meaningful for small ``t`` (about 30 or less) where ``P_t`` is
    within reach of the trial count.
    """
    if t > 30:
        log.warning("Monte Carlo return probability at t=%d is unlikely to see any hits", t)
    spec = MeasureSpec("plain", model.alphabet.m, max(t, 1))
    hits = _count_hits(model, spec, trials, rng, t)
    p = hits / trials
    se = math.sqrt(p * (1 - p) / trials)
    return SpectralEstimate("P_t", p, "mc", base=model.alphabet.size, horizon=t, stderr=se,
                            extra={"hits": hits, "trials": trials})


def _count_hits(model, spec, trials, rng, t=None):
    hits = 0
    chunk = 1 << 18
    for c in range(-(-trials // chunk)):
        n = min(chunk, trials - c * chunk)
        w = sample_words(spec, n, rng.child(c))
        if t is not None:
            w = w[:, :t]
        hits += int(batch_is_identity(model, w).sum())
    return hits


def cogrowth_mc_reduced(model: GroupModel, ell: int, trials: int, rng: RngStream) -> SpectralEstimate:
    """eta from the fraction of uniform reduced words of length ``ell`` equal to e.

    With no hits the estimate is censored: ``value`` is then the upper bound
    obtained from three expected hits (the 95% one-sided bound).
    """
    m = model.alphabet.m
    spec = MeasureSpec("reduced", m, ell)
    hits = _count_hits(model, spec, trials, rng)
    extra = {"hits": hits, "trials": trials}
    if m == 1:
        extra["degenerate"] = True
        return SpectralEstimate("eta", 1.0 if hits else 0.0, "mc", base=1, horizon=ell, extra=extra)
    q = 2 * m - 1
    total = count_words("reduced", m, ell)
    lq = math.log(q)
    if hits == 0:
        extra["censored"] = True
        bound = (math.log(3.0 / trials) + math.log(total)) / (ell * lq)
        return SpectralEstimate("eta", bound, "mc", base=q, horizon=ell, extra=extra)
    p = hits / trials
    value = (math.log(p) + math.log(total)) / (ell * lq)
    se = math.sqrt((1 - p) / (p * trials)) / (ell * lq)
    extra["censored"] = False
    return SpectralEstimate("eta", value, "mc", base=q, horizon=ell, stderr=se, extra=extra)


def cogrowth_exact_count(model: GroupModel, ell: int, chunk: int = 1 << 16) -> int:
    """Number of reduced words of length ``ell`` equal to e, by enumeration."""
    m = model.alphabet.m
    n = 2 * m
    total = count_words("reduced", m, ell)
    hits = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        w = _reduced_from_index(idx, m, ell)
        hits += int(batch_is_identity(model, w).sum())
    return hits


def _reduced_from_index(idx: np.ndarray, m: int, ell: int) -> np.ndarray:
    """Bijection from ``[0, 2m(2m-1)^(ell-1))`` onto reduced words."""
    n = 2 * m
    out = np.empty((len(idx), ell), dtype=np.int64)
    rest = idx.copy()
    digits = []
    for _ in range(ell - 1):
        digits.append(rest % (n - 1))
        rest //= n - 1
    out[:, 0] = rest
    prev = rest
    for c in range(1, ell):
        r = digits[ell - 1 - c]
        prev = r + (r >= (prev ^ 1))
        out[:, c] = prev
    return out


# --- balls ----------------------------------------------------------------


def growth_estimate(ball, base: Optional[float] = None) -> SpectralEstimate:
    sizes = ball.sphere_sizes()
    rho = len(sizes) - 1
    if rho < 1:
        raise InputError("growth needs a ball of radius >= 1")
    b = float(base or ball.model.alphabet.size)
    seq = [(r, math.log(s) / (r * math.log(b)) if s else 0.0) for r, s in enumerate(sizes) if r]
    return SpectralEstimate("g", seq[-1][1], "ball", base=b, horizon=rho,
                            extra={"sphere_sizes": sizes, "series": seq})


def walk_matrix(ball) -> sp.csr_matrix:
    """Simple random walk restricted to the ball (killed on exit)."""
    n, k = ball.adjacency.shape
    rows = np.repeat(np.arange(n), k)
    cols = ball.adjacency.ravel()
    keep = cols >= 0
    data = np.full(int(keep.sum()), 1.0 / k)
    return sp.csr_matrix((data, (rows[keep], cols[keep])), shape=(n, n))


def spectral_radius_ball(ball, tol: float = 1e-12, maxiter: int = 20000) -> SpectralEstimate:
    """Lower bound for lambda: the top eigenvalue of the killed walk on the ball.

    The value returned is the Rayleigh quotient of the nonnegative vector
    ``|v|`` for the computed top eigenvector ``v``; any Rayleigh quotient of
    the compressed operator is at most its norm, hence at most lambda.
    """
    A = walk_matrix(ball)
    n = A.shape[0]
    if n <= 400:
        w, V = np.linalg.eigh(A.toarray())
        v = V[:, -1]
    else:
        try:
            _, V = eigsh(A, k=1, which="LA", tol=tol, maxiter=maxiter,
                         v0=np.ones(n) / math.sqrt(n))
        except ArpackNoConvergence as exc:
            raise NumericError(f"eigenvalue iteration did not converge on {n} nodes") from exc
        v = V[:, 0]
    v = np.abs(v)
    value = float(v @ (A @ v) / (v @ v))
    return SpectralEstimate("lambda", value, "ball", base=ball.model.alphabet.size,
                            horizon=ball.radius, extra={"nodes": int(n), "complete": ball.complete})


# --- critical densities ----------------------------------------------------


def critical_density(kind: str, value: float, m: Optional[int] = None) -> dict:
    """Density threshold for a word measure from the matching spectral value.

    plain: 1 - theta; reduced/cyclic: 1 - eta; geodesic: 1/2 in the
    annulus-count base, with ``g/2`` (base 2m) reported as the triviality
    threshold when ``value`` is the growth g.
    """
    if kind == "plain":
        return {"kind": kind, "critical_density": 1 - value, "from": "theta"}
    if kind in ("reduced", "cyclic"):
        return {"kind": kind, "critical_density": 1 - value, "from": "eta"}
    if kind == "geodesic":
        return {"kind": kind, "critical_density": 0.5, "triviality_density_base_2m": value / 2, "from": "g"}
    raise InputError(f"unknown measure {kind!r}")
