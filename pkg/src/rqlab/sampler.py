"""Word measures and density-model relator sets.

Fixed-length measures are sampled in blocks of ``BLOCK`` words, each block
driven by its own child stream, so the first ``N`` words of a relator set do
not depend on how many words were requested.  Relator sets at a smaller
density are therefore prefixes of the sets at larger density for the same
seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import CapacityError, DomainError, InputError
from .words import Alphabet, is_cyclically_reduced, is_reduced

KINDS = ("plain", "reduced", "cyclic", "geodesic")
BLOCK = 1 << 16
DEFAULT_SAMPLE_BUDGET = 10_000_000


@dataclass(frozen=True)
class MeasureSpec:
    kind: str
    m: int
    ell: int
    L: int = 0
    approximate: bool = False  # cyclic: count with (2m-1)^ell, as in the textbook argument

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown measure {self.kind!r}; expected one of {KINDS}")
        if self.ell < 1:
            raise InputError("word length must be >= 1")
        if self.m < 1:
            raise InputError("need at least one generator")
        if self.L < 0:
            raise InputError("annulus half-width must be >= 0")

    @property
    def size(self) -> int:
        return 2 * self.m

    def to_dict(self) -> dict:
        return {"kind": self.kind, "m": self.m, "ell": self.ell, "L": self.L, "approximate": self.approximate}


@dataclass(frozen=True)
class RngStream:
    """Reproducible PCG64 stream addressed by ``(seed, key)``."""

    seed: int
    key: tuple = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.PCG64(ss))


def _letter_dtype(size: int):
    return np.uint8 if size <= 256 else np.uint16


# --- exact counts ---------------------------------------------------------


def _transfer(m: int) -> list:
    n = 2 * m
    return [[0 if y == (x ^ 1) else 1 for y in range(n)] for x in range(n)]


def _matmul(a, b):
    n = len(a)
    return [[sum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def _matpow(a, e):
    n = len(a)
    out = [[int(i == j) for j in range(n)] for i in range(n)]
    while e:
        if e & 1:
            out = _matmul(out, a)
        a = _matmul(a, a)
        e >>= 1
    return out


def count_words(kind: str, m: int, ell: int, ball=None, L: int = 0, approximate: bool = False) -> int:
    if ell < 1:
        raise InputError("word length must be >= 1")
    if kind == "plain":
        return (2 * m) ** ell
    if kind == "reduced":
        return 2 * m * (2 * m - 1) ** (ell - 1)
    if kind == "cyclic":
        if approximate:
            return (2 * m - 1) ** ell
        t = _matpow(_transfer(m), ell)
        return sum(t[i][i] for i in range(2 * m))
    if kind == "geodesic":
        if ball is None:
            raise CapacityError("geodesic counts need a Cayley ball")
        return int(len(ball.slice_indices(ell, L)))
    raise InputError(f"unknown measure {kind!r}")


def density_base(spec: MeasureSpec, ball=None) -> int:
    """Count whose ``d``-th power is the number of relators.

    Plain words use ``(2m)^ell``; reduced and cyclically reduced words use
    ``(2m-1)^ell``; geodesic words use the annulus cardinality, so density
    1/2 means the square root of the annulus size.
    """
    if spec.kind == "plain":
        return spec.size ** spec.ell
    if spec.kind in ("reduced", "cyclic"):
        return (spec.size - 1) ** spec.ell
    return count_words("geodesic", spec.m, spec.ell, ball=ball, L=spec.L)


def _as_fraction(d) -> Fraction:
    if isinstance(d, Fraction):
        return d
    if isinstance(d, float):
        return Fraction(repr(d))
    return Fraction(d)


def _iroot(n: int, q: int) -> int:
    """floor(n ** (1/q)) for nonnegative integers."""
    if n < 2 or q == 1:
        return n
    x = 1 << -(-n.bit_length() // q)
    while True:
        y = ((q - 1) * x + n // x ** (q - 1)) // q
        if y >= x:
            break
        x = y
    while x ** q > n:
        x -= 1
    while (x + 1) ** q <= n:
        x += 1
    return x


def density_count(base: int, d, ell: Optional[int] = None, budget: Optional[int] = None,
                  override: Optional[int] = None) -> int:
    """``floor(base ** d)``, exact for rational ``d``.

    ``override`` replaces the count outright (the subexponential regime that
    density 0 stands for).  A count above ``budget`` raises ``CapacityError``
    naming the largest feasible density.
    """
    if override is not None:
        if override < 0:
            raise InputError("count override must be >= 0")
        n = int(override)
    else:
        d = _as_fraction(d)
        if not 0 <= d <= 1:
            raise DomainError(f"density {d} outside [0, 1]")
        if base < 1:
            raise DomainError("base must be >= 1")
        if d == 0 or base == 1:
            n = 1
        else:
            log_n = float(d) * math.log(base)
            if budget is not None and log_n > math.log(budget) + 1.0:
                n = None
            elif d.denominator <= 4096:
                n = _iroot(base ** d.numerator, d.denominator)
            else:
                n = math.floor(math.exp(log_n))
            if n is None:
                _over_budget(base, budget, ell, d)
    if budget is not None and n > budget:
        _over_budget(base, budget, ell, d if override is None else None)
    return n


def _over_budget(base, budget, ell, d):
    dmax = math.log(budget) / math.log(base) if base > 1 else 1.0
    where = f" at ell={ell}" if ell is not None else ""
    raise CapacityError(
        f"relator count for d={d}{where} exceeds the sample budget {budget}; "
        f"largest feasible density is {dmax:.4f}"
    )


# --- samplers -------------------------------------------------------------


def _reduced_block(g: np.random.Generator, n: int, m: int, ell: int) -> np.ndarray:
    size = 2 * m
    dt = _letter_dtype(size)
    if size == 2:
        first = g.integers(0, 2, n).astype(dt)
        return np.repeat(first[:, None], ell, axis=1)
    span = size * (size - 1)
    raw_dt = np.uint8 if span <= 256 else (np.uint16 if span <= 65536 else np.int64)
    raw = g.integers(0, span, (n, ell), dtype=raw_dt)
    # work column by column on a transposed copy so each column is contiguous
    raw = np.ascontiguousarray(raw.T)
    step = _step_table(size)
    out = np.empty((ell, n), dtype=dt)
    prev = (raw[0] % size).astype(dt)
    out[0] = prev
    for c in range(1, ell):
        prev = step[prev.astype(np.intp) * span + raw[c]]
        out[c] = prev
    return np.ascontiguousarray(out.T)


_STEP_TABLES = {}


def _step_table(size: int) -> np.ndarray:
    """``table[prev * span + v]``: the letter after ``prev`` for raw draw ``v``."""
    t = _STEP_TABLES.get(size)
    if t is None:
        span = size * (size - 1)
        v = np.arange(span)
        r = v % (size - 1)
        t = np.concatenate([r + (r >= (p ^ 1)) for p in range(size)]).astype(_letter_dtype(size))
        _STEP_TABLES[size] = t
    return t


def _fixed_block(spec: MeasureSpec, g: np.random.Generator, n: int) -> np.ndarray:
    size = spec.size
    if spec.kind == "plain":
        return g.integers(0, size, (n, spec.ell), dtype=_letter_dtype(size))
    if spec.kind == "reduced":
        return _reduced_block(g, n, spec.m, spec.ell)
    if spec.kind == "cyclic":
        parts, have = [], 0
        while have < n:
            cand = _reduced_block(g, n, spec.m, spec.ell)
            if spec.ell >= 2:
                cand = cand[cand[:, -1] != (cand[:, 0] ^ 1)]
            parts.append(cand)
            have += len(cand)
        return np.concatenate(parts)[:n]
    raise InputError(f"{spec.kind} words are not fixed-length")


def sample_words(spec: MeasureSpec, n: int, rng: RngStream) -> np.ndarray:
    """``n`` i.i.d. words of a fixed-length measure as an ``(n, ell)`` array."""
    blocks = []
    for b in range(-(-n // BLOCK)):
        k = min(BLOCK, n - b * BLOCK)
        blocks.append(_fixed_block(spec, rng.child(b).generator(), BLOCK)[:k])
    if not blocks:
        return np.zeros((0, spec.ell), dtype=_letter_dtype(spec.size))
    return np.concatenate(blocks)


def sample_word(spec: MeasureSpec, rng: RngStream, ball=None) -> tuple:
    if spec.kind == "geodesic":
        idx = _geodesic_indices(spec, 1, rng, ball)
        return ball.word(int(idx[0]))
    return tuple(int(x) for x in _fixed_block(spec, rng.generator(), 1)[0])


def _geodesic_indices(spec, n, rng, ball):
    if ball is None:
        raise CapacityError("geodesic sampling needs a Cayley ball")
    pool = ball.slice_indices(spec.ell, spec.L)
    if len(pool) == 0:
        raise InputError(f"no elements with norm in [{spec.ell - spec.L}, {spec.ell + spec.L}]")
    out = []
    for b in range(-(-n // BLOCK)):
        k = min(BLOCK, n - b * BLOCK)
        out.append(rng.child(b).generator().integers(0, len(pool), BLOCK)[:k])
    if not out:
        return np.zeros(0, dtype=np.int64)
    return pool[np.concatenate(out)]


@dataclass
class RelatorSet:
    spec: MeasureSpec
    d: Fraction
    count: int
    seed: int
    stream: tuple
    words: object  # (N, ell) array for fixed-length measures, list of tuples for geodesic
    elements: Optional[np.ndarray] = None  # ball indices (geodesic only)
    stratum: Optional[dict] = None  # set when only a prefix stratum of the set was realised

    def __len__(self):
        return len(self.words)

    def rows(self):
        if isinstance(self.words, np.ndarray):
            return [tuple(r) for r in self.words.tolist()]
        return list(self.words)

    def header(self) -> dict:
        h = {
            "spec": self.spec.to_dict(),
            "d": str(self.d),
            "count": self.count,
            "seed": self.seed,
            "stream": list(self.stream),
        }
        if self.stratum is not None:
            h["stratum"] = self.stratum
        return h

    def to_text(self, alphabet: Alphabet) -> str:
        lines = [json.dumps(self.header(), sort_keys=True)]
        lines += [alphabet.format(w) for w in self.rows()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, alphabet: Alphabet) -> "RelatorSet":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise InputError("empty relator file")
        try:
            h = json.loads(lines[0])
            spec = MeasureSpec(**h["spec"])
        except (ValueError, KeyError, TypeError) as exc:
            raise InputError(f"bad relator file header: {exc}") from exc
        words = [alphabet.parse(ln) for ln in lines[1:]]
        if spec.kind != "geodesic" and all(len(w) == spec.ell for w in words):
            arr = np.array(words, dtype=_letter_dtype(alphabet.size)).reshape(len(words), spec.ell)
            words = arr
        return cls(spec, Fraction(h.get("d", "0")), int(h.get("count", len(words))),
                   int(h.get("seed", 0)), tuple(h.get("stream", ())), words,
                   stratum=h.get("stratum"))


def sample_relator_set(spec: MeasureSpec, d, rng: RngStream, ball=None,
                       count_override: Optional[int] = None,
                       budget: Optional[int] = DEFAULT_SAMPLE_BUDGET) -> RelatorSet:
    """``floor(base ** d)`` independent draws (duplicates kept)."""
    d = _as_fraction(d)
    base = density_base(spec, ball)
    n = density_count(base, d, spec.ell, budget=budget, override=count_override)
    if spec.kind == "geodesic":
        idx = _geodesic_indices(spec, n, rng, ball)
        words = [ball.word(int(i)) for i in idx]
        return RelatorSet(spec, d, n, rng.seed, rng.key, words, elements=idx)
    return RelatorSet(spec, d, n, rng.seed, rng.key, sample_words(spec, n, rng))


def satisfies_measure(spec: MeasureSpec, word) -> bool:
    """Defining predicate of the measure's support (length and reducedness)."""
    if spec.kind == "geodesic":
        return spec.ell - spec.L <= len(word) <= spec.ell + spec.L
    if len(word) != spec.ell:
        return False
    if spec.kind == "reduced":
        return is_reduced(word)
    if spec.kind == "cyclic":
        return is_cyclically_reduced(word)
    return True


# --- lazily realised strata -----------------------------------------------


def prefix_probability(spec: MeasureSpec, prefix) -> Fraction:
    """Exact probability that a draw from ``spec`` starts with ``prefix``."""
    k = len(prefix)
    size = spec.size
    if k == 0:
        return Fraction(1)
    if k > spec.ell:
        raise InputError("prefix longer than the words")
    if spec.kind == "plain":
        return Fraction(1, size ** k)
    if not is_reduced(prefix):
        return Fraction(0)
    if spec.kind == "reduced":
        return Fraction(1, size * (size - 1) ** (k - 1))
    if spec.kind != "cyclic":
        raise InputError("prefix strata are defined for plain, reduced and cyclic measures")
    total = count_words("cyclic", spec.m, spec.ell)
    if k == spec.ell:
        return Fraction(int(is_cyclically_reduced(prefix)), total)
    vec = [0] * size
    vec[int(prefix[-1])] = 1
    t = _transfer(spec.m)
    for _ in range(spec.ell - k):
        vec = [sum(vec[x] * t[x][y] for x in range(size)) for y in range(size)]
    good = sum(v for y, v in enumerate(vec) if y != (int(prefix[0]) ^ 1))
    return Fraction(good, total)


def _binomial(g: np.random.Generator, n: int, p: float) -> int:
    chunk = (1 << 62)
    total = 0
    while n > 0:
        k = min(n, chunk)
        total += int(g.binomial(k, p))
        n -= k
    return total


def sample_stratum(spec: MeasureSpec, d, rng: RngStream,
                   budget: int = DEFAULT_SAMPLE_BUDGET) -> RelatorSet:
    """Realise only the relators that start with one random prefix.

    A density-``d`` set too large to materialise is a multiset of ``N`` i.i.d.
    words; the number of them starting with a fixed prefix ``p`` is
    Binomial(N, P(p)) and, given that number, those words are i.i.d. draws
    conditioned on ``p``.  The returned words are therefore an exact sample of
    a sub-multiset of a correctly distributed relator set.  Any property that
    is inherited by supersets (a long piece, a collision) certified on the
    stratum holds for the whole set.  The prefix length is the shortest one
    whose expected stratum size fits in half the budget.
    """
    if spec.kind not in ("plain", "reduced", "cyclic"):
        raise InputError("strata are defined for plain, reduced and cyclic measures")
    d = _as_fraction(d)
    base = density_base(spec)
    n_total = density_count(base, d, spec.ell)
    g = rng.child(1 << 30).generator()
    k = 0
    while k < spec.ell and n_total * prefix_probability_bound(spec, k) > budget / 2:
        k += 1
    pilot = sample_words(spec, 1, rng.child(1 << 31))[0]
    prefix = tuple(int(x) for x in pilot[:k])
    q = prefix_probability(spec, prefix)
    kept = _binomial(g, n_total, float(q)) if k else n_total
    if kept > budget:
        raise CapacityError(f"stratum of size {kept} exceeds the sample budget {budget}")
    words = _conditioned(spec, prefix, kept, rng.child(1 << 32))
    stratum = {"prefix": list(prefix), "total": str(n_total), "probability": str(q)}
    return RelatorSet(spec, d, n_total, rng.seed, rng.key, words, stratum=stratum)


def prefix_probability_bound(spec: MeasureSpec, k: int) -> float:
    if k == 0:
        return 1.0
    if spec.kind == "plain":
        return float(spec.size) ** -k
    # cyclic conditioning moves prefix probabilities by at most a bounded factor
    slack = 2.0 if spec.kind == "cyclic" else 1.0
    return slack / (spec.size * (spec.size - 1.0) ** (k - 1))


def _conditioned(spec: MeasureSpec, prefix: tuple, n: int, rng: RngStream) -> np.ndarray:
    k = len(prefix)
    size = spec.size
    dt = _letter_dtype(size)
    out = np.empty((n, spec.ell), dtype=dt)
    out[:, :k] = np.array(prefix, dtype=dt)
    if k == spec.ell or n == 0:
        return out
    if spec.kind == "plain":
        out[:, k:] = sample_words(replace(spec, ell=spec.ell - k), n, rng)
        return out
    filled = 0
    b = 0
    while filled < n:
        g = rng.child(b).generator()
        b += 1
        want = min(BLOCK, n - filled)
        span = size - 1
        raw = g.integers(0, span, (want, spec.ell - k)).astype(np.int64)
        prev = np.full(want, prefix[-1] if k else -2, dtype=np.int64)
        block = np.empty((want, spec.ell - k), dtype=np.int64)
        for c in range(spec.ell - k):
            if k == 0 and c == 0:
                prev = g.integers(0, size, want).astype(np.int64)
            else:
                r = raw[:, c]
                prev = r + (r >= (prev ^ 1))
            block[:, c] = prev
        if spec.kind == "cyclic" and spec.ell >= 2:
            first = prefix[0] if k else block[:, 0]
            block = block[block[:, -1] != (np.asarray(first) ^ 1)]
        take = min(len(block), n - filled)
        out[filled:filled + take, k:] = block[:take]
        filled += take
    return out
