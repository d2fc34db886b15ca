"""Decorated abstract van Kampen diagrams for one relator length.

Conventions
-----------
Each face has geometric edges ``0..ell-1`` read counterclockwise.  A face
with label ``i``, start ``s`` and orientation ``o`` reads its relator ``r_i``
counterclockwise from edge ``s`` when ``o = +1`` and ``r_i^-1`` when
``o = -1``.  Geometric edge ``k`` therefore carries

* ``r_i[(k - s) % ell]`` when ``o = +1``,
* ``r_i[(s - 1 - k) % ell]^-1`` when ``o = -1``.

Two faces sharing an edge traverse it in opposite directions, so their
geometric letters are mutually inverse.  In terms of relator letters this
is an inverse relation (sign -1) when the two orientations agree and an
equality (sign +1) when they differ.  Worked example: two faces with
distinct labels, both ``o = +1`` and ``s = 0``, glued along ``A_0 <-> B_0``
force ``r_1[0] = r_2[0]^-1``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

import numpy as np

from .errors import CapacityError, InputError
from .sampler import MeasureSpec, RngStream, count_words, sample_words


@dataclass(frozen=True)
class Face:
    label: int
    start: int
    orient: int


@dataclass(frozen=True)
class Pairing:
    f: int
    k: int
    g: int
    kk: int
    sign: int


@dataclass
class Davkd:
    ell: int
    faces: tuple
    pairings: tuple
    planar: Optional[bool] = None  # None: not checked (user supplied)

    def __post_init__(self):
        self.faces = tuple(f if isinstance(f, Face) else Face(*f) for f in self.faces)
        self.pairings = tuple(p if isinstance(p, Pairing) else Pairing(*p) for p in self.pairings)
        self.validate()

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def labels(self) -> list:
        return sorted({f.label for f in self.faces})

    def validate(self):
        if self.ell < 1:
            raise InputError("face perimeter must be >= 1")
        for f in self.faces:
            if f.orient not in (1, -1):
                raise InputError(f"orientation must be +1 or -1, got {f.orient}")
            if not 0 <= f.start < self.ell:
                raise InputError(f"start {f.start} outside [0, {self.ell})")
            if f.label < 1:
                raise InputError("labels are numbered from 1")
        used = set()
        for p in self.pairings:
            for face, k in ((p.f, p.k), (p.g, p.kk)):
                if not 0 <= face < self.n_faces:
                    raise InputError(f"pairing refers to missing face {face}")
                if not 0 <= k < self.ell:
                    raise InputError(f"edge {k} outside [0, {self.ell})")
                if (face, k) in used:
                    raise InputError(f"edge {k} of face {face} appears in two pairings")
                used.add((face, k))
            want = -1 if self.faces[p.f].orient == self.faces[p.g].orient else 1
            if p.sign != want:
                raise InputError(
                    f"pairing {p.f}:{p.k} ~ {p.g}:{p.kk} has sign {p.sign}; orientations give {want}"
                )

    def position(self, face: int, k: int) -> int:
        """Relator letter position carried by geometric edge ``k`` of ``face``."""
        f = self.faces[face]
        if f.orient == 1:
            return (k - f.start) % self.ell
        return (f.start - 1 - k) % self.ell

    def boundary_length(self) -> int:
        return self.n_faces * self.ell - 2 * len(self.pairings)

    def multiplicities(self) -> dict:
        out = {}
        for f in self.faces:
            out[f.label] = out.get(f.label, 0) + 1
        return out

    # text format ----------------------------------------------------------

    def to_text(self) -> str:
        lines = [f"faces={self.n_faces} len={self.ell}"]
        lines += [f"{f.label} {f.start} {f.orient}" for f in self.faces]
        lines += [f"{p.f} {p.k} {p.g} {p.kk} {p.sign}" for p in self.pairings]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Davkd":
        rows = []
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if line:
                rows.append(line)
        if not rows:
            raise InputError("empty diagram file")
        head = dict(tok.split("=", 1) for tok in rows[0].split() if "=" in tok)
        try:
            n, ell = int(head["faces"]), int(head["len"])
        except (KeyError, ValueError) as exc:
            raise InputError("header must read 'faces=<n> len=<ell>'") from exc
        body = [list(map(int, r.split())) for r in rows[1:]]
        if len(body) < n or any(len(r) != 3 for r in body[:n]):
            raise InputError(f"expected {n} face lines 'label start orient'")
        if any(len(r) != 5 for r in body[n:]):
            raise InputError("pairing lines read 'i k j k2 sign'")
        return cls(ell, tuple(Face(*r) for r in body[:n]), tuple(Pairing(*r) for r in body[n:]))


# --- Gamma -----------------------------------------------------------------------


@dataclass
class GammaGraph:
    ell: int
    parts: tuple  # labels, ordered by nonincreasing multiplicity
    multiplicity: tuple
    edges: tuple  # ((part, pos), (part, pos), sign)

    def vertex(self, part: int, pos: int) -> int:
        return part * self.ell + pos

    @property
    def n_vertices(self) -> int:
        return len(self.parts) * self.ell

    def loops(self) -> list:
        return [e for e in self.edges if e[0] == e[1]]


def build_gamma(D: Davkd, order: Optional[Sequence[int]] = None) -> GammaGraph:
    """Letter-constraint graph: one vertex per (relator, position), one edge per pairing.

    Parts are ordered by nonincreasing multiplicity (ties by label) unless
    ``order`` gives the labels explicitly.
    """
    mult = D.multiplicities()
    if order is None:
        parts = tuple(sorted(mult, key=lambda lab: (-mult[lab], lab)))
    else:
        parts = tuple(order)
        if sorted(parts) != sorted(mult):
            raise InputError("order must be a permutation of the labels")
    index = {lab: i for i, lab in enumerate(parts)}
    edges = []
    for p in D.pairings:
        a = (index[D.faces[p.f].label], D.position(p.f, p.k))
        b = (index[D.faces[p.g].label], D.position(p.g, p.kk))
        edges.append((a, b, p.sign))
    return GammaGraph(D.ell, parts, tuple(mult[lab] for lab in parts), tuple(edges))


def reduction_check(D: Davkd) -> bool:
    """False when two faces with one label meet as mirror images along an edge."""
    for p in D.pairings:
        F, G = D.faces[p.f], D.faces[p.g]
        if p.f != p.g and F.label == G.label and F.orient != G.orient \
                and D.position(p.f, p.k) == D.position(p.g, p.kk):
            return False
    return True


class _UF:
    def __init__(self, n):
        self.p = list(range(n))
        self.par = [0] * n  # parity to parent
        self.count = n

    def find(self, x):
        path = []
        while self.p[x] != x:
            path.append(x)
            x = self.p[x]
        # compress, accumulating parity from the root down
        acc = 0
        for y in reversed(path):
            acc ^= self.par[y]
            self.par[y] = acc
            self.p[y] = x
        return x

    def parity(self, x):
        self.find(x)
        return self.par[x] if self.p[x] != x else 0

    def union(self, x, y, odd: int) -> bool:
        """Record ``parity(x) ^ parity(y) == odd``; False on contradiction."""
        rx, ry = self.find(x), self.find(y)
        px, py = self.parity(x), self.parity(y)
        if rx == ry:
            return (px ^ py) == odd
        self.p[ry] = rx
        self.par[ry] = px ^ py ^ odd
        self.count -= 1
        return True


@dataclass
class FulfillabilityReport:
    components: list  # C_i for i = 1..n
    dims: list  # d_i as Fractions
    min_dim: Fraction
    argmin: int
    multiplicity: list
    consistent: bool  # no odd cycle (x = x^-1 forced)
    count: Optional[int] = None
    witness: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {
            "components": self.components,
            "dims": [str(x) for x in self.dims],
            "min_dim": str(self.min_dim),
            "argmin": self.argmin,
            "multiplicity": self.multiplicity,
            "consistent": self.consistent,
            "count": self.count,
        }


def gamma_dims(G: GammaGraph, d) -> FulfillabilityReport:
    """Components ``C_i`` of the subgraph on the first ``i`` parts and
    ``d_i = i d ell + C_i - i ell`` in exact arithmetic."""
    d = Fraction(d)
    n = len(G.parts)
    comps, dims = [], []
    for i in range(1, n + 1):
        uf = _UF(i * G.ell)
        for (pa, qa), (pb, qb), s in G.edges:
            if pa < i and pb < i:
                uf.union(pa * G.ell + qa, pb * G.ell + qb, int(s == -1))
        comps.append(uf.count)
        dims.append(i * d * G.ell + uf.count - i * G.ell)
    full = _UF(n * G.ell)
    ok = all(full.union(pa * G.ell + qa, pb * G.ell + qb, int(s == -1))
             for (pa, qa), (pb, qb), s in G.edges)
    if dims:
        k = min(range(n), key=lambda j: dims[j])
        mn = dims[k]
    else:
        k, mn = -1, Fraction(0)
    return FulfillabilityReport(comps, dims, mn, k + 1, list(G.multiplicity), ok)


# --- fulfilment ------------------------------------------------------------------


def fulfill_check(D: Davkd, relators: Sequence[Sequence[int]]) -> tuple:
    """Place ``relators[label-1]`` on the faces and test every pairing.

    Returns ``(ok, witness)`` where ``witness`` lists, per pairing, the two
    relator letters it compares.
    """
    labels = D.labels
    if len(relators) < max(labels):
        raise InputError(f"need {max(labels)} relators, got {len(relators)}")
    for lab in labels:
        if len(relators[lab - 1]) != D.ell:
            raise InputError(f"relator {lab} has length {len(relators[lab - 1])}, faces have {D.ell}")
    witness, ok = [], True
    for p in D.pairings:
        x = int(relators[D.faces[p.f].label - 1][D.position(p.f, p.k)])
        y = int(relators[D.faces[p.g].label - 1][D.position(p.g, p.kk)])
        witness.append((x, y))
        if (x == (y ^ 1)) if p.sign == -1 else (x == y):
            continue
        ok = False
    return ok, tuple(witness)


def boundary_letters(D: Davkd, relators, face: int) -> tuple:
    """Letters read counterclockwise along every geometric edge of ``face``."""
    f = D.faces[face]
    r = relators[f.label - 1]
    ell = D.ell
    if f.orient == 1:
        return tuple(int(r[(k - f.start) % ell]) for k in range(ell))
    return tuple(int(r[(f.start - 1 - k) % ell]) ^ 1 for k in range(ell))


def count_fulfilling_reduced(D: Davkd, m: int, max_letters: int = 40,
                             cyclic: bool = False) -> int:
    """Exact number of tuples of reduced words (one per label) fulfilling ``D``.

    Pairings tie letter slots into components whose letters are fixed up to
    inversion by one free letter each; reducedness constrains neighbouring
    slots.  The count is the number of solutions of that constraint system,
    obtained by exact variable elimination.
    """
    G = build_gamma(D)
    n = len(G.parts)
    ell = D.ell
    if n * ell > max_letters:
        raise CapacityError(f"exact count limited to {max_letters} letter slots, diagram has {n * ell}")
    uf = _UF(n * ell)
    for (pa, qa), (pb, qb), s in G.edges:
        if not uf.union(pa * ell + qa, pb * ell + qb, int(s == -1)):
            return 0
    roots = sorted({uf.find(v) for v in range(n * ell)})
    var = {r: i for i, r in enumerate(roots)}
    size = 2 * m
    letters = np.arange(size)
    factors = []
    adj = [(p * ell + q, p * ell + q + 1) for p in range(n) for q in range(ell - 1)]
    if cyclic and ell >= 2:
        adj += [(p * ell + ell - 1, p * ell) for p in range(n)]
    for u, v in adj:
        cu, cv = var[uf.find(u)], var[uf.find(v)]
        pu, pv = uf.parity(u), uf.parity(v)
        # slot letter = root letter ^ parity; need slot(v) != slot(u)^1
        if cu == cv:
            if pu == pv:
                continue  # y != y^1 always holds
            return 0
        T = ((letters[:, None] ^ pu) ^ 1) != (letters[None, :] ^ pv)
        factors.append(((cu, cv), T.astype(object)))
    return _eliminate(len(roots), size, factors)


def _eliminate(nvars: int, size: int, factors) -> int:
    """Sum over all assignments of the product of factors (exact ints)."""
    factors = [(tuple(s), t) for s, t in factors]
    touched = set(v for s, _ in factors for v in s)
    free = nvars - len(touched)
    remaining = set(touched)
    total = 1
    while remaining:
        # min-degree: variable whose elimination creates the smallest scope
        best, best_scope = None, None
        for v in remaining:
            scope = set()
            for s, _ in factors:
                if v in s:
                    scope |= set(s)
            scope.discard(v)
            if best is None or len(scope) < len(best_scope):
                best, best_scope = v, scope
        v = best
        mine = [(s, t) for s, t in factors if v in s]
        factors = [(s, t) for s, t in factors if v not in s]
        scope = tuple(sorted(best_scope)) + (v,)
        prod = np.ones((size,) * len(scope), dtype=object)
        for s, t in mine:
            prod = prod * _align(t, s, scope)
        summed = prod.sum(axis=-1) if scope else prod
        if len(scope) == 1:
            total *= int(summed)
        else:
            factors.append((scope[:-1], np.asarray(summed, dtype=object)))
        remaining.discard(v)
    for s, t in factors:  # scalars left over
        total *= int(t)
    return total * size ** free


def _align(t: np.ndarray, s: tuple, scope: tuple) -> np.ndarray:
    """View factor ``t`` over variables ``s`` broadcast against ``scope``."""
    order = sorted(range(len(s)), key=lambda i: scope.index(s[i]))
    t = np.transpose(t, order)
    shape = [1] * len(scope)
    for a, i in enumerate(order):
        shape[scope.index(s[i])] = t.shape[a]
    return t.reshape(shape)


def reduced_count_bound(m: int, n: int, C: int) -> int:
    """Upper bound ``(2m)^k (2m-1)^(C-k)``, ``k = min(n, C)``, for fulfilling reduced tuples."""
    k = min(n, C)
    return (2 * m) ** k * (2 * m - 1) ** (C - k)


_WORDS_CACHE = {}


def _all_reduced(m: int, ell: int) -> np.ndarray:
    """Every reduced word of length ``ell``, one column per position."""
    from .spectra import _reduced_from_index

    key = (m, ell)
    if key not in _WORDS_CACHE:
        total = count_words("reduced", m, ell)
        w = _reduced_from_index(np.arange(total, dtype=np.int64), m, ell)
        _WORDS_CACHE[key] = np.ascontiguousarray(w.T.astype(np.int8))
    return _WORDS_CACHE[key]


def count_fulfilling_bruteforce(D: Davkd, m: int, max_tuples: int = 5_000_000) -> int:
    """Exhaustive count over all tuples of reduced words (one or two labels)."""
    labels = D.labels
    if len(labels) > 2:
        raise InputError("brute force handles at most two labels")
    cols = _all_reduced(m, D.ell)
    total = cols.shape[1]
    if total ** len(labels) > max_tuples:
        raise CapacityError(f"brute force limited to {max_tuples} tuples")
    part = {lab: i for i, lab in enumerate(labels)}
    ok = np.ones((total,) * len(labels), dtype=bool)
    for p in D.pairings:
        ia, ib = part[D.faces[p.f].label], part[D.faces[p.g].label]
        a = cols[D.position(p.f, p.k)]
        b = cols[D.position(p.g, p.kk)]
        if p.sign == -1:
            b = b ^ 1
        if ia == ib:
            mask = a == b
            ok &= mask if len(labels) == 1 else (mask[:, None] if ia == 0 else mask[None, :])
        else:
            if ia == 1:
                a, b = b, a
            ok &= a[:, None] == b[None, :]
    return int(ok.sum())


# --- isoperimetry ---------------------------------------------------------------------


def iso_check(D: Davkd, d, report: Optional[FulfillabilityReport] = None) -> dict:
    """Boundary length against ``ell |D| (1/2 - d)`` and the refined bound
    ``ell |D| (1 - 2d) + 2 sum_i d_i (m_i - m_{i+1})``."""
    d = Fraction(d)
    if report is None:
        report = gamma_dims(build_gamma(D), d)
    n_faces, ell = D.n_faces, D.ell
    boundary = D.boundary_length()
    coarse = ell * n_faces * (Fraction(1, 2) - d)
    ms = list(report.multiplicity) + [0]
    refined = ell * n_faces * (1 - 2 * d) + 2 * sum(
        report.dims[i] * (ms[i] - ms[i + 1]) for i in range(len(report.dims))
    )
    return {
        "boundary": boundary,
        "bound": coarse,
        "satisfied": boundary >= coarse,
        "lemma_rhs": refined,
        "lemma_holds": boundary >= refined,
        "min_dim": report.min_dim,
    }


# --- enumeration -----------------------------------------------------------------------


def _key(D: Davkd, perm=None) -> tuple:
    """Presentation of D in relator coordinates, faces permuted by ``perm``."""
    perm = perm or list(range(D.n_faces))
    where = {old: new for new, old in enumerate(perm)}
    relabel = {}
    for old in perm:
        relabel.setdefault(D.faces[old].label, len(relabel) + 1)
    faces = tuple((relabel[D.faces[old].label], D.faces[old].orient) for old in perm)
    pairs = []
    for p in D.pairings:
        a = (where[p.f], D.position(p.f, p.k))
        b = (where[p.g], D.position(p.g, p.kk))
        pairs.append(tuple(sorted((a, b))))
    return faces, tuple(sorted(pairs))


def canonical_key(D: Davkd) -> tuple:
    return min(_key(D, list(p)) for p in itertools.permutations(range(D.n_faces)))


def _loop_free(D: Davkd) -> bool:
    return not build_gamma(D).loops()


def enumerate_davkd(K: int, ell: int, include_unreduced: bool = False) -> Iterator[Davkd]:
    """All regular diagrams with ``K`` faces of the two explicit planar shapes.

    ``K = 1``: one face with two disjoint boundary arcs of length ``L`` glued
    to each other in reverse (``2L <= ell``); adjacent arcs give a fold.
    ``K = 2``: two faces sharing one arc of ``L`` edges, ``1 <= L <= ell - 1``.
    Every labelling, start edge and orientation is produced once up to
    isomorphism.  Diagrams whose Gamma graph has a loop (an edge glued to the
    same letter of the same relator) are skipped: a +1 loop is a cancelling
    pair and a -1 loop asks for a letter equal to its own inverse.
    """
    if K not in (1, 2):
        raise InputError("enumeration covers K = 1 and K = 2 only")
    seen = set()
    for D in _raw_shapes(K, ell):
        if not include_unreduced and (not reduction_check(D) or not _loop_free(D)):
            continue
        key = canonical_key(D)
        if key in seen:
            continue
        seen.add(key)
        yield D


def _raw_shapes(K: int, ell: int):
    decorations = [(s, o) for s in range(ell) for o in (1, -1)]
    if K == 1:
        for L in range(1, ell // 2 + 1):
            for q in range(L, ell - L + 1):
                pairs = [(0, t, 0, q + L - 1 - t, -1) for t in range(L)]
                for s, o in decorations:
                    yield Davkd(ell, (Face(1, s, o),), tuple(Pairing(*p) for p in pairs), planar=True)
        return
    for L in range(1, ell):
        for labels in ((1, 1), (1, 2)):
            for (sa, oa), (sb, ob) in itertools.product(decorations, repeat=2):
                sign = -1 if oa == ob else 1
                pairs = tuple(Pairing(0, t, 1, L - 1 - t, sign) for t in range(L))
                yield Davkd(ell, (Face(labels[0], sa, oa), Face(labels[1], sb, ob)), pairs, planar=True)


def count_bound_N(K: int, ell: int, GK: int = 1) -> int:
    """The polynomial bound ``G(K) (2K)^K ell^(4K)`` on the number of diagrams."""
    return GK * (2 * K) ** K * ell ** (4 * K)


# --- gluing probability --------------------------------------------------------------------


def glue_target(m: int, L: int) -> float:
    """Probability that the first ``L`` letters of two independent reduced
    words are glued inverse letter to inverse letter."""
    if L == 0:
        return 1.0
    return 1.0 / (2 * m * (2 * m - 1) ** (L - 1))


def glue_prob_exact(m: int, ell: int, L: int) -> Fraction:
    """Exhaustive pair count over all reduced words of length ``ell``."""
    from .spectra import _reduced_from_index

    if not 0 <= L <= ell:
        raise InputError("need 0 <= L <= ell")
    total = count_words("reduced", m, ell)
    if L == 0:
        return Fraction(1)
    w = _reduced_from_index(np.arange(total, dtype=np.int64), m, ell)
    size = 2 * m
    # r[t] = r'[L-1-t]^-1 for t < L: key r by its prefix, r' by its inverted prefix
    kr = np.zeros(total, dtype=np.int64)
    kq = np.zeros(total, dtype=np.int64)
    for t in range(L):
        kr = kr * size + w[:, t]
        kq = kq * size + (w[:, L - 1 - t] ^ 1)
    cr = np.bincount(kr, minlength=size ** L)
    cq = np.bincount(kq, minlength=size ** L)
    return Fraction(int((cr.astype(object) * cq.astype(object)).sum()), total * total)


def glue_prob_mc(m: int, ell: int, L: int, trials: int, rng: RngStream) -> dict:
    if not 0 <= L <= ell:
        raise InputError("need 0 <= L <= ell")
    if L == 0:
        return {"L": 0, "estimate": 1.0, "stderr": 0.0, "hits": trials, "trials": trials,
                "censored": False, "reference": 1.0}
    spec = MeasureSpec("reduced", m, ell)
    hits = 0
    chunk = 1 << 18
    for c in range(-(-trials // chunk)):
        n = min(chunk, trials - c * chunk)
        r = sample_words(spec, n, rng.child(c, 0))
        q = sample_words(spec, n, rng.child(c, 1))
        ok = np.ones(n, dtype=bool)
        for t in range(L):
            ok &= r[:, t] == (q[:, L - 1 - t] ^ 1)
        hits += int(ok.sum())
    p = hits / trials
    return {"L": L, "estimate": p, "stderr": math.sqrt(p * (1 - p) / trials), "hits": hits,
            "trials": trials, "censored": hits == 0, "reference": glue_target(m, L),
            "upper_bound": float(2 * m - 1) ** -L}
