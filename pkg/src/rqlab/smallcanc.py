"""Pieces and the C'(1/6) small cancellation condition.

A piece is a word that occurs in two different places of the symmetrised
relator set: in two distinct relators (either orientation, any cyclic
shift) or twice in the same relator at different shifts or orientations.
Relators are compared as cyclic words; two relators that coincide up to
rotation and inversion count once, so duplicate draws in a multiset do not
create pieces by themselves.  A proper power such as ``(ab)^3`` overlaps
itself at a shift and its longest piece is the whole relator.

Occurrences are found by 64-bit polynomial hashing of every cyclic window;
each hash match is verified letter by letter before it is reported.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CapacityError, InputError
from .words import is_cyclically_reduced

_B = 0x9E3779B97F4A7C15  # odd multiplier
_CHUNK = 4096


@dataclass
class SmallCancellationReport:
    relator_length: int
    max_piece: Optional[int]  # None when only the threshold was tested and no piece reached it
    piece_lower_bound: int
    threshold: int  # smallest piece length that breaks C'(1/6)
    satisfies: bool
    witness: Optional[tuple] = None  # ((i, pos, orient), (j, pos, orient), length)
    n_relators: int = 0

    @property
    def ratio(self) -> Optional[float]:
        if self.max_piece is None:
            return None
        return self.max_piece / self.relator_length

    def to_dict(self) -> dict:
        return {
            "relator_length": self.relator_length,
            "max_piece": self.max_piece,
            "piece_lower_bound": self.piece_lower_bound,
            "threshold": self.threshold,
            "ratio": self.ratio,
            "satisfies": self.satisfies,
            "witness": [list(self.witness[0]), list(self.witness[1]), self.witness[2]] if self.witness else None,
            "n_relators": self.n_relators,
        }


def _as_array(relators) -> np.ndarray:
    if isinstance(relators, np.ndarray):
        arr = relators
    else:
        rows = [tuple(w) for w in relators]
        if not rows:
            return np.zeros((0, 0), dtype=np.int64)
        lengths = {len(w) for w in rows}
        if len(lengths) != 1:
            raise InputError("relators must all have the same length")
        arr = np.array(rows, dtype=np.int64)
    if arr.ndim != 2:
        raise InputError("relators must be a 2-d array of letters")
    return arr


def _window_keys(words: np.ndarray, t: int):
    """Canonical hash of each cyclic window of length ``t``.

    Returns ``(keys, flip)`` of shape ``(n, ell)``: ``keys`` is the smaller
    of the hashes of the window and of its inverse, ``flip`` records which.
    """
    n, ell = words.shape
    bt = np.uint64(pow(_B, t, 1 << 64))
    b = np.uint64(_B)
    keys = np.empty((n, ell), dtype=np.uint64)
    flip = np.empty((n, ell), dtype=bool)
    ext_idx = np.arange(ell + t - 1) % ell
    with np.errstate(over="ignore"):
        for s in range(0, n, _CHUNK):
            w = words[s:s + _CHUNK].astype(np.int64)
            W = w[:, ext_idx].astype(np.uint64) + np.uint64(1)
            R = ((w[:, ext_idx][:, ::-1]) ^ 1).astype(np.uint64) + np.uint64(1)
            hf = _rolling(W, t, b, bt)[:, :ell]
            hr = _rolling(R, t, b, bt)[:, :ell]
            # the inverse of the window at p starts at ell-1-p in R
            hi = hr[:, ::-1]
            keys[s:s + _CHUNK] = np.minimum(hf, hi)
            flip[s:s + _CHUNK] = hi < hf
    return keys, flip


def _rolling(W: np.ndarray, t: int, b, bt) -> np.ndarray:
    n, L = W.shape
    pre = np.zeros((n, L + 1), dtype=np.uint64)
    for c in range(L):
        pre[:, c + 1] = pre[:, c] * b + W[:, c]
    return pre[:, t:] - pre[:, : L - t + 1] * bt


def _oriented(word, p: int, flip: bool, t: int, length: int) -> tuple:
    ell = len(word)
    if not flip:
        return tuple(int(word[(p + k) % ell]) for k in range(length))
    return tuple(int(word[(p + t - 1 - k) % ell]) ^ 1 for k in range(length))


def _genuine(words, a, b, t) -> bool:
    """Is the verified match between occurrences ``a`` and ``b`` a piece?"""
    (i, p, fi), (j, q, fj) = a, b
    if (i, p) == (j, q):
        return False
    wi, wj = words[i], words[j]
    if _oriented(wi, p, fi, t, t) != _oriented(wj, q, fj, t, t):
        return False
    if i != j:
        ell = len(wi)
        # same cyclic relator up to rotation/inversion: not a piece
        if _oriented(wi, p, fi, t, ell) == _oriented(wj, q, fj, t, ell):
            return False
    return True


def find_piece(words: np.ndarray, t: int, max_checks: int = 1_000_000):
    """A witness pair for a piece of length ``t``, or None."""
    n, ell = words.shape
    if n == 0 or t < 1 or t > ell:
        return None
    keys, flip = _window_keys(words, t)
    flat = keys.ravel()
    sk = np.sort(flat)
    dup_keys = np.unique(sk[1:][sk[1:] == sk[:-1]])
    if len(dup_keys) == 0:
        return None
    cand = np.flatnonzero(np.isin(flat, dup_keys))
    cand = cand[np.argsort(flat[cand], kind="stable")]
    ck = flat[cand]
    starts = np.flatnonzero(np.concatenate([[True], ck[1:] != ck[:-1]]))
    ends = np.append(starts[1:], len(ck))
    checks = 0
    fl = flip.ravel()
    for g in range(len(starts)):
        members = cand[starts[g]:ends[g]]
        occ = [(int(x // ell), int(x % ell), bool(fl[x])) for x in members]
        for u in range(len(occ)):
            for v in range(u + 1, len(occ)):
                checks += 1
                if _genuine(words, occ[u], occ[v], t):
                    return occ[u], occ[v]
                if checks >= max_checks:
                    raise CapacityError(f"more than {max_checks} candidate matches at length {t}")
    return None


def small_cancellation_check(relators, exact: bool = True, check_reduced: bool = True) -> SmallCancellationReport:
    """Longest piece among cyclically reduced relators of one length.

    With ``exact`` the longest piece is located by binary search on the
    window length; otherwise only the C'(1/6) threshold length is tested.
    """
    words = _as_array(relators)
    n = words.shape[0]
    ell = words.shape[1] if n else 0
    if check_reduced:
        if n and words.size and ((words[:, 1:] == (words[:, :-1] ^ 1)).any()
                                 or (ell >= 2 and (words[:, -1] == (words[:, 0] ^ 1)).any())):
            raise InputError("relators must be cyclically reduced")
    threshold = -(-ell // 6) if ell else 1
    if n == 0 or ell == 0:
        return SmallCancellationReport(ell, 0, 0, threshold, True, None, n)
    if not exact:
        hit = find_piece(words, threshold)
        if hit is None:
            return SmallCancellationReport(ell, None, 0, threshold, True, None, n)
        return SmallCancellationReport(ell, None, threshold, threshold, False, hit + (threshold,), n)
    lo, hi, best = 0, ell, None  # largest t with a piece is in [lo, hi]
    while lo < hi:
        mid = (lo + hi + 1) // 2
        hit = find_piece(words, mid)
        if hit is None:
            hi = mid - 1
        else:
            lo, best = mid, hit + (mid,)
    return SmallCancellationReport(ell, lo, lo, threshold, lo < threshold, best, n)


def max_piece_naive(relators) -> int:
    """Quadratic reference: compare every pair of oriented cyclic occurrences."""
    words = [tuple(int(x) for x in w) for w in relators]
    for w in words:
        if not is_cyclically_reduced(w):
            raise InputError("relators must be cyclically reduced")
    if not words:
        return 0
    ell = len(words[0])
    occ = [(i, p, f) for i in range(len(words)) for p in range(ell) for f in (False, True)]
    best = 0
    for t in range(1, ell + 1):
        found = False
        for u in range(len(occ)):
            for v in range(u + 1, len(occ)):
                a, b = occ[u], occ[v]
                if (a[0], a[1]) == (b[0], b[1]):
                    continue
                if _genuine(words, a, b, t):
                    found = True
                    break
            if found:
                break
        if not found:
            break
        best = t
    return best
