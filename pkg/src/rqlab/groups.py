"""Group models with a solvable word problem and geodesic normal forms.

Four variants cover every group the random-quotient computations need:
free groups, finite groups given by a multiplication table, direct products
with a finite group, and free products.  Each model acts on its own internal
element representation; canonical words are shortlex-geodesic
representatives built bottom-up.

Generating sets of composite models are disjoint unions of the factors'
generating sets, so word length is additive over factors (syllables of a
free product, coordinates of a direct product).  That is what makes
``norm`` exact without a Cayley ball.
"""

from __future__ import annotations

import re
from collections import deque
from typing import Hashable, Sequence

import numpy as np

from .errors import CapacityError, InputError
from .words import Alphabet, Word, free_reduce


class GroupModel:
    alphabet: Alphabet
    expr: str

    def identity(self) -> Hashable:
        raise NotImplementedError

    def act(self, elem, x: int):
        """Right-multiply ``elem`` by the letter ``x``."""
        raise NotImplementedError

    def element(self, word: Sequence[int]):
        e = self.identity()
        for x in word:
            e = self.act(e, int(x))
        return e

    def canonical(self, elem) -> Word:
        raise NotImplementedError

    def elem_norm(self, elem) -> int:
        raise NotImplementedError

    @property
    def bipartite(self) -> bool:
        """True when every relation of the group has even length."""
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.expr}>"


class Free(GroupModel):
    def __init__(self, m: int):
        if m < 0:
            raise InputError("free group rank must be nonnegative")
        self.m = m
        self.alphabet = Alphabet(m)
        self.expr = f"free({m})"

    def identity(self):
        return ()

    def act(self, elem, x):
        if elem and elem[-1] == x ^ 1:
            return elem[:-1]
        return elem + (x,)

    def element(self, word):
        return free_reduce(word)

    def canonical(self, elem):
        return elem

    def elem_norm(self, elem):
        return len(elem)

    bipartite = True


_FINITE_NAME = re.compile(r"z(\d+)$")


class Finite(GroupModel):
    """Finite group from a multiplication table.

    ``table[g][h]`` is the index of ``g*h``; index 0 must be the identity.
    ``gens[i]`` is the element named by generator ``i``.
    """

    def __init__(self, name: str, table, gens: Sequence[int]):
        table = np.asarray(table, dtype=np.int64)
        n = table.shape[0]
        if table.shape != (n, n) or not (table[0] == np.arange(n)).all():
            raise InputError(f"bad multiplication table for {name}")
        self.name = name
        self.table = table
        self.order = n
        self.inverse = np.array([int(np.flatnonzero(table[g] == 0)[0]) for g in range(n)])
        self.gens = tuple(int(g) for g in gens)
        invol = frozenset(i for i, g in enumerate(self.gens) if g != 0 and self.inverse[g] == g)
        self.alphabet = Alphabet(len(self.gens), invol)
        self.letter_elem = np.array(
            [g if s == 0 else self.inverse[g] for g in self.gens for s in (0, 1)], dtype=np.int64
        )
        self.expr = name
        self._bfs()

    @classmethod
    def named(cls, name: str) -> "Finite":
        mt = _FINITE_NAME.match(name)
        if mt:
            n = int(mt.group(1))
            if n < 2:
                raise InputError("cyclic factor needs order >= 2")
            idx = np.arange(n)
            return cls(name, (idx[:, None] + idx[None, :]) % n, [1])
        if name == "v4":
            idx = np.arange(4)
            return cls(name, idx[:, None] ^ idx[None, :], [1, 2])
        raise InputError(f"unknown finite group {name!r} (known: zN, v4)")

    def _bfs(self):
        dist = [-1] * self.order
        word = [None] * self.order
        dist[0], word[0] = 0, ()
        queue = deque([0])
        while queue:
            g = queue.popleft()
            for x in range(self.alphabet.size):
                h = int(self.table[g, self.letter_elem[x]])
                if dist[h] < 0:
                    dist[h] = dist[g] + 1
                    word[h] = word[g] + (x,)
                    queue.append(h)
        if min(dist) < 0:
            raise InputError(f"generators do not generate {self.name}")
        self.dist = dist
        self.words = word
        parity = [None] * self.order
        parity[0] = 0
        ok = True
        for g in sorted(range(self.order), key=dist.__getitem__):
            for x in range(self.alphabet.size):
                h = int(self.table[g, self.letter_elem[x]])
                if parity[h] is None:
                    parity[h] = parity[g] ^ 1
                elif parity[h] == parity[g]:
                    ok = False
        self._bipartite = ok

    def identity(self):
        return 0

    def act(self, elem, x):
        return int(self.table[elem, self.letter_elem[x]])

    def canonical(self, elem):
        return self.words[elem]

    def elem_norm(self, elem):
        return self.dist[elem]

    @property
    def bipartite(self):
        return self._bipartite


class DirectWithFinite(GroupModel):
    def __init__(self, inner: GroupModel, finite: Finite):
        if not isinstance(finite, Finite):
            raise InputError("second argument of direct() must be a finite group")
        self.inner = inner
        self.finite = finite
        k = inner.alphabet.m
        self.split = 2 * k
        invol = set(inner.alphabet.involutions) | {g + k for g in finite.alphabet.involutions}
        self.alphabet = Alphabet(k + finite.alphabet.m, frozenset(invol))
        self.expr = f"direct({inner.expr}, {finite.expr})"

    def identity(self):
        return (self.inner.identity(), 0)

    def act(self, elem, x):
        a, b = elem
        if x < self.split:
            return (self.inner.act(a, x), b)
        return (a, self.finite.act(b, x - self.split))

    def canonical(self, elem):
        a, b = elem
        return self.inner.canonical(a) + tuple(y + self.split for y in self.finite.canonical(b))

    def elem_norm(self, elem):
        return self.inner.elem_norm(elem[0]) + self.finite.elem_norm(elem[1])

    @property
    def bipartite(self):
        return self.inner.bipartite and self.finite.bipartite


class FreeProduct(GroupModel):
    def __init__(self, factors: Sequence[GroupModel]):
        if len(factors) < 1:
            raise InputError("freeprod() needs at least one factor")
        self.factors = tuple(factors)
        offsets, k, invol = [], 0, set()
        for f in self.factors:
            offsets.append(k)
            invol |= {g + k for g in f.alphabet.involutions}
            k += f.alphabet.m
        self.offsets = tuple(offsets)
        self.alphabet = Alphabet(k, frozenset(invol))
        # letter -> (factor index, local letter)
        self._route = []
        for i, f in enumerate(self.factors):
            for x in range(f.alphabet.size):
                self._route.append((i, x))
        self.expr = "freeprod(" + ", ".join(f.expr for f in self.factors) + ")"

    def identity(self):
        return ()

    def act(self, elem, x):
        i, y = self._route[x]
        f = self.factors[i]
        if elem and elem[-1][0] == i:
            new = f.act(elem[-1][1], y)
            if new == f.identity():
                return elem[:-1]
            return elem[:-1] + ((i, new),)
        new = f.act(f.identity(), y)
        if new == f.identity():
            return elem
        return elem + ((i, new),)

    def canonical(self, elem):
        out = []
        for i, e in elem:
            shift = 2 * self.offsets[i]
            out.extend(y + shift for y in self.factors[i].canonical(e))
        return tuple(out)

    def elem_norm(self, elem):
        return sum(self.factors[i].elem_norm(e) for i, e in elem)

    @property
    def bipartite(self):
        return all(f.bipartite for f in self.factors)


def free_rank(model: GroupModel):
    """Rank if ``model`` is free on its generators, else None."""
    if isinstance(model, Free):
        return model.m
    if isinstance(model, FreeProduct):
        ranks = [free_rank(f) for f in model.factors]
        if all(r is not None for r in ranks):
            return sum(ranks)
    return None


# --- expression grammar ---------------------------------------------------

_TOKENS = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|\d+|[(),])")


def parse_group(text: str) -> GroupModel:
    """Parse ``free(m)``, ``finite(name)``, ``direct(expr, finite)``,
    ``freeprod(expr, ...)``; a bare finite name such as ``z2`` is accepted."""
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        mt = _TOKENS.match(text, pos)
        if not mt:
            raise InputError(f"bad group expression {text!r} at offset {pos}")
        toks.append(mt.group(1))
        pos = mt.end()
    toks.append(None)
    state = {"i": 0}

    def peek():
        return toks[state["i"]]

    def take(expected=None):
        t = toks[state["i"]]
        if expected is not None and t != expected:
            raise InputError(f"expected {expected!r} in {text!r}, got {t!r}")
        state["i"] += 1
        return t

    def expr():
        head = take()
        if head is None:
            raise InputError(f"unexpected end of {text!r}")
        if head == "free":
            take("(")
            n = take()
            if not n or not n.isdigit():
                raise InputError(f"free() needs an integer rank in {text!r}")
            take(")")
            return Free(int(n))
        if head == "finite":
            take("(")
            name = take()
            take(")")
            return Finite.named(name)
        if head in ("direct", "freeprod"):
            take("(")
            args = [expr()]
            while peek() == ",":
                take(",")
                args.append(expr())
            take(")")
            if head == "direct":
                if len(args) != 2:
                    raise InputError("direct() takes exactly two arguments")
                return DirectWithFinite(args[0], args[1])
            return FreeProduct(args)
        if peek() != "(":
            return Finite.named(head)
        raise InputError(f"unknown constructor {head!r} in {text!r}")

    model = expr()
    if peek() is not None:
        raise InputError(f"trailing input in group expression {text!r}")
    return model


# --- word problem ---------------------------------------------------------


def _checked(model, word):
    return model.alphabet.check(word)


def normal_form(model: GroupModel, word: Sequence[int]) -> Word:
    return model.canonical(model.element(_checked(model, word)))


def is_identity(model: GroupModel, word: Sequence[int]) -> bool:
    return model.element(_checked(model, word)) == model.identity()


def norm(model: GroupModel, word: Sequence[int], ball=None) -> int:
    """Geodesic length of the element ``word`` represents.

    With ``ball`` given the value is looked up in the ball instead, and an
    element outside it raises ``CapacityError``.
    """
    elem = model.element(_checked(model, word))
    if ball is None:
        return model.elem_norm(elem)
    idx = ball.index.get(elem)
    if idx is None:
        raise CapacityError(
            f"element outside Cayley ball of radius {ball.radius}", reached=ball.radius
        )
    return int(ball.norms[idx])


def _stack_reduce(words: np.ndarray, active: np.ndarray | None = None) -> np.ndarray:
    """Row-wise free reduction; returns reduced lengths."""
    n, L = words.shape
    stack = np.zeros((n, max(L, 1)), dtype=np.int16)
    h = np.zeros(n, dtype=np.int64)
    rows = np.arange(n)
    for c in range(L):
        x = words[:, c].astype(np.int16)
        top = stack[rows, np.maximum(h - 1, 0)]
        cancel = (h > 0) & (top == (x ^ 1))
        if active is not None:
            cancel &= active[:, c]
            push = active[:, c] & ~cancel
        else:
            push = ~cancel
        h[cancel] -= 1
        pr = rows[push]
        stack[pr, h[push]] = x[push]
        h[push] += 1
    return h


def batch_is_identity(model: GroupModel, words) -> np.ndarray:
    """Vectorised identity test for an ``(n, L)`` array of letters."""
    words = np.asarray(words)
    if words.ndim != 2:
        raise InputError("batch_is_identity expects a 2-d array")
    if words.size and (words.min() < 0 or words.max() >= model.alphabet.size):
        raise InputError("letter outside alphabet")
    n = words.shape[0]
    if words.shape[1] == 0:
        return np.ones(n, dtype=bool)
    if free_rank(model) is not None:
        return _stack_reduce(words) == 0
    if isinstance(model, Finite):
        g = np.zeros(n, dtype=np.int64)
        for c in range(words.shape[1]):
            g = model.table[g, model.letter_elem[words[:, c]]]
        return g == 0
    if isinstance(model, DirectWithFinite) and free_rank(model.inner) is not None:
        split = model.split
        active = words < split
        free_ok = _stack_reduce(words, active) == 0
        fin = model.finite
        g = np.zeros(n, dtype=np.int64)
        for c in range(words.shape[1]):
            col = words[:, c].astype(np.int64)
            e = np.where(col >= split, fin.letter_elem[np.clip(col - split, 0, None)], 0)
            g = fin.table[g, e]
        return free_ok & (g == 0)
    ident = model.identity()
    return np.array([model.element(row) == ident for row in words.tolist()], dtype=bool)
