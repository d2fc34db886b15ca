"""Letters, words and free/cyclic reduction over a symmetric alphabet.

Generator ``g`` owns the two letter slots ``2g`` (the generator) and
``2g + 1`` (its formal inverse), so the letter involution is ``x ^ 1``.
A generator listed in ``involutions`` is an element of order two: its two
slots are distinct letters but name the same group element.  Keeping both
slots means densities for such alphabets are measured in base ``2 * m``
letters, as for ``(F_4 x Z/2) * F_4`` on 18 letters.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import InputError

Word = tuple  # tuple[int, ...]

_TOKEN = re.compile(r"[A-Za-z]\d*")


def inv(x: int) -> int:
    return x ^ 1


@dataclass(frozen=True)
class Alphabet:
    m: int
    involutions: frozenset = field(default_factory=frozenset)
    names: tuple = ()

    def __post_init__(self):
        if self.m < 0:
            raise InputError(f"negative generator count {self.m}")
        if not self.names:
            object.__setattr__(self, "names", default_names(self.m, self.involutions))
        if len(self.names) != self.m:
            raise InputError("one name per generator required")
        bad = [g for g in self.involutions if not 0 <= g < self.m]
        if bad:
            raise InputError(f"involution index out of range: {bad}")

    @property
    def size(self) -> int:
        return 2 * self.m

    def inv(self, x: int) -> int:
        return x ^ 1

    def is_element_involution(self, x: int) -> bool:
        return (x >> 1) in self.involutions

    def check(self, word: Iterable[int]) -> Word:
        w = tuple(int(x) for x in word)
        for x in w:
            if not 0 <= x < self.size:
                raise InputError(f"letter {x} outside alphabet of size {self.size}")
        return w

    def token(self, x: int) -> str:
        name = self.names[x >> 1]
        return name if x % 2 == 0 else name[0].upper() + name[1:]

    def format(self, word: Sequence[int]) -> str:
        if len(word) == 0:
            return "e"
        return "".join(self.token(int(x)) for x in word)

    def parse(self, text: str) -> Word:
        text = text.strip()
        if text in ("", "e"):
            return ()
        lookup = {}
        for g, name in enumerate(self.names):
            lookup[name] = 2 * g
            lookup[name[0].upper() + name[1:]] = 2 * g + 1
        pos = 0
        out = []
        for mt in _TOKEN.finditer(text):
            if text[pos:mt.start()].strip():
                raise InputError(f"cannot parse word {text!r} at offset {pos}")
            tok = mt.group()
            if tok not in lookup:
                raise InputError(f"unknown letter {tok!r} in {text!r}")
            out.append(lookup[tok])
            pos = mt.end()
        if text[pos:].strip():
            raise InputError(f"cannot parse word {text!r} at offset {pos}")
        return tuple(out)


def default_names(m: int, involutions=frozenset()) -> tuple:
    """``a1, a2, ...`` for ordinary generators, ``u`` (or ``u1, u2, ...``) for
    involutions, each family numbered in order of appearance."""
    n_inv = len(involutions)
    names = []
    a = u = 0
    for g in range(m):
        if g in involutions:
            u += 1
            names.append("u" if n_inv == 1 else f"u{u}")
        else:
            a += 1
            names.append(f"a{a}")
    return tuple(names)


def free_reduce(word: Sequence[int]) -> Word:
    stack: list = []
    for x in word:
        x = int(x)
        if stack and stack[-1] == x ^ 1:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def cyclic_reduce(word: Sequence[int]) -> Word:
    w = free_reduce(word)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == w[j - 1] ^ 1:
        i += 1
        j -= 1
    return w[i:j]


def is_reduced(word: Sequence[int]) -> bool:
    return all(word[k + 1] != word[k] ^ 1 for k in range(len(word) - 1))


def is_cyclically_reduced(word: Sequence[int]) -> bool:
    if not is_reduced(word):
        return False
    return len(word) < 2 or word[-1] != word[0] ^ 1


def inverse_word(word: Sequence[int]) -> Word:
    return tuple(int(x) ^ 1 for x in reversed(word))
