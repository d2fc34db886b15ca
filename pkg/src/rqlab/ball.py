"""Breadth-first Cayley balls."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, InputError
from .groups import GroupModel

DEFAULT_NODE_BUDGET = 5_000_000


@dataclass
class CayleyBall:
    model: GroupModel
    radius: int
    elements: list
    norms: np.ndarray
    adjacency: np.ndarray  # (n, 2m) int64, -1 when the product leaves the ball
    complete: bool  # the ball is the whole (finite) group
    index: dict = field(repr=False)

    def __len__(self):
        return len(self.elements)

    def sphere_sizes(self) -> list:
        return np.bincount(self.norms, minlength=self.radius + 1).tolist()

    def word(self, i: int) -> tuple:
        return self.model.canonical(self.elements[i])

    def lookup(self, word) -> int:
        """Ball index of the element ``word`` represents."""
        elem = self.model.element(self.model.alphabet.check(word))
        idx = self.index.get(elem)
        if idx is None:
            raise CapacityError(
                f"element outside Cayley ball of radius {self.radius}", reached=self.radius
            )
        return idx

    def slice_indices(self, ell: int, L: int = 0) -> np.ndarray:
        if ell + L > self.radius and not self.complete:
            raise CapacityError(
                f"annulus up to norm {ell + L} needs ball radius >= {ell + L}, have {self.radius}",
                reached=self.radius,
            )
        return np.flatnonzero((self.norms >= ell - L) & (self.norms <= ell + L))


def cayley_ball(model: GroupModel, radius: int, node_budget: int = DEFAULT_NODE_BUDGET) -> CayleyBall:
    if radius < 0:
        raise InputError("radius must be nonnegative")
    size = model.alphabet.size
    ident = model.identity()
    elements = [ident]
    norms = [0]
    index = {ident: 0}
    rows = []
    layer = [0]
    complete = False
    for r in range(radius + 1):
        nxt = []
        for i in layer:
            e = elements[i]
            row = [-1] * size
            for x in range(size):
                f = model.act(e, x)
                j = index.get(f)
                if j is None and r < radius:
                    j = len(elements)
                    if j >= node_budget:
                        raise CapacityError(
                            f"node budget {node_budget} exceeded while building radius {r + 1}",
                            reached=r,
                        )
                    index[f] = j
                    elements.append(f)
                    norms.append(r + 1)
                    nxt.append(j)
                if j is not None:
                    row[x] = j
            rows.append(row)
        if not nxt and r < radius:
            complete = True
            # remaining layers are empty; rows of the current layer are final
            layer = []
            break
        layer = nxt
    adjacency = np.array(rows, dtype=np.int64).reshape(len(elements), size)
    if not complete:
        complete = bool((adjacency >= 0).all())
    return CayleyBall(
        model=model,
        radius=radius,
        elements=elements,
        norms=np.array(norms, dtype=np.int64),
        adjacency=adjacency,
        complete=complete,
        index=index,
    )


def sphere_slice(ball: CayleyBall, ell: int, L: int = 0) -> list:
    """Canonical words of norm in ``[ell - L, ell + L]``, ordered by norm then
    discovery order."""
    idx = ball.slice_indices(ell, L)
    return [ball.word(int(i)) for i in idx]
