"""Finite abelian groups given as products of cyclic factors.

Elements are integer indices under a mixed-radix encoding in which the first
cyclic factor varies fastest, so for ``[2, 2]`` the order is
``e=(0,0), a=(1,0), b=(0,1), ab=(1,1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, InvalidElementError, InvalidSpecError

#: Largest group order accepted by subgroup enumeration.
MAX_ENUMERATION_ORDER = 64


@dataclass(frozen=True)
class AbelianGroup:
    """Direct product ``Z_{n1} x Z_{n2} x ...``; immutable."""

    cyclic_orders: tuple[int, ...]

    def __post_init__(self):
        orders = tuple(self.cyclic_orders)
        if not orders:
            raise InvalidSpecError("a group needs at least one cyclic factor")
        for n in orders:
            if isinstance(n, bool) or int(n) != n or n < 1:
                raise InvalidSpecError(f"cyclic orders must be integers >= 1, got {n!r}")
        object.__setattr__(self, "cyclic_orders", tuple(int(n) for n in orders))

    @property
    def order(self) -> int:
        return int(np.prod(self.cyclic_orders))

    def __len__(self):
        return self.order

    @property
    def identity(self) -> int:
        return 0

    @property
    def elements(self) -> range:
        return range(self.order)

    @cached_property
    def _radix(self) -> np.ndarray:
        return np.cumprod((1,) + self.cyclic_orders[:-1]).astype(np.int64)

    @cached_property
    def residue_table(self) -> np.ndarray:
        """``(N, k)`` array; row ``i`` holds the residues of element ``i``."""
        idx = np.arange(self.order)
        res = (idx[:, None] // self._radix[None, :]) % np.array(self.cyclic_orders)
        res.setflags(write=False)
        return res

    def _encode(self, residues: np.ndarray) -> np.ndarray:
        return (np.asarray(residues) % np.array(self.cyclic_orders)) @ self._radix

    @cached_property
    def mul_table(self) -> np.ndarray:
        """``mul_table[i, j]`` is the index of ``g_i * g_j``."""
        r = self.residue_table
        table = self._encode(r[:, None, :] + r[None, :, :])
        table.setflags(write=False)
        return table

    @cached_property
    def inv_table(self) -> np.ndarray:
        table = self._encode(-self.residue_table)
        table.setflags(write=False)
        return table

    @cached_property
    def div_table(self) -> np.ndarray:
        """``div_table[i, j]`` is the index of ``g_i * g_j^{-1}``."""
        r = self.residue_table
        table = self._encode(r[:, None, :] - r[None, :, :])
        table.setflags(write=False)
        return table

    def check_element(self, g) -> int:
        if isinstance(g, (bool, np.bool_)) or not isinstance(g, (int, np.integer)):
            raise InvalidElementError(f"element index must be an integer, got {g!r}")
        if not 0 <= g < self.order:
            raise InvalidElementError(f"element {g} out of range for group of order {self.order}")
        return int(g)

    def mul(self, g: int, h: int) -> int:
        return int(self.mul_table[self.check_element(g), self.check_element(h)])

    def inv(self, g: int) -> int:
        return int(self.inv_table[self.check_element(g)])

    def residues(self, g: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.residue_table[self.check_element(g)])

    def index(self, residues: Sequence[int]) -> int:
        """Index of the element with the given residue tuple."""
        residues = tuple(residues)
        if len(residues) != len(self.cyclic_orders):
            raise InvalidElementError(
                f"expected {len(self.cyclic_orders)} residues, got {len(residues)}")
        for r, n in zip(residues, self.cyclic_orders):
            if isinstance(r, bool) or int(r) != r or not 0 <= r < n:
                raise InvalidElementError(f"residue {r!r} invalid modulo {n}")
        return int(self._encode(np.array(residues, dtype=np.int64)))

    def element_order(self, g: int) -> int:
        g = self.check_element(g)
        k, x = 1, g
        while x != 0:
            x = int(self.mul_table[x, g])
            k += 1
        return k

    def label(self, g: int) -> str:
        """Residue label used for CSV column names, e.g. ``1_0``."""
        return "_".join(str(r) for r in self.residues(g))

    def to_json(self) -> dict:
        return {"cyclic": list(self.cyclic_orders)}

    @classmethod
    def from_json(cls, data) -> "AbelianGroup":
        if not isinstance(data, dict) or "cyclic" not in data:
            raise InvalidSpecError('group JSON must look like {"cyclic": [n1, n2, ...]}')
        cyclic = data["cyclic"]
        if not isinstance(cyclic, list):
            raise InvalidSpecError('"cyclic" must be a list of integers')
        return cls(tuple(cyclic))


def make_group(cyclic_orders: Iterable[int]) -> AbelianGroup:
    return AbelianGroup(tuple(cyclic_orders))


@dataclass(frozen=True)
class Subgroup:
    group: AbelianGroup
    elements: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(sorted({int(g) for g in self.elements})))

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, g) -> bool:
        return int(g) in self._element_set

    @cached_property
    def _element_set(self) -> frozenset:
        return frozenset(self.elements)

    def is_closed(self) -> bool:
        """Exhaustive check of identity, products and inverses."""
        G = self.group
        s = self._element_set
        if G.identity not in s:
            return False
        return all(G.mul_table[g, h] in s for g in s for h in s) and all(
            G.inv_table[g] in s for g in s)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "elements": [list(self.group.residues(g)) for g in self.elements],
        }


def generated_subgroup(G: AbelianGroup, generators: Iterable[int]) -> Subgroup:
    """Smallest subgroup containing ``generators`` (closure until stable)."""
    gens = {G.check_element(g) for g in generators}
    current = {G.identity} | gens
    while True:
        grown = current | {int(G.mul_table[g, h]) for g in current for h in gens}
        if grown == current:
            # finite group: closure under multiplication by generators suffices
            return Subgroup(G, tuple(current))
        current = grown


def enumerate_subgroups(G: AbelianGroup, max_order: int = MAX_ENUMERATION_ORDER) -> list[Subgroup]:
    """All subgroups of ``G`` sorted by order, then by element list.

    Breadth-first search starting from the trivial subgroup: every subgroup is
    reached by adjoining one element at a time to a smaller one.
    """
    if G.order > max_order:
        raise CapacityError(f"group order {G.order} exceeds enumeration bound {max_order}")
    trivial = frozenset({G.identity})
    seen = {trivial}
    frontier = [trivial]
    while frontier:
        nxt = []
        for H in frontier:
            for g in G.elements:
                if g in H:
                    continue
                K = frozenset(generated_subgroup(G, tuple(H) + (g,)).elements)
                if K not in seen:
                    seen.add(K)
                    nxt.append(K)
        frontier = nxt
    subgroups = [Subgroup(G, tuple(H)) for H in seen]
    subgroups.sort(key=lambda H: (H.order, H.elements))
    return subgroups
