"""Finite *-semigroups given by tables, and their actions on finite sets.

Entries equal to ``-1`` in a multiplication or action table mark products that
fall outside a finite window (for instance a window of the integers under
addition).  Such tables are *partial*: identities are checked only where every
product involved is defined, and anything that needs an undefined product
raises :class:`PartialActionError`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MalformedTable, PartialActionError

UNDEFINED = -1


@dataclass
class Verdict:
    ok: bool
    violation: Optional[str] = None
    witness: Optional[tuple] = None

    def __bool__(self):
        return self.ok


@dataclass(frozen=True, eq=False)
class StarSemigroup:
    mult: np.ndarray
    star: np.ndarray
    unit: Optional[int] = None
    names: tuple = field(default=())

    def __post_init__(self):
        mult = np.asarray(self.mult, dtype=int)
        star = np.asarray(self.star, dtype=int)
        g = len(star)
        if mult.shape != (g, g):
            raise MalformedTable(f"multiplication table has shape {mult.shape}, expected {(g, g)}")
        if g == 0:
            raise MalformedTable("empty semigroup")
        if mult.min() < UNDEFINED or mult.max() >= g:
            raise MalformedTable("multiplication table entry out of range")
        if star.min() < 0 or star.max() >= g:
            raise MalformedTable("star table entry out of range")
        if self.unit is not None and not 0 <= self.unit < g:
            raise MalformedTable("unit index out of range")
        object.__setattr__(self, "mult", mult)
        object.__setattr__(self, "star", star)
        if not self.names:
            object.__setattr__(self, "names", tuple(str(i) for i in range(g)))

    @property
    def order(self) -> int:
        return len(self.star)

    @property
    def is_partial(self) -> bool:
        return bool((self.mult == UNDEFINED).any())

    def product(self, a: int, b: int) -> int:
        c = int(self.mult[a, b])
        if c == UNDEFINED:
            raise PartialActionError(f"product {self.names[a]}*{self.names[b]} leaves the window")
        return c


@dataclass(frozen=True, eq=False)
class Action:
    """Left action ``table[xi, x] = xi . x`` of a semigroup on ``{0, ..., N-1}``."""

    table: np.ndarray
    unital: bool = False

    def __post_init__(self):
        t = np.asarray(self.table, dtype=int)
        if t.ndim != 2:
            raise MalformedTable("action table must be two dimensional")
        if t.size and (t.min() < UNDEFINED or t.max() >= t.shape[1]):
            raise MalformedTable("action table entry out of range")
        object.__setattr__(self, "table", t)

    @property
    def n_points(self) -> int:
        return self.table.shape[1]

    @property
    def is_partial(self) -> bool:
        return bool((self.table == UNDEFINED).any())

    def apply(self, xi: int, x: int) -> int:
        y = int(self.table[xi, x])
        if y == UNDEFINED:
            raise PartialActionError(f"element {xi} moves point {x} out of the window")
        return y


def validate(sg: StarSemigroup) -> Verdict:
    """Exhaustive check of associativity and the *-semigroup identities."""
    g = sg.order
    M, S = sg.mult, sg.star
    for a in range(g):
        if S[S[a]] != a:
            return Verdict(False, "star is not involutive", (a,))
    for a in range(g):
        for b in range(g):
            ab = M[a, b]
            if ab == UNDEFINED:
                continue
            for c in range(g):
                bc = M[b, c]
                if bc == UNDEFINED:
                    continue
                left, right = M[ab, c], M[a, bc]
                if left != UNDEFINED and right != UNDEFINED and left != right:
                    return Verdict(False, "associativity fails", (a, b, c))
    for a in range(g):
        for b in range(g):
            ab = M[a, b]
            if ab == UNDEFINED:
                continue
            if M[S[b], S[a]] != S[ab]:
                return Verdict(False, "star is not antimultiplicative", (a, b))
    if sg.unit is not None:
        e = sg.unit
        if S[e] != e:
            return Verdict(False, "unit is not selfadjoint", (e,))
        for a in range(g):
            if M[e, a] != a or M[a, e] != a:
                return Verdict(False, "unit law fails", (a,))
    return Verdict(True)


def validate_action(sg: StarSemigroup, act: Action) -> Verdict:
    if act.table.shape[0] != sg.order:
        raise MalformedTable(f"action has {act.table.shape[0]} rows for a semigroup of order {sg.order}")
    T, M = act.table, sg.mult
    for a in range(sg.order):
        for b in range(sg.order):
            ab = M[a, b]
            for x in range(act.n_points):
                bx = T[b, x]
                if bx == UNDEFINED or ab == UNDEFINED:
                    continue
                left, right = T[a, bx], T[ab, x]
                if left != UNDEFINED and right != UNDEFINED and left != right:
                    return Verdict(False, "action is not multiplicative", (a, b, x))
    if act.unital:
        if sg.unit is None:
            return Verdict(False, "unital action declared for a semigroup without unit")
        for x in range(act.n_points):
            if T[sg.unit, x] != x:
                return Verdict(False, "unit does not act trivially", (x,))
    return Verdict(True)


def group_with_inverse_star(sg: StarSemigroup) -> bool:
    """True iff ``sg`` is a group whose involution is inversion."""
    if sg.unit is None or sg.is_partial:
        return False
    e = sg.unit
    return all(sg.mult[a, sg.star[a]] == e and sg.mult[sg.star[a], a] == e for a in range(sg.order))


def left_regular_action(sg: StarSemigroup) -> Action:
    return Action(sg.mult.copy(), unital=sg.unit is not None)


# --- standard families used by generators and tests --------------------------

def trivial_group() -> StarSemigroup:
    return StarSemigroup([[0]], [0], unit=0, names=("e",))


def cyclic_group(q: int) -> StarSemigroup:
    """``Z_q`` under addition with ``xi^* = -xi``."""
    idx = np.arange(q)
    return StarSemigroup((idx[:, None] + idx[None, :]) % q, (-idx) % q, unit=0)


def semilattice() -> StarSemigroup:
    """``{e, z}`` with ``z^2 = z = z^*``."""
    return StarSemigroup([[0, 1], [1, 1]], [0, 1], unit=0, names=("e", "z"))


def matrix_unit_monoid() -> StarSemigroup:
    """The matrix units of ``M_2`` together with ``0`` and ``1``; ``E_ij^* = E_ji``.

    ``E_21`` is a truncated shift: ``E_21^2 = 0``, absorbing.
    """
    names = ("1", "E11", "E12", "E21", "E22", "0")
    units = {1: (0, 0), 2: (0, 1), 3: (1, 0), 4: (1, 1)}
    lookup = {v: k for k, v in units.items()}
    g = len(names)
    mult = np.zeros((g, g), int)
    for a in range(g):
        for b in range(g):
            if a == 0:
                mult[a, b] = b
            elif b == 0:
                mult[a, b] = a
            elif a == 5 or b == 5:
                mult[a, b] = 5
            else:
                (i, j), (k, l) = units[a], units[b]
                mult[a, b] = lookup[(i, l)] if j == k else 5
    star = [0, 1, 3, 2, 4, 5]
    return StarSemigroup(mult, star, unit=0, names=names)


def truncated_power_monoid(k: int) -> StarSemigroup:
    """``{1, t, ..., t^(k-1), 0}`` with ``t^k = 0`` absorbing and ``t^* = t``."""
    g = k + 1
    mult = np.zeros((g, g), int)
    for a in range(g):
        for b in range(g):
            mult[a, b] = k if a == k or b == k else min(a + b, k)
    names = ("1",) + tuple(f"t{j}" for j in range(1, k)) + ("0",)
    return StarSemigroup(mult, np.arange(g), unit=0, names=names)


def cyclic_times_semilattice(q: int) -> StarSemigroup:
    """Direct product ``Z_q x {e, z}``; element ``(a, s)`` has index ``2a + s``."""
    g = 2 * q
    mult = np.zeros((g, g), int)
    star = np.zeros(g, int)
    for a in range(q):
        for s in range(2):
            star[2 * a + s] = 2 * ((-a) % q) + s
            for b in range(q):
                for t in range(2):
                    mult[2 * a + s, 2 * b + t] = 2 * ((a + b) % q) + max(s, t)
    return StarSemigroup(mult, star, unit=0)


def integer_window(n_points: int) -> tuple[StarSemigroup, Action]:
    """Translations ``{-(N-1), ..., N-1}`` of ``Z`` acting partially on ``{0, ..., N-1}``.

    Element index ``k`` is the translation by ``k - (N - 1)``.
    """
    w = n_points - 1
    shifts = np.arange(-w, w + 1)
    g = len(shifts)
    mult = np.full((g, g), UNDEFINED, int)
    for a in range(g):
        for b in range(g):
            t = shifts[a] + shifts[b]
            if -w <= t <= w:
                mult[a, b] = t + w
    star = (-shifts) + w
    table = np.full((g, n_points), UNDEFINED, int)
    for a in range(g):
        for x in range(n_points):
            y = x + shifts[a]
            if 0 <= y < n_points:
                table[a, x] = y
    sg = StarSemigroup(mult, star, unit=w, names=tuple(str(s) for s in shifts))
    return sg, Action(table, unital=True)


def naturals_window(n_points: int) -> tuple[StarSemigroup, Action]:
    """``N`` with trivial involution, truncated at ``N - 1``, acting by ``x -> x - xi``.

    Shifting towards the origin; element ``k`` is the translation by ``k``.
    """
    g = n_points
    mult = np.full((g, g), UNDEFINED, int)
    for a in range(g):
        for b in range(g):
            if a + b < g:
                mult[a, b] = a + b
    table = np.full((g, n_points), UNDEFINED, int)
    for a in range(g):
        for x in range(n_points):
            if x - a >= 0:
                table[a, x] = x - a
    return StarSemigroup(mult, np.arange(g), unit=0), Action(table, unital=True)
