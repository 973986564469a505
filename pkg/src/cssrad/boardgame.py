"""Collapsing maps of the iterated Duhamel expansion and term budgets.

A map of depth j sends ``{2, ..., j+1}`` to ``{1, ..., j}`` with ``sigma(2) = 1``
and ``sigma(l) < l``. It is stored as the tuple ``(sigma(2), ..., sigma(j+1))``.
There are ``j!`` of them, which exceeds the ``4^j`` class budget once
``j >= 9``: the budget bounds equivalence classes of maps, not maps. The
equivalence moves themselves are not implemented here.
"""

import math
from dataclasses import dataclass
from itertools import product

MAX_ENUMERATION_DEPTH = 10
CLASS_COUNT_CAVEAT = "class count, not map count, is bounded"


@dataclass(frozen=True, order=True)
class SigmaMap:
    j: int
    values: tuple

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if len(vals) != self.j:
            raise ValueError(f"depth {self.j} needs {self.j} values, got {len(vals)}")
        if self.j >= 1 and vals[0] != 1:
            raise ValueError("sigma(2) must be 1")
        for l, v in enumerate(vals, start=2):
            if not 1 <= v < l:
                raise ValueError(f"sigma({l}) = {v} violates 1 <= sigma(l) < l")

    def __call__(self, l):
        if not 2 <= l <= self.j + 1:
            raise ValueError(f"sigma is defined on 2..{self.j + 1}, got {l}")
        return self.values[l - 2]


def _check_depth(j, cap=MAX_ENUMERATION_DEPTH):
    if int(j) != j or j < 1:
        raise ValueError(f"depth must be a positive integer, got {j}")
    if j > cap:
        raise ValueError(f"depth {j} exceeds the enumeration cap {cap}")


def _tuples(j):
    return product(range(1, 2), *(range(1, l) for l in range(3, j + 2)))


def iter_sigma(j):
    """Lexicographic generator of all admissible maps of depth ``j`` (no cap)."""
    if int(j) != j or j < 1:
        raise ValueError(f"depth must be a positive integer, got {j}")
    for vals in _tuples(j):
        yield SigmaMap(j, vals)


def enumerate_sigma(j):
    """All ``j!`` admissible maps of depth ``j <= 10`` in lexicographic order."""
    _check_depth(j)
    return list(iter_sigma(j))


def count_sigma(j):
    """Closed-form count ``prod_{l=3}^{j+1} (l - 1) = j!``."""
    return math.factorial(j)


@dataclass(frozen=True)
class TermCount:
    depth: int
    raw_count: int
    budget: int

    @property
    def within_budget(self):
        return self.raw_count <= self.budget


def raw_term_count(r):
    """Summands of ``B_2 ... B_{r+1}`` before reduction: ``prod 2(j-1) = 2^r r!``."""
    if int(r) != r or r < 1:
        raise ValueError(f"depth must be a positive integer, got {r}")
    r = int(r)
    raw = 1
    for j in range(2, r + 2):
        raw *= 2 * (j - 1)
    return TermCount(r, raw, 4**r)


def budget_check(j):
    """Compare the number of maps of depth ``j`` with the ``4^j`` budget."""
    _check_depth(j)
    maps = sum(1 for _ in _tuples(j))
    if maps != math.factorial(j):
        raise AssertionError(f"enumeration produced {maps} maps, expected {math.factorial(j)}")
    budget = 4**j
    exceeds = maps > budget
    return {
        "depth": j,
        "sigma_count": maps,
        "factorial": math.factorial(j),
        "budget": budget,
        "exceeds_budget": exceeds,
        "note": CLASS_COUNT_CAVEAT if exceeds else "",
    }


def budget_table(max_depth=MAX_ENUMERATION_DEPTH):
    """``budget_check`` rows for depths 1..max_depth plus raw counts."""
    rows = []
    for j in range(1, max_depth + 1):
        row = budget_check(j)
        row["raw_term_count"] = raw_term_count(j).raw_count
        rows.append(row)
    return rows
