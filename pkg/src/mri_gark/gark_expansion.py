"""GARK expansion of an MRI-GARK method and a bi-colored tree order oracle.

Substituting a concrete fast Runge-Kutta method into the modified fast ODEs
turns an MRI-GARK step into an ordinary two-part GARK step. The order of that
expanded tableau can then be checked with the generic colored rooted tree
conditions, independently of the closed-form coupling conditions.

Fast stage ``l`` of the fast solve between slow stages ``i`` and ``i+1`` has
global index ``i * s_fast + l``.
"""

from __future__ import annotations

import functools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import numpy as np

from mri_gark.order_conditions import ConditionReport, make_report
from mri_gark.tableaux import MriGarkMethod, rational_matrix, rational_vector

logger = logging.getLogger(__name__)

FAST = "f"
SLOW = "s"
MAX_TREE_ORDER = 4

# A colored tree is (color, children) with children sorted
Tree = tuple[str, tuple[Any, ...]]


@dataclass(frozen=True, eq=False)
class FastRK:
    """Explicit or implicit Runge-Kutta method used for the fast solves."""

    name: str
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    order: int

    @property
    def stages(self) -> int:
        return len(self.b)

    @property
    def explicit(self) -> bool:
        s = self.stages
        return all(self.A[i, j] == 0 for i in range(s) for j in range(i, s))

    def violations(self) -> list[str]:
        s = self.stages
        if self.A.shape != (s, s) or self.c.shape != (s,):
            return [f"{self.name}: inconsistent shapes"]
        problems = []
        for i in range(s):
            if sum(self.A[i]) != self.c[i]:
                problems.append(f"{self.name}: row sum of A[{i}] differs from c[{i}]")
        if sum(self.b) != 1:
            problems.append(f"{self.name}: weights do not sum to 1")
        return problems


def _fast(name: str, rows: list[list[Any]], b: list[Any], order: int) -> FastRK:
    s = len(b)
    A = rational_matrix(rows, s)
    c = np.array([sum(A[i]) for i in range(s)], dtype=object)
    return FastRK(name=name, A=A, b=rational_vector(b), c=c, order=order)


F = Fraction

FAST_METHODS: dict[str, FastRK] = {
    "euler": _fast("euler", [[]], [1], 1),
    "midpoint": _fast("midpoint", [[], [F(1, 2)]], [0, 1], 2),
    "kutta3": _fast("kutta3", [[], [F(1, 2)], [-1, 2]], [F(1, 6), F(2, 3), F(1, 6)], 3),
    "rk4": _fast(
        "rk4",
        [[], [F(1, 2)], [0, F(1, 2)], [0, 0, 1]],
        [F(1, 6), F(1, 3), F(1, 3), F(1, 6)],
        4,
    ),
    "rk38": _fast(
        "rk38",
        [[], [F(1, 3)], [F(-1, 3), 1], [1, -1, 1]],
        [F(1, 8), F(3, 8), F(3, 8), F(1, 8)],
        4,
    ),
}

# Fixed-step inner solvers by order
FAST_BY_ORDER = {1: "euler", 2: "midpoint", 3: "kutta3", 4: "rk4"}


def fast_method(name: str) -> FastRK:
    try:
        return FAST_METHODS[name]
    except KeyError:
        raise ValueError(
            f"Unknown fast method '{name}'. Available: {', '.join(sorted(FAST_METHODS))}"
        ) from None


@dataclass(frozen=True, eq=False)
class GarkTableau:
    """Blocks of a two-part GARK method (fast first, slow second)."""

    Aff: np.ndarray
    Afs: np.ndarray
    Asf: np.ndarray
    Ass: np.ndarray
    bf: np.ndarray
    bs: np.ndarray

    @property
    def fast_stages(self) -> int:
        return len(self.bf)

    @property
    def slow_stages(self) -> int:
        return len(self.bs)

    @property
    def cff(self) -> np.ndarray:
        return self.Aff.dot(np.ones(self.fast_stages, dtype=int))

    @property
    def cfs(self) -> np.ndarray:
        return self.Afs.dot(np.ones(self.slow_stages, dtype=int))

    @property
    def csf(self) -> np.ndarray:
        return self.Asf.dot(np.ones(self.fast_stages, dtype=int))

    @property
    def css(self) -> np.ndarray:
        return self.Ass.dot(np.ones(self.slow_stages, dtype=int))

    def block(self, row: str, col: str) -> np.ndarray:
        return {
            (FAST, FAST): self.Aff,
            (FAST, SLOW): self.Afs,
            (SLOW, FAST): self.Asf,
            (SLOW, SLOW): self.Ass,
        }[(row, col)]

    def weights(self, color: str) -> np.ndarray:
        return self.bf if color == FAST else self.bs

    def astype(self, dtype: Any) -> GarkTableau:
        return GarkTableau(*(np.array(m, dtype=dtype) for m in (
            self.Aff, self.Afs, self.Asf, self.Ass, self.bf, self.bs)))


def expand(method: MriGarkMethod, fast: FastRK) -> GarkTableau:
    """Assemble the GARK blocks of ``method`` with ``fast`` as the inner scheme.

    Raises:
        ValueError: If the fast tableau is inconsistent
    """
    problems = fast.violations()
    if problems:
        raise ValueError("; ".join(problems))
    base = method.base
    s, sf = method.stages, fast.stages
    n = s * sf
    dc = base.dc
    zero = Fraction(0)

    Aff = np.full((n, n), zero, dtype=object)
    bf = np.full(n, zero, dtype=object)
    Asf = np.full((s, n), zero, dtype=object)
    for lam in range(s):
        cols = slice(lam * sf, (lam + 1) * sf)
        block_weights = fast.b * dc[lam]
        bf[cols] = block_weights
        Aff[cols, cols] = fast.A * dc[lam]
        for i in range(lam + 1, s):
            Aff[i * sf:(i + 1) * sf, cols] = np.tile(block_weights, (sf, 1))
        for m in range(lam + 1, s):
            Asf[m, cols] = block_weights

    # (A_f c_f^k)_l integrates tau^k over the first part of fast step l
    gamma = method.gammas.gamma
    Afs = np.full((n, s), zero, dtype=object)
    for i in range(s):
        for ell in range(sf):
            row = base.A[i].copy()
            for k in range(gamma.shape[0]):
                moment = fast.A[ell].dot(fast.c ** k) if k else fast.c[ell]
                row = row + gamma[k, i] * moment
            Afs[i * sf + ell] = row

    Ass = np.full((s, s), zero, dtype=object)
    gbar = sum(gamma[k] / (k + 1) for k in range(gamma.shape[0]))
    for m in range(1, s):
        Ass[m] = Ass[m - 1] + gbar[m - 1]
    bs = gbar.sum(axis=0)
    return GarkTableau(Aff=Aff, Afs=Afs, Asf=Asf, Ass=Ass, bf=bf, bs=bs)


# --- colored trees ------------------------------------------------------------


def tree_order(tree: Tree) -> int:
    return 1 + sum(tree_order(child) for child in tree[1])


def tree_density(tree: Tree) -> int:
    """``gamma(t) = |t| * prod gamma(children)``."""
    out = tree_order(tree)
    for child in tree[1]:
        out *= tree_density(child)
    return out


def tree_signature(tree: Tree) -> str:
    """Bracket notation, e.g. ``f[s,f[s]]``."""
    color, children = tree
    if not children:
        return color
    return f"{color}[{','.join(tree_signature(c) for c in children)}]"


def _make(color: str, children: list[Tree] | tuple[Tree, ...]) -> Tree:
    return (color, tuple(sorted(children)))


def _grow(tree: Tree) -> set[Tree]:
    """All trees obtained by attaching one new leaf of either color."""
    color, children = tree
    out = {_make(color, children + ((leaf, ()),)) for leaf in (FAST, SLOW)}
    for idx, child in enumerate(children):
        rest = children[:idx] + children[idx + 1:]
        for grown in _grow(child):
            out.add(_make(color, rest + (grown,)))
    return out


@functools.cache
def trees_of_order(n: int) -> tuple[Tree, ...]:
    """All bi-colored rooted trees with exactly ``n`` vertices, sorted."""
    if not 1 <= n <= MAX_TREE_ORDER:
        raise ValueError(f"Tree order must lie in 1..{MAX_TREE_ORDER}, got {n}")
    if n == 1:
        return ((FAST, ()), (SLOW, ()))
    found: set[Tree] = set()
    for tree in trees_of_order(n - 1):
        found |= _grow(tree)
    return tuple(sorted(found))


def colored_trees(p: int) -> list[Tree]:
    """All bi-colored rooted trees with at most ``p`` vertices, by order."""
    if not 1 <= p <= MAX_TREE_ORDER:
        raise ValueError(f"Tree order must lie in 1..{MAX_TREE_ORDER}, got {p}")
    return [t for n in range(1, p + 1) for t in trees_of_order(n)]


def tree_counts(p: int) -> dict[int, int]:
    return {n: len(trees_of_order(n)) for n in range(1, p + 1)}


class _ElementaryWeights:
    """Memoized stage vectors ``g(t)`` of one tableau."""

    def __init__(self, tab: GarkTableau, one: Any) -> None:
        self.tab = tab
        self.one = one
        self._cache: dict[Tree, np.ndarray] = {}

    def stage_vector(self, tree: Tree) -> np.ndarray:
        if tree in self._cache:
            return self._cache[tree]
        color, children = tree
        size = self.tab.fast_stages if color == FAST else self.tab.slow_stages
        out = np.full(size, self.one, dtype=object if isinstance(self.one, Fraction) else float)
        for child in children:
            out = out * self.tab.block(color, child[0]).dot(self.stage_vector(child))
        self._cache[tree] = out
        return out

    def weight(self, tree: Tree) -> Any:
        return self.tab.weights(tree[0]).dot(self.stage_vector(tree))


def check_gark_order(
    tab: GarkTableau, p: int, tol: float = 1e-12, exact: bool = False
) -> list[ConditionReport]:
    """One report per colored tree of order <= p: ``Phi(t) = 1 / gamma(t)``.

    The check runs in float64 unless ``exact`` is set, in which case the
    tableau's rational entries are used as they are.
    """
    trees = colored_trees(p)
    if exact:
        weights = _ElementaryWeights(tab, Fraction(1))
    else:
        weights = _ElementaryWeights(tab.astype(float), 1.0)
    reports = []
    for tree in trees:
        rhs = Fraction(1, tree_density(tree))
        lhs = weights.weight(tree)
        if not exact:
            rhs = float(rhs)
        reports.append(make_report(f"tree.{tree_signature(tree)}", lhs, rhs, tol))
    logger.debug(
        "tree oracle order %d: %d trees, %d failed",
        p, len(reports), sum(not r.passed for r in reports),
    )
    return reports
