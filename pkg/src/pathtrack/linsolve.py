"""Row reduction with partial pivoting and back substitution on ``[A | b]``.

Rows are shared among ``p`` workers by ``row % p == wid``.  Per column, the
coordinator picks the pivot (largest ``|re| + |im|`` among unreduced rows,
first one on ties) and swaps, then every worker eliminates its own rows.
Back substitution finalizes unknowns from last to first: the owner of row
``j`` computes ``x_j``, and after one barrier every worker folds ``x_j`` into
its rows above ``j``.

Each row sees the same operations in the same order for every ``p``, so the
reduced matrix, pivot record and solution are bitwise independent of ``p``.
For a single worker without tracing the column loops run inside one kernel.
"""
from __future__ import annotations

from functools import lru_cache
from types import SimpleNamespace
from typing import Optional

import numpy as np
from numba import njit

from .scalar import PrecisionLevel
from .team import WorkerTeam


class SingularMatrixError(ArithmeticError):
    pass


@lru_cache(maxsize=None)
def kernels(precision: PrecisionLevel) -> SimpleNamespace:
    F = precision.ops
    cadd, csub, cmul, cdiv, cabs1 = F.cadd, F.csub, F.cmul, F.cdiv, F.cabs1
    radd, rlt, rhi, rfrom = F.radd, F.rlt, F.rhi, F.rfrom
    ld1, st1, ld2, st2, zero = F.ld1, F.st1, F.ld2, F.st2, F.zero
    kjit = njit(nogil=True, error_model="numpy")

    @kjit
    def max_row_norm(ab):
        # max_i sum_j (|re| + |im|) over the coefficient part, leading binary64
        n = ab.shape[0]
        best = 0.0
        for i in range(n):
            acc = rfrom(0.0)
            for j in range(n):
                acc = radd(acc, cabs1(ld2(ab, i, j)))
            h = rhi(acc)
            if not h <= best:
                best = h
        return best

    @kjit
    def pick_pivot(ab, c):
        r = c
        best = cabs1(ld2(ab, c, c))
        for i in range(c + 1, ab.shape[0]):
            a = cabs1(ld2(ab, i, c))
            if rlt(best, a):
                best, r = a, i
        return r

    @kjit
    def swap_rows(ab, perm, r1, r2):
        if r1 == r2:
            return
        for j in range(ab.shape[1]):
            a = ld2(ab, r1, j)
            st2(ab, r1, j, ld2(ab, r2, j))
            st2(ab, r2, j, a)
        perm[r1], perm[r2] = perm[r2], perm[r1]

    @kjit
    def pivot_ok(ab, c, threshold):
        return rhi(cabs1(ld2(ab, c, c))) > threshold

    @kjit
    def eliminate(wid, p, ab, c):
        n = ab.shape[0]
        first = c + 1 + (wid - c - 1) % p
        piv = ld2(ab, c, c)
        for i in range(first, n, p):
            f = cdiv(ld2(ab, i, c), piv)
            st2(ab, i, c, zero())
            for j in range(c + 1, n + 1):
                st2(ab, i, j, csub(ld2(ab, i, j), cmul(f, ld2(ab, c, j))))

    @kjit
    def reduce_all(ab, perm, threshold):
        # returns the first failing column, or -1
        n = ab.shape[0]
        for c in range(n - 1):
            swap_rows(ab, perm, c, pick_pivot(ab, c))
            if not pivot_ok(ab, c, threshold):
                return c
            eliminate(0, 1, ab, c)
        if not pivot_ok(ab, n - 1, threshold):
            return n - 1
        return -1

    @kjit
    def load_rhs(wid, p, ab, x):
        n = ab.shape[0]
        for i in range(wid, n, p):
            st1(x, i, ld2(ab, i, n))

    @kjit
    def finalize(ab, x, j):
        st1(x, j, cdiv(ld1(x, j), ld2(ab, j, j)))

    @kjit
    def fold(wid, p, ab, x, j):
        xj = ld1(x, j)
        for i in range(wid, j, p):
            st1(x, i, csub(ld1(x, i), cmul(ld2(ab, i, j), xj)))

    @kjit
    def backsub_all(ab, x):
        n = ab.shape[0]
        load_rhs(0, 1, ab, x)
        for j in range(n - 1, -1, -1):
            finalize(ab, x, j)
            fold(0, 1, ab, x, j)

    @kjit
    def candidates(ab, c):
        out = np.empty(ab.shape[0] - c)
        for i in range(c, ab.shape[0]):
            out[i - c] = rhi(cabs1(ld2(ab, i, c)))
        return out

    return SimpleNamespace(**{name: fn for name, fn in locals().items() if hasattr(fn, "py_func")})


class LinearSolver:
    """Reusable elimination state for ``n``-by-``n`` systems in one precision.

    ``trace``, when a list, receives ``(column, pivot_row, moduli)`` per
    elimination column, where ``moduli`` are the leading parts of
    ``|re| + |im|`` for rows ``column..n-1`` before the swap.
    """

    def __init__(self, precision: PrecisionLevel, n: int, trace: Optional[list] = None):
        if n < 1:
            raise ValueError("system size must be at least 1")
        self.precision = precision
        self.n = n
        self.trace = trace
        self.perm = np.arange(n)
        self.x = precision.zeros(n)
        self.failed_column = -1
        self.reductions = 0
        self.back_substitutions = 0
        self._k = kernels(precision)
        self._threshold = 0.0

    def _fused(self, team: Optional[WorkerTeam]) -> bool:
        return (team is None or team.p == 1) and self.trace is None

    # -- reduction ---------------------------------------------------------

    def _start(self, ab: np.ndarray) -> None:
        self.perm[:] = np.arange(self.n)
        self.failed_column = -1
        self.reductions += 1
        self._threshold = self.precision.eps * self._k.max_row_norm(ab)

    def _pivot(self, ab: np.ndarray, c: int) -> None:
        k = self._k
        r = k.pick_pivot(ab, c)
        if self.trace is not None:
            self.trace.append((c, r, k.candidates(ab, c)))
        k.swap_rows(ab, self.perm, c, r)
        if not k.pivot_ok(ab, c, self._threshold):
            self.failed_column = c

    def _check_last(self, ab: np.ndarray) -> None:
        if self.failed_column < 0 and not self._k.pivot_ok(ab, self.n - 1, self._threshold):
            self.failed_column = self.n - 1

    def reduce(self, ab: np.ndarray, wid: int = 0, team: Optional[WorkerTeam] = None) -> bool:
        """Worker ``wid``'s share of the reduction; ``True`` if nonsingular."""
        if self._fused(team):
            self._start(ab)
            self.failed_column = self._k.reduce_all(ab, self.perm, self._threshold)
            return self.failed_column < 0
        p = team.p if team is not None else 1
        sync = team.sync if team is not None else (lambda w, action=None, stage="": action and action())
        sync(wid, lambda: self._start(ab), "ge-start")
        for c in range(self.n - 1):
            sync(wid, lambda c=c: self._pivot(ab, c), "ge-pivot")
            if self.failed_column >= 0:
                return False
            self._k.eliminate(wid, p, ab, c)
        sync(wid, lambda: self._check_last(ab), "ge-end")
        return self.failed_column < 0

    # -- back substitution -------------------------------------------------

    def back_substitute(self, ab: np.ndarray, wid: int = 0, team: Optional[WorkerTeam] = None) -> np.ndarray:
        """Solve the reduced triangular system into :attr:`x` and return it."""
        k, x = self._k, self.x
        if self._fused(team):
            self.back_substitutions += 1
            k.backsub_all(ab, x)
            return x
        p = team.p if team is not None else 1
        if wid == 0:
            self.back_substitutions += 1
        k.load_rhs(wid, p, ab, x)
        for j in range(self.n - 1, -1, -1):
            if j % p == wid:
                k.finalize(ab, x, j)
            if team is not None:
                team.sync(wid, stage="backsub")
            k.fold(wid, p, ab, x, j)
        return x


def _augment(A, b, precision: PrecisionLevel) -> np.ndarray:
    A = precision.as_field(A, ndim=2)
    b = precision.as_field(b, ndim=1)
    n = A.shape[0]
    if A.shape[1] != n or b.shape[0] != n:
        raise ValueError("A must be square and match b")
    ab = precision.zeros((n, n + 1))
    ab[:, :n] = A
    ab[:, n] = b
    return ab


def _with_team(p: int, fn):
    with WorkerTeam(p) as team:
        return team.run(lambda wid: fn(wid, team))


def ge_partial_pivot(ab: np.ndarray, precision: PrecisionLevel = PrecisionLevel.D,
                     p: int = 1, trace: Optional[list] = None) -> tuple[np.ndarray, np.ndarray]:
    """Reduce a copy of ``ab``; returns ``(reduced, perm)``.

    Raises :class:`SingularMatrixError` when a pivot falls below the threshold.
    """
    ab = np.array(ab, copy=True)
    solver = LinearSolver(precision, ab.shape[0], trace)
    ok = _with_team(p, lambda wid, team: solver.reduce(ab, wid, team))
    if not ok:
        raise SingularMatrixError(f"pivot below threshold in column {solver.failed_column}")
    return ab, solver.perm.copy()


def back_substitute(reduced: np.ndarray, precision: PrecisionLevel = PrecisionLevel.D, p: int = 1) -> np.ndarray:
    solver = LinearSolver(precision, reduced.shape[0])
    _with_team(p, lambda wid, team: solver.back_substitute(reduced, wid, team))
    return solver.x.copy()


def solve(A, b, precision: PrecisionLevel = PrecisionLevel.D, p: int = 1) -> np.ndarray:
    """``x`` with ``A x = b`` (working layout), using ``p`` workers."""
    ab = _augment(A, b, precision)
    reduced, _ = ge_partial_pivot(ab, precision, p)
    return back_substitute(reduced, precision, p)
