"""Staged multithreaded Newton corrector at a fixed value of ``t``.

One iteration is: monomial stage, barrier, coefficient stage, barrier with
the residual test, row reduction, back substitution, barrier with the update
``z += dz``.  The residual tested is the one of the current iterate, so the
loop always ends on a fresh evaluation and the reported residual belongs to
the returned ``z``.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from types import SimpleNamespace
from typing import Optional

import numpy as np
from numba import njit

from .evaldiff import Evaluator
from .linsolve import LinearSolver
from .polysys import Homotopy
from .scalar import DoubleDouble, PrecisionLevel
from .team import WorkerTeam

DEFAULT_TOLERANCE = {PrecisionLevel.D: 1e-8, PrecisionLevel.DD: 1e-24}


@dataclass(frozen=True)
class NewtonConfig:
    eps: float
    max_it: int = 4

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"tolerance must be positive, got {self.eps}")
        if int(self.max_it) != self.max_it or self.max_it < 1:
            raise ValueError(f"max_it must be a positive integer, got {self.max_it}")

    @classmethod
    def default(cls, precision: PrecisionLevel, **overrides) -> "NewtonConfig":
        overrides.setdefault("eps", DEFAULT_TOLERANCE[PrecisionLevel(precision)])
        return cls(**overrides)


@dataclass(frozen=True)
class NewtonOutcome:
    z: np.ndarray
    residual: float | DoubleDouble
    iterations: int
    success: bool
    residuals: tuple = ()
    failure: Optional[str] = None   # "singular", "nonfinite", "max-it"


@lru_cache(maxsize=None)
def kernels(precision: PrecisionLevel) -> SimpleNamespace:
    F = precision.ops
    cadd, cmod, cisfinite, rlt, rfrom = F.cadd, F.cmod, F.cisfinite, F.rlt, F.rfrom
    ld1, st1 = F.ld1, F.st1
    kjit = njit(nogil=True, error_model="numpy")

    @kjit
    def residual_norm(res):
        # max modulus; NaN propagates
        best = rfrom(0.0)
        for i in range(res.shape[0]):
            v = ld1(res, i)
            if not cisfinite(v):
                return rfrom(np.nan)
            a = cmod(v)
            if rlt(best, a):
                best = a
        return best

    @kjit
    def below(r, eps):
        return rlt(r, rfrom(eps))

    @kjit
    def update(z, dz):
        ok = True
        for i in range(z.shape[0]):
            v = cadd(ld1(z, i), ld1(dz, i))
            st1(z, i, v)
            ok = ok and cisfinite(v)
        return ok

    return SimpleNamespace(residual_norm=residual_norm, below=below, update=update)


def _as_real(precision: PrecisionLevel, r):
    return DoubleDouble(*r) if precision is PrecisionLevel.DD else float(r)


def residual_norm(res: np.ndarray, precision: PrecisionLevel = PrecisionLevel.D):
    """Largest modulus in a residual vector (working layout)."""
    res = precision.as_field(res, ndim=1)
    return _as_real(precision, kernels(precision).residual_norm(res))


class NewtonCorrector:
    """Newton state shared by a team; reused across calls at different ``t``.

    Inside an enclosing :meth:`WorkerTeam.run`, the coordinator calls
    :meth:`prepare` between barriers and then every worker calls
    :meth:`iterate`.  :meth:`correct` does both for a standalone call.
    """

    def __init__(self, homotopy: Homotopy, team: Optional[WorkerTeam] = None):
        self.homotopy = homotopy
        self.precision = P = homotopy.precision
        self.team = team
        self.evaluator = Evaluator(homotopy)
        self.solver = LinearSolver(P, homotopy.n)
        self.z = P.zeros(homotopy.n)
        self._k = kernels(P)
        self._t = P.kernel_real(0)
        self._cfg = NewtonConfig.default(P)
        self._done = False
        self._iters = 0
        self._history: list = []
        self._failure: Optional[str] = None
        self._success = False
        self.outcome: Optional[NewtonOutcome] = None
        self.stage_times: Counter[str] = Counter()   # coordinator wall time

    def prepare(self, z, t, cfg: NewtonConfig) -> None:
        self.z[...] = self.precision.as_field(z, ndim=1)
        self._t = self.precision.kernel_real(t)
        self._cfg = cfg
        self._done = False
        self._iters = 0
        self._history = []
        self._failure = None
        self._success = False
        self.outcome = None

    def _sync(self, wid: int, action=None, stage: str = "") -> None:
        if self.team is None:
            if action is not None:
                action()
        else:
            self.team.sync(wid, action, stage)

    def _test_residual(self) -> None:
        r = self._k.residual_norm(self.evaluator.res)
        self._history.append(r)
        if self._k.below(r, self._cfg.eps):
            self._done, self._success = True, True
        elif not np.isfinite(self.precision.ops.rhi(r)):
            self._done, self._failure = True, "nonfinite"
        elif self._iters >= self._cfg.max_it:
            self._done, self._failure = True, "max-it"

    def _update(self) -> None:
        self._iters += 1
        if not self._k.update(self.z, self.solver.x):
            self._done, self._failure = True, "nonfinite"

    def _finish(self) -> None:
        P = self.precision
        self.outcome = NewtonOutcome(
            z=self.z.copy(),
            residual=_as_real(P, self._history[-1]),
            iterations=self._iters,
            success=self._success,
            residuals=tuple(_as_real(P, r) for r in self._history),
            failure=self._failure,
        )

    def iterate(self, wid: int) -> None:
        team = self.team
        p = team.p if team is not None else 1
        ev, solver = self.evaluator, self.solver
        clock, times = time.perf_counter, self.stage_times
        while True:
            t0 = clock()
            ev.monomial_stage(wid, p, self.z)
            self._sync(wid, stage="monomial")
            ev.coefficient_stage(wid, p, self._t)
            self._sync(wid, self._test_residual, "residual")
            t1 = clock()
            if wid == 0:
                times["evaluate"] += t1 - t0
            if self._done:
                break
            ok = solver.reduce(ev.ab, wid, team)
            t2 = clock()
            if wid == 0:
                times["eliminate"] += t2 - t1
            if not ok:
                if wid == 0:
                    self._done, self._failure = True, "singular"
                break
            solver.back_substitute(ev.ab, wid, team)
            self._sync(wid, self._update, "update")
            t3 = clock()
            if wid == 0:
                times["backsub"] += t3 - t2
            if self._done:
                break
        if wid == 0:
            self._finish()

    def correct(self, z, t, cfg: Optional[NewtonConfig] = None) -> NewtonOutcome:
        self.prepare(z, t, cfg or NewtonConfig.default(self.precision))
        if self.team is None:
            self.iterate(0)
        else:
            self.team.run(self.iterate)
        return self.outcome


def newton_correct(homotopy: Homotopy, z, t, cfg: Optional[NewtonConfig] = None, p: int = 1) -> NewtonOutcome:
    """Correct ``z`` at fixed ``t`` with a fresh team of ``p`` workers."""
    with WorkerTeam(p) as team:
        return NewtonCorrector(homotopy, team).correct(z, t, cfg)
