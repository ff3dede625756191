"""Path tracking from ``t = 0`` to ``t = 1`` with predictor, corrector and step control.

All workers run the tracking loop.  Between corrections they meet at one
barrier whose coordinator action digests the last Newton outcome (accept or
step back), adjusts the step, applies the stop test and predicts the next
point.  Everything numerical that the coordinator does is sequential, and the
corrector stages are worker-count invariant, so the whole run is bitwise
reproducible for any number of workers.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .corrector import NewtonConfig, NewtonCorrector, NewtonOutcome
from .polysys import Homotopy
from .predictor import PREDICTORS, PathHistory, predict
from .scalar import DoubleDouble, PrecisionLevel
from .team import WorkerTeam

DEFAULT_MIN_STEP = {PrecisionLevel.D: 1e-6, PrecisionLevel.DD: 1e-8}


@dataclass(frozen=True)
class TrackerConfig:
    """Step-size policy, corrector settings and parallelism for one path.

    ``min_step`` and ``newton`` default per precision.  An ``initial_step``
    below ``min_step`` is accepted and makes the tracker stop at once.
    """

    initial_step: float = 0.01
    min_step: Optional[float] = None
    max_step: float = 0.1
    contraction: float = 0.5
    expansion: float = 2.0
    max_corrections: int = 200_000
    newton: Optional[NewtonConfig] = None
    predictor: str = "quadratic"
    precision: PrecisionLevel = PrecisionLevel.D
    workers: int = 1

    def __post_init__(self):
        P = PrecisionLevel(self.precision)
        object.__setattr__(self, "precision", P)
        if self.min_step is None:
            object.__setattr__(self, "min_step", DEFAULT_MIN_STEP[P])
        if self.newton is None:
            object.__setattr__(self, "newton", NewtonConfig.default(P))
        if not 0 < self.min_step:
            raise ValueError("min_step must be positive")
        if not 0 < self.initial_step <= self.max_step <= 1:
            raise ValueError("need 0 < initial_step <= max_step <= 1")
        if not self.min_step <= self.max_step:
            raise ValueError("min_step must not exceed max_step")
        if not 0 < self.contraction < 1 < self.expansion:
            raise ValueError("need 0 < contraction < 1 < expansion")
        if self.max_corrections < 0:
            raise ValueError("max_corrections must be nonnegative")
        if self.predictor not in PREDICTORS:
            raise ValueError(f"predictor must be one of {PREDICTORS}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ValueError("workers must be a positive integer")

    def with_(self, **changes) -> "TrackerConfig":
        return replace(self, **changes)


@dataclass
class PathStats:
    successful_corrections: int = 0
    total_corrections: int = 0
    newton_iterations: int = 0
    accepted_steps: list = field(default_factory=list)
    attempts: list = field(default_factory=list)     # (step, success) per correction
    wall_times: Counter = field(default_factory=Counter)
    wall: float = 0.0

    @property
    def min_step(self) -> float:
        return min(self.accepted_steps) if self.accepted_steps else float("nan")

    @property
    def avg_step(self) -> float:
        s = self.accepted_steps
        return sum(s) / len(s) if s else float("nan")

    def fingerprint(self) -> tuple:
        """Everything numerical about the run except timings."""
        return (self.successful_corrections, self.total_corrections, self.newton_iterations,
                tuple(self.accepted_steps), tuple(self.attempts))


@dataclass
class TrackResult:
    z: np.ndarray
    reached_t: float | DoubleDouble
    fail: bool
    stats: PathStats
    residual: float | DoubleDouble = float("nan")
    precision: PrecisionLevel = PrecisionLevel.D
    reason: str = ""

    @property
    def endpoint(self) -> np.ndarray:
        """Endpoint rounded to complex128."""
        return self.precision.to_complex(self.z)

    def fingerprint(self) -> tuple:
        return (self.z.tobytes(), repr(self.reached_t), self.fail, self.stats.fingerprint())


def step_size_control(step: float, success: bool, cfg: TrackerConfig) -> float:
    """Grow after a success (capped at ``max_step``), shrink after a failure."""
    if success:
        return min(step * cfg.expansion, cfg.max_step)
    return step * cfg.contraction


class PathTracker:
    """Tracks paths of one homotopy with a persistent team of workers."""

    def __init__(self, homotopy: Homotopy, cfg: Optional[TrackerConfig] = None,
                 team: Optional[WorkerTeam] = None):
        cfg = cfg or TrackerConfig(precision=homotopy.precision)
        if cfg.precision is not homotopy.precision:
            raise ValueError(f"homotopy precision {homotopy.precision.value} does not match "
                             f"configured precision {cfg.precision.value}")
        self.homotopy = homotopy
        self.cfg = cfg
        self._own_team = team is None
        self.team = team if team is not None else WorkerTeam(cfg.workers)
        self.corrector = NewtonCorrector(homotopy, self.team)

    def close(self) -> None:
        if self._own_team:
            self.team.close()

    def __enter__(self) -> "PathTracker":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    # coordinator state, touched only inside barrier actions

    def _reset(self, z0) -> None:
        P = self.cfg.precision
        self._hist = PathHistory(P)
        self._hist.push(0, z0 if z0 is not None else self.homotopy.z0)
        self._t = P.real(0)
        self._z = self._hist.z
        self._step = self.cfg.initial_step
        self._try: Optional[tuple] = None
        self._stopped = False
        self._reason = ""
        self._residual = float("nan")
        self._stats = PathStats()

    def _digest(self, out: NewtonOutcome) -> None:
        cfg, st = self.cfg, self._stats
        t_try, step = self._try
        self._try = None
        st.newton_iterations += out.iterations
        st.attempts.append((step, out.success))
        if out.success:
            st.successful_corrections += 1
            st.accepted_steps.append(step)
            self._hist.push(t_try, out.z)
            self._t, self._z = t_try, self._hist.z
            self._residual = out.residual
        self._step = step_size_control(step, out.success, cfg)

    def _coordinate(self) -> None:
        cfg, st = self.cfg, self._stats
        if self._try is not None:
            self._digest(self.corrector.outcome)
        if self._t >= 1:
            self._stopped, self._reason = True, "reached t = 1"
            return
        if self._step < cfg.min_step:
            self._stopped, self._reason = True, "step size below minimum"
            return
        if st.total_corrections > cfg.max_corrections:
            self._stopped, self._reason = True, "correction budget exhausted"
            return
        c0 = time.perf_counter()
        t_try = min(self._t + self._step, self.cfg.precision.real(1))
        guess = predict(cfg.predictor, self._hist, t_try)
        st.wall_times["predict"] += time.perf_counter() - c0
        self._try = (t_try, self._step)
        st.total_corrections += 1
        self.corrector.prepare(guess, t_try, cfg.newton)

    def _worker(self, wid: int) -> None:
        while True:
            self.team.sync(wid, self._coordinate, "predict")
            if self._stopped:
                return
            self.corrector.iterate(wid)

    def track(self, z0=None) -> TrackResult:
        """Track from ``z0`` (default: the homotopy's start solution) at ``t = 0``."""
        start = time.perf_counter()
        self.corrector.stage_times.clear()
        self._reset(z0)
        self.team.run(self._worker)
        st = self._stats
        st.wall = time.perf_counter() - start
        st.wall_times.update(self.corrector.stage_times)
        fail = not self._t >= 1
        return TrackResult(z=np.array(self._z), reached_t=self._t, fail=fail, stats=st,
                           residual=self._residual, precision=self.cfg.precision, reason=self._reason)


def track_path(homotopy: Homotopy, cfg: Optional[TrackerConfig] = None, z0=None) -> TrackResult:
    """Track one path with a team that lives exactly as long as the call."""
    with PathTracker(homotopy, cfg) as tracker:
        return tracker.track(z0)
