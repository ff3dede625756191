"""Speedup and quality-up arithmetic, and the two benchmark harnesses.

Timings are wall-clock (``time.perf_counter``), one warmup run discarded,
median of the remaining runs.  The Newton benchmark refuses to report
timings unless every worker count produced bitwise identical numbers.
"""
from __future__ import annotations

import csv
import io
import math
import os
import platform
import statistics
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .evaldiff import Evaluator, OldBaselineEvaluator
from .linsolve import LinearSolver
from .polysys import SystemSpec, generate_system, newton_homotopy, random_point
from .scalar import PrecisionLevel
from .team import WorkerTeam


def speedup(t1: float, tp: float) -> float:
    if not (t1 > 0 and tp > 0):
        raise ValueError(f"times must be positive, got {t1} and {tp}")
    return t1 / tp


def cores_for_fixed_time(t_high: float, t_budget: float, p: int) -> int:
    """Cores needed to bring ``t_high`` on ``p`` cores down to ``t_budget``, assuming linear speedup."""
    if not (t_high > 0 and t_budget > 0 and p >= 1):
        raise ValueError("times must be positive and p at least 1")
    return math.ceil(Fraction(t_high) * p / Fraction(t_budget))


@dataclass(frozen=True)
class QualityUpResult:
    cores_needed: int
    factor: float
    degenerate: bool = False    # one core already suffices for the higher precision


def quality_up_factor(p: int, cores_needed: int) -> float:
    """``1 + (p-1)/(cores_needed-1)``: linear between quality 1 on one core and 2 on ``cores_needed``.

    ``cores_needed == 1`` means the doubled precision costs nothing extra;
    the factor is then 2 (see :func:`quality_up` for the flagged form).
    """
    if p < 1 or cores_needed < 1:
        raise ValueError("p and cores_needed must be positive")
    if cores_needed == 1:
        return 2.0
    return float(1 + Fraction(p - 1, cores_needed - 1))


def quality_up(t_high: float, t_budget: float, p: int) -> QualityUpResult:
    cores = cores_for_fixed_time(t_high, t_budget, p)
    return QualityUpResult(cores, quality_up_factor(p, cores), degenerate=cores == 1)


# ---------------------------------------------------------------------------
# benchmarks
# ---------------------------------------------------------------------------

@dataclass
class TimingRecord:
    label: str
    p: int
    wall: float
    stages: dict = field(default_factory=dict)


def hardware_description() -> str:
    try:
        usable = len(os.sched_getaffinity(0))
    except AttributeError:
        usable = os.cpu_count()
    return (f"{platform.machine()} {platform.processor() or 'cpu'}, {os.cpu_count()} logical cpus "
            f"({usable} usable), python {platform.python_version()}")


def usable_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _median_runs(fn: Callable[[], dict], repeats: int) -> dict:
    fn()    # warmup, discarded
    runs = [fn() for _ in range(max(3, repeats))]
    return {k: statistics.median(r[k] for r in runs) for k in runs[0]}


class CrossWorkerMismatch(AssertionError):
    """Different worker counts produced different numbers."""


@dataclass
class NewtonBench:
    records: list
    hardware: str
    iterations: int
    verified: bool = True

    def speedups(self) -> dict:
        base = next(r.wall for r in self.records if r.p == 1) if any(r.p == 1 for r in self.records) else None
        return {r.p: (speedup(base, r.wall) if base else float("nan")) for r in self.records}

    def rows(self) -> list:
        sp = self.speedups()
        return [[r.p, r.stages["evaluate"], r.stages["eliminate"], r.stages["backsub"], r.wall, sp[r.p]]
                for r in self.records]

    headers = ("#threads", "Pol.Ev.", "Gauss.El.", "Back Subs.", "Total", "speedup")


def bench_newton(spec: SystemSpec, iterations: int = 1000, p_list: Sequence[int] = (1, 2, 4, 8),
                 precision: PrecisionLevel = PrecisionLevel.D, repeats: int = 3) -> NewtonBench:
    """Time the Newton stage pipeline for each worker count in ``p_list``.

    Raises :class:`CrossWorkerMismatch` when the residual, reduced matrix or
    solution differ in any bit between worker counts.
    """
    f = generate_system(spec)
    z0 = random_point(spec.n, spec.seed + 1)
    h = newton_homotopy(f, z0, precision)
    z = precision.as_field(random_point(spec.n, spec.seed + 2), ndim=1)
    t = precision.kernel_real(0.5)
    records, reference = [], None
    for p in p_list:
        ev = Evaluator(h)
        solver = LinearSolver(precision, h.n)
        clock = time.perf_counter
        with WorkerTeam(p) as team:

            def work(wid: int) -> dict:
                times = dict(evaluate=0.0, eliminate=0.0, backsub=0.0)
                for _ in range(iterations):
                    c0 = clock()
                    ev.monomial_stage(wid, p, z)
                    team.sync(wid, stage="monomial")
                    ev.coefficient_stage(wid, p, t)
                    team.sync(wid, stage="coefficient")
                    c1 = clock()
                    if not solver.reduce(ev.ab, wid, team):
                        raise ArithmeticError("singular Jacobian at the benchmark point")
                    c2 = clock()
                    solver.back_substitute(ev.ab, wid, team)
                    team.sync(wid, stage="update")
                    c3 = clock()
                    times["evaluate"] += c1 - c0
                    times["eliminate"] += c2 - c1
                    times["backsub"] += c3 - c2
                return times

            def timed() -> dict:
                c = clock()
                times = team.run(work)
                times["total"] = clock() - c
                return times

            med = _median_runs(timed, repeats)
        result = (ev.res.tobytes(), ev.ab.tobytes(), solver.perm.tobytes(), solver.x.tobytes())
        if reference is None:
            reference = result
        elif result != reference:
            raise CrossWorkerMismatch(f"{p} workers disagree with {p_list[0]} worker(s); timings withheld")
        total = med.pop("total")
        records.append(TimingRecord(f"newton x{iterations}", p, total, med))
    return NewtonBench(records, hardware_description(), iterations)


@dataclass
class EvalBench:
    label: str
    new: float
    old: float

    @property
    def ratio(self) -> float:
        return speedup(self.old, self.new)

    @property
    def pure(self) -> float:
        """Ratio discounting the factor 3 owed to treating ``t`` as a variable."""
        return self.ratio / 3

    headers = ("degrees", "new alg.time", "old alg.time", "speedup", "pure speedup")

    def rows(self) -> list:
        return [[self.label, self.new, self.old, self.ratio, self.pure]]


def bench_eval_old_vs_new(spec: SystemSpec, repetitions: int = 400,
                          precision: PrecisionLevel = PrecisionLevel.D, repeats: int = 3) -> EvalBench:
    """Sequential timing of ``repetitions`` evaluations with both evaluators."""
    f = generate_system(spec)
    h = newton_homotopy(f, random_point(spec.n, spec.seed + 1), precision)
    zc = random_point(spec.n, spec.seed + 2)
    new, old = Evaluator(h), OldBaselineEvaluator(h)
    a, b = new.evaluate(zc, 0.5), old.evaluate(zc, 0.5)
    ra, rb = precision.to_complex(a.residual), precision.to_complex(b.residual)
    ja, jb = precision.to_complex(a.jacobian), precision.to_complex(b.jacobian)
    scale = max(1.0, float(np.abs(rb).max()), float(np.abs(jb).max()))
    if not (np.allclose(ra, rb, rtol=0, atol=1e-9 * scale) and np.allclose(ja, jb, rtol=0, atol=1e-9 * scale)):
        raise AssertionError("old and new evaluators disagree; timings withheld")
    z = precision.as_field(zc, ndim=1)
    t = precision.kernel_real(0.5)

    def loop(ev) -> Callable[[], dict]:
        def run() -> dict:
            c = time.perf_counter()
            for _ in range(repetitions):
                ev.fill(z, t)
            return {"wall": time.perf_counter() - c}
        return run

    label = f"n={spec.n} m={spec.m} d<={spec.dmax}"
    return EvalBench(label, _median_runs(loop(new), repeats)["wall"], _median_runs(loop(old), repeats)["wall"])


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _cell(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def format_rows(headers: Iterable[str], rows: Iterable[Sequence], fmt: str = "table") -> str:
    headers = list(headers)
    cells = [[_cell(v) for v in row] for row in rows]
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(headers)
        w.writerows(cells)
        return buf.getvalue().rstrip("\n")
    if fmt != "table":
        raise ValueError(f"unknown format {fmt!r}")
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(headers)]
    line = lambda r: "  ".join(c.rjust(w) for c, w in zip(r, widths))
    return "\n".join([line(headers), "  ".join("-" * w for w in widths)] + [line(r) for r in cells])
