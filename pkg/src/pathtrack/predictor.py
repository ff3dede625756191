"""Secant and quadratic extrapolation from the most recent accepted points."""
from __future__ import annotations

from collections import deque
from functools import lru_cache
from types import SimpleNamespace

import numpy as np
from numba import njit

from .scalar import PrecisionLevel

PREDICTORS = ("secant", "quadratic")


class DegenerateHistoryError(ValueError):
    pass


@lru_cache(maxsize=None)
def kernels(precision: PrecisionLevel) -> SimpleNamespace:
    F = precision.ops
    cadd, csub, cmulr = F.cadd, F.csub, F.cmulr
    rsub, rdiv, rmul, rfrom = F.rsub, F.rdiv, F.rmul, F.rfrom
    ld1, st1 = F.ld1, F.st1
    kjit = njit(nogil=True, error_model="numpy")

    @kjit
    def secant(t1, t2, z1, z2, tn, out):
        s = rdiv(rsub(tn, t2), rsub(t2, t1))
        for i in range(out.shape[0]):
            a = ld1(z2, i)
            st1(out, i, cadd(a, cmulr(csub(a, ld1(z1, i)), s)))

    @kjit
    def quadratic(t0, t1, t2, z0, z1, z2, tn, out):
        # Newton form anchored at the newest point
        d01 = rsub(t1, t0)
        d12 = rsub(t2, t1)
        d02 = rsub(t2, t0)
        h2 = rsub(tn, t2)
        h21 = rmul(h2, rsub(tn, t1))
        r01 = rdiv(rfrom(1.0), d01)
        r12 = rdiv(rfrom(1.0), d12)
        r02 = rdiv(rfrom(1.0), d02)
        for i in range(out.shape[0]):
            a0, a1, a2 = ld1(z0, i), ld1(z1, i), ld1(z2, i)
            f01 = cmulr(csub(a1, a0), r01)
            f12 = cmulr(csub(a2, a1), r12)
            f012 = cmulr(csub(f12, f01), r02)
            st1(out, i, cadd(cadd(a2, cmulr(f12, h2)), cmulr(f012, h21)))

    return SimpleNamespace(secant=secant, quadratic=quadratic)


class PathHistory:
    """Up to three accepted ``(t, z)`` pairs, oldest first, ``t`` increasing."""

    def __init__(self, precision: PrecisionLevel = PrecisionLevel.D, depth: int = 3):
        self.precision = precision
        self._points: deque = deque(maxlen=depth)

    def __len__(self) -> int:
        return len(self._points)

    @property
    def points(self) -> tuple:
        return tuple(self._points)

    @property
    def t(self):
        return self._points[-1][0]

    @property
    def z(self) -> np.ndarray:
        return self._points[-1][1]

    def push(self, t, z) -> None:
        P = self.precision
        t = P.real(t)
        z = P.as_field(z, ndim=1)
        if not np.all(np.isfinite(z)):
            raise ValueError("history points must be finite")
        if self._points and not t > self._points[-1][0]:
            raise DegenerateHistoryError(f"t must increase: {t} after {self._points[-1][0]}")
        z.flags.writeable = False
        self._points.append((t, z))

    def copy(self) -> "PathHistory":
        other = PathHistory(self.precision, self._points.maxlen)
        other._points.extend(self._points)
        return other


def _check(hist: PathHistory, t_new, need: int):
    if len(hist) == 0:
        raise ValueError("empty history")
    P = hist.precision
    t_new = P.real(t_new)
    if not t_new > hist.t:
        raise ValueError(f"prediction target {t_new} must exceed the last accepted t {hist.t}")
    pts = hist.points[-need:]
    ts = [t for t, _ in pts]
    if len(set(ts)) != len(ts):
        raise DegenerateHistoryError("duplicated t in history")
    return pts, P.kernel_real(t_new)


def predict_secant(hist: PathHistory, t_new) -> np.ndarray:
    """Linear extrapolation through the last two points (the last point if only one)."""
    pts, tn = _check(hist, t_new, 2)
    if len(pts) == 1:
        return pts[0][1].copy()
    P = hist.precision
    (t1, z1), (t2, z2) = pts
    out = P.zeros(z2.shape[0])
    kernels(P).secant(P.kernel_real(t1), P.kernel_real(t2), z1, z2, tn, out)
    return out


def predict_quadratic(hist: PathHistory, t_new) -> np.ndarray:
    """Value at ``t_new`` of the componentwise parabola through the last three points."""
    pts, tn = _check(hist, t_new, 3)
    if len(pts) < 3:
        return predict_secant(hist, t_new)
    P = hist.precision
    (t0, z0), (t1, z1), (t2, z2) = pts
    out = P.zeros(z2.shape[0])
    kr = P.kernel_real
    kernels(P).quadratic(kr(t0), kr(t1), kr(t2), z0, z1, z2, tn, out)
    return out


def predict(kind: str, hist: PathHistory, t_new) -> np.ndarray:
    if kind == "secant":
        return predict_secant(hist, t_new)
    if kind == "quadratic":
        return predict_quadratic(hist, t_new)
    raise ValueError(f"unknown predictor {kind!r}; expected one of {PREDICTORS}")
