"""Evaluation of a homotopy and its Jacobian with shared monomial products.

Two partitionable stages fill the work arrays:

* the monomial stage computes, for every support monomial, its value and its
  ``k`` shifted monomials ``x**(a - e_m)`` (``V``).  Each monomial costs one
  common factor ``prod x_i**(a_i - 1)`` plus the all-but-one products of its
  variables, obtained from prefix and suffix products in ``3k - 6``
  multiplications;
* the coefficient stage multiplies ``V`` with ``C(t)`` row by row, applying the
  exponent factors, to produce the residual vector and the Jacobian (``Y``).

Work is split by index stride: worker ``w`` of ``p`` owns monomials and rows
with ``index % p == w``.  Every row is summed in index order by one worker, so
results are bitwise independent of ``p``.

:class:`OldBaselineEvaluator` is the reference scheme with ``t`` as an extra
variable and every term and derivative recomputed by repeated multiplication.
"""
from __future__ import annotations

import operator
from dataclasses import dataclass
from functools import lru_cache
from types import SimpleNamespace
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .polysys import ExponentVector, Homotopy, pack_support
from .scalar import PrecisionLevel


def suffix_prefix_products(v: Sequence, mul: Callable = operator.mul, one=1) -> list:
    """All-but-one products ``w[m] = prod(v[j] for j != m)``.

    Prefix products ``psi`` and suffix products ``phi`` are combined so that
    exactly ``max(0, 3k - 6)`` calls to ``mul`` are made for ``k >= 2``.
    """
    k = len(v)
    if k == 0:
        raise ValueError("need at least one factor")
    if k == 1:
        return [one]
    psi = [v[0]]
    for m in range(1, k - 1):
        psi.append(mul(psi[-1], v[m]))
    phi = [v[k - 1]]
    for m in range(1, k - 1):
        phi.append(mul(phi[-1], v[k - 1 - m]))
    # phi[k-2] skips v[0], psi[k-2] skips v[k-1]
    omega = [phi[k - 2]]
    for m in range(1, k - 1):
        omega.append(mul(psi[m - 1], phi[k - m - 2]))
    omega.append(psi[k - 2])
    return omega


@dataclass
class EvaluatedSystem:
    """Residual vector ``h(z, t)`` and Jacobian ``dh/dx`` in working layout."""

    residual: np.ndarray
    jacobian: np.ndarray
    precision: PrecisionLevel = PrecisionLevel.D


@lru_cache(maxsize=None)
def kernels(precision: PrecisionLevel) -> SimpleNamespace:
    F = precision.ops
    cadd, csub, cmul, cneg, cmulr, cmuld = F.cadd, F.csub, F.cmul, F.cneg, F.cmulr, F.cmuld
    rsub, rfrom = F.rsub, F.rfrom
    ld1, st1, ld2, st2, zero, one, alloc1 = F.ld1, F.st1, F.ld2, F.st2, F.zero, F.one, F.alloc1
    kjit = njit(nogil=True, error_model="numpy")

    @kjit
    def speelpenning(x, var, exp, lo, k, part, psi, phi):
        # writes the k shifted monomials of monomial slots lo..lo+k into part;
        # returns (value, omega-stage multiplications, all multiplications)
        if k == 0:
            return one(), 0, 0
        mults = 0
        have_cf = False
        cf = one()
        for s in range(lo, lo + k):
            xv = ld1(x, var[s])
            for _ in range(exp[s] - 1):
                if have_cf:
                    cf = cmul(cf, xv)
                    mults += 1
                else:
                    cf = xv
                    have_cf = True
        om = 0
        if k == 1:
            st1(part, lo, cf)
        else:
            st1(psi, 0, ld1(x, var[lo]))
            for m in range(1, k - 1):
                st1(psi, m, cmul(ld1(psi, m - 1), ld1(x, var[lo + m])))
                om += 1
            st1(phi, 0, ld1(x, var[lo + k - 1]))
            for m in range(1, k - 1):
                st1(phi, m, cmul(ld1(phi, m - 1), ld1(x, var[lo + k - 1 - m])))
                om += 1
            for m in range(k):
                if m == 0:
                    w = ld1(phi, k - 2)
                elif m == k - 1:
                    w = ld1(psi, k - 2)
                else:
                    w = cmul(ld1(psi, m - 1), ld1(phi, k - m - 2))
                    om += 1
                if have_cf:
                    w = cmul(cf, w)
                    mults += 1
                st1(part, lo + m, w)
        value = cmul(ld1(part, lo), ld1(x, var[lo]))
        return value, om, mults + om + 1

    @kjit
    def monomial_single(x, var, exp, part):
        k = var.shape[0]
        psi = alloc1(max(k, 1))
        phi = alloc1(max(k, 1))
        return speelpenning(x, var, exp, 0, k, part, psi, phi)

    @kjit
    def monomial_stage(wid, p, x, ptr, var, exp, kmax, vval, vpart):
        psi = alloc1(max(kmax, 1))
        phi = alloc1(max(kmax, 1))
        count = 0
        for j in range(wid, ptr.shape[0] - 1, p):
            lo = ptr[j]
            value, _, _ = speelpenning(x, var, exp, lo, ptr[j + 1] - lo, vpart, psi, phi)
            st1(vval, j, value)
            count += 1
        return count

    @kjit
    def coefficient_stage(wid, p, t, start, target, ptr, var, exp, vval, vpart, res, ab):
        n = ab.shape[0]
        m = ptr.shape[0] - 1
        omt = rsub(rfrom(1.0), t)
        for i in range(wid, n, p):
            for c in range(n):
                st2(ab, i, c, zero())
            acc = zero()
            for j in range(m):
                c = cadd(cmulr(ld2(start, i, j), omt), cmulr(ld2(target, i, j), t))
                acc = cadd(acc, cmul(c, ld1(vval, j)))
                for s in range(ptr[j], ptr[j + 1]):
                    v = var[s]
                    st2(ab, i, v, cadd(ld2(ab, i, v), cmul(cmuld(c, float(exp[s])), ld1(vpart, s))))
            st1(res, i, acc)
            st2(ab, i, n, cneg(acc))

    @kjit
    def coeffs_at(t, start, target, out):
        omt = rsub(rfrom(1.0), t)
        for i in range(start.shape[0]):
            for j in range(start.shape[1]):
                st2(out, i, j, cadd(cmulr(ld2(start, i, j), omt), cmulr(ld2(target, i, j), t)))

    @kjit
    def old_eval(xt, ptr, var, exp, coef, res, jac):
        # every term and every derivative by repeated multiplication
        n = coef.shape[0]
        for i in range(n):
            for c in range(jac.shape[1]):
                st2(jac, i, c, zero())
            acc = zero()
            for j in range(ptr.shape[0] - 1):
                c = ld2(coef, i, j)
                val = one()
                for s in range(ptr[j], ptr[j + 1]):
                    xv = ld1(xt, var[s])
                    for _ in range(exp[s]):
                        val = cmul(val, xv)
                acc = cadd(acc, cmul(c, val))
                for s in range(ptr[j], ptr[j + 1]):
                    d = one()
                    for s2 in range(ptr[j], ptr[j + 1]):
                        e = exp[s2] - 1 if s2 == s else exp[s2]
                        xv = ld1(xt, var[s2])
                        for _ in range(e):
                            d = cmul(d, xv)
                    v = var[s]
                    st2(jac, i, v, cadd(ld2(jac, i, v), cmul(cmuld(c, float(exp[s])), d)))
            st1(res, i, acc)

    @kjit
    def append_t(x, t, xt):
        for i in range(x.shape[0]):
            st1(xt, i, ld1(x, i))
        st1(xt, x.shape[0], cmulr(one(), t))

    @kjit
    def csub_arrays(a, b, out):
        for i in range(a.shape[0]):
            for j in range(a.shape[1]):
                st2(out, i, j, csub(ld2(a, i, j), ld2(b, i, j)))

    return SimpleNamespace(**{name: fn for name, fn in locals().items() if hasattr(fn, "py_func")})


def _support_arrays(e: ExponentVector):
    return (np.array(e.variables, dtype=np.int64), np.array(e.exponents, dtype=np.int64))


def eval_monomial_with_partials(x, e: ExponentVector, precision: PrecisionLevel = PrecisionLevel.D,
                                return_counts: bool = False):
    """Value of ``x**e`` and its ``k`` shifted monomials ``x**(e - e_m)``.

    The exponent factor ``a_m`` of the true partial derivative is *not*
    applied.  With ``return_counts`` a third item ``(omega_mults, total_mults)``
    reports the multiplications spent in the all-but-one stage and overall.
    """
    x = precision.as_field(x, ndim=1)
    var, exp = _support_arrays(e)
    part = precision.zeros(e.k)
    value, om, total = kernels(precision).monomial_single(x, var, exp, part)
    value = np.array(value) if precision is PrecisionLevel.DD else value
    if return_counts:
        return value, part, (om, total)
    return value, part


def coefficients_at(h: Homotopy, t) -> np.ndarray:
    out = h.precision.zeros(h.target.shape[:2])
    kernels(h.precision).coeffs_at(h.precision.kernel_real(t), h.start, h.target, out)
    return out


class Evaluator:
    """Work arrays ``V`` and ``Y`` for one homotopy, filled stage by stage.

    The Jacobian is written into the first ``n`` columns of the augmented
    matrix ``ab`` with ``-h`` in the last column, ready for elimination.
    """

    def __init__(self, homotopy: Homotopy):
        self.homotopy = homotopy
        self.precision = P = homotopy.precision
        self._k = kernels(P)
        self._sa = homotopy.arrays
        n, m = homotopy.n, homotopy.m
        self.vval = P.zeros(m)
        self.vpart = P.zeros(int(self._sa.ptr[-1]))
        self.res = P.zeros(n)
        self.ab = P.zeros((n, n + 1))
        self._mon_counts: dict[int, int] = {}

    @property
    def n(self) -> int:
        return self.homotopy.n

    @property
    def monomial_evaluations(self) -> int:
        return sum(self._mon_counts.values())

    def monomial_stage(self, wid: int, p: int, z: np.ndarray) -> None:
        sa = self._sa
        c = self._k.monomial_stage(wid, p, z, sa.ptr, sa.var, sa.exp, sa.kmax, self.vval, self.vpart)
        self._mon_counts[wid] = self._mon_counts.get(wid, 0) + c

    def coefficient_stage(self, wid: int, p: int, t) -> None:
        h, sa = self.homotopy, self._sa
        self._k.coefficient_stage(wid, p, t, h.start, h.target, sa.ptr, sa.var, sa.exp,
                                  self.vval, self.vpart, self.res, self.ab)

    def fill(self, z: np.ndarray, t) -> None:
        """Sequential evaluation into the work arrays (``z`` in working layout, kernel ``t``)."""
        self.monomial_stage(0, 1, z)
        self.coefficient_stage(0, 1, t)

    def evaluate(self, z, t) -> EvaluatedSystem:
        """Sequential evaluation; returns copies of the residual and Jacobian."""
        P = self.precision
        self.fill(P.as_field(z, ndim=1), P.kernel_real(t))
        return EvaluatedSystem(self.res.copy(), self.ab[:, : self.n].copy(), P)


class OldBaselineEvaluator:
    """Homotopy rewritten with ``t`` as variable ``n``: ``s*x**a + (g - s)*t*x**a``.

    All ``2m`` terms are kept per polynomial (zero coefficients included) and
    nothing is shared between terms, rows or derivatives.
    """

    def __init__(self, homotopy: Homotopy):
        self.homotopy = h = homotopy
        self.precision = P = h.precision
        self._k = kernels(P)
        n = h.n
        support = []
        for e in h.support:
            support.append(e)
            support.append(ExponentVector(e.entries + ((n, 1),)))
        self._sa = pack_support(support)
        delta = P.zeros(h.target.shape[:2])
        self._k.csub_arrays(h.target, h.start, delta)
        coef = P.zeros((n, 2 * h.m))
        coef[:, 0::2] = h.start
        coef[:, 1::2] = delta
        self.coef = coef
        self.xt = P.zeros(n + 1)
        self.res = P.zeros(n)
        self.jac = P.zeros((n, n + 1))

    def fill(self, z: np.ndarray, t) -> None:
        self._k.append_t(z, t, self.xt)
        sa = self._sa
        self._k.old_eval(self.xt, sa.ptr, sa.var, sa.exp, self.coef, self.res, self.jac)

    def evaluate(self, z, t) -> EvaluatedSystem:
        P = self.precision
        self.fill(P.as_field(z, ndim=1), P.kernel_real(t))
        return EvaluatedSystem(self.res.copy(), self.jac[:, : self.homotopy.n].copy(), P)


def eval_old_baseline(homotopy: Homotopy, z, t) -> EvaluatedSystem:
    return OldBaselineEvaluator(homotopy).evaluate(z, t)
