"""Error-free transformations and double-double real/complex arithmetic.

Two layers live here:

* jitted primitives working on raw floats and tuples.  Double-double reals
  are ``(hi, lo)`` pairs, double-double complex numbers are
  ``(re_hi, re_lo, im_hi, im_lo)`` quadruples.  Every kernel in the package is
  built from these.
* thin Python types (:class:`DoubleDouble`, :class:`ComplexScalar`) for
  interactive use and for tests.

:class:`PrecisionLevel` selects one arithmetic for a whole run.  Its
:attr:`~PrecisionLevel.ops` bundle carries the jitted scalar operations and the
array layout the kernels are specialised on.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Any, Callable, NamedTuple, Union

import numpy as np
from numba import njit, types
from numba.extending import intrinsic

__all__ = [
    "two_sum",
    "quick_two_sum",
    "two_prod",
    "two_prod_dekker",
    "split",
    "dd_add",
    "dd_sub",
    "dd_mul",
    "dd_div",
    "dd_sqrt",
    "DoubleDouble",
    "ComplexScalar",
    "PrecisionLevel",
    "FieldOps",
]

jit = partial(njit, nogil=True, error_model="numpy", cache=True)


def _check_rounding() -> None:
    # ties must go to even in both directions; truncation or directed modes fail
    tiny = 2.0**-53
    if not (1.0 + tiny == 1.0 and (1.0 + 2.0**-52) + tiny == 1.0 + 2.0**-51
            and -1.0 - tiny == -1.0 and 1.0 + 3 * tiny == 1.0 + 2.0**-51):
        raise RuntimeError("floating-point rounding is not round-to-nearest-even")


_check_rounding()


# ---------------------------------------------------------------------------
# error-free transformations
# ---------------------------------------------------------------------------

@intrinsic
def _fma(typingctx, a, b, c):
    sig = types.float64(types.float64, types.float64, types.float64)

    def codegen(context, builder, signature, args):
        return builder.fma(*args)

    return sig, codegen


_SPLITTER = 134217729.0  # 2**27 + 1
_SPLIT_THRESH = 6.69692879491417e299


@jit
def two_sum(a, b):
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``s + e = a + b`` exactly.

    On overflow ``s`` is infinite and ``e`` is NaN.
    """
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


@jit
def quick_two_sum(a, b):
    """Fast two-sum, exact only when ``|a| >= |b|`` (or ``a == 0``)."""
    s = a + b
    e = b - (s - a)
    return s, e


@jit
def split(a):
    """Dekker split of ``a`` into two halves of at most 26 significant bits."""
    if a > _SPLIT_THRESH or a < -_SPLIT_THRESH:
        a *= 3.7252902984e-09  # 2**-28
        temp = _SPLITTER * a
        hi = temp - (temp - a)
        lo = a - hi
        return hi * 268435456.0, lo * 268435456.0
    temp = _SPLITTER * a
    hi = temp - (temp - a)
    return hi, a - hi


@jit
def two_prod(a, b):
    """Return ``(p, e)`` with ``p = fl(a * b)`` and ``p + e = a * b`` exactly.

    Uses a fused multiply-add.  Exactness needs the product error to be
    representable: no overflow and no underflow of ``e``.
    """
    p = a * b
    return p, _fma(a, b, -p)


@jit
def two_prod_dekker(a, b):
    """Same contract as :func:`two_prod`, using Dekker splitting instead of FMA."""
    p = a * b
    ah, al = split(a)
    bh, bl = split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


# ---------------------------------------------------------------------------
# double-double on (hi, lo) tuples
# ---------------------------------------------------------------------------

@jit
def _renorm(hi, lo):
    s = hi + lo
    if not math.isfinite(s):
        return s, 0.0
    return s, lo - (s - hi)


@jit
def dd_add_(a, b):
    # accurate (IEEE-style) addition, relative error <= 2**-104
    s1, s2 = two_sum(a[0], b[0])
    t1, t2 = two_sum(a[1], b[1])
    s2 += t1
    s1, s2 = quick_two_sum(s1, s2)
    s2 += t2
    return _renorm(s1, s2)


@jit
def dd_neg_(a):
    return -a[0], -a[1]


@jit
def dd_sub_(a, b):
    return dd_add_(a, (-b[0], -b[1]))


@jit
def dd_mul_(a, b):
    # relative error <= 2**-103
    p, e = two_prod(a[0], b[0])
    e += a[0] * b[1] + a[1] * b[0]
    return _renorm(p, e)


@jit
def dd_mul_d_(a, b):
    p, e = two_prod(a[0], b)
    e += a[1] * b
    return _renorm(p, e)


@jit
def dd_div_(a, b):
    # three-quotient long division, relative error <= 2**-103
    q1 = a[0] / b[0]
    r = dd_sub_(a, dd_mul_d_(b, q1))
    q2 = r[0] / b[0]
    r = dd_sub_(r, dd_mul_d_(b, q2))
    q3 = r[0] / b[0]
    q1, q2 = quick_two_sum(q1, q2)
    return dd_add_((q1, q2), (q3, 0.0))


@jit
def dd_sqrt_(a):
    # one Newton step on the binary64 root, relative error <= 2**-104;
    # negative input gives NaN
    if a[0] == 0.0:
        return 0.0, 0.0
    if a[0] < 0.0:
        return math.nan, 0.0
    s = math.sqrt(a[0])
    p, e = two_prod(s, s)
    r = dd_sub_(a, (p, e))
    return _renorm(s, r[0] / (2.0 * s))


@jit
def dd_abs_(a):
    if a[0] < 0.0:
        return -a[0], -a[1]
    return a[0], a[1]


@jit
def dd_lt_(a, b):
    return a[0] < b[0] or (a[0] == b[0] and a[1] < b[1])


# ---------------------------------------------------------------------------
# double-double complex on (re_hi, re_lo, im_hi, im_lo) tuples
# ---------------------------------------------------------------------------

@jit
def zz_add(a, b):
    re = dd_add_((a[0], a[1]), (b[0], b[1]))
    im = dd_add_((a[2], a[3]), (b[2], b[3]))
    return re[0], re[1], im[0], im[1]


@jit
def zz_sub(a, b):
    re = dd_sub_((a[0], a[1]), (b[0], b[1]))
    im = dd_sub_((a[2], a[3]), (b[2], b[3]))
    return re[0], re[1], im[0], im[1]


@jit
def zz_neg(a):
    return -a[0], -a[1], -a[2], -a[3]


@jit
def zz_mul(a, b):
    ar = (a[0], a[1])
    ai = (a[2], a[3])
    br = (b[0], b[1])
    bi = (b[2], b[3])
    re = dd_sub_(dd_mul_(ar, br), dd_mul_(ai, bi))
    im = dd_add_(dd_mul_(ar, bi), dd_mul_(ai, br))
    return re[0], re[1], im[0], im[1]


@jit
def zz_div(a, b):
    ar = (a[0], a[1])
    ai = (a[2], a[3])
    br = (b[0], b[1])
    bi = (b[2], b[3])
    den = dd_add_(dd_mul_(br, br), dd_mul_(bi, bi))
    re = dd_div_(dd_add_(dd_mul_(ar, br), dd_mul_(ai, bi)), den)
    im = dd_div_(dd_sub_(dd_mul_(ai, br), dd_mul_(ar, bi)), den)
    return re[0], re[1], im[0], im[1]


@jit
def zz_mulr(a, r):
    re = dd_mul_((a[0], a[1]), r)
    im = dd_mul_((a[2], a[3]), r)
    return re[0], re[1], im[0], im[1]


@jit
def zz_muld(a, d):
    re = dd_mul_d_((a[0], a[1]), d)
    im = dd_mul_d_((a[2], a[3]), d)
    return re[0], re[1], im[0], im[1]


@jit
def zz_abs1(a):
    return dd_add_(dd_abs_((a[0], a[1])), dd_abs_((a[2], a[3])))


@jit
def zz_mod(a):
    re = (a[0], a[1])
    im = (a[2], a[3])
    return dd_sqrt_(dd_add_(dd_mul_(re, re), dd_mul_(im, im)))


@jit
def zz_isfinite(a):
    return math.isfinite(a[0]) and math.isfinite(a[2])


# ---------------------------------------------------------------------------
# binary64 complex counterparts (same signatures as the zz_* family)
# ---------------------------------------------------------------------------

@jit
def zd_add(a, b):
    return a + b


@jit
def zd_sub(a, b):
    return a - b


@jit
def zd_neg(a):
    return -a


@jit
def zd_mul(a, b):
    return a * b


@jit
def zd_div(a, b):
    return a / b


@jit
def zd_mulr(a, r):
    return a * r


@jit
def zd_muld(a, d):
    return a * d


@jit
def zd_abs1(a):
    return abs(a.real) + abs(a.imag)


@jit
def zd_mod(a):
    return abs(a)


@jit
def zd_isfinite(a):
    return math.isfinite(a.real) and math.isfinite(a.imag)


@jit
def rd_add(a, b):
    return a + b


@jit
def rd_sub(a, b):
    return a - b


@jit
def rd_mul(a, b):
    return a * b


@jit
def rd_div(a, b):
    return a / b


@jit
def rd_lt(a, b):
    return a < b


@jit
def rd_from(x):
    return x


@jit
def rdd_from(x):
    return x, 0.0


@jit
def rd_hi(x):
    return x


@jit
def rdd_hi(x):
    return x[0]


# array access: binary64 complex arrays are complex128, double-double complex
# arrays are float64 with a trailing axis of length 4

@jit
def ld1_d(a, i):
    return a[i]


@jit
def st1_d(a, i, v):
    a[i] = v


@jit
def ld2_d(a, i, j):
    return a[i, j]


@jit
def st2_d(a, i, j, v):
    a[i, j] = v


@jit
def zero_d():
    return 0j


@jit
def one_d():
    return 1.0 + 0j


@jit
def alloc1_d(n):
    return np.zeros(n, dtype=np.complex128)


@jit
def ld1_dd(a, i):
    return a[i, 0], a[i, 1], a[i, 2], a[i, 3]


@jit
def st1_dd(a, i, v):
    a[i, 0] = v[0]
    a[i, 1] = v[1]
    a[i, 2] = v[2]
    a[i, 3] = v[3]


@jit
def ld2_dd(a, i, j):
    return a[i, j, 0], a[i, j, 1], a[i, j, 2], a[i, j, 3]


@jit
def st2_dd(a, i, j, v):
    a[i, j, 0] = v[0]
    a[i, j, 1] = v[1]
    a[i, j, 2] = v[2]
    a[i, j, 3] = v[3]


@jit
def zero_dd():
    return 0.0, 0.0, 0.0, 0.0


@jit
def one_dd():
    return 1.0, 0.0, 0.0, 0.0


@jit
def alloc1_dd(n):
    return np.zeros((n, 4))


# ---------------------------------------------------------------------------
# Python-level types
# ---------------------------------------------------------------------------

Real = Union[int, float, "DoubleDouble"]


class DoubleDouble(NamedTuple):
    """Unevaluated sum ``hi + lo`` of two doubles, about 106 significant bits.

    Normalised: ``hi == fl(hi + lo)``.  Mixed arithmetic with ``int`` and
    ``float`` promotes the other operand exactly (ints beyond 2**106 round).
    """

    hi: float
    lo: float = 0.0

    @classmethod
    def from_value(cls, x: Any) -> "DoubleDouble":
        if isinstance(x, DoubleDouble):
            return x
        if isinstance(x, float):
            return cls(x, 0.0)
        if isinstance(x, int):
            hi = float(x)
            if not math.isfinite(hi):
                return cls(hi, 0.0)
            return cls(*_renorm(hi, float(x - int(hi))))
        if isinstance(x, Fraction):
            hi = float(x)
            return cls(*_renorm(hi, float(x - Fraction(hi))))
        if isinstance(x, str):
            return cls.from_value(Fraction(x))
        # mpmath.mpf and friends
        hi = float(x)
        return cls(*_renorm(hi, float(x - hi)))

    def to_fraction(self) -> Fraction:
        return Fraction(self.hi) + Fraction(self.lo)

    def isfinite(self) -> bool:
        return math.isfinite(self.hi)

    def normalized(self) -> "DoubleDouble":
        return DoubleDouble(*_renorm(self.hi, self.lo))

    def sqrt(self) -> "DoubleDouble":
        return dd_sqrt(self)

    def __float__(self) -> float:
        return self.hi

    def __repr__(self) -> str:
        return f"DoubleDouble({self.hi!r}, {self.lo!r})"

    def __neg__(self) -> "DoubleDouble":
        return DoubleDouble(-self.hi, -self.lo)

    def __pos__(self) -> "DoubleDouble":
        return self

    def __abs__(self) -> "DoubleDouble":
        return -self if self.hi < 0.0 else self

    def __add__(self, other):  # type: ignore[override]
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_add_(self, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_sub_(self, o))

    def __rsub__(self, other):
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_sub_(o, self))

    def __mul__(self, other):  # type: ignore[override]
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_mul_(self, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_div_(self, o))

    def __rtruediv__(self, other):
        o = _as_dd(other)
        return NotImplemented if o is None else DoubleDouble(*dd_div_(o, self))

    def _cmp(self, other) -> int | None:
        o = _as_dd(other)
        if o is None:
            return None
        if self.hi != o.hi:
            return -1 if self.hi < o.hi else 1
        if self.lo != o.lo:
            return -1 if self.lo < o.lo else 1
        return 0

    def __eq__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c == 0

    def __ne__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c != 0

    def __lt__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c < 0

    def __le__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c <= 0

    def __gt__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c > 0

    def __ge__(self, other):  # type: ignore[override]
        c = self._cmp(other)
        return NotImplemented if c is None else c >= 0

    def __hash__(self) -> int:
        return hash((self.hi, self.lo))


def _as_dd(x) -> DoubleDouble | None:
    if isinstance(x, DoubleDouble):
        return x
    if isinstance(x, (int, float)):
        return DoubleDouble.from_value(x)
    return None


def dd_add(a: DoubleDouble, b: DoubleDouble) -> DoubleDouble:
    return DoubleDouble(*dd_add_(a, b))


def dd_sub(a: DoubleDouble, b: DoubleDouble) -> DoubleDouble:
    return DoubleDouble(*dd_sub_(a, b))


def dd_mul(a: DoubleDouble, b: DoubleDouble) -> DoubleDouble:
    return DoubleDouble(*dd_mul_(a, b))


def dd_div(a: DoubleDouble, b: DoubleDouble) -> DoubleDouble:
    """Double-double quotient.  A zero divisor yields a non-finite result."""
    return DoubleDouble(*dd_div_(a, b))


def dd_sqrt(a: DoubleDouble) -> DoubleDouble:
    if a.hi < 0.0:
        raise ValueError(f"dd_sqrt of negative value {a!r}")
    return DoubleDouble(*dd_sqrt_(a))


def _real_sqrt(x):
    return x.sqrt() if isinstance(x, DoubleDouble) else math.sqrt(x)


@dataclass(frozen=True)
class ComplexScalar:
    """Complex number over ``float`` or :class:`DoubleDouble` components."""

    re: Any
    im: Any

    @classmethod
    def from_complex(cls, z: complex, dd: bool = False) -> "ComplexScalar":
        z = complex(z)
        if dd:
            return cls(DoubleDouble(z.real), DoubleDouble(z.imag))
        return cls(z.real, z.imag)

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __add__(self, other: "ComplexScalar") -> "ComplexScalar":
        return ComplexScalar(self.re + other.re, self.im + other.im)

    def __sub__(self, other: "ComplexScalar") -> "ComplexScalar":
        return ComplexScalar(self.re - other.re, self.im - other.im)

    def __neg__(self) -> "ComplexScalar":
        return ComplexScalar(-self.re, -self.im)

    def __mul__(self, other: "ComplexScalar") -> "ComplexScalar":
        return ComplexScalar(self.re * other.re - self.im * other.im,
                             self.re * other.im + self.im * other.re)

    def __truediv__(self, other: "ComplexScalar") -> "ComplexScalar":
        den = other.re * other.re + other.im * other.im
        if den == 0:
            # zero divisor: flagged through NaN components, see isfinite()
            return ComplexScalar(self.re * math.nan, self.im * math.nan)
        return ComplexScalar((self.re * other.re + self.im * other.im) / den,
                             (self.im * other.re - self.re * other.im) / den)

    def __abs__(self):
        return _real_sqrt(self.re * self.re + self.im * self.im)

    modulus = __abs__

    def isfinite(self) -> bool:
        return math.isfinite(float(self.re)) and math.isfinite(float(self.im))


# ---------------------------------------------------------------------------
# precision levels
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldOps:
    """Jitted scalar operations and array layout for one precision level.

    Complex scalars are ``complex`` (binary64) or 4-tuples (double-double);
    reals are ``float`` or ``(hi, lo)`` pairs.  Kernels never see anything
    else, so every kernel is written once against these names.
    """

    name: str
    ncomp: int
    eps: float                      # machine epsilon of the working precision
    cadd: Callable
    csub: Callable
    cneg: Callable
    cmul: Callable
    cdiv: Callable
    cmulr: Callable                 # complex times working real
    cmuld: Callable                 # complex times binary64
    cabs1: Callable                 # |re| + |im| as working real
    cmod: Callable                  # modulus as working real
    cisfinite: Callable
    radd: Callable
    rsub: Callable
    rmul: Callable
    rdiv: Callable
    rlt: Callable
    rfrom: Callable                 # binary64 -> working real
    rhi: Callable                   # working real -> leading binary64
    ld1: Callable
    st1: Callable
    ld2: Callable
    st2: Callable
    zero: Callable
    one: Callable
    alloc1: Callable


_D_OPS = FieldOps(
    name="d", ncomp=1, eps=2.0**-52,
    cadd=zd_add, csub=zd_sub, cneg=zd_neg, cmul=zd_mul, cdiv=zd_div,
    cmulr=zd_mulr, cmuld=zd_muld, cabs1=zd_abs1, cmod=zd_mod, cisfinite=zd_isfinite,
    radd=rd_add, rsub=rd_sub, rmul=rd_mul, rdiv=rd_div, rlt=rd_lt, rfrom=rd_from, rhi=rd_hi,
    ld1=ld1_d, st1=st1_d, ld2=ld2_d, st2=st2_d, zero=zero_d, one=one_d, alloc1=alloc1_d,
)

_DD_OPS = FieldOps(
    name="dd", ncomp=4, eps=2.0**-104,
    cadd=zz_add, csub=zz_sub, cneg=zz_neg, cmul=zz_mul, cdiv=zz_div,
    cmulr=zz_mulr, cmuld=zz_muld, cabs1=zz_abs1, cmod=zz_mod, cisfinite=zz_isfinite,
    radd=dd_add_, rsub=dd_sub_, rmul=dd_mul_, rdiv=dd_div_, rlt=dd_lt_, rfrom=rdd_from, rhi=rdd_hi,
    ld1=ld1_dd, st1=st1_dd, ld2=ld2_dd, st2=st2_dd, zero=zero_dd, one=one_dd, alloc1=alloc1_dd,
)


class PrecisionLevel(str, enum.Enum):
    """Working precision of a run: binary64 (``d``) or double-double (``dd``)."""

    D = "d"
    DD = "dd"

    @property
    def ops(self) -> FieldOps:
        return _DD_OPS if self is PrecisionLevel.DD else _D_OPS

    @property
    def eps(self) -> float:
        return self.ops.eps

    def real(self, x: Real) -> Real:
        """Convert ``x`` to the working real type (``float`` or ``DoubleDouble``)."""
        if self is PrecisionLevel.DD:
            return DoubleDouble.from_value(x)
        return float(x)

    def kernel_real(self, x) -> float | tuple[float, float]:
        """``x`` as the plain value kernels take: ``float`` or ``(hi, lo)``."""
        if self is PrecisionLevel.DD:
            d = DoubleDouble.from_value(x)
            return (d.hi, d.lo)
        return float(x)

    def zeros(self, shape: int | tuple[int, ...]) -> np.ndarray:
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        if self is PrecisionLevel.DD:
            return np.zeros(shape + (4,))
        return np.zeros(shape, dtype=np.complex128)

    def to_field(self, values) -> np.ndarray:
        """Promote complex binary64 data (array-like) to the working layout."""
        z = np.asarray(values, dtype=np.complex128)
        if self is PrecisionLevel.D:
            return z.copy()
        out = np.zeros(z.shape + (4,))
        out[..., 0] = z.real
        out[..., 2] = z.imag
        return out

    def as_field(self, values, ndim: int) -> np.ndarray:
        """Copy of ``values`` in working layout; complex data is promoted."""
        arr = np.asarray(values)
        if (self is PrecisionLevel.DD and arr.ndim == ndim + 1 and arr.shape[-1] == 4
                and arr.dtype == np.float64):
            return arr.copy()
        if arr.ndim != ndim:
            raise ValueError(f"expected {ndim}-dimensional data, got shape {arr.shape}")
        return self.to_field(arr)

    def to_complex(self, arr: np.ndarray) -> np.ndarray:
        """Round working-layout data to complex128."""
        if self is PrecisionLevel.D:
            return np.array(arr, dtype=np.complex128)
        return arr[..., 0] + 1j * arr[..., 2]

    def to_scalars(self, arr: np.ndarray) -> np.ndarray:
        """Object array of :class:`ComplexScalar` with working-precision parts."""
        shape = arr.shape if self is PrecisionLevel.D else arr.shape[:-1]
        out = np.empty(shape, dtype=object)
        for idx in np.ndindex(*shape):
            if self is PrecisionLevel.D:
                z = complex(arr[idx])
                out[idx] = ComplexScalar(z.real, z.imag)
            else:
                v = arr[idx]
                out[idx] = ComplexScalar(DoubleDouble(v[0], v[1]), DoubleDouble(v[2], v[3]))
        return out

    def from_scalars(self, values) -> np.ndarray:
        """Inverse of :meth:`to_scalars` (accepts ``ComplexScalar`` or ``complex``)."""
        vals = np.asarray(values, dtype=object)
        out = self.zeros(vals.shape)
        for idx in np.ndindex(*vals.shape):
            v = vals[idx]
            if not isinstance(v, ComplexScalar):
                v = ComplexScalar.from_complex(v)
            if self is PrecisionLevel.D:
                out[idx] = complex(float(v.re), float(v.im))
            else:
                re = DoubleDouble.from_value(v.re)
                im = DoubleDouble.from_value(v.im)
                out[idx] = (re.hi, re.lo, im.hi, im.lo)
        return out

    @classmethod
    def parse(cls, name: str) -> "PrecisionLevel":
        try:
            return cls(name.lower())
        except ValueError:
            raise ValueError(f"unknown precision {name!r}; expected 'd' or 'dd'") from None
