"""Sparse polynomial systems on a shared monomial support, homotopies, and I/O.

Variables are indexed from 0 in Python; the text format uses 1-based indices.

File format (line oriented, ``#`` starts a comment, blank lines ignored)::

    n m
    k i1 a1 i2 a2 ... ik ak        # m support lines, 1 <= i1 < ... < ik <= n
    re im re im ...                # n coefficient lines, m pairs each

Coefficients are written with ``repr`` so reading back is bitwise exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from os import PathLike
from typing import Callable, Iterable, Sequence

import numpy as np

from .scalar import PrecisionLevel

DEFAULT_SEED = 20110902


class SystemFormatError(ValueError):
    """Malformed system file; ``lineno`` is 1-based (0 when unknown)."""

    def __init__(self, message: str, lineno: int = 0):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


@dataclass(frozen=True)
class ExponentVector:
    """Monomial ``x[i1]**a1 * ... * x[ik]**ak`` stored as sorted ``(i, a)`` pairs."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        entries = tuple((int(i), int(a)) for i, a in self.entries)
        object.__setattr__(self, "entries", entries)
        prev = -1
        for i, a in entries:
            if i <= prev:
                raise ValueError(f"variable indices must strictly increase: {entries}")
            if a < 1:
                raise ValueError(f"exponents must be positive: {entries}")
            prev = i

    @classmethod
    def from_dense(cls, exponents: Sequence[int]) -> "ExponentVector":
        return cls(tuple((i, a) for i, a in enumerate(exponents) if a))

    @property
    def k(self) -> int:
        return len(self.entries)

    @property
    def degree(self) -> int:
        return sum(a for _, a in self.entries)

    @property
    def variables(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self.entries)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(a for _, a in self.entries)

    def dense(self, n: int) -> list[int]:
        out = [0] * n
        for i, a in self.entries:
            out[i] = a
        return out


CONSTANT = ExponentVector()


@dataclass(frozen=True)
class SupportArrays:
    """CSR packing of a support: monomial ``j`` owns slots ``ptr[j]:ptr[j+1]``."""

    ptr: np.ndarray
    var: np.ndarray
    exp: np.ndarray
    kmax: int


def pack_support(support: Sequence[ExponentVector]) -> SupportArrays:
    ptr = np.zeros(len(support) + 1, dtype=np.int64)
    for j, e in enumerate(support):
        ptr[j + 1] = ptr[j] + e.k
    var = np.fromiter((i for e in support for i in e.variables), dtype=np.int64, count=int(ptr[-1]))
    exp = np.fromiter((a for e in support for a in e.exponents), dtype=np.int64, count=int(ptr[-1]))
    kmax = max((e.k for e in support), default=0)
    for a in (ptr, var, exp):
        a.flags.writeable = False
    return SupportArrays(ptr, var, exp, kmax)


def _check_support(n: int, support: Sequence[ExponentVector]) -> None:
    seen = set()
    for e in support:
        if e in seen:
            raise ValueError(f"duplicate monomial in support: {e.entries}")
        seen.add(e)
        if e.entries and e.entries[-1][0] >= n:
            raise ValueError(f"monomial {e.entries} uses a variable outside 0..{n - 1}")


@dataclass(frozen=True, eq=False)
class SupportedSystem:
    """``n`` polynomials in ``n`` variables sharing one list of ``m`` monomials.

    ``coeffs[i, j]`` is the complex coefficient of ``support[j]`` in
    polynomial ``i``.
    """

    n: int
    support: tuple[ExponentVector, ...]
    coeffs: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        object.__setattr__(self, "support", support)
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if self.n < 1:
            raise ValueError("dimension must be at least 1")
        if coeffs.shape != (self.n, len(support)):
            raise ValueError(f"coefficient matrix has shape {coeffs.shape}, "
                             f"expected {(self.n, len(support))}")
        _check_support(self.n, support)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("coefficients must be finite")
        empty = np.flatnonzero(~np.any(coeffs != 0, axis=1))
        if empty.size:
            raise ValueError(f"polynomial {int(empty[0])} has no nonzero coefficient")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def m(self) -> int:
        return len(self.support)

    @cached_property
    def arrays(self) -> SupportArrays:
        return pack_support(self.support)

    def identical(self, other: "SupportedSystem") -> bool:
        """Bitwise equality (signed zeros distinguished)."""
        return (self.n == other.n and self.support == other.support
                and self.coeffs.shape == other.coeffs.shape
                and np.array_equal(self.coeffs.view(np.int64), other.coeffs.view(np.int64)))

    def __eq__(self, other):
        if not isinstance(other, SupportedSystem):
            return NotImplemented
        return self.identical(other)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class Homotopy:
    """``h(x, t) = sum_j ((1-t)*start[:, j] + t*target[:, j]) * x**support[j]``.

    Coefficient and start-solution arrays are stored in the working layout of
    ``precision`` (see :meth:`PrecisionLevel.to_field`) and are read-only.
    """

    support: tuple[ExponentVector, ...]
    start: np.ndarray
    target: np.ndarray
    z0: np.ndarray
    precision: PrecisionLevel = PrecisionLevel.D

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        for name in ("start", "target", "z0"):
            arr = np.array(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        _check_support(self.n, self.support)

    @property
    def n(self) -> int:
        return self.target.shape[0]

    @property
    def m(self) -> int:
        return len(self.support)

    @cached_property
    def arrays(self) -> SupportArrays:
        return pack_support(self.support)

    def coefficients_at(self, t) -> np.ndarray:
        """The coefficient matrix ``C(t)`` in working precision."""
        from .evaldiff import coefficients_at
        return coefficients_at(self, t)

    def target_system(self) -> SupportedSystem:
        return SupportedSystem(self.n, self.support, self.precision.to_complex(self.target))


@dataclass(frozen=True)
class SystemSpec:
    """Parameters of :func:`generate_system`.

    ``davg`` defaults to the midpoint of ``1..dmax``; total degrees are drawn
    uniformly from ``[max(1, 2*davg - dmax), dmax]``.
    """

    n: int
    m: int
    dmax: int
    davg: float | None = None
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.dmax < 1:
            raise ValueError(f"invalid system spec {self}")
        if self.davg is not None and not 1 <= self.davg <= self.dmax:
            raise ValueError(f"average degree {self.davg} outside [1, {self.dmax}]")

    @property
    def degree_range(self) -> tuple[int, int]:
        if self.davg is None:
            return 1, self.dmax
        return max(1, round(2 * self.davg - self.dmax)), self.dmax


def count_monomials(n: int, dlo: int, dhi: int) -> int:
    """Number of distinct monomials in ``n`` variables with degree in ``[dlo, dhi]``."""
    return sum(math.comb(n + d - 1, d) for d in range(dlo, dhi + 1))


def _sample_monomial(rng: np.random.Generator, n: int, d: int) -> ExponentVector:
    k = int(rng.integers(1, min(n, d) + 1))
    variables = np.sort(rng.choice(n, size=k, replace=False))
    cuts = np.sort(rng.choice(d - 1, size=k - 1, replace=False) + 1) if k > 1 else np.array([], int)
    bounds = np.concatenate(([0], cuts, [d]))
    return ExponentVector(tuple(zip(variables.tolist(), np.diff(bounds).tolist())))


def unit_disk(rng: np.random.Generator, shape) -> np.ndarray:
    """Complex samples uniform on the closed unit disk."""
    r = np.sqrt(rng.random(shape))
    theta = 2.0 * np.pi * rng.random(shape)
    return r * np.exp(1j * theta)


def generate_system(spec: SystemSpec) -> SupportedSystem:
    """Random system with ``spec.m`` shared monomials.

    Sampler, with ``rng = numpy.random.default_rng(seed)`` (PCG64):

    1. per monomial draw the total degree ``d`` uniformly from
       ``spec.degree_range``, the number of variables ``k`` uniformly from
       ``1..min(n, d)``, ``k`` distinct sorted variables, and a uniformly
       random composition of ``d`` into ``k`` positive parts (``k-1`` distinct
       cut points in ``1..d-1``).  Duplicates are redrawn.
    2. coefficients row by row, uniform on the unit disk
       (``r = sqrt(u1)``, ``theta = 2*pi*u2``, radii drawn before angles).
    """
    n, m = spec.n, spec.m
    dlo, dhi = spec.degree_range
    available = count_monomials(n, dlo, dhi)
    if m > available:
        raise ValueError(f"cannot draw {m} distinct monomials: only {available} exist "
                         f"in {n} variables with degree {dlo}..{dhi}")
    rng = np.random.default_rng(spec.seed)
    support: list[ExponentVector] = []
    seen: set[ExponentVector] = set()
    attempts = 0
    while len(support) < m:
        attempts += 1
        if attempts > 1000 * m + 10000:
            raise ValueError(f"gave up drawing {m} distinct monomials; spec too tight")
        e = _sample_monomial(rng, n, int(rng.integers(dlo, dhi + 1)))
        if e not in seen:
            seen.add(e)
            support.append(e)
    coeffs = unit_disk(rng, (n, m))
    return SupportedSystem(n, tuple(support), coeffs)


def with_constant_term(f: SupportedSystem, seed: int = DEFAULT_SEED) -> SupportedSystem:
    """``f`` plus the constant monomial, its coefficients uniform on the unit disk."""
    if CONSTANT in f.support:
        raise ValueError("system already has a constant term")
    c = unit_disk(np.random.default_rng(seed), (f.n, 1))
    return SupportedSystem(f.n, tuple(f.support) + (CONSTANT,), np.concatenate([f.coeffs, c], axis=1))


def random_point(n: int, seed: int = DEFAULT_SEED) -> np.ndarray:
    """Seeded point with coordinates uniform on the unit disk."""
    return unit_disk(np.random.default_rng(seed), n)


def newton_homotopy(f: SupportedSystem, z0, precision: PrecisionLevel = PrecisionLevel.D) -> Homotopy:
    """``h(x, t) = f(x) - (1 - t) f(z0)``, so ``z0`` solves ``h(x, 0) = 0``.

    The constant monomial is appended to the support when missing; only its
    start column differs from the target.  ``f(z0)`` is evaluated in the
    working precision.
    """
    from .evaldiff import Evaluator

    support = list(f.support)
    coeffs = np.asarray(f.coeffs)
    if CONSTANT in support:
        const = support.index(CONSTANT)
    else:
        support.append(CONSTANT)
        const = len(support) - 1
        coeffs = np.concatenate([coeffs, np.zeros((f.n, 1), dtype=np.complex128)], axis=1)
    target = precision.to_field(coeffs)
    z = precision.as_field(z0, ndim=1)
    if z.shape[0] != f.n:
        raise ValueError(f"start point has {z.shape[0]} coordinates, expected {f.n}")
    base = Homotopy(tuple(support), target, target, z, precision)
    fz0 = Evaluator(base).evaluate(z, 1.0).residual
    ops = precision.ops
    start = target.copy()
    for i in range(f.n):
        ops.st2(start, i, const, ops.csub(ops.ld2(target, i, const), ops.ld1(fz0, i)))
    return Homotopy(tuple(support), start, target, z, precision)


def monomial_reference(x: Sequence, e: ExponentVector, one=1):
    """``x**e`` by repeated multiplication."""
    v = one
    for i, a in e.entries:
        for _ in range(a):
            v = v * x[i]
    return v


def eval_reference(sys: SupportedSystem, x: Sequence, coeff: Callable = complex, one=1) -> list:
    """Independent evaluation oracle: every term recomputed, nothing shared.

    ``coeff`` converts each stored ``complex`` coefficient into the number
    type used for arithmetic (e.g. exact rationals); ``x`` must be of that type.
    """
    out = []
    for i in range(sys.n):
        acc = None
        for j, e in enumerate(sys.support):
            term = coeff(sys.coeffs[i, j]) * monomial_reference(x, e, one)
            acc = term if acc is None else acc + term
        out.append(acc)
    return out


def jacobian_reference(sys: SupportedSystem, x: Sequence, coeff: Callable = complex, one=1) -> list[list]:
    """Jacobian oracle: each partial derivative of each term by repeated multiplication."""
    n = sys.n
    jac = [[coeff(0) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j, e in enumerate(sys.support):
            c = coeff(sys.coeffs[i, j])
            for v, a in e.entries:
                dense = e.dense(n)
                dense[v] -= 1
                jac[i][v] = jac[i][v] + c * a * monomial_reference(x, ExponentVector.from_dense(dense), one)
    return jac


# ---------------------------------------------------------------------------
# text format
# ---------------------------------------------------------------------------

def format_system(sys: SupportedSystem) -> str:
    lines = [f"{sys.n} {sys.m}"]
    for e in sys.support:
        lines.append(" ".join([str(e.k)] + [f"{i + 1} {a}" for i, a in e.entries]))
    for i in range(sys.n):
        lines.append(" ".join(f"{float(c.real)!r} {float(c.imag)!r}" for c in sys.coeffs[i]))
    return "\n".join(lines) + "\n"


def write_system(sys: SupportedSystem, path: str | PathLike) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_system(sys))


def _content_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if tokens:
            yield lineno, tokens


def _ints(tokens: list[str], lineno: int) -> list[int]:
    try:
        return [int(tok) for tok in tokens]
    except ValueError:
        raise SystemFormatError(f"expected integers, got {' '.join(tokens)!r}", lineno) from None


def parse_system(text: str) -> SupportedSystem:
    lines = iter(_content_lines(text))
    try:
        lineno, tokens = next(lines)
    except StopIteration:
        raise SystemFormatError("empty system file") from None
    header = _ints(tokens, lineno)
    if len(header) != 2 or header[0] < 1 or header[1] < 1:
        raise SystemFormatError("header must be 'n m' with positive integers", lineno)
    n, m = header
    support: list[ExponentVector] = []
    seen: dict[ExponentVector, int] = {}
    for j in range(m):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise SystemFormatError(f"expected {m} support lines, found {j}") from None
        vals = _ints(tokens, lineno)
        k = vals[0]
        if k < 0 or len(vals) != 1 + 2 * k:
            raise SystemFormatError(f"support line needs k followed by {max(k, 0)} (index, exponent) pairs",
                                    lineno)
        pairs = list(zip(vals[1::2], vals[2::2]))
        if any(not 1 <= i <= n for i, _ in pairs):
            raise SystemFormatError(f"variable index outside 1..{n}", lineno)
        try:
            e = ExponentVector(tuple((i - 1, a) for i, a in pairs))
        except ValueError as exc:
            raise SystemFormatError(str(exc), lineno) from None
        if e in seen:
            raise SystemFormatError(f"duplicate support row (same as line {seen[e]})", lineno)
        seen[e] = lineno
        support.append(e)
    coeffs = np.zeros((n, m), dtype=np.complex128)
    for i in range(n):
        try:
            lineno, tokens = next(lines)
        except StopIteration:
            raise SystemFormatError(f"expected {n} coefficient lines, found {i}") from None
        if len(tokens) != 2 * m:
            raise SystemFormatError(f"coefficient line needs {2 * m} numbers, got {len(tokens)}", lineno)
        try:
            vals = [float(tok) for tok in tokens]
        except ValueError:
            raise SystemFormatError("malformed number in coefficient line", lineno) from None
        if not all(math.isfinite(v) for v in vals):
            raise SystemFormatError("coefficients must be finite", lineno)
        coeffs[i].real = vals[0::2]
        coeffs[i].imag = vals[1::2]
    extra = next(lines, None)
    if extra is not None:
        raise SystemFormatError("unexpected trailing content", extra[0])
    try:
        return SupportedSystem(n, tuple(support), coeffs)
    except ValueError as exc:
        raise SystemFormatError(str(exc)) from None


def read_system(path: str | PathLike) -> SupportedSystem:
    with open(path, encoding="ascii") as fh:
        return parse_system(fh.read())
