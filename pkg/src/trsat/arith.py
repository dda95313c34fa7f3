"""Exact rational and fixed-width arithmetic contexts.

Every scalar operation in the workbench is routed through an
ArithmeticContext: either exact rational arithmetic, or a b-bit
fixed-point arithmetic with explicit rounding and overflow policies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Union

try:
    from gmpy2 import mpq as Rat
except ImportError:  # pragma: no cover - gmpy2 is the fast path
    from fractions import Fraction as Rat

RatLike = Union[int, "Rat"]

ZERO = Rat(0)
ONE = Rat(1)

ROUND_DOWN = "down"
ROUND_UP = "up"
OVERFLOW_SATURATE = "saturate"
OVERFLOW_WRAP = "wrap"


class EvaluationError(Exception):
    """Raised when an evaluation cannot proceed (e.g. division by zero)."""


def rat(numerator: RatLike, denominator: RatLike = 1) -> Rat:
    return Rat(numerator, denominator)


def rat_to_str(x: RatLike) -> str:
    """Serialize a rational as "p/q" in lowest terms, denominator always present."""
    q = Rat(x)
    return f"{q.numerator}/{q.denominator}"


def rat_from_str(s: str) -> Rat:
    p, _, q = s.partition("/")
    if q == "":
        return Rat(int(p))
    return Rat(int(p), int(q))


@dataclass(frozen=True)
class FixedWidthFormat:
    """A b-bit fixed-point format with frac_bits fractional bits.

    Representable values are k * 2**-frac_bits for integer k in
    [-2**(b-1), 2**(b-1) - 1], a two's-complement-style asymmetric range
    so that exactly 2**b values exist.
    """

    total_bits: int
    frac_bits: int
    overflow: str = OVERFLOW_SATURATE
    rounding: str = ROUND_DOWN

    def __post_init__(self):
        if self.total_bits < 1:
            raise ValueError("total_bits must be positive")
        if not 0 <= self.frac_bits < self.total_bits:
            raise ValueError("frac_bits must satisfy 0 <= F < b")
        if self.overflow not in (OVERFLOW_SATURATE, OVERFLOW_WRAP):
            raise ValueError(f"unknown overflow policy {self.overflow!r}")
        if self.rounding not in (ROUND_DOWN, ROUND_UP):
            raise ValueError(f"unknown rounding policy {self.rounding!r}")

    @property
    def min_value(self) -> Rat:
        return Rat(-(1 << (self.total_bits - 1)), 1 << self.frac_bits)

    @property
    def max_value(self) -> Rat:
        return Rat((1 << (self.total_bits - 1)) - 1, 1 << self.frac_bits)

    def to_json(self) -> dict:
        return {
            "total_bits": self.total_bits,
            "frac_bits": self.frac_bits,
            "overflow": self.overflow,
            "rounding": self.rounding,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "FixedWidthFormat":
        return cls(
            total_bits=obj["total_bits"],
            frac_bits=obj["frac_bits"],
            overflow=obj["overflow"],
            rounding=obj["rounding"],
        )


def quantize(x: RatLike, fmt: FixedWidthFormat) -> Rat:
    """Round x to the format's grid, then apply the overflow policy.

    Rounding acts on the scaled integer k = x * 2**F: "down" is floor
    (toward -inf), "up" is ceiling. Saturation clamps k into the
    representable range; wrap reduces it modulo 2**b into the same range.
    """
    x = Rat(x)
    scaled = x * (1 << fmt.frac_bits)
    num, den = scaled.numerator, scaled.denominator
    if fmt.rounding == ROUND_DOWN:
        k = num // den
    else:
        k = -((-num) // den)
    lo = -(1 << (fmt.total_bits - 1))
    hi = (1 << (fmt.total_bits - 1)) - 1
    if fmt.overflow == OVERFLOW_SATURATE:
        k = max(lo, min(hi, k))
    else:
        k = ((k - lo) % (1 << fmt.total_bits)) + lo
    return Rat(k, 1 << fmt.frac_bits)


class ArithmeticContext:
    """Exact rational mode, or fixed-width mode quantizing after every op.

    In fixed mode the result of every primitive operation is quantized,
    which deliberately makes evaluation order part of the semantics.
    Contexts are immutable and safe to share between threads.
    """

    __slots__ = ("fmt", "_qcache")

    def __init__(self, fmt: FixedWidthFormat | None = None):
        self.fmt = fmt
        self._qcache: dict = {}

    @property
    def is_exact(self) -> bool:
        return self.fmt is None

    def normalize(self, x: RatLike) -> Rat:
        """Bring an externally supplied value into the context's value set."""
        if self.fmt is None:
            return Rat(x)
        key = x
        got = self._qcache.get(key)
        if got is None:
            got = quantize(x, self.fmt)
            self._qcache[key] = got
        return got

    def add(self, a: RatLike, b: RatLike) -> Rat:
        r = Rat(a) + b
        return r if self.fmt is None else self.normalize(r)

    def sub(self, a: RatLike, b: RatLike) -> Rat:
        r = Rat(a) - b
        return r if self.fmt is None else self.normalize(r)

    def mul(self, a: RatLike, b: RatLike) -> Rat:
        r = Rat(a) * b
        return r if self.fmt is None else self.normalize(r)

    def div(self, a: RatLike, b: RatLike) -> Rat:
        if b == 0:
            raise EvaluationError("division by zero")
        r = Rat(a) / Rat(b)
        return r if self.fmt is None else self.normalize(r)

    def neg(self, a: RatLike) -> Rat:
        r = -Rat(a)
        return r if self.fmt is None else self.normalize(r)

    def sum(self, values: Iterable[RatLike]) -> Rat:
        """Left-to-right fold with add; the empty sum is 0."""
        acc = ZERO
        for v in values:
            acc = self.add(acc, v)
        return acc

    def describe(self) -> str:
        if self.fmt is None:
            return "exact"
        f = self.fmt
        return f"fixed(b={f.total_bits},F={f.frac_bits},{f.overflow},{f.rounding})"

    def __repr__(self):
        return f"ArithmeticContext({self.describe()})"


EXACT = ArithmeticContext()
