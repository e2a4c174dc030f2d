"""
Exact dyadic-rational arithmetic.

Every measure and average handled by the certificates is a number of the form
``mantissa * 2**(-exponent)``; keeping them in this form (with an unbounded
integer mantissa) makes all certified comparisons exact.
"""

from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
import functools
from typing import Any


class Ordering(IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def _canonical(mantissa: int, exponent: int) -> tuple[int, int]:
    if mantissa == 0:
        return 0, 0
    # Strip trailing zero bits so the mantissa is odd.
    trailing = (mantissa & -mantissa).bit_length() - 1
    return mantissa >> trailing, exponent - trailing


@functools.total_ordering
@dataclass(frozen=True)
class DyadicScalar:
    """
    Value ``mantissa * 2**(-exponent)``, always stored in canonical form:
    the mantissa is odd, or zero with exponent 0.
    """

    mantissa: int
    exponent: int = 0

    def __post_init__(self):
        mantissa, exponent = _canonical(int(self.mantissa), int(self.exponent))
        object.__setattr__(self, "mantissa", mantissa)
        object.__setattr__(self, "exponent", exponent)

    # Constructors

    @classmethod
    def coerce(cls, value: "DyadicScalar | int") -> "DyadicScalar":
        if isinstance(value, DyadicScalar):
            return value
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"cannot use {value!r} as an exact dyadic value")
        return cls(value, 0)

    @classmethod
    def pow2(cls, n: int) -> "DyadicScalar":
        """Return 2**n (n may be negative)."""
        return cls(1, -n)

    @classmethod
    def from_fraction(cls, value: Fraction) -> "DyadicScalar":
        denominator = value.denominator
        if denominator & (denominator - 1):
            raise ValueError(f"{value} is not a dyadic rational")
        return cls(value.numerator, denominator.bit_length() - 1)

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "DyadicScalar":
        return cls(int(data["m"]), int(data["e"]))

    # Conversions

    def to_fraction(self) -> Fraction:
        if self.exponent >= 0:
            return Fraction(self.mantissa, 1 << self.exponent)
        return Fraction(self.mantissa << -self.exponent)

    def to_json(self) -> dict[str, Any]:
        return {"m": str(self.mantissa), "e": self.exponent}

    def __float__(self) -> float:
        # Display only; certified paths never round.
        return float(self.to_fraction())

    def __str__(self):
        if self.exponent == 0:
            return str(self.mantissa)
        return f"{self.mantissa}*2^{-self.exponent}"

    # Queries

    def is_zero(self) -> bool:
        return self.mantissa == 0

    def is_integer(self) -> bool:
        return self.exponent <= 0

    def is_power_of_two(self) -> bool:
        return self.mantissa == 1

    def log2(self) -> int:
        """Exact base-2 logarithm; only defined for powers of two."""
        if not self.is_power_of_two():
            raise ValueError(f"{self} is not a power of two")
        return -self.exponent

    def floor(self) -> int:
        if self.exponent <= 0:
            return self.mantissa << -self.exponent
        return self.mantissa >> self.exponent

    def scale(self, n: int) -> "DyadicScalar":
        """Multiply by 2**n."""
        return DyadicScalar(self.mantissa, self.exponent - n)

    def sign(self) -> int:
        return (self.mantissa > 0) - (self.mantissa < 0)

    # Arithmetic

    def __add__(self, other):
        try:
            other = DyadicScalar.coerce(other)
        except TypeError:
            return NotImplemented
        exponent = max(self.exponent, other.exponent)
        mantissa = (self.mantissa << (exponent - self.exponent)) + (
            other.mantissa << (exponent - other.exponent)
        )
        return DyadicScalar(mantissa, exponent)

    __radd__ = __add__

    def __neg__(self):
        return DyadicScalar(-self.mantissa, self.exponent)

    def __sub__(self, other):
        try:
            other = DyadicScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            other = DyadicScalar.coerce(other)
        except TypeError:
            return NotImplemented
        return DyadicScalar(
            self.mantissa * other.mantissa, self.exponent + other.exponent
        )

    __rmul__ = __mul__

    # Ordering

    def compare(self, other: "DyadicScalar | int") -> Ordering:
        other = DyadicScalar.coerce(other)
        exponent = max(self.exponent, other.exponent)
        left = self.mantissa << (exponent - self.exponent)
        right = other.mantissa << (exponent - other.exponent)
        return Ordering((left > right) - (left < right))

    def __lt__(self, other):
        try:
            return self.compare(other) is Ordering.LESS
        except TypeError:
            return NotImplemented

    def __eq__(self, other):
        if isinstance(other, int) and not isinstance(other, bool):
            other = DyadicScalar(other, 0)
        if not isinstance(other, DyadicScalar):
            return NotImplemented
        return self.mantissa == other.mantissa and self.exponent == other.exponent

    def __hash__(self):
        return hash((self.mantissa, self.exponent))


ZERO = DyadicScalar(0)
ONE = DyadicScalar(1)


def dyd_add(a: DyadicScalar, b: DyadicScalar) -> DyadicScalar:
    return a + b


def dyd_mul(a: DyadicScalar, b: DyadicScalar) -> DyadicScalar:
    return a * b


def dyd_cmp(a: DyadicScalar, b: DyadicScalar) -> Ordering:
    return a.compare(b)


@dataclass(frozen=True)
class DyadicInterval:
    """Half-open interval ``[left, left + 2**length_log2)``."""

    left: DyadicScalar
    length_log2: int

    def __post_init__(self):
        object.__setattr__(self, "left", DyadicScalar.coerce(self.left))

    @property
    def length(self) -> DyadicScalar:
        return DyadicScalar.pow2(self.length_log2)

    @property
    def right(self) -> DyadicScalar:
        return self.left + self.length

    def on_unit_grid(self) -> bool:
        return self.left.is_integer() and self.length_log2 >= 0

    def contains(self, t: DyadicScalar | int) -> bool:
        return self.left <= t < self.right

    def is_within(self, lower: DyadicScalar | int, upper: DyadicScalar | int) -> bool:
        return lower <= self.left and self.right <= upper

    def overlaps(self, other: "DyadicInterval") -> bool:
        """True when the two intervals share a set of positive measure."""
        return self.left < other.right and other.left < self.right

    def translate(self, offset: DyadicScalar | int) -> "DyadicInterval":
        return DyadicInterval(self.left + offset, self.length_log2)

    def to_json(self) -> dict[str, Any]:
        return {"left": self.left.to_json(), "length_log2": self.length_log2}
