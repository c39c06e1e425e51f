"""Exact money arithmetic.

Costs are kept as rationals so that overtime amounts such as
1000/24 per slot reproduce the familiar table values (41.6667,
166.6667, ...) bit-for-bit.  Display rounds to four decimals.
"""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction

Money = Fraction

_QUANTUM = Decimal("0.0001")


def as_money(value) -> Fraction:
    """Coerce ints, strings like '1000/24', floats and Fractions to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    if isinstance(value, float):
        # floats are dyadic rationals, the conversion is exact
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as money")


def money_str(value: Fraction) -> str:
    """Render with four decimals, trailing zeros trimmed (matches table style)."""
    d = (Decimal(value.numerator) / Decimal(value.denominator)).quantize(
        _QUANTUM, rounding=ROUND_HALF_UP
    )
    s = format(d, "f")
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def money_repr(value: Fraction) -> str:
    """Lossless 'num/den' form used in serialized files."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"
