"""Exact rational scalars and their interchange encoding.

Every number that can influence a certificate is a `fractions.Fraction`:
always in lowest terms, denominator positive, arbitrary precision. Floats
are admitted only at the boundary (sampled values in the simulator) and are
converted exactly via `Fraction(float)`.

Interchange encoding is the string ``"p/q"`` (or ``"p"`` for integers);
the pseudo-values ``"-inf"``/``"inf"`` stand for unbounded interval ends
and are represented in memory as ``None``.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Union

Rational = Fraction

RationalLike = Union[Fraction, int, str]


def rat(value: RationalLike) -> Fraction:
    """Coerce ints, ``"p/q"`` strings and decimal strings to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not a rational: {value!r}")


def format_rational(value: Fraction) -> str:
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def parse_bound(text: str) -> Optional[Fraction]:
    """Parse an interval endpoint; ``"-inf"``/``"inf"`` map to None."""
    s = text.strip().lower()
    if s in ("-inf", "inf", "+inf", "-oo", "oo", "+oo"):
        return None
    return rat(text)


def format_bound(value: Optional[Fraction], *, lower: bool) -> str:
    if value is None:
        return "-inf" if lower else "inf"
    return format_rational(value)
