"""Exact rationals and combinatorial coefficients.

Every probability in the package is a :class:`fractions.Fraction`; nothing
is ever routed through binary floating point.
"""

from __future__ import annotations

import decimal
import math
import threading
from fractions import Fraction

__all__ = [
    "Rational",
    "binomial",
    "multinomial",
    "to_rational",
    "to_probability",
    "format_rational",
    "format_decimal",
]

Rational = Fraction

_binom_cache: dict[tuple[int, int], int] = {}
_binom_lock = threading.Lock()


def binomial(n: int, k: int) -> int:
    """C(n, k), zero outside 0 <= k <= n. Memoized on (n, k)."""
    if n < 0:
        raise ValueError(f"binomial: n must be >= 0, got {n}")
    if k < 0 or k > n:
        return 0
    key = (n, k)
    try:
        return _binom_cache[key]
    except KeyError:
        pass
    value = math.comb(n, k)
    with _binom_lock:
        _binom_cache[key] = value
    return value


def multinomial(parts) -> int:
    """(sum parts)! / prod(parts!) as a product of binomials."""
    total = 0
    result = 1
    for part in parts:
        if part < 0:
            raise ValueError(f"multinomial: negative part {part}")
        total += part
        result *= binomial(total, part)
    return result


def to_rational(value) -> Fraction:
    """Exact conversion from int, Fraction, Decimal or text ("3/7", "-2", "0.1").

    Floats are rejected: ``0.1`` has no exact binary representation and
    silently converting it would break exact identities.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, decimal.Decimal):
        if not value.is_finite():
            raise ValueError(f"non-finite decimal {value}")
        return Fraction(value)
    if isinstance(value, float):
        raise TypeError(f"refusing float {value!r}; pass a string such as '0.1' or '1/10'")
    if isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError("empty rational literal")
        if "/" in text:
            num, _, den = text.partition("/")
            try:
                n, d = int(num), int(den)
            except ValueError:
                raise ValueError(f"malformed rational {value!r}") from None
            if d <= 0:
                raise ValueError(f"denominator must be positive in {value!r}")
            return Fraction(n, d)
        try:
            dec = decimal.Decimal(text)
        except decimal.InvalidOperation:
            raise ValueError(f"malformed rational {value!r}") from None
        if not dec.is_finite():
            raise ValueError(f"non-finite value {value!r}")
        return Fraction(dec)
    raise TypeError(f"cannot convert {type(value).__name__} to a rational")


def to_probability(value) -> Fraction:
    q = to_rational(value)
    if q < 0 or q > 1:
        raise ValueError(f"probability {format_rational(q)} outside [0, 1]")
    return q


def format_rational(q: Fraction) -> str:
    """Canonical ``a/b`` text; the denominator is always written, so one is ``1/1``."""
    return f"{q.numerator}/{q.denominator}"


def format_decimal(q: Fraction, digits: int = 17) -> str:
    """Decimal approximation rounded to ``digits`` significant digits."""
    with decimal.localcontext() as ctx:
        ctx.prec = digits
        ctx.rounding = decimal.ROUND_HALF_EVEN
        value = decimal.Decimal(q.numerator) / decimal.Decimal(q.denominator)
    return format(value, f".{digits}g")
