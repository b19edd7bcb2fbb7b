"""
 * Copyright(c) 2026 monoflow contributors
 *
 * This program and the accompanying materials are made available under the
 * terms of the Eclipse Public License v. 2.0 which is available at
 * http://www.eclipse.org/legal/epl-2.0, or the Eclipse Distribution License
 * v. 1.0 which is available at
 * http://www.eclipse.org/org/documents/edl-v10.php.
 *
 * SPDX-License-Identifier: EPL-2.0 OR BSD-3-Clause
"""

import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, List, Optional, Union

import numpy as np

from .core import FlowNetworkException


class Unbounded:
    """The unbounded quantity +inf used for capacities and buffers.

    There is exactly one instance, :data:`INF`. Sums involving it are unbounded, it
    compares greater than every finite number and converts to ``float('inf')``.

    Examples
    --------
    >>> INF + 3 is INF
    True
    >>> 10**9 < INF
    True
    """

    _instance: Optional["Unbounded"] = None

    def __new__(cls) -> "Unbounded":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __add__(self, other: "Quantity") -> "Unbounded":
        return self

    __radd__ = __add__

    def __mul__(self, other: "Quantity") -> "Quantity":
        if other == 0:
            return Fraction(0)
        if other < 0:
            raise FlowNetworkException(FlowNetworkException.FLOW_BAD_PARAMETER, "Cannot negate an unbounded quantity.")
        return self

    __rmul__ = __mul__

    def __float__(self) -> float:
        return math.inf

    def __eq__(self, other: object) -> bool:
        return other is self or (isinstance(other, float) and other == math.inf)

    def __hash__(self) -> int:
        return hash(math.inf)

    def __lt__(self, other: "Quantity") -> bool:
        return False

    def __le__(self, other: "Quantity") -> bool:
        return self == other

    def __gt__(self, other: "Quantity") -> bool:
        return not self == other

    def __ge__(self, other: "Quantity") -> bool:
        return True

    def __reduce__(self):
        return (Unbounded, ())

    def __repr__(self) -> str:
        return "inf"


INF = Unbounded()

Quantity = Union[int, float, Fraction, Unbounded]
Number = Union[int, float, Fraction]


def parse_quantity(value: object, *, allow_unbounded: bool = True, what: str = "quantity") -> Quantity:
    """Parse a scenario quantity.

    Integers and ``"p/q"`` strings become :class:`fractions.Fraction` so cut arithmetic can
    stay exact, floats stay floats and ``"inf"`` (or ``math.inf``) becomes :data:`INF`.

    Raises
    ------
    FlowNetworkException
        ``FLOW_PARSE_ERROR`` when the value cannot be interpreted.
    """
    if value is INF:
        result: Quantity = INF
    elif isinstance(value, bool):
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid {what} {value!r}.")
    elif isinstance(value, (int, Fraction)):
        result = Fraction(value)
    elif isinstance(value, float):
        if math.isnan(value):
            raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid {what} NaN.")
        result = INF if value == math.inf else value
    elif isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity", "+infinity"):
            result = INF
        else:
            try:
                if any(c in text for c in ".e") and "/" not in text:
                    result = float(text)
                else:
                    result = Fraction(text)
            except (ValueError, ZeroDivisionError):
                raise FlowNetworkException(
                    FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid {what} {value!r}."
                ) from None
            if isinstance(result, float) and not math.isfinite(result):
                result = INF if result == math.inf else result
    else:
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"Invalid {what} {value!r}.")

    if result is INF and not allow_unbounded:
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"The {what} must be finite.")
    if result is not INF and not (result >= 0):
        raise FlowNetworkException(FlowNetworkException.FLOW_PARSE_ERROR, f"The {what} must be non-negative, got {value!r}.")
    return result


def format_quantity(value: Quantity) -> Union[int, float, str]:
    """Inverse of :func:`parse_quantity` producing JSON/TOML friendly values."""
    if value is INF:
        return "inf"
    if isinstance(value, Fraction):
        if value.denominator == 1:
            return value.numerator
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value == math.inf:
        return "inf"
    return float(value)


def as_float(value: Quantity) -> float:
    return math.inf if value is INF else float(value)


def is_rational(value: Quantity) -> bool:
    return isinstance(value, (int, Fraction))


def all_rational(values: Iterable[Quantity]) -> bool:
    """True when every finite value is an int or a Fraction."""
    return all(v is INF or is_rational(v) for v in values)


def common_denominator(values: Iterable[Quantity]) -> int:
    """Least common multiple of the denominators of the finite rational ``values``."""
    dens = [Fraction(v).denominator for v in values if v is not INF]
    return reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)


def scale_to_integers(values: Iterable[Quantity], denominator: int) -> List[Optional[int]]:
    """Scale rationals by ``denominator``; unbounded values map to ``None``."""
    out: List[Optional[int]] = []
    for v in values:
        if v is INF:
            out.append(None)
        else:
            scaled = Fraction(v) * denominator
            assert scaled.denominator == 1
            out.append(scaled.numerator)
    return out


def format_float(value: float) -> str:
    """Fixed 17 significant digit rendering used for every float in CSV artifacts."""
    return "%.17g" % value


def json_number(value: Union[Quantity, None]) -> Union[int, float, str, None]:
    """JSON rendering of a report value: Fractions as ``p/q`` strings, infinities as strings."""
    if value is None:
        return None
    if value is INF:
        return "inf"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return format_quantity(value)


def time_average(y, t) -> float:
    """Trapezoidal mean of samples ``y`` over the times ``t``."""
    integrate = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2 has only trapz
    return float(integrate(y, t) / (t[-1] - t[0]))
