"""Scalar special functions: log-gamma, digamma, trigamma.

Implemented with the usual recurrence-plus-asymptotic-series scheme so the
conversion code carries no external special-function dependency.  The test
suite cross-checks every function against scipy.special.
"""

from __future__ import annotations

import math

__all__ = ["gammaln", "digamma", "trigamma", "betaln"]

# Arguments below this threshold are shifted up by the recurrence before the
# asymptotic series is applied; at 10 the truncation error is ~1e-14.
_ASYMPTOTIC_CUTOFF = 10.0


def gammaln(x: float) -> float:
    """log Gamma(x) for x > 0."""
    if not x > 0.0:
        raise ValueError(f"gammaln requires x > 0, got {x}")
    shift = 0.0
    while x < _ASYMPTOTIC_CUTOFF:
        shift -= math.log(x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    # Stirling series: sum B_{2n} / (2n(2n-1) x^{2n-1})
    series = inv * (
        1.0 / 12.0
        - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0)))
    )
    return shift + (x - 0.5) * math.log(x) - x + 0.5 * math.log(2.0 * math.pi) + series


def digamma(x: float) -> float:
    """psi(x) = d/dx log Gamma(x) for x > 0."""
    if not x > 0.0:
        raise ValueError(f"digamma requires x > 0, got {x}")
    shift = 0.0
    while x < _ASYMPTOTIC_CUTOFF:
        shift -= 1.0 / x
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv2 * (
        1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 / 132.0)))
    )
    return shift + math.log(x) - 0.5 * inv - series


def trigamma(x: float) -> float:
    """psi'(x) for x > 0."""
    if not x > 0.0:
        raise ValueError(f"trigamma requires x > 0, got {x}")
    shift = 0.0
    while x < _ASYMPTOTIC_CUTOFF:
        shift += 1.0 / (x * x)
        x += 1.0
    inv = 1.0 / x
    inv2 = inv * inv
    series = inv * (
        1.0
        + inv * (0.5 + inv * (1.0 / 6.0 - inv2 * (1.0 / 30.0 - inv2 * (1.0 / 42.0 - inv2 / 30.0))))
    )
    return shift + series


def betaln(a: float, b: float) -> float:
    """log Beta(a, b) for a, b > 0."""
    return gammaln(a) + gammaln(b) - gammaln(a + b)
