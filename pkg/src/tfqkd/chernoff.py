"""Multiplicative Chernoff bounds and their inversions.

For a sum of independent Bernoulli variables with expected value ``x``, the
observed value exceeds ``phi_upper(x, eps)`` (or falls below
``phi_lower(x, eps)``) with probability at most ``eps``. Writing the bound as
``y = (1 + delta) x``, both tails reduce to

    y - x - y * ln(y / x) = ln(eps)

which is solved for ``y > x`` (upper) and ``0 <= y < x`` (lower). The inverse
maps go from an observed count to confidence bounds on the expectation.
"""
from __future__ import annotations

import math

from scipy.optimize import brentq


def _tail(y: float, x: float, log_eps: float) -> float:
    ylog = y * math.log(y / x) if y > 0 else 0.0
    return y - x - ylog - log_eps


def _check_eps(eps: float) -> float:
    if not (0.0 < eps < 1.0):
        raise ValueError("failure probability must lie in (0, 1)")
    return math.log(eps)


def phi_upper(x: float, eps: float) -> float:
    """Upper Chernoff bound on the observed value for expected value ``x``."""
    log_eps = _check_eps(eps)
    if x < 0:
        raise ValueError("expected value must be >= 0")
    if x == 0:
        return 0.0
    hi = 2.0 * x + 1.0
    while _tail(hi, x, log_eps) > 0:
        hi *= 2.0
    return brentq(_tail, x, hi, args=(x, log_eps), xtol=1e-13 * max(x, 1.0), rtol=1e-15)


def phi_lower(x: float, eps: float) -> float:
    """Lower Chernoff bound on the observed value (0 when the bound is vacuous)."""
    log_eps = _check_eps(eps)
    if x < 0:
        raise ValueError("expected value must be >= 0")
    if x == 0 or _tail(0.0, x, log_eps) >= 0:
        return 0.0
    return brentq(_tail, 0.0, x, args=(x, log_eps), xtol=1e-13 * max(x, 1.0), rtol=1e-15)


def expected_upper(n: float, eps: float) -> float:
    """Largest expectation consistent with observing ``n`` (``phi_lower(x) = n``)."""
    log_eps = _check_eps(eps)
    if n < 0:
        raise ValueError("observed value must be >= 0")
    # phi_lower(x) == 0 for every x <= -ln eps, so a zero count bounds x there
    if n == 0:
        return -log_eps
    # the tail equation is explicit in x: solve it on x > n
    hi = 2.0 * n - 4.0 * log_eps + 1.0
    while _tail(n, hi, log_eps) > 0:
        hi *= 2.0
    return brentq(lambda x: _tail(n, x, log_eps), n, hi, xtol=1e-12 * max(n, 1.0), rtol=1e-15)


def expected_lower(n: float, eps: float) -> float:
    """Smallest expectation consistent with observing ``n`` (``phi_upper(x) = n``)."""
    log_eps = _check_eps(eps)
    if n < 0:
        raise ValueError("observed value must be >= 0")
    if n == 0:
        return 0.0
    # solve on log x: small counts put the root many decades below n
    lo = math.log(n) - 1.0
    while _tail(n, math.exp(lo), log_eps) > 0:
        lo -= 1.0 + abs(lo)
    u = brentq(lambda v: _tail(n, math.exp(v), log_eps), lo, math.log(n), xtol=1e-14, rtol=1e-15)
    return math.exp(u)
