import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from tfqkd.chernoff import expected_lower, expected_upper, phi_lower, phi_upper


def _bisect(f, lo, hi, iters=200):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _log_tail(x, n):
    """log of the multiplicative Chernoff tail [e^d / (1+d)^(1+d)]^x with n = (1+d) x."""
    d = n / x - 1.0
    return x * (d - (1.0 + d) * math.log1p(d))


def test_bounds_bracket_rate_against_plain_bisection():
    n, N, eps = 1e4, 1e8, 1e-10
    lo, hi = expected_lower(n, eps), expected_upper(n, eps)
    assert lo / N < 1e-4 < hi / N
    # independent oracle: bisection on the textbook tail in the (x, delta) form
    ref_lo = _bisect(lambda x: _log_tail(x, n) - math.log(eps), 1.0, n)
    ref_hi = _bisect(lambda x: _log_tail(x, n) - math.log(eps), n, 10 * n)
    assert lo == pytest.approx(ref_lo, rel=1e-9)
    assert hi == pytest.approx(ref_hi, rel=1e-9)


def test_edge_values():
    eps = 1e-10
    assert expected_lower(0, eps) == 0.0
    assert expected_upper(0, eps) == pytest.approx(-math.log(eps))
    assert phi_upper(0.0, eps) == 0.0 and phi_lower(0.0, eps) == 0.0
    # phi_lower is vacuous for small expectations
    assert phi_lower(5.0, eps) == 0.0
    with pytest.raises(ValueError):
        phi_upper(1.0, 0.0)
    with pytest.raises(ValueError):
        expected_upper(-1.0, 0.1)


@given(st.floats(1e-3, 1e12), st.floats(1e-15, 0.5))
def test_sandwich(x, eps):
    assert phi_lower(x, eps) <= x <= phi_upper(x, eps)


@given(st.floats(1.0, 1e10), st.floats(1e-12, 0.5))
def test_inversions_are_inverse(n, eps):
    x_lo = expected_lower(n, eps)
    assert phi_upper(x_lo, eps) == pytest.approx(n, rel=1e-8)
    x_hi = expected_upper(n, eps)
    assert phi_lower(x_hi, eps) == pytest.approx(n, rel=1e-8)
    assert x_lo <= n <= x_hi


def test_width_decays_like_inverse_sqrt():
    eps = 1e-10
    widths = []
    for x in (1e4, 1e6, 1e8):
        widths.append((phi_upper(x, eps) - phi_lower(x, eps)) / x)
    # relative width ~ 2 sqrt(-2 ln eps / x): a factor 10 per two decades
    assert widths[0] / widths[1] == pytest.approx(10.0, rel=0.05)
    assert widths[1] / widths[2] == pytest.approx(10.0, rel=0.01)
    assert widths[2] == pytest.approx(2 * math.sqrt(-2 * math.log(eps) / 1e8), rel=0.01)


def test_bounds_tighten_as_eps_grows():
    x = 1e4
    prev = math.inf
    for eps in (1e-12, 1e-6, 1e-2, 0.5, 0.999):
        w = phi_upper(x, eps) - phi_lower(x, eps)
        assert w < prev
        prev = w
    assert prev / x < 1e-3
