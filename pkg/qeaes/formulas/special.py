"""Special functions for p-values.

The regularized incomplete gamma functions follow the classic split between
the series representation (x < a + 1) and the Lentz continued fraction
(x >= a + 1); see "Numerical Recipes in C", 2nd edition, chapter 6.
"""

import sys

import numpy as np
from scipy.special import erfc, gammaln

EPS = 1e-15
TINY = sys.float_info.min / EPS
MAX_ITERATIONS = 10_000


def _gamma_series(a, x):
    """Regularized lower incomplete gamma P(a, x) by series, x < a + 1."""
    if x == 0:
        return 0.0
    ap = a
    term = 1 / a
    total = term
    for _ in range(MAX_ITERATIONS):
        ap += 1
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    else:
        raise ArithmeticError(f'Incomplete gamma series did not converge (a={a}, x={x})')
    return total * np.exp(-x + a * np.log(x) - gammaln(a))


def _gamma_continued_fraction(a, x):
    """Regularized upper incomplete gamma Q(a, x) by continued fraction, x >= a + 1."""
    b = x + 1 - a
    c = 1 / TINY
    d = 1 / b
    h = d
    for i in range(1, MAX_ITERATIONS):
        an = -i * (i - a)
        b += 2
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1 / d
        delta = d * c
        h *= delta
        if abs(delta - 1) < EPS:
            break
    else:
        raise ArithmeticError(f'Incomplete gamma fraction did not converge (a={a}, x={x})')
    return np.exp(-x + a * np.log(x) - gammaln(a)) * h


def igamc(a, x):
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x)."""
    if a <= 0:
        raise ValueError('non-positive a is not allowed')
    if x < 0:
        raise ValueError('negative x not allowed')
    if x < a + 1:
        return float(1 - _gamma_series(a, x))
    return float(_gamma_continued_fraction(a, x))


def igam(a, x):
    """Regularized lower incomplete gamma function P(a, x)."""
    return 1 - igamc(a, x)


def erfc_p(z):
    """Complementary error function, as used by the SP 800-22 p-values."""
    return float(erfc(z))
