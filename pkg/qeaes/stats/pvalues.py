"""p-values and acceptance bands of the randomness statistics."""

import numpy as np
from scipy.stats import kstest

from ..formulas.special import igamc


def chi_square_p(chi2, dof):
    """Upper-tail probability of a chi-square statistic, Q(dof/2, chi2/2).

    Examples
    --------
    >>> chi_square_p(326.75, 255)
    0.0016...
    >>> chi_square_p(0, 255)
    1.0
    """
    if chi2 < 0:
        raise ValueError('chi2 must be >= 0')
    if dof < 1:
        raise ValueError('dof must be >= 1')
    return igamc(dof / 2, chi2 / 2)


def ks_uniformity(p_values):
    """Kolmogorov-Smirnov test of p-values against the uniform law on [0, 1].

    Output
    ------
    (statistic, p-value) of the KS test
    """
    p_values = np.asarray(p_values, dtype=float)
    if p_values.size == 0:
        raise ValueError('No p-values to test')
    result = kstest(p_values, 'uniform')
    return float(result.statistic), float(result.pvalue)


def proportion_band(alpha, n_samples):
    """Lowest acceptable pass rate for n_samples tests at significance alpha.

    Three-sigma lower bound of the binomial proportion, (1 - alpha) -
    3 sqrt(alpha (1 - alpha) / n), as in SP 800-22 section 4.2.1.
    """
    if n_samples < 1:
        raise ValueError('n_samples must be >= 1')
    p_hat = 1 - alpha
    return p_hat - 3 * np.sqrt(p_hat * alpha / n_samples)
