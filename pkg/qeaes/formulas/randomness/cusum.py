"""Cumulative sums test, forward and backward modes.

Sources
-------

--- 'CumulativeSumsForward', 'CumulativeSumsBackward':
    NIST Special Publication 800-22 Rev. 1a (2010), section 2.13.
*Note*: worked example of section 2.13.8 (100 bits) gives p = 0.219194
        (forward) and p = 0.114866 (backward).
"""

import numpy as np
from scipy.stats import norm

from ..general import RandomnessFormula


class CumulativeSums(RandomnessFormula):
    """Maximal excursion of the random walk of +/-1 steps."""

    length_range = (100, np.inf)
    reverse = False

    def statistic(self, bits):
        steps = 2 * bits.astype(np.int64) - 1
        if self.reverse:
            steps = steps[::-1]
        return int(np.max(np.abs(np.cumsum(steps))))

    def calculate(self, bits):
        n = bits.size
        z = self.statistic(bits)
        sqrt_n = np.sqrt(n)

        # summation bounds truncate toward zero (C integer conversion)
        k1 = np.arange(int((-n / z + 1) / 4), int((n / z - 1) / 4) + 1)
        k2 = np.arange(int((-n / z - 3) / 4), int((n / z - 1) / 4) + 1)

        sum1 = np.sum(norm.cdf((4 * k1 + 1) * z / sqrt_n) - norm.cdf((4 * k1 - 1) * z / sqrt_n))
        sum2 = np.sum(norm.cdf((4 * k2 + 3) * z / sqrt_n) - norm.cdf((4 * k2 + 1) * z / sqrt_n))

        p = 1 - sum1 + sum2
        return float(np.clip(p, 0, 1))


class CumulativeSums_Forward(CumulativeSums):
    source = 'CumulativeSumsForward'
    reverse = False


class CumulativeSums_Backward(CumulativeSums):
    source = 'CumulativeSumsBackward'
    reverse = True


CusumFormulas = (
    CumulativeSums_Forward,
    CumulativeSums_Backward,
)
