"""Runs test, and longest repetition of an identical bit.

Sources
-------

--- 'Runs':
    NIST Special Publication 800-22 Rev. 1a (2010), section 2.3.
*Note*: the frequency prerequisite |pi - 1/2| >= 2 / sqrt(n) returns p = 0
        without computing the statistic. Worked example of section 2.3.8
        (100 bits) gives p = 0.500798.

--- longest_repeat():
    Repetition count in the spirit of NIST SP 800-90B, section 4.4.1
    (longest sequence of identical consecutive samples), used by the online
    health checks to catch stuck-at sources within one batch.
"""

import numpy as np

from ..general import RandomnessFormula
from ..special import erfc_p


class Runs_Nist(RandomnessFormula):
    """Total number of runs (uninterrupted sequences of identical bits)."""

    source = 'Runs'
    length_range = (100, np.inf)

    def statistic(self, bits):
        """Observed number of runs V_n."""
        if bits.size == 0:
            return 0
        return 1 + int(np.count_nonzero(np.diff(bits)))

    def calculate(self, bits):
        n = bits.size
        pi = np.count_nonzero(bits) / n
        if abs(pi - 0.5) >= 2 / np.sqrt(n):
            return 0.0
        v_obs = self.statistic(bits)
        num = abs(v_obs - 2 * n * pi * (1 - pi))
        den = 2 * np.sqrt(2 * n) * pi * (1 - pi)
        return erfc_p(num / den)


def longest_repeat(bits):
    """Length of the longest run of identical consecutive bits."""
    if bits.size == 0:
        return 0
    edges = np.flatnonzero(np.diff(bits)) + 1
    bounds = np.concatenate(([0], edges, [bits.size]))
    return int(np.max(np.diff(bounds)))


RunsFormulas = (
    Runs_Nist,
)
