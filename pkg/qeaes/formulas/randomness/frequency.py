"""Frequency (monobit) and block frequency tests.

Sources
-------

--- 'Frequency':
    A. Rukhin et al.
    "A Statistical Test Suite for Random and Pseudorandom Number Generators
    for Cryptographic Applications"
    NIST Special Publication 800-22 Rev. 1a
    (2010)
*Note*: Section 2.1; s_obs = |S_n| / sqrt(n), p = erfc(s_obs / sqrt(2)).
        Worked example of section 2.1.8 (100 bits) gives p = 0.109599.

--- 'BlockFrequency':
    Same reference, section 2.2; block length M = 128 as recommended for
    n >= 10^6 (M >= 20, M > 0.01 n, N < 100).
"""

import numpy as np

from ...constants import BLOCK_FREQUENCY_M
from ..general import RandomnessFormula
from ..special import erfc_p, igamc


class Frequency_Nist(RandomnessFormula):
    """Proportion of ones and zeros over the whole sequence."""

    source = 'Frequency'
    length_range = (100, np.inf)
    default = True

    def statistic(self, bits):
        s_n = 2 * int(np.count_nonzero(bits)) - bits.size
        return abs(s_n) / np.sqrt(bits.size)

    def calculate(self, bits):
        return erfc_p(self.statistic(bits) / np.sqrt(2))


class BlockFrequency_Nist(RandomnessFormula):
    """Proportion of ones within M-bit blocks (chi-square over blocks)."""

    source = 'BlockFrequency'
    length_range = (100 * BLOCK_FREQUENCY_M, np.inf)
    block_length = BLOCK_FREQUENCY_M

    def statistic(self, bits):
        m = self.block_length
        n_blocks = bits.size // m
        blocks = bits[:n_blocks * m].reshape(n_blocks, m)
        pi = blocks.sum(axis=1, dtype=np.int64) / m
        return 4 * m * float(np.sum((pi - 0.5)**2))

    def calculate(self, bits):
        n_blocks = bits.size // self.block_length
        if n_blocks == 0:
            raise ValueError(f'BlockFrequency needs at least {self.block_length} bits')
        return igamc(n_blocks / 2, self.statistic(bits) / 2)


FrequencyFormulas = (
    Frequency_Nist,
    BlockFrequency_Nist,
)
