"""Multi-sample evaluation with a subset of the NIST SP 800-22 tests.

Each sample (>= 10^6 bits) goes through Frequency, BlockFrequency, Runs and
both Cumulative Sums tests; a sample passes a test iff p >= 0.01. The batch
is then judged on the pass rate (proportion_band) and on the uniformity of
the p-values (ks_uniformity).
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..constants import NIST_ALPHA, NIST_SAMPLE_BITS
from ..errors import SampleTooShort
from ..format import bytes_to_bits, format_bits
from ..properties import nist_test
from .pvalues import ks_uniformity, proportion_band

log = logging.getLogger(__name__)

NIST_TESTS = (
    'Frequency',
    'BlockFrequency',
    'Runs',
    'CumulativeSumsForward',
    'CumulativeSumsBackward',
)


@dataclass
class NistBatchReport:
    """p-values per test, as lists of (sample_id, p_value)."""
    p_values: dict = field(default_factory=dict)
    alpha: float = NIST_ALPHA

    @property
    def tests(self):
        return tuple(self.p_values)

    @property
    def n_samples(self):
        return max((len(v) for v in self.p_values.values()), default=0)

    @property
    def pass_rate(self):
        """Fraction of samples with p >= alpha, per test."""
        rates = {}
        for test, results in self.p_values.items():
            ps = np.array([p for _, p in results])
            rates[test] = float(np.mean(ps >= self.alpha)) if ps.size else 0.0
        return rates

    def min_pass_rate(self):
        """None when there are no samples."""
        if self.n_samples == 0:
            return None
        return proportion_band(self.alpha, self.n_samples)

    def uniformity(self):
        """KS (statistic, p-value) of the p-values of each test with results."""
        return {test: ks_uniformity([p for _, p in results])
                for test, results in self.p_values.items() if results}

    @property
    def passed(self):
        band = self.min_pass_rate()
        if band is None:
            return False
        return all(rate >= band for rate in self.pass_rate.values())

    def to_dict(self):
        return {
            'alpha': self.alpha,
            'n_samples': self.n_samples,
            'min_pass_rate': self.min_pass_rate(),
            'pass_rate': self.pass_rate,
            'p_values': {test: [p for _, p in results] for test, results in self.p_values.items()},
        }

    def to_text(self):
        band = self.min_pass_rate()
        band = 'n/a' if band is None else f'{band:.4f}'
        lines = [f'{"test":<24}{"pass rate":>10}   (minimum {band}, '
                 f'{self.n_samples} samples, alpha {self.alpha})']
        for test, rate in self.pass_rate.items():
            lines.append(f'{test:<24}{rate:>10.4f}')
        return '\n'.join(lines)


def _as_bits(sample):
    if isinstance(sample, (bytes, bytearray, memoryview)):
        return bytes_to_bits(sample)
    return format_bits(getattr(sample, 'bits', sample))


def _evaluate(sample_id, bits, tests):
    return sample_id, {test: nist_test(bits, source=test) for test in tests}


def nist_subset(samples, tests=NIST_TESTS, alpha=NIST_ALPHA, workers=1, min_bits=NIST_SAMPLE_BITS):
    """Run the NIST subset on a list of samples.

    Parameters
    ----------
    - samples: iterable of bit sequences (arrays of 0/1, RawBitstream,
      ConditionedEntropy) or bytes-like objects (unpacked MSB first)
    - tests: names of the tests to run (see nist_test.sources)
    - alpha: significance level of each test (default 0.01)
    - workers: number of threads evaluating samples in parallel
    - min_bits: minimum sample length

    Output
    ------
    NistBatchReport
    """
    samples = [_as_bits(sample) for sample in samples]
    for i, bits in enumerate(samples):
        if bits.size < min_bits:
            raise SampleTooShort(f'Sample {i} has {bits.size} bits, at least {min_bits} needed')
    for test in tests:
        nist_test.get_source(test)

    log.info('NIST subset on %d samples, tests %s', len(samples), ', '.join(tests))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, range(len(samples)), samples,
                                    [tests] * len(samples)))
    else:
        results = [_evaluate(i, bits, tests) for i, bits in enumerate(samples)]

    report = NistBatchReport(p_values={test: [] for test in tests}, alpha=alpha)
    for sample_id, ps in sorted(results, key=lambda result: result[0]):
        for test, p in ps.items():
            report.p_values[test].append((sample_id, p))
    return report
