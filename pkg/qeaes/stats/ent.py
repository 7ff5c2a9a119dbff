"""ENT-style randomness metrics of an octet string.

Sources
-------
J. Walker, "ENT: A Pseudorandom Number Sequence Test Program", Fourmilab.
Monte Carlo points are disjoint 6-byte groups, each coordinate a 24-bit
big-endian integer; a point is inside the circle iff x^2 + y^2 <= (2^24 - 1)^2.
Serial correlation is the lag-1 Pearson coefficient over bytes, the last
byte being paired with the first.
"""

from dataclasses import asdict, dataclass

import numpy as np

from ..constants import (
    ENT_MIN_BYTES, MONTE_CARLO_COORD_BYTES, MONTE_CARLO_POINT_BYTES, MONTE_CARLO_RADIUS,
)
from ..errors import InputTooShort
from ..format import format_bytes
from .pvalues import chi_square_p

N_BINS = 256


@dataclass
class EntReport:
    bits_per_byte: float
    chi_square: float
    chi_square_p: float
    monte_carlo_pi: float
    pi_error_pct: float
    serial_correlation: float   # None if undefined (zero variance)
    entropy_bits: float
    mean_byte: float
    n_bytes: int

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        if self.serial_correlation is None:
            scc = 'undefined (all values equal)'
        else:
            scc = f'{self.serial_correlation:.6f}'
        return '\n'.join([
            f'Entropy = {self.bits_per_byte:.6f} bits per byte ({self.n_bytes} bytes).',
            f'Chi square distribution for {self.n_bytes} samples is {self.chi_square:.2f}, '
            f'and randomly would exceed this value {100 * self.chi_square_p:.2f} percent of the times.',
            f'Arithmetic mean value of data bytes is {self.mean_byte:.4f} (127.5 = random).',
            f'Monte Carlo value for Pi is {self.monte_carlo_pi:.9f} '
            f'(error {self.pi_error_pct:.4f} percent).',
            f'Serial correlation coefficient is {scc} (totally uncorrelated = 0.0).',
        ])


def _shannon(counts):
    n = counts.sum()
    p = counts[counts > 0] / n
    return float(-np.sum(p * np.log2(p)))


def _monte_carlo_pi(data):
    n_points = data.size // MONTE_CARLO_POINT_BYTES
    points = data[:n_points * MONTE_CARLO_POINT_BYTES].reshape(n_points, 2, MONTE_CARLO_COORD_BYTES)
    weights = np.array([1 << 16, 1 << 8, 1], dtype=np.int64)
    xy = points.astype(np.int64) @ weights       # (n_points, 2)
    inside = np.count_nonzero((xy**2).sum(axis=1) <= MONTE_CARLO_RADIUS**2)
    return 4 * inside / n_points


def _serial_correlation(data):
    u = data.astype(np.float64)
    u -= u.mean()
    var = np.dot(u, u)
    if var == 0:
        return None
    return float(np.dot(u, np.roll(u, -1)) / var)


def ent_metrics(data):
    """Compute the ENT metrics of data (bytes-like, at least 6 bytes).

    Output
    ------
    EntReport; bits_per_byte is the Shannon entropy of the byte histogram,
    chi_square is computed over 256 bins (255 degrees of freedom).

    Examples
    --------
    >>> ent_metrics(bytes(range(256)) * 4096).chi_square
    0.0
    """
    data = format_bytes(data)
    n = data.size
    if n < ENT_MIN_BYTES:
        raise InputTooShort(f'ENT metrics need at least {ENT_MIN_BYTES} bytes, got {n}')

    counts = np.bincount(data, minlength=N_BINS)
    expected = n / N_BINS
    chi2 = float(np.sum((counts - expected)**2) / expected)
    bits_per_byte = _shannon(counts)
    pi_hat = _monte_carlo_pi(data)

    return EntReport(
        bits_per_byte=bits_per_byte,
        chi_square=chi2,
        chi_square_p=chi_square_p(chi2, N_BINS - 1),
        monte_carlo_pi=pi_hat,
        pi_error_pct=100 * abs(pi_hat - np.pi) / np.pi,
        serial_correlation=_serial_correlation(data),
        entropy_bits=bits_per_byte * n,
        mean_byte=float(data.mean(dtype=np.float64)),
        n_bytes=int(n),
    )
