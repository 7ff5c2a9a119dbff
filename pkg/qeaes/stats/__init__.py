"""Offline randomness evaluation: ENT metrics and a NIST SP 800-22 subset."""

from .pvalues import chi_square_p, ks_uniformity, proportion_band
from .ent import EntReport, ent_metrics
from .nist import NistBatchReport, nist_subset, NIST_TESTS
