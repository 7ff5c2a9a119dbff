"""Quantum-enabled AES-256: entropy, whitened key schedules and rekeying

Copyright Olivier Vincent (2020-2024)
(ovinc.py@gmail.com)

This software is a computer program whose purpose is to derive AES-256 key
material from (simulated or hardware) quantum entropy, inject fresh
entropy into every round key, manage key epochs and validate the
randomness of the sources.

This software is governed by the CeCILL license under French law and
abiding by the rules of distribution of free software. You can  use,
modify and/ or redistribute the software under the terms of the CeCILL
license as circulated by CEA, CNRS and INRIA at the following URL
"http://www.cecill.info".

The fact that you are presently reading this means that you have had
knowledge of the CeCILL license and that you accept its terms.
"""

from .config import CONFIG

# Shortcuts ------------------------------------------------------------------

from .properties import nist_test, sub_bytes

from .entropy import SourceDescriptor, open_source, register_provider
from .entropy import HealthPolicy, guard_stream, check_batch
from .entropy import von_neumann_extract, condense, mix_hybrid

from .stats import ent_metrics, nist_subset, chi_square_p

from .cipher import expand_key, encrypt_block, decrypt_block
from .cipher import derive_qep, derive_qeh, to_round_keys
from .cipher import Keystore, RekeyPolicy, advance_if_due, secure_erase, lookup_epoch
from .cipher import encrypt_message, decrypt_message

# ----------------------------------------------------------------------------

from importlib_metadata import PackageNotFoundError, version

__author__ = 'Olivier Vincent'
__license__ = 'CeCILL-2.1'

try:
    __version__ = version('qeaes')
except PackageNotFoundError:
    __version__ = '0.0.0'
