"""Module with constants used throughout qeaes.

Note: values that are part of a bit-exact format are marked [format].

CONTENTS
--------
Sizes:
    - BLOCK_BYTES, KEY_BYTES, N_ROUNDS, N_ROUND_KEYS, WHITENING_BYTES,
      SEED_BYTES (master + whitening block)
Domain tags [format]:
    - TAG_MASTER, TAG_WHITEN, TAG_MIX, TAG_MAC, TAG_NONCE
Health defaults:
    - BATCH_BITS, ALPHA, MAX_RUN (and their admissible limits)
Statistics:
    - NIST_ALPHA, BLOCK_FREQUENCY_M, NIST_SAMPLE_BITS, MONTE_CARLO_* geometry
File formats [format]:
    - KEYSTORE_MAGIC, KEYSTORE_VERSION, CONTAINER_MAGIC, CONTAINER_VERSION,
      MODE_CODES, STATUS_CODES, NONCE_BYTES, TAG_BYTES, MAX_COUNTER,
      USAGE_MAGIC, USAGE_VERSION, USAGE_SUFFIX

SOURCES
-------
FIPS 197, Advanced Encryption Standard (AES), NIST (2001, upd. 2023).
SP 800-22 Rev. 1a, A Statistical Test Suite for Random and Pseudorandom
Number Generators for Cryptographic Applications, NIST (2010).
RFC 5869, HMAC-based Extract-and-Expand Key Derivation Function (2010).
ENT, A Pseudorandom Number Sequence Test Program, J. Walker (Fourmilab).
"""

# ================================== SIZES ===================================

BLOCK_BYTES = 16                 # AES block (and round key) size
KEY_BYTES = 32                   # AES-256 master key
N_ROUNDS = 14                    # AES-256
N_ROUND_KEYS = N_ROUNDS + 1      # K_0 .. K_14
WHITENING_BYTES = N_ROUND_KEYS * BLOCK_BYTES    # 240, Q_0 .. Q_14
SEED_BYTES = KEY_BYTES + WHITENING_BYTES        # 272

HYBRID_QUANTUM_BYTES = 64        # e_q drawn for QE-H
HYBRID_CLASSICAL_BYTES = 64      # e_c drawn for QE-H

# ============================== DOMAIN TAGS =================================

TAG_MASTER = 'QEAES-v1/master'
TAG_WHITEN = 'QEAES-v1/whiten'
TAG_MIX = 'QEAES-v1/mix'
TAG_MAC = 'QEAES-v1/mac'
TAG_NONCE = 'QEAES-v1/nonce'

HKDF_MAX_BYTES = 255 * 32

# ============================ HEALTH DEFAULTS ===============================

BATCH_BITS = 65_536
BATCH_BITS_MIN = 1024
ALPHA = 1e-6
ALPHA_MAX = 0.01
MAX_RUN = 64
MAX_RUN_MIN = 8

MIN_ENTROPY_BITS = 10_000        # minimum sample for estimate_min_entropy

# ============================== STATISTICS ==================================

NIST_ALPHA = 0.01
NIST_SAMPLE_BITS = 1_000_000
BLOCK_FREQUENCY_M = 128

MONTE_CARLO_POINT_BYTES = 6      # one (x, y) point
MONTE_CARLO_COORD_BYTES = 3      # 24-bit big-endian coordinates
MONTE_CARLO_RADIUS = 2**24 - 1

ENT_MIN_BYTES = MONTE_CARLO_POINT_BYTES

# ============================= FILE FORMATS =================================

KEYSTORE_MAGIC = b'QEKS'
KEYSTORE_VERSION = 1

# usage counters of the active epoch, next to the keystore
USAGE_MAGIC = b'QEKU'
USAGE_VERSION = 1
USAGE_SUFFIX = '.usage'

CONTAINER_MAGIC = b'QEA1'
CONTAINER_VERSION = 1
NONCE_BYTES = 12
TAG_BYTES = 32
MAX_COUNTER = 2**32 - 1          # counter starts at 1 -> 64 GiB per message

MODE_CODES = {'QEP': 1, 'QEH': 2}
STATUS_CODES = {'Active': 0, 'Retired': 1, 'Erased': 2}
