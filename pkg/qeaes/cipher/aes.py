"""AES-256 with an exposed, whitenable key schedule.

Each round key K_i can be XORed with a 128-bit whitening segment Q_i
(K'_i = K_i ^ Q_i, i = 0..14, round 0 and the final round included).
SubBytes, ShiftRows and MixColumns are untouched, so that with all-zero
whitening the cipher is exactly AES-256 (FIPS 197).

Block functions are vectorized: they take any number of blocks, either as
bytes-like of length 16 n (returning bytes) or as (n, 16) uint8 arrays
(returning arrays), bytes in FIPS input order.
"""

from dataclasses import dataclass

import numpy as np

from ..constants import BLOCK_BYTES, KEY_BYTES, N_ROUNDS, N_ROUND_KEYS, WHITENING_BYTES
from ..entropy.conditioning import erase
from ..format import format_bytes
from ..formulas.aes.key_expansion import expand_key_256
from ..formulas.aes.rounds import inv_mix_columns, inv_shift_rows, mix_columns, shift_rows
from ..properties import sub_bytes


# ================================== Types ===================================


class BlockKey256:
    """32-byte secret key, held in a private writable buffer."""

    def __init__(self, key):
        key = format_bytes(key)
        if key.size != KEY_BYTES:
            raise ValueError(f'AES-256 key must be {KEY_BYTES} bytes, not {key.size}')
        self._key = key.copy()

    def __repr__(self):
        return 'BlockKey256(<secret>)'

    @property
    def array(self):
        return self._key

    @property
    def erased(self):
        return not self._key.any()

    def erase(self):
        erase(self._key)


def _frozen(array):
    array = np.array(array, dtype=np.uint8).reshape(N_ROUND_KEYS, BLOCK_BYTES)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, repr=False)
class RoundKeySet:
    """Standard round keys K_i, whitening Q_i and whitened keys K'_i (15 x 16 bytes)."""
    standard: np.ndarray
    whitening: np.ndarray
    whitened: np.ndarray

    def __repr__(self):
        return f'RoundKeySet(whitened={self.is_whitened})'

    @classmethod
    def build(cls, standard, whitening=None):
        standard = _frozen(standard)
        if whitening is None:
            whitening = np.zeros_like(standard)
        whitening = format_bytes(whitening)
        if whitening.size != WHITENING_BYTES:
            raise ValueError(f'Whitening must be {WHITENING_BYTES} bytes, not {whitening.size}')
        whitening = _frozen(whitening)
        return cls(standard=standard, whitening=whitening, whitened=_frozen(standard ^ whitening))

    def with_whitening(self, whitening):
        return RoundKeySet.build(self.standard, whitening)

    @property
    def is_whitened(self):
        return bool(self.whitening.any())


# ============================= User functions ===============================


def expand_key(key, source=None):
    """FIPS 197 AES-256 key expansion, whitening all-zero.

    Parameters
    ----------
    - key: BlockKey256 or 32 bytes-like
    - source: SubBytes implementation ('table' or 'algebraic'), see sub_bytes
    """
    key = key.array if isinstance(key, BlockKey256) else format_bytes(key)
    standard = expand_key_256(key, sub_word=lambda word: sub_bytes(word, source=source))
    return RoundKeySet.build(standard)


def _as_blocks(state):
    blocks = format_bytes(state) if not isinstance(state, np.ndarray) else state.astype(np.uint8, copy=False)
    if blocks.ndim == 2 and blocks.shape[1] == BLOCK_BYTES:
        return blocks
    blocks = blocks.reshape(-1)
    if blocks.size == 0 or blocks.size % BLOCK_BYTES:
        raise ValueError(f'State must be a non-empty multiple of {BLOCK_BYTES} bytes')
    return blocks.reshape(-1, BLOCK_BYTES)


def _same_kind(out, state):
    return out if isinstance(state, np.ndarray) else out.tobytes()


def encrypt_block(state, keys, source=None):
    """Encrypt block(s) with the whitened round keys of keys (a RoundKeySet).

    Examples
    --------
    >>> keys = expand_key(bytes(range(32)))
    >>> encrypt_block(bytes.fromhex('00112233445566778899aabbccddeeff'), keys).hex()
    '8ea2b7ca516745bfeafc49904b496089'
    """
    rk = keys.whitened
    s = _as_blocks(state) ^ rk[0]
    for r in range(1, N_ROUNDS):
        s = mix_columns(shift_rows(sub_bytes(s, source=source))) ^ rk[r]
    s = shift_rows(sub_bytes(s, source=source)) ^ rk[N_ROUNDS]
    return _same_kind(s, state)


def decrypt_block(state, keys, source=None):
    """Inverse of encrypt_block for the same RoundKeySet."""
    rk = keys.whitened
    s = _as_blocks(state) ^ rk[N_ROUNDS]
    for r in range(N_ROUNDS - 1, 0, -1):
        s = sub_bytes(inv_shift_rows(s), inverse=True, source=source) ^ rk[r]
        s = inv_mix_columns(s)
    s = sub_bytes(inv_shift_rows(s), inverse=True, source=source) ^ rk[0]
    return _same_kind(s, state)
