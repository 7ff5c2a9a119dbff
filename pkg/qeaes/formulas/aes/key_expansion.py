"""AES-256 key expansion (FIPS 197, section 5.2; Nk = 8, Nr = 14)."""

import numpy as np

from ...constants import KEY_BYTES, N_ROUND_KEYS, BLOCK_BYTES
from .tables import RCON

NK = 8
N_WORDS = 4 * N_ROUND_KEYS   # 60


def expand_key_256(key, sub_word):
    """Return the 15 round keys of a 32-byte key as a (15, 16) uint8 array.

    Parameters
    ----------
    - key: uint8 array of 32 bytes
    - sub_word: callable applying the S-box to a uint8 array

    Round key i is made of words w[4i] .. w[4i + 3], so round keys 0 and 1
    are the two halves of the key itself.
    """
    if key.size != KEY_BYTES:
        raise ValueError(f'AES-256 key must be {KEY_BYTES} bytes, not {key.size}')

    w = np.zeros((N_WORDS, 4), dtype=np.uint8)
    w[:NK] = key.reshape(NK, 4)

    for i in range(NK, N_WORDS):
        temp = w[i - 1].copy()
        if i % NK == 0:
            temp = sub_word(np.roll(temp, -1))
            temp[0] ^= RCON[i // NK]
        elif i % NK == 4:
            temp = sub_word(temp)
        w[i] = w[i - NK] ^ temp

    round_keys = w.reshape(N_ROUND_KEYS, BLOCK_BYTES)
    w_copy = round_keys.copy()
    w[:] = 0
    return w_copy
