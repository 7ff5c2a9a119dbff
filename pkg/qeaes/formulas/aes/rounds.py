"""ShiftRows and MixColumns of AES (FIPS 197, sections 5.1.2-5.1.3, 5.3.1-5.3.3).

All functions act on arrays of shape (n_blocks, 16), bytes in FIPS input
order (byte index = row + 4 * column), so that many blocks are processed at
once.
"""

import numpy as np

from .sub_bytes import xtime
from .tables import SHIFT_ROWS, INV_SHIFT_ROWS


def shift_rows(state):
    return state[:, SHIFT_ROWS]


def inv_shift_rows(state):
    return state[:, INV_SHIFT_ROWS]


def mix_columns(state):
    s = state.reshape(-1, 4, 4)   # (block, column, row)
    a0, a1, a2, a3 = s[:, :, 0], s[:, :, 1], s[:, :, 2], s[:, :, 3]
    total = a0 ^ a1 ^ a2 ^ a3
    out = np.empty_like(s)
    # b_r = a_r ^ total ^ xtime(a_r ^ a_{r+1})
    out[:, :, 0] = a0 ^ total ^ xtime(a0 ^ a1)
    out[:, :, 1] = a1 ^ total ^ xtime(a1 ^ a2)
    out[:, :, 2] = a2 ^ total ^ xtime(a2 ^ a3)
    out[:, :, 3] = a3 ^ total ^ xtime(a3 ^ a0)
    return out.reshape(-1, 16)


def inv_mix_columns(state):
    s = state.reshape(-1, 4, 4)
    a0, a1, a2, a3 = s[:, :, 0], s[:, :, 1], s[:, :, 2], s[:, :, 3]
    # {0e,0b,0d,09} = {02,03,01,01} x {05,00,04,00}: precondition, then MixColumns
    u = xtime(xtime(a0 ^ a2))
    v = xtime(xtime(a1 ^ a3))
    pre = np.empty_like(s)
    pre[:, :, 0] = a0 ^ u
    pre[:, :, 1] = a1 ^ v
    pre[:, :, 2] = a2 ^ u
    pre[:, :, 3] = a3 ^ v
    return mix_columns(pre.reshape(-1, 16))
