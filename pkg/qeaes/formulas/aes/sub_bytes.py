"""SubBytes transformation of AES, two interchangeable implementations.

Sources
-------

--- 'table' [default]:
    FIPS 197, Figure 7 (S-box) and Figure 14 (inverse S-box), applied by
    array indexing. Fast, but the memory access pattern depends on the data.

--- 'algebraic':
    FIPS 197, section 5.1.1: multiplicative inverse in GF(2^8) (computed as
    x^254 by square-and-multiply with branch-free carry-less multiplication)
    followed by the affine transformation. No secret-dependent indexing;
    roughly an order of magnitude slower. Python/numpy gives no timing
    guarantee, so this path reduces leakage without claiming constant time.
"""

import numpy as np

from ..general import PrimitiveFormula
from .tables import SBOX, INV_SBOX


def xtime(a):
    """Multiplication by x (i.e. 0x02) in GF(2^8), branch-free."""
    return (a << np.uint8(1)) ^ ((a >> np.uint8(7)) * np.uint8(0x1b))


def gf_mul(a, b):
    """Product in GF(2^8) of uint8 arrays (or scalars) a and b."""
    a = np.asarray(a, dtype=np.uint8).copy()
    b = np.asarray(b, dtype=np.uint8).copy()
    p = np.zeros(np.broadcast(a, b).shape, dtype=np.uint8)
    for _ in range(8):
        p ^= a * (b & np.uint8(1))
        a = xtime(a)
        b >>= np.uint8(1)
    return p


def gf_inv(a):
    """Multiplicative inverse a^254 in GF(2^8) (0 maps to 0)."""
    a2 = gf_mul(a, a)
    a3 = gf_mul(a2, a)           # a^3
    a6 = gf_mul(a3, a3)
    a12 = gf_mul(a6, a6)
    a15 = gf_mul(a12, a3)        # a^15
    a30 = gf_mul(a15, a15)
    a60 = gf_mul(a30, a30)
    a120 = gf_mul(a60, a60)
    a240 = gf_mul(a120, a120)
    a252 = gf_mul(a240, a12)
    return gf_mul(a252, a2)      # a^254


def _rotl(a, n):
    return (a << np.uint8(n)) | (a >> np.uint8(8 - n))


class SubBytes_Table(PrimitiveFormula):
    """S-box lookup."""

    source = 'table'
    default = True

    def calculate(self, state, inverse=False):
        box = INV_SBOX if inverse else SBOX
        return box[state]


class SubBytes_Algebraic(PrimitiveFormula):
    """GF(2^8) inversion and affine map, without lookup tables."""

    source = 'algebraic'

    def calculate(self, state, inverse=False):
        state = np.asarray(state, dtype=np.uint8)
        if inverse:
            x = _rotl(state, 1) ^ _rotl(state, 3) ^ _rotl(state, 6) ^ np.uint8(0x05)
            return gf_inv(x)
        b = gf_inv(state)
        return b ^ _rotl(b, 1) ^ _rotl(b, 2) ^ _rotl(b, 3) ^ _rotl(b, 4) ^ np.uint8(0x63)


SubBytesFormulas = (
    SubBytes_Table,
    SubBytes_Algebraic,
)
