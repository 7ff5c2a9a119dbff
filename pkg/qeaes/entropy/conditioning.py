"""Conditioning of raw bits into uniform key material.

- von_neumann_extract(): pairwise debiasing (01 -> 0, 10 -> 1, 00/11 dropped)
- condense(): domain-separated SHA-256 down to 256 bits
- mix_hybrid(): HKDF-SHA-256 over quantum || classical entropy
- hash_condition(): per-round hashed whitening segment (alternative to the
  direct use of extractor output)
"""

import logging
import secrets
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..constants import BLOCK_BYTES, HKDF_MAX_BYTES, SEED_BYTES, TAG_MIX, TAG_WHITEN
from ..errors import EmptyInput, HealthFailure, InsufficientInput, OutputTooLong
from ..format import bits_to_bytes, check_choice, format_bits, format_bytes, format_label

log = logging.getLogger(__name__)

EXTRACTIONS = 'VonNeumann', 'None'


def erase(buffer):
    """Overwrite a writable uint8 buffer with OS random bytes, then zeros."""
    if buffer is None or not buffer.flags.writeable:
        return
    buffer[:] = np.frombuffer(secrets.token_bytes(buffer.size), dtype=np.uint8)
    buffer[:] = 0


def min_entropy_per_bit(bits):
    """-log2(max(p, 1 - p)) from the empirical ones-frequency p of bits."""
    if bits.size == 0:
        return 0.0
    p = np.count_nonzero(bits) / bits.size
    p_max = max(p, 1 - p)
    return float(-np.log2(p_max)) if p_max < 1 else 0.0


# ================================== Types ===================================


@dataclass
class ConditionedEntropy:
    """Debiased bits R (MSB-first), with provenance and a min-entropy estimate."""
    bits: np.ndarray
    source_bits_consumed: int
    extraction: str = 'VonNeumann'
    est_min_entropy_per_bit: float = 0.0

    def __post_init__(self):
        check_choice([self.extraction], EXTRACTIONS)
        if not 0 <= self.est_min_entropy_per_bit <= 1:
            raise ValueError('est_min_entropy_per_bit must be in [0, 1]')

    @classmethod
    def from_bytes(cls, data, extraction='None'):
        """Wrap already-conditioned octets (e.g. OS or provider output)."""
        bits = np.unpackbits(format_bytes(data), bitorder='big')
        return cls(
            bits=bits,
            source_bits_consumed=int(bits.size),
            extraction=extraction,
            est_min_entropy_per_bit=min_entropy_per_bit(bits),
        )

    @property
    def count(self):
        return int(self.bits.size)

    @property
    def bytes(self):
        """Octet string R; a trailing partial byte is zero-padded."""
        return bits_to_bytes(self.bits).tobytes()

    def erase(self):
        erase(self.bits)


@dataclass
class HybridSeed:
    """Quantum and classical inputs and their HKDF mix E_hybrid."""
    e_quantum: np.ndarray
    e_classical: np.ndarray
    mixed: np.ndarray

    def erase(self):
        for buffer in (self.e_quantum, self.e_classical, self.mixed):
            erase(buffer)


# ============================= User functions ===============================


def von_neumann_extract(raw):
    """Von Neumann extraction of a RawBitstream (or any bit sequence).

    Pairs (b_2j, b_2j+1) map 01 -> 0 and 10 -> 1; 00 and 11 are discarded,
    as is a trailing odd bit.

    Examples
    --------
    >>> von_neumann_extract([0, 1, 1, 0, 0, 0, 1, 1]).bits
    array([0, 1], dtype=uint8)
    """
    bits = format_bits(getattr(raw, 'bits', raw))
    n = bits.size
    if n < 2:
        raise InsufficientInput(f'Von Neumann extraction needs at least 2 bits, got {n}')
    pairs = bits[:n - n % 2].reshape(-1, 2)
    keep = pairs[:, 0] != pairs[:, 1]
    out = pairs[keep, 0].copy()
    return ConditionedEntropy(
        bits=out,
        source_bits_consumed=n,
        extraction='VonNeumann',
        est_min_entropy_per_bit=min_entropy_per_bit(out),
    )


def _sha256(*parts):
    digest = hashes.Hash(hashes.SHA256())
    for part in parts:
        digest.update(part)
    return digest.finalize()


def condense(entropy, domain_tag):
    """SHA-256(domain_tag || 0x00 || R), always 32 bytes.

    entropy is a ConditionedEntropy or bytes-like octet string R.
    """
    data = entropy.bytes if isinstance(entropy, ConditionedEntropy) else bytes(format_bytes(entropy))
    if len(data) == 0:
        raise EmptyInput('Cannot condense empty entropy')
    return _sha256(format_label(domain_tag), b'\x00', data)


def hash_condition(block, index, domain_tag=TAG_WHITEN):
    """Per-round whitening segment: SHA-256(tag || 0x00 || u8 index || block)[:16]."""
    data = bytes(format_bytes(block))
    if len(data) == 0:
        raise EmptyInput('Cannot hash-condition empty input')
    return _sha256(format_label(domain_tag), b'\x00', bytes([index]), data)[:BLOCK_BYTES]


def mix_hybrid(e_q, e_c, context, out_len=SEED_BYTES):
    """E_hybrid = HKDF-SHA-256(salt='QEAES-v1/mix', ikm=e_q || e_c, info=context).

    Parameters
    ----------
    - e_q, e_c: quantum and classical entropy (bytes-like, non-empty)
    - context: label bound into the output (e.g. a host identifier)
    - out_len: number of output bytes (default 32 + 240)
    """
    e_q = format_bytes(e_q)
    e_c = format_bytes(e_c)
    if e_q.size == 0 or e_c.size == 0:
        raise EmptyInput('Both quantum and classical entropy must be non-empty')
    if out_len > HKDF_MAX_BYTES:
        raise OutputTooLong(f'HKDF-SHA-256 output limited to {HKDF_MAX_BYTES} bytes')
    if out_len <= 0:
        raise ValueError('out_len must be positive')

    hkdf = HKDF(
        algorithm=hashes.SHA256(),
        length=out_len,
        salt=format_label(TAG_MIX),
        info=format_label(context),
    )
    ikm = bytearray(e_q.tobytes() + e_c.tobytes())
    mixed = np.frombuffer(bytearray(hkdf.derive(bytes(ikm))), dtype=np.uint8)
    ikm[:] = bytes(len(ikm))
    return HybridSeed(e_quantum=e_q.copy(), e_classical=e_c.copy(), mixed=mixed)


class VonNeumannExtractor:
    """Continuous Von Neumann extraction from a source handle.

    Draws raw bits in chunks of `chunk_bits`, extracts, and buffers the
    conditioned bits so that arbitrary numbers of bytes can be read.
    """

    max_empty_chunks = 64

    def __init__(self, source, chunk_bits=1024):
        self.source = source
        self.chunk_bits = chunk_bits
        self.source_bits_consumed = 0
        self._buffer = np.zeros(0, dtype=np.uint8)

    def read_bits(self, n):
        chunks = [self._buffer]
        available = self._buffer.size
        empty = 0
        while available < n:
            raw = self.source.draw_bits(self.chunk_bits)
            self.source_bits_consumed += raw.count
            out = von_neumann_extract(raw).bits
            empty = empty + 1 if out.size == 0 else 0
            if empty >= self.max_empty_chunks:
                raise HealthFailure(f'Extractor starved: {self.source.label} looks stuck')
            chunks.append(out)
            available += out.size
        bits = np.concatenate(chunks)
        result, self._buffer = bits[:n].copy(), bits[n:].copy()
        erase(bits)
        return result

    def read(self, nbytes):
        """Return nbytes conditioned octets as a writable uint8 array."""
        bits = self.read_bits(8 * nbytes)
        out = np.packbits(bits, bitorder='big')
        erase(bits)
        return out

    def conditioned(self, nbytes):
        """Same as read(), wrapped as ConditionedEntropy."""
        consumed = self.source_bits_consumed
        bits = self.read_bits(8 * nbytes)
        return ConditionedEntropy(
            bits=bits,
            source_bits_consumed=self.source_bits_consumed - consumed,
            extraction='VonNeumann',
            est_min_entropy_per_bit=min_entropy_per_bit(bits),
        )

    def erase(self):
        erase(self._buffer)
        self._buffer = np.zeros(0, dtype=np.uint8)
