"""Epoch key material for the two modes.

- QE-P (pure quantum): K_master = SHA-256 of 32 extracted bytes, Q_0..Q_14
  drawn from the extractor output (directly, or hashed per round when
  CONFIG["whitening"] is "hashed").
- QE-H (hybrid): HKDF-SHA-256 of 64 quantum and 64 classical bytes, split
  into K_master (32 bytes) and Delta_0..Delta_14 (240 bytes).

Both modes produce the same EpochKeyMaterial, so every consumer is
mode-agnostic.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..config import CONFIG
from ..constants import (
    BLOCK_BYTES, HYBRID_CLASSICAL_BYTES, HYBRID_QUANTUM_BYTES, KEY_BYTES,
    N_ROUND_KEYS, SEED_BYTES, TAG_MASTER, WHITENING_BYTES,
)
from ..entropy.conditioning import VonNeumannExtractor, condense, erase, hash_condition, mix_hybrid
from ..entropy.sources import OsClassicalSource
from ..format import check_choice, format_bytes, format_label
from .aes import expand_key

log = logging.getLogger(__name__)

MODES = 'QEP', 'QEH'
WHITENINGS = 'direct', 'hashed'


@dataclass(eq=False)
class EpochKeyMaterial:
    """Secret material of one epoch. Key bytes never appear in repr()."""
    mode: str
    epoch_id: int
    context: str
    master: np.ndarray = field(repr=False)
    whitening_block: np.ndarray = field(repr=False)
    created_at: int = 0
    raw_bits_consumed: int = 0    # provenance only, not persisted

    def __post_init__(self):
        check_choice([self.mode], MODES)
        self.master = np.array(format_bytes(self.master), dtype=np.uint8)
        self.whitening_block = np.array(format_bytes(self.whitening_block), dtype=np.uint8)
        if self.master.size != KEY_BYTES:
            raise ValueError(f'Master key must be {KEY_BYTES} bytes')
        if self.whitening_block.size != WHITENING_BYTES:
            raise ValueError(f'Whitening block must be {WHITENING_BYTES} bytes')

    @property
    def segments(self):
        """Whitening block as 15 segments of 16 bytes (Q_i or Delta_i)."""
        return self.whitening_block.reshape(N_ROUND_KEYS, BLOCK_BYTES)

    @property
    def erased(self):
        return not (self.master.any() or self.whitening_block.any())

    def same_secret(self, other):
        return (np.array_equal(self.master, other.master)
                and np.array_equal(self.whitening_block, other.whitening_block))

    def erase(self):
        erase(self.master)
        erase(self.whitening_block)


def _master_tag(context):
    return format_label(TAG_MASTER) + b'/' + format_label(context)


def _now(now):
    return int(time.time()) if now is None else int(now)


# ============================= User functions ===============================


def derive_qep(guarded, context, epoch_id=1, now=None, whitening=None):
    """Pure-quantum key material from a (guarded) source.

    Parameters
    ----------
    - guarded: SourceHandle, normally a GuardedSource
    - context: label bound into the master key (e.g. host identifier)
    - epoch_id, now: epoch number and creation time (unix seconds)
    - whitening: 'direct' or 'hashed' (default CONFIG["whitening"])

    Any failure erases the partial secrets before propagating.
    """
    whitening = CONFIG["whitening"] if whitening is None else whitening
    check_choice([whitening], WHITENINGS)

    extractor = VonNeumannExtractor(guarded)
    partial = []
    try:
        seed = extractor.conditioned(KEY_BYTES)
        partial.append(seed.bits)
        master = np.frombuffer(bytearray(condense(seed, _master_tag(context))), dtype=np.uint8)
        partial.append(master)
        if whitening == 'direct':
            block = extractor.read(WHITENING_BYTES)
        else:
            segments = []
            for i in range(N_ROUND_KEYS):
                chunk = extractor.read(KEY_BYTES)
                partial.append(chunk)
                segments.append(hash_condition(chunk, i))
            block = np.frombuffer(bytearray(b''.join(segments)), dtype=np.uint8)
        partial.append(block)
        material = EpochKeyMaterial(
            mode='QEP',
            epoch_id=epoch_id,
            context=context,
            master=master,
            whitening_block=block,
            created_at=_now(now),
            raw_bits_consumed=extractor.source_bits_consumed,
        )
    finally:
        for buffer in partial:
            erase(buffer)
        extractor.erase()

    log.info('Derived QE-P epoch %d (%d raw bits)', epoch_id, material.raw_bits_consumed)
    return material


def derive_qeh(guarded_q, classical, context, epoch_id=1, now=None):
    """Hybrid key material: HKDF over 64 quantum and 64 classical bytes.

    The quantum bytes are Von Neumann conditioned; the classical bytes are
    used as delivered by `classical` (e.g. an OsClassicalSource).
    """
    extractor = VonNeumannExtractor(guarded_q)
    partial = []
    try:
        e_q = extractor.read(HYBRID_QUANTUM_BYTES)
        partial.append(e_q)
        e_c = np.frombuffer(bytearray(classical.draw_bytes(HYBRID_CLASSICAL_BYTES)), dtype=np.uint8)
        partial.append(e_c)
        seed = mix_hybrid(e_q, e_c, context, SEED_BYTES)
        partial.extend((seed.e_quantum, seed.e_classical, seed.mixed))
        material = EpochKeyMaterial(
            mode='QEH',
            epoch_id=epoch_id,
            context=context,
            master=seed.mixed[:KEY_BYTES],
            whitening_block=seed.mixed[KEY_BYTES:],
            created_at=_now(now),
            raw_bits_consumed=extractor.source_bits_consumed,
        )
    finally:
        for buffer in partial:
            erase(buffer)
        extractor.erase()

    log.info('Derived QE-H epoch %d (%d raw quantum bits)', epoch_id, material.raw_bits_consumed)
    return material


def deriver(mode, guarded, context, classical=None, whitening=None):
    """Derivation procedure `derive(epoch_id, now)` used for rekeying.

    For QE-H without a classical source, the OS generator is opened.
    """
    check_choice([mode], MODES)
    if mode == 'QEP':
        def derive(epoch_id, now=None):
            return derive_qep(guarded, context, epoch_id=epoch_id, now=now, whitening=whitening)
    else:
        if classical is None:
            classical = OsClassicalSource('os')

        def derive(epoch_id, now=None):
            return derive_qeh(guarded, classical, context, epoch_id=epoch_id, now=now)
    return derive


def to_round_keys(material, source=None):
    """Round keys of an epoch: K'_i = K_i ^ segment i of the whitening block."""
    return expand_key(material.master, source=source).with_whitening(material.whitening_block)


def key_space_bits(material=None):
    """Secret bits per epoch and the matching brute-force exponents.

    Output
    ------
    dict with 'secret_bits' (256 + 15 x 128 = 2176), 'classical_exponent'
    (2176) and 'grover_exponent' (1088, square-root speedup)
    """
    if material is None:
        n_bits = 8 * (KEY_BYTES + WHITENING_BYTES)
    else:
        n_bits = 8 * (material.master.size + material.whitening_block.size)
    return {
        'secret_bits': n_bits,
        'classical_exponent': n_bits,
        'grover_exponent': n_bits // 2,
    }
