"""Ciphertext container: counter mode over the whitened cipher, then HMAC.

Layout (big-endian), 34-byte header:
    magic 'QEA1' | version u8 | mode u8 (1 QE-P, 2 QE-H) | epoch_id u64 |
    nonce (12) | payload_len u64 | payload | tag (32)

Counter block j is nonce || u32 j, j = 1, 2, ...; with all-zero whitening
the payload is plain AES-256-CTR. The tag is HMAC-SHA-256 over header and
payload, keyed with SHA-256('QEAES-v1/mac' || 0x00 || K_master).
"""

import logging
import secrets
import struct
import time
from dataclasses import dataclass

import numpy as np
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, hmac
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from ..constants import (
    BLOCK_BYTES, CONTAINER_MAGIC, CONTAINER_VERSION, MAX_COUNTER, MODE_CODES,
    NONCE_BYTES, TAG_BYTES, TAG_MAC, TAG_NONCE,
)
from ..entropy.conditioning import VonNeumannExtractor, condense, erase
from ..errors import BadMagic, MalformedContainer, MessageTooLong, TagMismatch, UnsupportedVersion
from ..format import format_bytes, format_label
from .aes import encrypt_block
from .lifecycle import advance_if_due, lookup_epoch
from .schedule import deriver, to_round_keys

log = logging.getLogger(__name__)

HEADER = struct.Struct('>4sBBQ12sQ')
MODES_BY_CODE = {code: mode for mode, code in MODE_CODES.items()}
CHUNK_BLOCKS = 2**16     # counter blocks encrypted per vectorized call
NONCE_INFO = struct.Struct('>QQ')
NONCE_ENTROPY_BYTES = 32


@dataclass
class CipherContainer:
    mode: str
    epoch_id: int
    nonce: bytes
    payload: bytes
    tag: bytes = b''
    version: int = CONTAINER_VERSION

    @property
    def payload_len(self):
        return len(self.payload)

    def header(self):
        return HEADER.pack(CONTAINER_MAGIC, self.version, MODE_CODES[self.mode],
                           self.epoch_id, self.nonce, self.payload_len)

    def to_bytes(self):
        return self.header() + self.payload + self.tag

    @classmethod
    def from_bytes(cls, data):
        """Parse a container; never reads past the end of data."""
        data = bytes(data)
        if data[:len(CONTAINER_MAGIC)] != CONTAINER_MAGIC:
            raise BadMagic('Not a QEA1 container')
        if len(data) < HEADER.size:
            raise MalformedContainer(f'Truncated header ({len(data)} bytes)')
        _, version, mode, epoch_id, nonce, payload_len = HEADER.unpack_from(data)
        if version != CONTAINER_VERSION:
            raise UnsupportedVersion(f'Container version {version} not supported')
        if mode not in MODES_BY_CODE:
            raise MalformedContainer(f'Unknown mode code {mode}')
        if len(data) != HEADER.size + payload_len + TAG_BYTES:
            raise MalformedContainer(
                f'Container length {len(data)} does not match payload length {payload_len}'
            )
        payload = data[HEADER.size:HEADER.size + payload_len]
        return cls(
            mode=MODES_BY_CODE[mode],
            epoch_id=epoch_id,
            nonce=nonce,
            payload=payload,
            tag=data[HEADER.size + payload_len:],
            version=version,
        )


# ============================ Counter mode ==================================


def keystream(keys, nonce, n_blocks, start=1):
    """Keystream blocks E(nonce || u32 j) for j = start .. start + n_blocks - 1."""
    nonce = format_bytes(nonce)
    if nonce.size != NONCE_BYTES:
        raise ValueError(f'Nonce must be {NONCE_BYTES} bytes')
    counters = np.arange(start, start + n_blocks, dtype=np.uint64).astype('>u4')
    blocks = np.empty((n_blocks, BLOCK_BYTES), dtype=np.uint8)
    blocks[:, :NONCE_BYTES] = nonce
    blocks[:, NONCE_BYTES:] = counters.view(np.uint8).reshape(n_blocks, 4)
    return encrypt_block(blocks, keys)


def ctr_xor(data, keys, nonce):
    """XOR data with the keystream (encryption and decryption alike)."""
    data = format_bytes(data)
    n_blocks = -(-data.size // BLOCK_BYTES)
    if n_blocks > MAX_COUNTER:
        raise MessageTooLong(f'Messages are limited to {MAX_COUNTER} blocks')
    out = np.empty_like(data)
    for first in range(0, n_blocks, CHUNK_BLOCKS):
        count = min(CHUNK_BLOCKS, n_blocks - first)
        stream = keystream(keys, nonce, count, start=1 + first).reshape(-1)
        lo = first * BLOCK_BYTES
        hi = min(lo + count * BLOCK_BYTES, data.size)
        out[lo:hi] = data[lo:hi] ^ stream[:hi - lo]
    return out.tobytes()


def _mac(material, message):
    mac_key = bytearray(condense(material.master, TAG_MAC))
    h = hmac.HMAC(bytes(mac_key), hashes.SHA256())
    mac_key[:] = bytes(len(mac_key))
    h.update(message)
    return h


def derive_nonce(guarded, epoch_id, message_index):
    """Nonce of message `message_index` of an epoch.

    HKDF-SHA-256(salt='QEAES-v1/nonce', ikm=conditioned || OS bytes,
    info=epoch_id u64 || message_index u64). Conditioned bytes only enter
    through the hash, and the OS bytes keep nonces distinct when a seeded
    or file source replays the same stream.
    """
    extractor = VonNeumannExtractor(guarded)
    quantum = extractor.read(NONCE_ENTROPY_BYTES)
    extractor.erase()
    ikm = bytearray(quantum.tobytes() + secrets.token_bytes(NONCE_ENTROPY_BYTES))
    erase(quantum)
    hkdf = HKDF(
        algorithm=hashes.SHA256(),
        length=NONCE_BYTES,
        salt=format_label(TAG_NONCE),
        info=NONCE_INFO.pack(epoch_id, message_index),
    )
    nonce = hkdf.derive(bytes(ikm))
    ikm[:] = bytes(len(ikm))
    return nonce


# ============================= User functions ===============================


def encrypt_message(plaintext, store, policy, guarded, derive=None, now=None):
    """Encrypt plaintext under the Active epoch, rekeying first if due.

    Parameters
    ----------
    - plaintext: bytes-like
    - store: Keystore with an Active epoch
    - policy: RekeyPolicy
    - guarded: source of conditioned entropy for nonces (and new epochs)
    - derive: derivation procedure for rekeying (default: same mode and
      context as the Active epoch, from `guarded`)
    - now: current unix time (default time.time())

    Output
    ------
    CipherContainer
    """
    plaintext = format_bytes(plaintext)
    n_blocks = -(-plaintext.size // BLOCK_BYTES)
    if n_blocks > MAX_COUNTER:
        raise MessageTooLong(f'Messages are limited to {MAX_COUNTER} blocks')

    now = time.time() if now is None else now
    if derive is None and store.active is not None:
        active = store.active.material
        derive = deriver(active.mode, guarded, active.context)
    epoch_id = advance_if_due(store, policy, store.blocks_done, now, derive)
    material = lookup_epoch(store, epoch_id)

    message_index = store.record_usage(n_blocks)
    nonce = derive_nonce(guarded, epoch_id, message_index)
    keys = to_round_keys(material)
    container = CipherContainer(
        mode=material.mode,
        epoch_id=epoch_id,
        nonce=nonce,
        payload=ctr_xor(plaintext, keys, nonce) if plaintext.size else b'',
    )
    h = _mac(material, container.header())
    h.update(container.payload)
    container.tag = h.finalize()
    log.debug('Encrypted %d blocks under epoch %d', n_blocks, epoch_id)
    return container


def decrypt_message(container, store):
    """Verify the tag, then decrypt. No plaintext is produced on TagMismatch.

    container is a CipherContainer or its serialized bytes.
    """
    if not isinstance(container, CipherContainer):
        container = CipherContainer.from_bytes(container)
    material = lookup_epoch(store, container.epoch_id)
    h = _mac(material, container.header())
    h.update(container.payload)
    try:
        h.verify(container.tag)
    except InvalidSignature:
        raise TagMismatch(f'Authentication failed for epoch {container.epoch_id} container')
    if not container.payload:
        return b''
    return ctr_xor(container.payload, to_round_keys(material), container.nonce)
