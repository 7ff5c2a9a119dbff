"""Epoch lifecycle: rekeying, keystore persistence and secure erasure.

Keystore file (big-endian):
    magic 'QEKS' | version u8 | records...
    record: epoch_id u64 | status u8 | mode u8 | created_at u64 |
            context length u16 | context | master (32) | whitening (240)

Key bytes of Erased records are zero in the file. The keystore is stored
in clear with mode 0600; wrapping it at rest (HSM/KMS) is out of scope.

Usage file <keystore>.usage (big-endian, mode 0600):
    magic 'QEKU' | version u8 | epoch_id u64 | blocks u64 | messages u64

It holds the counters of the Active epoch across sessions; counters of
any other epoch id are ignored.
"""

import fcntl
import logging
import os
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..constants import (
    KEY_BYTES, KEYSTORE_MAGIC, KEYSTORE_VERSION, MODE_CODES, STATUS_CODES,
    USAGE_MAGIC, USAGE_SUFFIX, USAGE_VERSION, WHITENING_BYTES,
)
from ..entropy.conditioning import erase
from ..errors import (
    CorruptKeystore, DerivationFailure, EpochActive, InvalidPolicy, IoError,
    KeyErased, KeystoreLocked, NotFound, QeaesError, UnsupportedVersion,
)
from ..format import format_bytes
from .schedule import EpochKeyMaterial

log = logging.getLogger(__name__)
events = logging.getLogger('qeaes.events')

RECORD_HEADER = struct.Struct('>QBBQH')
USAGE = struct.Struct('>4sBQQQ')
MODES_BY_CODE = {code: mode for mode, code in MODE_CODES.items()}
STATUSES_BY_CODE = {code: status for status, code in STATUS_CODES.items()}


# ================================== Types ===================================


@dataclass(frozen=True)
class RekeyPolicy:
    """Rekey after t_block blocks or t_time seconds, whichever comes first.

    0 disables a limit; at least one limit must be enabled.
    """
    t_block: int = 0
    t_time: float = 0

    def __post_init__(self):
        if self.t_block < 0 or self.t_time < 0:
            raise InvalidPolicy('Rekey limits must be >= 0')
        if self.t_block == 0 and self.t_time == 0:
            raise InvalidPolicy('At least one of t_block, t_time must be non-zero')

    def is_due(self, blocks_done, age):
        if self.t_block and blocks_done >= self.t_block:
            return True
        return bool(self.t_time and age >= self.t_time)


@dataclass
class EpochRecord:
    material: EpochKeyMaterial
    status: str = 'Active'

    @property
    def epoch_id(self):
        return self.material.epoch_id

    def summary(self):
        """Metadata of the record, without key bytes."""
        m = self.material
        return {
            'epoch_id': m.epoch_id,
            'status': self.status,
            'mode': m.mode,
            'context': m.context,
            'created_at': m.created_at,
        }


@dataclass
class ErasureConfirmation:
    epoch_id: int
    erased_at: float
    bytes_erased: int


def log_event(check, epoch_id, action):
    """Lifecycle records in the security event log (same fields as health events)."""
    extra = {'batch_id': '-', 'check': check, 'statistic': 'epoch_id',
             'value': epoch_id, 'verdict': '-', 'action': action}
    events.info('%s epoch %s', action, epoch_id, extra=extra)


class Keystore:
    """Ordered epoch records with at most one Active epoch.

    A keystore bound to a path holds an exclusive advisory lock (fcntl) on
    the file until close(); without a path it lives in memory only.

    Examples
    --------
    >>> with Keystore.create('keys.qeks') as store:
    ...     store.activate(derive_qep(guarded, 'host1'))
    >>> with Keystore.open('keys.qeks') as store:
    ...     store.active.epoch_id
    1
    """

    def __init__(self, path=None):
        self.path = None if path is None else Path(path)
        self.records = []
        self.blocks_done = 0       # blocks encrypted under the active epoch
        self.messages_done = 0     # messages encrypted under the active epoch
        self._fd = None
        self._lock = threading.RLock()

    def __repr__(self):
        return f'Keystore({self.path}, {len(self.records)} epochs, active: {self.active_id})'

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    @property
    def usage_path(self):
        return None if self.path is None else self.path.with_name(self.path.name + USAGE_SUFFIX)

    # Persistence ------------------------------------------------------------

    @classmethod
    def create(cls, path):
        """New empty keystore file (mode 0600); fails if path exists."""
        store = cls(path)
        try:
            store._fd = os.open(store.path, os.O_RDWR | os.O_CREAT | os.O_EXCL, 0o600)
        except FileExistsError:
            raise IoError(f'Keystore {store.path} already exists')
        except OSError as exc:
            raise IoError(f'Cannot create keystore {store.path}: {exc}')
        os.fchmod(store._fd, 0o600)
        store._acquire()
        store.save()
        return store

    @classmethod
    def open(cls, path):
        store = cls(path)
        try:
            store._fd = os.open(store.path, os.O_RDWR)
        except FileNotFoundError:
            raise NotFound(f'Keystore {store.path} does not exist')
        except OSError as exc:
            raise IoError(f'Cannot open keystore {store.path}: {exc}')
        store._acquire()
        try:
            with os.fdopen(os.dup(store._fd), 'rb') as file:
                store.records = parse_keystore(file.read())
            store._load_usage()
        except Exception:
            store.close()
            raise
        return store

    def _acquire(self):
        try:
            fcntl.flock(self._fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            os.close(self._fd)
            self._fd = None
            raise KeystoreLocked(f'Keystore {self.path} is used by another session')

    def save(self, records=None):
        """Write records (default: the current ones) over the file in place.

        Erased key bytes are overwritten. The file is written before being
        truncated, so a failed write leaves the previous content readable.
        """
        if self.path is None:
            return
        if self._fd is None:
            raise IoError(f'Keystore {self.path} is closed')
        data = serialize_keystore(self.records if records is None else records)
        with self._lock:
            try:
                os.lseek(self._fd, 0, os.SEEK_SET)
                _write_all(self._fd, data)
                os.ftruncate(self._fd, len(data))
                os.fsync(self._fd)
            except OSError as exc:
                raise IoError(f'Cannot write keystore {self.path}: {exc}')

    def _load_usage(self):
        try:
            data = self.usage_path.read_bytes()
        except FileNotFoundError:
            return
        except OSError as exc:
            raise IoError(f'Cannot read usage file {self.usage_path}: {exc}')
        epoch_id, blocks_done, messages_done = parse_usage(data)
        if epoch_id == self.active_id:
            self.blocks_done, self.messages_done = blocks_done, messages_done

    def _save_usage(self):
        if self.path is None:
            return
        data = serialize_usage(self.active_id or 0, self.blocks_done, self.messages_done)
        tmp = self.usage_path.with_name(self.usage_path.name + '.tmp')
        try:
            fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
            try:
                os.fchmod(fd, 0o600)
                _write_all(fd, data)
                os.fsync(fd)
            finally:
                os.close(fd)
            os.replace(tmp, self.usage_path)
        except OSError as exc:
            raise IoError(f'Cannot write usage file {self.usage_path}: {exc}')

    def close(self):
        if self._fd is not None:
            fcntl.flock(self._fd, fcntl.LOCK_UN)
            os.close(self._fd)
            self._fd = None

    # Records ----------------------------------------------------------------

    @property
    def epochs(self):
        return [record.epoch_id for record in self.records]

    @property
    def active(self):
        for record in self.records:
            if record.status == 'Active':
                return record
        return None

    @property
    def active_id(self):
        record = self.active
        return None if record is None else record.epoch_id

    @property
    def next_epoch_id(self):
        return self.records[-1].epoch_id + 1 if self.records else 1

    def get(self, epoch_id):
        for record in self.records:
            if record.epoch_id == epoch_id:
                return record
        raise NotFound(f'No epoch {epoch_id} in keystore')

    def activate(self, material):
        """Append material as the Active epoch, retiring the previous one.

        The file is written first; on IoError the keystore is unchanged.
        """
        with self._lock:
            if self.records and material.epoch_id <= self.records[-1].epoch_id:
                raise ValueError(
                    f'Epoch ids must increase ({material.epoch_id} after {self.records[-1].epoch_id})'
                )
            previous = self.active
            record = EpochRecord(material=material, status='Active')
            pending = [EpochRecord(r.material, 'Retired' if r is previous else r.status)
                       for r in self.records]
            self.save(pending + [record])
            if previous is not None:
                previous.status = 'Retired'
            self.records.append(record)
            self.blocks_done = 0
            self.messages_done = 0
            self._save_usage()
        log_event('rekey', material.epoch_id, 'Activate')
        return material.epoch_id

    def record_usage(self, n_blocks):
        """Count one message of n_blocks under the Active epoch.

        Output
        ------
        index of the message within the epoch (0 for the first one)
        """
        with self._lock:
            index = self.messages_done
            self.blocks_done += n_blocks
            self.messages_done += 1
            self._save_usage()
        return index


# ============================== File format =================================


def serialize_keystore(records):
    parts = [KEYSTORE_MAGIC, bytes([KEYSTORE_VERSION])]
    for record in records:
        m = record.material
        context = m.context.encode('utf-8')
        parts.append(RECORD_HEADER.pack(
            m.epoch_id, STATUS_CODES[record.status], MODE_CODES[m.mode], int(m.created_at), len(context),
        ))
        parts.append(context)
        if record.status == 'Erased':
            parts.append(bytes(KEY_BYTES + WHITENING_BYTES))
        else:
            parts.append(m.master.tobytes())
            parts.append(m.whitening_block.tobytes())
    return b''.join(parts)


def parse_keystore(data):
    """Records of a keystore file; CorruptKeystore on any inconsistency."""
    header = len(KEYSTORE_MAGIC) + 1
    if len(data) < header or data[:len(KEYSTORE_MAGIC)] != KEYSTORE_MAGIC:
        raise CorruptKeystore('Not a keystore file (bad magic)')
    if data[len(KEYSTORE_MAGIC)] != KEYSTORE_VERSION:
        raise UnsupportedVersion(f'Keystore version {data[len(KEYSTORE_MAGIC)]} not supported')

    records = []
    pos = header
    while pos < len(data):
        if pos + RECORD_HEADER.size > len(data):
            raise CorruptKeystore('Truncated record header')
        epoch_id, status, mode, created_at, n_context = RECORD_HEADER.unpack_from(data, pos)
        pos += RECORD_HEADER.size
        end = pos + n_context + KEY_BYTES + WHITENING_BYTES
        if end > len(data):
            raise CorruptKeystore(f'Truncated record of epoch {epoch_id}')
        if status not in STATUSES_BY_CODE or mode not in MODES_BY_CODE:
            raise CorruptKeystore(f'Invalid status or mode in epoch {epoch_id}')
        if records and epoch_id <= records[-1].epoch_id:
            raise CorruptKeystore('Epoch ids are not increasing')
        try:
            context = data[pos:pos + n_context].decode('utf-8')
        except UnicodeDecodeError:
            raise CorruptKeystore(f'Context of epoch {epoch_id} is not UTF-8')
        pos += n_context
        secret = np.frombuffer(bytearray(data[pos:end]), dtype=np.uint8)
        pos = end
        material = EpochKeyMaterial(
            mode=MODES_BY_CODE[mode],
            epoch_id=epoch_id,
            context=context,
            master=secret[:KEY_BYTES],
            whitening_block=secret[KEY_BYTES:],
            created_at=created_at,
        )
        erase(secret)
        records.append(EpochRecord(material=material, status=STATUSES_BY_CODE[status]))

    if sum(record.status == 'Active' for record in records) > 1:
        raise CorruptKeystore('More than one Active epoch')
    return records


def serialize_usage(epoch_id, blocks_done, messages_done):
    return USAGE.pack(USAGE_MAGIC, USAGE_VERSION, epoch_id, blocks_done, messages_done)


def parse_usage(data):
    """(epoch_id, blocks_done, messages_done) of a usage file."""
    if len(data) != USAGE.size or data[:len(USAGE_MAGIC)] != USAGE_MAGIC:
        raise CorruptKeystore('Not a usage file')
    _, version, epoch_id, blocks_done, messages_done = USAGE.unpack(data)
    if version != USAGE_VERSION:
        raise UnsupportedVersion(f'Usage file version {version} not supported')
    return epoch_id, blocks_done, messages_done


def _write_all(fd, data):
    view = memoryview(data)
    while view:
        view = view[os.write(fd, view):]


# ============================= User functions ===============================


def rekey(store, derive, now=None):
    """Derive a fresh epoch with derive(epoch_id, now) and make it Active.

    On any derivation error the current epoch stays Active and
    DerivationFailure is raised.
    """
    now = time.time() if now is None else now
    epoch_id = store.next_epoch_id
    try:
        material = derive(epoch_id, now)
    except QeaesError as exc:
        log_event('rekey', epoch_id, 'DerivationFailure')
        raise DerivationFailure(f'Derivation of epoch {epoch_id} failed: {exc}') from exc
    return store.activate(material)


def advance_if_due(store, policy, blocks_done, now, derive):
    """Roll to a fresh epoch when the rekey policy says so.

    Parameters
    ----------
    - store: Keystore with an Active epoch
    - policy: RekeyPolicy
    - blocks_done: blocks encrypted under the Active epoch
    - now: current time (unix seconds)
    - derive: callable (epoch_id, now) -> EpochKeyMaterial

    Output
    ------
    epoch_id of the Active epoch after the call
    """
    active = store.active
    if active is None:
        raise NotFound('Keystore has no Active epoch')
    age = now - active.material.created_at
    if not policy.is_due(blocks_done, age):
        return active.epoch_id
    log.info('Epoch %d due for rekey (%d blocks, %.0f s)', active.epoch_id, blocks_done, age)
    return rekey(store, derive, now)


def _overwrite(buffer, entropy):
    """Random overwrite from entropy(nbytes) (default OS generator), then zeros."""
    if entropy is None:
        erase(buffer)
        return
    buffer[:] = format_bytes(entropy(buffer.size))[:buffer.size]
    buffer[:] = 0


def secure_erase(store, epoch_id, entropy=None):
    """Erase the key bytes of a Retired epoch, in memory and in the file.

    entropy: optional callable nbytes -> conditioned random bytes used for
    the random overwrite pass (e.g. VonNeumannExtractor(guarded).read).
    """
    record = store.get(epoch_id)
    if record.status == 'Active':
        raise EpochActive(f'Epoch {epoch_id} is Active and cannot be erased')
    with store._lock:
        m = record.material
        if record.status != 'Erased':
            _overwrite(m.master, entropy)
            _overwrite(m.whitening_block, entropy)
            record.status = 'Erased'
            store.save()
    log_event('erase', epoch_id, 'SecureErase')
    return ErasureConfirmation(
        epoch_id=epoch_id,
        erased_at=time.time(),
        bytes_erased=KEY_BYTES + WHITENING_BYTES,
    )


def lookup_epoch(store, epoch_id):
    """Key material of an Active or Retired epoch."""
    record = store.get(epoch_id)
    if record.status == 'Erased':
        raise KeyErased(f'Key material of epoch {epoch_id} has been erased')
    return record.material


def retire_and_erase(store, keep=0, entropy=None):
    """Erase all Retired epochs except the `keep` most recent ones."""
    if keep < 0:
        raise ValueError('keep must be >= 0')
    retired = [record.epoch_id for record in store.records if record.status == 'Retired']
    doomed = retired[:len(retired) - keep] if keep else retired
    return [secure_erase(store, epoch_id, entropy=entropy) for epoch_id in doomed]
