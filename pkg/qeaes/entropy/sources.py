"""Entropy sources: simulated QRNG, raw-bit files, OS generator, callbacks.

Every source delivers bits through the same SourceHandle interface, so that
conditioning, health checks and key derivation never depend on where the
bits come from. Bits are always MSB-first within each byte.
"""

import logging
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import FileNotFound, IoError, OsEntropyUnavailable, SourceExhausted
from ..format import bits_to_bytes, bytes_to_bits, check_choice, format_bytes

log = logging.getLogger(__name__)

SOURCE_KINDS = 'SimulatedQuantum', 'RawFile', 'OsClassical'

SIMULATION_CHUNK_BITS = 2**22   # bounds memory of biased draws


# =============================== Descriptors ================================


@dataclass(frozen=True)
class SourceDescriptor:
    """Description of an entropy source, validated at construction.

    Parameters
    ----------
    - kind: 'SimulatedQuantum', 'RawFile' or 'OsClassical'
    - label: short name used in logs and bitstream provenance
    - seed (SimulatedQuantum): 64-bit simulation seed
    - bias (SimulatedQuantum): probability of emitting a 1, in [0, 1]
    - path (RawFile): file of raw bytes, no header

    Examples
    --------
    >>> SourceDescriptor('SimulatedQuantum', seed=42)
    >>> SourceDescriptor('RawFile', path='dump.bin')
    >>> SourceDescriptor('OsClassical')
    """
    kind: str
    label: str = ''
    seed: int = 0
    bias: float = 0.5
    path: str = None

    def __post_init__(self):
        check_choice([self.kind], SOURCE_KINDS)
        if not 0 <= self.bias <= 1:
            raise ValueError(f'bias must be in [0, 1], not {self.bias}')
        if not 0 <= self.seed < 2**64:
            raise ValueError('seed must be a 64-bit unsigned integer')
        if self.kind == 'RawFile' and not self.path:
            raise ValueError('RawFile descriptors need a path')
        if not self.label:
            object.__setattr__(self, 'label', self._default_label())

    def _default_label(self):
        if self.kind == 'SimulatedQuantum':
            return f'sim:{self.seed}:{self.bias:g}'
        if self.kind == 'RawFile':
            return f'file:{self.path}'
        return 'os'


@dataclass
class RawBitstream:
    """Raw bits drawn from a source (uint8 array of 0/1, MSB-first order)."""
    bits: np.ndarray
    source: str = ''
    drawn_at: float = field(default_factory=time.monotonic)

    @property
    def count(self):
        return int(self.bits.size)

    def to_bytes(self):
        return bits_to_bytes(self.bits).tobytes()


# ================================= Handles ==================================


class SourceHandle:
    """Base class for open sources. Single consumer: draws are serialized.

    Subclasses implement either `_read_bytes(nbytes)` (byte-oriented
    sources) or `_draw(n)` directly.
    """

    kind = None

    def __init__(self, label):
        self.label = label
        self.bits_drawn = 0
        self.closed = False
        self._buffer = np.zeros(0, dtype=np.uint8)
        self._lock = threading.Lock()

    def __repr__(self):
        return f'{self.__class__.__name__}({self.label!r}, bits drawn: {self.bits_drawn})'

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        self.closed = True
        self._buffer = np.zeros(0, dtype=np.uint8)

    def draw_bits(self, n):
        """Return a RawBitstream of exactly n bits."""
        n = int(n)
        if n <= 0:
            raise ValueError(f'Number of bits must be positive, not {n}')
        if self.closed:
            raise IoError(f'Source {self.label} is closed')
        with self._lock:
            bits = self._draw(n)
            self.bits_drawn += n
        return RawBitstream(bits=bits, source=self.label)

    def draw_bytes(self, nbytes):
        """Return nbytes whole octets (8 * nbytes bits) as bytes."""
        return self.draw_bits(8 * nbytes).to_bytes()

    def _draw(self, n):
        missing = n - self._buffer.size
        if missing > 0:
            data = self._read_bytes(-(-missing // 8))
            bits = np.concatenate((self._buffer, bytes_to_bits(data)))
        else:
            bits = self._buffer
        out, self._buffer = bits[:n].copy(), bits[n:].copy()
        return out

    def _read_bytes(self, nbytes):
        raise NotImplementedError


class SimulatedQuantumSource(SourceHandle):
    """Seeded i.i.d. Bernoulli(bias) bits from a counter-based generator.

    The generator is Philox (counter mode), so the output is a pure function
    of (seed, bias, sequence of draws).
    """

    kind = 'SimulatedQuantum'

    def __init__(self, label, seed, bias=0.5):
        super().__init__(label)
        self.seed = seed
        self.bias = bias
        self._rng = np.random.Generator(np.random.Philox(seed))

    def _read_bytes(self, nbytes):
        return self._rng.integers(0, 256, size=nbytes, dtype=np.uint8)

    def _draw(self, n):
        if self.bias == 0.5:
            return super()._draw(n)
        chunks = []
        remaining = n
        while remaining > 0:
            size = min(remaining, SIMULATION_CHUNK_BITS)
            chunks.append((self._rng.random(size) < self.bias).astype(np.uint8))
            remaining -= size
        return np.concatenate(chunks)


class RawFileSource(SourceHandle):
    """Raw bytes from a file (e.g. a hardware QRNG dump), consumed MSB-first."""

    kind = 'RawFile'

    def __init__(self, label, path):
        super().__init__(label)
        self.path = Path(path)
        try:
            self._file = open(self.path, 'rb')
        except FileNotFoundError:
            raise FileNotFound(f'Raw-bit file not found: {self.path}')
        except OSError as exc:
            raise IoError(f'Cannot open {self.path}: {exc}')
        self._bytes_left = self.path.stat().st_size

    @property
    def bits_remaining(self):
        return 8 * self._bytes_left + self._buffer.size

    def _draw(self, n):
        if n > self.bits_remaining:
            raise SourceExhausted(
                f'{self.label}: {n} bits requested, {self.bits_remaining} remaining'
            )
        return super()._draw(n)

    def _read_bytes(self, nbytes):
        try:
            data = self._file.read(nbytes)
        except OSError as exc:
            raise IoError(f'Read error on {self.path}: {exc}')
        if len(data) != nbytes:
            raise IoError(f'{self.path} changed size while reading')
        self._bytes_left -= nbytes
        return data

    def close(self):
        super().close()
        self._file.close()


class OsClassicalSource(SourceHandle):
    """The operating system's cryptographic generator (not reproducible)."""

    kind = 'OsClassical'

    def __init__(self, label):
        super().__init__(label)
        try:
            secrets.token_bytes(1)
        except NotImplementedError:
            raise OsEntropyUnavailable('No OS randomness source available')

    def _read_bytes(self, nbytes):
        try:
            return secrets.token_bytes(nbytes)
        except NotImplementedError:
            raise OsEntropyUnavailable('No OS randomness source available')


class ProviderSource(SourceHandle):
    """Bits from an external callback `callback(nbytes) -> bytes-like`.

    The callback may return more bytes than asked (extra bytes are kept for
    the next draw) or fewer (it is called again); an empty answer or any
    exception is reported as IoError.
    """

    kind = 'Provider'

    def __init__(self, label, callback):
        super().__init__(label)
        self.callback = callback

    def _read_bytes(self, nbytes):
        chunks = []
        total = 0
        while total < nbytes:
            try:
                data = self.callback(nbytes - total)
            except Exception as exc:
                raise IoError(f'Entropy provider {self.label} failed: {exc}') from exc
            data = format_bytes(data) if data is not None else np.zeros(0, np.uint8)
            if data.size == 0:
                raise IoError(f'Entropy provider {self.label} returned no data')
            chunks.append(data)
            total += data.size
        return np.concatenate(chunks)


# ============================= User functions ===============================


def open_source(desc):
    """Open the source described by a SourceDescriptor and return its handle.

    Examples
    --------
    >>> h = open_source(SourceDescriptor('SimulatedQuantum', seed=42))
    >>> h.draw_bits(8).bits
    array([...], dtype=uint8)
    """
    if desc.kind == 'SimulatedQuantum':
        handle = SimulatedQuantumSource(desc.label, seed=desc.seed, bias=desc.bias)
    elif desc.kind == 'RawFile':
        handle = RawFileSource(desc.label, path=desc.path)
    else:
        handle = OsClassicalSource(desc.label)
    log.debug('Opened %s source %s', desc.kind, desc.label)
    return handle


def draw_bits(handle, n):
    """Draw exactly n bits from an open handle (see SourceHandle.draw_bits)."""
    return handle.draw_bits(n)


def register_provider(callback, label='provider'):
    """Wrap an external entropy callback into a SourceHandle.

    Parameters
    ----------
    - callback: callable taking a number of bytes and returning bytes-like
    - label: name used in logs and provenance
    """
    if not callable(callback):
        raise TypeError('Entropy provider must be callable')
    return ProviderSource(label, callback)
