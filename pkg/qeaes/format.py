"""Miscellaneous formatting tools and checks for the qeaes package."""

import numpy as np


def check_choice(values, allowed_values):
    """Check if values are among allowed values, raise exception if not."""
    wrong_values = []
    for value in values:
        if value not in allowed_values:
            wrong_values.append(value)
    if len(wrong_values) > 0:
        raise ValueError(f'{wrong_values} not in allowed values {allowed_values}')


def format_bytes(data):
    """Return data (bytes, bytearray, memoryview, list, array) as uint8 array.

    The returned array shares memory with data when possible, so that
    in-place erasure of secrets reaches the original buffer.
    """
    if isinstance(data, np.ndarray):
        if data.dtype != np.uint8:
            data = data.astype(np.uint8)
        return data.reshape(-1) if data.ndim != 1 else data
    if isinstance(data, (bytes, bytearray, memoryview)):
        return np.frombuffer(data, dtype=np.uint8)
    return np.array(data, dtype=np.uint8).reshape(-1)


def format_bits(bits):
    """Return a bit sequence (any iterable of 0/1, or bool array) as uint8 array."""
    bits = np.asarray(bits)
    if bits.dtype == bool:
        return bits.astype(np.uint8)
    bits = bits.astype(np.uint8, copy=False).reshape(-1)
    if bits.size and bits.max() > 1:
        raise ValueError('Bits can only be 0 or 1')
    return bits


def bytes_to_bits(data):
    """Unpack octets into bits, MSB first within each byte."""
    return np.unpackbits(format_bytes(data), bitorder='big')


def bits_to_bytes(bits):
    """Pack bits into octets, MSB first; a trailing partial byte is zero-padded."""
    return np.packbits(format_bits(bits), bitorder='big')


def format_label(label):
    """Labels (domain tags, contexts) are UTF-8 text or raw bytes."""
    if isinstance(label, str):
        return label.encode('utf-8')
    return bytes(label)


def format_output_type(value):
    """Return python scalars for 0-d arrays, arrays otherwise."""
    try:
        sh = value.shape
    except AttributeError:
        return value
    else:
        if len(sh) == 0:
            return value.item()
        else:
            return value


def parse_source_spec(spec):
    """Parse a command-line source spec into SourceDescriptor keyword arguments.

    Accepted forms: 'sim:<seed>[:<bias>]', 'file:<path>', 'os'.

    Examples
    --------
    >>> parse_source_spec('sim:7')
    {'kind': 'SimulatedQuantum', 'label': 'sim:7', 'seed': 7, 'bias': 0.5}
    >>> parse_source_spec('file:dump.bin')['path']
    'dump.bin'
    """
    kind, _, rest = spec.partition(':')
    if kind == 'sim':
        seed, _, bias = rest.partition(':')
        try:
            seed = int(seed, 0)
            bias = float(bias) if bias else 0.5
        except ValueError:
            raise ValueError(f'Invalid simulated source spec: {spec!r}')
        return {'kind': 'SimulatedQuantum', 'label': spec, 'seed': seed, 'bias': bias}
    if kind == 'file':
        if not rest:
            raise ValueError(f'Missing path in source spec: {spec!r}')
        return {'kind': 'RawFile', 'label': spec, 'path': rest}
    if kind == 'os' and not rest:
        return {'kind': 'OsClassical', 'label': 'os'}
    raise ValueError(f"Source spec can only be 'sim:<seed>[:bias]', 'file:<path>' or 'os', not {spec!r}")
