"""AES-256 primitives"""

from .sub_bytes import SubBytesFormulas
