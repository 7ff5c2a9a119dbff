"""Exceptions raised by qeaes.

All operational failures derive from QeaesError so that callers (and the
command line) can separate them from programming errors. Argument problems
additionally derive from ValueError, file problems from OSError.
"""


class QeaesError(Exception):
    """Base class of all qeaes operational errors."""


# Entropy sources ------------------------------------------------------------

class FileNotFound(QeaesError, FileNotFoundError):
    pass


class OsEntropyUnavailable(QeaesError):
    pass


class SourceExhausted(QeaesError):
    pass


class IoError(QeaesError, OSError):
    """Read failure of a source, including failing entropy callbacks."""


# Conditioning ---------------------------------------------------------------

class InsufficientInput(QeaesError, ValueError):
    pass


class EmptyInput(QeaesError, ValueError):
    pass


class OutputTooLong(QeaesError, ValueError):
    pass


# Health ---------------------------------------------------------------------

class InvalidPolicy(QeaesError, ValueError):
    pass


class BatchTooSmall(QeaesError, ValueError):
    pass


class HealthFailure(QeaesError):
    """A batch failed its checks and the policy says Halt."""


class AllSourcesFailed(HealthFailure):
    pass


# Statistics -----------------------------------------------------------------

class InputTooShort(QeaesError, ValueError):
    pass


class SampleTooShort(QeaesError, ValueError):
    pass


# Key lifecycle --------------------------------------------------------------

class DerivationFailure(QeaesError):
    pass


class EpochActive(QeaesError):
    pass


class NotFound(QeaesError, KeyError):
    pass


class KeyErased(QeaesError):
    pass


class KeystoreLocked(QeaesError):
    pass


class CorruptKeystore(QeaesError):
    pass


# Container ------------------------------------------------------------------

class BadMagic(QeaesError):
    pass


class UnsupportedVersion(QeaesError):
    pass


class TagMismatch(QeaesError):
    pass


class MessageTooLong(QeaesError, ValueError):
    pass


class MalformedContainer(QeaesError, ValueError):
    """Truncated container or inconsistent header fields."""
