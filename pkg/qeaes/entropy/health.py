"""Online entropy-quality monitoring.

Batches of bits are checked for frequency (monobit), runs and stuck bits
(longest repetition), and optionally lag-1 serial correlation. A failing
batch is never delivered: the guarded stream either switches to a backup
source or halts, and every event is written to the security event log.

Event log records are tab-separated lines:
    time (ISO-8601)  batch_id  check  statistic  value  verdict  action
"""

import itertools
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from ..config import CONFIG
from ..constants import (
    ALPHA, ALPHA_MAX, BATCH_BITS, BATCH_BITS_MIN,
    MAX_RUN, MAX_RUN_MIN, MIN_ENTROPY_BITS,
)
from ..errors import AllSourcesFailed, BatchTooSmall, HealthFailure, InvalidPolicy
from ..format import check_choice, format_bits
from ..formulas.randomness.runs import longest_repeat
from ..formulas.special import erfc_p
from ..properties import nist_test
from .sources import SourceHandle

log = logging.getLogger(__name__)
events = logging.getLogger('qeaes.events')

ACTIONS = 'ReseedFromBackup', 'Halt'
EVENT_FIELDS = 'batch_id', 'check', 'statistic', 'value', 'verdict', 'action'


# ================================== Types ===================================


@dataclass(frozen=True)
class HealthPolicy:
    """Thresholds of the online checks.

    Parameters
    ----------
    - batch_bits: bits per checked batch (>= 1024, default 65536)
    - alpha: significance of each p-value check (0 < alpha < 0.01, default 1e-6)
    - max_run: longest tolerated run of identical bits (>= 8, default 64)
    - action: 'ReseedFromBackup' or 'Halt' when a batch fails
    - serial_check: also test lag-1 serial correlation (default False)
    """
    batch_bits: int = BATCH_BITS
    alpha: float = ALPHA
    max_run: int = MAX_RUN
    action: str = 'ReseedFromBackup'
    serial_check: bool = False

    def __post_init__(self):
        if self.batch_bits < BATCH_BITS_MIN:
            raise InvalidPolicy(f'batch_bits must be >= {BATCH_BITS_MIN}')
        if not 0 < self.alpha < ALPHA_MAX:
            raise InvalidPolicy(f'alpha must be in (0, {ALPHA_MAX})')
        if self.max_run < MAX_RUN_MIN:
            raise InvalidPolicy(f'max_run must be >= {MAX_RUN_MIN}')
        try:
            check_choice([self.action], ACTIONS)
        except ValueError as exc:
            raise InvalidPolicy(str(exc))


@dataclass
class HealthReport:
    batch_id: int
    monobit_p: float
    runs_p: float
    longest_repeat: int
    verdict: str
    failed_checks: list = field(default_factory=list)
    serial_p: float = None
    source: str = ''

    @property
    def passed(self):
        return self.verdict == 'Pass'


@dataclass
class EntropyEstimate:
    h_min_per_bit: float
    p_max: float


@dataclass
class ReseedEvent:
    batch_id: int
    from_source: str
    to_source: str
    failed_checks: list


# ================================ Event log =================================


class EventFormatter(logging.Formatter):
    """Formats security events as tab-separated records."""

    def format(self, record):
        when = datetime.fromtimestamp(record.created, timezone.utc).isoformat()
        values = [str(getattr(record, name, '-')) for name in EVENT_FIELDS]
        return '\t'.join([when] + values)


class EventLog:
    """Append-only security event log file attached to the 'qeaes.events' logger.

    Appends go through a logging.FileHandler, whose lock makes every record
    atomic even with several guarded sources writing.

    Examples
    --------
    >>> with EventLog('events.tsv') as event_log:
    ...     guarded = guard_stream(primary, policy, backup)
    ...     guarded.draw_bits(10**6)
    >>> event_log.records()
    [{'time': ..., 'batch_id': '0', 'check': 'monobit', ...}, ...]
    """

    def __init__(self, path):
        self.path = path
        self.handler = logging.FileHandler(path, mode='a', encoding='utf-8')
        self.handler.setFormatter(EventFormatter())
        events.addHandler(self.handler)
        if events.level == logging.NOTSET or events.level > logging.INFO:
            events.setLevel(logging.INFO)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        events.removeHandler(self.handler)
        self.handler.close()

    def records(self):
        """Parse the log file back into a list of dicts."""
        self.handler.flush()
        out = []
        with open(self.path, encoding='utf-8') as file:
            for line in file:
                parts = line.rstrip('\n').split('\t')
                if len(parts) == 1 + len(EVENT_FIELDS):
                    out.append(dict(zip(('time',) + EVENT_FIELDS, parts)))
        return out


def log_event(batch_id, check, statistic, value, verdict, action):
    extra = dict(zip(EVENT_FIELDS, (batch_id, check, statistic, value, verdict, action)))
    events.info('%s %s %s', check, verdict, action, extra=extra)


# ================================= Checks ===================================


def _serial_p(bits):
    """p-value of the lag-1 autocorrelation of +/-1 steps (normal approx.)."""
    x = 2 * bits.astype(np.float64) - 1
    x -= x.mean()
    var = np.dot(x, x)
    if var == 0:
        return 0.0
    r = np.dot(x[:-1], x[1:]) / var
    return erfc_p(abs(r) * np.sqrt(bits.size) / np.sqrt(2))


def check_batch(bits, policy=None, batch_id=0):
    """Run the online checks on a batch of bits.

    Parameters
    ----------
    - bits: RawBitstream, ConditionedEntropy or array of 0/1
    - policy: HealthPolicy (default thresholds if None)
    - batch_id: identifier recorded in the report

    Output
    ------
    HealthReport, verdict 'Fail' iff a p-value is below policy.alpha or the
    longest repetition exceeds policy.max_run.
    """
    policy = HealthPolicy() if policy is None else policy
    source = getattr(bits, 'source', '')
    bits = format_bits(getattr(bits, 'bits', bits))
    if bits.size < policy.batch_bits:
        raise BatchTooSmall(f'Batch of {bits.size} bits, policy needs {policy.batch_bits}')

    monobit_p = nist_test(bits, source='Frequency')
    runs_p = nist_test(bits, source='Runs')
    repeat = longest_repeat(bits)

    failed = []
    if monobit_p < policy.alpha:
        failed.append('monobit')
    if runs_p < policy.alpha:
        failed.append('runs')
    if repeat > policy.max_run:
        failed.append('repetition')

    serial_p = None
    if policy.serial_check:
        serial_p = _serial_p(bits)
        if serial_p < policy.alpha:
            failed.append('serial')

    return HealthReport(
        batch_id=batch_id,
        monobit_p=monobit_p,
        runs_p=runs_p,
        longest_repeat=repeat,
        verdict='Fail' if failed else 'Pass',
        failed_checks=failed,
        serial_p=serial_p,
        source=source,
    )


def estimate_min_entropy(bits):
    """Per-bit min-entropy H = -log2(p_max), p_max = max(p, 1 - p).

    bits is a ConditionedEntropy, RawBitstream or array of at least 10^4 bits.
    """
    bits = format_bits(getattr(bits, 'bits', bits))
    if bits.size < MIN_ENTROPY_BITS:
        raise BatchTooSmall(f'Min-entropy estimate needs >= {MIN_ENTROPY_BITS} bits')
    p = np.count_nonzero(bits) / bits.size
    p_max = max(p, 1 - p)
    h_min = float(-np.log2(p_max)) if p_max < 1 else 0.0
    return EntropyEstimate(h_min_per_bit=h_min, p_max=float(p_max))


# ============================== Guarded stream ==============================


_batch_ids = itertools.count(1)


class GuardedSource(SourceHandle):
    """Source that only delivers bits from batches which passed check_batch.

    Attributes
    ----------
    .reports --- HealthReport of every checked batch (in order)
    .reseed_events --- ReseedEvent list (switches to the backup source)
    .current --- handle currently drawn from
    """

    kind = 'Guarded'

    def __init__(self, primary, policy=None, backup=None):
        super().__init__(f'guarded:{primary.label}')
        self.primary = primary
        self.backup = backup
        self.policy = HealthPolicy() if policy is None else policy
        self.current = primary
        self.reports = []
        self.reseed_events = []
        self.event_log = None
        self._on_backup = False
        self._backup_checked = False

    def _draw(self, n):
        chunks = [self._buffer]
        available = self._buffer.size
        while available < n:
            batch = self.current.draw_bits(self.policy.batch_bits)
            report = check_batch(batch, self.policy, batch_id=next(_batch_ids))
            self.reports.append(report)
            if report.passed:
                if self._on_backup:
                    self._backup_checked = True
                log_event(report.batch_id, 'delivered', self.current.label,
                          int(batch.count), 'Pass', 'Deliver')
                chunks.append(batch.bits)
                available += batch.count
            else:
                self._handle_failure(report)
        bits = np.concatenate(chunks)
        out, self._buffer = bits[:n].copy(), bits[n:].copy()
        return out

    def _handle_failure(self, report):
        action = self.policy.action
        last_resort = self._on_backup or self.backup is None
        if action == 'ReseedFromBackup' and last_resort:
            action = 'Halt'

        for check in report.failed_checks:
            statistic, value = {
                'monobit': ('p', report.monobit_p),
                'runs': ('p', report.runs_p),
                'repetition': ('longest_repeat', report.longest_repeat),
                'serial': ('p', report.serial_p),
            }[check]
            log_event(report.batch_id, check, statistic, value, 'Fail', action)

        if action == 'ReseedFromBackup':
            event = ReseedEvent(
                batch_id=report.batch_id,
                from_source=self.current.label,
                to_source=self.backup.label,
                failed_checks=list(report.failed_checks),
            )
            self.reseed_events.append(event)
            log_event(report.batch_id, 'ReseedEvent',
                      f'{event.from_source}->{event.to_source}', '-', 'Fail', action)
            self.current = self.backup
            self._on_backup = True
            return

        self._buffer = np.zeros(0, dtype=np.uint8)
        if self._on_backup and not self._backup_checked:
            raise AllSourcesFailed(
                f'Backup {self.current.label} failed its first batch '
                f'({", ".join(report.failed_checks)})'
            )
        if self._on_backup:
            raise AllSourcesFailed(f'Backup {self.current.label} failed health checks')
        raise HealthFailure(
            f'{self.current.label} failed health checks ({", ".join(report.failed_checks)})'
        )

    def close(self):
        super().close()
        self.primary.close()
        if self.backup is not None:
            self.backup.close()
        if self.event_log is not None:
            self.event_log.close()


def guard_stream(handle, policy=None, backup=None, event_log=None):
    """Wrap a source so that only healthy batches are delivered.

    Parameters
    ----------
    - handle: primary SourceHandle
    - policy: HealthPolicy (default thresholds if None)
    - backup: SourceHandle used after a failure when policy.action is
      'ReseedFromBackup'
    - event_log: path of the event log (default CONFIG["event log"]); if
      None, events only go to the 'qeaes.events' logger

    Output
    ------
    GuardedSource (a SourceHandle)
    """
    path = CONFIG["event log"] if event_log is None else event_log
    guarded = GuardedSource(handle, policy=policy, backup=backup)
    if path is not None:
        guarded.event_log = EventLog(path)
    log.debug('Guarding %s (backup: %s)', handle.label, getattr(backup, 'label', None))
    return guarded
