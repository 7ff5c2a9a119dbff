"""Command line interface: qeaes <subcommand> [options].

Exit codes: 0 success, 1 usage error, 2 operational error. Errors are
written to stderr as one JSON object {"error": <name>, "message": <text>}.
No subcommand ever prints key bytes.
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .constants import ALPHA, BATCH_BITS, MAX_RUN, NIST_SAMPLE_BITS
from .entropy import EventLog, HealthPolicy, SourceDescriptor, VonNeumannExtractor
from .entropy import guard_stream, open_source
from .errors import NotFound, QeaesError
from .format import parse_source_spec
from .cipher import Keystore, RekeyPolicy, decrypt_message, encrypt_message, expand_key
from .cipher import deriver, key_space_bits, rekey, retire_and_erase, secure_erase
from .cipher.container import ctr_xor
from .cipher.schedule import derive_qep, to_round_keys
from .stats import ent_metrics, nist_subset

log = logging.getLogger(__name__)

MODE_FLAGS = {'p': 'QEP', 'h': 'QEH'}
KEYSTORE_ENV = 'QEAES_KEYSTORE'


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """ArgumentParser raising UsageError instead of exiting with code 2."""

    def error(self, message):
        raise UsageError(message)


@dataclass
class CliConfig:
    """Validated command line settings (built before any keystore access)."""
    subcommand: str
    sources: list = field(default_factory=list)     # SourceDescriptor (primary, backup)
    classical: SourceDescriptor = None
    keystore: Path = None
    health: HealthPolicy = None
    rekey: RekeyPolicy = None
    report: str = 'text'
    args: argparse.Namespace = None


# ================================= Parser ===================================


def _add_keystore(p):
    p.add_argument('--keystore', default=None,
                   help=f'keystore file (default: ${KEYSTORE_ENV})')


def _add_sources(p, default='os'):
    p.add_argument('--source', default=default,
                   help="entropy source: 'sim:<seed>[:bias]', 'file:<path>' or 'os' "
                        f"(default {default})")
    p.add_argument('--backup', default=None, help='backup source used after a health failure')


def _add_health(p):
    p.add_argument('--batch-bits', type=int, default=BATCH_BITS, help='bits per health batch')
    p.add_argument('--alpha', type=float, default=ALPHA, help='health check significance')
    p.add_argument('--max-run', type=int, default=MAX_RUN, help='longest tolerated bit repetition')
    p.add_argument('--action', choices=('reseed', 'halt'), default='reseed',
                   help='on a failing batch: switch to --backup, or stop')


def _add_derivation(p, mode_default='p'):
    p.add_argument('--mode', choices=tuple(MODE_FLAGS), default=mode_default,
                   help='p: pure quantum (QE-P), h: hybrid (QE-H)')
    p.add_argument('--classical', default='os', help='classical source of QE-H (default os)')
    p.add_argument('--whitening', choices=('direct', 'hashed'), default=None,
                   help='QE-P whitening conditioning')


def _add_report(p):
    p.add_argument('--report', choices=('text', 'json'), default='text')


def build_parser():
    parser = _Parser(prog='qeaes', description='Quantum-enhanced AES-256 toolkit.')
    parser.add_argument('-v', '--verbose', action='count', default=0, help='more log output')
    parser.add_argument('--event-log', default=None, help='append security events to this file')
    sub = parser.add_subparsers(dest='subcommand', required=True, parser_class=_Parser)

    p = sub.add_parser('keygen', help='create a keystore with a first epoch')
    _add_keystore(p)
    _add_sources(p)
    _add_health(p)
    _add_derivation(p)
    p.add_argument('--context', default='default', help='context label bound into keys')
    _add_report(p)

    p = sub.add_parser('rekey', help='derive a fresh epoch now')
    _add_keystore(p)
    _add_sources(p)
    _add_health(p)
    _add_derivation(p, mode_default=None)
    _add_report(p)

    p = sub.add_parser('erase', help='securely erase retired epochs')
    _add_keystore(p)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument('--epoch', type=int, help='epoch to erase')
    group.add_argument('--retired', action='store_true', help='erase retired epochs')
    p.add_argument('--keep', type=int, default=0, help='with --retired: keep the N most recent')
    _add_report(p)

    p = sub.add_parser('encrypt', help='encrypt a file into a QEA1 container')
    _add_keystore(p)
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--out', dest='output', required=True)
    _add_sources(p)
    _add_health(p)
    _add_derivation(p, mode_default=None)
    p.add_argument('--t-block', type=int, default=0, help='rekey after N blocks (0: off)')
    p.add_argument('--t-time', type=float, default=86400, help='rekey after N seconds (0: off)')

    p = sub.add_parser('decrypt', help='verify and decrypt a QEA1 container')
    _add_keystore(p)
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--out', dest='output', required=True)

    p = sub.add_parser('entropy-test', help='ENT metrics or NIST subset of a file')
    p.add_argument('--input', required=True)
    p.add_argument('--suite', choices=('ent', 'nist'), default='ent')
    p.add_argument('--samples', type=int, default=None, help='number of NIST samples')
    p.add_argument('--sample-bytes', type=int, default=NIST_SAMPLE_BITS // 8)
    p.add_argument('--workers', type=int, default=1)
    _add_report(p)

    p = sub.add_parser('monitor', help='run the health checks on a source')
    _add_sources(p)
    _add_health(p)
    p.add_argument('--bits', type=int, default=10 * BATCH_BITS, help='bits to draw')
    _add_report(p)

    p = sub.add_parser('bench', help='throughput of encryption and extraction')
    _add_sources(p, default='sim:1')
    p.add_argument('--size-mib', type=int, default=64)
    _add_report(p)

    p = sub.add_parser('status', help='list epochs (no key bytes)')
    _add_keystore(p)
    _add_report(p)

    return parser


def build_config(args):
    """Validate flags; raises UsageError or ValueError."""
    config = CliConfig(subcommand=args.subcommand, report=getattr(args, 'report', 'text'), args=args)

    if hasattr(args, 'keystore'):
        path = args.keystore or os.environ.get(KEYSTORE_ENV)
        if not path:
            raise UsageError(f'--keystore or ${KEYSTORE_ENV} is required')
        config.keystore = Path(path)

    if hasattr(args, 'source'):
        config.sources.append(SourceDescriptor(**parse_source_spec(args.source)))
        if args.backup:
            config.sources.append(SourceDescriptor(**parse_source_spec(args.backup)))

    if hasattr(args, 'classical'):
        config.classical = SourceDescriptor(**parse_source_spec(args.classical))

    if hasattr(args, 'batch_bits'):
        config.health = HealthPolicy(
            batch_bits=args.batch_bits,
            alpha=args.alpha,
            max_run=args.max_run,
            action='ReseedFromBackup' if args.action == 'reseed' else 'Halt',
        )

    if hasattr(args, 't_block'):
        config.rekey = RekeyPolicy(t_block=args.t_block, t_time=args.t_time)

    if getattr(args, 'keep', 0) < 0:
        raise UsageError('--keep must be >= 0')
    if getattr(args, 'samples', None) is not None and args.samples < 1:
        raise UsageError('--samples must be >= 1')
    for flag in ('size_mib', 'bits', 'sample_bytes', 'workers'):
        if getattr(args, flag, 1) < 1:
            raise UsageError(f"--{flag.replace('_', '-')} must be >= 1")
    return config


# ================================ Helpers ===================================


def _emit(config, data, text=None):
    if config.report == 'json':
        print(json.dumps(data, indent=2, default=float))
    else:
        print(text if text is not None else '\n'.join(f'{k}: {v}' for k, v in data.items()))


def _guarded(config):
    primary = open_source(config.sources[0])
    backup = open_source(config.sources[1]) if len(config.sources) > 1 else None
    return guard_stream(primary, config.health, backup)


def _deriver(config, guarded, mode, context):
    classical = open_source(config.classical) if mode == 'QEH' else None
    return deriver(mode, guarded, context, classical=classical, whitening=config.args.whitening)


# =============================== Subcommands ================================


def cmd_keygen(config):
    args = config.args
    mode = MODE_FLAGS[args.mode]
    with _guarded(config) as guarded:
        derive = _deriver(config, guarded, mode, args.context)
        material = derive(1, time.time())
    with Keystore.create(config.keystore) as store:
        store.activate(material)
        summary = store.active.summary()
    material.erase()
    summary.update(key_space_bits())
    _emit(config, summary)
    return 0


def cmd_rekey(config):
    args = config.args
    with Keystore.open(config.keystore) as store, _guarded(config) as guarded:
        if not store.records:
            raise NotFound(f'Keystore {config.keystore} has no epochs')
        active = store.active.material if store.active else store.records[-1].material
        mode = MODE_FLAGS[args.mode] if args.mode else active.mode
        epoch_id = rekey(store, _deriver(config, guarded, mode, active.context))
        summary = store.get(epoch_id).summary()
    _emit(config, summary)
    return 0


def cmd_erase(config):
    args = config.args
    with Keystore.open(config.keystore) as store:
        if args.epoch is not None:
            confirmations = [secure_erase(store, args.epoch)]
        else:
            confirmations = retire_and_erase(store, keep=args.keep)
    erased = [c.epoch_id for c in confirmations]
    _emit(config, {'erased': erased}, text=f'erased epochs: {erased}')
    return 0


def cmd_encrypt(config):
    args = config.args
    plaintext = Path(args.input).read_bytes()
    with Keystore.open(config.keystore) as store, _guarded(config) as guarded:
        derive = None
        if store.active is not None:
            active = store.active.material
            mode = MODE_FLAGS[args.mode] if args.mode else active.mode
            derive = _deriver(config, guarded, mode, active.context)
        container = encrypt_message(plaintext, store, config.rekey, guarded, derive=derive)
    Path(args.output).write_bytes(container.to_bytes())
    log.info('Encrypted %s under epoch %d', args.input, container.epoch_id)
    return 0


def cmd_decrypt(config):
    args = config.args
    data = Path(args.input).read_bytes()
    with Keystore.open(config.keystore) as store:
        plaintext = decrypt_message(data, store)
    Path(args.output).write_bytes(plaintext)
    return 0


def cmd_entropy_test(config):
    args = config.args
    data = Path(args.input).read_bytes()
    if args.suite == 'ent':
        report = ent_metrics(data)
        _emit(config, report.to_dict(), text=report.to_text())
        return 0
    size = args.sample_bytes
    n_samples = args.samples or max(len(data) // size, 1)
    samples = [data[i * size:(i + 1) * size] for i in range(n_samples)]
    report = nist_subset(samples, workers=args.workers)
    _emit(config, report.to_dict(), text=report.to_text())
    return 0


def cmd_monitor(config):
    args = config.args
    with _guarded(config) as guarded:
        guarded.draw_bits(args.bits)
        reports = guarded.reports
        summary = {
            'batches': len(reports),
            'failures': sum(not r.passed for r in reports),
            'reseed_events': len(guarded.reseed_events),
            'current_source': guarded.current.label,
            'min_monobit_p': min(r.monobit_p for r in reports),
            'min_runs_p': min(r.runs_p for r in reports),
            'max_longest_repeat': max(r.longest_repeat for r in reports),
        }
    _emit(config, summary)
    return 0


def bench(size_mib=64, source='sim:1'):
    """Throughput of the container path, of counter mode with and without
    whitening, and of the Von Neumann extractor.

    Output
    ------
    dict of MiB/s (cipher) and Mbit/s (extractor, raw input bits)
    """
    desc = SourceDescriptor(**parse_source_spec(source))
    data = np.zeros(size_mib * 2**20, dtype=np.uint8)
    results = {'size_mib': size_mib}

    with open_source(desc) as handle:
        material = derive_qep(handle, 'bench')
        store = Keystore()
        store.activate(material)
        policy = RekeyPolicy(t_time=10**9)

        t0 = time.perf_counter()
        container = encrypt_message(data, store, policy, handle)
        t1 = time.perf_counter()
        decrypt_message(container, store)
        t2 = time.perf_counter()
        results['encrypt_mib_s'] = size_mib / (t1 - t0)
        results['decrypt_mib_s'] = size_mib / (t2 - t1)

        nonce = bytes(12)
        for name, keys in (('ctr_whitened_mib_s', to_round_keys(material)),
                           ('ctr_zero_whitening_mib_s', expand_key(material.master))):
            t0 = time.perf_counter()
            ctr_xor(data, keys, nonce)
            results[name] = size_mib / (time.perf_counter() - t0)
        results['whitening_ratio'] = results['ctr_whitened_mib_s'] / results['ctr_zero_whitening_mib_s']

    with open_source(desc) as handle:
        extractor = VonNeumannExtractor(handle, chunk_bits=2**20)
        t0 = time.perf_counter()
        extractor.read(2**20)
        elapsed = time.perf_counter() - t0
        results['extractor_mbit_s'] = extractor.source_bits_consumed / elapsed / 1e6
        extractor.erase()

    material.erase()
    return results


def cmd_bench(config):
    args = config.args
    _emit(config, bench(size_mib=args.size_mib, source=args.source))
    return 0


def cmd_status(config):
    with Keystore.open(config.keystore) as store:
        epochs = [record.summary() for record in store.records]
    lines = [f"{e['epoch_id']:>6}  {e['status']:<8} {e['mode']}  {e['created_at']}  {e['context']}"
             for e in epochs]
    _emit(config, {'epochs': epochs}, text='\n'.join(lines) or 'no epochs')
    return 0


COMMANDS = {
    'keygen': cmd_keygen,
    'rekey': cmd_rekey,
    'erase': cmd_erase,
    'encrypt': cmd_encrypt,
    'decrypt': cmd_decrypt,
    'entropy-test': cmd_entropy_test,
    'monitor': cmd_monitor,
    'bench': cmd_bench,
    'status': cmd_status,
}


# ================================== Entry ===================================


def _error(exc):
    print(json.dumps({'error': type(exc).__name__, 'message': str(exc)}), file=sys.stderr)


def run(argv=None):
    """Run the command line and return the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = build_config(args)
    except SystemExit as exc:   # --help
        return exc.code or 0
    except (UsageError, ValueError) as exc:
        _error(exc)
        return 1

    if args.verbose:
        logging.basicConfig(level=logging.DEBUG if args.verbose > 1 else logging.INFO,
                            format='%(levelname)s %(name)s: %(message)s')
    event_log = EventLog(args.event_log) if args.event_log else None
    try:
        return COMMANDS[config.subcommand](config)
    except QeaesError as exc:
        _error(exc)
        return 2
    except OSError as exc:
        _error(exc)
        return 2
    finally:
        if event_log is not None:
            event_log.close()


def main():
    sys.exit(run(sys.argv[1:]))
