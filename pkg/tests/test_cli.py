"""Tests of the qeaes command line."""

import json

import numpy as np
import pytest

from qeaes.cli import run, build_parser, bench
from qeaes.cipher import CipherContainer, Keystore
from qeaes.entropy import SourceDescriptor, VonNeumannExtractor, guard_stream, open_source


@pytest.fixture
def keystore(tmp_path, capsys):
    path = tmp_path / 'keys.qeks'
    assert run(['keygen', '--keystore', str(path), '--source', 'sim:7',
                '--context', 'host1', '--report', 'json']) == 0
    return path


def last_json(text):
    return json.loads(text[text.index('{'):])


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


# ============================== Test Parsing ================================

def test_parser_1():
    args = build_parser().parse_args(['encrypt', '--in', 'a', '--out', 'b'])
    assert args.t_time == 86400 and args.t_block == 0
    assert args.source == 'os'

def test_usage_1(capsys):
    assert run([]) == 1
    assert run(['encrypt']) == 1
    assert run(['frobnicate']) == 1

def test_usage_2(capsys, tmp_path):
    assert run(['keygen', '--keystore', str(tmp_path / 'k'), '--source', 'usb:0']) == 1
    assert error_of(capsys)['error'] == 'ValueError'

def test_usage_3(capsys, tmp_path):
    assert run(['keygen', '--keystore', str(tmp_path / 'k'), '--alpha', '0.5']) == 1
    assert error_of(capsys)['error'] == 'InvalidPolicy'

def test_usage_4(capsys, tmp_path):
    args = ['--keystore', str(tmp_path / 'k'), '--in', 'a', '--out', 'b']
    assert run(['encrypt', *args, '--t-time', '0']) == 1
    assert error_of(capsys)['error'] == 'InvalidPolicy'

def test_usage_5(capsys, monkeypatch):
    monkeypatch.delenv('QEAES_KEYSTORE', raising=False)
    assert run(['status']) == 1
    assert error_of(capsys)['error'] == 'UsageError'

def test_usage_6(capsys, tmp_path):
    data = tmp_path / 'random.bin'
    data.write_bytes(bytes(1000))
    for argv, flag in ((['monitor', '--source', 'sim:1', '--bits', '0'], '--bits'),
                       (['entropy-test', '--input', str(data), '--suite', 'nist',
                         '--sample-bytes', '0'], '--sample-bytes'),
                       (['entropy-test', '--input', str(data), '--workers', '0'], '--workers')):
        assert run(argv) == 1
        error = error_of(capsys)
        assert error['error'] == 'UsageError'
        assert flag in error['message']

def test_help_1(capsys):
    assert run(['--help']) == 0
    assert 'keygen' in capsys.readouterr().out

# ========================= Test Keys & Encryption ===========================

def test_keygen_1(keystore, capsys):
    out = last_json(capsys.readouterr().out)
    assert out['epoch_id'] == 1 and out['mode'] == 'QEP' and out['status'] == 'Active'
    assert out['grover_exponent'] == 1088
    with Keystore.open(keystore) as store:
        assert store.active.material.context == 'host1'

def test_keygen_2(keystore, capsys):
    assert run(['keygen', '--keystore', str(keystore), '--source', 'sim:8']) == 2
    assert error_of(capsys)['error'] == 'IoError'

def test_keygen_3(tmp_path, capsys):
    path = tmp_path / 'keys.qeks'
    assert run(['keygen', '--keystore', str(path), '--mode', 'h', '--source', 'sim:9']) == 0
    with Keystore.open(path) as store:
        assert store.active.material.mode == 'QEH'

def test_encrypt_1(keystore, tmp_path):
    plain, sealed, opened = tmp_path / 'plain', tmp_path / 'sealed', tmp_path / 'opened'
    plain.write_bytes(np.random.default_rng(40).bytes(100_000))
    assert run(['encrypt', '--keystore', str(keystore), '--in', str(plain),
                '--out', str(sealed), '--source', 'sim:40']) == 0
    assert sealed.read_bytes()[:4] == b'QEA1'
    assert run(['decrypt', '--keystore', str(keystore), '--in', str(sealed), '--out', str(opened)]) == 0
    assert opened.read_bytes() == plain.read_bytes()

def test_encrypt_2(keystore, tmp_path, monkeypatch):
    monkeypatch.setenv('QEAES_KEYSTORE', str(keystore))
    plain, sealed, opened = tmp_path / 'plain', tmp_path / 'sealed', tmp_path / 'opened'
    plain.write_bytes(b'')
    assert run(['encrypt', '--in', str(plain), '--out', str(sealed)]) == 0
    assert run(['decrypt', '--in', str(sealed), '--out', str(opened)]) == 0
    assert opened.read_bytes() == b''

def test_decrypt_1(keystore, tmp_path, capsys):
    plain, sealed, opened = tmp_path / 'plain', tmp_path / 'sealed', tmp_path / 'opened'
    plain.write_bytes(b'transfer 100 EUR')
    run(['encrypt', '--keystore', str(keystore), '--in', str(plain), '--out', str(sealed)])
    data = bytearray(sealed.read_bytes())
    data[40] ^= 0x04
    sealed.write_bytes(bytes(data))
    assert run(['decrypt', '--keystore', str(keystore), '--in', str(sealed), '--out', str(opened)]) == 2
    assert error_of(capsys)['error'] == 'TagMismatch'
    assert not opened.exists()

def test_decrypt_2(tmp_path, capsys):
    missing = tmp_path / 'missing.qeks'
    plain = tmp_path / 'plain'
    plain.write_bytes(b'x')
    assert run(['decrypt', '--keystore', str(missing), '--in', str(plain), '--out', str(plain)]) == 2
    assert error_of(capsys)['error'] == 'NotFound'

def test_encrypt_3(keystore, tmp_path):
    """A block limit of one forces a new epoch for every message, across runs."""
    plain = tmp_path / 'plain'
    plain.write_bytes(bytes(32))
    for i in range(3):
        assert run(['encrypt', '--keystore', str(keystore), '--in', str(plain),
                    '--out', str(tmp_path / f'sealed{i}'), '--t-block', '1']) == 0
    epochs = [CipherContainer.from_bytes((tmp_path / f'sealed{i}').read_bytes()).epoch_id
              for i in range(3)]
    assert epochs == [1, 2, 3]
    with Keystore.open(keystore) as store:
        assert store.epochs == [1, 2, 3]
        assert store.blocks_done == 2
    assert run(['encrypt', '--keystore', str(keystore), '--in', str(plain),
                '--out', str(tmp_path / 'sealed3'), '--t-time', '1e-9']) == 0
    with Keystore.open(keystore) as store:
        assert store.epochs == [1, 2, 3, 4]

def test_encrypt_4(keystore, tmp_path):
    """Sessions replaying the key generation stream still get fresh nonces."""
    nonces = []
    for i in range(2):
        plain, sealed = tmp_path / f'plain{i}', tmp_path / f'sealed{i}'
        plain.write_bytes(bytes([i]) * 64)
        assert run(['encrypt', '--keystore', str(keystore), '--in', str(plain),
                    '--out', str(sealed), '--source', 'sim:7']) == 0
        container = CipherContainer.from_bytes(sealed.read_bytes())
        assert container.epoch_id == 1
        nonces.append(container.nonce)
    assert nonces[0] != nonces[1]
    source = open_source(SourceDescriptor('SimulatedQuantum', seed=7))
    stream = VonNeumannExtractor(guard_stream(source)).read(1024).tobytes()
    for nonce in nonces:
        assert nonce not in stream
    with Keystore.open(keystore) as store:
        assert store.messages_done == 2
        assert store.blocks_done == 8

# ========================= Test Rekey, Erase, Status ========================

def test_rekey_1(keystore, tmp_path, capsys):
    plain, sealed, opened = tmp_path / 'plain', tmp_path / 'sealed', tmp_path / 'opened'
    plain.write_bytes(b'before rekey')
    run(['encrypt', '--keystore', str(keystore), '--in', str(plain), '--out', str(sealed)])
    assert run(['rekey', '--keystore', str(keystore), '--source', 'sim:41']) == 0
    assert run(['decrypt', '--keystore', str(keystore), '--in', str(sealed), '--out', str(opened)]) == 0
    assert run(['erase', '--keystore', str(keystore), '--epoch', '1']) == 0
    capsys.readouterr()
    assert run(['decrypt', '--keystore', str(keystore), '--in', str(sealed), '--out', str(opened)]) == 2
    assert error_of(capsys)['error'] == 'KeyErased'

def test_erase_1(keystore, capsys):
    assert run(['erase', '--keystore', str(keystore), '--epoch', '1']) == 2
    assert error_of(capsys)['error'] == 'EpochActive'

def test_erase_2(keystore, capsys):
    for seed in (42, 43, 44):
        run(['rekey', '--keystore', str(keystore), '--source', f'sim:{seed}'])
    capsys.readouterr()
    assert run(['erase', '--keystore', str(keystore), '--retired', '--keep', '1', '--report', 'json']) == 0
    assert last_json(capsys.readouterr().out)['erased'] == [1, 2]

def test_status_1(keystore, capsys):
    with Keystore.open(keystore) as store:
        secrets = [store.active.material.master.tobytes().hex(),
                   store.active.material.whitening_block[:16].tobytes().hex()]
    keygen_out = capsys.readouterr().out
    assert run(['status', '--keystore', str(keystore), '--report', 'json']) == 0
    out = capsys.readouterr().out
    assert last_json(out)['epochs'][0]['status'] == 'Active'
    assert run(['status', '--keystore', str(keystore)]) == 0
    out += capsys.readouterr().out
    for secret in secrets:
        assert secret not in out
        assert secret not in keygen_out

def test_event_log_1(keystore, tmp_path):
    events = tmp_path / 'events.tsv'
    assert run(['--event-log', str(events), 'rekey', '--keystore', str(keystore), '--source', 'sim:45']) == 0
    lines = events.read_text().splitlines()
    assert any('\trekey\t' in line and line.endswith('\tActivate') for line in lines)

# ============================ Test Entropy Tools ============================

def test_entropy_test_1(tmp_path, capsys):
    zeros = tmp_path / 'zeros.bin'
    zeros.write_bytes(bytes(1000))
    assert run(['entropy-test', '--input', str(zeros), '--report', 'json']) == 0
    out = last_json(capsys.readouterr().out)
    assert out['bits_per_byte'] == 0.0
    assert out['serial_correlation'] is None

def test_entropy_test_2(tmp_path, capsys):
    zeros = tmp_path / 'zeros.bin'
    zeros.write_bytes(bytes(1000))
    assert run(['entropy-test', '--input', str(zeros)]) == 0
    assert 'undefined' in capsys.readouterr().out

def test_entropy_test_3(tmp_path, capsys):
    data = tmp_path / 'random.bin'
    data.write_bytes(np.random.default_rng(46).bytes(250_000))
    assert run(['entropy-test', '--input', str(data), '--suite', 'nist', '--report', 'json']) == 0
    out = last_json(capsys.readouterr().out)
    assert out['n_samples'] == 2
    assert set(out['pass_rate']) == {'Frequency', 'BlockFrequency', 'Runs',
                                     'CumulativeSumsForward', 'CumulativeSumsBackward'}

def test_entropy_test_4(tmp_path, capsys):
    data = tmp_path / 'short.bin'
    data.write_bytes(bytes(1000))
    assert run(['entropy-test', '--input', str(data), '--suite', 'nist']) == 2
    assert error_of(capsys)['error'] == 'SampleTooShort'

def test_monitor_1(capsys):
    args = ['monitor', '--source', 'sim:1:1.0', '--backup', 'sim:2', '--bits', '100000', '--report', 'json']
    assert run(args) == 0
    out = last_json(capsys.readouterr().out)
    assert out['reseed_events'] == 1
    assert out['failures'] == 1
    assert out['current_source'] == 'sim:2'

def test_monitor_2(capsys):
    assert run(['monitor', '--source', 'sim:1:1.0', '--action', 'halt']) == 2
    assert error_of(capsys)['error'] == 'HealthFailure'

def test_bench_1():
    results = bench(size_mib=1, source='sim:3')
    for key in ('encrypt_mib_s', 'decrypt_mib_s', 'ctr_whitened_mib_s',
                'ctr_zero_whitening_mib_s', 'extractor_mbit_s'):
        assert results[key] > 0

@pytest.mark.slow
def test_bench_2():
    """Whitening adds no per-block work: same counter-mode throughput."""
    results = bench(size_mib=64)
    assert abs(results['whitening_ratio'] - 1) < 0.05
