"""Tests of whitened AES-256, epoch key material and the message container."""

import numpy as np
import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from qeaes import CONFIG, sub_bytes, nist_test
from qeaes.cipher import BlockKey256, RoundKeySet, expand_key, encrypt_block, decrypt_block
from qeaes.cipher import EpochKeyMaterial, derive_qep, derive_qeh, to_round_keys, key_space_bits
from qeaes.cipher import Keystore, RekeyPolicy, CipherContainer, encrypt_message, decrypt_message
from qeaes.cipher import keystream, ctr_xor, derive_nonce
from qeaes.cipher import container as container_module
from qeaes.cipher import schedule as schedule_module
from qeaes.entropy import SourceDescriptor, open_source, register_provider, guard_stream, check_batch
from qeaes.errors import (
    BadMagic, MalformedContainer, MessageTooLong, QeaesError, SourceExhausted,
    TagMismatch, UnsupportedVersion,
)

KEY = bytes(range(32))
T0 = 1_700_000_000
PLAINTEXT = bytes.fromhex('00112233445566778899aabbccddeeff')
CIPHERTEXT = bytes.fromhex('8ea2b7ca516745bfeafc49904b496089')


def sim(seed, bias=0.5):
    return open_source(SourceDescriptor('SimulatedQuantum', seed=seed, bias=bias))


def stock_aes_ecb(key, data):
    encryptor = Cipher(algorithms.AES(key), modes.ECB()).encryptor()
    return encryptor.update(data) + encryptor.finalize()


def random_whitening(rng):
    return rng.integers(0, 256, size=240, dtype=np.uint8)


# ============================== Test SubBytes ===============================

def test_sub_bytes_1():
    assert sub_bytes.sources == ('table', 'algebraic')
    assert sub_bytes.default_source == 'table'

def test_sub_bytes_2():
    x = np.arange(256, dtype=np.uint8)
    assert np.array_equal(sub_bytes(x, source='table'), sub_bytes(x, source='algebraic'))
    assert np.array_equal(sub_bytes(x, inverse=True, source='table'),
                          sub_bytes(x, inverse=True, source='algebraic'))

def test_sub_bytes_3():
    x = np.array([0x00, 0x53, 0xff], dtype=np.uint8)
    assert list(sub_bytes(x)) == [0x63, 0xed, 0x16]

def test_sub_bytes_4():
    x = np.arange(256, dtype=np.uint8)
    assert np.array_equal(sub_bytes(sub_bytes(x), inverse=True), x)

def test_sub_bytes_5():
    CONFIG["constant time sbox"] = True
    try:
        assert sub_bytes.default_source == 'algebraic'
        assert encrypt_block(PLAINTEXT, expand_key(KEY)) == CIPHERTEXT
    finally:
        CONFIG["constant time sbox"] = False

# ============================ Test Key Expansion ============================

def test_expand_key_1():
    keys = expand_key(KEY)
    assert keys.standard[0].tobytes() == KEY[:16]
    assert keys.standard[1].tobytes() == KEY[16:]
    assert not keys.whitening.any()
    assert np.array_equal(keys.whitened, keys.standard)

def test_expand_key_2():
    """Round keys of the AES-256 example vector of FIPS 197 (appendix C.3)."""
    keys = expand_key(KEY)
    assert keys.standard[2].tobytes().hex() == 'a573c29fa176c498a97fce93a572c09c'
    assert keys.standard[14].tobytes().hex() == '24fc79ccbf0979e9371ac23c6d68de36'

def test_expand_key_3():
    """Key expansion example of FIPS 197 (appendix A.3)."""
    key = bytes.fromhex('603deb1015ca71be2b73aef0857d77811f352c073b6108d72d9810a30914dff4')
    keys = expand_key(key)
    assert keys.standard[2].tobytes().hex() == '9ba354118e6925afa51a8b5f2067fcde'
    assert keys.standard[14].tobytes().hex() == 'fe4890d1e6188d0b046df344706c631e'

def test_expand_key_4():
    k1, k2 = expand_key(KEY), expand_key(KEY)
    assert np.array_equal(k1.standard, k2.standard)
    assert np.array_equal(expand_key(KEY, source='algebraic').standard, k1.standard)

def test_expand_key_5():
    with pytest.raises(ValueError):
        expand_key(bytes(16))

def test_round_keys_1():
    keys = expand_key(KEY)
    with pytest.raises(ValueError):
        keys.whitened[0, 0] = 1

def test_round_keys_2():
    rng = np.random.default_rng(1)
    whitening = random_whitening(rng)
    keys = expand_key(KEY).with_whitening(whitening)
    assert np.array_equal(keys.whitened, keys.standard ^ whitening.reshape(15, 16))
    assert keys.is_whitened

def test_round_keys_3():
    with pytest.raises(ValueError):
        RoundKeySet.build(expand_key(KEY).standard, whitening=bytes(16))

def test_block_key_1():
    key = BlockKey256(bytearray(KEY))
    assert 'secret' in repr(key)
    assert encrypt_block(PLAINTEXT, expand_key(key)) == CIPHERTEXT
    key.erase()
    assert key.erased

def test_block_key_2():
    with pytest.raises(ValueError):
        BlockKey256(bytes(31))

# ============================ Test Block Cipher =============================

def test_encrypt_1():
    assert encrypt_block(PLAINTEXT, expand_key(KEY)) == CIPHERTEXT

def test_encrypt_2():
    assert encrypt_block(PLAINTEXT, expand_key(KEY), source='algebraic') == CIPHERTEXT

def test_decrypt_1():
    assert decrypt_block(CIPHERTEXT, expand_key(KEY)) == PLAINTEXT

def test_encrypt_3():
    """Zero whitening is stock AES-256."""
    rng = np.random.default_rng(2)
    for _ in range(20):
        key, data = rng.bytes(32), rng.bytes(16 * 50)
        assert encrypt_block(data, expand_key(key)) == stock_aes_ecb(key, data)

def test_encrypt_4():
    rng = np.random.default_rng(3)
    for _ in range(10):
        keys = expand_key(rng.bytes(32)).with_whitening(random_whitening(rng))
        blocks = rng.integers(0, 256, size=(1000, 16), dtype=np.uint8)
        assert np.array_equal(decrypt_block(encrypt_block(blocks, keys), keys), blocks)

def test_encrypt_5():
    rng = np.random.default_rng(4)
    keys = expand_key(rng.bytes(32)).with_whitening(random_whitening(rng))
    blocks = rng.integers(0, 256, size=(10**4, 16), dtype=np.uint8)
    out = encrypt_block(blocks, keys)
    assert out.shape == (10**4, 16)
    assert np.array_equal(out[7], np.frombuffer(encrypt_block(blocks[7].tobytes(), keys), np.uint8))

def test_encrypt_6():
    """Whitening equal to the standard schedule: all-zero round keys, still bijective."""
    keys = expand_key(KEY)
    keys_zero = keys.with_whitening(keys.standard)
    assert not keys_zero.whitened.any()
    other = expand_key(bytes(32))
    other_zero = other.with_whitening(other.standard)
    rng = np.random.default_rng(5)
    blocks = rng.integers(0, 256, size=(1000, 16), dtype=np.uint8)
    out = encrypt_block(blocks, keys_zero)
    assert np.array_equal(out, encrypt_block(blocks, other_zero))
    assert np.array_equal(decrypt_block(out, keys_zero), blocks)
    assert len({row.tobytes() for row in out}) == 1000

def test_decrypt_2():
    """Wrong whitening never decrypts."""
    rng = np.random.default_rng(6)
    standard = expand_key(rng.bytes(32))
    keys = standard.with_whitening(random_whitening(rng))
    wrong = standard.with_whitening(random_whitening(rng))
    blocks = rng.integers(0, 256, size=(10**4, 16), dtype=np.uint8)
    recovered = decrypt_block(encrypt_block(blocks, keys), wrong)
    assert not np.any(np.all(recovered == blocks, axis=1))

def test_avalanche_1():
    rng = np.random.default_rng(7)
    keys = expand_key(rng.bytes(32)).with_whitening(random_whitening(rng))
    n = 10**4
    blocks = rng.integers(0, 256, size=(n, 16), dtype=np.uint8)
    flipped = blocks.copy()
    positions = rng.integers(0, 128, size=n)
    flipped[np.arange(n), positions // 8] ^= (0x80 >> (positions % 8)).astype(np.uint8)
    diff = encrypt_block(blocks, keys) ^ encrypt_block(flipped, keys)
    mean_flips = np.unpackbits(diff, axis=1).sum(axis=1).mean()
    assert 48 <= mean_flips <= 80
    assert abs(mean_flips - 64) < 1

def test_bijectivity_1():
    rng = np.random.default_rng(8)
    keys = expand_key(rng.bytes(32)).with_whitening(random_whitening(rng))
    blocks = np.unique(rng.integers(0, 256, size=(10**5, 16), dtype=np.uint8), axis=0)
    out = encrypt_block(blocks, keys)
    assert np.unique(out, axis=0).shape[0] == blocks.shape[0]

def test_encrypt_7():
    with pytest.raises(ValueError):
        encrypt_block(bytes(15), expand_key(KEY))

# ============================ Test Key Material =============================

def test_qep_1():
    m1 = derive_qep(guard_stream(sim(7)), 'host1')
    m2 = derive_qep(guard_stream(sim(7)), 'host1')
    assert m1.same_secret(m2)
    assert m1.mode == 'QEP'
    assert m1.whitening_block.size == 240 and m1.master.size == 32

def test_qep_2():
    material = derive_qep(sim(7, bias=0.75), 'host1')
    # 272 bytes at 0.1875 extracted bits per raw bit, read in 1024-bit chunks
    assert abs(material.raw_bits_consumed - 272 * 8 / 0.1875) < 2048

def test_qep_3(tmp_path, monkeypatch):
    path = tmp_path / 'short.bin'
    path.write_bytes(sim(9).draw_bytes(600))
    erased = []
    original = schedule_module.erase

    def recording_erase(buffer):
        original(buffer)
        erased.append(buffer)

    monkeypatch.setattr(schedule_module, 'erase', recording_erase)
    with pytest.raises(SourceExhausted):
        derive_qep(open_source(SourceDescriptor('RawFile', path=str(path))), 'host1')
    assert len(erased) >= 2
    assert not any(buffer.any() for buffer in erased)

def test_qep_4():
    direct = derive_qep(sim(10), 'host1', whitening='direct')
    hashed = derive_qep(sim(10), 'host1', whitening='hashed')
    assert np.array_equal(direct.master, hashed.master)
    assert not np.array_equal(direct.whitening_block, hashed.whitening_block)

def test_qep_5():
    CONFIG["whitening"] = 'hashed'
    try:
        material = derive_qep(sim(10), 'host1')
    finally:
        CONFIG["whitening"] = 'direct'
    assert material.same_secret(derive_qep(sim(10), 'host1', whitening='hashed'))

def test_qep_6():
    assert not derive_qep(sim(11), 'hostA').same_secret(derive_qep(sim(11), 'hostB'))

def zeros_provider():
    return register_provider(lambda n: bytes(n), label='zeros')

def test_qeh_1():
    m1 = derive_qeh(guard_stream(sim(12)), zeros_provider(), 'host1')
    m2 = derive_qeh(guard_stream(sim(12)), zeros_provider(), 'host1')
    assert m1.same_secret(m2)
    assert m1.mode == 'QEH'

def test_qeh_2():
    m1 = derive_qeh(sim(12), zeros_provider(), 'hostA')
    m2 = derive_qeh(sim(12), zeros_provider(), 'hostB')
    assert not np.array_equal(m1.master, m2.master)

def test_qeh_3():
    """All-zero classical bytes: key material still passes the health checks."""
    guarded = guard_stream(sim(13))
    classical = zeros_provider()
    chunks = []
    for epoch_id in range(1, 32):
        material = derive_qeh(guarded, classical, 'host1', epoch_id=epoch_id)
        chunks += [material.master, material.whitening_block]
    bits = np.unpackbits(np.concatenate(chunks))
    assert bits.size >= 65536
    assert check_batch(bits[:65536]).passed

def test_material_1():
    material = derive_qep(sim(14), 'host1')
    text = repr(material)
    assert material.master.tobytes().hex() not in text
    assert 'master' not in text

def test_material_2():
    with pytest.raises(ValueError):
        EpochKeyMaterial('QEP', 1, 'ctx', master=bytes(31), whitening_block=bytes(240))
    with pytest.raises(ValueError):
        EpochKeyMaterial('QEX', 1, 'ctx', master=bytes(32), whitening_block=bytes(240))

def test_material_3():
    material = derive_qep(sim(14), 'host1')
    material.erase()
    assert material.erased

def test_to_round_keys_1():
    material = EpochKeyMaterial('QEP', 1, 'ctx', master=KEY, whitening_block=bytes(240))
    keys = to_round_keys(material)
    assert np.array_equal(keys.whitened, keys.standard)
    assert encrypt_block(PLAINTEXT, keys) == CIPHERTEXT

def test_to_round_keys_2():
    standard = expand_key(KEY).standard
    material = EpochKeyMaterial('QEP', 1, 'ctx', master=KEY, whitening_block=standard.reshape(-1))
    assert not to_round_keys(material).whitened.any()

def test_to_round_keys_3():
    rng = np.random.default_rng(15)
    differ = 0
    for _ in range(1000):
        key, block = rng.bytes(32), rng.bytes(16)
        plain = encrypt_block(block, expand_key(key))
        material = EpochKeyMaterial('QEH', 1, 'ctx', master=key, whitening_block=random_whitening(rng))
        differ += encrypt_block(block, to_round_keys(material)) != plain
    assert differ == 1000

def test_to_round_keys_4():
    """Whitened round keys look random even for a fixed standard schedule."""
    rng = np.random.default_rng(16)
    standard = expand_key(KEY)
    whitened = [standard.with_whitening(random_whitening(rng)).whitened[5] for _ in range(2000)]
    assert nist_test(np.unpackbits(np.concatenate(whitened))) >= 0.01

def test_key_space_1():
    bits = key_space_bits(derive_qep(sim(17), 'host1'))
    assert bits == {'secret_bits': 2176, 'classical_exponent': 2176, 'grover_exponent': 1088}
    assert key_space_bits() == bits

# ========================= Test Counter Mode & MAC ==========================

def test_keystream_1():
    """With zero whitening, the keystream is stock AES-256-CTR."""
    nonce = bytes(range(12))
    expected = Cipher(algorithms.AES(KEY), modes.CTR(nonce + b'\x00\x00\x00\x01')).encryptor()
    stream = expected.update(bytes(64))
    assert keystream(expand_key(KEY), nonce, 4).tobytes() == stream

def test_keystream_2():
    rng = np.random.default_rng(18)
    key, nonce, data = rng.bytes(32), rng.bytes(12), rng.bytes(300_001)
    encryptor = Cipher(algorithms.AES(key), modes.CTR(nonce + b'\x00\x00\x00\x01')).encryptor()
    assert ctr_xor(data, expand_key(key), nonce) == encryptor.update(data)

def memory_store(seed=20, mode='QEP'):
    guarded = guard_stream(sim(seed))
    store = Keystore()
    if mode == 'QEP':
        store.activate(derive_qep(guarded, 'host1'))
    else:
        store.activate(derive_qeh(guarded, zeros_provider(), 'host1'))
    return store, guarded

POLICY = RekeyPolicy(t_time=10**9)

def test_container_1():
    store, guarded = memory_store()
    container = encrypt_message(b'', store, POLICY, guarded)
    assert container.payload_len == 0
    assert len(container.tag) == 32
    assert decrypt_message(container.to_bytes(), store) == b''

def test_container_2():
    store, guarded = memory_store()
    message = b'attack at dawn' * 100
    container = encrypt_message(message, store, POLICY, guarded)
    data = container.to_bytes()
    assert data[:4] == b'QEA1' and data[4] == 1 and data[5] == 1
    assert int.from_bytes(data[6:14], 'big') == container.epoch_id
    assert int.from_bytes(data[26:34], 'big') == len(message)
    assert len(data) == 34 + len(message) + 32
    assert decrypt_message(data, store) == message

def test_container_3():
    store, guarded = memory_store()
    data = bytearray(encrypt_message(b'x' * 100, store, POLICY, guarded).to_bytes())
    data[40] ^= 0x01
    with pytest.raises(TagMismatch):
        decrypt_message(bytes(data), store)

def test_container_4():
    store, guarded = memory_store()
    data = encrypt_message(b'x' * 100, store, POLICY, guarded).to_bytes()
    with pytest.raises(BadMagic):
        CipherContainer.from_bytes(data[:3])
    with pytest.raises(BadMagic):
        CipherContainer.from_bytes(b'ZIP1' + data[4:])
    with pytest.raises(MalformedContainer):
        CipherContainer.from_bytes(data[:20])
    with pytest.raises(MalformedContainer):
        CipherContainer.from_bytes(data[:-1])
    with pytest.raises(UnsupportedVersion):
        CipherContainer.from_bytes(data[:4] + b'\x02' + data[5:])

def test_container_5():
    """Every single-bit change is rejected; changes outside the framing fields are TagMismatch."""
    store, guarded = memory_store()
    data = encrypt_message(b'hello', store, POLICY, guarded).to_bytes()
    for bit in range(8 * len(data)):
        tampered = bytearray(data)
        tampered[bit // 8] ^= 0x80 >> (bit % 8)
        with pytest.raises(QeaesError) as info:
            decrypt_message(bytes(tampered), store)
        if 14 <= bit // 8 < 26 or bit // 8 >= 34:    # nonce, payload, tag
            assert info.type is TagMismatch

def test_container_6():
    store, guarded = memory_store(mode='QEH')
    container = encrypt_message(b'hybrid', store, POLICY, guarded)
    assert container.mode == 'QEH'
    assert container.to_bytes()[5] == 2
    assert decrypt_message(container, store) == b'hybrid'

def test_container_7(monkeypatch):
    store, guarded = memory_store()
    monkeypatch.setattr(container_module, 'MAX_COUNTER', 2)
    encrypt_message(bytes(32), store, POLICY, guarded)
    with pytest.raises(MessageTooLong):
        encrypt_message(bytes(33), store, POLICY, guarded)

def test_container_8():
    store, guarded = memory_store()
    nonces = {encrypt_message(b'', store, POLICY, guarded).nonce for _ in range(2000)}
    assert len(nonces) == 2000

@pytest.mark.slow
def test_container_9():
    store, guarded = memory_store()
    nonces = {encrypt_message(b'', store, POLICY, guarded).nonce for _ in range(10**5)}
    assert len(nonces) == 10**5

def test_container_10():
    """Payload is plain counter mode when the whitening is zero."""
    store = Keystore()
    store.activate(EpochKeyMaterial('QEP', 1, 'ctx', master=KEY, whitening_block=bytes(240),
                                    created_at=T0))
    message = bytes(range(256)) * 3
    container = encrypt_message(message, store, POLICY, guard_stream(sim(21)), now=T0 + 5)
    encryptor = Cipher(algorithms.AES(KEY), modes.CTR(container.nonce + b'\x00\x00\x00\x01')).encryptor()
    assert container.payload == encryptor.update(message)

def test_container_11():
    """Replaying the same seeded stream still gives distinct nonces."""
    nonces = set()
    for _ in range(2):
        store, guarded = memory_store(seed=20)
        nonces.add(encrypt_message(b'same', store, POLICY, guarded).nonce)
    assert len(nonces) == 2

def test_container_12(monkeypatch):
    """Without OS bytes, the nonce still depends on epoch id and message index."""
    monkeypatch.setattr(container_module.secrets, 'token_bytes', bytes)

    def nonce(epoch_id, index):
        return derive_nonce(guard_stream(sim(22)), epoch_id, index)

    assert nonce(1, 0) == nonce(1, 0)
    assert len({nonce(1, 0), nonce(1, 1), nonce(2, 0)}) == 3
    assert len(nonce(1, 0)) == 12

def test_container_13():
    store, guarded = memory_store()
    for size in (0, 16, 17):
        encrypt_message(bytes(size), store, POLICY, guarded)
    assert store.messages_done == 3
    assert store.blocks_done == 3


def roundtrips(n_messages, max_bytes, seed):
    """Random messages in both modes, rekeying every few messages."""
    rng = np.random.default_rng(seed)
    guarded = guard_stream(sim(seed))
    store = Keystore()
    store.activate(derive_qep(guarded, 'host1'))
    policy = RekeyPolicy(t_block=max(1, max_bytes // 16 * 3))
    classical = zeros_provider()

    def derive(epoch_id, now=None):
        if epoch_id % 2:
            return derive_qep(guarded, 'host1', epoch_id=epoch_id, now=now)
        return derive_qeh(guarded, classical, 'host1', epoch_id=epoch_id, now=now)

    for _ in range(n_messages):
        message = rng.bytes(int(rng.integers(0, max_bytes + 1)))
        container = encrypt_message(message, store, policy, guarded, derive=derive)
        assert decrypt_message(container.to_bytes(), store) == message
    return store

def test_roundtrip_1():
    store = roundtrips(50, 4096, seed=22)
    assert len(store.epochs) >= 3
    assert {r.material.mode for r in store.records} == {'QEP', 'QEH'}

@pytest.mark.slow
def test_roundtrip_2():
    store = roundtrips(1000, 2**20, seed=23)
    assert len(store.epochs) >= 3
