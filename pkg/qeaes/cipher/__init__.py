"""Whitened AES-256, epoch key material, lifecycle and message container."""

from .aes import BlockKey256, RoundKeySet, expand_key, encrypt_block, decrypt_block
from .schedule import EpochKeyMaterial, derive_qep, derive_qeh, deriver
from .schedule import to_round_keys, key_space_bits
from .lifecycle import RekeyPolicy, Keystore, EpochRecord, ErasureConfirmation
from .lifecycle import advance_if_due, rekey, secure_erase, lookup_epoch, retire_and_erase
from .container import CipherContainer, encrypt_message, decrypt_message, keystream, ctr_xor
from .container import derive_nonce
