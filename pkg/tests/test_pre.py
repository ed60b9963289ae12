import random

import pytest
from hypothesis import given, strategies as st

from crowdsense import group
from crowdsense.pre import (PreError, base_target, pre_decrypt, pre_encrypt, pre_keygen, pre_reencrypt,
                            pre_rekey, seal, unseal)

seeds = st.integers(min_value=0, max_value=2 ** 32)


@given(seeds)
def test_first_level_roundtrip(seed):
    rng = random.Random(seed)
    kp = pre_keygen(rng)
    m = group.random_target(rng)
    assert pre_decrypt(pre_encrypt(m, kp.public, rng), kp.secret) == m


@given(seeds)
def test_reencryption_chain(seed):
    rng = random.Random(seed)
    alice, bob = pre_keygen(rng, "left"), pre_keygen(rng, "right")
    m = group.random_target(rng)
    c = pre_encrypt(m, alice.public, rng)
    c2 = pre_reencrypt(c, pre_rekey(alice.secret, bob.public))
    assert pre_decrypt(c2, bob.secret) == m


def test_wrong_keys_give_other_plaintext():
    rng = random.Random(7)
    alice, bob, carol = pre_keygen(rng, "left"), pre_keygen(rng, "right"), pre_keygen(rng, "right")
    m = group.random_target(rng)
    c = pre_encrypt(m, alice.public, rng)
    assert pre_decrypt(c, bob.secret) != m
    wrong = pre_reencrypt(c, pre_rekey(alice.secret, carol.public))
    assert pre_decrypt(wrong, bob.secret) != m


def test_reencrypt_once_only():
    rng = random.Random(8)
    alice, bob = pre_keygen(rng, "left"), pre_keygen(rng, "right")
    c2 = pre_reencrypt(pre_encrypt(base_target(), alice.public, rng), pre_rekey(alice.secret, bob.public))
    with pytest.raises(PreError):
        pre_reencrypt(c2, bob.public)
    with pytest.raises(PreError):
        pre_rekey(0, bob.public)


def test_explicit_randomness_is_deterministic():
    kp = pre_keygen(random.Random(1))
    assert pre_encrypt(base_target(), kp.public, k=5) == pre_encrypt(base_target(), kp.public, k=5)


def test_seal_binds_key_and_aad():
    rng = random.Random(2)
    key, other = group.random_target(rng), group.random_target(rng)
    blob = seal(b"payload", key, b"ctx")
    assert unseal(blob, key, b"ctx") == b"payload"
    with pytest.raises(PreError):
        unseal(blob, other, b"ctx")
    with pytest.raises(PreError):
        unseal(blob, key, b"other ctx")
    with pytest.raises(PreError):
        unseal(blob[:-1] + bytes([blob[-1] ^ 1]), key, b"ctx")
