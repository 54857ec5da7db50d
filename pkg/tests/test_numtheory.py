import random

import pytest

from gridshare import numtheory
from gridshare.errors import InvalidModulusError, InvalidParametersError
from tests.conftest import TEST_MR_ROUNDS


def test_mod_pow_hand_values():
    assert numtheory.mod_pow(3, 2, 11) == 9
    assert numtheory.mod_pow(7, 0, 13) == 1
    assert (numtheory.mod_pow(3, 3, 11) * numtheory.mod_pow(4, 4, 11)) % 11 == 4


def test_mod_pow_matches_naive_multiplication():
    rng = random.Random(0)
    for _ in range(20):
        modulus = rng.randrange(2, 1 << 16)
        base = rng.randrange(modulus)
        acc = 1 % modulus
        for exponent in range(1 << 10):
            assert numtheory.mod_pow(base, exponent, modulus) == acc
            acc = (acc * base) % modulus


def test_mod_pow_rejects_bad_inputs():
    with pytest.raises(InvalidModulusError):
        numtheory.mod_pow(2, 3, 1)
    with pytest.raises(InvalidParametersError):
        numtheory.mod_pow(2, -1, 7)


def _is_prime_trial(n):
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


def test_is_probable_prime_known_values():
    rng = random.Random(1)
    assert numtheory.is_probable_prime(11, TEST_MR_ROUNDS, rng)
    assert not numtheory.is_probable_prime(12, TEST_MR_ROUNDS, rng)
    assert numtheory.is_probable_prime(2**31 - 1, TEST_MR_ROUNDS, rng)
    assert _is_prime_trial(2**31 - 1)


def test_is_probable_prime_matches_trial_division():
    rng = random.Random(2)
    for n in range(2, 20_000):
        assert numtheory.is_probable_prime(n, 16, rng) == _is_prime_trial(n), n


def test_gen_prime_pair_structure_and_bits():
    rng = random.Random(3)
    p, q, b = numtheory.gen_prime_pair(20, 40, rng, rounds=TEST_MR_ROUNDS)
    assert q == b * p + 1
    assert p.bit_length() == 20
    assert q.bit_length() == 60
    assert numtheory.is_probable_prime(p, TEST_MR_ROUNDS)
    assert numtheory.is_probable_prime(q, TEST_MR_ROUNDS)


def test_gen_prime_pair_deterministic():
    first = numtheory.gen_prime_pair(16, 16, random.Random(4),
                                     rounds=TEST_MR_ROUNDS)
    second = numtheory.gen_prime_pair(16, 16, random.Random(4),
                                      rounds=TEST_MR_ROUNDS)
    assert first == second


def test_gen_prime_pair_rejects_tiny_sizes():
    with pytest.raises(InvalidParametersError):
        numtheory.gen_prime_pair(3, 2, random.Random(0))


def test_faithful_group_enumeration_toy():
    group = numtheory.build_group(5, 11, 2, mode="faithful")
    assert group.elements == {1, 3, 4, 5, 9}
    for x in group.elements:
        assert pow(x, 5, 11) == 1


def test_fast_and_faithful_membership_agree():
    rng = random.Random(5)
    faithful = numtheory.build_group(5, 11, 2, mode="faithful")
    fast = numtheory.build_group(5, 11, 2, mode="fast")
    for _ in range(1000):
        x = fast.sample(rng)
        assert x in faithful.elements
        assert fast.contains(x)


def test_fast_mode_samples_are_subgroup_members():
    rng = random.Random(5)
    p, q, b = numtheory.gen_prime_pair(12, 12, rng, rounds=TEST_MR_ROUNDS)
    fast = numtheory.build_group(p, q, b, mode="fast")
    for _ in range(1000):
        x = fast.sample(rng)
        assert fast.contains(x)
        assert pow(x, p, q) == 1


def test_faithful_mode_rejects_short_enumeration():
    # p=5, q=31, b=6: i^6 mod 31 for i=1..5 yields only {1, 2, 4, 16}.
    with pytest.raises(InvalidParametersError):
        numtheory.build_group(5, 31, 6, mode="faithful")
    with pytest.raises(InvalidParametersError):
        numtheory.build_group(5, 12, 2, mode="faithful")   # q != b*p + 1


def test_pick_generators_are_subgroup_members():
    group = numtheory.build_group(5, 11, 2, mode="faithful")
    rng = random.Random(6)
    g, h = numtheory.pick_generators(group, rng)
    assert g != h and g != 1 and h != 1
    assert pow(g, 5, 11) == 1 and pow(h, 5, 11) == 1
    again = numtheory.pick_generators(group, random.Random(6))
    assert (g, h) == again


def test_group_params_validate_and_serialize(toy_key):
    toy_key.validate(rounds=TEST_MR_ROUNDS)
    parsed = numtheory.GroupParams.parse(toy_key.serialize())
    assert parsed == toy_key
    with pytest.raises(InvalidParametersError):
        numtheory.GroupParams(q=11, p=5, b=2, g=3, h=3).validate()


def test_broadcast_bits_model(full_key):
    assert full_key.bits_q == 1020
    assert full_key.bits_p == 20
    assert full_key.broadcast_bits == 3 * 1020 + 20
    assert abs(full_key.broadcast_bits / 8 / 1024 - 0.376) < 0.001


def test_generate_group_params_deterministic():
    a = numtheory.generate_group_params(12, 12, random.Random(7),
                                        rounds=TEST_MR_ROUNDS)
    b = numtheory.generate_group_params(12, 12, random.Random(7),
                                        rounds=TEST_MR_ROUNDS)
    assert a == b
    a.validate(rounds=TEST_MR_ROUNDS)
