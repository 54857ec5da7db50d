"""Arbitrary-precision modular arithmetic and commitment-group construction.

Builds the prime-order subgroup used by the commitment scheme: primes
p, q with q = b*p + 1 and two generators of the order-p subgroup of Z_q*.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .errors import (
    GenerationFailureError,
    InvalidModulusError,
    InvalidParametersError,
)

# Miller-Rabin round count used when verifying generated primes.
DEFAULT_MR_ROUNDS = 5000

_SMALL_PRIMES = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
                 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
                 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173]


def mod_pow(base, exponent, modulus):
    """base**exponent mod modulus, canonical representative in [0, modulus)."""
    if modulus < 2:
        raise InvalidModulusError(f"modulus must be >= 2, got {modulus}")
    if exponent < 0:
        raise InvalidParametersError("negative exponents are not supported")
    return pow(base % modulus, exponent, modulus)


def is_probable_prime(n, rounds=DEFAULT_MR_ROUNDS, rng=None):
    """Miller-Rabin primality test with random witnesses.

    Returns False for certain composites; True means prime except with
    probability <= 4**(-rounds). Witnesses are drawn from `rng` so runs
    are reproducible; an unseeded source is used when none is given.
    """
    if rounds < 1:
        raise InvalidParametersError("rounds must be >= 1")
    if n < 2:
        return False
    for sp in _SMALL_PRIMES:
        if n == sp:
            return True
        if n % sp == 0:
            return False
    if rng is None:
        rng = random
    d = n - 1
    r = 0
    while d % 2 == 0:
        d //= 2
        r += 1
    for _ in range(rounds):
        a = rng.randrange(2, n - 1)
        x = pow(a, d, n)
        if x == 1 or x == n - 1:
            continue
        for _ in range(r - 1):
            x = pow(x, 2, n)
            if x == n - 1:
                break
        else:
            return False
    return True


def _random_prime(bits, rng, rounds):
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(cand, rounds, rng):
            return cand


def gen_prime_pair(bits_p, bits_b, rng, rounds=DEFAULT_MR_ROUNDS,
                   max_p_attempts=50):
    """Find primes (p, q) with q = b*p + 1 and a random cofactor b.

    p has exactly bits_p bits and q exactly bits_p + bits_b bits (b is
    resampled until the product lands on the target length, which keeps
    downstream size accounting deterministic). The search fixes p first
    and resamples b up to 10*bits_b times before giving up on that p.
    """
    if bits_p < 8 or bits_b < 8:
        raise InvalidParametersError("bits_p and bits_b must each be >= 8")
    bits_q = bits_p + bits_b
    for _ in range(max_p_attempts):
        p = _random_prime(bits_p, rng, rounds)
        for _ in range(10 * bits_b):
            b = rng.getrandbits(bits_b) | (1 << (bits_b - 1))
            q = b * p + 1
            if q.bit_length() != bits_q:
                continue
            if is_probable_prime(q, rounds, rng):
                return p, q, b
    raise GenerationFailureError(
        f"no prime pair found for bits_p={bits_p}, bits_b={bits_b}")


class Group:
    """The order-p subgroup of Z_q*, materialized or sampled.

    `faithful` mode enumerates i^b mod q for i = 1..p and checks that
    exactly p distinct elements appear. `fast` mode only exposes a
    sampler that maps random i in Z_q\\{0} through i^b mod q.
    """

    def __init__(self, p, q, b, mode="fast"):
        if b * p + 1 != q:
            raise InvalidParametersError("q != b*p + 1")
        if mode not in ("faithful", "fast"):
            raise InvalidParametersError(f"unknown group mode {mode!r}")
        self.p = p
        self.q = q
        self.b = b
        self.mode = mode
        self.elements = None
        if mode == "faithful":
            elems = {pow(i, b, q) for i in range(1, p + 1)}
            if len(elems) != p:
                raise InvalidParametersError(
                    f"enumeration found {len(elems)} elements, expected {p}")
            self.elements = elems

    def sample(self, rng):
        if self.elements is not None:
            return rng.choice(sorted(self.elements))
        i = rng.randrange(1, self.q)
        return pow(i, self.b, self.q)

    def contains(self, x):
        return 0 < x < self.q and pow(x, self.p, self.q) == 1


def build_group(p, q, b, mode="fast"):
    """Construct the subgroup for verified (p, q, b)."""
    return Group(p, q, b, mode=mode)


def pick_generators(group, rng):
    """Draw two distinct non-identity elements; both generate the group
    since its order is prime."""
    if group.p < 3:
        raise InvalidParametersError(
            "group too small to pick two distinct non-identity elements")
    g = 1
    while g == 1:
        g = group.sample(rng)
    h = 1
    while h == 1 or h == g:
        h = group.sample(rng)
    return g, h


@dataclass(frozen=True)
class GroupParams:
    """Commitment key ck = (G, q, p, g, h) with q = b*p + 1."""

    q: int
    p: int
    b: int
    g: int
    h: int

    @property
    def bits_q(self):
        return self.q.bit_length()

    @property
    def bits_p(self):
        return self.p.bit_length()

    @property
    def broadcast_bits(self):
        # q, g, h each travel as bits_q-bit values, p as bits_p bits.
        return 3 * self.bits_q + self.bits_p

    def validate(self, rounds=64, rng=None):
        if self.b * self.p + 1 != self.q:
            raise InvalidParametersError("q != b*p + 1")
        rng = rng or random.Random(0)
        for name, n in (("q", self.q), ("p", self.p)):
            if not is_probable_prime(n, rounds, rng):
                raise InvalidParametersError(f"{name} is not prime")
        for name, x in (("g", self.g), ("h", self.h)):
            if x in (0, 1) or pow(x, self.p, self.q) != 1:
                raise InvalidParametersError(f"{name} is not a non-identity "
                                             "element of the subgroup")
        if self.g == self.h:
            raise InvalidParametersError("g and h must differ")
        return self

    def serialize(self):
        """Text key-value record, decimal values, reusable across runs."""
        lines = [f"{k} = {getattr(self, k)}" for k in ("q", "p", "b", "g", "h")]
        return "\n".join(lines) + "\n"

    @classmethod
    def parse(cls, text):
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = int(value.strip())
        missing = {"q", "p", "b", "g", "h"} - set(fields)
        if missing:
            raise InvalidParametersError(f"missing key fields: {sorted(missing)}")
        return cls(**{k: fields[k] for k in ("q", "p", "b", "g", "h")})


def generate_group_params(bits_p, bits_b, rng, mode="fast",
                          rounds=DEFAULT_MR_ROUNDS):
    """Full key generation: prime pair, subgroup, two generators."""
    p, q, b = gen_prime_pair(bits_p, bits_b, rng, rounds=rounds)
    group = build_group(p, q, b, mode=mode)
    g, h = pick_generators(group, rng)
    return GroupParams(q=q, p=p, b=b, g=g, h=h)
