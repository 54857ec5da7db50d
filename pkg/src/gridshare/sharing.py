"""(N,N) additive secret sharing over a prime field with fixed-point
encoding of signed kWh quantities."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import (
    EncodingRangeError,
    IncompleteSharesError,
    InvalidPartyCountError,
)

# Modulus used for negotiation-round aggregation. The commitment group
# order (~20 bits by default) cannot hold transient per-iteration sums,
# which reach a few hundred kWh at scale 10^4 before the price settles,
# so those rounds share over a wide fixed prime instead. 2^61 - 1.
NEGOTIATION_MODULUS = 2305843009213693951

DEFAULT_SCALE = 10_000


@dataclass(frozen=True)
class FixedPointCodec:
    """Maps signed real kWh values into Z_p via value*scale, centered:
    negatives occupy the upper half of the field."""

    modulus: int
    scale: int = DEFAULT_SCALE

    def __post_init__(self):
        if self.modulus < 3:
            raise EncodingRangeError("modulus too small for signed encoding")
        if self.scale < 1:
            raise EncodingRangeError("scale must be positive")

    @property
    def max_magnitude(self):
        """Largest |x| with a faithful round trip."""
        return (self.modulus - 1) // (2 * self.scale)

    def encode(self, x, check_range=True):
        """round(x*scale) mod p, rounding half away from zero.

        With check_range=False the value may wrap; only sums whose true
        magnitude stays under p/2 decode meaningfully afterwards.
        """
        scaled = x * self.scale
        m = int(abs(scaled) + 0.5)
        if check_range and 2 * m >= self.modulus:
            raise EncodingRangeError(
                f"|{x}| * {self.scale} exceeds the centered range of "
                f"modulus {self.modulus}")
        if scaled < 0:
            m = -m
        return m % self.modulus

    def decode(self, v):
        """Inverse of encode for values whose centered magnitude < p/2."""
        v %= self.modulus
        if v > self.modulus // 2:
            v -= self.modulus
        return v / self.scale


def encode_fixed(x, codec):
    return codec.encode(x)


def decode_fixed(v, codec):
    return codec.decode(v)


def split(secret, n_parties, modulus, rng):
    """Share `secret` into n_parties uniform summands mod `modulus`.

    The first n_parties-1 shares are uniform; the last completes the sum.
    """
    if n_parties < 2:
        raise InvalidPartyCountError(f"need >= 2 parties, got {n_parties}")
    shares = [rng.randrange(modulus) for _ in range(n_parties - 1)]
    shares.append((secret - sum(shares)) % modulus)
    return shares


def reconstruct(shares, modulus, n_parties=None):
    """Sum of all N shares mod p; every share is required."""
    if n_parties is not None and len(shares) != n_parties:
        raise IncompleteSharesError(
            f"expected {n_parties} shares, got {len(shares)}")
    if not shares:
        raise IncompleteSharesError("no shares given")
    return sum(shares) % modulus


def aggregate_received(shares_from_all, modulus, n_parties):
    """One participant's sum of the N shares it received (one per peer,
    including its own)."""
    if len(shares_from_all) != n_parties:
        raise IncompleteSharesError(
            f"expected one contribution from each of {n_parties} parties, "
            f"got {len(shares_from_all)}")
    return sum(shares_from_all) % modulus
