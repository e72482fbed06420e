"""Prime-order multiplicative group arithmetic and the XOR block domain.

Scalars are ints in [0, q), group elements ints in [1, p) inside the
order-q subgroup, and the XOR domain is raw 32-byte strings. All exponent
and share arithmetic is done mod q so every inverse and interpolation is
well defined; the hash is SHA-256 over length-prefixed, domain-tagged
input so distinct call sites cannot collide.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache

from .counters import tick
from .errors import (
    DuplicateAbscissa,
    InvalidGroup,
    MalformedMessage,
    OutOfRange,
    ZeroAbscissa,
    ZeroInverse,
)

try:
    import gmpy2

    def _powmod(base: int, e: int, m: int) -> int:
        return int(gmpy2.powmod(base, e, m))

    def _is_prime(n: int) -> bool:
        return bool(gmpy2.is_prime(n))

except ImportError:  # pragma: no cover - gmpy2 is a declared dependency

    def _powmod(base: int, e: int, m: int) -> int:
        return pow(base, e, m)

    def _is_prime(n: int, rounds: int = 40) -> bool:
        if n < 2:
            return False
        for small in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
            if n % small == 0:
                return n == small
        d, r = n - 1, 0
        while d % 2 == 0:
            d //= 2
            r += 1
        import random as _random

        rng = _random.Random(0xC0FFEE)
        for _ in range(rounds):
            a = rng.randrange(2, n - 1)
            x = pow(a, d, n)
            if x in (1, n - 1):
                continue
            for _ in range(r - 1):
                x = x * x % n
                if x == n - 1:
                    break
            else:
                return False
        return True


BLOCK = 32
ZERO_BLOCK = b"\x00" * BLOCK

# Domain-separation labels used by the suite; published in PublicParams.
HASH_TAGS = (
    "pid",
    "cjt",
    "w",
    "elem",
    "mask",
    "key-t",
    "k-tag",
    "result-accept",
    "result-fallback",
    "result-scalar",
    "peer-q",
    "peer-ack",
    "confirm",
    "nuav-verify",
    "transfer",
    "sk-mask",
    "rekey-x",
    "rekey-confirm",
    "store-ack",
    "keystream",
    "seed",
)


@dataclass(frozen=True)
class GroupParams:
    """Schnorr group: prime p, prime q | p-1, g of order q."""

    p: int
    q: int
    g: int

    def __post_init__(self):
        if self.q >= 1 << 256:
            raise InvalidGroup("q must fit the 32-byte scalar encoding")
        if not _is_prime(self.q):
            raise InvalidGroup("q is not prime")
        if not _is_prime(self.p):
            raise InvalidGroup("p is not prime")
        if (self.p - 1) % self.q != 0:
            raise InvalidGroup("q does not divide p-1")
        if self.g in (0, 1) or _powmod(self.g, self.q, self.p) != 1:
            raise InvalidGroup("g does not generate the order-q subgroup")

    @property
    def elem_bytes(self) -> int:
        return (self.p.bit_length() + 7) // 8

    # group element arithmetic -------------------------------------------
    def exp(self, base: int, e: int) -> int:
        tick("t_me")
        return _powmod(base, e % self.q, self.p)

    def mul(self, a: int, b: int) -> int:
        tick("t_mm")
        return a * b % self.p

    def prod(self, elems) -> int:
        out = 1
        for e in elems:
            out = self.mul(out, e)
        return out

    def is_element(self, a: int) -> bool:
        if not 1 <= a < self.p:
            return False
        tick("t_me")
        return _powmod(a, self.q, self.p) == 1

    # scalar (mod q) arithmetic ------------------------------------------
    def scalar_inv(self, x: int) -> int:
        x %= self.q
        if x == 0:
            raise ZeroInverse("0 has no inverse mod q")
        tick("t_me")
        return _powmod(x, self.q - 2, self.q)

    def scalar_mul(self, a: int, b: int) -> int:
        tick("t_mm")
        return a * b % self.q

    def rand_scalar(self, rng, nonzero: bool = True) -> int:
        lo = 1 if nonzero else 0
        return rng.randrange(lo, self.q)

    def rand_elem(self, rng) -> int:
        return self.exp(self.g, self.rand_scalar(rng))

    # canonical encodings -------------------------------------------------
    def encode_elem(self, x: int) -> bytes:
        return x.to_bytes(self.elem_bytes, "big")

    def decode_elem(self, b: bytes) -> int:
        if len(b) != self.elem_bytes:
            raise MalformedMessage("bad element length")
        x = int.from_bytes(b, "big")
        if not self.is_element(x):
            raise MalformedMessage("value outside the order-q subgroup")
        return x


def tiny_group() -> GroupParams:
    """p=23, q=11, g=2: small enough for exhaustive oracles."""
    return _preset("tiny")


def full_group() -> GroupParams:
    """2048-bit modulus with a 256-bit prime-order subgroup."""
    return _preset("full")


@lru_cache(maxsize=None)
def _preset(name: str) -> GroupParams:
    if name == "tiny":
        return GroupParams(23, 11, 2)
    if name == "full":
        return GroupParams(_FULL_P, _FULL_Q, _FULL_G)
    raise InvalidGroup(f"unknown group preset {name!r}")


# Generated by scripts/gen_group_params.py (seed 20250809).
_FULL_P = int(
    "a226b3c617daa158ec478f2af9ad477fe69548c21d534fb59209f4362562d08d"
    "749b9018343bf3541b57c5e6a0996659918cf4061c0907fc4b8b304069d64855"
    "52d30352176b1ae5e0704c134c30349d9351ca796d5a33e98b3dc84fa43d8630"
    "2ca661c989b4ae7e987bc8e749e0db0ae5d3194641817962c44dd4a5d4d9b793"
    "5ef7a117653bcfc916b123aa3e31fabc8d34573a91e1a29f5aab688103ef716b"
    "31a415f326847c1b47a240ca4a605d4b6e0ca1c3a16df9cf1f7babb6848be853"
    "d107948f2578c02c5ced19b0d7ac960881daa72f594eef2bafe3833ec34a2acd"
    "ae6d402a5916d3c3501bb7daa90871d2f75e8ef2b1e68fd67b5e4f4640e1e06d",
    16,
)
_FULL_Q = int(
    "d3c5bb3d457c831a9788d768c2a436b247d463f08cd5a8050e969a7dc46ea2f3", 16
)
_FULL_G = int(
    "252ae7e9c19956d1c2b1b8be918ab8bd485db665a9730bf75095bcdf3114ad51"
    "4297661e8a9064b1dfc90e73657f0e286349ead5790db09476d8cbefca369b23"
    "7af96f9b4c8d54c647bdb2ab88badef4fd45c05b57b59945a44aaa87ac4e85ea"
    "9d3d1e870496a05ff023f11fc52ff03664d866f6a45ed674234a25c5cebf6912"
    "d75d84f5b705255a812f04931f7f0a94a1eb03d7a607f5ac12ff53f3d513a4f5"
    "795de31a7be65fcd74d5b7c933c93eb83a6c76d6471a0b20c8f56022a9520f3b"
    "cb40e9519c48211848cacd0853eb2150c672408811a742001e64362fad652e9a"
    "fd6e1e34eea1ae7347f0617ddce317668f92ed041f07e23b6fb4a6259e20520b",
    16,
)


# hashing and the XOR block domain ----------------------------------------
def hash_to_block(tag: str, parts) -> bytes:
    """SHA-256 over a domain tag and length-prefixed parts."""
    tick("t_hf")
    h = hashlib.sha256()
    tag_b = tag.encode()
    h.update(len(tag_b).to_bytes(4, "big"))
    h.update(tag_b)
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


def hash_to_scalar(q: int, tag: str, parts) -> int:
    return int.from_bytes(hash_to_block(tag, parts), "big") % q


def xor32(a: bytes, b: bytes) -> bytes:
    tick("t_xor")
    return bytes(x ^ y for x, y in zip(a, b, strict=True))


def encode_scalar32(x: int) -> bytes:
    return x.to_bytes(BLOCK, "big")


def decode_scalar32(q: int, b: bytes) -> int:
    if len(b) != BLOCK:
        raise MalformedMessage("scalar blocks are 32 bytes")
    x = int.from_bytes(b, "big")
    if x >= q:
        raise OutOfRange(f"scalar {x} not below q")
    return x


def encode_ts32(t_ms: int) -> bytes:
    """Timestamp padded into the XOR domain."""
    return t_ms.to_bytes(8, "big").rjust(BLOCK, b"\x00")


def mask_elem(group: GroupParams, x: int) -> bytes:
    """Canonical 32-byte mask of a group element for XOR contexts."""
    return hash_to_block("mask", [group.encode_elem(x)])


# polynomial / interpolation machinery ------------------------------------
def poly_eval(coeffs, x: int, q: int) -> int:
    """Horner evaluation of coeffs[0] + coeffs[1] x + ... mod q."""
    if not coeffs:
        raise ValueError("empty coefficient list")
    tick("t_sss")
    acc = 0
    for c in reversed(coeffs):
        if acc:
            tick("t_mm")
        acc = (acc * x + c) % q
    return acc


def lagrange_at_zero(points, q: int) -> int:
    """Value at 0 of the interpolating polynomial through (x, y) points."""
    xs = [x for x, _ in points]
    if len(set(xs)) != len(xs):
        raise DuplicateAbscissa("abscissas must be distinct")
    if any(x % q == 0 for x in xs):
        raise ZeroAbscissa("abscissa 0 would expose the secret directly")
    total = 0
    for l, (x_l, y_l) in enumerate(points):
        num, den = 1, 1
        for n, (x_n, _) in enumerate(points):
            if n == l:
                continue
            tick("t_mm", 2)
            num = num * (-x_n) % q
            den = den * (x_l - x_n) % q
        tick("t_me")  # one inversion per basis weight
        w = num * _powmod(den, q - 2, q) % q
        tick("t_mm")
        total = (total + y_l * w) % q
    return total
