"""RSA with seeded key generation, OAEP encryption and PSS signatures.

Padding follows RFC 8017 with SHA-256 and MGF1-SHA-256 (PSS salt length 32).
It is written out here rather than taken from a library because the library
implementations draw their padding randomness from the OS, and runs must be
reproducible from a seed. Tests cross-check both directions against the
``cryptography`` package.

Plaintexts longer than the OAEP bound are wrapped: a fresh AES key goes
through OAEP and the payload through AES-GCM. The first ciphertext byte says
which form follows.
"""

from __future__ import annotations

import hashlib
import hmac
import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2

from ..core_types import decode_fields, encode_fields
from ..errors import AuthFailure, DecryptFailure
from . import AsymKeyPair, CryptoBackend, PrivateKey, aead_decrypt, aead_encrypt

E = 65537
HLEN = 32
SALT_LEN = 32
_DIRECT, _WRAPPED = 0, 1
_EMPTY_HASH = hashlib.sha256(b"").digest()


@dataclass(frozen=True)
class RsaPublic:
    n: int
    e: int

    @property
    def k(self) -> int:
        return (self.n.bit_length() + 7) // 8


@dataclass(frozen=True)
class RsaPrivate:
    n: int
    e: int
    d: int
    p: int
    q: int

    @property
    def public(self) -> RsaPublic:
        return RsaPublic(self.n, self.e)


def _i2b(x: int, size: int | None = None) -> bytes:
    size = size if size is not None else max(1, (x.bit_length() + 7) // 8)
    return x.to_bytes(size, "big")


def _b2i(b: bytes) -> int:
    return int.from_bytes(b, "big")


def encode_public(key: RsaPublic) -> bytes:
    return encode_fields([_i2b(key.n), _i2b(key.e)])


@lru_cache(maxsize=4096)
def decode_public(raw: bytes) -> RsaPublic:
    n, e = decode_fields(raw, 2)
    return RsaPublic(_b2i(n), _b2i(e))


@lru_cache(maxsize=1024)
def _decode_private(raw: bytes) -> RsaPrivate:
    return RsaPrivate(*(_b2i(f) for f in decode_fields(raw, 5)))


def mgf1(seed: bytes, length: int) -> bytes:
    out = b""
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    return out[:length]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


@lru_cache(maxsize=1024)
def _crt(key: RsaPrivate) -> tuple[int, int, int]:
    return key.d % (key.p - 1), key.d % (key.q - 1), pow(key.q, -1, key.p)


def _private_op(key: RsaPrivate, c: int) -> int:
    dp, dq, qinv = _crt(key)
    m1, m2 = pow(c, dp, key.p), pow(c, dq, key.q)
    h = (qinv * (m1 - m2)) % key.p
    return m2 + h * key.q


def generate_private(bits: int, rng) -> RsaPrivate:
    half = bits // 2
    while True:
        primes = []
        while len(primes) < 2:
            cand = rng.randbits(half) | (3 << (half - 2)) | 1
            p = int(gmpy2.next_prime(cand))
            if p.bit_length() == half and math.gcd(E, p - 1) == 1 and p not in primes:
                primes.append(p)
        p, q = primes
        n = p * q
        if n.bit_length() != bits:
            continue
        lam = math.lcm(p - 1, q - 1)
        return RsaPrivate(n, E, pow(E, -1, lam), p, q)


def oaep_max(key: RsaPublic) -> int:
    return key.k - 2 * HLEN - 2


def oaep_encrypt(key: RsaPublic, message: bytes, seed: bytes) -> bytes:
    k = key.k
    if len(message) > oaep_max(key):
        raise ValueError("message too long for OAEP")
    db = _EMPTY_HASH + b"\x00" * (k - len(message) - 2 * HLEN - 2) + b"\x01" + message
    masked_db = _xor(db, mgf1(seed, k - HLEN - 1))
    masked_seed = _xor(seed, mgf1(masked_db, HLEN))
    em = b"\x00" + masked_seed + masked_db
    return _i2b(pow(_b2i(em), key.e, key.n), k)


def oaep_decrypt(key: RsaPrivate, ciphertext: bytes) -> bytes:
    k = key.public.k
    if len(ciphertext) != k or k < 2 * HLEN + 2:
        raise DecryptFailure("ciphertext has the wrong length")
    c = _b2i(ciphertext)
    if c >= key.n:
        raise DecryptFailure("ciphertext out of range")
    em = _i2b(_private_op(key, c), k)
    masked_seed, masked_db = em[1:1 + HLEN], em[1 + HLEN:]
    seed = _xor(masked_seed, mgf1(masked_db, HLEN))
    db = _xor(masked_db, mgf1(seed, k - HLEN - 1))
    rest = db[HLEN:].lstrip(b"\x00")
    if em[0] != 0 or not hmac.compare_digest(db[:HLEN], _EMPTY_HASH) or not rest or rest[0] != 1:
        raise DecryptFailure("OAEP padding check failed")
    return rest[1:]


def pss_encode(message: bytes, em_bits: int, salt: bytes) -> bytes:
    em_len = (em_bits + 7) // 8
    m_hash = hashlib.sha256(message).digest()
    if em_len < HLEN + len(salt) + 2:
        raise ValueError("modulus too small for PSS")
    h = hashlib.sha256(b"\x00" * 8 + m_hash + salt).digest()
    db = b"\x00" * (em_len - len(salt) - HLEN - 2) + b"\x01" + salt
    masked = bytearray(_xor(db, mgf1(h, em_len - HLEN - 1)))
    masked[0] &= 0xFF >> (8 * em_len - em_bits)
    return bytes(masked) + h + b"\xbc"


def pss_verify(message: bytes, em: bytes, em_bits: int) -> bool:
    em_len = (em_bits + 7) // 8
    if len(em) != em_len or em[-1] != 0xBC or em_len < HLEN + SALT_LEN + 2:
        return False
    masked, h = em[:em_len - HLEN - 1], em[em_len - HLEN - 1:-1]
    top = 0xFF >> (8 * em_len - em_bits)
    if masked[0] & ~top & 0xFF:
        return False
    db = bytearray(_xor(masked, mgf1(h, em_len - HLEN - 1)))
    db[0] &= top
    pad = em_len - HLEN - SALT_LEN - 2
    if any(db[:pad]) or db[pad] != 1:
        return False
    salt = bytes(db[-SALT_LEN:])
    m_hash = hashlib.sha256(message).digest()
    return hmac.compare_digest(h, hashlib.sha256(b"\x00" * 8 + m_hash + salt).digest())


class RsaBackend(CryptoBackend):
    def __init__(self, bits: int = 2048):
        if bits < 1024 or bits % 256:
            raise ValueError("RSA modulus must be a multiple of 256 bits, at least 1024")
        self.bits = bits
        self.name = "rsa" if bits == 2048 else f"rsa-{bits}"

    def generate_keypair(self, rng):
        key = generate_private(self.bits, rng)
        secret = encode_fields([_i2b(v) for v in (key.n, key.e, key.d, key.p, key.q)])
        return AsymKeyPair(encode_public(key.public), PrivateKey(self.name, secret))

    def asym_encrypt(self, public, plaintext, rng):
        key = decode_public(public)
        if len(plaintext) <= oaep_max(key):
            return bytes([_DIRECT]) + oaep_encrypt(key, plaintext, rng.bytes(HLEN))
        session = rng.bytes(32)
        return (bytes([_WRAPPED]) + oaep_encrypt(key, session, rng.bytes(HLEN))
                + aead_encrypt(session, plaintext, rng))

    def asym_decrypt(self, private, ciphertext):
        if private.backend != self.name or not ciphertext:
            raise DecryptFailure("ciphertext or key of the wrong shape")
        key = _decode_private(private.secret)
        k = key.public.k
        mode, body = ciphertext[0], ciphertext[1:]
        if mode == _DIRECT:
            return oaep_decrypt(key, body)
        if mode == _WRAPPED:
            session = oaep_decrypt(key, body[:k])
            try:
                return aead_decrypt(session, body[k:])
            except AuthFailure:
                raise DecryptFailure("wrapped payload failed authentication") from None
        raise DecryptFailure("unknown ciphertext form")

    def sign(self, private, message, rng=None):
        key = _decode_private(private.secret)
        if rng is not None:
            salt = rng.bytes(SALT_LEN)
        else:
            salt = hmac.new(_i2b(key.d), message, hashlib.sha256).digest()
        em = pss_encode(message, key.n.bit_length() - 1, salt)
        return _i2b(_private_op(key, _b2i(em)), key.public.k)

    def verify(self, public, message, signature):
        try:
            key = decode_public(public)
        except Exception:
            return False
        if len(signature) != key.k:
            return False
        s = _b2i(signature)
        if s >= key.n:
            return False
        em_bits = key.n.bit_length() - 1
        try:
            em = _i2b(pow(s, key.e, key.n), (em_bits + 7) // 8)
        except OverflowError:
            return False
        return pss_verify(message, em, em_bits)
