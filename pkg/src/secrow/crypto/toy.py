"""Fast hash-based stand-ins for protocol tests. Not secure.

The public key is a hash of the private key, and both "encryption" and
"signing" are keyed by the public key, so any holder of a public key can
decrypt and forge. Round-trip, wrong-key and tamper contracts still hold,
which is all the protocol logic needs.
"""

from __future__ import annotations

import hashlib
import hmac

from ..errors import AuthFailure, DecryptFailure
from . import AsymKeyPair, CryptoBackend, PrivateKey


def _stream(key: bytes, nonce: bytes, n: int) -> bytes:
    out = b""
    i = 0
    while len(out) < n:
        out += hashlib.sha256(key + nonce + i.to_bytes(4, "big")).digest()
        i += 1
    return out[:n]


def _xor(a: bytes, b: bytes) -> bytes:
    return bytes(x ^ y for x, y in zip(a, b))


def _public_of(secret: bytes) -> bytes:
    return hashlib.sha256(b"toy-public" + secret).digest()


class ToyBackend(CryptoBackend):
    name = "toy"

    def generate_keypair(self, rng):
        secret = rng.bytes(32)
        return AsymKeyPair(_public_of(secret), PrivateKey(self.name, secret))

    def asym_encrypt(self, public, plaintext, rng):
        r = rng.bytes(16)
        body = _xor(plaintext, _stream(public, r, len(plaintext)))
        tag = hmac.new(public, r + plaintext, hashlib.sha256).digest()[:16]
        return r + body + tag

    def asym_decrypt(self, private, ciphertext):
        if private.backend != self.name or len(ciphertext) < 32:
            raise DecryptFailure("ciphertext or key of the wrong shape")
        public = _public_of(private.secret)
        r, body, tag = ciphertext[:16], ciphertext[16:-16], ciphertext[-16:]
        plaintext = _xor(body, _stream(public, r, len(body)))
        if not hmac.compare_digest(tag, hmac.new(public, r + plaintext, hashlib.sha256).digest()[:16]):
            raise DecryptFailure("toy tag mismatch")
        return plaintext

    def sign(self, private, message, rng=None):
        return hmac.new(_public_of(private.secret), b"sig" + message, hashlib.sha256).digest()

    def verify(self, public, message, signature):
        return hmac.compare_digest(signature, hmac.new(public, b"sig" + message, hashlib.sha256).digest())

    def sym_encrypt(self, key, plaintext, rng):
        r = rng.bytes(12)
        body = _xor(plaintext, _stream(key, r, len(plaintext)))
        return r + body + hmac.new(key, r + body, hashlib.sha256).digest()[:16]

    def sym_decrypt(self, key, ciphertext):
        if len(ciphertext) < 28:
            raise AuthFailure("ciphertext too short")
        r, body, tag = ciphertext[:12], ciphertext[12:-16], ciphertext[-16:]
        if not hmac.compare_digest(tag, hmac.new(key, r + body, hashlib.sha256).digest()[:16]):
            raise AuthFailure("toy tag mismatch")
        return _xor(body, _stream(key, r, len(body)))
