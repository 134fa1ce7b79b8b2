"""X25519 ECIES for encryption, Ed25519 for signatures.

A key pair bundles one key of each kind; the public key is the 32-byte
X25519 point followed by the 32-byte Ed25519 point.
"""

from __future__ import annotations

from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.kdf.hkdf import HKDF
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from ..errors import AuthFailure, DecryptFailure
from . import AsymKeyPair, CryptoBackend, PrivateKey, aead_decrypt, aead_encrypt

RAW = (Encoding.Raw, PublicFormat.Raw)


@lru_cache(maxsize=4096)
def _x_priv(secret: bytes) -> X25519PrivateKey:
    return X25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=4096)
def _ed_priv(secret: bytes) -> Ed25519PrivateKey:
    return Ed25519PrivateKey.from_private_bytes(secret)


@lru_cache(maxsize=4096)
def _ed_pub(raw: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(raw)


def _kdf(shared: bytes, eph: bytes, recipient: bytes) -> bytes:
    return HKDF(hashes.SHA256(), 32, salt=None, info=b"secrow-ecies" + eph + recipient).derive(shared)


class EcBackend(CryptoBackend):
    name = "ec"

    def generate_keypair(self, rng):
        secret = rng.bytes(64)
        x = _x_priv(secret[:32]).public_key().public_bytes(*RAW)
        ed = _ed_priv(secret[32:]).public_key().public_bytes(*RAW)
        return AsymKeyPair(x + ed, PrivateKey(self.name, secret))

    def asym_encrypt(self, public, plaintext, rng):
        if len(public) != 64:
            raise ValueError("not an ec public key")
        recipient = public[:32]
        eph = _x_priv(rng.bytes(32))
        eph_pub = eph.public_key().public_bytes(*RAW)
        shared = eph.exchange(X25519PublicKey.from_public_bytes(recipient))
        return eph_pub + aead_encrypt(_kdf(shared, eph_pub, recipient), plaintext, rng)

    def asym_decrypt(self, private, ciphertext):
        if private.backend != self.name or len(ciphertext) < 32:
            raise DecryptFailure("ciphertext or key of the wrong shape")
        me = _x_priv(private.secret[:32])
        eph_pub = ciphertext[:32]
        try:
            shared = me.exchange(X25519PublicKey.from_public_bytes(eph_pub))
            key = _kdf(shared, eph_pub, me.public_key().public_bytes(*RAW))
            return aead_decrypt(key, ciphertext[32:])
        except (AuthFailure, ValueError):
            raise DecryptFailure("ECIES decryption failed") from None

    def sign(self, private, message, rng=None):
        return _ed_priv(private.secret[32:]).sign(message)

    def verify(self, public, message, signature):
        if len(public) != 64 or len(signature) != 64:
            return False
        try:
            _ed_pub(public[32:]).verify(signature, message)
            return True
        except (InvalidSignature, ValueError):
            return False
