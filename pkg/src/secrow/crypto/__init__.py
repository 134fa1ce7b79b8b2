"""Asymmetric encryption, signatures, AEAD and attestation chains.

Three interchangeable backends sit behind :class:`CryptoBackend`:

``ec``
    X25519 ECIES + Ed25519 + AES-256-GCM. The default.
``rsa``
    RSA-OAEP/PSS over SHA-256 with seeded key generation; modulus size is
    configurable (``rsa-1024`` mirrors the benchmark setting, ``rsa`` is 2048).
``toy``
    Hash-based stand-ins. Anyone holding a public key can decrypt and forge,
    so it is only for fast deterministic protocol tests.

Every randomized operation draws from an explicit :class:`~secrow.rng.Drbg`,
which makes complete protocol runs byte-reproducible.
"""

from __future__ import annotations

import abc
from collections import Counter
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..errors import AuthFailure
from ..rng import Drbg

SYM_KEY_SIZE = 32
GCM_NONCE = 12


@dataclass(frozen=True)
class PrivateKey:
    backend: str
    secret: bytes = field(repr=False)

    def __repr__(self) -> str:
        return f"PrivateKey({self.backend}, <redacted>)"


@dataclass(frozen=True)
class AsymKeyPair:
    public: bytes
    private: PrivateKey


def aead_encrypt(key: bytes, plaintext: bytes, rng: Drbg, aad: bytes = b"") -> bytes:
    nonce = rng.bytes(GCM_NONCE)
    return nonce + AESGCM(key).encrypt(nonce, plaintext, aad or None)


def aead_decrypt(key: bytes, ciphertext: bytes, aad: bytes = b"") -> bytes:
    if len(key) != SYM_KEY_SIZE:
        raise AuthFailure("symmetric key must be 32 bytes")
    if len(ciphertext) < GCM_NONCE + 16:
        raise AuthFailure("ciphertext too short")
    try:
        return AESGCM(key).decrypt(ciphertext[:GCM_NONCE], ciphertext[GCM_NONCE:], aad or None)
    except InvalidTag:
        raise AuthFailure("authentication tag mismatch") from None


class CryptoBackend(abc.ABC):
    name: str

    @abc.abstractmethod
    def generate_keypair(self, rng: Drbg) -> AsymKeyPair: ...

    @abc.abstractmethod
    def asym_encrypt(self, public: bytes, plaintext: bytes, rng: Drbg) -> bytes: ...

    @abc.abstractmethod
    def asym_decrypt(self, private: PrivateKey, ciphertext: bytes) -> bytes:
        """Raises :class:`~secrow.errors.DecryptFailure` on any mismatch."""

    @abc.abstractmethod
    def sign(self, private: PrivateKey, message: bytes, rng: Drbg | None = None) -> bytes: ...

    @abc.abstractmethod
    def verify(self, public: bytes, message: bytes, signature: bytes) -> bool: ...

    def sym_encrypt(self, key: bytes, plaintext: bytes, rng: Drbg) -> bytes:
        return aead_encrypt(key, plaintext, rng)

    def sym_decrypt(self, key: bytes, ciphertext: bytes) -> bytes:
        return aead_decrypt(key, ciphertext)

    def generate_symmetric_key(self, rng: Drbg) -> bytes:
        return rng.bytes(SYM_KEY_SIZE)


class CountingBackend(CryptoBackend):
    """Delegates to ``inner`` and tallies operations as ``(role, op)`` pairs."""

    _OPS = ("generate_keypair", "asym_encrypt", "asym_decrypt", "sign", "verify",
            "sym_encrypt", "sym_decrypt")

    def __init__(self, inner: CryptoBackend, role: str, counter: Counter | None = None):
        self.inner = inner
        self.role = role
        self.counter = counter if counter is not None else Counter()
        self.name = inner.name

    def _tick(self, op: str) -> None:
        self.counter[(self.role, op)] += 1

    def generate_keypair(self, rng):
        self._tick("generate_keypair")
        return self.inner.generate_keypair(rng)

    def asym_encrypt(self, public, plaintext, rng):
        self._tick("asym_encrypt")
        return self.inner.asym_encrypt(public, plaintext, rng)

    def asym_decrypt(self, private, ciphertext):
        self._tick("asym_decrypt")
        return self.inner.asym_decrypt(private, ciphertext)

    def sign(self, private, message, rng=None):
        self._tick("sign")
        return self.inner.sign(private, message, rng)

    def verify(self, public, message, signature):
        self._tick("verify")
        return self.inner.verify(public, message, signature)

    def sym_encrypt(self, key, plaintext, rng):
        self._tick("sym_encrypt")
        return self.inner.sym_encrypt(key, plaintext, rng)

    def sym_decrypt(self, key, ciphertext):
        self._tick("sym_decrypt")
        return self.inner.sym_decrypt(key, ciphertext)


def get_backend(name: str = "ec") -> CryptoBackend:
    from .ec import EcBackend
    from .rsa import RsaBackend
    from .toy import ToyBackend

    if name == "ec":
        return EcBackend()
    if name == "toy":
        return ToyBackend()
    if name == "rsa":
        return RsaBackend(2048)
    if name.startswith("rsa-"):
        return RsaBackend(int(name[4:]))
    raise ValueError(f"unknown crypto backend {name!r}")


BACKENDS = ("ec", "rsa", "rsa-1024", "toy")

from .attestation import (  # noqa: E402
    AttestedKeyPair,
    Certificate,
    decode_chain,
    encode_chain,
    issue_attested_keypair,
    verify_attestation_chain,
)

__all__ = [
    "AsymKeyPair", "AttestedKeyPair", "BACKENDS", "Certificate", "CountingBackend",
    "CryptoBackend", "PrivateKey", "SYM_KEY_SIZE", "aead_decrypt", "aead_encrypt",
    "decode_chain", "encode_chain", "get_backend", "issue_attested_keypair",
    "verify_attestation_chain",
]
