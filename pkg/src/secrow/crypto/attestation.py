"""Attestation certificate chains for temporary CD keys.

A chain is ordered leaf first. Each certificate is signed by the subject key
of the next one; the last certificate is self-signed and its subject must be
the configured attestation root. The reference issuer produces depth 2
(leaf, root) but the verifier accepts any depth.

Certificates carry no device label: the temporary key is meant to be
unlinkable to the CD that holds it.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core_types import decode_fields, decode_record, encode_fields, encode_record
from ..rng import Drbg
from . import AsymKeyPair

ROOT_LABEL = "attestation-root"


@dataclass(frozen=True)
class Certificate:
    subject_public: bytes
    issuer_id: str
    signature: bytes

    def tbs(self) -> bytes:
        return encode_fields([b"secrow-cert", self.subject_public, self.issuer_id.encode()])


@dataclass(frozen=True)
class AttestedKeyPair:
    pair: AsymKeyPair
    chain: tuple[Certificate, ...]

    @property
    def public(self) -> bytes:
        return self.pair.public


def encode_chain(chain) -> bytes:
    return encode_fields(encode_record(c) for c in chain)


def decode_chain(raw: bytes) -> tuple[Certificate, ...]:
    return tuple(decode_record(Certificate, f) for f in decode_fields(raw))


def _signed(backend, signer, subject_public: bytes, issuer: str, rng) -> Certificate:
    unsigned = Certificate(subject_public, issuer, b"")
    return Certificate(subject_public, issuer, backend.sign(signer.private, unsigned.tbs(), rng))


def root_certificate(backend, root, rng: Drbg | None = None) -> Certificate:
    return _signed(backend, root, root.public, ROOT_LABEL, rng)


def issue_attested_keypair(backend, root, rng: Drbg) -> AttestedKeyPair:
    """Fresh key pair certified directly by the attestation root."""
    pair = backend.generate_keypair(rng)
    leaf = _signed(backend, root, pair.public, ROOT_LABEL, rng)
    return AttestedKeyPair(pair, (leaf, root_certificate(backend, root, rng)))


def verify_attestation_chain(backend, root_public: bytes, chain) -> bool:
    if isinstance(chain, (bytes, bytearray)):
        try:
            chain = decode_chain(bytes(chain))
        except Exception:
            return False
    if len(chain) < 2:
        return False
    for cert, issuer in zip(chain, chain[1:]):
        if not backend.verify(issuer.subject_public, cert.tbs(), cert.signature):
            return False
    last = chain[-1]
    return last.subject_public == root_public and backend.verify(root_public, last.tbs(), last.signature)

