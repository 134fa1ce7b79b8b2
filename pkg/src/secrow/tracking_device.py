"""The tracking device: pairing, owner table, location key, BLE handlers.

Challenges are kept per BLE session (the peer endpoint) and per command
kind, are consumed on first use, and lapse after ``challenge_ttl`` steps.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import singledispatchmethod

from .core_types import (
    Ack,
    AddPOwner,
    CheckOwner,
    Identifier,
    LocationFix,
    Nonce,
    OwnershipProof,
    PairingChallenge,
    PairingProof,
    PrimaryCmd,
    PrimaryCmdBegin,
    PrimaryCmdChallenge,
    PrimaryCmdRequest,
    RingBegin,
    RingChallenge,
    RingRequest,
    SignTokenRequest,
    SignTokenResponse,
    decode_fields,
    encode_fields,
)
from .crypto import AsymKeyPair, CryptoBackend, SYM_KEY_SIZE, decode_chain, verify_attestation_chain
from .defenses import Defenses
from .endpoint import Endpoint
from .errors import (
    BadAttestation,
    BadLocationSignature,
    BadSignature,
    CryptoError,
    DecodeError,
    MalformedMessage,
    MalformedTicket,
    MalformedToken,
    NoLocationKey,
    NonceMismatch,
    NoOwnersRegistered,
    NoPendingChallenge,
    NoPrimaryOwner,
    NotAnOwner,
    NotInPairingMode,
    OwnerConflict,
    OwnerExists,
    RateLimited,
    UnexpectedMessage,
)
from .ratelimit import TokenBucket
from .rng import Drbg

PAIRING_BUDGET = 100
CHALLENGE_TTL = 100
RING_CONTEXT = b"secrow-ring"


def location_claim(location: LocationFix, n_c: bytes) -> bytes:
    """The bytes a TEE signs for a location claim."""
    return location.encode() + n_c


@dataclass
class _Pending:
    nonce: bytes
    context: object
    expires: int


@dataclass(frozen=True)
class RingEvent:
    step: int
    requester: bytes


class TrackingDevice(Endpoint):
    def __init__(self, name: str, identifier: Identifier, keys: AsymKeyPair, backend: CryptoBackend,
                 rng: Drbg, attestation_root: bytes, clock, defenses: Defenses | None = None,
                 pairing_budget: int = PAIRING_BUDGET, challenge_ttl: int = CHALLENGE_TTL,
                 rate_limiter: TokenBucket | None = None):
        self.name = name
        self.id = identifier
        self._keys = keys
        self.public_key = keys.public
        self.backend = backend
        self.rng = rng
        self.attestation_root = attestation_root
        self.clock = clock
        self.defenses = defenses or Defenses()
        self.pairing_budget = pairing_budget
        self.challenge_ttl = challenge_ttl
        self.rate_limiter = rate_limiter or TokenBucket(now=clock())
        self.pairing_until: int | None = None
        self.primary_owner: bytes | None = None
        self.secondary_owners: set[bytes] = set()
        self._location_key: bytes | None = None
        self.pending: dict[tuple, _Pending] = {}
        self.events: list[RingEvent] = []

    # -- physical surface --------------------------------------------------

    @property
    def pairing_mode(self) -> bool:
        return self.pairing_until is not None

    def set_pairing_mode(self, enabled: bool) -> None:
        self.pairing_until = self.clock() + self.pairing_budget if enabled else None

    def factory_reset(self) -> None:
        """Test hook: forget every owner and the location key."""
        self.primary_owner = None
        self.secondary_owners.clear()
        self._location_key = None
        self.pending.clear()
        self.pairing_until = None

    def on_step(self, step: int) -> None:
        if self.pairing_until is not None and step >= self.pairing_until:
            self.pairing_until = None
        for key in [k for k, p in self.pending.items() if step >= p.expires]:
            del self.pending[key]

    # -- introspection for the harness -------------------------------------

    @property
    def owners(self) -> set[bytes]:
        return ({self.primary_owner} if self.primary_owner else set()) | self.secondary_owners

    @property
    def has_location_key(self) -> bool:
        return self._location_key is not None

    def location_key_matches(self, key: bytes) -> bool:
        return self._location_key == key

    def secret_material(self) -> tuple[bytes, ...]:
        """Harness only: byte strings that must never appear on a channel."""
        return tuple(x for x in (self._keys.private.secret, self._location_key) if x)

    def owner_digest(self) -> bytes:
        h = hashlib.sha256()
        h.update(self.primary_owner or b"")
        for pk in sorted(self.secondary_owners):
            h.update(b"\x00" + pk)
        return h.digest()

    def snapshot(self) -> bytes:
        return encode_fields([
            self.id.encode(),
            bytes([self.pairing_mode]),
            self.owner_digest(),
            bytes([self.has_location_key]),
        ])

    # -- challenge bookkeeping ---------------------------------------------

    def _issue(self, session: str, kind, context=None) -> bytes:
        nonce = self.rng.nonce()
        self.pending[(session, kind)] = _Pending(nonce, context, self.clock() + self.challenge_ttl)
        return nonce

    def _consume(self, session: str, kind) -> _Pending:
        pending = self.pending.pop((session, kind), None)
        if pending is None:
            raise NoPendingChallenge(str(kind))
        return pending

    def _rate_limit(self) -> None:
        if not self.rate_limiter.allow(self.clock()):
            raise RateLimited()

    # -- BLE handlers ------------------------------------------------------

    @singledispatchmethod
    def dispatch(self, msg, sender):
        raise UnexpectedMessage(type(msg).__name__)

    @dispatch.register(AddPOwner)
    def _add_p_owner(self, msg: AddPOwner, sender: str):
        if not self.pairing_mode and not self.defenses.td_ignore_pairing_mode:
            raise NotInPairingMode()
        if self.primary_owner is not None:
            raise OwnerExists()
        return PairingChallenge(Nonce(self._issue(sender, "pair", msg.pk)))

    @dispatch.register(PairingProof)
    def _pairing_proof(self, msg: PairingProof, sender: str):
        pending = self._consume(sender, "pair")
        pk = pending.context
        if not self.backend.verify(pk, pending.nonce, msg.signature):
            raise BadSignature()
        if self.primary_owner is not None:
            raise OwnerExists()
        self.primary_owner = pk
        self.secondary_owners.discard(pk)
        self.pairing_until = None
        return Ack()

    @dispatch.register(CheckOwner)
    def _check_owner(self, msg: CheckOwner, sender: str):
        self._rate_limit()
        if self.primary_owner is None:
            raise NoOwnersRegistered()
        try:
            plain = self.backend.asym_decrypt(self._keys.private, msg.o_t)
        except CryptoError:
            raise MalformedTicket() from None
        if len(plain) != 16 + SYM_KEY_SIZE:
            raise MalformedTicket("ticket has the wrong length")
        n2, ot_k = plain[:16], plain[16:]
        # a stranger gets a well-formed proof that names the primary owner
        vouched = msg.pk if msg.pk in self.owners else self.primary_owner
        n3 = self.rng.nonce()
        return OwnershipProof(self.backend.sym_encrypt(ot_k, encode_fields([vouched, n2, n3]), self.rng))

    @dispatch.register(PrimaryCmdBegin)
    def _primary_begin(self, msg: PrimaryCmdBegin, sender: str):
        if self.primary_owner is None:
            raise NoPrimaryOwner()
        nonce = self._issue(sender, ("cmd", msg.cmd))
        return PrimaryCmdChallenge(msg.cmd, self.backend.asym_encrypt(self.primary_owner, nonce, self.rng))

    @dispatch.register(PrimaryCmdRequest)
    def _primary_commit(self, msg: PrimaryCmdRequest, sender: str):
        skip = self.defenses.td_skip_primary_nonce_check
        if skip:
            pending = self.pending.pop((sender, ("cmd", msg.cmd)), None)
        else:
            pending = self._consume(sender, ("cmd", msg.cmd))
        try:
            nonce, payload = decode_fields(self.backend.asym_decrypt(self._keys.private, msg.r), 2)
        except (CryptoError, DecodeError):
            raise NonceMismatch("request does not decrypt") from None
        if not skip and nonce != pending.nonce:
            raise NonceMismatch()
        self._apply(msg.cmd, payload)
        return Ack()

    def _apply(self, cmd: PrimaryCmd, payload: bytes) -> None:
        if cmd is PrimaryCmd.UpdateLocKey:
            if len(payload) != SYM_KEY_SIZE:
                raise MalformedMessage("location key must be 32 bytes")
            self._location_key = payload
        elif cmd is PrimaryCmd.AddSOwner:
            if payload == self.primary_owner:
                raise OwnerConflict("the primary owner cannot be a secondary owner")
            self.secondary_owners.add(payload)
        elif cmd is PrimaryCmd.RemSOwner:
            if payload not in self.secondary_owners:
                raise NotAnOwner()
            self.secondary_owners.remove(payload)

    @dispatch.register(SignTokenRequest)
    def _sign_token(self, msg: SignTokenRequest, sender: str):
        self._rate_limit()
        if self._location_key is None:
            raise NoLocationKey()
        try:
            chain = decode_chain(msg.chain)
        except DecodeError:
            raise BadAttestation("undecodable chain") from None
        if not chain or chain[0].subject_public != msg.tpk or not verify_attestation_chain(
                self.backend, self.attestation_root, chain):
            raise BadAttestation()
        if not self.backend.verify(msg.tpk, location_claim(msg.location, msg.n_c), msg.signature):
            raise BadLocationSignature()
        try:
            n_t = self.backend.asym_decrypt(self._keys.private, msg.e_t)
        except CryptoError:
            raise MalformedToken() from None
        if len(n_t) != 16:
            raise MalformedToken("token nonce has the wrong length")
        s_t = self.backend.sign(self._keys.private, n_t + msg.n_c, self.rng)
        n_l = self.rng.nonce()
        e_l = self.backend.sym_encrypt(self._location_key, msg.location.encode() + n_l, self.rng)
        return SignTokenResponse(s_t, e_l)

    @dispatch.register(RingBegin)
    def _ring_begin(self, msg: RingBegin, sender: str):
        return RingChallenge(Nonce(self._issue(sender, "ring", msg.pk)))

    @dispatch.register(RingRequest)
    def _ring(self, msg: RingRequest, sender: str):
        pending = self._consume(sender, "ring")
        pk = pending.context
        if not self.backend.verify(pk, RING_CONTEXT + pending.nonce, msg.signature):
            raise BadSignature()
        if pk not in self.owners:
            raise NotAnOwner()
        self.events.append(RingEvent(self.clock(), pk))
        return Ack()
