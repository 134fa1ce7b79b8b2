"""The communication device driver and its emulated TEE.

Each public flow method returns a :class:`~secrow.flows.FlowSpec`; run it
with :meth:`secrow.simnet.World.run`. Flows talk to TDs over BLE and to the
TS over its authenticated channel.

The TEE is a wall between the driver and the location signer. The driver
holds a :class:`TEEHandle` exposing three things: start a session (fresh
attested key), ask for a signed location against an ``E_C`` from the TS,
and read the session's public key with its chain. The GPS fix is fed in by
the world, never by the driver.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core_types import (
    Ack,
    AddOwnerRequest,
    AddPOwner,
    AttestedLocationUpdate,
    CheckOwner,
    CommitOwner,
    Identifier,
    LocationFix,
    LocQueryRequest,
    LocQueryResponse,
    LocUpdateGrant,
    LocUpdateRequest,
    LoginChallenge,
    LoginProof,
    LoginRequest,
    Nonce,
    OwnershipProof,
    OwnershipTicket,
    PairingChallenge,
    PairingProof,
    PrimaryCmd,
    PrimaryCmdBegin,
    PrimaryCmdChallenge,
    PrimaryCmdRequest,
    RegisterRequest,
    RingBegin,
    RingChallenge,
    RingRequest,
    SessionGrant,
    SignTokenRequest,
    SignTokenResponse,
    decode_fields,
    encode_fields,
)
from .crypto import AsymKeyPair, CryptoBackend, encode_chain, issue_attested_keypair
from .errors import (
    CryptoError,
    DecodeError,
    KeyMismatch,
    MalformedToken,
    NoLocationKey,
    NotOwnerAtDevice,
    NotPrimary,
    Unauthenticated,
    UnexpectedMessage,
)
from .flows import TS, Send, flow
from .rng import Drbg
from .tracking_device import RING_CONTEXT, location_claim
from .tracking_service import LOGIN_CONTEXT


def expect(reply, kind):
    if not isinstance(reply, kind):
        raise UnexpectedMessage(f"wanted {kind.__name__}, got {type(reply).__name__}")
    return reply


@dataclass(frozen=True)
class SignedLocation:
    location: LocationFix
    n_c: bytes
    signature: bytes


class _Enclave:
    """State the driver cannot reach through the handle."""

    def __init__(self, backend: CryptoBackend, rng: Drbg, root: AsymKeyPair, honor_driver_location: bool):
        self.backend = backend
        self.rng = rng
        self.root = root
        self.honor_driver_location = honor_driver_location
        self.true_location = LocationFix(0, 0, 0)
        self.attested = None

    def new_session(self):
        self.attested = issue_attested_keypair(self.backend, self.root, self.rng)
        return self.attested.public, encode_chain(self.attested.chain)

    def sign(self, e_c: bytes, driver_location: LocationFix | None) -> SignedLocation:
        if self.attested is None:
            raise MalformedToken("no attested session")
        try:
            n_c = self.backend.asym_decrypt(self.attested.pair.private, e_c)
        except CryptoError:
            raise MalformedToken("E_C does not open under the session key") from None
        if len(n_c) != 16:
            raise MalformedToken("nonce has the wrong length")
        location = self.true_location
        if driver_location is not None and self.honor_driver_location:
            location = driver_location
        signature = self.backend.sign(self.attested.pair.private, location_claim(location, n_c), self.rng)
        return SignedLocation(location, n_c, signature)


class TEEHandle:
    """The only view of the TEE that driver code gets."""

    __slots__ = ("_sign", "_session", "_public")

    def __init__(self, enclave: _Enclave):
        self._sign = enclave.sign
        self._session = enclave.new_session
        self._public = lambda: (enclave.attested.public, encode_chain(enclave.attested.chain)) \
            if enclave.attested else None

    def begin_session(self) -> tuple[bytes, bytes]:
        """Fresh attested key pair; returns its public key and encoded chain."""
        return self._session()

    def attested_public(self) -> tuple[bytes, bytes] | None:
        return self._public()

    def sign_location(self, e_c: bytes, location: LocationFix | None = None) -> SignedLocation:
        """Decrypt ``E_C`` and sign (true location, N_c).

        ``location`` is a driver hint; a correct TEE ignores it.
        """
        return self._sign(e_c, location)


class GpsPort:
    """World-side setter for the TEE's location fix."""

    def __init__(self, enclave: _Enclave):
        self._enclave = enclave

    def set(self, fix: LocationFix) -> None:
        self._enclave.true_location = fix

    def get(self) -> LocationFix:
        return self._enclave.true_location


class CommunicationDevice:
    def __init__(self, name: str, identifier: Identifier, keys: AsymKeyPair, backend: CryptoBackend,
                 rng: Drbg, world, tee_backend: CryptoBackend | None = None,
                 username: str | None = None, password: str | None = None):
        self.name = name
        self.id = identifier
        self._keys = keys
        self.public_key = keys.public
        self.backend = backend
        self.rng = rng
        self.world = world
        self.username = username or name
        self.password = password or f"{name}-password"
        self.session: bytes | None = None
        self.key_ring: dict[Identifier, bytes] = {}
        self.primary_of: set[Identifier] = set()
        enclave = _Enclave(tee_backend or backend, rng.fork("tee"), world.attestation_root,
                           world.defenses.tee_accept_driver_location)
        self.tee = TEEHandle(enclave)
        self.gps = GpsPort(enclave)

    def __repr__(self) -> str:
        return f"CommunicationDevice({self.name})"

    def secret_material(self) -> tuple[bytes, ...]:
        return (self._keys.private.secret,)

    def _td(self, td: str) -> tuple[Identifier, bytes]:
        td_id = self.world.advertised_id(td)
        return td_id, self.world.directory[td_id]

    def _session(self) -> bytes:
        if self.session is None:
            raise Unauthenticated("not logged in")
        return self.session

    # -- accounts ----------------------------------------------------------

    @flow
    def register(self):
        expect((yield Send(TS, RegisterRequest(self.username, self.password, self.id, self.public_key))), Ack)

    @flow
    def login(self, password: str | None = None):
        challenge = expect((yield Send(TS, LoginRequest(self.username, password or self.password))),
                           LoginChallenge)
        signature = self.backend.sign(self._keys.private, LOGIN_CONTEXT + challenge.nonce, self.rng)
        grant = expect((yield Send(TS, LoginProof(self.username, signature))), SessionGrant)
        self.session = grant.session
        return grant.session

    @flow
    def onboard(self):
        yield from self.register().gen
        return (yield from self.login().gen)

    # -- ownership ---------------------------------------------------------

    @flow
    def pair_and_claim(self, td: str):
        td_id, _ = self._td(td)
        challenge = expect((yield Send(td, AddPOwner(self.public_key))), PairingChallenge)
        proof = PairingProof(self.backend.sign(self._keys.private, challenge.n1, self.rng))
        expect((yield Send(td, proof)), Ack)
        self.primary_of.add(td_id)
        return Ack()

    @flow
    def register_ownership(self, td: str):
        td_id, _ = self._td(td)
        session = self._session()
        ticket = expect((yield Send(TS, AddOwnerRequest(session, self.id, td_id))), OwnershipTicket)
        proof = expect((yield Send(td, CheckOwner(self.public_key, ticket.o_t))), OwnershipProof)
        try:
            reply = yield Send(TS, CommitOwner(session, self.id, td_id, proof.o_cd))
        except KeyMismatch:
            raise NotOwnerAtDevice("the device vouched for another owner") from None
        return expect(reply, Ack)

    @flow
    def primary_command(self, td: str, cmd: PrimaryCmd, payload: bytes | None = None):
        td_id, pk_td = self._td(td)
        cmd = PrimaryCmd(cmd)
        if cmd is PrimaryCmd.UpdateLocKey and payload is None:
            payload = self.backend.generate_symmetric_key(self.rng)
        if payload is None:
            raise ValueError(f"{cmd.name} needs a payload")
        challenge = expect((yield Send(td, PrimaryCmdBegin(cmd))), PrimaryCmdChallenge)
        try:
            nonce = self.backend.asym_decrypt(self._keys.private, challenge.e_n)
        except CryptoError:
            raise NotPrimary("challenge is not addressed to this device") from None
        r = self.backend.asym_encrypt(pk_td, encode_fields([nonce, payload]), self.rng)
        expect((yield Send(td, PrimaryCmdRequest(cmd, r))), Ack)
        if cmd is PrimaryCmd.UpdateLocKey:
            self.key_ring[td_id] = payload
        return Ack()

    def share_location_key(self, peer: "CommunicationDevice", td: str | Identifier) -> None:
        """Out-of-band copy of L_TD to another owner."""
        td_id = td if isinstance(td, Identifier) else self.world.advertised_id(td)
        if td_id not in self.primary_of or td_id not in self.key_ring:
            raise NotPrimary()
        peer.key_ring[td_id] = self.key_ring[td_id]

    @flow
    def ring(self, td: str):
        challenge = expect((yield Send(td, RingBegin(self.public_key))), RingChallenge)
        signature = self.backend.sign(self._keys.private, RING_CONTEXT + challenge.nonce, self.rng)
        return expect((yield Send(td, RingRequest(signature))), Ack)

    # -- location ----------------------------------------------------------

    @flow
    def update_location(self, td: str):
        td_id = self.world.advertised_id(td)
        tpk, chain = self.tee.begin_session()
        grant = expect((yield Send(TS, LocUpdateRequest(td_id, tpk, chain))), LocUpdateGrant)
        signed = self.tee.sign_location(grant.e_c)
        response = expect((yield Send(td, SignTokenRequest(grant.e_t, tpk, chain, signed.location,
                                                           Nonce(signed.n_c), signed.signature))),
                          SignTokenResponse)
        return expect((yield Send(TS, AttestedLocationUpdate(td_id, tpk, response.s_t, response.e_l))), Ack)

    @flow
    def query_location(self, td: str | Identifier):
        td_id = td if isinstance(td, Identifier) else self.world.advertised_id(td)
        response = expect((yield Send(TS, LocQueryRequest(self._session(), td_id))), LocQueryResponse)
        return self.open_token(td_id, response.token)

    def open_token(self, td_id: Identifier, token: bytes) -> LocationFix:
        try:
            e_l, _n = decode_fields(self.backend.asym_decrypt(self._keys.private, token), 2)
        except (CryptoError, DecodeError):
            raise MalformedToken("query token does not open") from None
        key = self.key_ring.get(td_id)
        if key is None:
            raise NoLocationKey()
        plain = self.backend.sym_decrypt(key, e_l)
        return LocationFix.decode(plain[:LocationFix.SIZE])
