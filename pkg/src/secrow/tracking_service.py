"""The tracking service: accounts, ownership map, encrypted location store.

The TS never holds a location key. Stored locations are the ``E_L``
ciphertexts produced by the TD, and the query path re-encrypts them under
the requesting owner's public key without opening them.
"""

from __future__ import annotations

import hashlib
import hmac
from collections import defaultdict
from dataclasses import dataclass
from functools import singledispatchmethod

from .core_types import (
    Ack,
    AddOwnerRequest,
    AttestedLocationUpdate,
    CommitOwner,
    Identifier,
    LocQueryRequest,
    LocQueryResponse,
    LocUpdateGrant,
    LocUpdateRequest,
    LoginChallenge,
    LoginProof,
    LoginRequest,
    Nonce,
    OwnershipTicket,
    RegisterRequest,
    SessionGrant,
    decode_fields,
    encode_fields,
)
from .crypto import CryptoBackend, decode_chain, verify_attestation_chain
from .defenses import Defenses
from .endpoint import Endpoint
from .errors import (
    AccountExists,
    BadAttestation,
    BadCredentials,
    BadProximityProof,
    CryptoError,
    DecodeError,
    KeyMismatch,
    NoLocationOnRecord,
    NonceMismatch,
    NoPendingChallenge,
    NoPendingRequest,
    NoPendingUpdate,
    NotAnOwner,
    TicketExpired,
    Unauthenticated,
    UnexpectedMessage,
    UnknownTD,
)
from .rng import Drbg

SESSION_TTL = 10_000
PENDING_TTL = 1_000
LOGIN_CONTEXT = b"secrow-login"
PBKDF2_ROUNDS = 1_000


@dataclass
class Account:
    username: str
    salt: bytes
    password_hash: bytes
    cd_id: Identifier
    public_key: bytes


@dataclass
class PendingOwnership:
    n2: bytes
    ot_k: bytes
    expires: int


@dataclass
class PendingUpdate:
    td_id: Identifier
    n_t: bytes
    n_c: bytes
    expires: int
    used: bool = False


@dataclass(frozen=True)
class StoreWrite:
    step: int
    td_id: Identifier
    e_l: bytes


def hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode(), salt, PBKDF2_ROUNDS)


class TrackingService(Endpoint):
    def __init__(self, backend: CryptoBackend, rng: Drbg, attestation_root: bytes,
                 td_registry: dict[Identifier, bytes], clock, defenses: Defenses | None = None,
                 name: str = "ts", session_ttl: int = SESSION_TTL, pending_ttl: int = PENDING_TTL):
        self.name = name
        self.backend = backend
        self.rng = rng
        self.attestation_root = attestation_root
        self.td_registry = td_registry
        self.clock = clock
        self.defenses = defenses or Defenses()
        self.session_ttl = session_ttl
        self.pending_ttl = pending_ttl
        self.accounts: dict[str, Account] = {}
        self.sessions: dict[bytes, tuple[str, int]] = {}
        self.login_pending: dict[tuple[str, str], tuple[bytes, int]] = {}
        self.ownership: dict[Identifier, set[Identifier]] = defaultdict(set)
        self.pending_ownership: dict[tuple[Identifier, Identifier], PendingOwnership] = {}
        self.expired_ownership: set[tuple[Identifier, Identifier]] = set()
        self.pending_updates: dict[bytes, list[PendingUpdate]] = {}
        self.location_store: dict[Identifier, tuple[bytes, int]] = {}
        self.write_log: list[StoreWrite] = []

    # -- housekeeping ------------------------------------------------------

    def on_step(self, step: int) -> None:
        for token in [t for t, (_, exp) in self.sessions.items() if step >= exp]:
            del self.sessions[token]
        for key in [k for k, (_, exp) in self.login_pending.items() if step >= exp]:
            del self.login_pending[key]
        for key in [k for k, p in self.pending_ownership.items() if step >= p.expires]:
            del self.pending_ownership[key]
            self.expired_ownership.add(key)
        for tpk in list(self.pending_updates):
            live = [p for p in self.pending_updates[tpk] if step < p.expires]
            if live:
                self.pending_updates[tpk] = live
            else:
                del self.pending_updates[tpk]

    def revoke(self, username: str) -> None:
        for token in [t for t, (u, _) in self.sessions.items() if u == username]:
            del self.sessions[token]

    def _account_by_cd(self, cd_id: Identifier) -> Account | None:
        return next((a for a in self.accounts.values() if a.cd_id == cd_id), None)

    def _authenticate(self, session: bytes, cd_id: Identifier | None = None) -> Account:
        entry = self.sessions.get(session)
        if entry is None or self.clock() >= entry[1]:
            raise Unauthenticated()
        account = self.accounts[entry[0]]
        if cd_id is not None and account.cd_id != cd_id:
            raise Unauthenticated("session belongs to another device")
        return account

    def _pk_td(self, td_id: Identifier) -> bytes:
        try:
            return self.td_registry[td_id]
        except KeyError:
            raise UnknownTD(str(td_id)) from None

    # -- accounts ----------------------------------------------------------

    @singledispatchmethod
    def dispatch(self, msg, sender):
        raise UnexpectedMessage(type(msg).__name__)

    @dispatch.register(RegisterRequest)
    def _register(self, msg: RegisterRequest, sender: str):
        if msg.username in self.accounts or self._account_by_cd(msg.cd_id):
            raise AccountExists()
        salt = self.rng.bytes(16)
        self.accounts[msg.username] = Account(msg.username, salt, hash_password(msg.password, salt),
                                              msg.cd_id, msg.pk)
        return Ack()

    @dispatch.register(LoginRequest)
    def _login(self, msg: LoginRequest, sender: str):
        account = self.accounts.get(msg.username)
        if account is None or not hmac.compare_digest(
                account.password_hash, hash_password(msg.password, account.salt)):
            raise BadCredentials()
        nonce = self.rng.nonce()
        self.login_pending[(sender, msg.username)] = (nonce, self.clock() + self.pending_ttl)
        return LoginChallenge(Nonce(nonce))

    @dispatch.register(LoginProof)
    def _login_proof(self, msg: LoginProof, sender: str):
        entry = self.login_pending.pop((sender, msg.username), None)
        if entry is None:
            raise NoPendingChallenge("login")
        account = self.accounts[msg.username]
        if not self.backend.verify(account.public_key, LOGIN_CONTEXT + entry[0], msg.signature):
            raise BadCredentials("challenge signature invalid")
        session = self.rng.bytes(16)
        self.sessions[session] = (msg.username, self.clock() + self.session_ttl)
        return SessionGrant(session)

    # -- ownership ---------------------------------------------------------

    @dispatch.register(AddOwnerRequest)
    def _add_owner(self, msg: AddOwnerRequest, sender: str):
        self._authenticate(msg.session, msg.cd_id)
        pk_td = self._pk_td(msg.td_id)
        n2, ot_k = self.rng.nonce(), self.backend.generate_symmetric_key(self.rng)
        key = (msg.cd_id, msg.td_id)
        self.pending_ownership[key] = PendingOwnership(n2, ot_k, self.clock() + self.pending_ttl)
        self.expired_ownership.discard(key)
        return OwnershipTicket(self.backend.asym_encrypt(pk_td, n2 + ot_k, self.rng))

    @dispatch.register(CommitOwner)
    def _commit_owner(self, msg: CommitOwner, sender: str):
        account = self._authenticate(msg.session, msg.cd_id)
        key = (msg.cd_id, msg.td_id)
        pending = self.pending_ownership.pop(key, None)
        if pending is None:
            if key in self.expired_ownership:
                self.expired_ownership.discard(key)
                raise TicketExpired()
            raise NoPendingRequest()
        try:
            vouched, n2, _n3 = decode_fields(self.backend.sym_decrypt(pending.ot_k, msg.o_cd), 3)
        except (CryptoError, DecodeError):
            raise NonceMismatch("proof does not open under the ticket key") from None
        if not hmac.compare_digest(n2, pending.n2):
            raise NonceMismatch()
        if vouched != account.public_key and not self.defenses.ts_skip_commit_key_check:
            raise KeyMismatch()
        self.ownership[msg.td_id].add(msg.cd_id)
        return Ack()

    # -- location update ---------------------------------------------------

    @dispatch.register(LocUpdateRequest)
    def _loc_update_request(self, msg: LocUpdateRequest, sender: str):
        try:
            chain = decode_chain(msg.chain)
        except DecodeError:
            raise BadAttestation("undecodable chain") from None
        if not chain or chain[0].subject_public != msg.tpk or not verify_attestation_chain(
                self.backend, self.attestation_root, chain):
            raise BadAttestation()
        pk_td = self._pk_td(msg.td_id)
        n_t, n_c = self.rng.nonce(), self.rng.nonce()
        self.pending_updates.setdefault(msg.tpk, []).append(
            PendingUpdate(msg.td_id, n_t, n_c, self.clock() + self.pending_ttl))
        return LocUpdateGrant(self.backend.asym_encrypt(msg.tpk, n_c, self.rng),
                              self.backend.asym_encrypt(pk_td, n_t, self.rng))

    @dispatch.register(AttestedLocationUpdate)
    def _attested_update(self, msg: AttestedLocationUpdate, sender: str):
        keep = self.defenses.ts_keep_consumed_grants
        entries = [p for p in self.pending_updates.get(msg.tpk, ())
                   if p.td_id == msg.td_id and (keep or not p.used)]
        if not entries:
            raise NoPendingUpdate()
        pk_td = self._pk_td(msg.td_id)
        for entry in entries:
            if self.backend.verify(pk_td, entry.n_t + entry.n_c, msg.s_t):
                break
        else:
            raise BadProximityProof()
        if keep:
            entry.used = True
        else:
            self.pending_updates[msg.tpk].remove(entry)
            if not self.pending_updates[msg.tpk]:
                del self.pending_updates[msg.tpk]
        # last writer wins
        step = self.clock()
        self.location_store[msg.td_id] = (msg.e_l, step)
        self.write_log.append(StoreWrite(step, msg.td_id, msg.e_l))
        return Ack()

    # -- query -------------------------------------------------------------

    @dispatch.register(LocQueryRequest)
    def _query(self, msg: LocQueryRequest, sender: str):
        account = self._authenticate(msg.session)
        if account.cd_id not in self.ownership.get(msg.td_id, ()):
            raise NotAnOwner()
        record = self.location_store.get(msg.td_id)
        if record is None:
            raise NoLocationOnRecord()
        token = self.backend.asym_encrypt(account.public_key, encode_fields([record[0], self.rng.nonce()]),
                                          self.rng)
        return LocQueryResponse(token)

    # -- harness -----------------------------------------------------------

    def is_owner(self, cd_id: Identifier, td_id: Identifier) -> bool:
        return cd_id in self.ownership.get(td_id, ())

    def consumed_but_live(self) -> int:
        """Pending entries that were used yet are still held (only with the knob)."""
        return sum(p.used for entries in self.pending_updates.values() for p in entries)

    def breach_dump(self) -> bytes:
        """Every byte of TS state, canonically encoded."""
        accounts = [encode_fields([a.username.encode(), a.salt, a.password_hash, a.cd_id.encode(),
                                   a.public_key]) for a in sorted(self.accounts.values(),
                                                                  key=lambda a: a.username)]
        sessions = [encode_fields([t, u.encode(), exp.to_bytes(8, "big")])
                    for t, (u, exp) in sorted(self.sessions.items())]
        logins = [encode_fields([s.encode(), u.encode(), n, exp.to_bytes(8, "big")])
                  for (s, u), (n, exp) in sorted(self.login_pending.items())]
        registry = [encode_fields([td.encode(), pk]) for td, pk in sorted(self.td_registry.items())]
        owners = [encode_fields([td.encode(), *(cd.encode() for cd in sorted(cds))])
                  for td, cds in sorted(self.ownership.items())]
        pend_own = [encode_fields([cd.encode(), td.encode(), p.n2, p.ot_k, p.expires.to_bytes(8, "big")])
                    for (cd, td), p in sorted(self.pending_ownership.items())]
        pend_upd = [encode_fields([tpk, p.td_id.encode(), p.n_t, p.n_c, p.expires.to_bytes(8, "big"),
                                   bytes([p.used])])
                    for tpk, entries in sorted(self.pending_updates.items()) for p in entries]
        store = [encode_fields([td.encode(), e_l, step.to_bytes(8, "big")])
                 for td, (e_l, step) in sorted(self.location_store.items())]
        return encode_fields(encode_fields(section) for section in
                             (accounts, sessions, logins, registry, owners, pend_own, pend_upd, store))
