"""Exception hierarchy shared by every role.

Errors that a handler can return to a peer carry a stable ``code``; the
wire form is ``Err{code}`` and :func:`error_for_code` maps it back to the
class on the receiving side.
"""

from __future__ import annotations


class SecrowError(Exception):
    code = "Error"

    def __init__(self, detail: str = ""):
        super().__init__(detail or self.code)
        self.detail = detail


# -- decoding ---------------------------------------------------------------

class DecodeError(SecrowError):
    code = "DecodeError"


class UnknownTag(DecodeError):
    code = "UnknownTag"


class TruncatedField(DecodeError):
    code = "TruncatedField"


class TrailingBytes(DecodeError):
    code = "TrailingBytes"


class MalformedField(DecodeError):
    code = "MalformedField"


# -- cryptography -----------------------------------------------------------

class CryptoError(SecrowError):
    code = "CryptoError"


class DecryptFailure(CryptoError):
    code = "DecryptFailure"


class AuthFailure(CryptoError):
    code = "AuthFailure"


# -- protocol (these travel as Err messages) --------------------------------

class ProtocolError(SecrowError):
    code = "ProtocolError"


class MalformedMessage(ProtocolError):
    code = "MalformedMessage"


class UnexpectedMessage(ProtocolError):
    code = "UnexpectedMessage"


class NotInPairingMode(ProtocolError):
    code = "NotInPairingMode"


class OwnerExists(ProtocolError):
    code = "OwnerExists"


class NoPendingChallenge(ProtocolError):
    code = "NoPendingChallenge"


class BadSignature(ProtocolError):
    code = "BadSignature"


class MalformedTicket(ProtocolError):
    code = "MalformedTicket"


class NoOwnersRegistered(ProtocolError):
    code = "NoOwnersRegistered"


class NoPrimaryOwner(ProtocolError):
    code = "NoPrimaryOwner"


class NonceMismatch(ProtocolError):
    code = "NonceMismatch"


class NotAnOwner(ProtocolError):
    code = "NotAnOwner"


class OwnerConflict(NotAnOwner):
    """Adding the primary owner's key to the secondary set."""

    code = "OwnerConflict"


class BadLocationSignature(ProtocolError):
    code = "BadLocationSignature"


class MalformedToken(ProtocolError):
    code = "MalformedToken"


class NoLocationKey(ProtocolError):
    code = "NoLocationKey"


class RateLimited(ProtocolError):
    code = "RateLimited"


class NotPrimary(ProtocolError):
    code = "NotPrimary"


class Unauthenticated(ProtocolError):
    code = "Unauthenticated"


class UnknownTD(ProtocolError):
    code = "UnknownTD"


class NoPendingRequest(ProtocolError):
    code = "NoPendingRequest"


class TicketExpired(NoPendingRequest):
    code = "TicketExpired"


class KeyMismatch(ProtocolError):
    code = "KeyMismatch"


class NotOwnerAtDevice(KeyMismatch):
    """Raised on the CD when the TS reports that the TD vouched for someone else."""

    code = "NotOwnerAtDevice"


class BadAttestation(ProtocolError):
    code = "BadAttestation"


class NoPendingUpdate(ProtocolError):
    code = "NoPendingUpdate"


class BadProximityProof(ProtocolError):
    code = "BadProximityProof"


class NoLocationOnRecord(ProtocolError):
    code = "NoLocationOnRecord"


class AccountExists(ProtocolError):
    code = "AccountExists"


class BadCredentials(ProtocolError):
    code = "BadCredentials"


class Unsupported(ProtocolError):
    """The system under test has no such operation."""

    code = "Unsupported"


# -- simulation / tooling ---------------------------------------------------

class ChannelUnavailable(SecrowError):
    code = "ChannelUnavailable"


class Timeout(SecrowError):
    code = "Timeout"


class CapabilityError(SecrowError):
    code = "CapabilityError"


class SpoofedEndpoint(SecrowError):
    code = "SpoofedEndpoint"


class UnknownAttack(SecrowError):
    code = "UnknownAttack"


class UnknownSUT(SecrowError):
    code = "UnknownSUT"


class ParseError(SecrowError):
    code = "ParseError"

    def __init__(self, detail: str, line: int | None = None):
        super().__init__(f"line {line}: {detail}" if line is not None else detail)
        self.line = line


def _collect(cls: type, out: dict[str, type]) -> dict[str, type]:
    for sub in cls.__subclasses__():
        out[sub.code] = sub
        _collect(sub, out)
    return out


_BY_CODE: dict[str, type[SecrowError]] = {}


def error_for_code(code: str) -> type[SecrowError]:
    if not _BY_CODE:
        _collect(SecrowError, _BY_CODE)
    return _BY_CODE.get(code, ProtocolError)
