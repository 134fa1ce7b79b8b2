import pytest
from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import padding, rsa

from secrow.crypto import (
    BACKENDS,
    CountingBackend,
    Certificate,
    decode_chain,
    encode_chain,
    get_backend,
    issue_attested_keypair,
    verify_attestation_chain,
)
from secrow.crypto.rsa import _decode_private
from secrow.errors import AuthFailure, CryptoError, DecryptFailure
from secrow.rng import Drbg

SECURE = ("ec", "rsa", "rsa-1024")


@pytest.fixture(scope="module", params=BACKENDS)
def kit(request):
    backend = get_backend(request.param)
    rng = Drbg(f"crypto-{request.param}")
    return backend, rng, backend.generate_keypair(rng), backend.generate_keypair(rng)


@pytest.mark.parametrize("size", [0, 1, 16, 64, 300])
def test_asym_round_trip(kit, size):
    backend, rng, a, _ = kit
    msg = rng.bytes(size)
    assert backend.asym_decrypt(a.private, backend.asym_encrypt(a.public, msg, rng)) == msg


def test_asym_wrong_key_fails(kit):
    backend, rng, a, b = kit
    ct = backend.asym_encrypt(a.public, b"secret", rng)
    with pytest.raises(DecryptFailure):
        backend.asym_decrypt(b.private, ct)


def test_asym_tampering_fails(kit):
    backend, rng, a, _ = kit
    ct = bytearray(backend.asym_encrypt(a.public, b"secret" * 4, rng))
    ct[len(ct) // 2] ^= 1
    with pytest.raises(CryptoError):
        backend.asym_decrypt(a.private, bytes(ct))


def test_asym_encryption_is_randomized(kit):
    backend, rng, a, _ = kit
    assert backend.asym_encrypt(a.public, b"m", rng) != backend.asym_encrypt(a.public, b"m", rng)


def test_sign_verify(kit):
    backend, rng, a, b = kit
    sig = backend.sign(a.private, b"message", rng)
    assert backend.verify(a.public, b"message", sig)
    assert not backend.verify(a.public, b"messagf", sig)
    assert not backend.verify(b.public, b"message", sig)
    assert not backend.verify(a.public, b"message", sig[:-1])
    assert not backend.verify(a.public, b"message", b"")


def test_sym_round_trip_and_auth(kit):
    backend, rng, _, _ = kit
    key = backend.generate_symmetric_key(rng)
    ct = backend.sym_encrypt(key, b"x" * 64, rng)
    assert backend.sym_decrypt(key, ct) == b"x" * 64
    with pytest.raises(AuthFailure):
        backend.sym_decrypt(rng.bytes(32), ct)
    bad = bytearray(ct)
    bad[-1] ^= 1
    with pytest.raises(AuthFailure):
        backend.sym_decrypt(key, bytes(bad))
    with pytest.raises(AuthFailure):
        backend.sym_decrypt(key, b"short")


@pytest.mark.parametrize("name", BACKENDS)
def test_key_generation_is_seeded(name):
    backend = get_backend(name)
    assert backend.generate_keypair(Drbg(7)).public == backend.generate_keypair(Drbg(7)).public
    assert backend.generate_keypair(Drbg(7)).public != backend.generate_keypair(Drbg(8)).public


@pytest.mark.parametrize("name", SECURE)
def test_forgery_smoke(name):
    """Ten thousand mangled or random signatures; none verifies."""
    backend = get_backend(name)
    rng = Drbg(f"euf-{name}")
    pair = backend.generate_keypair(rng)
    msg = b"claim"
    sig = backend.sign(pair.private, msg, rng)
    for i in range(10_000):
        if i % 2:
            forged = bytearray(sig)
            forged[rng.randbelow(len(sig))] ^= 1 << rng.randbelow(8)
            candidate, text = bytes(forged), msg
        else:
            candidate, text = rng.bytes(len(sig)), rng.bytes(8)
        assert not backend.verify(pair.public, text, candidate)


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("des")


def test_counting_backend_tallies_by_role():
    inner = get_backend("toy")
    counting = CountingBackend(inner, "TD")
    rng = Drbg(1)
    pair = counting.generate_keypair(rng)
    counting.sign(pair.private, b"m", rng)
    counting.verify(pair.public, b"m", b"")
    assert counting.counter[("TD", "sign")] == 1
    assert counting.counter[("TD", "verify")] == 1
    assert counting.counter[("TD", "generate_keypair")] == 1


# -- RSA interoperability with an independent implementation --------------

@pytest.fixture(scope="module")
def rsa_pair():
    backend = get_backend("rsa-1024")
    rng = Drbg("rsa-interop")
    pair = backend.generate_keypair(rng)
    k = _decode_private(pair.private.secret)
    numbers = rsa.RSAPrivateNumbers(k.p, k.q, k.d, k.d % (k.p - 1), k.d % (k.q - 1), pow(k.q, -1, k.p),
                                    rsa.RSAPublicNumbers(k.e, k.n))
    return backend, rng, pair, numbers.private_key()


OAEP = padding.OAEP(mgf=padding.MGF1(hashes.SHA256()), algorithm=hashes.SHA256(), label=None)
PSS = padding.PSS(mgf=padding.MGF1(hashes.SHA256()), salt_length=32)


def test_rsa_oaep_matches_reference(rsa_pair):
    backend, rng, pair, ref = rsa_pair
    ours = backend.asym_encrypt(pair.public, b"hello oaep", rng)
    assert ours[0] == 0
    assert ref.decrypt(ours[1:], OAEP) == b"hello oaep"
    theirs = ref.public_key().encrypt(b"from the library", OAEP)
    assert backend.asym_decrypt(pair.private, b"\x00" + theirs) == b"from the library"


def test_rsa_pss_matches_reference(rsa_pair):
    backend, rng, pair, ref = rsa_pair
    sig = backend.sign(pair.private, b"hello pss", rng)
    ref.public_key().verify(sig, b"hello pss", PSS, hashes.SHA256())
    with pytest.raises(InvalidSignature):
        ref.public_key().verify(sig, b"hello psx", PSS, hashes.SHA256())
    theirs = ref.sign(b"library signed", PSS, hashes.SHA256())
    assert backend.verify(pair.public, b"library signed", theirs)


def test_rsa_long_plaintext_is_wrapped(rsa_pair):
    backend, rng, pair, _ = rsa_pair
    ct = backend.asym_encrypt(pair.public, b"z" * 500, rng)
    assert ct[0] == 1
    assert backend.asym_decrypt(pair.private, ct) == b"z" * 500


# -- attestation chains ----------------------------------------------------

@pytest.mark.parametrize("name", ["ec", "toy"])
def test_attestation_chain(name):
    backend = get_backend(name)
    rng = Drbg("attest")
    root = backend.generate_keypair(rng)
    other_root = backend.generate_keypair(rng)
    attested = issue_attested_keypair(backend, root, rng)
    chain = encode_chain(attested.chain)
    assert decode_chain(chain) == attested.chain
    assert attested.chain[0].subject_public == attested.public
    assert len(attested.chain) >= 2
    assert verify_attestation_chain(backend, root.public, chain)
    assert not verify_attestation_chain(backend, other_root.public, chain)
    leaf = attested.chain[0]
    forged = Certificate(backend.generate_keypair(rng).public, leaf.issuer_id, leaf.signature)
    assert not verify_attestation_chain(backend, root.public, encode_chain((forged,) + attested.chain[1:]))
    assert not verify_attestation_chain(backend, root.public, encode_chain(attested.chain[:1]))
    assert not verify_attestation_chain(backend, root.public, b"garbage")
