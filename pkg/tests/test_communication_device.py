import pytest

from conftest import TRUE_FIX, owned_world
from secrow.communication_device import TEEHandle
from secrow.core_types import LocationFix, PrimaryCmd
from secrow.defenses import Defenses
from secrow.errors import MalformedToken, NotPrimary
from secrow.tracking_device import location_claim

FAKE = LocationFix.from_degrees(10, 10)


def test_tee_handle_exposes_no_enclave():
    world = owned_world()
    handle = world.cds["alice"].tee
    assert isinstance(handle, TEEHandle)
    with pytest.raises(AttributeError):
        handle.enclave = None
    assert not hasattr(handle, "__dict__")


def test_tee_ignores_driver_location_hint():
    world = owned_world()
    cd = world.cds["alice"]
    cd.gps.set(TRUE_FIX)
    tpk, _ = cd.tee.begin_session()
    n_c = b"\x07" * 16
    e_c = cd.backend.asym_encrypt(tpk, n_c, cd.rng)
    signed = cd.tee.sign_location(e_c, location=FAKE)
    assert signed.location == TRUE_FIX
    assert cd.backend.verify(tpk, location_claim(TRUE_FIX, n_c), signed.signature)
    assert not cd.backend.verify(tpk, location_claim(FAKE, n_c), signed.signature)


def test_tee_with_knob_honors_hint():
    world = owned_world(defenses=Defenses(tee_accept_driver_location=True))
    cd = world.cds["alice"]
    tpk, _ = cd.tee.begin_session()
    e_c = cd.backend.asym_encrypt(tpk, b"\x07" * 16, cd.rng)
    assert cd.tee.sign_location(e_c, location=FAKE).location == FAKE


def test_tee_rejects_foreign_challenge():
    world = owned_world()
    cd = world.cds["alice"]
    cd.tee.begin_session()
    other = cd.backend.generate_keypair(cd.rng)
    with pytest.raises(MalformedToken):
        cd.tee.sign_location(cd.backend.asym_encrypt(other.public, b"\x07" * 16, cd.rng))


def test_each_update_uses_a_fresh_key():
    world = owned_world()
    cd = world.cds["alice"]
    assert cd.tee.begin_session()[0] != cd.tee.begin_session()[0]


def test_share_location_key():
    world = owned_world(update=True)
    alice, td = world.cds["alice"], world.tds["tag"]
    bob = world.add_cd("bob2")
    world.run(bob.onboard())
    world.set_proximity("alice", "tag", True)
    world.set_proximity("bob2", "tag", True)
    world.run(alice.primary_command("tag", PrimaryCmd.AddSOwner, bob.public_key))
    world.run(bob.register_ownership("tag"))
    alice.share_location_key(bob, "tag")
    assert world.run(bob.query_location("tag")) == TRUE_FIX
    with pytest.raises(NotPrimary):
        bob.share_location_key(alice, "tag")


def test_secret_material_is_never_on_the_wire():
    world = owned_world(update=True)
    wire = world.transcript_bytes()
    for cd in world.cds.values():
        for secret in cd.secret_material():
            assert secret not in wire
    for secret in world.tds["tag"].secret_material():
        assert secret not in wire
