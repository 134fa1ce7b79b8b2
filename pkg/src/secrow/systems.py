"""Role factories for each system a world can be built from."""

from __future__ import annotations

from .communication_device import CommunicationDevice
from .core_types import Identifier, SignTokenRequest, SignTokenResponse
from .errors import UnknownSUT
from .tracking_device import TrackingDevice
from .tracking_service import TrackingService


class System:
    label: str
    # filled in by subclasses that support the command
    supports_primary_commands = False

    def make_ts(self, world): ...

    def make_td(self, world, name: str, identifier: Identifier): ...

    def make_cd(self, world, name: str, identifier: Identifier, username, password): ...

    def make_mimic(self, world, name: str, victim): ...


class MimicTD(TrackingDevice):
    """Adversary device advertising a victim's identifier.

    It has its own key pair, so it does its best: a signature of the right
    shape under its own key and a random location ciphertext.
    """

    def dispatch(self, msg, sender):
        if isinstance(msg, SignTokenRequest):
            forged = self.backend.sign(self._keys.private, self.rng.bytes(16) + msg.n_c, self.rng)
            return SignTokenResponse(forged, self.rng.bytes(60))
        return super().dispatch(msg, sender)


class SecrowSystem(System):
    label = "secrow"
    supports_primary_commands = True

    def make_ts(self, world):
        return TrackingService(world.backend("TS"), world.rng.fork("ts"), world.attestation_root.public,
                               world.directory, world.clock, world.defenses)

    def make_td(self, world, name, identifier):
        backend = world.backend("TD")
        keys = backend.generate_keypair(world.rng.fork(f"td-keys:{name}"))
        return TrackingDevice(name, identifier, keys, backend, world.rng.fork(f"td:{name}"),
                              world.attestation_root.public, world.clock, world.defenses)

    def make_cd(self, world, name, identifier, username, password):
        backend = world.backend("CD")
        keys = backend.generate_keypair(world.rng.fork(f"cd-keys:{name}"))
        return CommunicationDevice(name, identifier, keys, backend, world.rng.fork(f"cd:{name}"), world,
                                   username=username, password=password)

    def make_mimic(self, world, name, victim):
        backend = world.backend("ADV")
        keys = backend.generate_keypair(world.rng.fork(f"mimic-keys:{name}"))
        mimic = MimicTD(name, victim.id, keys, backend, world.rng.fork(f"mimic:{name}"),
                        world.attestation_root.public, world.clock, world.defenses)
        mimic._location_key = backend.generate_symmetric_key(mimic.rng)
        return mimic


SYSTEM_LABELS = ("secrow", "baseline_trackr", "trackr_c5_patched")


def get_system(system) -> System:
    if isinstance(system, System):
        return system
    if system == "secrow":
        return SecrowSystem()
    from .baseline import BaselineSystem

    if system == "baseline_trackr":
        return BaselineSystem()
    if system == "trackr_c5_patched":
        return BaselineSystem(presence_proof=True)
    raise UnknownSUT(str(system))
