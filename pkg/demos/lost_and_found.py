"""Walk through one lost tag: pairing, a stranger's report, the owner's query.

Run with ``python3 demos/lost_and_found.py``.
"""

from secrow.core_types import LocationFix, PrimaryCmd
from secrow.errors import SecrowError
from secrow.simnet import World

world = World("lost-and-found", backend="ec")
world.add_td("keys", mac="00:1B:44:11:3A:B7")
alice = world.add_cd("alice")
bob = world.add_cd("bob")

world.set_proximity("alice", "keys", True)
world.run(alice.onboard())
world.press("keys")
world.run(alice.pair_and_claim("keys"))
world.run(alice.register_ownership("keys"))
world.run(alice.primary_command("keys", PrimaryCmd.UpdateLocKey))
print("alice owns the keys tag and has handed it a location key")

world.set_proximity("alice", "keys", False)
world.set_proximity("bob", "keys", True)
world.set_gps("bob", LocationFix.from_degrees(48.8583701, 2.2944813, 1_000))
world.run(bob.update_location("keys"))
print("bob walked past and reported where the tag is, without learning whose it is")

try:
    world.run(bob.ring("keys"))
except SecrowError as exc:
    print(f"bob tries to ring it: {type(exc).__name__}")

print(f"the server holds {len(world.ts.breach_dump())} bytes, none of them a readable position")
fix = world.run(alice.query_location("keys"))
print(f"alice asks the server and decrypts: {fix}")
