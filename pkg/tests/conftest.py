import pytest

from secrow.core_types import LocationFix, PrimaryCmd
from secrow.simnet import World

TRUE_FIX = LocationFix.from_degrees(48.8583701, 2.2944813, 1_000)


def owned_world(seed=0, system="secrow", backend="toy", defenses=None, update=False):
    """A world where alice owns "tag"; with ``update``, bob has reported it once."""
    world = World(seed, system=system, backend=backend, defenses=defenses)
    world.add_td("tag")
    alice = world.add_cd("alice")
    world.set_proximity("alice", "tag", True)
    world.run(alice.onboard())
    world.press("tag")
    world.run(alice.pair_and_claim("tag"))
    world.run(alice.register_ownership("tag"))
    if world.system.supports_primary_commands:
        world.run(alice.primary_command("tag", PrimaryCmd.UpdateLocKey))
    world.set_proximity("alice", "tag", False)
    if update:
        bob = world.add_cd("bob")
        world.set_proximity("bob", "tag", True)
        world.set_gps("bob", TRUE_FIX)
        world.run(bob.update_location("tag"))
        world.set_proximity("bob", "tag", False)
    return world


@pytest.fixture
def world():
    return owned_world()


# -- acceptance summary: one line per criterion -----------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): an acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    failed = call.excinfo is not None
    previous = _CRITERIA.get(number, (title, "PASS"))[1]
    _CRITERIA[number] = (title, "FAIL" if failed or previous == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}  {title}")
