"""Systems under test: a role factory plus the defenses in force."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..defenses import Defenses
from ..errors import UnknownSUT
from ..simnet import World
from ..systems import SYSTEM_LABELS

# labels accepted on the command line
SUT_LABELS = ("secrow", "baseline_trackr")


@dataclass(frozen=True)
class SystemUnderTest:
    label: str
    defenses: Defenses = field(default_factory=Defenses)
    backend: str = "ec"

    def __post_init__(self):
        if self.label not in SYSTEM_LABELS:
            raise UnknownSUT(self.label)

    def world(self, seed) -> World:
        return World(seed, system=self.label, backend=self.backend, defenses=self.defenses)

    def with_disabled(self, *knobs: str) -> "SystemUnderTest":
        return SystemUnderTest(self.label, self.defenses.disable(*knobs), self.backend)

    @property
    def is_secrow(self) -> bool:
        return self.label == "secrow"


def resolve(sut) -> SystemUnderTest:
    return sut if isinstance(sut, SystemUnderTest) else SystemUnderTest(str(sut))
