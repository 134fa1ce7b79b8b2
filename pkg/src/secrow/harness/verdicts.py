"""Conditions, properties and the verdict records the checkers produce."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field


class Condition(str, enum.Enum):
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    C4 = "C4"
    C5 = "C5"
    C6 = "C6"
    C7 = "C7"
    C8 = "C8"


CONDITION_TEXT = {
    Condition.C1: "TD recognises its owners",
    Condition.C2: "TS recognises a TD's owners",
    Condition.C3: "claiming needs a physical action on the TD",
    Condition.C4: "TS ownership needs the TD's approval",
    Condition.C5: "an update needs BLE contact with the TD",
    Condition.C6: "a TD cannot be mimicked",
    Condition.C7: "a CD cannot spoof its location",
    Condition.C8: "the TS cannot be spoofed",
}

# C8 is an assumption built into the channel model, not something a battery can refute
MODEL_CONDITIONS = frozenset({Condition.C8})


class Property(str, enum.Enum):
    TD_S1 = "TD_S1"
    TD_S2 = "TD_S2"
    CD_S1 = "CD_S1"
    TS_S1 = "TS_S1"


PROPERTY_CONDITIONS: dict[Property, tuple[Condition, ...]] = {
    Property.TD_S1: (Condition.C1, Condition.C2),
    Property.TD_S2: (Condition.C3, Condition.C4),
    Property.CD_S1: (Condition.C5,),
    Property.TS_S1: (Condition.C6, Condition.C7, Condition.C8),
}

PROPERTY_TEXT = {
    Property.TD_S1: "only owners can locate or operate the TD",
    Property.TD_S2: "only someone with physical access can become an owner",
    Property.CD_S1: "any nearby CD can report anonymously, and only nearby CDs can",
    Property.TS_S1: "stored locations are genuine",
}


@dataclass(frozen=True)
class Witness:
    attack: str
    sut: str
    seed: int
    transcript: bytes
    disabled: tuple[str, ...] = ()


@dataclass(frozen=True)
class NSCVerdict:
    condition: Condition
    holds: bool
    witness: Witness | None = None
    attacks: tuple = field(default=(), compare=False)

    def __post_init__(self):
        if not self.holds and self.witness is None:
            raise ValueError("a violated condition needs a witness")

    @property
    def by_model(self) -> bool:
        return self.condition in MODEL_CONDITIONS


@dataclass(frozen=True)
class PropertyVerdict:
    property: Property
    holds: bool
    failed_conditions: tuple[Condition, ...]


def assemble(verdicts: dict[Condition, NSCVerdict]) -> dict[Property, PropertyVerdict]:
    """A property fails as soon as one of its necessary conditions fails."""
    out = {}
    for prop, conds in PROPERTY_CONDITIONS.items():
        failed = tuple(c for c in conds if not verdicts[c].holds)
        out[prop] = PropertyVerdict(prop, not failed, failed)
    return out
