"""Security harness: attacks, condition batteries and verdicts."""

from .attacks import ATTACKS, AttackResult, run_attack
from .checker import BATTERIES, VerifyReport, check_condition, load_witness, replay_witness, verify
from .sut import SUT_LABELS, SystemUnderTest
from .verdicts import Condition, NSCVerdict, Property, PropertyVerdict, Witness

__all__ = [
    "ATTACKS", "AttackResult", "run_attack", "BATTERIES", "VerifyReport", "check_condition",
    "load_witness", "replay_witness", "verify", "SUT_LABELS", "SystemUnderTest", "Condition",
    "NSCVerdict", "Property", "PropertyVerdict", "Witness",
]
