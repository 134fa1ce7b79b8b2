"""Run the condition batteries and turn attack outcomes into verdicts.

A condition holds when every attack in its battery fails. The first
successful attack becomes the witness: its name, the system, seed and
disabled defenses, and the encoded transcript slice. Replaying a witness
must reproduce both the violation and the transcript byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .attacks import ATTACKS, AttackResult, run_attack
from .sut import SystemUnderTest, resolve
from .verdicts import (
    CONDITION_TEXT,
    PROPERTY_CONDITIONS,
    PROPERTY_TEXT,
    Condition,
    NSCVerdict,
    Property,
    PropertyVerdict,
    Witness,
    assemble,
)

BATTERIES: dict[Condition, tuple[str, ...]] = {
    c: tuple(name for name, spec in ATTACKS.items() if spec.condition is c) for c in Condition
}


def check_condition(condition: Condition, sut: SystemUnderTest | str, seeds=(0,)) -> NSCVerdict:
    sut = resolve(sut)
    results: list[AttackResult] = []
    for seed in seeds:
        for name in BATTERIES[condition]:
            result = run_attack(name, sut, seed)
            results.append(result)
            if result.succeeded:
                witness = Witness(name, sut.label, seed, result.transcript, sut.defenses.disabled)
                return NSCVerdict(condition, False, witness, tuple(results))
    return NSCVerdict(condition, True, None, tuple(results))


def evaluate_properties(verdicts: dict[Condition, NSCVerdict]) -> dict[Property, PropertyVerdict]:
    return assemble(verdicts)


@dataclass
class VerifyReport:
    sut: str
    disabled: tuple[str, ...]
    verdicts: dict[Condition, NSCVerdict]
    properties: dict[Property, PropertyVerdict]
    witness_paths: dict[Condition, str] = field(default_factory=dict)

    @property
    def violated(self) -> set[Condition]:
        return {c for c, v in self.verdicts.items() if not v.holds}

    @property
    def ok(self) -> bool:
        return all(p.holds for p in self.properties.values())

    def condition_lines(self) -> list[str]:
        lines = []
        for c, v in self.verdicts.items():
            status = "holds by model" if v.by_model and v.holds else ("holds" if v.holds else "VIOLATED")
            path = self.witness_paths.get(c, "-")
            lines.append(f"{c.value}  {CONDITION_TEXT[c]:<44s} {status:<15s} {path}")
        return lines

    def render_text(self) -> str:
        title = self.sut + (f" (disabled: {', '.join(self.disabled)})" if self.disabled else "")
        out = [f"verify {title}", ""]
        out += self.condition_lines()
        out += ["", render_matrix(self), ""]
        for p, v in self.properties.items():
            tail = "" if v.holds else f"  (fails on {', '.join(c.value for c in v.failed_conditions)})"
            out.append(f"{p.value:<6s} {'holds' if v.holds else 'VIOLATED':<9s}{PROPERTY_TEXT[p]}{tail}")
        return "\n".join(out) + "\n"

    def to_json(self) -> dict:
        return {
            "sut": self.sut,
            "disabled": list(self.disabled),
            "conditions": [
                {"condition": c.value, "label": CONDITION_TEXT[c], "holds": v.holds,
                 "by_model": v.by_model, "witness": self.witness_paths.get(c),
                 "attacks": {r.attack: r.outcome for r in v.attacks}}
                for c, v in self.verdicts.items()
            ],
            "properties": [
                {"property": p.value, "holds": v.holds,
                 "failed_conditions": [c.value for c in v.failed_conditions]}
                for p, v in self.properties.items()
            ],
        }


def render_matrix(report: VerifyReport) -> str:
    """Properties against conditions.

    ``+`` the condition holds, ``X`` it is violated, ``m`` it holds by model
    rather than by test, ``.`` the property does not depend on it.
    """
    conds = list(Condition)
    header = "        " + " ".join(f"{c.value:>3s}" for c in conds)
    rows = [header]
    for p, needed in PROPERTY_CONDITIONS.items():
        cells = []
        for c in conds:
            if c not in needed:
                cells.append(".")
            elif not report.verdicts[c].holds:
                cells.append("X")
            else:
                cells.append("m" if report.verdicts[c].by_model else "+")
        rows.append(f"{p.value:<8s}" + " ".join(f"{x:>3s}" for x in cells))
    rows.append("legend: + holds   X violated   m holds by model   . not required")
    return "\n".join(rows)


def witness_filename(sut: SystemUnderTest, condition: Condition) -> str:
    suffix = "".join(f"-{k}" for k in sut.defenses.disabled)
    return f"{sut.label}{suffix}-{condition.value}.witness.json"


def save_witness(witness: Witness, path: Path) -> None:
    path.write_text(json.dumps({
        "attack": witness.attack, "sut": witness.sut, "seed": witness.seed,
        "disabled": list(witness.disabled), "transcript": witness.transcript.hex(),
    }, indent=2) + "\n")


def load_witness(path: Path | str) -> Witness:
    raw = json.loads(Path(path).read_text())
    return Witness(raw["attack"], raw["sut"], raw["seed"], bytes.fromhex(raw["transcript"]),
                   tuple(raw["disabled"]))


def replay_witness(witness: Witness) -> tuple[bool, bool]:
    """Rerun a witness; returns (violation reproduced, transcript identical)."""
    sut = SystemUnderTest(witness.sut).with_disabled(*witness.disabled)
    result = run_attack(witness.attack, sut, witness.seed)
    return result.succeeded, result.transcript == witness.transcript


def verify(sut: SystemUnderTest | str, seeds=(0,), witness_dir: Path | str | None = None) -> VerifyReport:
    sut = resolve(sut)
    verdicts = {c: check_condition(c, sut, seeds) for c in Condition}
    report = VerifyReport(sut.label, sut.defenses.disabled, verdicts, evaluate_properties(verdicts))
    if witness_dir is not None:
        directory = Path(witness_dir)
        for c, v in verdicts.items():
            if v.witness is not None:
                directory.mkdir(parents=True, exist_ok=True)
                path = directory / witness_filename(sut, c)
                save_witness(v.witness, path)
                report.witness_paths[c] = str(path)
    return report
