"""Run every catalogued attack against both systems and print a table.

Run with ``python3 demos/attack_tour.py``.
"""

from secrow.harness import ATTACKS, run_attack

print(f"{'attack':<26s} {'cond':<5s} {'secrow':<9s} baseline_trackr")
for name, spec in ATTACKS.items():
    cond = spec.condition.value if spec.condition else "-"
    cells = [run_attack(name, sut).outcome for sut in ("secrow", "baseline_trackr")]
    print(f"{name:<26s} {cond:<5s} {cells[0]:<9s} {cells[1]}")
