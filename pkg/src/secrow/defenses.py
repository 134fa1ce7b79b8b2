"""Switches that disable one SECrow defense each.

Every flag defaults to ``False`` (defense in place). They exist so the
harness can check that its own condition checkers notice when a defense is
removed; see :data:`KNOB_CONDITIONS`.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Defenses:
    # TD accepts a primary command without a matching pending nonce
    td_skip_primary_nonce_check: bool = False
    # TD answers AddPOwner outside pairing mode
    td_ignore_pairing_mode: bool = False
    # TS commits ownership without comparing the key the TD vouched for
    ts_skip_commit_key_check: bool = False
    # TS keeps update grants after they were used
    ts_keep_consumed_grants: bool = False
    # TEE signs a location handed to it by the untrusted driver
    tee_accept_driver_location: bool = False

    @classmethod
    def knobs(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def disable(self, *names: str) -> "Defenses":
        unknown = set(names) - set(self.knobs())
        if unknown:
            raise ValueError(f"unknown knob(s): {', '.join(sorted(unknown))}")
        return replace(self, **{n: True for n in names})

    @property
    def disabled(self) -> tuple[str, ...]:
        return tuple(n for n in self.knobs() if getattr(self, n))


KNOB_CONDITIONS = {
    "td_skip_primary_nonce_check": "C1",
    "td_ignore_pairing_mode": "C3",
    "ts_skip_commit_key_check": "C4",
    "ts_keep_consumed_grants": "C5",
    "tee_accept_driver_location": "C7",
}
