"""Hypothesis strategies for every wire type, derived from the type hints."""

import dataclasses
import typing

from hypothesis import strategies as st

from secrow.core_types import (
    MESSAGE_TYPES,
    Identifier,
    Kind,
    LocationFix,
    Nonce,
    PrimaryCmd,
)

E7 = 10_000_000

identifiers = st.builds(Identifier, st.sampled_from(list(Kind)), st.binary(min_size=6, max_size=6))
nonces = st.binary(min_size=16, max_size=16).map(Nonce)
fixes = st.builds(LocationFix, st.integers(-90 * E7, 90 * E7), st.integers(-180 * E7, 180 * E7),
                  st.integers(0, 2**64 - 1))
macs = st.binary(min_size=6, max_size=6)


def for_type(tp):
    if tp is bytes:
        return st.binary(max_size=80)
    if tp is Nonce:
        return nonces
    if tp is str:
        return st.text(max_size=20)
    if tp is int:
        return st.integers(0, 2**64 - 1)
    if tp is Identifier:
        return identifiers
    if tp is LocationFix:
        return fixes
    if tp is PrimaryCmd:
        return st.sampled_from(list(PrimaryCmd))
    if typing.get_origin(tp) is tuple:
        return st.lists(for_type(typing.get_args(tp)[0]), max_size=3).map(tuple)
    if dataclasses.is_dataclass(tp):
        return record(tp)
    raise TypeError(tp)


def record(cls):
    hints = typing.get_type_hints(cls)
    return st.builds(cls, **{f.name: for_type(hints[f.name]) for f in dataclasses.fields(cls)})


messages = st.one_of([record(cls) for _, cls in sorted(MESSAGE_TYPES.items())])
