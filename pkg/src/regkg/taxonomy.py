"""The nine-concept regulatory taxonomy and the tagger grouping over it."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError, DomainError


class TagType(str, Enum):
    PERM = "PERM"
    DEF = "DEF"
    RISK = "RISK"
    MIT = "MIT"
    ENT = "ENT"
    ACT = "ACT"
    FS = "FS"
    PROD = "PROD"
    TECH = "TECH"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, code: str) -> "TagType":
        try:
            return cls(code.strip().upper())
        except (ValueError, AttributeError):
            raise DomainError(
                f"unknown tag type {code!r}; expected one of {[t.value for t in cls]}"
            ) from None


ALL_TAG_TYPES: tuple[TagType, ...] = tuple(TagType)


@dataclass(frozen=True)
class TaggerGroup:
    group_id: str
    covers: frozenset[TagType]


# Model column of the evaluation table, with DEF and TECH as singletons.
DEFAULT_GROUPS: tuple[TaggerGroup, ...] = (
    TaggerGroup("PERM", frozenset({TagType.PERM})),
    TaggerGroup("RISK_MIT", frozenset({TagType.RISK, TagType.MIT})),
    TaggerGroup("ENT", frozenset({TagType.ENT})),
    TaggerGroup("ACT_FS_PROD", frozenset({TagType.ACT, TagType.FS, TagType.PROD})),
    TaggerGroup("DEF", frozenset({TagType.DEF})),
    TaggerGroup("TECH", frozenset({TagType.TECH})),
)


def validate_groups(groups: tuple[TaggerGroup, ...] | list[TaggerGroup]) -> None:
    """Raise ConfigError unless ``groups`` partitions the full tag set."""
    seen: dict[TagType, str] = {}
    for group in groups:
        for ttype in group.covers:
            if ttype in seen:
                raise ConfigError(
                    f"tag type {ttype} is covered by both {seen[ttype]} and {group.group_id}"
                )
            seen[ttype] = group.group_id
    missing = [t.value for t in ALL_TAG_TYPES if t not in seen]
    if missing:
        raise ConfigError(f"tag types not covered by any group: {missing}")


def group_of(ttype: TagType, groups=DEFAULT_GROUPS) -> TaggerGroup:
    for group in groups:
        if ttype in group.covers:
            return group
    raise ConfigError(f"no group covers {ttype}")


def group_by_id(group_id: str, groups=DEFAULT_GROUPS) -> TaggerGroup:
    for group in groups:
        if group.group_id == group_id:
            return group
    raise ConfigError(f"unknown tagger group {group_id!r}")


validate_groups(DEFAULT_GROUPS)
