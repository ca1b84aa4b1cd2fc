"""Classification outcomes shared by every analysis stage."""

from __future__ import annotations

import enum


class Verdict(enum.Enum):
    """Final judgement about one memory access.

    ALWAYS_HIT: the access hits in cache on every execution reaching it.
    ALWAYS_MISS: the access misses on every execution reaching it.
    DEFINITELY_UNKNOWN: both a hitting and a missing execution exist, so
    no amount of extra analysis effort can sharpen the answer.
    """

    ALWAYS_HIT = "always-hit"
    ALWAYS_MISS = "always-miss"
    DEFINITELY_UNKNOWN = "definitely-unknown"

    def __str__(self) -> str:
        return self.value
