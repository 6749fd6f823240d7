"""Computation limits, overridable through ``SIMATCH_LIMITS``.

The variable holds comma-separated ``key=value`` pairs, e.g.
``SIMATCH_LIMITS="enumerate=50000,bandwidth=12"``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace


class LimitExceededError(RuntimeError):
    """A configured computation limit would be exceeded."""


@dataclass(frozen=True)
class Limits:
    enumerate: int = 1_000_000  # max matchings streamed by enumerate_matchings
    exhaustive: int = 100_000  # max matchings for exhaustive moment oracles
    bandwidth: int = 20  # max bandwidth for the transfer DP
    permanent: int = 20  # max n for the Ryser fallback
    exact_n: int = 20  # max n for rational (exact) mode


def current_limits() -> Limits:
    raw = os.environ.get("SIMATCH_LIMITS", "").strip()
    if not raw:
        return Limits()
    known = {f.name for f in fields(Limits)}
    updates = {}
    for item in raw.split(","):
        if not item.strip():
            continue
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in known:
            raise ValueError(f"bad SIMATCH_LIMITS entry {item!r}")
        updates[key] = int(value)
    return replace(Limits(), **updates)
