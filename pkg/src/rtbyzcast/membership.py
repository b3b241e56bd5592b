"""Crash detection from last-seen ledgers, and trusted-pool admission thresholds.

A ledger maps each process to the latest round for which its signed heartbeat
was observed, together with that signature as proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

from .core import HbBody, LedgerEntry, ParameterError, ProcessId

Ledger = dict[ProcessId, tuple[int, bytes]]


def merge_ledgers(local: Mapping[ProcessId, tuple[int, bytes]], inbound: Iterable[LedgerEntry], verify: Callable[[ProcessId, bytes, bytes], bool]) -> Ledger:
    """Pointwise maximum of ``local`` and the inbound entries whose proof verifies."""
    out = dict(local)
    for e in inbound:
        if not verify(e.process, HbBody(e.process, e.round).digest, e.sig):
            continue
        cur = out.get(e.process)
        if cur is None or e.round > cur[0]:
            out[e.process] = (e.round, e.sig)
    return out


def stale_processes(views: list[Mapping[ProcessId, int]], candidates: Iterable[ProcessId], limit: int, threshold: int) -> set[ProcessId]:
    """Processes stamped older than ``limit`` (or absent) in at least ``threshold`` views and fresh in none."""
    out = set()
    for j in candidates:
        stamps = [v.get(j, -1) for v in views]
        if any(s >= limit for s in stamps):
            continue
        if len(stamps) >= threshold:
            out.add(j)
    return out


@dataclass(frozen=True)
class TrustedPool:
    members: frozenset[ProcessId]

    def __post_init__(self) -> None:
        if len(self.members) <= 3:
            raise ParameterError("a trusted pool needs more than 3 members")

    @property
    def byz_bound(self) -> int:
        return (len(self.members) - 1) // 3

    @property
    def forward_threshold(self) -> int:
        """Pool signatures after which a member forwards the aggregate."""
        return self.byz_bound + 1

    @property
    def admit_threshold(self) -> int:
        """Pool signatures a joiner needs to become alive."""
        return 2 * self.byz_bound + 1
