"""Shared vocabulary: identities, payloads, signature sets, message envelopes.

Canonical payload encoding (used for every signature digest)::

    sender (8 bytes, big-endian) || origin round (8 bytes, big-endian) || value

Heartbeat, deliver and join attestations are domain-separated by a short ASCII
tag prefixed to the same fixed-width integer layout, so a signature produced
for one message family never verifies for another.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

ProcessId = int
Round = int
InstanceKey = tuple[ProcessId, Round]

_U64 = struct.Struct(">QQ")

# size accounting (bytes)
HEADER_BYTES = 24
SIGNATURE_BYTES = 64
KEY_ID_BYTES = 33
SIG_ENTRY_BYTES = SIGNATURE_BYTES + KEY_ID_BYTES
LEDGER_ENTRY_BYTES = 8 + 8 + SIGNATURE_BYTES


class ParameterError(ValueError):
    """Raised when system parameters violate their invariants."""


def max_faults(n: int, rep: int = 0) -> int:
    """Largest tolerated Byzantine count for ``n`` processes and ``rep`` spare replicas."""
    return (n - rep - 1) // 3 if rep > 0 else (n - 1) // 3


@dataclass(frozen=True)
class SystemParams:
    """Static configuration of one protocol world.

    ``f`` is derived from ``n`` and ``rep`` unless given explicitly; an explicit
    value must agree with the derivation.  ``k`` defaults to the largest omission
    degree the window ``R`` can absorb.
    """

    n: int
    R: int
    rep: int = 0
    k: int | None = None
    f: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be positive, got {self.n}")
        if self.rep < 0:
            raise ParameterError(f"rep must be >= 0, got {self.rep}")
        derived = max_faults(self.n, self.rep)
        if self.f is None:
            object.__setattr__(self, "f", derived)
        elif self.f != derived:
            raise ParameterError(f"f={self.f} inconsistent with n={self.n}, rep={self.rep} (expected {derived})")
        if self.k is None:
            object.__setattr__(self, "k", max((self.R - 2) // 2, 0))
        if self.k < 0:
            raise ParameterError("k must be >= 0")
        if self.R < 2 * self.k + 2:
            raise ParameterError(f"R={self.R} must be >= 2k+2 = {2 * self.k + 2}")
        if self.n < 3 * self.f + 1 + self.rep:
            raise ParameterError(f"n={self.n} < 3f+rep+1")


def quorum_size(params: SystemParams) -> int:
    """Initial Byzantine quorum: ``2f + 1`` plus one per over-provisioned replica."""
    return 2 * params.f + 1 + params.rep


def live_quorum(params: SystemParams, detected_crashes: int) -> int:
    """Quorum after ``detected_crashes`` self-crashes have been declared; never below ``2f+1``."""
    return max(2 * params.f + 1, 2 * params.f + 1 + params.rep - detected_crashes)


_DLV_CACHE: dict[bytes, bytes] = {}


def _digest(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


@dataclass(frozen=True, slots=True)
class BroadcastPayload:
    sender: ProcessId
    origin_round: Round
    value: bytes
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "digest", _digest(self.encode()))

    def encode(self) -> bytes:
        return _U64.pack(self.sender, self.origin_round) + self.value

    @property
    def key(self) -> InstanceKey:
        return (self.sender, self.origin_round)

    def deliver_digest(self) -> bytes:
        """Digest that deliverers sign to attest they delivered this payload."""
        d = _DLV_CACHE.get(self.digest)
        if d is None:
            if len(_DLV_CACHE) > 65536:
                _DLV_CACHE.clear()
            d = _DLV_CACHE[self.digest] = _digest(b"DLV" + self.encode())
        return d


def instance_key(payload: BroadcastPayload) -> InstanceKey:
    return (payload.sender, payload.origin_round)


@dataclass(frozen=True, slots=True)
class HbBody:
    process: ProcessId
    round: Round
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "digest", _digest(b"HB" + _U64.pack(self.process, self.round)))


@dataclass(frozen=True, slots=True)
class JoinRequest:
    joiner: ProcessId
    key: bytes
    round: Round
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "digest", _digest(b"JHB" + _U64.pack(self.joiner, self.round) + self.key))


@dataclass(frozen=True, slots=True)
class JoinView:
    """A joiner's request bound to the pool member's view ``(n, ID)``."""

    request: JoinRequest
    n: int
    ids: tuple[ProcessId, ...]
    digest: bytes = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        ids = b"".join(i.to_bytes(8, "big") for i in self.ids)
        body = b"JOIN" + self.request.digest + self.n.to_bytes(8, "big") + ids
        object.__setattr__(self, "digest", _digest(body))


class SignatureSet(Mapping[ProcessId, bytes]):
    """Immutable signer -> signature mapping with set-union semantics.

    At most one entry per signer; on union the left operand's bytes win, which
    is irrelevant for verified sets because a signer has one valid signature
    per digest under the simulation backend.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Mapping[ProcessId, bytes] | Iterable[tuple[ProcessId, bytes]] = ()):
        self._entries = dict(entries)

    def __getitem__(self, signer: ProcessId) -> bytes:
        return self._entries[signer]

    def __iter__(self) -> Iterator[ProcessId]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, signer: object) -> bool:
        return signer in self._entries

    def __eq__(self, other: object) -> bool:
        if isinstance(other, SignatureSet):
            return self._entries == other._entries
        return NotImplemented

    def __hash__(self) -> int:
        return hash(frozenset(self._entries.items()))

    def __repr__(self) -> str:
        return f"SignatureSet({sorted(self._entries)})"

    def items(self):
        return self._entries.items()

    def get(self, signer, default=None):
        return self._entries.get(signer, default)

    def signers(self) -> frozenset[ProcessId]:
        return frozenset(self._entries)

    def union(self, other: Mapping[ProcessId, bytes]) -> "SignatureSet":
        if not other:
            return self
        merged = dict(other)
        merged.update(self._entries)
        return SignatureSet(merged)

    __or__ = union

    def with_entry(self, signer: ProcessId, sig: bytes) -> "SignatureSet":
        if signer in self._entries:
            return self
        merged = dict(self._entries)
        merged[signer] = sig
        return SignatureSet(merged)

    def without(self, signers: Iterable[ProcessId]) -> "SignatureSet":
        drop = set(signers)
        return SignatureSet((s, b) for s, b in self._entries.items() if s not in drop)

    def trimmed(self, size: int, keep: Iterable[ProcessId] = ()) -> "SignatureSet":
        """Deterministic subset of ``size`` entries, ``keep`` signers first then lowest ids."""
        if len(self._entries) <= size:
            return self
        order = [s for s in keep if s in self._entries]
        order += sorted(s for s in self._entries if s not in set(order))
        return SignatureSet((s, self._entries[s]) for s in order[:size])


EMPTY_SIGS = SignatureSet()


class MsgKind(enum.Enum):
    HB = "HB"
    BROADCAST = "Broadcast"
    ECHO = "Echo"
    DELIVER = "Deliver"
    JOIN_HB = "JoinHB"
    JOIN = "Join"


@dataclass(frozen=True, slots=True)
class PiggybackHb:
    body: HbBody
    sig: bytes


@dataclass(frozen=True, slots=True)
class LedgerEntry:
    process: ProcessId
    round: Round
    sig: bytes


@dataclass(frozen=True, slots=True)
class ProtocolMessage:
    """One message as placed on a link.

    ``body`` depends on ``kind``: :class:`HbBody` for HB,
    :class:`BroadcastPayload` for Broadcast/Echo/Deliver, :class:`JoinRequest`
    for JoinHB and :class:`JoinView` for Join.  ``origin_sig`` carries the
    originator's signature on Broadcast/Echo separately from the echoers'
    aggregate in ``sigs``; ``inner`` is the quorum certificate of a Deliver.
    """

    kind: MsgKind
    sender: ProcessId
    body: object
    sigs: SignatureSet = EMPTY_SIGS
    origin_sig: bytes | None = None
    inner: SignatureSet | None = None
    piggybacked_hb: PiggybackHb | None = None
    ledger: tuple[LedgerEntry, ...] | None = None

    @property
    def instance(self) -> InstanceKey | None:
        if isinstance(self.body, BroadcastPayload):
            return self.body.key
        return None

    def size_bytes(self) -> int:
        return message_size(self)


def payload_size(body: object) -> int:
    if isinstance(body, BroadcastPayload):
        return 16 + len(body.value)
    if isinstance(body, HbBody):
        return 16
    if isinstance(body, JoinRequest):
        return 16 + len(body.key)
    if isinstance(body, JoinView):
        return payload_size(body.request) + 8 + 8 * len(body.ids)
    raise TypeError(f"unknown body {type(body).__name__}")


def message_size(msg: ProtocolMessage) -> int:
    """Bytes on the wire: header + payload + 97 bytes per signature entry."""
    size = HEADER_BYTES + payload_size(msg.body) + SIG_ENTRY_BYTES * len(msg.sigs)
    if msg.origin_sig is not None:
        size += SIG_ENTRY_BYTES
    if msg.inner is not None:
        size += SIG_ENTRY_BYTES * len(msg.inner)
    if msg.piggybacked_hb is not None:
        size += 16 + SIG_ENTRY_BYTES
    if msg.ledger is not None:
        size += LEDGER_ENTRY_BYTES * len(msg.ledger)
    return size
