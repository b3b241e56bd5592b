"""Byzantine strategies.

Each strategy is a :class:`~rtbyzcast.protocol.Node` subclass that overrides
emission and never self-crashes.  None of them can forge a signature: they
only sign with their own key and replay what they legitimately received.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .core import BroadcastPayload, HbBody, MsgKind, ParameterError, PiggybackHb, ProtocolMessage, SignatureSet
from .protocol import LifeCycle, Node

KINDS = ("silent", "equivocate", "withhold", "random_noise")
_ALIASES = {"withhold_signatures": "withhold"}


def canonical_kind(kind: str) -> str:
    kind = _ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ParameterError(f"unknown adversary kind {kind!r}; choose from {KINDS}")
    return kind


def resolve_targets(spec: str | Sequence[int] | None, count: int, ids: Sequence[int], f: int) -> list[int]:
    """Pick Byzantine ids: an explicit list, ``"first-k"`` or ``"last-k"`` (default)."""
    ids = sorted(ids)
    if count > f:
        raise ParameterError(f"adversary.count={count} exceeds f={f}")
    if spec is None or spec == "last-k":
        chosen = ids[len(ids) - count :] if count else []
    elif spec == "first-k":
        chosen = ids[:count]
    elif isinstance(spec, str):
        raise ParameterError(f"unknown target selector {spec!r}")
    else:
        chosen = sorted(set(spec))
        if len(chosen) > f:
            raise ParameterError(f"{len(chosen)} explicit targets exceed f={f}")
        if not set(chosen) <= set(ids):
            raise ParameterError("adversary targets must be existing process ids")
    return list(chosen)


class ByzantineNode(Node):
    byzantine = True

    def check_self_crash(self, r: int):
        return None

    def kill(self, r: int) -> None:
        pass

    def _own_hb(self, r: int) -> ProtocolMessage:
        body = HbBody(self.pid, r)
        return ProtocolMessage(MsgKind.HB, self.pid, body, SignatureSet({self.pid: self._sign(body.digest)}))


class SilentNode(ByzantineNode):
    def emit(self, r: int):
        return []


class WithholdNode(ByzantineNode):
    """Participates with its own signature only: no aggregation, no relays, no Deliver."""

    def emit(self, r: int):
        tg = self.targets()
        out = [(self._own_hb(r), tg)]
        for inst in sorted(self.store):
            if inst[1] < r - self.R:
                continue
            for cell in self.store[inst].values():
                p = cell.payload
                own = self._sign(p.digest)
                kind = MsgKind.BROADCAST if p.sender == self.pid else MsgKind.ECHO
                sigs = SignatureSet({}) if p.sender == self.pid else SignatureSet({self.pid: own})
                out.append((ProtocolMessage(kind, self.pid, p, sigs, origin_sig=cell.origin_sig), tg))
                break
        return out

    def receive(self, r: int, inbox):
        # remember instances only; never deliver
        for msg in inbox:
            if msg.kind in (MsgKind.BROADCAST, MsgKind.ECHO):
                c = self.val.check(msg, self.pid)
                if c.ok:
                    p = msg.body
                    self.store.setdefault(p.key, {}).setdefault(p.digest, _cell(p, msg.origin_sig))

    def end_round(self, r: int) -> None:
        pass


def _cell(p: BroadcastPayload, origin_sig: bytes):
    from .protocol import Cell

    return Cell(p, origin_sig, {p.sender: origin_sig})


class EquivocateNode(ByzantineNode):
    """Signs ``v`` for one subset of peers and ``v'`` for the complement.

    ``split`` gives the ids that receive ``v`` (default: the lower half of the
    peers).  With ``cross_forward`` both versions go to everyone from the
    second half of the window on, which hands correct nodes lie evidence.
    """

    def __init__(self, *a, split: Iterable[int] | None = None, cross_forward: bool = False, **kw):
        super().__init__(*a, **kw)
        self.split = None if split is None else frozenset(split)
        self.cross_forward = cross_forward
        self.own: list[tuple[int, BroadcastPayload, BroadcastPayload]] = []

    def start_broadcast(self, r: int, value: bytes):
        p1 = BroadcastPayload(self.pid, r, value)
        p2 = BroadcastPayload(self.pid, r, value + b"'")
        self.own.append((r, p1, p2))
        self._event(r, "broadcast", p1.key, value, 1)
        return p1

    def emit(self, r: int):
        tg = self.targets()
        side_a = self.split if self.split is not None else frozenset(tg[: len(tg) // 2 + len(tg) % 2])
        out = [(self._own_hb(r), tg)]
        for r0, p1, p2 in self.own:
            if not (r0 <= r <= r0 + self.R):
                continue
            a = tuple(t for t in tg if t in side_a)
            b = tuple(t for t in tg if t not in side_a)
            if self.cross_forward and r >= r0 + self.R // 2:
                a = b = tg
            for p, dest in ((p1, a), (p2, b)):
                sig = self._sign(p.digest)
                if dest:
                    out.append((ProtocolMessage(MsgKind.BROADCAST, self.pid, p, SignatureSet({}), origin_sig=sig), dest))
        return out

    def receive(self, r: int, inbox):
        pass

    def end_round(self, r: int) -> None:
        pass


class RandomNoiseNode(ByzantineNode):
    """Valid messages under its own key with arbitrary values, padded with unverifiable entries."""

    def emit(self, r: int):
        tg = self.targets()
        rng = self._rng
        out = [(self._own_hb(r), tg)]
        value = rng.bytes(int(rng.integers(0, 24)))
        p = BroadcastPayload(self.pid, int(rng.integers(max(0, r - self.R), r + 1)), value)
        junk = {int(j): rng.bytes(32) for j in rng.choice(sorted(self.members), size=min(3, len(self.members)), replace=False) if j != self.pid}
        kind = MsgKind.ECHO if rng.random() < 0.5 else MsgKind.BROADCAST
        out.append((ProtocolMessage(kind, self.pid, p, SignatureSet(junk), origin_sig=self._sign(p.digest)), tg))
        hb = HbBody(self.pid, r)
        forged = ProtocolMessage(
            MsgKind.DELIVER, self.pid, p, SignatureSet({self.pid: self._sign(p.deliver_digest())}),
            inner=SignatureSet({self.pid: self._sign(p.digest), **junk}), piggybacked_hb=PiggybackHb(hb, self._sign(hb.digest)),
        )
        out.append((forged, tg))
        return out

    def receive(self, r: int, inbox):
        pass

    def end_round(self, r: int) -> None:
        pass


STRATEGIES = {
    "silent": SilentNode,
    "withhold": WithholdNode,
    "equivocate": EquivocateNode,
    "random_noise": RandomNoiseNode,
}


def node_class(kind: str) -> type[ByzantineNode]:
    return STRATEGIES[canonical_kind(kind)]


def adversary_step(node: ByzantineNode, r: int):
    """Outbound messages of a Byzantine node for round ``r``."""
    if node.state is LifeCycle.DEAD:
        return []
    return node.emit(r)
