"""Per-process broadcast state machine.

A node runs three phases per round, driven by the world loop:

1. ``emit(r)``: produce the round's outbound messages.
2. ``receive(r, inbox)``: validate and fold inbound messages into local state;
   may deliver.
3. ``end_round(r)``: crash-detection bookkeeping, the self-crash rules, and
   revival of a dead node.

Aggregates are flat per ``(instance, value digest)``: the union over every
echoer of all verified signatures seen for that value.  The originator's own
signature is part of the aggregate for counting but travels in
``origin_sig`` on the wire.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import (
    EMPTY_SIGS,
    BroadcastPayload,
    HbBody,
    InstanceKey,
    JoinRequest,
    JoinView,
    LedgerEntry,
    MsgKind,
    PiggybackHb,
    ProcessId,
    ProtocolMessage,
    SignatureSet,
    SystemParams,
    max_faults,
)
from .crypto import KeyRegistry
from .membership import TrustedPool, merge_ledgers, stale_processes

JOIN_TAG = b"\x00join:"
LEAVE_TAG = b"\x00leave"


def _trusted(*_: object) -> bool:
    return True


class LifeCycle(enum.Enum):
    ALIVE = "Alive"
    DEAD = "Dead"
    PENDING = "Pending"


def is_join(p: BroadcastPayload) -> bool:
    return p.value.startswith(JOIN_TAG)


def is_leave(p: BroadcastPayload) -> bool:
    return p.value == LEAVE_TAG


def fmt_instance(inst: InstanceKey | None) -> str:
    return "" if inst is None else f"{inst[0]}:{inst[1]}"


def fmt_value(v: bytes) -> str:
    import hashlib

    return v.hex() if len(v) <= 16 else "h" + hashlib.sha256(v).hexdigest()[:16]


@dataclass
class Checked:
    """Verification outcome of one message, shareable by every receiver."""

    ok: bool = True
    sigs: dict = field(default_factory=dict)
    origin_ok: bool = False
    inner: dict = field(default_factory=dict)
    pb_ok: bool = False
    ledger: list = field(default_factory=list)


class Validator:
    """Verifies messages once per round and hands the result to all receivers.

    In ``independent`` mode each receiver verifies on its own (no sharing); the
    latency experiment uses this so wall-clock figures include real crypto work.
    """

    def __init__(self, registry: KeyRegistry, independent: bool = False):
        self.registry = registry
        self.independent = independent
        self._memo: dict[int, tuple[ProtocolMessage, Checked]] = {}

    def new_round(self) -> None:
        self._memo.clear()

    def check(self, msg: ProtocolMessage, verifier: ProcessId) -> Checked:
        if not self.independent:
            hit = self._memo.get(id(msg))
            if hit is not None and hit[0] is msg:
                return hit[1]
        res = self._check(msg, verifier if self.independent else None)
        if not self.independent:
            self._memo[id(msg)] = (msg, res)
        return res

    def _filter(self, digest: bytes, sigs, verifier) -> dict:
        ver = self.registry.verify
        return {s: b for s, b in sigs.items() if ver(s, digest, b, verifier)}

    def _check(self, msg: ProtocolMessage, verifier) -> Checked:
        reg = self.registry
        c = Checked()
        body = msg.body
        kind = msg.kind
        if kind is MsgKind.HB:
            c.sigs = self._filter(body.digest, msg.sigs, verifier)
            c.ok = bool(c.sigs)
        elif kind is MsgKind.BROADCAST or kind is MsgKind.ECHO:
            c.origin_ok = msg.origin_sig is not None and reg.verify(body.sender, body.digest, msg.origin_sig, verifier)
            c.sigs = self._filter(body.digest, msg.sigs, verifier) if c.origin_ok else {}
            c.ok = c.origin_ok
        elif kind is MsgKind.DELIVER:
            c.inner = self._filter(body.digest, msg.inner or EMPTY_SIGS, verifier)
            c.sigs = self._filter(body.deliver_digest(), msg.sigs, verifier)
            c.ok = bool(c.inner)
        elif kind is MsgKind.JOIN_HB:
            sig = msg.sigs.get(body.joiner)
            c.ok = sig is not None and reg.verify(body.joiner, body.digest, sig, verifier)
        elif kind is MsgKind.JOIN:
            c.sigs = self._filter(body.digest, msg.sigs, verifier)
            c.ok = bool(c.sigs)
        if msg.piggybacked_hb is not None:
            pb = msg.piggybacked_hb
            c.pb_ok = pb.body.process == msg.sender and reg.verify(msg.sender, pb.body.digest, pb.sig, verifier)
        if msg.ledger:
            c.ledger = [e for e in msg.ledger if reg.verify(e.process, HbBody(e.process, e.round).digest, e.sig, verifier)]
        return c


@dataclass
class Cell:
    payload: BroadcastPayload
    origin_sig: bytes
    sigs: dict  # signer -> signature over payload.digest, originator included
    dead_evidence: bool = False


@dataclass
class EchoTracker:
    digest: bytes
    window_start: int
    is_origin: bool = False


@dataclass
class DeliverTracker:
    payload: BroadcastPayload
    cert: SignatureSet
    round: int
    outer: dict
    send_from: int
    send_until: int
    revived: bool = False
    checked: bool = False


@dataclass
class JoinService:
    view: JoinView
    sigs: dict
    until: int


class Node:
    """Honest process."""

    byzantine = False

    def __init__(
        self,
        pid: ProcessId,
        params: SystemParams,
        registry: KeyRegistry,
        validator: Validator,
        members: Iterable[ProcessId],
        *,
        pool: Iterable[ProcessId] | None = None,
        detect: bool = False,
        pending: bool = False,
        seed: int = 0,
    ):
        self.pid = pid
        self.params = params
        self.R = params.R
        self.reg = registry
        self.val = validator
        self.members: set[ProcessId] = set(members)
        self.pool: frozenset[ProcessId] = frozenset(pool if pool is not None else self.members)
        self.detect = detect
        self.f_view = params.f
        self.rep = params.rep
        self.detected: set[ProcessId] = set()
        self.admitted: dict[ProcessId, int] = {}  # join round; newcomers get R rounds before they can look stale
        self.state = LifeCycle.PENDING if pending else LifeCycle.ALIVE
        self.left = False
        self.ever_crashed = False
        self.alive_since: int | None = None if pending else 0
        self.epoch = 0
        self.hb_epoch = 0
        self.hb_mode = True
        self.store: dict[InstanceKey, dict[bytes, Cell]] = {}
        self.signed: dict[InstanceKey, bytes] = {}
        self.lie: set[InstanceKey] = set()
        self.echo: dict[InstanceKey, EchoTracker] = {}
        self.abandoned: set[InstanceKey] = set()
        self.delivered: dict[InstanceKey, DeliverTracker] = {}
        self.pre_outer: dict[InstanceKey, dict] = {}
        self.relay: dict[ProcessId, tuple[HbBody, dict]] = {}
        self.r_hb: dict[int, set] = {}
        self.heard: dict[int, set] = {}
        self.mine: dict[int, set] = {}
        self.ledger: dict[ProcessId, tuple[int, bytes]] = {}
        self.rx_ledgers: dict[ProcessId, dict[ProcessId, int]] = {}
        self.serving: JoinService | None = None
        self.join_cells: dict[bytes, tuple[JoinView, dict]] = {}
        self.join_req: JoinRequest | None = None
        self.join_deadline = -1
        self.join_retry_at: int | None = None
        self.queued: list[bytes] = []
        self.events: list[tuple] = []
        self.sent_echo_values: dict[InstanceKey, set] = {}
        self._sigcache: dict[bytes, bytes] = {}
        self._targets: tuple[ProcessId, ...] | None = None
        self._rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(pid, 0xB0FF)))

    # ---- views -----------------------------------------------------------

    @property
    def n_view(self) -> int:
        return len(self.members - self.detected)

    @property
    def quorum(self) -> int:
        return max(2 * self.f_view + 1, 2 * self.f_view + 1 + self.rep - len(self.detected))

    def targets(self) -> tuple[ProcessId, ...]:
        if self._targets is None:
            self._targets = tuple(sorted(self.members - self.detected - {self.pid}))
        return self._targets

    def _membership_changed(self) -> None:
        self._targets = None

    def count(self, signers: Iterable[ProcessId], payload: BroadcastPayload | None = None) -> int:
        live = self.members - self.detected
        n = len(live.intersection(signers))
        if payload is not None and is_join(payload) and payload.sender in live and payload.sender in signers:
            n -= 1  # a joiner never counts toward its own admission quorum
        return n

    def _sign(self, digest: bytes) -> bytes:
        s = self._sigcache.get(digest)
        if s is None:
            s = self.reg.sign(self.pid, digest)
            if len(self._sigcache) > 4096:
                self._sigcache.clear()
            self._sigcache[digest] = s
        return s

    def _event(self, r: int, kind: str, inst: InstanceKey | None = None, value: bytes | None = None, count: int = 0) -> None:
        self.events.append((r, self.pid, kind, inst, value, count))

    # ---- scripted actions --------------------------------------------------

    def start_broadcast(self, r: int, value: bytes) -> BroadcastPayload | None:
        if self.state is not LifeCycle.ALIVE:
            return None
        p = BroadcastPayload(self.pid, r, value)
        if p.key in self.store or p.key in self.delivered:
            return None
        sig = self._sign(p.digest)
        self.store[p.key] = {p.digest: Cell(p, sig, {self.pid: sig})}
        self.signed[p.key] = p.digest
        self.echo[p.key] = EchoTracker(p.digest, r, is_origin=True)
        self._event(r, "broadcast", p.key, value, 1)
        return p

    def start_join(self, r: int) -> None:
        if self.state is not LifeCycle.PENDING:
            return
        self.join_req = JoinRequest(self.pid, self.reg.publics[self.pid], r)
        self.join_deadline = r + 1 + self.R
        self.join_cells.clear()
        self.join_retry_at = None
        self._event(r, "join_request")

    def start_leave(self, r: int) -> None:
        if self.start_broadcast(r, LEAVE_TAG) is not None:
            self._event(r, "leave_request")

    def kill(self, r: int) -> None:
        if self.state is LifeCycle.ALIVE:
            self._crash(r, "forced")

    # ---- emission ----------------------------------------------------------

    def active(self, r: int) -> bool:
        if any(True for _ in self.echo):
            return True
        return any(t.send_from <= r <= t.send_until for t in self.delivered.values())

    def emit(self, r: int) -> list[tuple[ProtocolMessage, tuple[ProcessId, ...]]]:
        if self.state is LifeCycle.PENDING:
            return self._emit_pending(r)
        if self.state is not LifeCycle.ALIVE:
            return []
        for v in self.queued:
            self.start_broadcast(r, v)
        self.queued.clear()
        out: list[tuple[ProtocolMessage, tuple[ProcessId, ...]]] = []
        tg = self.targets()
        own_hb = HbBody(self.pid, r)
        own_sig = self._sign(own_hb.digest)
        self._stamp(self.pid, r, own_sig)
        piggy = self.active(r)
        if not piggy and not self.hb_mode:
            self.hb_epoch = r
        self.hb_mode = not piggy
        if piggy:
            pb = PiggybackHb(own_hb, own_sig)
            for inst, tr in self.echo.items():
                cell = self.store[inst][tr.digest]
                p = cell.payload
                kind = MsgKind.BROADCAST if tr.is_origin else MsgKind.ECHO
                sigs = SignatureSet({s: b for s, b in cell.sigs.items() if s != p.sender})
                msg = ProtocolMessage(kind, self.pid, p, sigs, origin_sig=cell.origin_sig, piggybacked_hb=pb)
                out.append((msg, self._targets_for(p, tg)))
                if kind is MsgKind.ECHO:
                    self.sent_echo_values.setdefault(inst, set()).add(p.digest)
            for inst, t in self.delivered.items():
                if t.send_from <= r <= t.send_until:
                    msg = ProtocolMessage(
                        MsgKind.DELIVER, self.pid, t.payload, SignatureSet(t.outer), inner=t.cert, piggybacked_hb=pb
                    )
                    out.append((msg, self._targets_for(t.payload, tg)))
        else:
            self.r_hb.setdefault(r, set()).add(self.pid)
            out.append((ProtocolMessage(MsgKind.HB, self.pid, own_hb, SignatureSet({self.pid: own_sig})), tg))
            for o in sorted(self.relay):
                body, sigs = self.relay[o]
                if r - self.R <= body.round < r and o in self.members and o not in self.detected:
                    agg = dict(sigs)
                    agg[self.pid] = self._sign(body.digest)
                    out.append((ProtocolMessage(MsgKind.HB, self.pid, body, SignatureSet(agg)), tg))
        if self.serving is not None and r <= self.serving.until:
            out.append(self._join_msg())
        if self.detect and out:
            msg, t0 = out[0]
            entries = tuple(
                LedgerEntry(pid, rr, sig) for pid, (rr, sig) in sorted(self.ledger.items()) if rr >= r - 2 * self.R
            )
            out[0] = (
                ProtocolMessage(msg.kind, msg.sender, msg.body, msg.sigs, msg.origin_sig, msg.inner, msg.piggybacked_hb, entries),
                t0,
            )
        return out

    def _targets_for(self, p: BroadcastPayload, tg: tuple[ProcessId, ...]) -> tuple[ProcessId, ...]:
        if is_join(p) and p.sender != self.pid and p.sender not in self.members:
            return tg + (p.sender,)
        return tg

    def _join_msg(self) -> tuple[ProtocolMessage, tuple[ProcessId, ...]]:
        sv = self.serving
        sigs = sv.sigs if len(self.pool.intersection(sv.sigs)) >= TrustedPool(self.pool).forward_threshold else {self.pid: sv.sigs[self.pid]}
        dest = tuple(sorted((self.pool - {self.pid} - self.detected) | {sv.view.request.joiner}))
        return ProtocolMessage(MsgKind.JOIN, self.pid, sv.view, SignatureSet(sigs)), dest

    def _emit_pending(self, r: int):
        req = self.join_req
        if req is None or not (req.round + 1 <= r <= self.join_deadline):
            return []
        sig = self._sign(req.digest)
        return [(ProtocolMessage(MsgKind.JOIN_HB, self.pid, req, SignatureSet({self.pid: sig})), tuple(sorted(self.pool)))]

    # ---- reception ---------------------------------------------------------

    def receive(self, r: int, inbox: list[ProtocolMessage]) -> None:
        if self.left:
            return
        pending = self.state is LifeCycle.PENDING
        for msg in inbox:
            snd = msg.sender
            if snd in self.detected:
                continue
            kind = msg.kind
            if pending:
                if kind is MsgKind.JOIN:
                    self._on_join(r, msg)
                continue
            member = snd in self.members
            if not member:
                if kind is MsgKind.JOIN_HB:
                    self._on_join_hb(r, msg)
                elif kind in (MsgKind.BROADCAST, MsgKind.ECHO, MsgKind.DELIVER) and is_join(msg.body):
                    self._on_instance(r, msg)
                continue
            c = self.val.check(msg, self.pid)
            if c.pb_ok:
                self._on_hb_body(r, msg.piggybacked_hb.body, {snd: msg.piggybacked_hb.sig})
            if c.ledger:
                self._merge_ledger(snd, c.ledger)
            if not c.ok:
                continue
            self.heard.setdefault(r, set()).add(snd)
            if kind is MsgKind.HB:
                self._on_hb_body(r, msg.body, c.sigs)
            elif kind is MsgKind.JOIN:
                self._on_join(r, msg, c)
            elif kind is MsgKind.JOIN_HB:
                self._on_join_hb(r, msg, c)
            else:
                self._on_instance(r, msg, c)

    def _note_mine(self, r: int, signers: Iterable[ProcessId]) -> None:
        self.mine.setdefault(r, set()).update(signers)

    def _on_hb_body(self, r: int, body: HbBody, sigs: dict) -> None:
        o = body.process
        if self.pid in sigs:
            self._note_mine(r, sigs)
        if o == self.pid:
            self.r_hb.setdefault(body.round, set()).update(sigs)
            return
        if o in sigs:
            self._stamp(o, body.round, sigs[o])
        cur = self.relay.get(o)
        if cur is None or body.round > cur[0].round:
            self.relay[o] = (body, dict(sigs))
        elif body.round == cur[0].round:
            cur[1].update(sigs)

    def _on_instance(self, r: int, msg: ProtocolMessage, c: Checked | None = None) -> None:
        if c is None:
            c = self.val.check(msg, self.pid)
            if not c.ok:
                return
            self.heard.setdefault(r, set()).add(msg.sender)
        p: BroadcastPayload = msg.body
        inst = p.key
        if msg.kind is MsgKind.DELIVER:
            self._on_deliver(r, msg, c)
            return
        if p.sender in self.detected:
            return
        if p.sender == self.pid or self.pid in c.sigs:
            self._note_mine(r, c.sigs)
            self._note_mine(r, (p.sender,))
        cells = self.store.setdefault(inst, {})
        cell = cells.get(p.digest)
        if cell is None:
            if cells:
                self.lie.add(inst)
            cell = Cell(p, msg.origin_sig, {p.sender: msg.origin_sig})
            cells[p.digest] = cell
        if inst in self.delivered:
            return
        cell.sigs.update(c.sigs)
        if self.state is not LifeCycle.ALIVE:
            cell.dead_evidence = True
            return
        signed = self.signed.get(inst)
        if signed is None and inst not in self.abandoned:
            self.signed[inst] = p.digest
            cell.sigs[self.pid] = self._sign(p.digest)
            if self.count(cell.sigs, p) >= self.quorum:
                self._deliver(r, p, cell.sigs)
            else:
                self.echo[inst] = EchoTracker(p.digest, r)
        elif signed == p.digest:
            if self.count(cell.sigs, p) >= self.quorum:
                self._deliver(r, p, cell.sigs)
        elif self.count(cell.sigs, p) >= self.quorum:
            self._deliver(r, p, cell.sigs)

    def _on_deliver(self, r: int, msg: ProtocolMessage, c: Checked) -> None:
        p: BroadcastPayload = msg.body
        inst = p.key
        if self.pid in c.sigs:
            self._note_mine(r, c.sigs)
        if self.pid in c.inner:
            self._note_mine(r, c.inner)
        tr = self.delivered.get(inst)
        if tr is not None:
            # the certificate was checked when we delivered; only deliverer signatures matter now
            if tr.payload.digest == p.digest:
                tr.outer.update(c.sigs)
            return
        if self.count(c.inner, p) < self.quorum:
            return
        if self.state is not LifeCycle.ALIVE:
            cells = self.store.setdefault(inst, {})
            cell = cells.get(p.digest)
            if cell is None:
                if cells:
                    self.lie.add(inst)
                cell = Cell(p, c.inner.get(p.sender, b""), {})
                cells[p.digest] = cell
            cell.sigs.update(c.inner)
            cell.dead_evidence = True
            return
        self.pre_outer.setdefault(inst, {}).update(c.sigs)
        self._deliver(r, p, c.inner)

    def _deliver(self, r: int, p: BroadcastPayload, cert: dict, revived: bool = False) -> None:
        inst = p.key
        if inst in self.delivered:
            return
        outer = self.pre_outer.pop(inst, {})
        outer[self.pid] = self._sign(p.deliver_digest())
        q = self.quorum
        certset = SignatureSet(cert).trimmed(max(q, 1), keep=(p.sender,) if not is_join(p) else ())
        span = self.R if revived else 2 * self.R
        self.delivered[inst] = DeliverTracker(p, certset, r, outer, r + 1, r + 1 + span, revived)
        self.echo.pop(inst, None)
        self._event(r, "deliver", inst, p.value, len(cert))
        if is_join(p):
            if p.sender not in self.members:
                self.members.add(p.sender)
                self.admitted[p.sender] = r
                self._resize()
            if self.serving is not None and self.serving.view.request.joiner == p.sender:
                self.serving = None
        elif is_leave(p):
            if p.sender == self.pid:
                self.left = True
            elif p.sender in self.members:
                self.members.discard(p.sender)
                self._resize()

    def _resize(self) -> None:
        self.f_view = max_faults(self.n_view)
        self.rep = 0
        self._membership_changed()

    # ---- membership: ledgers and join flow --------------------------------

    def _stamp(self, pid: ProcessId, rnd: int, sig: bytes) -> None:
        cur = self.ledger.get(pid)
        if cur is None or rnd > cur[0]:
            self.ledger[pid] = (rnd, sig)

    def _merge_ledger(self, sender: ProcessId, entries: list[LedgerEntry]) -> None:
        # entries were verified by the validator
        self.ledger = merge_ledgers(self.ledger, entries, _trusted)
        self.rx_ledgers[sender] = {e.process: e.round for e in entries}

    def detect_crashed(self, r: int) -> set[ProcessId]:
        """Declare processes whose stamps are stale in at least ``2f+1`` ledgers."""
        found: set[ProcessId] = set()
        if r <= self.R:
            self.rx_ledgers.clear()
            return found
        views = [{pid: rr for pid, (rr, _) in self.ledger.items()}] + list(self.rx_ledgers.values())
        settled = {j for j in self.members - self.detected - {self.pid} if self.admitted.get(j, 0) + self.R < r}
        found = stale_processes(views, settled, r - self.R, 2 * self.f_view + 1)
        for j in sorted(found):
            self.detected.add(j)
            self._event(r, "declare_crashed", None, None, j)
        if found:
            self._membership_changed()
        self.rx_ledgers.clear()
        return found

    def _on_join_hb(self, r: int, msg: ProtocolMessage, c: Checked | None = None) -> None:
        if self.state is not LifeCycle.ALIVE or self.pid not in self.pool:
            return
        if c is None:
            c = self.val.check(msg, self.pid)
            if not c.ok:
                return
        req: JoinRequest = msg.body
        if req.joiner in self.members:
            return
        if self.serving is not None and self.serving.view.request != req:
            if r <= self.serving.until:
                return
            self.serving = None
        if self.serving is None:
            view = JoinView(req, self.n_view, tuple(sorted(self.members - self.detected)))
            self.serving = JoinService(view, {self.pid: self._sign(view.digest)}, req.round + 1 + self.R)

    def _on_join(self, r: int, msg: ProtocolMessage, c: Checked | None = None) -> None:
        if c is None:
            c = self.val.check(msg, self.pid)
            if not c.ok:
                return
        view: JoinView = msg.body
        pool_sigs = {s: b for s, b in c.sigs.items() if s in self.pool}
        if self.state is LifeCycle.PENDING:
            if self.join_req is None or view.request != self.join_req:
                return
            cell = self.join_cells.setdefault(view.digest, (view, {}))
            cell[1].update(pool_sigs)
            return
        if self.pid not in self.pool or self.state is not LifeCycle.ALIVE:
            return
        if view.n != self.n_view or view.ids != tuple(sorted(self.members - self.detected)):
            return
        if view.request.joiner in self.members:
            return
        if self.serving is None:
            self.serving = JoinService(view, {self.pid: self._sign(view.digest)}, view.request.round + 1 + self.R)
        if self.serving.view.digest == view.digest:
            self.serving.sigs.update(pool_sigs)

    def _finish_pending(self, r: int) -> None:
        if self.join_req is None:
            if self.join_retry_at is not None and r + 1 >= self.join_retry_at:
                self.start_join(r)
            return
        need = TrustedPool(self.pool).admit_threshold
        for view, sigs in self.join_cells.values():
            if len(self.pool.intersection(sigs)) >= need:
                self.members = set(view.ids) | {self.pid}
                self.admitted = dict.fromkeys(self.members, r)
                self.f_view = max_faults(len(self.members))
                self.rep = 0
                self._membership_changed()
                self.state = LifeCycle.ALIVE
                self.alive_since = r
                self.epoch = r
                self.hb_epoch = r
                self.join_req = None
                self.queued.append(JOIN_TAG + self.reg.publics[self.pid])
                self._event(r, "joined", None, None, len(sigs))
                return
        if r >= self.join_deadline:
            self.join_req = None
            self.join_retry_at = r + 1 + int(self._rng.integers(1, self.R + 1))
            self._event(r, "join_retry")

    # ---- end of round ------------------------------------------------------

    def end_round(self, r: int) -> None:
        if self.state is LifeCycle.PENDING:
            self._finish_pending(r)
            return
        if self.serving is not None and r >= self.serving.until:
            self.serving = None
        if self.left:
            if self.state is LifeCycle.ALIVE:
                self.state = LifeCycle.DEAD
                self._event(r, "left")
            return
        if self.detect:
            self.detect_crashed(r)
        if self.state is LifeCycle.ALIVE:
            case = self.check_self_crash(r)
            if case is not None:
                self._crash(r, case if isinstance(case, str) else f"case{case}")
        elif self.state is LifeCycle.DEAD:
            self.revival_check(r)
        horizon = r - 2 * self.R - 2
        for table in (self.r_hb, self.heard, self.mine):
            for k in [k for k in table if k < horizon]:
                del table[k]

    def _crash(self, r: int, why: str) -> None:
        self.state = LifeCycle.DEAD
        self.ever_crashed = True
        self.echo.clear()
        self._event(r, "crash", None, why)

    def check_heartbeat_liveness(self, r: int) -> bool:
        """False when own heartbeats gathered too few signers over the trailing window."""
        if not self.hb_mode or r <= self.hb_epoch + self.R:
            return True
        seen: set = {self.pid}
        for rr in range(r - 1 - self.R, r):
            seen |= self.r_hb.get(rr, set())
        return self.count(seen) >= self.quorum

    def check_self_crash(self, r: int) -> int | str | None:
        """Return the first self-crash case (1-4, or ``"hb"``) that applies at the end of round ``r``."""
        q = self.quorum
        R = self.R
        for inst, tr in list(self.echo.items()):
            if r >= tr.window_start + R:
                if inst in self.lie:
                    del self.echo[inst]
                    self.abandoned.add(inst)
                else:
                    return 1
        for t in self.delivered.values():
            if not t.checked and not t.revived and r >= t.round + R:
                t.checked = True
                if self.count(t.outer) < q:
                    return 2
        if r >= self.epoch + R:
            lo = r - R + 1
            heard = {self.pid}
            mine = {self.pid}
            for rr in range(lo, r + 1):
                heard |= self.heard.get(rr, set())
                mine |= self.mine.get(rr, set())
            if self.count(heard) < q:
                return 3
            if self.count(mine) < q:
                return 4
        if not self.check_heartbeat_liveness(r):
            return "hb"
        return None

    def revival_check(self, r: int) -> bool:
        if self.left or self.state is not LifeCycle.DEAD:
            return False
        best = None
        for inst in sorted(self.store):
            if inst in self.delivered or not (r - 2 * self.R > inst[1]):
                continue
            for dg, cell in sorted(self.store[inst].items()):
                if cell.dead_evidence and self.count(cell.sigs, cell.payload) >= self.quorum:
                    best = cell
                    break
            if best is not None:
                break
        if best is None:
            return False
        self.state = LifeCycle.ALIVE
        self.epoch = r
        self.hb_epoch = r
        self.echo.clear()
        self.heard.clear()
        self.mine.clear()
        self.r_hb.clear()
        self._event(r, "revive", best.payload.key)
        self._deliver(r, best.payload, best.sigs, revived=True)
        return True
