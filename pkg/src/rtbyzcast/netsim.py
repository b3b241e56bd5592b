"""Synchronous-round lossy network.

Every directed link owns an independent random stream derived from the master
seed with ``SeedSequence(seed, spawn_key=(src, dst))``, so adding a process
never perturbs the draws of existing links.  A link makes one draw per round:
all frames sent on that link in that round share the fate of the draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from .core import ParameterError, ProcessId, ProtocolMessage

_CHUNK = 64


def ge_stationary_loss(alpha: float, beta: float) -> float:
    """Long-run fraction of rounds spent in the bad state."""
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ParameterError("alpha and beta must lie in (0, 1]")
    return beta / (alpha + beta)


def burst_length_pmf(alpha: float, L: int) -> float:
    """P(bad burst lasts exactly ``L`` rounds | burst started)."""
    if L < 1:
        raise ParameterError("burst length must be >= 1")
    return alpha * (1 - alpha) ** (L - 1)


def check_ge(alpha: float, beta: float, bursty: bool = True) -> None:
    if not (0 < alpha <= 1 and 0 < beta <= 1):
        raise ParameterError(f"GE parameters out of range: alpha={alpha}, beta={beta}")
    if bursty and not (1 - beta) > alpha:
        raise ParameterError(f"bursty GE channel needs (1-beta) > alpha, got alpha={alpha}, beta={beta}")


def link_rng(seed: int, src: int, dst: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(src, dst))))


class BernoulliLink:
    """Independent per-round omission with probability ``p_loss``."""

    def __init__(self, p_loss: float, rng: np.random.Generator):
        if not 0 <= p_loss <= 1:
            raise ParameterError(f"p_loss must be in [0, 1], got {p_loss}")
        self.p_loss = p_loss
        self.rng = rng
        self._buf = np.empty(0)
        self._i = 0

    def _draw(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self.rng.random(_CHUNK)
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u

    def advance(self, rnd: int) -> None:
        pass

    def delivers(self) -> bool:
        if self.p_loss == 0:
            return True
        if self.p_loss == 1:
            return False
        return self._draw() >= self.p_loss


class GilbertElliotLink(BernoulliLink):
    """Two-state Markov channel; the bad state omits everything.

    The state moves at the start of each round from round 1 on, so round 0 is
    always spent in ``initial`` (good by default).
    """

    def __init__(self, alpha: float, beta: float, rng: np.random.Generator, bursty: bool = True, initial_bad: bool = False):
        check_ge(alpha, beta, bursty)
        self.alpha = alpha
        self.beta = beta
        self.bad = initial_bad
        self.rng = rng
        self._buf = np.empty(0)
        self._i = 0

    def advance(self, rnd: int) -> None:
        if rnd == 0:
            return
        u = self._draw()
        if self.bad:
            if u < self.alpha:
                self.bad = False
        elif u < self.beta:
            self.bad = True

    def delivers(self) -> bool:
        return not self.bad


def simulate_ge_states(alpha: float, beta: float, rounds: int, rng: np.random.Generator, initial_bad: bool = False) -> np.ndarray:
    """Vectorised bad-state indicator for one GE chain over ``rounds`` rounds.

    Uses the same transition rule as :class:`GilbertElliotLink` (state at round
    0 is the initial state).
    """
    # transition into round t consumes draw t-1, exactly like the per-link object
    ul = rng.random(max(rounds - 1, 0)).tolist()
    out = np.empty(rounds, dtype=bool)
    bad = initial_bad
    for t in range(rounds):
        if t > 0:
            u = ul[t - 1]
            bad = not (u < alpha) if bad else u < beta
        out[t] = bad
    return out


def burst_lengths(bad: np.ndarray) -> np.ndarray:
    """Lengths of maximal runs of ``True`` that start after a good round (the first run is dropped if it is censored)."""
    b = np.concatenate(([False], bad.astype(bool), [False]))
    d = np.diff(b.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    lengths = ends - starts
    if bad.size and bad[-1]:
        lengths = lengths[:-1]  # censored at the end
    if bad.size and bad[0]:
        lengths = lengths[1:]
    return lengths


@dataclass(frozen=True)
class NetConfig:
    model: str = "bernoulli"
    p_loss: float = 0.0
    alpha: float = 0.5
    beta: float = 0.5
    bursty: bool = True
    start_bad: bool = False

    def __post_init__(self) -> None:
        if self.model not in ("bernoulli", "gilbert-elliot"):
            raise ParameterError(f"unknown net model {self.model!r}")
        if self.model == "gilbert-elliot":
            check_ge(self.alpha, self.beta, self.bursty)
        elif not 0 <= self.p_loss <= 1:
            raise ParameterError("p_loss must be in [0, 1]")


class LinkField:
    """Lazily built map of directed links."""

    def __init__(self, cfg: NetConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self._links: dict[tuple[int, int], BernoulliLink] = {}
        self._round = -1
        self._advanced: set[tuple[int, int]] = set()

    def link(self, src: int, dst: int) -> BernoulliLink:
        key = (src, dst)
        ln = self._links.get(key)
        if ln is None:
            rng = link_rng(self.seed, src, dst)
            if self.cfg.model == "bernoulli":
                ln = BernoulliLink(self.cfg.p_loss, rng)
            else:
                ln = GilbertElliotLink(self.cfg.alpha, self.cfg.beta, rng, self.cfg.bursty, self.cfg.start_bad)
            self._links[key] = ln
        return ln

    def advance(self, rnd: int, ids: Iterable[int]) -> None:
        """Move every GE link among ``ids`` to round ``rnd`` (no-op for Bernoulli)."""
        if self.cfg.model == "bernoulli":
            return
        ids = list(ids)
        for s in ids:
            for d in ids:
                if s != d:
                    self.link(s, d).advance(rnd)

    def round_mask(self, pairs: Iterable[tuple[int, int]]) -> dict[tuple[int, int], bool]:
        return {p: self.link(*p).delivers() for p in pairs}


Outbox = list[tuple[ProtocolMessage, tuple[ProcessId, ...]]]


@dataclass
class Traffic:
    """Per-node per-round byte counters."""

    sent: dict[tuple[int, int], int]
    received: dict[tuple[int, int], int]
    kinds: set | None = None  # count only these message kinds (None = all)

    @classmethod
    def empty(cls) -> "Traffic":
        return cls({}, {})

    def peak(self, node: int, direction: str, rounds: range | None = None) -> int:
        table = self.sent if direction == "sent" else self.received
        vals = [v for (r, nd), v in table.items() if nd == node and (rounds is None or r in rounds)]
        return max(vals, default=0)


def transmit(
    links: LinkField,
    rnd: int,
    outboxes: dict[ProcessId, Outbox],
    alive_receivers: Callable[[int], bool],
    traffic: Traffic | None = None,
) -> dict[ProcessId, list[ProtocolMessage]]:
    """Apply per-link omission to one round of outbound traffic.

    Returns the inbox of each receiver in deterministic order (by sender id,
    then emission order).  A link's single draw for the round is taken only if
    something is sent on it, which keeps streams aligned with traffic rather
    than with wall time; GE links advance independently of traffic.
    """
    inbox: dict[ProcessId, list[ProtocolMessage]] = {}
    fate: dict[tuple[int, int], bool] = {}
    for src in sorted(outboxes):
        for msg, targets in outboxes[src]:
            counted = traffic is not None and (traffic.kinds is None or msg.kind in traffic.kinds)
            size = msg.size_bytes() if counted else 0
            for dst in targets:
                if dst == src:
                    continue
                if counted:
                    k = (rnd, src)
                    traffic.sent[k] = traffic.sent.get(k, 0) + size
                key = (src, dst)
                ok = fate.get(key)
                if ok is None:
                    ok = links.link(src, dst).delivers()
                    fate[key] = ok
                if ok and alive_receivers(dst):
                    inbox.setdefault(dst, []).append(msg)
                    if counted:
                        k = (rnd, dst)
                        traffic.received[k] = traffic.received.get(k, 0) + size
    return inbox


EVENT_COLUMNS = ("round", "node", "direction", "kind", "instance", "value", "signer_count")


class World:
    """Drives a set of nodes through synchronous rounds.

    Round ``r`` runs: link state transitions, scripted actions, emission,
    per-link omission, reception, then each node's end-of-round checks.
    """

    def __init__(self, params, nodes: dict, links: LinkField, validator, *, traffic: bool = False, log_messages: bool = False):
        self.params = params
        self.nodes = nodes
        self.links = links
        self.validator = validator
        self.round = 0
        self.actions: dict[int, list[tuple[str, int, object]]] = {}
        self.traffic = Traffic.empty() if traffic else None
        self.log_messages = log_messages
        self.rows: list[tuple] = []
        self.emissions: list[tuple[int, int, str, int]] = []
        self.proc_time: dict[tuple[int, int], float] = {}
        self.timed = False
        self.events: list[tuple] = []

    def schedule(self, rnd: int, action: str, node: int, arg: object = None) -> None:
        self.actions.setdefault(rnd, []).append((action, node, arg))

    def _apply(self, r: int, action: str, pid: int, arg) -> None:
        node = self.nodes[pid]
        if action == "broadcast":
            node.start_broadcast(r, arg)
        elif action == "kill":
            node.kill(r)
        elif action == "join":
            node.start_join(r)
        elif action == "leave":
            node.start_leave(r)
        else:
            raise ValueError(f"unknown action {action!r}")

    def step(self) -> None:
        import time

        r = self.round
        self.validator.new_round()
        ids = sorted(self.nodes)
        self.links.advance(r, ids)
        for action, pid, arg in self.actions.get(r, ()):
            self._apply(r, action, pid, arg)
        outboxes = {}
        for pid in ids:
            node = self.nodes[pid]
            state = node.state.value
            t0 = time.perf_counter() if self.timed else 0.0
            out = node.emit(r)
            if self.timed:
                self.proc_time[(r, pid)] = time.perf_counter() - t0
            if out:
                outboxes[pid] = out
                self.emissions.append((r, pid, state, len(out)))
                if self.log_messages:
                    for msg, tg in out:
                        self.rows.append((r, pid, "send", msg.kind.value, _inst(msg), _val(msg), len(msg.sigs)))
        inbox = transmit(self.links, r, outboxes, self.nodes.__contains__, self.traffic)
        for pid in ids:
            node = self.nodes[pid]
            msgs = inbox.get(pid, [])
            if self.log_messages:
                for msg in msgs:
                    self.rows.append((r, pid, "recv", msg.kind.value, _inst(msg), _val(msg), len(msg.sigs)))
            t0 = time.perf_counter() if self.timed else 0.0
            node.receive(r, msgs)
            node.end_round(r)
            if self.timed:
                self.proc_time[(r, pid)] = self.proc_time.get((r, pid), 0.0) + time.perf_counter() - t0
        for pid in ids:
            node = self.nodes[pid]
            if node.events:
                for ev in node.events:
                    rr, p, kind, inst, value, count = ev
                    self.rows.append((rr, p, "event", kind, _fmt_inst(inst), "" if value is None else _fmt_val(value), count))
                self.events.extend(node.events)
                node.events = []
        self.round += 1

    def run(self, rounds: int) -> "World":
        for _ in range(rounds):
            self.step()
        return self

    def write_log(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EVENT_COLUMNS)
            w.writerows(self.rows)


def _fmt_inst(inst) -> str:
    return "" if inst is None else f"{inst[0]}:{inst[1]}"


def _fmt_val(v) -> str:
    from .protocol import fmt_value

    if isinstance(v, str):
        return v

    return fmt_value(v)


def _inst(msg: ProtocolMessage) -> str:
    return _fmt_inst(msg.instance)


def _val(msg: ProtocolMessage) -> str:
    from .core import BroadcastPayload

    return _fmt_val(msg.body.value) if isinstance(msg.body, BroadcastPayload) else ""
