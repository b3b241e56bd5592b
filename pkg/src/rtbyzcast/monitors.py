"""Property monitors evaluated over a finished world.

A process is *correct* for an instance when it is honest, never crashed (self
or forced), never left, and was already a member when the instance started.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .protocol import LifeCycle

PROPERTIES = ("validity", "no_duplication", "integrity", "agreement", "timeliness", "echo_uniqueness", "dead_silence")


@dataclass
class Report:
    violations: dict[str, list[str]] = field(default_factory=lambda: {p: [] for p in PROPERTIES})
    delivered_instances: int = 0
    crashed_nodes: int = 0

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def add(self, prop: str, msg: str) -> None:
        self.violations[prop].append(msg)

    def summary(self) -> str:
        if self.ok:
            return "all properties hold"
        return "; ".join(f"{k}: {v[0]} (+{len(v) - 1})" for k, v in self.violations.items() if v)


def _correct(node, origin_round: int) -> bool:
    if node.byzantine or node.ever_crashed or node.left:
        return False
    if node.alive_since is None or node.state is LifeCycle.PENDING:
        return False
    return node.alive_since <= origin_round


def check_world(world) -> Report:
    """Check every property on a world that has been run to its horizon."""
    R = world.params.R
    nodes = world.nodes
    rep = Report()
    broadcasts: dict[tuple, bytes] = {}
    deliveries: dict[tuple, list[tuple[int, bytes]]] = {}
    for r, pid, kind, inst, value, _ in world.events:
        if kind == "broadcast" and not nodes[pid].byzantine:
            broadcasts[inst] = value
        elif kind == "deliver":
            deliveries.setdefault((pid, inst), []).append((r, value))
    rep.crashed_nodes = sum(1 for n in nodes.values() if n.ever_crashed)
    instances = set(broadcasts) | {inst for _, inst in deliveries}
    rep.delivered_instances = len({inst for _, inst in deliveries})

    for (pid, inst), ds in deliveries.items():
        if len(ds) > 1 and not nodes[pid].byzantine:
            rep.add("no_duplication", f"node {pid} delivered {inst} {len(ds)} times")

    end = world.round
    for inst in sorted(instances):
        origin, r0 = inst
        if r0 + 3 * R >= end:
            continue  # not settled within the run
        onode = nodes.get(origin)
        origin_correct = onode is not None and _correct(onode, r0) and inst in broadcasts
        correct = [p for p in sorted(nodes) if _correct(nodes[p], r0)]
        got = {p: deliveries[(p, inst)][0] for p in correct if (p, inst) in deliveries}
        honest_vals = {deliveries[(p, inst)][0][1] for p in nodes if not nodes[p].byzantine and (p, inst) in deliveries}
        if onode is not None and not onode.byzantine:
            if inst not in broadcasts and honest_vals:
                rep.add("integrity", f"{inst} delivered but never broadcast")
            elif inst in broadcasts:
                for v in honest_vals:
                    if v != broadcasts[inst]:
                        rep.add("integrity", f"{inst} delivered a value the originator never sent")
        if origin_correct:
            for p in correct:
                if p not in got:
                    rep.add("validity", f"correct node {p} never delivered {inst} from correct originator")
                elif got[p][0] > r0 + 3 * R:
                    rep.add("timeliness", f"node {p} delivered {inst} at round {got[p][0]} > {r0 + 3 * R}")
        values = {v for _, v in got.values()}
        if len(values) > 1:
            rep.add("agreement", f"correct nodes delivered different values for {inst}")
        first = min((t for t, _ in got.values()), default=None)
        if first is not None and first + 2 * R + 2 < end and len(got) < len(correct):
            missing = [p for p in correct if p not in got]
            rep.add("agreement", f"{inst} delivered by {sorted(got)} but not by correct {missing}")

    for pid, node in nodes.items():
        if node.byzantine:
            continue
        for inst, vals in node.sent_echo_values.items():
            if len(vals) > 1:
                rep.add("echo_uniqueness", f"node {pid} echoed {len(vals)} values for {inst}")
    for r, pid, state, count in world.emissions:
        if not nodes[pid].byzantine and state == LifeCycle.DEAD.value:
            rep.add("dead_silence", f"dead node {pid} emitted {count} messages in round {r}")
    return rep
