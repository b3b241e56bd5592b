"""Build and run one world from a :class:`ScenarioConfig`."""

from __future__ import annotations

from .adversary import EquivocateNode, node_class, resolve_targets
from .config import ScenarioConfig
from .crypto import KeyRegistry
from .monitors import Report, check_world
from .netsim import LinkField, NetConfig, World
from .protocol import Node, Validator


def default_horizon(cfg: ScenarioConfig) -> int:
    R = cfg.params.R
    last = 0
    m = cfg.membership
    for t in (*m.joins, *m.leaves, *m.kills):
        last = max(last, t.round)
    for b in cfg.broadcasts:
        last = max(last, b.round)
    # joins add a pool exchange plus the join broadcast itself
    extra = 2 * R + 4 if m.joins else 0
    return last + extra + 5 * R + 4


def build_world(cfg: ScenarioConfig, *, traffic: bool = False, log_messages: bool = False, independent_verify: bool = False) -> World:
    params = cfg.params.build()
    seed = cfg.sim.seed
    initial = list(range(params.n))
    joiners = sorted(cfg.membership.joiners)
    reg = KeyRegistry(initial + joiners, seed, cfg.crypto.backend, per_node_cache=independent_verify)
    val = Validator(reg, independent=independent_verify)
    adv = cfg.adversary
    byz = set(resolve_targets(adv.targets, adv.count, initial, params.f)) if adv.count or isinstance(adv.targets, list) else set()
    nodes = {}
    common = dict(pool=initial, detect=cfg.membership.detect, seed=seed)
    for pid in initial:
        if pid in byz:
            cls = node_class(adv.kind)
            extra = {"cross_forward": adv.cross_forward} if cls is EquivocateNode else {}
            nodes[pid] = cls(pid, params, reg, val, initial, **common, **extra)
        else:
            nodes[pid] = Node(pid, params, reg, val, initial, **common)
    for pid in joiners:
        nodes[pid] = Node(pid, params, reg, val, initial, pending=True, **common)
    net = NetConfig(**cfg.net.model_dump())
    world = World(params, nodes, LinkField(net, seed), val, traffic=traffic, log_messages=log_messages)
    for b in cfg.broadcasts:
        world.schedule(b.round, "broadcast", b.sender, b.payload())
    for t in cfg.membership.joins:
        world.schedule(t.round, "join", t.node)
    for t in cfg.membership.leaves:
        world.schedule(t.round, "leave", t.node)
    for t in cfg.membership.kills:
        world.schedule(t.round, "kill", t.node)
    return world


def run_scenario(cfg: ScenarioConfig, **kw) -> tuple[World, Report]:
    world = build_world(cfg, **kw)
    world.run(cfg.sim.rounds or default_horizon(cfg))
    return world, check_world(world)


SUITE_SIZES = (4, 7, 10)
SUITE_LOSSES = (0.0, 0.1, 0.3)
SUITE_ADVERSARIES = ("none", "silent", "equivocate", "withhold")


def random_scenario(index: int, seed: int, *, sizes=SUITE_SIZES, losses=SUITE_LOSSES, adversaries=SUITE_ADVERSARIES) -> ScenarioConfig:
    """Scenario number ``index`` of a seeded property-suite stream.

    The grid cell cycles deterministically with ``index`` so every
    (size, loss, adversary) combination is covered evenly; the window, the
    broadcasters and their rounds are drawn at random.
    """
    import numpy as np

    cells = [(n, p, a) for n in sizes for p in losses for a in adversaries]
    n, p, adv = cells[index % len(cells)]
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))
    R = int(rng.choice([4, 6]))
    f = (n - 1) // 3
    count = 0 if adv == "none" else int(rng.integers(1, f + 1))
    k = int(rng.integers(1, 3))
    senders = rng.choice(n, size=k, replace=False)
    broadcasts = [dict(sender=int(s), round=int(rng.integers(0, R + 1)), value=f"v{index}-{i}") for i, s in enumerate(senders)]
    return ScenarioConfig.model_validate(
        dict(
            params=dict(n=n, R=R),
            net=dict(p_loss=p),
            sim=dict(seed=int(rng.integers(0, 2**31))),
            adversary=dict(count=count, kind="withhold" if adv == "none" else adv, targets="first-k" if rng.random() < 0.5 else "last-k"),
            broadcasts=broadcasts,
        )
    )


def run_property_suite(runs: int, seed: int, progress=None) -> dict:
    """Run ``runs`` random scenarios; return violation counts per property and the failing indices."""
    from .monitors import PROPERTIES

    totals = {p: 0 for p in PROPERTIES}
    failing: list[tuple[int, str]] = []
    delivered = crashed = 0
    for i in range(runs):
        cfg = random_scenario(i, seed)
        world, rep = run_scenario(cfg)
        delivered += rep.delivered_instances
        crashed += rep.crashed_nodes
        for prop, msgs in rep.violations.items():
            totals[prop] += len(msgs)
        if not rep.ok:
            failing.append((i, rep.summary()))
        if progress and (i + 1) % 1000 == 0:
            progress(f"property suite: {i + 1}/{runs} runs, {len(failing)} failing")
    return {"runs": runs, "violations": totals, "failing": failing, "delivered_instances": delivered, "crashed_nodes": crashed}
