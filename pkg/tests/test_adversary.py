import itertools

import pytest

from rtbyzcast.adversary import canonical_kind, resolve_targets
from rtbyzcast.config import ScenarioConfig
from rtbyzcast.core import ParameterError
from rtbyzcast.netsim import World
from rtbyzcast.scenario import build_world, run_scenario


def cfg(kind, n=4, p=0.0, sender=0, seed=0, **adv):
    return ScenarioConfig.model_validate(
        dict(
            params=dict(n=n, R=4),
            net=dict(p_loss=p),
            sim=dict(seed=seed),
            adversary=dict(count=(n - 1) // 3, kind=kind, targets="first-k", **adv),
            broadcasts=[dict(sender=sender, round=1, value="m")],
        )
    )


def test_target_selection():
    assert resolve_targets("first-k", 2, range(7), 2) == [0, 1]
    assert resolve_targets("last-k", 2, range(7), 2) == [5, 6]
    assert resolve_targets([3], 1, range(7), 2) == [3]
    with pytest.raises(ParameterError):
        resolve_targets("last-k", 3, range(7), 2)
    assert canonical_kind("withhold_signatures") == "withhold"


def test_silent_originator_never_echoed():
    w, rep = run_scenario(cfg("silent"))
    assert not any((0, 1) in w.nodes[p].store for p in (1, 2, 3))
    assert rep.ok


def test_withholders_cannot_block_delivery():
    w, rep = run_scenario(cfg("withhold", n=7, sender=3))
    assert rep.ok
    assert {e[1] for e in w.events if e[2] == "deliver"} >= {2, 3, 4, 5, 6}


@pytest.mark.parametrize("split", [s for k in range(0, 4) for s in itertools.combinations((1, 2, 3), k)])
@pytest.mark.parametrize("cross", [False, True])
def test_equivocation_all_splits(split, cross):
    c = cfg("equivocate", cross_forward=cross)
    w = build_world(c)
    w.nodes[0].split = frozenset(split)
    w.run(30)
    from rtbyzcast.monitors import check_world

    rep = check_world(w)
    assert rep.ok, rep.summary()
    vals = {e[4] for e in w.events if e[2] == "deliver" and e[3] == (0, 1)}
    assert len(vals) <= 1


@pytest.mark.parametrize("kind", ["silent", "withhold", "equivocate", "random_noise"])
def test_adversary_never_forges(kind):
    c = cfg(kind, n=7, p=0.2, seed=3)
    w = build_world(c)
    byz = {pid for pid, nd in w.nodes.items() if nd.byzantine}
    seen: dict[int, set] = {b: set() for b in byz}
    reg = w.nodes[0].reg
    for _ in range(25):
        r = w.round
        w.validator.new_round()
        w.links.advance(r, sorted(w.nodes))
        for action, pid, arg in w.actions.get(r, ()):
            w._apply(r, action, pid, arg)
        out = {pid: nd.emit(r) for pid, nd in w.nodes.items()}
        for b in byz:
            for msg, _ in out[b]:
                digest = msg.body.deliver_digest() if msg.kind.value == "Deliver" else msg.body.digest
                for s, sig in msg.sigs.items():
                    if s not in byz and reg.verify(s, digest, sig):
                        assert (s, sig) in seen[b]
        from rtbyzcast.netsim import transmit

        inbox = transmit(w.links, r, {k: v for k, v in out.items() if v}, w.nodes.__contains__)
        for pid in sorted(w.nodes):
            msgs = inbox.get(pid, [])
            if pid in byz:
                for m in msgs:
                    seen[pid].update(m.sigs.items())
                    if m.inner:
                        seen[pid].update(m.inner.items())
            w.nodes[pid].receive(r, msgs)
            w.nodes[pid].end_round(r)
        w.round += 1


@pytest.mark.parametrize("kind", ["silent", "withhold", "equivocate", "random_noise"])
@pytest.mark.parametrize("p", [0.0, 0.2])
def test_properties_under_each_strategy(kind, p):
    for seed in range(3):
        _, rep = run_scenario(cfg(kind, n=7, p=p, seed=seed, sender=4))
        assert rep.ok, rep.summary()
