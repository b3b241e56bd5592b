import pytest

from rtbyzcast.config import ScenarioConfig
from rtbyzcast.core import HbBody, LedgerEntry, ParameterError
from rtbyzcast.crypto import KeyRegistry
from rtbyzcast.membership import TrustedPool, merge_ledgers, stale_processes
from rtbyzcast.protocol import LifeCycle
from rtbyzcast.scenario import build_world, run_scenario

REG = KeyRegistry(range(5), seed=0)


def entry(pid, rnd, valid=True):
    sig = REG.sign(pid, HbBody(pid, rnd).digest) if valid else b"bad"
    return LedgerEntry(pid, rnd, sig)


def test_merge_takes_max():
    local = {1: (5, b"x")}
    out = merge_ledgers(local, [entry(1, 9)], REG.verify)
    assert out[1][0] == 9


def test_merge_ignores_invalid_proof():
    local = {1: (5, b"x")}
    assert merge_ledgers(local, [entry(1, 9, valid=False)], REG.verify) == local


def test_merge_disjoint_union_and_no_regression():
    out = merge_ledgers({1: (5, b"x")}, [entry(2, 3), entry(1, 2)], REG.verify)
    assert {k: v[0] for k, v in out.items()} == {1: 5, 2: 3}


def test_stale_threshold():
    views = [{3: 1}, {3: 2}, {3: 0}]
    assert stale_processes(views, [3], limit=5, threshold=3) == {3}
    assert stale_processes(views[:2], [3], limit=5, threshold=3) == set()
    assert stale_processes(views + [{3: 6}], [3], limit=5, threshold=3) == set()


def test_pool_thresholds():
    pool = TrustedPool(frozenset(range(4)))
    assert (pool.byz_bound, pool.forward_threshold, pool.admit_threshold) == (1, 2, 3)
    with pytest.raises(ParameterError):
        TrustedPool(frozenset(range(3)))


def test_initial_overprovisioned_quorum():
    w = build_world(ScenarioConfig.model_validate(dict(params=dict(n=7, R=4, rep=1))))
    assert w.nodes[0].quorum == 4


def detection_world(**extra):
    cfg = dict(params=dict(n=7, R=4, rep=1), membership=dict(detect=True, kills=[dict(node=6, round=5)]), sim=dict(rounds=20))
    cfg.update(extra)
    w, rep = run_scenario(ScenarioConfig.model_validate(cfg))
    return w


def test_detection_declares_once_and_shrinks_quorum():
    w = detection_world()
    decl = [e for e in w.events if e[2] == "declare_crashed"]
    assert sorted(e[1] for e in decl) == [0, 1, 2, 3, 4, 5]
    assert all(e[5] == 6 for e in decl)
    node = w.nodes[0]
    assert node.detected == {6} and node.n_view == 6
    assert node.quorum == 3
    # n=7, rep=1 -> f=1; quorum starts at 2f+1+rep = 4 and drops to 3


def test_detection_idempotent():
    w = detection_world()
    node = w.nodes[0]
    before = (set(node.detected), node.n_view)
    node.rx_ledgers = {}
    node.detect_crashed(w.round + 3)
    assert (set(node.detected), node.n_view) == before


def test_live_node_never_declared():
    w = detection_world(net=dict(p_loss=0.1), sim=dict(rounds=40, seed=4))
    declared = {e[5] for e in w.events if e[2] == "declare_crashed"}
    crashed = {e[1] for e in w.events if e[2] == "crash"}
    assert declared <= crashed


def join_cfg(**kw):
    base = dict(params=dict(n=4, R=4), membership=dict(joiners=[4], joins=[dict(node=4, round=2)]), sim=dict(rounds=30))
    base.update(kw)
    return ScenarioConfig.model_validate(base)


def test_join_becomes_alive_and_members_grow():
    w, rep = run_scenario(join_cfg())
    joined = [e for e in w.events if e[2] == "joined"]
    assert joined and joined[0][0] <= 2 + 4
    assert rep.ok
    for pid in range(4):
        assert 4 in w.nodes[pid].members and w.nodes[pid].f_view == 1


def test_joiner_signature_not_counted():
    w, _ = run_scenario(join_cfg())
    node = w.nodes[0]
    from rtbyzcast.core import BroadcastPayload
    from rtbyzcast.protocol import JOIN_TAG

    p = BroadcastPayload(4, 0, JOIN_TAG + b"k")
    assert node.count({0, 1, 4}, p) == 2


def test_join_fails_without_pool_and_stays_pending():
    cfg = join_cfg(net=dict(p_loss=1.0), sim=dict(rounds=12))
    w, _ = run_scenario(cfg)
    assert w.nodes[4].state is LifeCycle.PENDING
    assert any(e[2] == "join_retry" for e in w.events)


@pytest.mark.parametrize("seed", range(6))
def test_fresh_joiner_not_declared_crashed(seed):
    cfg = join_cfg(
        params=dict(n=7, R=4),
        net=dict(p_loss=0.05),
        sim=dict(rounds=30, seed=seed),
        membership=dict(detect=True, joiners=[7], joins=[dict(node=7, round=2)]),
    )
    w, rep = run_scenario(cfg)
    assert any(e[2] == "joined" for e in w.events)
    assert not [e for e in w.events if e[2] == "declare_crashed"]


def test_join_noop_when_alive():
    w = build_world(join_cfg())
    w.nodes[0].start_join(1)
    assert w.nodes[0].join_req is None


def test_leave_on_lossless_net():
    cfg = ScenarioConfig.model_validate(dict(params=dict(n=5, R=4), membership=dict(leaves=[dict(node=4, round=2)])))
    w, rep = run_scenario(cfg)
    left = [e for e in w.events if e[2] == "left"]
    assert left and left[0][0] <= 2 + 3 * 4
    assert rep.ok
    for pid in range(4):
        assert 4 not in w.nodes[pid].members and w.nodes[pid].f_view == 1
        assert w.nodes[pid].state is LifeCycle.ALIVE
