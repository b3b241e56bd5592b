"""Join, leave and crash detection on one timeline.

Process 7 joins in round 2, process 5 leaves in round 20 and process 6 is
killed in round 30; the survivors detect the silent one from the ledgers
they exchange.
"""

from rtbyzcast.config import ScenarioConfig
from rtbyzcast.scenario import run_scenario

cfg = ScenarioConfig.model_validate(
    dict(
        params=dict(n=7, R=4),
        net=dict(p_loss=0.05),
        sim=dict(seed=5, rounds=60),
        membership=dict(
            detect=True,
            joiners=[7],
            joins=[dict(node=7, round=2)],
            leaves=[dict(node=5, round=20)],
            kills=[dict(node=6, round=30)],
        ),
    )
)
world, report = run_scenario(cfg)
declared = {}
for r, pid, kind, _, value, count in world.events:
    if kind == "declare_crashed":
        declared.setdefault(count, []).append((r, pid))
    elif kind in ("joined", "left", "crash", "join_retry"):
        print(f"round {r:3d}  node {pid}  {kind}")
for target, who in declared.items():
    rounds = sorted({r for r, _ in who})
    print(f"node {target} declared crashed by {sorted(p for _, p in who)} in rounds {rounds}")
alive = sorted(p for p, nd in world.nodes.items() if nd.state.name == "ALIVE")
print(f"alive at the end: {alive}; node 0 counts {sorted(world.nodes[0].detected)} as crashed")
print(report.summary())
