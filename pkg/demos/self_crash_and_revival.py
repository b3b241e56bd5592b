"""A node is cut off, crashes itself, and comes back.

Node 3 is killed in round 1, misses the broadcast, and is revived once it
has collected a full quorum for the instance and the instance is more than
2R rounds old.
"""

from rtbyzcast.config import ScenarioConfig
from rtbyzcast.scenario import run_scenario

R = 4
cfg = ScenarioConfig.model_validate(
    dict(
        params=dict(n=4, R=R),
        membership=dict(kills=[dict(node=3, round=1)]),
        broadcasts=[dict(sender=0, round=2, value="state-update")],
    )
)
world, report = run_scenario(cfg)
for r, pid, kind, inst, value, _ in world.events:
    print(f"round {r:3d}  node {pid}  {kind}" + (f"  {value!r}" if value else ""))
print(f"node 3 ends {world.nodes[3].state.name}; {report.summary()}")
