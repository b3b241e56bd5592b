"""Two broadcasts among seven processes, two of which equivocate.

Prints every delivery and self-crash, then the property report.

    python demos/basic_broadcast.py
"""

from pathlib import Path

from rtbyzcast.adversary import ByzantineNode
from rtbyzcast.config import load_scenario
from rtbyzcast.scenario import run_scenario

cfg = load_scenario(Path(__file__).with_name("basic_broadcast.yaml"))
world, report = run_scenario(cfg)

print(f"n={cfg.params.n} R={cfg.params.R} f={cfg.params.build().f} loss={cfg.net.p_loss}")
print(f"byzantine: {sorted(p for p, nd in world.nodes.items() if isinstance(nd, ByzantineNode))}")
for r, pid, kind, inst, value, count in world.events:
    if kind in ("deliver", "crash", "revive"):
        what = f"{value!r} from instance {inst}" if kind == "deliver" else ""
        print(f"  round {r:3d}  node {pid}  {kind:8s} {what}")
print(report.summary())
