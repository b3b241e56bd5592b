"""How big must the broadcast window be?

First the crash fraction of the echo diffusion for a few group sizes and
windows at 60% loss, then the smallest window that survives a 90% lossy
network for growing systems, and finally the whole-system shutdown
probability for a per-node crash probability.
"""

from rtbyzcast.experiments import estimate_R, reliability_cell, sys_shutdown_basic, sys_shutdown_overprovisioned

print("crash fraction at p_loss=0.6 (2000 reps)")
print("   C  " + "".join(f"R={R:<7d}" for R in (5, 6, 10)))
for C in (5, 10, 20):
    cells = [reliability_cell(C, R, 2000, seed=1, p_loss=0.6).crash_fraction for R in (5, 6, 10)]
    print(f"{C:4d}  " + "".join(f"{x:<9.4f}" for x in cells))

print("\nsmallest safe R at p_loss=0.9 (2000 reps)")
for n in (10, 20, 50):
    print(f"  n={n:3d}  R={estimate_R(n, 0.9, 2000, seed=1)}")

print("\nprobability every correct node crashes")
for p in (1e-4, 1e-2, 0.5):
    print(f"  p={p:<7g} f=1: {sys_shutdown_basic(p, 1):.3g}   n=6 over-provisioned: {sys_shutdown_overprovisioned(p, 6, 1):.3g}")
