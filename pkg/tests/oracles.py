"""Independent reference implementations used only by the tests.

They deliberately share no code with the package: plain Python loops and the
stdlib ``random`` module instead of the vectorised numpy kernels.
"""

import itertools
import math
import random


def diffusion_fails(C: int, p: float, R: int, rnd: random.Random) -> bool:
    """One broadcast among C correct processes; True if someone misses a signature after R rounds."""
    know = [set() for _ in range(C)]
    know[0].add(0)
    for _ in range(R):
        senders = [i for i in range(C) if 0 in know[i]]
        incoming = [set() for _ in range(C)]
        for s in senders:
            for d in range(C):
                if d != s and rnd.random() >= p:
                    incoming[d] |= know[s]
        for d in range(C):
            know[d] |= incoming[d]
            if 0 in know[d]:
                know[d].add(d)
        if all(len(k) == C for k in know):
            return False
    return True


def crash_fraction(C: int, p: float, R: int, reps: int, seed: int) -> float:
    rnd = random.Random(seed)
    return sum(diffusion_fails(C, p, R, rnd) for _ in range(reps)) / reps


def shutdown_basic_mc(p: float, f: int, draws: int, seed: int) -> tuple[float, float]:
    """Monte-Carlo estimate and standard error: any of 2f+1 crashes."""
    rnd = random.Random(seed)
    hits = 0
    for _ in range(draws):
        if any(rnd.random() < p for _ in range(2 * f + 1)):
            hits += 1
    est = hits / draws
    return est, math.sqrt(max(est * (1 - est), 1e-300) / draws)


def shutdown_over_mc(p: float, n: int, f: int, draws: int, seed: int) -> tuple[float, float]:
    rnd = random.Random(seed)
    hits = 0
    for _ in range(draws):
        if sum(rnd.random() < p for _ in range(n - f)) >= 2:
            hits += 1
    est = hits / draws
    return est, math.sqrt(max(est * (1 - est), 1e-300) / draws)


def min_quorum_intersection(n: int, q: int) -> int:
    """Smallest overlap of two q-subsets of n processes, by enumeration."""
    best = n
    procs = range(n)
    for a in itertools.combinations(procs, q):
        sa = set(a)
        for b in itertools.combinations(procs, q):
            best = min(best, len(sa.intersection(b)))
            if best == 2 * q - n:
                return best
    return best


def hand_traced_quorums(f: int, rep: int, crashes: int) -> list[int]:
    """Quorum after 0..crashes declarations, written out from the shrink rule by hand."""
    q = 2 * f + 1 + rep
    out = [q]
    for _ in range(crashes):
        q = q - 1 if q > 2 * f + 1 else q
        out.append(q)
    return out
