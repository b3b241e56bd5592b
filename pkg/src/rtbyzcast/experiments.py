"""Monte-Carlo harness and closed-form shutdown probabilities.

The reliability kernel models one broadcast among the ``|C|`` correct
processes only (Byzantine processes never forward).  In round 1 the
broadcaster sends its signature to everyone; from then on every process that
holds the broadcaster's signature sends its whole set of known signatures to
everyone, and receivers add their own signature.  An instance *fails* when
some correct process still misses a signature after ``R`` rounds.  The kernel
records the completion round ``T`` of each instance, so the failure event for
window ``R`` is ``T > R``.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.stats import binom

from .core import ParameterError, max_faults

NEVER = np.iinfo(np.int64).max

RELIABILITY_COLUMNS = ("model", "C", "p_loss", "alpha", "beta", "R", "reps", "crashes", "crash_fraction")
SHUTDOWN_COLUMNS = ("formula", "f", "n", "p_crash", "p_shutdown")
WINDOW_COLUMNS = ("n", "C", "p_loss", "reps", "R")
LATENCY_COLUMNS = ("n", "p_loss", "R", "d_max_s", "latency_s", "max_deliver_delay_rounds")
BANDWIDTH_COLUMNS = ("n", "p_loss", "payload_bits", "peak_emission_bits", "peak_reception_bits")


# ---- closed forms ----------------------------------------------------------


def sys_shutdown_basic(p_crash: float, f: int) -> float:
    """System shutdown probability when any of ``2f+1`` quorum members self-crashes."""
    if not 0 <= p_crash <= 1:
        raise ParameterError("p_crash must be in [0, 1]")
    # -expm1(log1p) keeps precision for tiny p_crash
    if p_crash == 1:
        return 1.0
    return -math.expm1((2 * f + 1) * math.log1p(-p_crash))


def sys_shutdown_overprovisioned(p_crash: float, n: int, f: int) -> float:
    """Shutdown probability with one spare replica: two or more of the ``n-f`` correct processes crash."""
    if not 0 <= p_crash <= 1:
        raise ParameterError("p_crash must be in [0, 1]")
    if n != 3 * f + 3:
        raise ParameterError(f"over-provisioned formula needs n = 3f+3, got n={n}, f={f}")
    m = n - f
    return float(binom.sf(1, m, p_crash))


# ---- diffusion kernel --------------------------------------------------------


def completion_times(
    C: int,
    reps: int,
    rng: np.random.Generator,
    *,
    p_loss: float | None = None,
    ge: tuple[float, float] | None = None,
    max_rounds: int = 200,
    chunk: int = 2000,
    stop_after: int | None = None,
) -> np.ndarray:
    """Round at which every correct process holds all ``C`` signatures, per repetition.

    Entries stay ``NEVER`` if completion did not happen within ``max_rounds``.
    With ``stop_after`` the search stops at the first chunk containing a
    repetition slower than ``stop_after`` rounds (the remaining entries are
    left at ``-1``), which lets a window search abort early.
    """
    if (p_loss is None) == (ge is None):
        raise ValueError("give exactly one of p_loss or ge")
    out = np.full(reps, -1, dtype=np.int64)
    idx = np.arange(C)
    done = 0
    while done < reps:
        m = min(chunk, reps - done)
        know = np.zeros((m, C, C), dtype=np.float32)
        know[:, 0, 0] = 1.0
        T = np.full(m, NEVER, dtype=np.int64)
        active = np.arange(m)
        bad = np.zeros((m, C, C), dtype=bool) if ge is not None else None
        for t in range(1, max_rounds + 1):
            k = know[active]
            if ge is None:
                link = (rng.random((len(active), C, C)) >= p_loss).astype(np.float32)
            else:
                alpha, beta = ge
                b = bad[active]
                if t > 1:
                    u = rng.random(b.shape)
                    b = np.where(b, u >= alpha, u < beta)
                    bad[active] = b
                link = (~b).astype(np.float32)
            link *= (k[:, :, 0] > 0)[:, :, None]  # only informed processes send
            recv = np.matmul(link.transpose(0, 2, 1), k)
            k = np.maximum(k, (recv > 0).astype(np.float32))
            informed = k[:, :, 0] > 0
            k[:, idx, idx] = np.maximum(k[:, idx, idx], informed)
            know[active] = k
            full = k.reshape(len(active), -1).min(axis=1) > 0
            T[active[full]] = t
            active = active[~full]
            if len(active) == 0:
                break
            if stop_after is not None and t >= stop_after:
                break
        out[done : done + m] = T
        done += m
        if stop_after is not None and (T > stop_after).any():
            break
    return out


def cell_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(x) for x in key)))


def _pkey(x: float) -> int:
    return int(round(x * 1_000_000))


@dataclass(frozen=True)
class ReliabilityRow:
    model: str
    C: int
    p_loss: float | None
    alpha: float | None
    beta: float | None
    R: int
    reps: int
    crashes: int

    @property
    def crash_fraction(self) -> float:
        return self.crashes / self.reps

    def as_csv(self) -> tuple:
        def fmt(x):
            return "" if x is None else repr(x)

        return (self.model, self.C, fmt(self.p_loss), fmt(self.alpha), fmt(self.beta), self.R, self.reps, self.crashes, f"{self.crash_fraction:.6g}")


def reliability_cell(C: int, R: int, reps: int, seed: int, *, p_loss: float | None = None, ge: tuple[float, float] | None = None) -> ReliabilityRow:
    """Crash count for one ``(|C|, loss, R)`` cell with its own random stream."""
    if ge is None:
        rng = cell_rng(seed, 1, C, _pkey(p_loss), R)
        T = completion_times(C, reps, rng, p_loss=p_loss, max_rounds=R)
        return ReliabilityRow("bernoulli", C, p_loss, None, None, R, reps, int((T > R).sum()))
    rng = cell_rng(seed, 2, C, _pkey(ge[0]), _pkey(ge[1]), R)
    T = completion_times(C, reps, rng, ge=ge, max_rounds=R)
    return ReliabilityRow("gilbert-elliot", C, None, ge[0], ge[1], R, reps, int((T > R).sum()))


def run_reliability(
    sizes: Sequence[int],
    Rs: Sequence[int],
    reps: int,
    seed: int,
    *,
    p_loss: Sequence[float] = (),
    ge: Sequence[tuple[float, float]] = (),
    progress: Callable[[str], None] | None = None,
) -> list[ReliabilityRow]:
    rows = []
    for C in sizes:
        for p in p_loss:
            for R in Rs:
                rows.append(reliability_cell(C, R, reps, seed, p_loss=p))
                if progress:
                    progress(f"reliability C={C} p={p} R={R}: {rows[-1].crash_fraction:.4g}")
        for g in ge:
            for R in Rs:
                rows.append(reliability_cell(C, R, reps, seed, ge=tuple(g)))
                if progress:
                    progress(f"reliability C={C} ge={g} R={R}: {rows[-1].crash_fraction:.4g}")
    return rows


def estimate_R(n: int, p_loss: float, reps: int, seed: int, *, r_max: int = 400) -> int:
    """Smallest window with zero failed instances, searched linearly from 1.

    Every candidate window gets a fresh random stream.  All ``f`` Byzantine
    processes withhold, so only ``n - f`` processes take part in diffusion.
    """
    C = n - max_faults(n)
    for R in range(1, r_max + 1):
        rng = cell_rng(seed, 3, n, _pkey(p_loss), R)
        T = completion_times(C, reps, rng, p_loss=p_loss, max_rounds=R, stop_after=R)
        if not (T > R).any():
            return R
    raise RuntimeError(f"no window up to {r_max} rounds succeeded")


# ---- full-protocol measurements -------------------------------------------------


def _scenario(n: int, R: int, p: float, seed: int, *, value: bytes, backend: str = "sim"):
    from .config import ScenarioConfig

    f = max_faults(n)
    return ScenarioConfig.model_validate(
        dict(
            params=dict(n=n, R=R),
            crypto=dict(backend=backend),
            net=dict(p_loss=p),
            sim=dict(seed=seed),
            adversary=dict(count=f, kind="withhold", targets="last-k"),
            broadcasts=[dict(sender=0, round=0, value=value.decode("latin-1"))],
        )
    )


@dataclass(frozen=True)
class LatencyRow:
    n: int
    p_loss: float
    R: int
    d_max: float
    max_delay: int

    @property
    def latency(self) -> float:
        return 3 * self.R * self.d_max

    def as_csv(self) -> tuple:
        return (self.n, self.p_loss, self.R, f"{self.d_max:.6g}", f"{self.latency:.6g}", self.max_delay)


def run_latency(n: int, p_loss: float, R: int, seed: int, backend: str = "ecdsa-p256") -> LatencyRow:
    """Measure ``d_max`` (per-node per-round processing time) on one broadcast and report ``3 R d_max``."""
    from .scenario import build_world

    cfg = _scenario(n, R, p_loss, seed, value=b"x" * 16, backend=backend)
    world = build_world(cfg, independent_verify=True)
    world.timed = True
    world.run(5 * R + 4)
    d_max = max(world.proc_time.values(), default=0.0)
    delays = [r - inst[1] for r, _, kind, inst, _, _ in world.events if kind == "deliver"]
    return LatencyRow(n, p_loss, R, d_max, max(delays, default=-1))


@dataclass(frozen=True)
class BandwidthRow:
    n: int
    p_loss: float
    payload_bits: int
    peak_sent: int
    peak_received: int

    def as_csv(self) -> tuple:
        return (self.n, self.p_loss, self.payload_bits, self.peak_sent, self.peak_received)


def run_bandwidth(n: int, p_loss: float, payload_bits: int, seed: int, R: int = 6) -> BandwidthRow:
    """Peak per-node broadcast traffic (bits per round) with all ``f`` Byzantine nodes withholding.

    Only broadcast traffic is counted (Broadcast, Echo and Deliver frames
    including their piggybacked heartbeats); the heartbeat exchange between
    broadcasts is excluded.  The run stops once every deliver window closed.
    """
    from .core import MsgKind
    from .scenario import build_world

    value = bytes((i * 7 + 1) % 251 for i in range(payload_bits // 8))
    cfg = _scenario(n, R, p_loss, seed, value=value)
    world = build_world(cfg, traffic=True)
    world.traffic.kinds = {MsgKind.BROADCAST, MsgKind.ECHO, MsgKind.DELIVER}
    world.run(3 * R + 2 * R + 3)
    correct = [pid for pid, nd in world.nodes.items() if not nd.byzantine]
    ps = max(world.traffic.peak(p, "sent") for p in correct)
    pr = max(world.traffic.peak(p, "received") for p in correct)
    return BandwidthRow(n, p_loss, payload_bits, 8 * ps, 8 * pr)


# ---- CSV output -----------------------------------------------------------------


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_spec(spec, out_dir: str | Path, reps: int | None = None, progress: Callable[[str], None] | None = None) -> dict[str, Path]:
    """Run every section of an :class:`~rtbyzcast.config.ExperimentSpec` and write the five CSVs."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reps = reps or spec.reps
    seed = spec.seed
    paths = {name: out / f"{name}.csv" for name in ("reliability", "shutdown", "window", "latency", "bandwidth")}

    rel = []
    if spec.reliability is not None:
        c = spec.reliability
        rel = run_reliability(
            c.sizes, c.R, reps, seed,
            p_loss=c.p_loss if c.model == "bernoulli" else (),
            ge=c.ge if c.model == "gilbert-elliot" else (),
            progress=progress,
        )
    write_csv(paths["reliability"], RELIABILITY_COLUMNS, (r.as_csv() for r in rel))

    sd = []
    if spec.shutdown is not None:
        for f in spec.shutdown.f:
            for p in spec.shutdown.p_crash:
                sd.append(("basic", f, 3 * f + 1, repr(p), f"{sys_shutdown_basic(p, f):.12g}"))
                sd.append(("overprovisioned", f, 3 * f + 3, repr(p), f"{sys_shutdown_overprovisioned(p, 3 * f + 3, f):.12g}"))
    write_csv(paths["shutdown"], SHUTDOWN_COLUMNS, sd)

    win = []
    if spec.window is not None:
        w_reps = spec.window.reps or reps
        for n in spec.window.sizes:
            R = estimate_R(n, spec.window.p_loss, w_reps, seed)
            win.append((n, n - max_faults(n), repr(spec.window.p_loss), w_reps, R))
            if progress:
                progress(f"window n={n}: R={R}")
    write_csv(paths["window"], WINDOW_COLUMNS, win)

    lat = []
    if spec.latency is not None:
        for n in spec.latency.sizes:
            for p in spec.latency.p_loss:
                R = spec.latency.R or estimate_R(n, p, min(reps, 2000), seed)
                R = max(R, 2)
                lat.append(run_latency(n, p, R, seed, spec.latency.backend).as_csv())
                if progress:
                    progress(f"latency n={n} p={p}: R={R}")
    # wall-clock columns are not reproducible; everything else is
    write_csv(paths["latency"], LATENCY_COLUMNS, lat)

    bw = []
    if spec.bandwidth is not None:
        for n in spec.bandwidth.sizes:
            for p in spec.bandwidth.p_loss:
                for bits in spec.bandwidth.payload_bits:
                    bw.append(run_bandwidth(n, p, bits, seed, spec.bandwidth.R).as_csv())
                    if progress:
                        progress(f"bandwidth n={n} p={p} bits={bits}")
    write_csv(paths["bandwidth"], BANDWIDTH_COLUMNS, bw)
    return paths
