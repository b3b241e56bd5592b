import math

import numpy as np
import pytest

from oracles import crash_fraction, shutdown_basic_mc, shutdown_over_mc
from rtbyzcast.core import ParameterError
from rtbyzcast.experiments import (
    completion_times,
    estimate_R,
    reliability_cell,
    run_latency,
    run_reliability,
    sys_shutdown_basic,
    sys_shutdown_overprovisioned,
)


def test_shutdown_basic_examples():
    assert sys_shutdown_basic(0.0, 1) == 0.0
    assert sys_shutdown_basic(1.0, 1) == 1.0
    # direct expansion: 1-(1-p)^3 = 3p - 3p^2 + p^3
    p = 1e-6
    assert sys_shutdown_basic(p, 1) == pytest.approx(3 * p - 3 * p**2 + p**3, rel=1e-12)
    assert sys_shutdown_basic(p, 1) == pytest.approx(2.999997e-6, rel=1e-6)


def test_shutdown_overprovisioned_examples():
    assert sys_shutdown_overprovisioned(0.0, 6, 1) == 0.0
    assert sys_shutdown_overprovisioned(0.5, 6, 1) == 0.8125
    with pytest.raises(ParameterError):
        sys_shutdown_overprovisioned(0.5, 7, 1)


@pytest.mark.parametrize("p", [1e-2, 0.5])
def test_shutdown_formulas_match_sampling(p):
    est, se = shutdown_basic_mc(p, 1, 20_000, seed=1)
    assert abs(sys_shutdown_basic(p, 1) - est) <= 4 * se + 1e-12
    est, se = shutdown_over_mc(p, 6, 1, 20_000, seed=2)
    assert abs(sys_shutdown_overprovisioned(p, 6, 1) - est) <= 4 * se + 1e-12


def test_lossless_reliability_is_perfect():
    for C in (2, 5, 20):
        assert reliability_cell(C, 2, 500, seed=0, p_loss=0.0).crashes == 0


def test_high_loss_small_window_nearly_always_fails():
    kernel = reliability_cell(5, 5, 2000, seed=3, p_loss=0.9).crash_fraction
    oracle = crash_fraction(5, 0.9, 5, 2000, seed=4)
    assert kernel > 0.95 and oracle > 0.95


@pytest.mark.parametrize("C,p,R", [(5, 0.6, 6), (10, 0.6, 5), (5, 0.3, 4)])
def test_kernel_agrees_with_independent_oracle(C, p, R):
    reps = 3000
    a = reliability_cell(C, R, reps, seed=5, p_loss=p).crash_fraction
    b = crash_fraction(C, p, R, reps, seed=6)
    se = math.sqrt(max(a * (1 - a) + b * (1 - b), 1e-9) / reps)
    assert abs(a - b) <= 4 * se + 1e-3


def test_ge_kernel_runs_and_orders():
    mild = reliability_cell(5, 6, 2000, seed=1, ge=(0.5, 0.01)).crash_fraction
    harsh = reliability_cell(5, 6, 2000, seed=1, ge=(0.3, 0.4)).crash_fraction
    assert mild <= harsh


def test_completion_times_early_stop():
    rng = np.random.default_rng(0)
    T = completion_times(10, 5000, rng, p_loss=0.9, max_rounds=3, chunk=500, stop_after=3)
    assert (T > 3).any() and (T == -1).any()


def test_run_reliability_grid_shape():
    rows = run_reliability([5, 10], [5, 10], 200, seed=1, p_loss=[0.3, 0.6])
    assert len(rows) == 8 and {r.C for r in rows} == {5, 10}


def test_estimate_R_lossless_is_two():
    assert estimate_R(4, 0.0, 500, seed=1) == 2
    assert estimate_R(10, 0.0, 500, seed=1) == 2


def test_latency_row_bound_and_scaling():
    row = run_latency(4, 0.0, 4, seed=1, backend="sim")
    assert 0 <= row.max_delay <= 3 * 4
    assert row.latency == pytest.approx(3 * 4 * row.d_max)
