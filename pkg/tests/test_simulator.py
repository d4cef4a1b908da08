from __future__ import annotations

import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtcsched import _kernels
from mtcsched._jit import NUMBA_ACTIVE
from mtcsched.core import (
    POISSON,
    QUASI_PERIODIC,
    Assignment,
    DeviceProfile,
    PriorityClass,
    ProtocolParams,
)
from mtcsched.simulator import SimOptions, simulate

T_M, T_X = 9e-6, 133e-6


def scenario(rates, per_mini=1, n_m=None, slots=1, pattern=POISSON, jitter=0.0):
    n_m = n_m or int(np.ceil(len(rates) / per_mini))
    profs = [DeviceProfile(i + 1, PriorityClass.LP, float(r), pattern, jitter) for i, r in enumerate(rates)]
    params = ProtocolParams(n_m, slots, slots, slots)
    anchors = {p.id: (1, i // per_mini + 1) for i, p in enumerate(profs)}
    return profs, params, Assignment(anchors, {p.id: p.cls for p in profs}, True, len(profs))


def conserved(rep):
    return all(s.generated == s.delivered + s.collided + s.dropped + s.queued for s in rep.devices)


def test_single_device_light_load():
    profs, params, a = scenario([1.0], slots=1)
    rep = simulate(profs, params, a, SimOptions(duration=2000.0, seed=3))
    d = rep.devices[0].mean_delay
    # residual of a 9 us idle slot plus one mini-slot and the transmission
    assert T_X < d < T_X + 2 * T_M
    assert d == pytest.approx(0.5 * T_M + T_M + T_X, rel=0.02)


def test_shared_mini_slot_always_collides():
    profs, params, a = scenario([2.0, 2.0], per_mini=2, pattern=QUASI_PERIODIC)
    rep = simulate(profs, params, a, SimOptions(duration=50.0, seed=0, warmup=0.0))
    for s in rep.devices:
        assert s.delivered == 0
        assert s.collided == s.generated > 0
        assert s.collision_prob == 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.5, 40.0), min_size=1, max_size=8), st.integers(1, 3),
       st.booleans(), st.booleans(), st.integers(0, 2**32 - 1))
def test_conservation(rates, per_mini, buffer, synccs, seed):
    profs, params, a = scenario(rates, per_mini=per_mini, slots=3)
    rep = simulate(profs, params, a, SimOptions(duration=5.0, seed=seed, buffer=buffer, synccs=synccs))
    assert conserved(rep)
    if buffer:
        assert all(s.dropped == 0 for s in rep.devices)


def test_no_buffer_drops():
    profs, params, a = scenario([300.0, 300.0, 300.0], slots=20)
    rep = simulate(profs, params, a, SimOptions(duration=20.0, seed=1, buffer=False))
    assert conserved(rep)
    assert sum(s.dropped for s in rep.devices) > 0
    assert all(s.queued <= 1 for s in rep.devices)


def test_determinism():
    profs, params, a = scenario(np.linspace(1, 5, 10), slots=100)
    opts = SimOptions(frames=500, seed=11)
    r1 = simulate(profs, params, a, opts)
    r2 = simulate(profs, params, a, opts)
    assert r1.summary() == r2.summary()
    assert [vars(s) for s in r1.devices] == [vars(s) for s in r2.devices]


def test_frames_mode_counts_cycles():
    profs, params, a = scenario([1.0, 2.0], slots=10)
    rep = simulate(profs, params, a, SimOptions(frames=123, seed=0))
    assert rep.lp_cycles == 123
    assert rep.slots == 1230


def test_warmup_excluded():
    profs, params, a = scenario([5.0], slots=1, pattern=QUASI_PERIODIC)
    rep = simulate(profs, params, a, SimOptions(duration=100.0, warmup=50.0, seed=0))
    assert abs(rep.devices[0].generated - 250) <= 1


def test_delay_increases_with_mini_slot():
    profs, params, a = scenario([3.0] * 10, slots=100)
    rep = simulate(profs, params, a, SimOptions(frames=20000, seed=5, synccs=False))
    d = [s.mean_delay for s in rep.devices]
    assert all(x < y for x, y in zip(d, d[1:]))


def test_synccs_never_slower():
    profs, params, a = scenario(np.linspace(1, 5, 10), slots=100)
    on = simulate(profs, params, a, SimOptions(frames=5000, seed=2, synccs=True))
    off = simulate(profs, params, a, SimOptions(frames=5000, seed=2, synccs=False))
    for x, y in zip(on.devices, off.devices):
        assert y.mean_delay >= x.mean_delay


@pytest.mark.skipif(not NUMBA_ACTIVE, reason="numba disabled")
def test_numba_matches_python_kernel(monkeypatch):
    profs, params, a = scenario(np.linspace(1, 30, 12), per_mini=2, slots=4)
    opts = SimOptions(duration=20.0, seed=9, buffer=False)
    fast = simulate(profs, params, a, opts)
    monkeypatch.setattr(_kernels, "run_slots", _kernels.python_kernel())
    slow = simulate(profs, params, a, opts)
    assert fast.summary() == slow.summary()
    assert [vars(s) for s in fast.devices] == [vars(s) for s in slow.devices]


def test_env_flag_disables_numba():
    code = ("from mtcsched._jit import NUMBA_ACTIVE; from mtcsched import _kernels; "
            "print(NUMBA_ACTIVE, hasattr(_kernels.run_slots, 'py_func'))")
    env = {**os.environ, "MTCSCHED_DISABLE_NUMBA": "1"}
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["False", "False"]


def test_lp_cycle_matches_estimator():
    from mtcsched.analytic import derive_cycles
    from mtcsched.assigner import overall_assign
    from mtcsched.figures import FIG5A, generate_population

    profs = generate_population(FIG5A.population, 0)
    a, _ = overall_assign(profs, FIG5A.params, FIG5A.qos)
    rep = simulate(profs, FIG5A.params, a, SimOptions(duration=40.0, seed=0, random_phase=True))
    est = derive_cycles(FIG5A.params, [p.rate for p in profs]).t_f_l
    assert rep.mean_lp_cycle == pytest.approx(est, rel=0.05)


@pytest.mark.xfail(strict=True, reason="with the reconstructed slot semantics the SyncCS last "
                   "mini-slot delay at rates 1-5 is about 8 ms, far under the 35 ms target")
def test_synccs_last_minislot_rates_1_to_5():
    from mtcsched.figures import SlotSettings, minislot_delays

    d = minislot_delays(SlotSettings(rate_range=(1.0, 5.0), synccs=True, buffer=True))[:, 0]
    assert d[-1] == pytest.approx(35e-3, rel=0.30)
