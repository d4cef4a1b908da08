"""Acceptance criteria 1-10; each test prints one PASS/FAIL line with its numbers."""

from __future__ import annotations

import time
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest

import conftest
from mtcsched.analytic import derive_cycles
from mtcsched.assigner import brute_force_assign, overall_assign
from mtcsched.core import PriorityClass, validate_scenario
from mtcsched.figures import (
    FIG4A,
    FIG4B,
    FIG5A,
    FIG5B,
    FIG6,
    MIXED_QOS,
    SMSA_DEFAULT,
    run_end_to_end,
    replicate_fig2,
    replicate_smsa,
    smsa_spread,
    SlotSettings,
)
from mtcsched.simulator import SimOptions, simulate
from mtcsched.surrogate import (
    DEFAULT_GRID,
    RegressorSpec,
    ScenarioSampler,
    generate_dataset,
    gradient_check,
    init_params,
    train,
)

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]


def verdict(k: int, checks: list[tuple[str, bool]], elapsed: float) -> None:
    ok = all(c for _, c in checks)
    detail = "; ".join(f"{name} [{'ok' if c else 'MISS'}]" for name, c in checks)
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}"
    conftest.VERDICTS[k] = line
    print(line)
    assert ok, line


# ------------------------------------------------------------------ 1

def test_criterion_01_equation_suite():
    import test_analytic as ta

    t0 = time.perf_counter()
    checks = []
    for fn in (ta.test_max_hp_cycle_examples, ta.test_max_hp_cycle_boundary, ta.test_lp_cycle_example,
               ta.test_derive_cycles_examples, ta.test_adf_estimate, ta.test_overall_delay_examples,
               ta.test_collision_after_add_examples, ta.test_state_first_occupant,
               ta.test_state_shared_example):
        try:
            fn()
            checks.append((fn.__name__.removeprefix("test_"), True))
        except AssertionError:
            checks.append((fn.__name__.removeprefix("test_"), False))
    elapsed = time.perf_counter() - t0
    checks.append((f"runtime {elapsed:.3f} s < 1 s", elapsed < 1.0))
    verdict(1, checks, elapsed)


# ------------------------------------------------------------------ 2

def _fig2_modes(table):
    return {m: np.array(table.where(mode=m).column("mean_delay_ms"))
            for m in ("mscs_nobuffer", "mscs_buffer", "mscs_synccs_buffer")}


def test_criterion_02_fig2():
    t0 = time.perf_counter()
    low = _fig2_modes(replicate_fig2(SlotSettings(rate_range=(0.2, 1.0))))
    high = _fig2_modes(replicate_fig2(SlotSettings(rate_range=(1.0, 5.0))))
    checks = []
    for m in ("mscs_nobuffer", "mscs_buffer"):
        v = low[m][0]
        checks.append((f"first mini-slot {m} {v:.2f} ms in [8.8, 13.2]", 8.8 <= v <= 13.2))
    v = low["mscs_buffer"][-1]
    checks.append((f"last mini-slot rates 0.2-1 {v:.2f} ms in [12, 18]", 12.0 <= v <= 18.0))
    v = high["mscs_buffer"][-1]
    checks.append((f"last mini-slot rates 1-5 {v:.2f} ms in [87.5, 162.5]", 87.5 <= v <= 162.5))
    for name, d in (("0.2-1", low), ("1-5", high)):
        cut = 1.0 - d["mscs_synccs_buffer"] / d["mscs_buffer"]
        checks.append((f"SyncCS min reduction rates {name} {cut.min():.1%} >= 40%", cut.min() >= 0.40))
    verdict(2, checks, time.perf_counter() - t0)


# ------------------------------------------------------------------ 3, 4

@lru_cache(maxsize=None)
def smsa_table(settings: SlotSettings):
    return replicate_smsa(settings)


def per_minislot(table, column: str) -> np.ndarray:
    ms = np.array(table.column("mini_slot"))
    v = np.array(table.column(column), dtype=float)
    return np.array([v[ms == m].mean() for m in np.unique(ms)])


def test_criterion_03_fig3():
    t0 = time.perf_counter()
    checks = []
    for label, s in (("no buffer", replace(SMSA_DEFAULT, buffer=False)), ("buffer", SMSA_DEFAULT)):
        t = smsa_table(s)
        spread = max(smsa_spread(t).values())
        checks.append((f"{label} max spread {spread:.2%} <= 5%", spread <= 0.05))
        sim, ana = per_minislot(t, "mean_delay_ms"), per_minislot(t, "analytic_ms")
        err = np.abs(ana - sim) / sim
        worst = int(np.argmax(err))
        checks.append((f"{label} analytic error max {err[worst]:.1%} at mini-slot {worst + 1} <= 20%",
                       err.max() <= 0.20))
    verdict(3, checks, time.perf_counter() - t0)


def test_criterion_04_fig4():
    t0 = time.perf_counter()
    base = per_minislot(smsa_table(SMSA_DEFAULT), "mean_delay_ms")
    fast = per_minislot(smsa_table(FIG4A), "mean_delay_ms")
    short = per_minislot(smsa_table(FIG4B), "mean_delay_ms")
    checks = [
        (f"t_m 7 us lower in every mini-slot (max ratio {np.max(fast / base):.3f})",
         bool(np.all(fast < base))),
        (f"5-slot frame first mini-slot {short[0]:.3f} ms < 1 ms", short[0] < 1.0),
    ]
    verdict(4, checks, time.perf_counter() - t0)


# ------------------------------------------------------------------ 5, 6, 7

@lru_cache(maxsize=None)
def end_to_end(name: str):
    preset = {"fig5a": FIG5A, "fig5b": FIG5B, "fig6": FIG6}[name]
    t0 = time.perf_counter()
    res = run_end_to_end(preset)
    return res, time.perf_counter() - t0


def lp_anchors_shared(res) -> bool:
    seen = [a for d, a in res.assignment.anchors.items()
            if res.assignment.classes[d] == PriorityClass.LP and a is not None]
    return len(seen) != len(set(seen))


def test_criterion_05_fig5a():
    res, elapsed = end_to_end("fig5a")
    rep = res.report
    checks = [("F_s = 1", res.assignment.success)]
    if rep is not None:
        hp, rp, lp = (rep.classes[c.name] for c in PriorityClass)
        for c, s in zip(PriorityClass, (hp, rp, lp)):
            checks.append((f"{c.name} max delay {s.max_delay * 1e3:.3f} ms <= "
                           f"{MIXED_QOS.delay_of(c) * 1e3:g}", s.max_delay <= MIXED_QOS.delay_of(c)))
            checks.append((f"{c.name} max collision {s.max_collision:.2%} <= "
                           f"{MIXED_QOS.collision_of(c):.1%}", s.max_collision <= MIXED_QOS.collision_of(c)))
        checks.append((f"HP mean delay {hp.mean_delay * 1e3:.3f} ms in [0.27, 0.49]",
                       0.27e-3 <= hp.mean_delay <= 0.49e-3))
        checks.append((f"HP mean collision {hp.mean_collision:.2%} <= 1.5%", hp.mean_collision <= 0.015))
        checks.append((f"LP collision {lp.max_collision:.3%} = 0", lp.max_collision == 0.0))
        est = derive_cycles(FIG5A.params, [p.rate for p in res.profiles]).t_f_l
        gap = abs(rep.mean_lp_cycle - est) / est
        checks.append((f"LP cycle {rep.mean_lp_cycle * 1e3:.2f} ms vs {est * 1e3:.2f} ms within 5%",
                       gap <= 0.05))
    checks.append((f"runtime {elapsed:.0f} s < 300 s", elapsed < 300))
    verdict(5, checks, elapsed)


def test_criterion_06_fig5b_contrast():
    a, ea = end_to_end("fig5a")
    b, eb = end_to_end("fig5b")
    lp_b = b.report.classes["LP"].max_collision if b.report else float("nan")
    checks = [
        ("(5,45,270) LP mini-slots exclusive", not lp_anchors_shared(a)),
        ("(5,35,140) LP mini-slots shared", lp_anchors_shared(b)),
        (f"(5,35,140) LP max collision {lp_b:.2%} > 0", lp_b > 0),
    ]
    verdict(6, checks, ea + eb)


def test_criterion_07_fig6():
    res, elapsed = end_to_end("fig6")
    checks = [("F_s = 1", res.assignment.success)]
    if res.report is not None:
        hp = res.report.classes["HP"]
        checks.append((f"HP mean delay {hp.mean_delay * 1e3:.3f} ms <= 0.35", hp.mean_delay <= 0.35e-3))
        checks.append((f"HP mean collision {hp.mean_collision:.2%} <= 1.0%", hp.mean_collision <= 0.010))
    verdict(7, checks, elapsed)


# ------------------------------------------------------------------ 8

def test_criterion_08_assigner_oracle():
    from test_assigner import random_instance

    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    checked = false_ok = commit_bad = greedy_ok = 0
    while checked < 500:
        inst = random_instance(rng)
        if inst is None:
            continue
        profs, params, qos = inst
        a, est = overall_assign(profs, params, qos)
        oracle = brute_force_assign(profs, params, qos)
        if a.success:
            greedy_ok += 1
            if oracle is None or not validate_scenario(profs, params, qos, a).ok:
                false_ok += 1
        for d, delay in est.delay.items():
            cls = a.classes[d]
            if delay > qos.delay_of(cls) + 1e-12 or est.collision_commit[d] > qos.collision_of(cls) + 1e-12:
                commit_bad += 1
        checked += 1
    checks = [
        (f"{checked} instances, F_s=1 on {greedy_ok}", checked >= 500),
        (f"F_s=1 where oracle infeasible: {false_ok}", false_ok == 0),
        (f"commit-time threshold violations: {commit_bad}", commit_bad == 0),
    ]
    verdict(8, checks, time.perf_counter() - t0)


# ------------------------------------------------------------------ 9

def test_criterion_09_surrogate():
    t0 = time.perf_counter()
    data = generate_dataset(ScenarioSampler(), DEFAULT_GRID, 1000, MIXED_QOS, seed=0)
    t_gen = time.perf_counter() - t0
    res = train(data.features, data.labels, epochs=50, batch=128, seed=0)
    elapsed = time.perf_counter() - t0
    h = res.history
    gap = abs(h.val_loss[-1] - h.train_loss[-1]) / h.val_loss[-1]
    checks = [
        (f"{len(data)} entries >= 6000", len(data) >= 6000),
        (f"held-out R2 {res.test_r2:.3f} >= 0.9 (1 - SSres/SStot = {res.test_r2_conventional:.3f})",
         res.test_r2 >= 0.9),
        (f"indication-bit accuracy {res.bit_accuracy:.1%} >= 90%", res.bit_accuracy >= 0.90),
        (f"train/val loss gap {gap:.1%} < 25% (train {h.train_loss[-1]:.5f}, val {h.val_loss[-1]:.5f})",
         gap < 0.25),
        (f"runtime {elapsed / 60:.1f} min (dataset {t_gen / 60:.1f}) < 30", elapsed < 1800),
    ]
    verdict(9, checks, elapsed)


# ------------------------------------------------------------------ 10

def test_criterion_10_gradient_and_invariants():
    t0 = time.perf_counter()
    spec = RegressorSpec(n_inputs=4, widths=(8, 6, 13), activations=("elu", "elu", "linear"),
                         dropout=(0.0, 0.0, 0.0))
    rng = np.random.default_rng(10)
    err = gradient_check(spec, init_params(spec, 10), rng.normal(size=(5, 4)), rng.normal(size=(5, 13)))
    res = run_end_to_end(replace(FIG5A, duration=20.0))
    opts = SimOptions(duration=20.0, seed=3, random_phase=True)
    r1 = simulate(res.profiles, FIG5A.params, res.assignment, opts, FIG5A.qos)
    r2 = simulate(res.profiles, FIG5A.params, res.assignment, opts, FIG5A.qos)
    broken = sum(s.generated != s.delivered + s.collided + s.dropped + s.queued for s in r1.devices)
    same = r1.summary() == r2.summary() and [vars(s) for s in r1.devices] == [vars(s) for s in r2.devices]
    checks = [
        (f"gradient max relative error {err:.1e} < 1e-4", err < 1e-4),
        (f"conservation violations {broken} of {len(r1.devices)}", broken == 0),
        ("identical seeds give identical reports", same),
    ]
    verdict(10, checks, time.perf_counter() - t0)
