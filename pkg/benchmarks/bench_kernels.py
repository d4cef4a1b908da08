"""Time the slot-loop kernel compiled with numba against the plain Python loop.

    python benchmarks/bench_kernels.py [--frames 200] [--repeat 3]

Both paths run the same single-slot scenario (10 devices, 100-slot frames)
and must produce the same report; the script checks that before timing.
"""

from __future__ import annotations

import argparse
import time
from contextlib import contextmanager

import numpy as np

from mtcsched import _kernels
from mtcsched._jit import NUMBA_ACTIVE
from mtcsched.figures import SlotSettings, draw_rates, single_slot_scenario
from mtcsched.simulator import SimOptions, simulate


@contextmanager
def kernel(fn):
    saved = _kernels.run_slots
    _kernels.run_slots = fn
    try:
        yield
    finally:
        _kernels.run_slots = saved


def run(settings, frames):
    profs, params, a = single_slot_scenario(draw_rates(settings, 0), settings)
    return simulate(profs, params, a, SimOptions(frames=frames, seed=1, buffer=True, synccs=True))


def best_of(fn, repeat):
    out = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t)
    return min(out)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    settings = SlotSettings(rate_range=(1.0, 5.0))
    slots = args.frames * settings.slots

    if not NUMBA_ACTIVE:
        t = best_of(lambda: run(settings, args.frames), args.repeat)
        print(f"numba disabled; python kernel: {t:.3f} s for {slots} slots")
        return

    run(settings, 2)  # compile or load the cache
    ref = run(settings, args.frames)
    with kernel(_kernels.python_kernel()):
        py = run(settings, args.frames)
    same = all(a.delivered == b.delivered and a.collided == b.collided
               and np.isclose(a.mean_delay, b.mean_delay, equal_nan=True)
               for a, b in zip(ref.devices, py.devices))
    t_nb = best_of(lambda: run(settings, args.frames), args.repeat)
    with kernel(_kernels.python_kernel()):
        t_py = best_of(lambda: run(settings, args.frames), args.repeat)
    print(f"slots simulated : {slots}")
    print(f"reports match   : {same}")
    print(f"numba           : {t_nb:.4f} s  ({slots / t_nb / 1e6:.2f} M slots/s)")
    print(f"python          : {t_py:.4f} s  ({slots / t_py / 1e6:.3f} M slots/s)")
    print(f"speed-up        : {t_py / t_nb:.0f}x")


if __name__ == "__main__":
    main()
