"""Slot-by-slot simulation kernel. All times are int64 nanosecond ticks."""

import numpy as np

from ._jit import njit


@njit
def run_slots(n_m, n_pos, cell_ptr, cell_dev, arr, arr_off, t_m, t_x,
              synccs, buffer, end_tick, max_cycles, warmup,
              ptr, outcome, delay_sum, delay_max, claims):
    """Advance the channel slot by slot until ``end_tick`` or ``max_cycles``.

    ``outcome`` marks each arrival: 1 delivered, 2 collided, 3 dropped, 0 still
    pending. Delay sums and maxima (ticks) cover delivered packets that arrived
    at or after ``warmup``. ``claims[m]`` counts slots won by mini-slot m
    (index n_m counts unclaimed slots). Returns
    (end time, completed LP cycles, summed LP cycle ticks, summed squared
    LP cycle ticks in ms^2, slots run).
    """
    full = n_m * t_m + t_x
    idle = n_m * t_m if synccs else full
    t = np.int64(0)
    pos = 0
    cycles = 0
    cycle_start = np.int64(0)
    cycle_sum = np.int64(0)
    cycle_sq = 0.0
    n_slots = 0
    ready = np.empty(cell_dev.shape[0] + 1, dtype=np.int64)
    while t < end_tick:
        if max_cycles >= 0 and cycles >= max_cycles:
            break
        base = pos * n_m
        n_ready = 0
        won = n_m
        for m in range(n_m):
            for k in range(cell_ptr[base + m], cell_ptr[base + m + 1]):
                d = cell_dev[k]
                i = ptr[d]
                if arr_off[d] + i < arr_off[d + 1] and arr[arr_off[d] + i] <= t:
                    ready[n_ready] = d
                    n_ready += 1
            if n_ready > 0:
                won = m
                break
        claims[won] += 1
        if n_ready > 0:
            # the winner goes on air right after its own mini-slot (that is what
            # later mini-slots sense as busy); the slot keeps its full length
            done = t + (won + 1) * t_m + t_x
            for j in range(n_ready):
                d = ready[j]
                i = ptr[d]
                a = arr[arr_off[d] + i]
                if n_ready == 1:
                    outcome[arr_off[d] + i] = 1
                    if a >= warmup:
                        delay = done - a
                        delay_sum[d] += delay
                        if delay > delay_max[d]:
                            delay_max[d] = delay
                else:
                    outcome[arr_off[d] + i] = 2
                i += 1
                if not buffer:
                    # arrivals while holding the packet were dropped
                    while arr_off[d] + i < arr_off[d + 1] and arr[arr_off[d] + i] < done:
                        outcome[arr_off[d] + i] = 3
                        i += 1
                ptr[d] = i
            t = t + full
        else:
            t = t + idle
        n_slots += 1
        pos += 1
        if pos == n_pos:
            pos = 0
            cycles += 1
            length = t - cycle_start
            cycle_sum += length
            cycle_sq += (length / 1e6) ** 2
            cycle_start = t
    return t, cycles, cycle_sum, cycle_sq, n_slots


def python_kernel():
    """The uncompiled slot loop (identical to ``run_slots`` when numba is off)."""
    return getattr(run_slots, "py_func", run_slots)
